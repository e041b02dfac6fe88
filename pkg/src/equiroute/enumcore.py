"""Route-enumeration kernel selection.

Prefers the compiled extension; falls back to the pure-Python twin.
Set EQUIROUTE_PURE_PYTHON=1 to force the fallback (used by the benchmark
and the twin-agreement tests).
"""

import os

if os.environ.get("EQUIROUTE_PURE_PYTHON"):
    from . import _enum_core_py as _impl
else:
    try:
        from . import _enum_core_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _enum_core_py as _impl

enumerate_columns = _impl.enumerate_columns
BACKEND = _impl.BACKEND


def available_backends():
    out = ["python"]
    try:
        from . import _enum_core_cy  # noqa: F401

        out.insert(0, "compiled")
    except ImportError:
        pass
    return out
