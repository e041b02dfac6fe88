import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
pyx = os.path.join("src", "equiroute", "_enum_core_cy.pyx")
if os.path.exists(pyx):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "equiroute._enum_core_cy",
                    [pyx],
                    include_dirs=[np.get_include()],
                    # fp-contract off keeps float results identical to the
                    # pure-Python twin (no FMA fusion).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )
    except ImportError:
        ext_modules = []  # pure-Python fallback is selected at import time

setup(ext_modules=ext_modules)
