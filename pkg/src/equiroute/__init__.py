"""Equitable relief-aid distribution: routing, allocation, branch-and-price."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Instance,
    RouteDelivery,
    Solution,
    evaluate_iaaf,
    generate_instance,
    gini_index,
    load_instance,
    save_instance,
    total_time,
)
