"""Multi-class dynamic vehicle routing: the Separate Queues policy, its bounds and simulations."""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .model import (ClassSpec, Demand, Environment, ProblemInstance, Region,  # noqa: E402
                    load_factor, make_instance, validate_instance)
from .stochastic import ServiceDistribution  # noqa: E402

__all__ = [
    "BACKEND",
    "ClassSpec",
    "Demand",
    "Environment",
    "ProblemInstance",
    "Region",
    "ServiceDistribution",
    "load_factor",
    "make_instance",
    "validate_instance",
]
