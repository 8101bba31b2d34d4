"""Perturbative and exact analysis of adiabatic optimisation gaps on random Exact Cover 3."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DegenerateNeighborhood,
    GaplabError,
    InvalidParameter,
    PairTooClose,
    ResonantIntermediate,
    SizeError,
)
from .instance import Instance, cost, generate_instance, is_solution  # noqa: E402
from .solver import SolutionPair, SolutionSet, enumerate_solutions, select_pair  # noqa: E402

__all__ = [
    "__version__",
    "ConvergenceError",
    "DegenerateNeighborhood",
    "GaplabError",
    "InvalidParameter",
    "PairTooClose",
    "ResonantIntermediate",
    "SizeError",
    "Instance",
    "cost",
    "generate_instance",
    "is_solution",
    "SolutionPair",
    "SolutionSet",
    "enumerate_solutions",
    "select_pair",
]
