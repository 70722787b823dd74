"""Riemannian motion policies composed over a tree of task maps."""

from .errors import (
    ConfigError,
    DegenerateError,
    DimensionError,
    NonFiniteError,
    NumericalFailure,
    RmpflowError,
    SingularDomainError,
)
from .gds import (
    GdsSpec,
    MetricDecomposition,
    StructuredGds,
    curvature,
    gds_natural_rmp,
    inertia_class_check,
)
from .rmp import CanonicalRmp, NaturalRmp, resolve
from .sim import SimState, Trajectory, integrate, lyapunov_series, metrics
from .taskmap import TaskMap, compose, stack
from .tree import RmpNode, RmpTree, pullback, pushforward

__all__ = [
    "CanonicalRmp",
    "ConfigError",
    "DegenerateError",
    "DimensionError",
    "GdsSpec",
    "NaturalRmp",
    "NonFiniteError",
    "NumericalFailure",
    "RmpNode",
    "RmpTree",
    "RmpflowError",
    "SimState",
    "SingularDomainError",
    "StructuredGds",
    "TaskMap",
    "MetricDecomposition",
    "Trajectory",
    "compose",
    "curvature",
    "gds_natural_rmp",
    "integrate",
    "lyapunov_series",
    "metrics",
    "pullback",
    "pushforward",
    "resolve",
    "stack",
    "inertia_class_check",
]
