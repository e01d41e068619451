"""Exact uniform sampling of lozenge tilings of a hexagon by shuffling.

A tiling of the ``a x b x c`` hexagon is a family of ``N = c`` non-intersecting
up/flat paths over ``T = a + b`` time steps that rise ``S = b`` in total.  The
shuffling steps ``S -> S +/- 1`` map the uniform measure on one box to the
uniform measure on the next, which yields a perfect sampler in ``O(NTS)``
operations and a family of stationary dynamics with determinantal
space-time correlations.
"""

__version__ = "0.1.0"

from .core import BoxDims, LozengeTiling, PathFamily, enumerate_families, omega_size, to_lozenges, validate
from .errors import (
    CapacityError,
    DomainError,
    InconsistentStateError,
    OutsideBulkError,
    SingularConfigurationError,
    UnsupportedConfigurationError,
)
from .shuffle import MarkovPlan, RandomSource, run_chain, sample_split, sample_uniform, step_down, step_up

__all__ = [
    "BoxDims",
    "CapacityError",
    "DomainError",
    "InconsistentStateError",
    "LozengeTiling",
    "MarkovPlan",
    "OutsideBulkError",
    "PathFamily",
    "RandomSource",
    "SingularConfigurationError",
    "UnsupportedConfigurationError",
    "__version__",
    "enumerate_families",
    "omega_size",
    "run_chain",
    "sample_split",
    "sample_uniform",
    "step_down",
    "step_up",
    "to_lozenges",
    "validate",
]
