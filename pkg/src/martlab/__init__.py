"""martlab: a desk-scale laboratory for martingale-transform projection operators.

Spectral multipliers on the flat torus (heat semigroup, second-order Riesz
compositions, Laplace-transform-type multipliers, SU(2) class functions) are
computed exactly up to truncation and used as oracles for their probabilistic
construction: diffusion paths, exponential potential weights, transformed
stochastic integrals and conditional expectation.  Explicit sharp constants
and every checkable L^p bound come with estimators and pass/fail experiments.
"""

from martlab.constants import (
    ExponentPair,
    ConstantBounds,
    pstar,
    choi_asymptotic,
    cpbB_bounds,
    schrodinger_explicit_bound,
    prop35_bound,
)

__version__ = "0.1.0"

__all__ = [
    "ExponentPair",
    "ConstantBounds",
    "pstar",
    "choi_asymptotic",
    "cpbB_bounds",
    "schrodinger_explicit_bound",
    "prop35_bound",
    "__version__",
]
