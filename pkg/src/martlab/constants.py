"""Explicit constants of the sharp martingale-transform inequalities.

All functions are pure and cheap; they back every bound used elsewhere in the
package.  Conventions: ``p`` is always a Lebesgue exponent in (1, inf), ``q``
its conjugate, and ``pstar(p) = max(p, q)``.
"""

import math
from dataclasses import dataclass

__all__ = [
    "ExponentPair",
    "ConstantBounds",
    "pstar",
    "conjugate_exponent",
    "choi_alpha2",
    "choi_asymptotic",
    "cpbB_bounds",
    "schrodinger_explicit_bound",
    "prop35_bound",
]


def _require_p(p: float) -> None:
    if not p > 1.0:
        raise ValueError(f"exponent must satisfy p > 1, got {p}")


@dataclass(frozen=True)
class ExponentPair:
    """An exponent p in (1, inf) together with its conjugate q, 1/p + 1/q = 1."""

    p: float
    q: float

    def __post_init__(self):
        _require_p(self.p)
        if abs(1.0 / self.p + 1.0 / self.q - 1.0) > 1e-12:
            raise ValueError(f"(p, q) = ({self.p}, {self.q}) are not conjugate")

    @classmethod
    def from_p(cls, p: float) -> "ExponentPair":
        _require_p(p)
        return cls(p, conjugate_exponent(p))

    @property
    def pstar(self) -> float:
        return max(self.p, self.q)


@dataclass(frozen=True)
class ConstantBounds:
    """A sandwich lower <= C <= upper, with ``exact`` set when the two meet."""

    lower: float
    upper: float
    exact: float | None = None

    def __post_init__(self):
        if self.lower > self.upper + 1e-15 * max(1.0, abs(self.upper)):
            raise ValueError(f"lower={self.lower} exceeds upper={self.upper}")
        if self.exact is not None and not (
            math.isclose(self.exact, self.lower, rel_tol=1e-12, abs_tol=1e-15)
            and math.isclose(self.exact, self.upper, rel_tol=1e-12, abs_tol=1e-15)
        ):
            raise ValueError("exact value must equal both lower and upper")


def conjugate_exponent(p: float) -> float:
    _require_p(p)
    return p / (p - 1.0)


def pstar(p: float) -> float:
    """max(p, q) for the conjugate pair (p, q).

    ``pstar(p) - 1`` equals 1/(p-1) on (1, 2] and p-1 on [2, inf); it is the
    sharp norm of martingale transforms by factors in [-1, 1].
    """
    _require_p(p)
    return max(p, conjugate_exponent(p))


def choi_alpha2() -> float:
    """Second-order coefficient of the asymptotic series for the [0, 1] transform constant."""
    u = math.log((1.0 + math.exp(-2.0)) / 2.0)
    r = math.exp(-2.0) / (1.0 + math.exp(-2.0))
    return u * u + 0.5 * u - 2.0 * r * r


def choi_asymptotic(p: float) -> float:
    """Three-term large-p approximation of the sharp constant for transforms with
    factors in [0, 1].

    Returns p/2 + (1/2)log((1+e^-2)/2) + alpha2/p.  This is an asymptotic
    approximation only: it is NOT an upper-bound certificate for any finite p,
    and no error bound is available for small p (p = 2 in particular sits
    outside the asymptotic regime).  Use :func:`cpbB_bounds` for certified
    sandwiches.
    """
    _require_p(p)
    return 0.5 * p + 0.5 * math.log((1.0 + math.exp(-2.0)) / 2.0) + choi_alpha2() / p


def cpbB_bounds(p: float, b: float, B: float) -> ConstantBounds:
    """Sandwich for the best constant of transforms by factors in [b, B].

    lower = max(((B-b)/2)(p*-1), max(|B|, |b|)),  upper = max(B, |b|)(p*-1).
    The symmetric case b = -B < 0 is exact: B(p*-1).  Inputs with B <= 0 are
    rejected: the upper-bound formula max(B, |b|)(p*-1) is only trusted for
    B > 0.
    """
    _require_p(p)
    if b >= B:
        raise ValueError(f"need b < B, got b={b}, B={B}")
    if B <= 0.0:
        raise ValueError(f"need B > 0 for the sandwich to be valid, got B={B}")
    ps1 = pstar(p) - 1.0
    lower = max(0.5 * (B - b) * ps1, max(abs(B), abs(b)))
    upper = max(B, abs(b)) * ps1
    exact = None
    if b == -B or math.isclose(lower, upper, rel_tol=1e-14, abs_tol=0.0):
        exact = upper
        lower = upper
    return ConstantBounds(lower=lower, upper=upper, exact=exact)


def schrodinger_explicit_bound(p: float, normA: float) -> float:
    """Explicit (non-sharp) bound 8 ||A|| (p*-1) p^4/(p-1)^2 for the projection
    operator with a nonzero potential."""
    _require_p(p)
    if normA < 0.0:
        raise ValueError(f"matrix norm must be nonnegative, got {normA}")
    return 8.0 * normA * (pstar(p) - 1.0) * p**4 / (p - 1.0) ** 2


def prop35_bound(p: float) -> float:
    """L^p bound 2^(2-1/p) p^2/(p-1) on the unweighted transformed stochastic
    integral of the heat-flow gradient."""
    _require_p(p)
    return 2.0 ** (2.0 - 1.0 / p) * p * p / (p - 1.0)
