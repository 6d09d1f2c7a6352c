"""Exact-within-truncation Fourier computation on the flat torus [0,1)^d.

Conventions (fixed package-wide):

* basis  e_k(x) = exp(2*pi*i k.x),  k integer vector, |k_a| <= K;
* the diffusion is standard Brownian motion, so the heat semigroup P_t is the
  Fourier multiplier exp(-2 pi^2 |k|^2 t)  (generator = Laplacian/2);
* every multiplier built here annihilates the mean (symbol 0 at k = 0).

The central operator family maps a bounded matrix profile A(t) to the
multiplier with per-mode symbol

    - integral_0^T  4 pi^2 (k^T A(t) k) exp(-(4 pi^2 |k|^2 + 2 m) t) dt,

``m >= 0`` being the magnitude of a constant nonpositive potential.  For a
constant A and T = infinity this is the second-order Riesz composition
sum_ij A_ij R_i R_j with symbol -(k^T A k)/|k|^2.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

__all__ = [
    "FourierField",
    "MultiplierSymbol",
    "SU2ClassFunction",
    "heat_semigroup",
    "gradient",
    "riesz2_symbol",
    "riesz2_apply",
    "sa_constant_symbol",
    "sa_constant_apply",
    "sa_oracle_symbol",
    "sa_oracle",
    "laplace_multiplier_symbol",
    "laplace_multiplier_apply",
    "bilinear_embedding",
    "inner",
    "su2_multiplier_value",
    "su2_multiplier_apply",
]

_HEAT_RATE = 2.0 * math.pi**2  # |k|^2 coefficient in the P_t exponent


def wavevectors(d: int, K: int) -> np.ndarray:
    """Integer lattice [-K, K]^d as an array of shape (2K+1,)*d + (d,)."""
    axes = [np.arange(-K, K + 1)] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@dataclass
class FourierField:
    """Truncated Fourier representation of a function on the torus [0,1)^d.

    ``coeffs[k1+K, ..., kd+K]`` is the coefficient of exp(2*pi*i k.x).  When
    ``real`` is set, coefficients are Hermitian: c_{-k} = conj(c_k).
    """

    d: int
    K: int
    coeffs: np.ndarray
    real: bool = True

    def __post_init__(self):
        shape = (2 * self.K + 1,) * self.d
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != shape:
            raise ValueError(f"coefficient array must have shape {shape}, got {self.coeffs.shape}")
        if self.real and not self.is_hermitian(1e-12):
            raise ValueError("real flag set but coefficients are not Hermitian to 1e-12")

    # ---- constructors -------------------------------------------------

    @classmethod
    def zeros(cls, d: int, K: int, real: bool = True) -> "FourierField":
        return cls(d, K, np.zeros((2 * K + 1,) * d, dtype=np.complex128), real)

    @classmethod
    def from_modes(cls, d: int, K: int, modes: dict, real: bool | None = None) -> "FourierField":
        """Build from a {k-tuple: coefficient} dictionary."""
        f = cls.zeros(d, K, real=False)
        for k, c in modes.items():
            if len(k) != d or any(abs(ki) > K for ki in k):
                raise ValueError(f"mode {k} outside the [-{K},{K}]^{d} lattice")
            f.coeffs[tuple(ki + K for ki in k)] = c
        f.real = f.is_hermitian(1e-12) if real is None else real
        if f.real and not f.is_hermitian(1e-12):
            raise ValueError("requested real field but modes are not Hermitian")
        return f

    @classmethod
    def random(cls, d: int, K: int, seed: int, decay: float = 2.0,
               mean_zero: bool = True) -> "FourierField":
        """Random real field with coefficients damped like (1+|k|^2)^(-decay/2)."""
        rng = np.random.default_rng(seed)
        shape = (2 * K + 1,) * d
        raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        k2 = np.sum(wavevectors(d, K) ** 2, axis=-1)
        raw *= (1.0 + k2) ** (-decay / 2.0)
        f = cls(d, K, raw, real=False)
        f = f.hermitian_part()
        if mean_zero:
            f.coeffs[(K,) * d] = 0.0
        return f

    # ---- basic structure ----------------------------------------------

    def copy(self) -> "FourierField":
        return FourierField(self.d, self.K, self.coeffs.copy(), self.real)

    def is_hermitian(self, tol: float) -> bool:
        flipped = np.conj(self.coeffs[(slice(None, None, -1),) * self.d])
        return bool(np.max(np.abs(self.coeffs - flipped)) <= tol * max(1.0, self.linf_coeff()))

    def hermitian_part(self) -> "FourierField":
        flipped = np.conj(self.coeffs[(slice(None, None, -1),) * self.d])
        return FourierField(self.d, self.K, 0.5 * (self.coeffs + flipped), real=True)

    def linf_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    @property
    def mean(self) -> complex:
        return complex(self.coeffs[(self.K,) * self.d])

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def nonzero_modes(self, tol: float = 0.0):
        """(k_array (M, d) int64, coeffs (M,) complex) over nonzero coefficients."""
        kk = wavevectors(self.d, self.K).reshape(-1, self.d)
        cc = self.coeffs.reshape(-1)
        mask = np.abs(cc) > tol
        return kk[mask].astype(np.int64), cc[mask]

    def __add__(self, other: "FourierField") -> "FourierField":
        self._check_compatible(other)
        return FourierField(self.d, self.K, self.coeffs + other.coeffs,
                            self.real and other.real)

    def __sub__(self, other: "FourierField") -> "FourierField":
        self._check_compatible(other)
        return FourierField(self.d, self.K, self.coeffs - other.coeffs,
                            self.real and other.real)

    def __mul__(self, scalar: float) -> "FourierField":
        return FourierField(self.d, self.K, self.coeffs * scalar,
                            self.real and np.isrealobj(np.asarray(scalar)))

    __rmul__ = __mul__

    def _check_compatible(self, other: "FourierField") -> None:
        if (self.d, self.K) != (other.d, other.K):
            raise ValueError("fields live on different lattices")

    # ---- evaluation ----------------------------------------------------

    def to_grid(self, n: int) -> np.ndarray:
        """Values on the regular n^d grid x_j = j/n.  Exact for n >= 2K+1."""
        if n < 2 * self.K + 1:
            raise ValueError(f"grid size {n} aliases bandwidth K={self.K}")
        spec = np.zeros((n,) * self.d, dtype=np.complex128)
        kk = wavevectors(self.d, self.K).reshape(-1, self.d)
        idx = tuple((kk[:, a] % n) for a in range(self.d))
        np.add.at(spec, idx, self.coeffs.reshape(-1))
        vals = np.fft.ifftn(spec) * n**self.d
        return vals.real if self.real else vals

    @classmethod
    def from_grid(cls, values: np.ndarray, K: int, real: bool | None = None) -> "FourierField":
        values = np.asarray(values)
        d = values.ndim
        n = values.shape[0]
        if any(s != n for s in values.shape):
            raise ValueError("grid must be square")
        if n < 2 * K + 1:
            raise ValueError(f"grid size {n} cannot resolve bandwidth K={K}")
        spec = np.fft.fftn(values) / n**d
        kk = wavevectors(d, K).reshape(-1, d)
        idx = tuple((kk[:, a] % n) for a in range(d))
        coeffs = spec[idx].reshape((2 * K + 1,) * d)
        if real is None:
            real = bool(np.isrealobj(values))
        return cls(d, K, coeffs, real)

    def eval_at(self, points: np.ndarray) -> np.ndarray:
        """Direct summation at arbitrary points, shape (m, d).  Exact."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        kk, cc = self.nonzero_modes()
        if len(cc) == 0:
            out = np.zeros(points.shape[0], dtype=np.complex128)
        else:
            phases = np.exp(2j * np.pi * (points @ kk.T))
            out = phases @ cc
        return out.real if self.real else out


@dataclass
class MultiplierSymbol:
    """A bounded frequency multiplier m(k) on the truncated lattice."""

    d: int
    K: int
    values: np.ndarray  # real, shape (2K+1,)*d

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (2 * self.K + 1,) * self.d:
            raise ValueError("symbol array shape does not match the lattice")

    @property
    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def apply(self, f: FourierField) -> FourierField:
        if (f.d, f.K) != (self.d, self.K):
            raise ValueError("field and symbol live on different lattices")
        even = np.allclose(self.values, self.values[(slice(None, None, -1),) * self.d],
                           atol=1e-14)
        return FourierField(f.d, f.K, f.coeffs * self.values, f.real and even)


# ---- core multipliers ---------------------------------------------------


def heat_semigroup(f: FourierField, t: float) -> FourierField:
    """P_t f: damp mode k by exp(-2 pi^2 |k|^2 t)."""
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    k2 = np.sum(wavevectors(f.d, f.K) ** 2, axis=-1)
    return FourierField(f.d, f.K, f.coeffs * np.exp(-_HEAT_RATE * k2 * t), f.real)


def gradient(f: FourierField) -> list[FourierField]:
    """The d partial derivatives; mode k of component a is scaled by 2 pi i k_a."""
    kk = wavevectors(f.d, f.K)
    return [FourierField(f.d, f.K, f.coeffs * (2j * np.pi * kk[..., a]), f.real)
            for a in range(f.d)]


def _k_outer_symbol(d: int, K: int, A: np.ndarray) -> np.ndarray:
    """-(k^T A k)/|k|^2 on the lattice, 0 at k = 0."""
    kk = wavevectors(d, K).astype(np.float64)
    k2 = np.sum(kk**2, axis=-1)
    quad_form = np.einsum("...a,ab,...b->...", kk, np.asarray(A, dtype=np.float64), kk)
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = np.where(k2 > 0, -quad_form / np.where(k2 > 0, k2, 1.0), 0.0)
    return sym


def riesz2_symbol(i: int, j: int, d: int, K: int) -> MultiplierSymbol:
    """Second-order Riesz composition R_i R_j: symbol -k_i k_j/|k|^2."""
    A = np.zeros((d, d))
    A[i, j] = 1.0
    return MultiplierSymbol(d, K, _k_outer_symbol(d, K, A))


def riesz2_apply(i: int, j: int, f: FourierField) -> FourierField:
    return riesz2_symbol(i, j, f.d, f.K).apply(f)


def sa_constant_symbol(A: np.ndarray, d: int, K: int) -> MultiplierSymbol:
    """Constant-matrix projection operator sum_ij A_ij R_i R_j."""
    return MultiplierSymbol(d, K, _k_outer_symbol(d, K, A))


def sa_constant_apply(A: np.ndarray, f: FourierField) -> FourierField:
    return sa_constant_symbol(A, f.d, f.K).apply(f)


def sa_oracle_symbol(A: np.ndarray, d: int, K: int, T: float,
                     profile=None, v_const: float = 0.0,
                     quad_tol: float = 1e-13) -> MultiplierSymbol:
    """Finite-horizon symbol -int_0^T 4 pi^2 (k^T A(t) k) e^(-(4 pi^2|k|^2+2m)t) dt.

    ``A(t) = profile(t) * A`` when a profile is given, otherwise constant A.
    A constant nonpositive potential v_const folds in analytically through
    m = -v_const.  T = math.inf is allowed; with a constant A the integral is
    closed-form, otherwise adaptive quadrature with an exponential tail is
    used per distinct |k|^2.
    """
    if T < 0.0:
        raise ValueError(f"horizon must be in [0, inf], got {T}")
    if v_const > 0.0:
        raise ValueError(f"potential constant must be nonpositive, got {v_const}")
    m = -v_const
    kk = wavevectors(d, K).astype(np.float64)
    k2 = np.sum(kk**2, axis=-1)
    quad_form = np.einsum("...a,ab,...b->...", kk, np.asarray(A, dtype=np.float64), kk)

    gammas = 4.0 * math.pi**2 * k2 + 2.0 * m  # per-mode decay rate
    weights = np.zeros_like(gammas)
    mask = k2 > 0
    if profile is None:
        g = gammas[mask]
        if math.isinf(T):
            weights[mask] = 1.0 / g
        else:
            weights[mask] = (1.0 - np.exp(-g * T)) / g
    else:
        # one quadrature per distinct rate; rates repeat heavily on the lattice
        uniq = np.unique(gammas[mask])
        table = {}
        for g in uniq:
            val = _profile_integral(profile, g, T, quad_tol)
            table[g] = val
        weights[mask] = np.vectorize(table.__getitem__)(gammas[mask])
    sym = -4.0 * math.pi**2 * quad_form * weights
    return MultiplierSymbol(d, K, sym)


def _integrable_envelope_check(integrand, T0: float, rate: float) -> None:
    """Reject integrands that do not decay past the quadrature window."""
    H = max(4.0, 2.0 * T0, 1.5 * rate)
    try:
        head = np.abs([integrand(t) for t in np.linspace(0.0, H / 2.0, 96)])
        tail = np.abs([integrand(t) for t in np.linspace(H / 2.0, H, 96)])
    except OverflowError as exc:
        raise ValueError("time profile grows faster than the exponential "
                         "damping; the multiplier integral diverges") from exc
    if not (np.all(np.isfinite(head)) and np.all(np.isfinite(tail))):
        raise ValueError("time profile is non-integrable against the "
                         "exponential damping")
    if np.max(tail) > max(np.max(head), 1e-300) * (1.0 + 1e-9):
        raise ValueError("time profile grows past the quadrature window; "
                         "the multiplier integral diverges")


def _profile_integral(profile, gamma: float, T: float, tol: float) -> float:
    """int_0^T profile(t) exp(-gamma t) dt with divergence detection."""
    def integrand(t: float) -> float:
        return profile(t) * math.exp(-gamma * t)

    if math.isinf(T):
        # bounded-profile tail: |int_T0^inf| <= sup|profile| e^(-gamma T0)/gamma
        T0 = max(1.0, 50.0 / gamma)
        _integrable_envelope_check(integrand, T0, gamma)
        probe = np.max(np.abs([profile(t) for t in np.linspace(0, T0, 64)]))
        val, err = quad(integrand, 0.0, T0, epsabs=tol, epsrel=tol, limit=400)
        tail = probe * math.exp(-gamma * T0) / gamma
        if tail > 100 * max(tol, 1e-300):
            extra, _ = quad(integrand, T0, 10 * T0, epsabs=tol, epsrel=tol,
                            limit=400)
            val += extra
        return val
    val, err = quad(integrand, 0.0, T, epsabs=tol, epsrel=tol, limit=400)
    if not np.isfinite(val):
        raise ValueError("profile quadrature diverged")
    return val


def sa_oracle(f: FourierField, A: np.ndarray, T: float, profile=None,
              v_const: float = 0.0) -> FourierField:
    """Apply the finite-horizon projection multiplier to f."""
    return sa_oracle_symbol(A, f.d, f.K, T, profile=profile, v_const=v_const).apply(f)


def laplace_multiplier_symbol(a, d: int, K: int, breakpoints=None,
                              quad_tol: float = 1e-13) -> MultiplierSymbol:
    """Laplace-transform-type multiplier: symbol -lambda int_0^inf a(t) e^(-2 lambda t) dt
    with lambda = 2 pi^2 |k|^2.

    |symbol| <= sup|a|/2 always.  ``breakpoints`` marks discontinuities of a.
    """
    kk = wavevectors(d, K)
    k2 = np.sum(kk**2, axis=-1)
    sym = np.zeros_like(k2, dtype=np.float64)
    uniq = np.unique(k2[k2 > 0])
    for m2 in uniq:
        lam = _HEAT_RATE * float(m2)
        val = _laplace_integral(a, lam, breakpoints, quad_tol)
        sym[k2 == m2] = -lam * val
    return MultiplierSymbol(d, K, sym)


def _laplace_integral(a, lam: float, breakpoints, tol: float) -> float:
    rate = 2.0 * lam

    def integrand(t: float) -> float:
        return a(t) * math.exp(-rate * t)

    T0 = max(1.0, 50.0 / rate)
    if breakpoints:
        T0 = max(T0, 1.25 * max(breakpoints))
        pts = [b for b in breakpoints if 0.0 < b < T0]
    else:
        pts = None
    _integrable_envelope_check(integrand, T0, rate)
    probe = np.max(np.abs([a(t) for t in np.linspace(0, T0, 64)]))
    val, _ = quad(integrand, 0.0, T0, epsabs=tol, epsrel=tol, limit=500,
                  points=pts)
    if probe * math.exp(-rate * T0) / rate > 100 * max(tol, 1e-300):
        extra, _ = quad(integrand, T0, 20 * T0, epsabs=tol, epsrel=tol,
                        limit=500)
        val += extra
    return val


def laplace_multiplier_apply(a, f: FourierField, breakpoints=None) -> FourierField:
    return laplace_multiplier_symbol(a, f.d, f.K, breakpoints=breakpoints).apply(f)


# ---- bilinear embedding --------------------------------------------------


def inner(u: FourierField, v: FourierField) -> complex:
    """L^2(mu) pairing int u conj(v) dmu = sum_k u_k conj(v_k)."""
    u._check_compatible(v)
    val = complex(np.sum(u.coeffs * np.conj(v.coeffs)))
    return val.real if (u.real and v.real) else val


def _grad_magnitude_on_grid(f: FourierField, t: float, n: int) -> np.ndarray:
    total = np.zeros((n,) * f.d)
    for comp in gradient(heat_semigroup(f, t)):
        vals = comp.to_grid(n)
        total += np.real(vals) ** 2 + np.imag(vals) ** 2
    return np.sqrt(total)


def bilinear_embedding(f: FourierField, g: FourierField, T: float,
                       grid_n: int | None = None, nodes_per_panel: int = 24,
                       tail_tol: float = 1e-13) -> float:
    """int_0^T int |grad P_t f| |grad P_t g| dmu dt by grid-in-x, panel
    Gauss-Legendre-in-t quadrature with an exponential tail cutoff.

    T = math.inf is allowed; the neglected tail is bounded by
    ||grad f||_2 ||grad g||_2 e^(-gamma T0)/gamma and kept below tail_tol.
    """
    f._check_compatible(g)
    d, K = f.d, f.K
    n = grid_n if grid_n is not None else max(4 * K + 4, 64)

    def min_k2(h: FourierField) -> float:
        kk, cc = h.nonzero_modes(tol=0.0)
        k2 = np.sum(kk**2, axis=1)
        k2 = k2[k2 > 0]
        return float(k2.min()) if k2.size else 0.0

    def grad_norm(h: FourierField) -> float:
        return math.sqrt(sum(c.l2_norm() ** 2 for c in gradient(h)))

    Cf, Cg = grad_norm(f), grad_norm(g)
    if Cf == 0.0 or Cg == 0.0:
        return 0.0
    gamma = _HEAT_RATE * (min_k2(f) + min_k2(g))

    if math.isinf(T):
        T0 = 1.0
        while Cf * Cg * math.exp(-gamma * T0) / gamma > tail_tol:
            T0 *= 2.0
    else:
        T0 = T

    # geometric panels resolve the fast initial decay
    edges = [0.0]
    h = min(1.0 / gamma, T0)
    while edges[-1] < T0:
        edges.append(min(edges[-1] + h, T0))
        h *= 2.0
    xs, ws = np.polynomial.legendre.leggauss(nodes_per_panel)

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        tm = 0.5 * (a + b) + 0.5 * (b - a) * xs
        wm = 0.5 * (b - a) * ws
        for t, w in zip(tm, wm):
            phi = float(np.mean(_grad_magnitude_on_grid(f, t, n)
                                * _grad_magnitude_on_grid(g, t, n)))
            total += w * phi
    return total


# ---- SU(2) class functions ------------------------------------------------


@dataclass
class SU2ClassFunction:
    """Class function on SU(2): coefficients over irreducible characters chi_n,
    indexed by the representation dimension n = 1, 2, ..., N."""

    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.ndim != 1:
            raise ValueError("character coefficients must be a 1-d array")

    @property
    def N(self) -> int:
        return len(self.coeffs)

    def a(self, n: int) -> float:
        if not 1 <= n <= self.N:
            raise IndexError(f"character index {n} outside 1..{self.N}")
        return float(self.coeffs[n - 1])

    def l2_norm(self) -> float:
        # characters are orthonormal in L^2 of the normalized Haar measure
        return float(np.sqrt(np.sum(self.coeffs**2)))

    def support(self) -> np.ndarray:
        return np.nonzero(self.coeffs)[0] + 1


def su2_multiplier_value(n: int, alpha_norm: float = 1.0, sign: int = +1) -> float:
    """Riesz-type multiplier on SU(2) at the n-dimensional representation.

    With highest weight lambda_n = (n-1) alpha/2 and rho = alpha/2 the general
    quotient <lambda, alpha><lambda, beta> / (||lambda+rho||^2 - ||rho||^2),
    beta = sign * alpha, reduces to sign * ||alpha||^2 (n-1)/(n+1).
    """
    if n < 2:
        raise ValueError("the trivial representation n=1 has a vanishing denominator")
    if sign not in (+1, -1):
        raise ValueError("beta must be +alpha or -alpha on SU(2)")
    a2 = alpha_norm**2
    lam_alpha = 0.5 * (n - 1) * a2
    lam_beta = sign * lam_alpha
    denom = (n * n - 1) * a2 / 4.0  # ||lambda+rho||^2 - ||rho||^2
    return lam_alpha * lam_beta / denom


def su2_multiplier_apply(f: SU2ClassFunction, alpha_norm: float = 1.0,
                         sign: int = +1) -> SU2ClassFunction:
    """Apply the SU(2) multiplier; requires a vanishing trivial-character coefficient."""
    if f.N >= 1 and f.coeffs[0] != 0.0:
        raise ValueError("trivial-representation coefficient must be zero")
    out = np.zeros_like(f.coeffs)
    for idx in range(1, f.N):
        n = idx + 1
        out[idx] = su2_multiplier_value(n, alpha_norm, sign) * f.coeffs[idx]
    return SU2ClassFunction(out)
