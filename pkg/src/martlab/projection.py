"""Probabilistic construction of the projection operator.

Per path: the transformed stochastic integral of the heat-flow gradient with
exponential potential weights, then conditional expectation given the
terminal position (histogram regression) or the duality pairing against a
test function.  Sign convention matches the spectral side: the per-path
functional is the NEGATIVE of the raw Ito sum, so that ensemble averages
estimate the Riesz-composition operator with symbol -(k^T A k)/|k|^2.

Stochastic integrals are Ito sums: state and matrix at the left endpoint
Y_{t_n}, forward increment dB_n.  The deterministic semigroup factor is
evaluated at time-to-horizon T - t_{n+1}; combined with the heat covariance
inside the step this lands the per-step expectation on the midpoint rule, so
the estimator bias is O(dt^2) instead of O(dt).
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from martlab import _kernels
from martlab.diffusion import FeynmanKacWeights, PathEnsemble
from martlab.normest import lp_norm
from martlab.rng import chunk_start_and_increments
from martlab.spectral import FourierField, sa_oracle, inner

__all__ = [
    "MatrixSpec",
    "ProjectionRun",
    "ProjectionEstimate",
    "PairingEstimate",
    "run_transformed_ensemble",
    "path_integral",
    "conditional_expectation",
    "pairing_estimate",
    "martingale_check",
    "prop35_check",
    "field_bin_averages",
]

_HEAT_RATE = 2.0 * math.pi**2
DEFAULT_CHUNK = 8192


@dataclass
class MatrixSpec:
    """Bounded matrix profile A(t, x): constant, scalar-profile, or the
    space-dependent rotation built-in."""

    kind: str  # "const" | "profile" | "rotation"
    matrix: np.ndarray | None = None
    profile: object = None  # callable t -> scalar
    winding: float = 1.0

    @classmethod
    def constant(cls, A) -> "MatrixSpec":
        return cls(kind="const", matrix=np.asarray(A, dtype=np.float64))

    @classmethod
    def scaled_profile(cls, profile, A) -> "MatrixSpec":
        return cls(kind="profile", matrix=np.asarray(A, dtype=np.float64), profile=profile)

    @classmethod
    def rotation(cls, winding: float = 1.0) -> "MatrixSpec":
        return cls(kind="rotation", winding=winding)

    def operator_norm(self, t_grid=None) -> float:
        """sup over (t, x) of the spectral matrix norm."""
        if self.kind == "rotation":
            return 1.0
        base = float(np.linalg.norm(self.matrix, 2))
        if self.kind == "const":
            return base
        ts = t_grid if t_grid is not None else np.linspace(0.0, 16.0, 4097)
        return base * float(np.max(np.abs([self.profile(t) for t in ts])))


@dataclass
class ProjectionRun:
    """Per-path output of a transformed-integral ensemble."""

    f: FourierField
    A: MatrixSpec
    T: float
    n_steps: int
    n_paths: int
    seed: int
    v_const: float
    values: np.ndarray          # per-path projection functional (sign applied)
    plain: np.ndarray           # raw unweighted untransformed integral
    qv_trans: np.ndarray
    qv_plain: np.ndarray
    y0: np.ndarray
    y_T: np.ndarray
    w_T: np.ndarray
    checkpoint_steps: np.ndarray | None = None
    checkpoint_values: np.ndarray | None = field(default=None, repr=False)

    @property
    def dt(self) -> float:
        return self.T / self.n_steps


def _grad_tables(f: FourierField, T: float, n_steps: int, v_const: float):
    kmodes, coeffs = f.nonzero_modes()
    if kmodes.shape[0] == 0:
        kmodes = np.zeros((1, f.d), dtype=np.int64)
        coeffs = np.zeros(1, dtype=np.complex128)
    grad_base = (2j * np.pi) * kmodes.T.astype(np.float64) * coeffs[None, :]
    dt = T / n_steps
    k2 = np.sum(kmodes.astype(np.float64) ** 2, axis=1)
    rate = (v_const - _HEAT_RATE * k2)[None, :]
    tau_right = (n_steps - 1 - np.arange(n_steps)) * dt   # T - t_{n+1}
    tau_mid = tau_right + 0.5 * dt                        # T - t_n - dt/2
    decay = np.exp(rate * tau_right[:, None])
    decay_plain = np.exp(rate * tau_mid[:, None])
    return (kmodes, coeffs, np.ascontiguousarray(grad_base),
            np.ascontiguousarray(decay), np.ascontiguousarray(decay_plain))


def _matrix_args(A: MatrixSpec, d: int, T: float, n_steps: int):
    dt = T / n_steps
    a_mat = np.eye(d)
    a_profile = np.ones(n_steps)
    if A.kind == "const":
        kind = _kernels.A_CONST
        a_mat = np.asarray(A.matrix, dtype=np.float64)
    elif A.kind == "profile":
        kind = _kernels.A_PROFILE
        a_mat = np.asarray(A.matrix, dtype=np.float64)
        tau_mid = T - (np.arange(n_steps) + 0.5) * dt
        a_profile = np.array([A.profile(t) for t in tau_mid], dtype=np.float64)
    elif A.kind == "rotation":
        if d != 2:
            raise ValueError("the rotation profile is two-dimensional")
        kind = _kernels.A_ROTATION
    else:
        raise ValueError(f"unrecognized matrix kind {A.kind!r}")
    if a_mat.shape != (d, d):
        raise ValueError(f"matrix must be {d}x{d}")
    return kind, a_mat, a_profile


def run_transformed_ensemble(f: FourierField, A: MatrixSpec, T: float,
                             n_steps: int, n_paths: int, seed: int,
                             v_const: float = 0.0, init: str = "uniform",
                             x0=None, checkpoint_steps=None,
                             workers: int | None = None,
                             chunk: int = DEFAULT_CHUNK) -> ProjectionRun:
    """Stream a seeded ensemble through the hot kernel.

    Chunk boundaries are fixed (independent of ``workers``) and per-path
    randomness is keyed by (seed, path index), so the result is identical for
    any worker count.
    """
    if not f.real:
        raise ValueError("the driving function must be real")
    if v_const > 0.0:
        raise ValueError("constant potential must be nonpositive")
    d = f.d
    dt = T / n_steps
    kmodes, coeffs, grad_base, decay, decay_plain = _grad_tables(f, T, n_steps,
                                                                 v_const)
    kind, a_mat, a_profile = _matrix_args(A, d, T, n_steps)
    wstep = np.exp(v_const * (T - np.arange(n_steps) * dt))

    if checkpoint_steps is None:
        cp_steps = np.zeros(0, dtype=np.int64)
    else:
        cp_steps = np.asarray(sorted(set(int(c) for c in checkpoint_steps)), dtype=np.int64)
        if cp_steps.size and (cp_steps[0] < 0 or cp_steps[-1] > n_steps):
            raise ValueError("checkpoints must be grid steps in [0, n_steps]")
    C = len(cp_steps)
    cp_coeffs = np.zeros((C, len(coeffs)), dtype=np.complex128)
    cp_weights = np.zeros(C)
    k2 = np.sum(kmodes.astype(np.float64) ** 2, axis=1)
    for c, s in enumerate(cp_steps):
        tau = T - s * dt
        cp_coeffs[c] = coeffs * np.exp((v_const - _HEAT_RATE * k2) * tau)
        cp_weights[c] = math.exp(v_const * s * dt)

    starts = list(range(0, n_paths, chunk))

    def run_chunk(start: int):
        count = min(chunk, n_paths - start)
        y0, dB = chunk_start_and_increments(seed, start, count, n_steps, d, dt,
                                            init=init, x0=x0)
        out = _kernels.projection_chunk(
            y0, dB, dt, kmodes, grad_base, decay, decay_plain, wstep,
            kind, a_mat, a_profile, float(A.winding),
            cp_steps, cp_coeffs, cp_weights)
        out["y0"] = y0
        return out

    if workers is None:
        workers = min(len(starts), os.cpu_count() or 1)
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run_chunk, starts))
    else:
        results = [run_chunk(s) for s in starts]

    def cat(key):
        return np.concatenate([r[key] for r in results], axis=0)

    w_T = np.full(n_paths, math.exp(v_const * T))
    return ProjectionRun(
        f=f, A=A, T=T, n_steps=n_steps, n_paths=n_paths, seed=seed,
        v_const=v_const,
        values=-cat("i_trans"),
        plain=cat("i_plain"),
        qv_trans=cat("qv_trans"),
        qv_plain=cat("qv_plain"),
        y0=cat("y0"),
        y_T=cat("y_T"),
        w_T=w_T,
        checkpoint_steps=cp_steps if C else None,
        checkpoint_values=cat("cp_vals") if C else None,
    )


def path_integral(ensemble: PathEnsemble, weights: FeynmanKacWeights | None,
                  A: MatrixSpec, f: FourierField, v_const: float = 0.0) -> np.ndarray:
    """Per-path projection functionals on a materialized ensemble.

    The weights must come from a constant potential (the semigroup evaluator
    folds e^{v tau} analytically); pass None for V = 0.  Provided for module
    surface and cross-checks; large runs should use run_transformed_ensemble.
    """
    if weights is not None:
        expected = np.exp(v_const * ensemble.dt
                          * np.arange(ensemble.n_steps + 1))
        if not np.allclose(weights.w, expected[None, :], rtol=1e-10, atol=1e-12):
            raise ValueError("weights do not match a constant potential; "
                             "only constant potentials have a spectral evaluator")
    kmodes, coeffs, grad_base, decay, decay_plain = _grad_tables(
        f, ensemble.T, ensemble.n_steps, v_const)
    kind, a_mat, a_profile = _matrix_args(A, ensemble.d, ensemble.T, ensemble.n_steps)
    dt = ensemble.dt
    wstep = np.exp(v_const * (ensemble.T - np.arange(ensemble.n_steps) * dt))
    out = _kernels.projection_chunk(
        ensemble.y0, ensemble.increments, dt, kmodes, grad_base, decay,
        decay_plain, wstep, kind, a_mat, a_profile, float(A.winding),
        np.zeros(0, dtype=np.int64), np.zeros((0, len(coeffs)), dtype=np.complex128),
        np.zeros(0))
    return -out["i_trans"]


@dataclass
class ProjectionEstimate:
    """Histogram-regression estimate of the projected field on [0,1)^d bins."""

    bins: int
    estimate: np.ndarray   # (bins,)*d, NaN on empty bins
    counts: np.ndarray
    se: np.ndarray         # NaN where count < 2
    n_paths: int

    def __post_init__(self):
        if int(np.sum(self.counts)) != self.n_paths:
            raise ValueError("bin populations must sum to the path count")

    @property
    def nonempty(self) -> np.ndarray:
        return self.counts > 0


def conditional_expectation(values: np.ndarray, positions: np.ndarray,
                            bins: int) -> ProjectionEstimate:
    """Bin means of per-path values over terminal positions; empty bins are
    reported missing (NaN), never imputed."""
    if bins < 2:
        raise ValueError("need at least 2 bins per axis")
    values = np.asarray(values, dtype=np.float64)
    positions = np.atleast_2d(np.asarray(positions))
    n, d = positions.shape
    idx = np.minimum((positions * bins).astype(np.int64), bins - 1)
    flat = np.ravel_multi_index(tuple(idx[:, a] for a in range(d)), (bins,) * d)
    size = bins**d
    counts = np.bincount(flat, minlength=size).astype(np.int64)
    sums = np.bincount(flat, weights=values, minlength=size)
    sq = np.bincount(flat, weights=values**2, minlength=size)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        var = np.where(counts > 1,
                       (sq - counts * mean**2) / np.maximum(counts - 1, 1), np.nan)
        se = np.sqrt(np.maximum(var, 0.0) / np.maximum(counts, 1))
        se = np.where(counts > 1, se, np.nan)
    shape = (bins,) * d
    return ProjectionEstimate(bins=bins, estimate=mean.reshape(shape),
                              counts=counts.reshape(shape), se=se.reshape(shape),
                              n_paths=n)


@dataclass
class PairingEstimate:
    value: float
    se: float
    n_paths: int

    def __post_init__(self):
        if self.se < 0.0:
            raise ValueError("standard errors are nonnegative")


def pairing_estimate(values: np.ndarray, g: FourierField,
                     positions: np.ndarray) -> PairingEstimate:
    """Monte Carlo estimate of the duality pairing int (S f) g dmu as the mean
    of value * g(Y_T); the uniform start makes the time-T marginal uniform."""
    samples = np.asarray(values, dtype=np.float64) * np.real(g.eval_at(positions))
    n = len(samples)
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return PairingEstimate(value=float(np.mean(samples)), se=se, n_paths=n)


def martingale_check(run: ProjectionRun) -> dict:
    """Checkpoint means of w_t (P_{T-t} f)(Y_t) must agree with the t=0 mean.

    Uses per-path paired differences for the standard errors.  Requires the
    run to have been made with checkpoint step 0 included.
    """
    if run.checkpoint_values is None or run.checkpoint_steps is None:
        raise ValueError("run was made without checkpoints")
    steps = run.checkpoint_steps
    if steps[0] != 0:
        raise ValueError("checkpoint step 0 (the reference) is required")
    vals = run.checkpoint_values
    ref = vals[:, 0]
    n = vals.shape[0]
    rows = []
    ok = True
    for c, s in enumerate(steps):
        diff = vals[:, c] - ref
        se = float(np.std(diff, ddof=1) / math.sqrt(n)) if c > 0 else 0.0
        drift = float(np.mean(diff))
        passed = bool(abs(drift) <= 3.0 * se) if c > 0 else True
        ok &= passed
        rows.append({"step": int(s), "t": float(s * run.dt),
                     "mean": float(np.mean(vals[:, c])), "drift": drift,
                     "se": se, "ok": passed})
    return {"checkpoints": rows, "ok": ok, "reference_mean": float(np.mean(ref))}


def prop35_check(run: ProjectionRun, p: float, grid_n: int | None = None) -> dict:
    """Empirical L^p norm of the unweighted stochastic integral against the
    explicit bound 2^(2-1/p) p^2/(p-1) ||f||_p."""
    from martlab.constants import prop35_bound

    if p <= 1.0:
        raise ValueError("need p > 1")
    n = grid_n if grid_n is not None else max(4 * run.f.K + 4, 64)
    f_lp = lp_norm(run.f.to_grid(n), p)
    samples = np.abs(run.plain) ** p
    emp = float(np.mean(samples) ** (1.0 / p))
    # delta-method SE for the p-th root of a mean
    m = float(np.mean(samples))
    se_m = float(np.std(samples, ddof=1) / math.sqrt(len(samples)))
    se = se_m / (p * m ** (1.0 - 1.0 / p)) if m > 0 else 0.0
    bound = prop35_bound(p) * f_lp
    return {"p": p, "empirical": emp, "se": se, "f_lp": f_lp, "bound": bound,
            "ratio": emp / f_lp if f_lp > 0 else 0.0,
            "ok": bool(emp <= bound + 3.0 * se)}


def field_bin_averages(f: FourierField, bins: int) -> np.ndarray:
    """Exact averages of a band-limited field over the regular bins of [0,1)^d.

    Per mode and axis, the average of exp(2 pi i k x) over [a, a+h) is
    exp(2 pi i k a) (exp(2 pi i k h) - 1)/(2 pi i k h).
    """
    d, K = f.d, f.K
    h = 1.0 / bins
    kk, cc = f.nonzero_modes()
    centers = (np.arange(bins) + 0.0) * h  # left edges
    out = np.zeros((bins,) * d, dtype=np.complex128)
    for k, c in zip(kk, cc):
        factors = []
        for a in range(d):
            ka = int(k[a])
            if ka == 0:
                factors.append(np.ones(bins, dtype=np.complex128))
            else:
                w = 2j * np.pi * ka
                factors.append(np.exp(w * centers) * (np.exp(w * h) - 1.0) / (w * h))
        prod = factors[0]
        for a in range(1, d):
            prod = np.multiply.outer(prod, factors[a])
        out += c * prod
    return out.real if f.real else out


def oracle_pairing(f: FourierField, g: FourierField, A: MatrixSpec, T: float,
                   v_const: float = 0.0) -> float:
    """Spectral ground truth for the duality pairing."""
    if A.kind == "rotation":
        raise ValueError("the rotation profile has no diagonal spectral oracle")
    profile = A.profile if A.kind == "profile" else None
    Sf = sa_oracle(f, A.matrix, T, profile=profile, v_const=v_const)
    return float(np.real(inner(Sf, g)))
