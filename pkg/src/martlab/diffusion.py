"""Diffusions on the flat torus [0,1)^d and exponential potential weights.

Positions are always stored wrapped to [0,1)^d; the unwrapped displacement is
tracked separately so Brownian variance checks remain meaningful.  Every path
is a deterministic function of (seed, path index) regardless of chunking.
"""

from dataclasses import dataclass

import numpy as np

from martlab.rng import chunk_start_and_increments

__all__ = [
    "PathEnsemble",
    "FeynmanKacWeights",
    "VectorField",
    "builtin_fields",
    "brownian_paths",
    "euler_heun",
    "feynman_kac_weights",
]


@dataclass
class PathEnsemble:
    """Seeded bundle of torus paths on a uniform grid.

    positions[i, n] is Y_{t_n} of path i wrapped to [0,1)^d; increments holds
    the driving Brownian increments, displacement the unwrapped Y_T - Y_0.
    """

    d: int
    T: float
    n_steps: int
    n_paths: int
    seed: int
    y0: np.ndarray
    increments: np.ndarray
    positions: np.ndarray
    displacement: np.ndarray
    flagged: np.ndarray | None = None  # paths aborted by the blow-up guard

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def terminal(self) -> np.ndarray:
        return self.positions[:, -1, :]


@dataclass
class FeynmanKacWeights:
    """Cumulative weights w_n = exp(sum_{k<n} V(Y_k) dt) along each path."""

    w: np.ndarray  # (n_paths, n_steps+1), w[:, 0] = 1

    def __post_init__(self):
        if np.any(self.w <= 0.0) or np.any(self.w > 1.0 + 1e-12):
            raise ValueError("weights must lie in (0, 1]")
        if np.any(np.diff(self.w, axis=1) > 1e-15):
            raise ValueError("weights must be nonincreasing along paths")

    @property
    def terminal(self) -> np.ndarray:
        return self.w[:, -1]


def wrap_accumulate(y0: np.ndarray, dB: np.ndarray) -> np.ndarray:
    """Positions from increments with per-step wrapping (the one convention
    shared with the streaming kernels)."""
    n_paths, n_steps, d = dB.shape
    positions = np.empty((n_paths, n_steps + 1, d))
    positions[:, 0] = y0
    Y = y0.copy()
    for n in range(n_steps):
        Y = Y + dB[:, n, :]
        Y -= np.floor(Y)
        positions[:, n + 1] = Y
    return positions


def brownian_paths(d: int, T: float, n_steps: int, n_paths: int, seed: int,
                   init="uniform", x0=None) -> PathEnsemble:
    """Standard Brownian motion wrapped to the torus: Y_{k+1} = Y_k + dB_k mod 1."""
    if d < 1 or n_steps < 1 or n_paths < 1:
        raise ValueError("need d >= 1, n_steps >= 1, n_paths >= 1")
    dt = T / n_steps
    y0, dB = chunk_start_and_increments(seed, 0, n_paths, n_steps, d, dt,
                                        init=init, x0=x0)
    return PathEnsemble(d=d, T=T, n_steps=n_steps, n_paths=n_paths, seed=seed,
                        y0=y0, increments=dB, positions=wrap_accumulate(y0, dB),
                        displacement=np.sum(dB, axis=1))


class VectorField:
    """A named vector field on the torus, evaluated batch-wise."""

    def __init__(self, name: str, fn):
        self.name = name
        self._fn = fn

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self._fn(x)


def builtin_fields(spec: str, d: int) -> tuple:
    """Named driving-field sets for the Stratonovich integrator.

    "coordinate"            X_i = e_i, no drift (reduces to brownian_paths)
    "drift:c1,..,cd"        coordinate fields plus constant drift
    "grad-potential:c"      coordinate fields plus the gradient drift
                            -grad U for U(x) = (c/2 pi) sum_a cos(2 pi x_a)
    "rotating-frame:w"      frame rotated by angle 2 pi w x_1 plus the
                            compensating drift, so the generator stays
                            Laplacian/2 and the heat flow is an exact oracle
    """
    eye = np.eye(d)
    coord = [VectorField(f"e{i+1}", lambda x, v=eye[i]: np.broadcast_to(v, x.shape).copy())
             for i in range(d)]
    zero = VectorField("0", lambda x: np.zeros_like(x))
    if spec == "coordinate":
        return zero, coord
    if spec.startswith("drift:"):
        c = np.array([float(s) for s in spec.split(":", 1)[1].split(",")])
        if len(c) != d:
            raise ValueError(f"drift vector must have {d} entries")
        return VectorField("drift", lambda x: np.broadcast_to(c, x.shape).copy()), coord
    if spec.startswith("grad-potential:"):
        c = float(spec.split(":", 1)[1])
        return (VectorField("grad-potential",
                            lambda x: c * np.sin(2.0 * np.pi * x)), coord)
    if spec.startswith("rotating-frame:"):
        if d != 2:
            raise ValueError("the rotating-frame fields are two-dimensional")
        w = float(spec.split(":", 1)[1])

        def x1(x):
            th = 2.0 * np.pi * w * x[..., 0]
            return np.stack([np.cos(th), np.sin(th)], axis=-1)

        def x2(x):
            th = 2.0 * np.pi * w * x[..., 0]
            return np.stack([-np.sin(th), np.cos(th)], axis=-1)

        def comp_drift(x):
            # cancels the frame's Stratonovich drift: X_0 = (0, -phi'/2)
            out = np.zeros_like(x)
            out[..., 1] = -0.5 * (2.0 * np.pi * w)
            return out

        return (VectorField("frame-drift", comp_drift),
                [VectorField("frame1", x1), VectorField("frame2", x2)])
    raise ValueError(f"unrecognized field spec: {spec!r}")


def euler_heun(drift: VectorField, fields, d: int, T: float, n_steps: int,
               n_paths: int, seed: int, init="uniform", x0=None,
               blowup: float = 1e6) -> PathEnsemble:
    """Stratonovich predictor-corrector (Heun) integrator on the torus.

    dY = X_0 dt + sum_i X_i o dB^i.  For constant fields the step is the exact
    increment.  Non-finite or exploding predictors abort the path and flag it.
    """
    dt = T / n_steps
    y0, dB = chunk_start_and_increments(seed, 0, n_paths, n_steps, d, dt,
                                        init=init, x0=x0)
    positions = np.empty((n_paths, n_steps + 1, d))
    positions[:, 0] = y0
    Y = y0.copy()
    unwrapped = np.zeros((n_paths, d))
    flagged = np.zeros(n_paths, dtype=bool)
    for n in range(n_steps):
        dBn = dB[:, n, :]
        drift0 = drift(Y)
        diff0 = sum(fields[i](Y) * dBn[:, i:i + 1] for i in range(len(fields)))
        pred = Y + drift0 * dt + diff0
        step_ok = np.all(np.isfinite(pred), axis=1) & (np.max(np.abs(pred - Y), axis=1) < blowup)
        pred_w = pred - np.floor(pred)
        drift1 = drift(pred_w)
        diff1 = sum(fields[i](pred_w) * dBn[:, i:i + 1] for i in range(len(fields)))
        step = 0.5 * (drift0 + drift1) * dt + 0.5 * (diff0 + diff1)
        step = np.where((step_ok & ~flagged)[:, None], step, 0.0)
        flagged |= ~step_ok
        Y = Y + step
        unwrapped += step
        Y -= np.floor(Y)
        positions[:, n + 1] = Y
    return PathEnsemble(d=d, T=T, n_steps=n_steps, n_paths=n_paths, seed=seed,
                        y0=y0, increments=dB, positions=positions,
                        displacement=unwrapped,
                        flagged=flagged if flagged.any() else None)


def feynman_kac_weights(ensemble: PathEnsemble, V) -> FeynmanKacWeights:
    """Left-endpoint accumulation of exp(int_0^t V(Y_s) ds) along each path.

    V must be nonpositive at every sampled point; a positive sample is a
    domain error.
    """
    dt = ensemble.dt
    vals = V(ensemble.positions[:, :-1, :].reshape(-1, ensemble.d))
    vals = np.asarray(vals, dtype=np.float64).reshape(ensemble.n_paths, ensemble.n_steps)
    if np.any(vals > 0.0):
        raise ValueError("potential must be nonpositive on sampled points")
    log_w = np.concatenate(
        [np.zeros((ensemble.n_paths, 1)), np.cumsum(vals * dt, axis=1)], axis=1
    )
    return FeynmanKacWeights(w=np.exp(log_w))
