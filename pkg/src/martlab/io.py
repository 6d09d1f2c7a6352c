"""Persistence for fields and path ensembles.

Field coefficients: CSV with one row per mode, ``k1,...,kd,re,im``.
Field grids: flat binary, little-endian —
    magic b"MLFG" | u32 version=1 | u32 d | u32 K | u8 reality | u32 n |
    n^d float64 values (real fields) or n^d (re, im) float64 pairs.
Ensembles: CSV with a time-grid header and one row per (path, coordinate)
carrying y0 then the Brownian increments; or the equivalent flat binary —
    magic b"MLEN" | u32 version=1 | u32 d | u32 n_steps | u64 n_paths |
    u64 seed | f64 T | y0 (n_paths*d f64) | increments (n_paths*n_steps*d f64).
"""

import struct

import numpy as np

from martlab.diffusion import PathEnsemble
from martlab.spectral import FourierField

__all__ = [
    "save_field_csv", "load_field_csv",
    "save_field_grid", "load_field_grid",
    "save_ensemble_csv", "load_ensemble_csv",
    "save_ensemble", "load_ensemble",
    "save_projection_estimate_csv",
]

_FIELD_MAGIC = b"MLFG"
_ENS_MAGIC = b"MLEN"


def save_field_csv(f: FourierField, path: str) -> None:
    kk, cc = f.nonzero_modes()
    with open(path, "w") as fh:
        fh.write(",".join(f"k{a+1}" for a in range(f.d)) + ",re,im\n")
        fh.write(f"# d={f.d} K={f.K} real={int(f.real)}\n")
        for k, c in zip(kk, cc):
            fh.write(",".join(str(int(ki)) for ki in k)
                     + f",{float(c.real)!r},{float(c.imag)!r}\n")


def load_field_csv(path: str) -> FourierField:
    with open(path) as fh:
        header = fh.readline()
        meta = fh.readline()
        if not meta.startswith("#"):
            raise ValueError("missing field metadata line")
        kv = dict(item.split("=") for item in meta[1:].split())
        d, K, real = int(kv["d"]), int(kv["K"]), bool(int(kv["real"]))
        modes = {}
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            k = tuple(int(x) for x in parts[:d])
            modes[k] = float(parts[d]) + 1j * float(parts[d + 1])
    del header
    return FourierField.from_modes(d, K, modes, real=real)


def save_field_grid(f: FourierField, path: str, n: int | None = None) -> None:
    n = n if n is not None else 2 * f.K + 2
    grid = f.to_grid(n)
    with open(path, "wb") as fh:
        fh.write(_FIELD_MAGIC)
        fh.write(struct.pack("<IIIBI", 1, f.d, f.K, int(f.real), n))
        if f.real:
            fh.write(np.ascontiguousarray(grid, dtype="<f8").tobytes())
        else:
            inter = np.empty(grid.shape + (2,))
            inter[..., 0], inter[..., 1] = grid.real, grid.imag
            fh.write(np.ascontiguousarray(inter, dtype="<f8").tobytes())


def load_field_grid(path: str) -> FourierField:
    with open(path, "rb") as fh:
        if fh.read(4) != _FIELD_MAGIC:
            raise ValueError("not a field-grid file")
        version, d, K, real, n = struct.unpack("<IIIBI", fh.read(17))
        if version != 1:
            raise ValueError(f"unsupported field-grid version {version}")
        count = n**d * (1 if real else 2)
        data = np.frombuffer(fh.read(count * 8), dtype="<f8")
    if real:
        grid = data.reshape((n,) * d)
    else:
        inter = data.reshape((n,) * d + (2,))
        grid = inter[..., 0] + 1j * inter[..., 1]
    return FourierField.from_grid(grid, K, real=bool(real))


def save_ensemble_csv(ens: PathEnsemble, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("# martlab-ensemble v1\n")
        fh.write(f"# d={ens.d} n_steps={ens.n_steps} n_paths={ens.n_paths} "
                 f"seed={ens.seed} T={float(ens.T)!r}\n")
        fh.write("# t:" + ",".join(repr(float(t)) for t in ens.times) + "\n")
        fh.write("path,coord,y0," + ",".join(f"dB{n}" for n in range(ens.n_steps)) + "\n")
        for i in range(ens.n_paths):
            for a in range(ens.d):
                row = [str(i), str(a), repr(float(ens.y0[i, a]))]
                row += [repr(float(x)) for x in ens.increments[i, :, a]]
                fh.write(",".join(row) + "\n")


def load_ensemble_csv(path: str) -> PathEnsemble:
    with open(path) as fh:
        fh.readline()
        meta = dict(item.split("=") for item in fh.readline()[1:].split())
        fh.readline()  # time grid, reconstructible from T and n_steps
        fh.readline()  # column header
        d = int(meta["d"])
        n_steps = int(meta["n_steps"])
        n_paths = int(meta["n_paths"])
        seed = int(meta["seed"])
        T = float(meta["T"])
        y0 = np.empty((n_paths, d))
        dB = np.empty((n_paths, n_steps, d))
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < 3:
                continue
            i, a = int(parts[0]), int(parts[1])
            y0[i, a] = float(parts[2])
            dB[i, :, a] = [float(x) for x in parts[3:]]
    return _rebuild_ensemble(d, T, n_steps, n_paths, seed, y0, dB)


def save_ensemble(ens: PathEnsemble, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(_ENS_MAGIC)
        fh.write(struct.pack("<IIIQQd", 1, ens.d, ens.n_steps, ens.n_paths,
                             ens.seed, ens.T))
        fh.write(np.ascontiguousarray(ens.y0, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ens.increments, dtype="<f8").tobytes())


def load_ensemble(path: str) -> PathEnsemble:
    with open(path, "rb") as fh:
        if fh.read(4) != _ENS_MAGIC:
            raise ValueError("not an ensemble file")
        version, d, n_steps, n_paths, seed, T = struct.unpack("<IIIQQd", fh.read(36))
        if version != 1:
            raise ValueError(f"unsupported ensemble version {version}")
        y0 = np.frombuffer(fh.read(n_paths * d * 8), dtype="<f8").reshape(n_paths, d)
        dB = np.frombuffer(fh.read(n_paths * n_steps * d * 8),
                           dtype="<f8").reshape(n_paths, n_steps, d)
    return _rebuild_ensemble(d, T, n_steps, n_paths, seed, y0.copy(), dB.copy())


def save_projection_estimate_csv(est, path: str) -> None:
    """Histogram-regression estimate as CSV: bin center per axis, estimate,
    count, standard error.  Empty bins carry empty estimate/se fields."""
    bins = est.bins
    d = est.estimate.ndim
    centers = (np.arange(bins) + 0.5) / bins
    with open(path, "w") as fh:
        fh.write(",".join(f"center{a+1}" for a in range(d))
                 + ",estimate,count,se\n")
        for idx in np.ndindex(est.estimate.shape):
            row = [repr(float(centers[i])) for i in idx]
            cnt = int(est.counts[idx])
            if cnt > 0 and np.isfinite(est.estimate[idx]):
                e = repr(float(est.estimate[idx]))
                s = repr(float(est.se[idx])) if np.isfinite(est.se[idx]) else ""
            else:
                e, s = "", ""
            fh.write(",".join(row + [e, str(cnt), s]) + "\n")


def _rebuild_ensemble(d, T, n_steps, n_paths, seed, y0, dB) -> PathEnsemble:
    from martlab.diffusion import wrap_accumulate

    return PathEnsemble(d=d, T=T, n_steps=n_steps, n_paths=n_paths, seed=seed,
                        y0=y0, increments=dB,
                        positions=wrap_accumulate(y0, dB),
                        displacement=np.sum(dB, axis=1))
