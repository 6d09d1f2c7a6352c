"""Pure-numpy implementations of the hot kernels.

Selected automatically when the compiled extension is unavailable (or when
MARTLAB_KERNELS=numpy).  The compiled core mirrors these functions exactly;
both are exercised by the test suite and the benchmark.
"""

import numpy as np

__all__ = ["projection_chunk", "weighted_z_stats"]

A_CONST = 0
A_PROFILE = 1
A_ROTATION = 2


def _axis_phase_powers(y_axis: np.ndarray, kmax: int) -> np.ndarray:
    """Powers z^e, e = 0..kmax, of z = exp(2 pi i y) for a batch of points."""
    B = y_axis.shape[0]
    out = np.empty((kmax + 1, B), dtype=np.complex128)
    out[0] = 1.0
    if kmax >= 1:
        z = np.exp(2j * np.pi * y_axis)
        out[1] = z
        for e in range(2, kmax + 1):
            out[e] = out[e - 1] * z
    return out


def _mode_phases(Y: np.ndarray, kmodes: np.ndarray) -> np.ndarray:
    """exp(2 pi i k.y) for each mode k (rows of kmodes), shape (M, B).

    Negative exponents use conjugation (|z| = 1 on the torus).
    """
    M, d = kmodes.shape
    B = Y.shape[0]
    phases = np.ones((M, B), dtype=np.complex128)
    for a in range(d):
        ka = kmodes[:, a]
        kmax = int(np.max(np.abs(ka))) if M else 0
        pw = _axis_phase_powers(Y[:, a], kmax)
        fac = pw[np.abs(ka)]
        neg = ka < 0
        if np.any(neg):
            fac[neg] = np.conj(fac[neg])
        phases *= fac
    return phases


def projection_chunk(y0, dB, dt,
                     kmodes, grad_base, decay, decay_plain, wstep,
                     a_kind, a_mat, a_profile, rot_winding,
                     cp_steps, cp_coeffs, cp_weights):
    """Stream one chunk of paths and accumulate the per-path functionals.

    Parameters
    ----------
    y0 : (B, d) initial positions in [0,1)^d
    dB : (B, N, d) Brownian increments
    kmodes : (M, d) int64 frequency lattice of the driving field
    grad_base : (d, M) complex  gradient coefficients 2 pi i k_j c_k
    decay : (N, M) semigroup damping for the transformed integral and the
            quadratic-variation ledger (right-endpoint time labels)
    decay_plain : (N, M) damping for the plain integral (midpoint labels,
            which keep its second moment at or below the exact isometry value)
    wstep : (N,) exponential-weight ratio w_T / w_{t_n} (1.0 when V = 0)
    a_kind, a_mat, a_profile, rot_winding : matrix profile specification
    cp_steps : (C,) int64 step indices (0..N) at which to record
               cp_weights[c] * Re(cp_coeffs[c] . phases)

    Returns
    -------
    dict with per-path arrays: i_trans (weighted transformed integral, raw
    sign), i_plain (unweighted untransformed integral), qv_trans, qv_plain
    (quadratic variations of the shared-label integrands), y_T, cp_vals (B, C).
    """
    y0 = np.asarray(y0, dtype=np.float64)
    dB = np.asarray(dB, dtype=np.float64)
    B, N, d = dB.shape
    M = kmodes.shape[0]
    C = len(cp_steps)

    Y = y0.copy()
    i_trans = np.zeros(B)
    i_plain = np.zeros(B)
    qv_trans = np.zeros(B)
    qv_plain = np.zeros(B)
    cp_vals = np.zeros((B, C))
    cp_lookup = {int(s): c for c, s in enumerate(cp_steps)}

    for n in range(N):
        phases = _mode_phases(Y, kmodes)
        if n in cp_lookup:
            c = cp_lookup[n]
            cp_vals[:, c] = cp_weights[c] * (cp_coeffs[c] @ phases).real
        h = ((grad_base * decay[n][None, :]) @ phases).real  # (d, B)
        hp = ((grad_base * decay_plain[n][None, :]) @ phases).real
        if a_kind == A_CONST:
            t = a_mat @ h
        elif a_kind == A_PROFILE:
            t = (a_profile[n] * a_mat) @ h
        elif a_kind == A_ROTATION:
            theta = 2.0 * np.pi * rot_winding * Y[:, 0]
            ct, st = np.cos(theta), np.sin(theta)
            t = np.empty_like(h)
            t[0] = ct * h[0] - st * h[1]
            t[1] = st * h[0] + ct * h[1]
        else:
            raise ValueError(f"unknown matrix kind {a_kind}")
        dBn = dB[:, n, :]
        u = np.einsum("ib,bi->b", t, dBn)
        i_trans += wstep[n] * u
        i_plain += np.einsum("jb,bj->b", hp, dBn)
        qv_trans += np.sum(t * t, axis=0) * dt
        qv_plain += np.sum(h * h, axis=0) * dt
        Y = Y + dBn
        Y -= np.floor(Y)

    if N in cp_lookup:
        phases = _mode_phases(Y, kmodes)
        c = cp_lookup[N]
        cp_vals[:, c] = cp_weights[c] * (cp_coeffs[c] @ phases).real

    return {
        "i_trans": i_trans,
        "i_plain": i_plain,
        "qv_trans": qv_trans,
        "qv_plain": qv_plain,
        "y_T": Y,
        "cp_vals": cp_vals,
    }


def weighted_z_stats(dM: np.ndarray, V: np.ndarray, dt: float):
    """Exponential-integrator recursion Z_{n+1} = e^(V_n dt)(Z_n + dM_n).

    Returns (z_T, sup_abs_z, qv_T) per path;  qv is the discrete quadratic
    variation sum dM_n^2.
    """
    dM = np.asarray(dM, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    B, N = dM.shape
    Z = np.zeros(B)
    sup = np.zeros(B)
    qv = np.zeros(B)
    for n in range(N):
        Z = np.exp(V[:, n] * dt) * (Z + dM[:, n])
        np.maximum(sup, np.abs(Z), out=sup)
        qv += dM[:, n] ** 2
    return Z, sup, qv
