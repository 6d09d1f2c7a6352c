# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: streaming projection-ensemble accumulation and the
weighted-Z recursion.  Mirrors martlab._kernels.fallback function for
function; results agree with the fallback to floating-point reassociation
(<= 1e-12 relative), and the main loops run without the GIL so chunk-level
threads scale.
"""

import numpy as np

cimport cython
from libc.math cimport cos, sin, floor, exp, fabs, sqrt

A_CONST = 0
A_PROFILE = 1
A_ROTATION = 2

ctypedef double complex cplx


cdef inline void _axis_powers(double y, long kmax, cplx *out) noexcept nogil:
    cdef long e
    cdef double ang = 6.283185307179586476925286766559 * y
    cdef cplx z
    out[0] = 1.0 + 0.0j
    if kmax >= 1:
        z = cos(ang) + 1j * sin(ang)
        out[1] = z
        for e in range(2, kmax + 1):
            out[e] = out[e - 1] * z


def projection_chunk(object y0_in, object dB_in, double dt,
                     object kmodes_in, object grad_base_in, object decay_in,
                     object decay_plain_in,
                     object wstep_in, int a_kind, object a_mat_in,
                     object a_profile_in, double rot_winding,
                     object cp_steps_in, object cp_coeffs_in, object cp_weights_in):
    """See martlab._kernels.fallback.projection_chunk."""
    cdef double[:, ::1] y0 = np.ascontiguousarray(y0_in, dtype=np.float64)
    cdef double[:, :, ::1] dB = np.ascontiguousarray(dB_in, dtype=np.float64)
    cdef long[:, ::1] kmodes = np.ascontiguousarray(kmodes_in, dtype=np.int64)
    cdef cplx[:, ::1] grad_base = np.ascontiguousarray(grad_base_in, dtype=np.complex128)
    cdef double[:, ::1] decay = np.ascontiguousarray(decay_in, dtype=np.float64)
    cdef double[:, ::1] decay_plain = np.ascontiguousarray(decay_plain_in, dtype=np.float64)
    cdef double[::1] wstep = np.ascontiguousarray(wstep_in, dtype=np.float64)
    cdef double[:, ::1] a_mat = np.ascontiguousarray(a_mat_in, dtype=np.float64)
    cdef double[::1] a_profile = np.ascontiguousarray(a_profile_in, dtype=np.float64)
    cdef long[::1] cp_steps = np.ascontiguousarray(cp_steps_in, dtype=np.int64)
    cp_arr = np.ascontiguousarray(cp_coeffs_in, dtype=np.complex128)
    cp_arr = cp_arr.reshape(len(cp_steps_in), kmodes.shape[0])
    cdef cplx[:, ::1] cp_coeffs = cp_arr
    cdef double[::1] cp_weights = np.ascontiguousarray(cp_weights_in, dtype=np.float64)

    cdef Py_ssize_t B = dB.shape[0]
    cdef Py_ssize_t N = dB.shape[1]
    cdef Py_ssize_t d = dB.shape[2]
    cdef Py_ssize_t M = kmodes.shape[0]
    cdef Py_ssize_t C = cp_steps.shape[0]

    i_trans_np = np.zeros(B)
    i_plain_np = np.zeros(B)
    qv_trans_np = np.zeros(B)
    qv_plain_np = np.zeros(B)
    y_T_np = np.empty((B, d))
    cp_vals_np = np.zeros((B, C))
    cdef double[::1] i_trans = i_trans_np
    cdef double[::1] i_plain = i_plain_np
    cdef double[::1] qv_trans = qv_trans_np
    cdef double[::1] qv_plain = qv_plain_np
    cdef double[:, ::1] y_T = y_T_np
    cdef double[:, ::1] cp_vals = cp_vals_np

    # step -> checkpoint index (or -1)
    cp_at_np = np.full(N + 1, -1, dtype=np.int64)
    cdef long c
    for c in range(C):
        cp_at_np[cp_steps[c]] = c
    cdef long[::1] cp_at = cp_at_np

    cdef long kmax_all = 0
    cdef Py_ssize_t a, m
    for m in range(M):
        for a in range(d):
            if kmodes[m, a] > kmax_all:
                kmax_all = kmodes[m, a]
            if -kmodes[m, a] > kmax_all:
                kmax_all = -kmodes[m, a]

    pw_np = np.empty((d, kmax_all + 1), dtype=np.complex128)
    phase_np = np.empty(M, dtype=np.complex128)
    y_np = np.empty(d)
    h_np = np.empty(d)
    hp_np = np.empty(d)
    t_np = np.empty(d)
    cdef cplx[:, ::1] pw = pw_np
    cdef cplx[::1] phase = phase_np
    cdef double[::1] y = y_np
    cdef double[::1] h = h_np
    cdef double[::1] hp = hp_np
    cdef double[::1] t = t_np

    cdef Py_ssize_t i, n, j
    cdef long kk, cidx
    cdef cplx ph, acc
    cdef double u, theta, ct, st, acc_r, sq, w

    with nogil:
        for i in range(B):
            for a in range(d):
                y[a] = y0[i, a]
            for n in range(N + 1):
                if n == N or cp_at[n] >= 0:
                    for a in range(d):
                        _axis_powers(y[a], kmax_all, &pw[a, 0])
                    for m in range(M):
                        ph = 1.0 + 0.0j
                        for a in range(d):
                            kk = kmodes[m, a]
                            if kk >= 0:
                                ph = ph * pw[a, kk]
                            else:
                                ph = ph * pw[a, -kk].conjugate()
                        phase[m] = ph
                    cidx = cp_at[n]
                    if cidx >= 0:
                        acc = 0
                        for m in range(M):
                            acc = acc + cp_coeffs[cidx, m] * phase[m]
                        cp_vals[i, cidx] = cp_weights[cidx] * acc.real
                    if n == N:
                        break
                else:
                    for a in range(d):
                        _axis_powers(y[a], kmax_all, &pw[a, 0])
                    for m in range(M):
                        ph = 1.0 + 0.0j
                        for a in range(d):
                            kk = kmodes[m, a]
                            if kk >= 0:
                                ph = ph * pw[a, kk]
                            else:
                                ph = ph * pw[a, -kk].conjugate()
                        phase[m] = ph

                for j in range(d):
                    acc = 0
                    for m in range(M):
                        acc = acc + grad_base[j, m] * decay[n, m] * phase[m]
                    h[j] = acc.real
                for j in range(d):
                    acc = 0
                    for m in range(M):
                        acc = acc + grad_base[j, m] * decay_plain[n, m] * phase[m]
                    hp[j] = acc.real

                if a_kind == 0:      # constant matrix
                    for j in range(d):
                        acc_r = 0.0
                        for a in range(d):
                            acc_r += a_mat[j, a] * h[a]
                        t[j] = acc_r
                elif a_kind == 1:    # scalar profile times matrix
                    for j in range(d):
                        acc_r = 0.0
                        for a in range(d):
                            acc_r += a_mat[j, a] * h[a]
                        t[j] = a_profile[n] * acc_r
                else:                # pointwise rotation, d = 2
                    theta = 6.283185307179586476925286766559 * rot_winding * y[0]
                    ct = cos(theta)
                    st = sin(theta)
                    t[0] = ct * h[0] - st * h[1]
                    t[1] = st * h[0] + ct * h[1]

                u = 0.0
                for j in range(d):
                    u += t[j] * dB[i, n, j]
                i_trans[i] += wstep[n] * u
                u = 0.0
                for j in range(d):
                    u += hp[j] * dB[i, n, j]
                i_plain[i] += u
                sq = 0.0
                for j in range(d):
                    sq += t[j] * t[j]
                qv_trans[i] += sq * dt
                sq = 0.0
                for j in range(d):
                    sq += h[j] * h[j]
                qv_plain[i] += sq * dt

                for a in range(d):
                    w = y[a] + dB[i, n, a]
                    y[a] = w - floor(w)
            for a in range(d):
                y_T[i, a] = y[a]

    return {
        "i_trans": i_trans_np,
        "i_plain": i_plain_np,
        "qv_trans": qv_trans_np,
        "qv_plain": qv_plain_np,
        "y_T": y_T_np,
        "cp_vals": cp_vals_np,
    }


def weighted_z_stats(object dM_in, object V_in, double dt):
    """See martlab._kernels.fallback.weighted_z_stats."""
    cdef double[:, ::1] dM = np.ascontiguousarray(dM_in, dtype=np.float64)
    cdef double[:, ::1] V = np.ascontiguousarray(V_in, dtype=np.float64)
    cdef Py_ssize_t B = dM.shape[0]
    cdef Py_ssize_t N = dM.shape[1]
    zT_np = np.empty(B)
    sup_np = np.empty(B)
    qv_np = np.empty(B)
    cdef double[::1] zT = zT_np
    cdef double[::1] sup = sup_np
    cdef double[::1] qv = qv_np
    cdef Py_ssize_t i, n
    cdef double z, s, q, az
    with nogil:
        for i in range(B):
            z = 0.0
            s = 0.0
            q = 0.0
            for n in range(N):
                z = exp(V[i, n] * dt) * (z + dM[i, n])
                az = fabs(z)
                if az > s:
                    s = az
                q += dM[i, n] * dM[i, n]
            zT[i] = z
            sup[i] = s
            qv[i] = q
    return zT_np, sup_np, qv_np
