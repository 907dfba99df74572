# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernel.

Same contract as ``_python.run_chunk``; every floating-point operation is
performed in the same order as the numpy implementation so trajectories
are bit-identical across backends.  Built without -ffast-math or
fused-multiply-add so IEEE semantics match numpy's.
"""

import numpy as np

from libc.math cimport isfinite


cdef inline double _psi(int code, double tau,
                        const double[::1] thr, const double[::1] vals,
                        double w) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid, nlev
    cdef double aw, v
    if w != w:  # NaN propagates, matching numpy
        return w
    if code == 0:  # sign
        if w > 0.0:
            return 1.0
        if w < 0.0:
            return -1.0
        return 0.0
    if code == 1:  # clip
        if w > tau:
            return tau
        if w < -tau:
            return -tau
        return w
    if code == 2:  # quantizer: first threshold >= |w|, saturate at the top
        if w == 0.0:
            return 0.0
        aw = -w if w < 0.0 else w
        nlev = thr.shape[0]
        lo = 0
        hi = nlev
        while lo < hi:
            mid = (lo + hi) >> 1
            if thr[mid] < aw:
                lo = mid + 1
            else:
                hi = mid
        if lo >= nlev:
            lo = nlev - 1
        v = vals[lo]
        return v if w > 0.0 else -v
    return w  # identity


def run_chunk(double[:, :, ::1] x, long long[::1] diverged_at, long long t0,
              const double[::1] alphas,
              const double[:, :, ::1] noise_obs,
              const double[:, :, :, ::1] noise_comm,
              const long long[::1] arc_rx, const long long[::1] arc_tx,
              const double[:, ::1] h, const double[::1] z_det,
              const double[::1] theta,
              double b_over_a,
              int pc_code, double pc_tau,
              const double[::1] pc_thr, const double[::1] pc_vals,
              int po_code, double po_tau,
              const double[::1] po_thr, const double[::1] po_vals,
              double sumsq_limit):
    cdef Py_ssize_t n_reps = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t m = x.shape[2]
    cdef Py_ssize_t n_steps = alphas.shape[0]
    cdef Py_ssize_t n_arcs = arc_rx.shape[0]

    scratch = np.zeros((2, n, m))
    cdef double[:, ::1] acc = scratch[0]
    cdef double[:, ::1] xn = scratch[1]

    cdef Py_ssize_t b, c, a, i, j, l
    cdef double alpha, dot, resid, po, v, d, sumsq
    cdef bint finite

    with nogil:
        for b in range(n_reps):
            if diverged_at[b] >= 0:
                continue
            for c in range(n_steps):
                alpha = alphas[c]

                for i in range(n):
                    for l in range(m):
                        acc[i, l] = 0.0
                for a in range(n_arcs):
                    i = arc_rx[a]
                    j = arc_tx[a]
                    for l in range(m):
                        acc[i, l] += _psi(pc_code, pc_tau, pc_thr, pc_vals,
                                          (x[b, i, l] - x[b, j, l])
                                          + noise_comm[b, c, a, l])

                for i in range(n):
                    dot = h[i, 0] * x[b, i, 0]
                    for l in range(1, m):
                        dot = dot + h[i, l] * x[b, i, l]
                    resid = (z_det[i] + noise_obs[b, c, i]) - dot
                    po = _psi(po_code, po_tau, po_thr, po_vals, resid)
                    for l in range(m):
                        xn[i, l] = x[b, i, l] - alpha * (b_over_a * acc[i, l]
                                                         - po * h[i, l])

                finite = True
                sumsq = 0.0
                for i in range(n):
                    for l in range(m):
                        v = xn[i, l]
                        if not isfinite(v):
                            finite = False
                        d = v - theta[l]
                        sumsq += d * d
                        x[b, i, l] = v
                if (not finite) or (sumsq > sumsq_limit):
                    diverged_at[b] = t0 + c
                    break
