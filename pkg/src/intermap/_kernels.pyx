# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled orbit kernels; mirrors `_kernels_py` function for function.

Per-point sequential loops with no synchronization barrier: each orbit is
a pure function of (x0, t0, key), so results are bit-compatible with the
NumPy backend on the integer theta stream and agree to floating rounding
on x. All hot loops release the GIL.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, pow, sin

cnp.import_array()

ctypedef cnp.uint64_t u64
ctypedef cnp.int64_t i64

PHI_OVERFLOW = -1

cdef double TWO_M53 = 2.0 ** -53
cdef double TWO_PI = 6.283185307179586476925286766559
cdef u64 GOLDEN = 0x9E3779B97F4A7C15
cdef u64 MIX1 = 0xBF58476D1CE4E5B9
cdef u64 MIX2 = 0x94D049BB133111EB


cdef inline u64 _mix(u64 v) nogil:
    v = (v ^ (v >> 30)) * MIX1
    v = (v ^ (v >> 27)) * MIX2
    return v ^ (v >> 31)


cdef inline double _theta_f(u64 t) nogil:
    return <double> (t >> 11) * TWO_M53


cdef inline void _step1(double* x, u64* t, u64 key, i64 ctr,
                        double gamma, double c0, double a) nogil:
    cdef double xv = x[0]
    cdef double th, u
    if xv <= 0.75:
        th = _theta_f(t[0])
        u = c0 * (1.0 + a * xv * (1.0 + cos(TWO_PI * th)) * 0.5)
        x[0] = xv * (1.0 + pow(xv, gamma) * u)
    else:
        x[0] = 4.0 * xv - 3.0
    t[0] = (t[0] << 2) | (_mix(key + (<u64> (ctr + 1)) * GOLDEN) >> 62)


cdef inline double _obs1(int kind, double* prm, double x, double th) nogil:
    cdef double inside
    if kind == 0:
        inside = 0.0
        if prm[0] <= x <= prm[1]:
            if prm[2] <= prm[3]:
                if prm[2] <= th <= prm[3]:
                    inside = 1.0
            else:
                if th >= prm[2] or th <= prm[3]:
                    inside = 1.0
        return inside
    return prm[0] + prm[1] * (1.0 - x) + prm[2] * cos(TWO_PI * th) \
        + prm[3] * sin(TWO_PI * th)


def obs_values(kind, prm, x, th):
    """Evaluate the kernel observable family.

    kind 0: indicator of a rectangle (x_lo, x_hi, th_lo, th_hi); the theta
    interval wraps around 0 when th_lo > th_hi.
    kind 1: prm[0] + prm[1]*(1-x) + prm[2]*cos(2*pi*th) + prm[3]*sin(2*pi*th).
    """
    if kind == 0:
        x_lo, x_hi, th_lo, th_hi = prm[:4]
        in_x = (x >= x_lo) & (x <= x_hi)
        if th_lo <= th_hi:
            in_th = (th >= th_lo) & (th <= th_hi)
        else:
            in_th = (th >= th_lo) | (th <= th_hi)
        return (in_x & in_th).astype(np.float64)
    if kind == 1:
        return (
            prm[0]
            + prm[1] * (1.0 - x)
            + prm[2] * np.cos(2.0 * np.pi * th)
            + prm[3] * np.sin(2.0 * np.pi * th)
        )
    raise ValueError(f"unknown observable kind {kind}")


def theta_float(t):
    """Floating theta in [0, 1) from the fixed-point representation."""
    return (np.asarray(t, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * TWO_M53


def theta_fixed(theta):
    """Fixed-point representation of floating theta in [0, 1).

    The float carries 53 bits; the missing low 11 are padded with a hash
    of the payload rather than zeros. A zero block would shift up through
    the top-53 window and pin every theta near 0 around step 27; padding
    keeps the word-level digit stream uniform from the start while the
    round-trip through theta_float still floors to the same float.
    """
    scaled = np.floor(np.asarray(theta, dtype=np.float64) % 1.0 * 2.0 ** 53)
    payload = scaled.astype(np.uint64)
    golden = np.uint64(GOLDEN)
    mix1 = np.uint64(MIX1)
    mix2 = np.uint64(MIX2)
    v = payload + golden
    v = (v ^ (v >> np.uint64(30))) * mix1
    v = (v ^ (v >> np.uint64(27))) * mix2
    v = v ^ (v >> np.uint64(31))
    return (payload << np.uint64(11)) | (v & np.uint64(0x7FF))


def advance(x, t, key, ctr, nsteps, gamma, c0, a):
    """Advance every orbit nsteps; returns (x, t, ctr)."""
    cdef cnp.ndarray[double, ndim=1] x_ = np.array(x, dtype=np.float64)
    cdef cnp.ndarray[u64, ndim=1] t_ = np.array(t, dtype=np.uint64)
    cdef cnp.ndarray[u64, ndim=1] key_ = np.ascontiguousarray(key, dtype=np.uint64)
    cdef cnp.ndarray[i64, ndim=1] ctr_ = np.array(ctr, dtype=np.int64)
    cdef Py_ssize_t n = x_.shape[0], i
    cdef i64 s, ns = int(nsteps)
    cdef double g = gamma, c = c0, aa = a
    with nogil:
        for i in range(n):
            for s in range(ns):
                _step1(&x_[i], &t_[i], key_[i], ctr_[i] + s, g, c, aa)
            ctr_[i] += ns
    return x_, t_, ctr_


def checkpoint_states(x, t, key, ctr, checkpoints, gamma, c0, a):
    """States after each checkpoint step count (ascending ints)."""
    cdef cnp.ndarray[double, ndim=1] x_ = np.array(x, dtype=np.float64)
    cdef cnp.ndarray[u64, ndim=1] t_ = np.array(t, dtype=np.uint64)
    cdef cnp.ndarray[u64, ndim=1] key_ = np.ascontiguousarray(key, dtype=np.uint64)
    cdef cnp.ndarray[i64, ndim=1] ctr_ = np.array(ctr, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] cps = np.asarray(checkpoints, dtype=np.int64)
    cdef Py_ssize_t n = x_.shape[0], ncp = cps.shape[0], i, k
    cdef cnp.ndarray[double, ndim=2] xs = np.empty((n, ncp))
    cdef cnp.ndarray[u64, ndim=2] ts = np.empty((n, ncp), dtype=np.uint64)
    cdef i64 s
    cdef double g = gamma, c = c0, aa = a
    with nogil:
        for i in range(n):
            s = 0
            for k in range(ncp):
                while s < cps[k]:
                    _step1(&x_[i], &t_[i], key_[i], ctr_[i] + s, g, c, aa)
                    s += 1
                xs[i, k] = x_[i]
                ts[i, k] = t_[i]
            ctr_[i] += s
    return xs, ts, x_, t_, ctr_


def birkhoff_sums(x, t, key, ctr, checkpoints, kind, prm, gamma, c0, a):
    """Running Birkhoff sums of the observable at each checkpoint."""
    if kind not in (0, 1):
        raise ValueError(f"unknown observable kind {kind}")
    cdef cnp.ndarray[double, ndim=1] x_ = np.array(x, dtype=np.float64)
    cdef cnp.ndarray[u64, ndim=1] t_ = np.array(t, dtype=np.uint64)
    cdef cnp.ndarray[u64, ndim=1] key_ = np.ascontiguousarray(key, dtype=np.uint64)
    cdef cnp.ndarray[i64, ndim=1] ctr_ = np.array(ctr, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] cps = np.asarray(checkpoints, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] prm_ = np.ascontiguousarray(prm, dtype=np.float64)
    cdef Py_ssize_t n = x_.shape[0], ncp = cps.shape[0], i, k
    cdef cnp.ndarray[double, ndim=2] sums = np.empty((n, ncp))
    cdef i64 s
    cdef int kd = int(kind)
    cdef double acc
    cdef double g = gamma, c = c0, aa = a
    with nogil:
        for i in range(n):
            s = 0
            acc = 0.0
            for k in range(ncp):
                while s < cps[k]:
                    acc += _obs1(kd, &prm_[0], x_[i], _theta_f(t_[i]))
                    _step1(&x_[i], &t_[i], key_[i], ctr_[i] + s, g, c, aa)
                    s += 1
                sums[i, k] = acc
            ctr_[i] += s
    return sums, x_, t_, ctr_


def first_returns(x, t, key, ctr, kreturns, cap, gamma, c0, a):
    """Record `kreturns` successive first returns to {x >= 3/4} per orbit."""
    cdef cnp.ndarray[double, ndim=1] x_ = np.array(x, dtype=np.float64)
    cdef cnp.ndarray[u64, ndim=1] t_ = np.array(t, dtype=np.uint64)
    cdef cnp.ndarray[u64, ndim=1] key_ = np.ascontiguousarray(key, dtype=np.uint64)
    cdef cnp.ndarray[i64, ndim=1] ctr_ = np.array(ctr, dtype=np.int64)
    cdef Py_ssize_t n = x_.shape[0], i
    cdef i64 kret = int(kreturns), capv = int(cap)
    cdef cnp.ndarray[i64, ndim=2] phis = np.full((n, kret), PHI_OVERFLOW, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=2] xs = np.full((n, kret), np.nan)
    cdef cnp.ndarray[u64, ndim=2] ts = np.zeros((n, kret), dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] overflow = np.zeros(n, dtype=np.uint8)
    cdef i64 filled, cur, s
    cdef double g = gamma, c = c0, aa = a
    with nogil:
        for i in range(n):
            filled = 0
            cur = 0
            s = 0
            while filled < kret:
                _step1(&x_[i], &t_[i], key_[i], ctr_[i] + s, g, c, aa)
                s += 1
                cur += 1
                if x_[i] >= 0.75:
                    phis[i, filled] = cur
                    xs[i, filled] = x_[i]
                    ts[i, filled] = t_[i]
                    filled += 1
                    cur = 0
                elif cur >= capv:
                    overflow[i] = 1
                    break
            ctr_[i] += s
    return phis, xs, ts, x_, t_, ctr_, overflow.view(bool)


def excursions(x, t, key, ctr, quota, zbox, cap_f, cap_phi, gamma, c0, a):
    """Record `quota` successive excursions from Z back to Z per orbit."""
    cdef cnp.ndarray[double, ndim=1] x_ = np.array(x, dtype=np.float64)
    cdef cnp.ndarray[u64, ndim=1] t_ = np.array(t, dtype=np.uint64)
    cdef cnp.ndarray[u64, ndim=1] key_ = np.ascontiguousarray(key, dtype=np.uint64)
    cdef cnp.ndarray[i64, ndim=1] ctr_ = np.array(ctr, dtype=np.int64)
    cdef double x_lo = zbox[0], x_hi = zbox[1], th_lo = zbox[2], th_hi = zbox[3]
    cdef Py_ssize_t n = x_.shape[0], i
    cdef i64 q = int(quota), capf = int(cap_f), capp = int(cap_phi)
    cdef cnp.ndarray[i64, ndim=2] rho = np.full((n, q), PHI_OVERFLOW, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=2] tau = np.full((n, q), PHI_OVERFLOW, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=2] maxphi = np.full((n, q), PHI_OVERFLOW, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] overflow = np.zeros(n, dtype=np.uint8)
    cdef i64 filled, c_rho, c_tau, c_max, c_phi, s
    cdef double th
    cdef bint in_z
    cdef double g = gamma, c = c0, aa = a
    with nogil:
        for i in range(n):
            filled = 0
            c_rho = 0
            c_tau = 0
            c_max = 0
            c_phi = 0
            s = 0
            while filled < q:
                _step1(&x_[i], &t_[i], key_[i], ctr_[i] + s, g, c, aa)
                s += 1
                c_phi += 1
                if x_[i] >= 0.75:
                    c_rho += 1
                    c_tau += c_phi
                    if c_phi > c_max:
                        c_max = c_phi
                    c_phi = 0
                    th = _theta_f(t_[i])
                    if th_lo <= th_hi:
                        in_z = th_lo <= th <= th_hi
                    else:
                        in_z = th >= th_lo or th <= th_hi
                    in_z = in_z and x_lo <= x_[i] <= x_hi
                    if in_z:
                        rho[i, filled] = c_rho
                        tau[i, filled] = c_tau
                        maxphi[i, filled] = c_max
                        filled += 1
                        c_rho = 0
                        c_tau = 0
                        c_max = 0
                    elif c_rho >= capf:
                        overflow[i] = 1
                        break
                elif c_phi >= capp:
                    overflow[i] = 1
                    break
            ctr_[i] += s
    return rho, tau, maxphi, x_, t_, ctr_, overflow.view(bool)
