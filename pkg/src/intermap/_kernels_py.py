"""NumPy reference implementation of the orbit kernels.

This module defines the semantics; the compiled extension `_kernels`
mirrors it function for function. Both carry the fibre angle theta as a
Q0.64 fixed-point integer. The factor map is exact in that representation:

    t' = (t << 2) | fresh_bits

where the two fresh low bits are drawn from a counter-based hash keyed by
the orbit. In floating point, 4*theta mod 1 discards two mantissa bits per
step and every orbit collapses onto theta = 0 after ~26 steps; the integer
form instead stays distribution-exact for Lebesgue-random starts (uniform
theta has i.i.d. base-4 digits) and keeps each orbit a pure function of
(x0, t0, key), independent of batching or thread count.

Floating theta is recovered as the top 53 bits: theta = (t >> 11) * 2**-53.
"""

from __future__ import annotations

import numpy as np

#: Marker stored in phi slots that were never filled because the orbit hit
#: an iteration cap first.
PHI_OVERFLOW = -1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S62 = np.uint64(62)
_S11 = np.uint64(11)
_S2 = np.uint64(2)
_PAD11 = np.uint64(0x7FF)
_2_53 = 2.0**-53


def _mix64(v: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer; full-avalanche 64-bit hash."""
    v = (v ^ (v >> _S30)) * _MIX1
    v = (v ^ (v >> _S27)) * _MIX2
    return v ^ (v >> _S31)


def _fresh_bits(key: np.ndarray, ctr: np.ndarray) -> np.ndarray:
    """Two pseudo-random bits for step number `ctr` of each orbit."""
    return _mix64(key + ctr.astype(np.uint64) * _GOLDEN) >> _S62


def theta_float(t: np.ndarray) -> np.ndarray:
    """Floating theta in [0, 1) from the fixed-point representation."""
    return (np.asarray(t, dtype=np.uint64) >> _S11).astype(np.float64) * _2_53


def theta_fixed(theta: np.ndarray) -> np.ndarray:
    """Fixed-point representation of floating theta in [0, 1).

    The float carries 53 bits; the missing low 11 are padded with a hash
    of the payload rather than zeros. A zero block would shift up through
    the top-53 window and pin every theta near 0 around step 27; padding
    keeps the word-level digit stream uniform from the start while the
    round-trip through theta_float still floors to the same float.
    """
    scaled = np.floor(np.asarray(theta, dtype=np.float64) % 1.0 * 2.0**53)
    payload = scaled.astype(np.uint64)
    return (payload << _S11) | (_mix64(payload + _GOLDEN) & _PAD11)


def _step(x, t, key, ctr, gamma, c0, a):
    """One map application; ctr is the index of the step being taken."""
    th = theta_float(t)
    u = c0 * (1.0 + a * x * (1.0 + np.cos(2.0 * np.pi * th)) / 2.0)
    x_new = np.where(x <= 0.75, x * (1.0 + x**gamma * u), 4.0 * x - 3.0)
    t_new = (t << _S2) | _fresh_bits(key, ctr + 1)
    return x_new, t_new


def advance(x, t, key, ctr, nsteps, gamma, c0, a):
    """Advance every orbit nsteps; returns (x, t, ctr)."""
    x = np.array(x, dtype=np.float64, copy=True)
    t = np.array(t, dtype=np.uint64, copy=True)
    ctr = np.array(ctr, dtype=np.int64, copy=True)
    for _ in range(int(nsteps)):
        x, t = _step(x, t, key, ctr, gamma, c0, a)
        ctr += 1
    return x, t, ctr


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


def checkpoint_states(x, t, key, ctr, checkpoints, gamma, c0, a):
    """States after each checkpoint step count (ascending ints).

    Returns (xs, ts) of shape (npts, len(checkpoints)), plus final (x, t,
    ctr).
    """
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    x = np.array(x, dtype=np.float64, copy=True)
    t = np.array(t, dtype=np.uint64, copy=True)
    ctr = np.array(ctr, dtype=np.int64, copy=True)
    xs = np.empty((x.size, checkpoints.size))
    ts = np.empty((x.size, checkpoints.size), dtype=np.uint64)
    done = 0
    for k, cp in enumerate(checkpoints):
        x, t, ctr = advance(x, t, key, ctr, cp - done, gamma, c0, a)
        done = int(cp)
        xs[:, k] = x
        ts[:, k] = t
    return xs, ts, x, t, ctr


def birkhoff_sums(x, t, key, ctr, checkpoints, kind, prm, gamma, c0, a):
    """Running Birkhoff sums of the observable at each checkpoint.

    The sum at checkpoint n is over the first n points of the orbit,
    starting with the initial state. Returns (sums, x, t, ctr).
    """
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    x = np.array(x, dtype=np.float64, copy=True)
    t = np.array(t, dtype=np.uint64, copy=True)
    ctr = np.array(ctr, dtype=np.int64, copy=True)
    prm = np.asarray(prm, dtype=np.float64)
    acc = np.zeros(x.size)
    sums = np.empty((x.size, checkpoints.size))
    step_no = 0
    for k, cp in enumerate(checkpoints):
        while step_no < cp:
            acc += obs_values(kind, prm, x, theta_float(t))
            x, t = _step(x, t, key, ctr, gamma, c0, a)
            ctr += 1
            step_no += 1
        sums[:, k] = acc
    return sums, x, t, ctr


def first_returns(x, t, key, ctr, kreturns, cap, gamma, c0, a):
    """Record `kreturns` successive first returns to {x >= 3/4} per orbit.

    Starts may lie anywhere in X; the first recorded event is the first
    re-entry. Returns (phis, xs, ts, x, t, ctr, overflow): phis[i, m] is
    the number of map steps between landings m-1 and m of orbit i (from
    the start for m = 0), xs/ts the landing states. An orbit whose current
    excursion exceeds `cap` steps is marked overflow=True, stops moving,
    and keeps PHI_OVERFLOW in its unfilled slots.
    """
    x = np.array(x, dtype=np.float64, copy=True)
    t = np.array(t, dtype=np.uint64, copy=True)
    ctr = np.array(ctr, dtype=np.int64, copy=True)
    n = x.size
    kreturns = int(kreturns)
    phis = np.full((n, kreturns), PHI_OVERFLOW, dtype=np.int64)
    xs = np.full((n, kreturns), np.nan)
    ts = np.zeros((n, kreturns), dtype=np.uint64)
    filled = np.zeros(n, dtype=np.int64)
    cur = np.zeros(n, dtype=np.int64)
    overflow = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        x_a, t_a = _step(x[idx], t[idx], key[idx], ctr[idx], gamma, c0, a)
        x[idx] = x_a
        t[idx] = t_a
        ctr[idx] += 1
        cur[idx] += 1
        landed = idx[x_a >= 0.75]
        if landed.size:
            slot = filled[landed]
            phis[landed, slot] = cur[landed]
            xs[landed, slot] = x[landed]
            ts[landed, slot] = t[landed]
            filled[landed] += 1
            cur[landed] = 0
            active[landed[filled[landed] >= kreturns]] = False
        blown = idx[cur[idx] >= cap]
        if blown.size:
            overflow[blown] = True
            active[blown] = False
    return phis, xs, ts, x, t, ctr, overflow


def excursions(x, t, key, ctr, quota, zbox, cap_f, cap_phi, gamma, c0, a):
    """Record `quota` successive excursions from Z back to Z per orbit.

    Each orbit must start inside Z = zbox = (x_lo, x_hi, th_lo, th_hi),
    theta wrapping when th_lo > th_hi. An excursion is a maximal block of
    first returns to {x >= 3/4} ending at the first landing inside Z;
    rho counts the returns, tau their total map steps, max_phi the largest
    single return. cap_f bounds rho, cap_phi bounds a single return;
    exceeding either marks the orbit overflow=True and stops it.

    Returns (rho, tau, maxphi, x, t, ctr, overflow) with the per-orbit
    record arrays shaped (npts, quota).
    """
    x_lo, x_hi, th_lo, th_hi = (float(v) for v in zbox)
    x = np.array(x, dtype=np.float64, copy=True)
    t = np.array(t, dtype=np.uint64, copy=True)
    ctr = np.array(ctr, dtype=np.int64, copy=True)
    n = x.size
    quota = int(quota)
    rho = np.full((n, quota), PHI_OVERFLOW, dtype=np.int64)
    tau = np.full((n, quota), PHI_OVERFLOW, dtype=np.int64)
    maxphi = np.full((n, quota), PHI_OVERFLOW, dtype=np.int64)
    filled = np.zeros(n, dtype=np.int64)
    cur_rho = np.zeros(n, dtype=np.int64)
    cur_tau = np.zeros(n, dtype=np.int64)
    cur_max = np.zeros(n, dtype=np.int64)
    cur_phi = np.zeros(n, dtype=np.int64)
    overflow = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        x_a, t_a = _step(x[idx], t[idx], key[idx], ctr[idx], gamma, c0, a)
        x[idx] = x_a
        t[idx] = t_a
        ctr[idx] += 1
        cur_phi[idx] += 1
        landed_mask = x_a >= 0.75
        landed = idx[landed_mask]
        if landed.size:
            cur_rho[landed] += 1
            cur_tau[landed] += cur_phi[landed]
            cur_max[landed] = np.maximum(cur_max[landed], cur_phi[landed])
            cur_phi[landed] = 0
            th = theta_float(t[landed])
            in_th = (
                (th >= th_lo) & (th <= th_hi)
                if th_lo <= th_hi
                else (th >= th_lo) | (th <= th_hi)
            )
            in_z = (x[landed] >= x_lo) & (x[landed] <= x_hi) & in_th
            closing = landed[in_z]
            if closing.size:
                slot = filled[closing]
                rho[closing, slot] = cur_rho[closing]
                tau[closing, slot] = cur_tau[closing]
                maxphi[closing, slot] = cur_max[closing]
                filled[closing] += 1
                cur_rho[closing] = 0
                cur_tau[closing] = 0
                cur_max[closing] = 0
                active[closing[filled[closing] >= quota]] = False
        blown = idx[(cur_phi[idx] >= cap_phi) | (cur_rho[idx] >= cap_f)]
        if blown.size:
            overflow[blown] = True
            active[blown] = False
    return rho, tau, maxphi, x, t, ctr, overflow
