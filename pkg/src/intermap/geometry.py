"""Boundary curves, first-return cells, and induced-map geometry.

The return domain Y sits above the branch split x = 3/4. Its return-time
level sets are bounded by curves defined through the backward recursion

    x_0(theta) = 3/4,
    f1(x_n(theta), theta) = x_{n-1}(4*theta mod 1),

together with the affine lift y_n(theta) = (x_{n-1}(4*theta mod 1) + 3)/4.
This module evaluates those curves to root tolerance, classifies points
of Y into return cells, integrates return-time tails, accumulates return
Jacobians, and hosts the sampling verifiers for uniform expansion and
bounded distortion of the induced map.

A note on angles: a binary float is a dyadic rational, and 4*theta mod 1
maps dyadics to dyadics without rounding, so the angle itinerary driving
the recursion at a floating theta is the exact itinerary of that number.
Dyadic angles eventually reach 0 under quadrupling; that is a property of
the input, not an artifact.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import simpson

from .mapcore import (
    BASE,
    BRANCH_SPLIT,
    BranchBoundaryError,
    MapParams,
    Point,
    envelope,
    evaluate_map,
    partial_f1_theta,
    partial_f1_x,
    profile_u,
)

__all__ = [
    "SLOPE_BOUND",
    "BoundaryCurve",
    "CellIndex",
    "ExpansionDistortionReport",
    "NotInYError",
    "ReturnJacobian",
    "ReturnOverflowError",
    "RootBracketError",
    "SlopeCheck",
    "boundary_x",
    "boundary_y",
    "cell_of",
    "clear_curve_cache",
    "curve_table",
    "in_Y",
    "params_hash",
    "return_jacobian",
    "slope_bound_check",
    "tail_measure",
    "verify_expansion_distortion",
]

#: Analytic ceiling for |x_n'(theta)|, uniform over n and theta.
SLOPE_BOUND = 7.0 / math.sqrt(72.0)

_DEFAULT_GRID = 2**12
_DEFAULT_ROOT_TOL = 1e-14
#: Kink count of x_{n-1} grows as 4**n; past this level deterministic
#: quadrature cannot resolve them and tail integrals go Monte Carlo.
_SIMPSON_MAX_LEVEL = 12


class RootBracketError(RuntimeError):
    """The monotone bracket [0, 3/4] failed; parameters are invalid."""


class NotInYError(ValueError):
    """Point handed to a Y-only operation lies outside Y."""


class ReturnOverflowError(RuntimeError):
    """First-return iteration exceeded the configured step cap."""


def params_hash(params: MapParams) -> str:
    """Short stable identifier for a parameter tuple."""
    text = repr((params.gamma, params.c0, params.pert_amp, params.base))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class BoundaryCurve:
    """One level curve x_n(theta) sampled on a uniform closed theta-grid."""

    level: int
    thetas: np.ndarray
    xs: np.ndarray
    params_hash: str

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.thetas.tolist(), self.xs.tolist()))


@dataclass(frozen=True)
class CellIndex:
    """Label of the return cell Y_{n,j}: return time n, theta-strip j."""

    n: int
    j: int

    def __post_init__(self) -> None:
        if self.n < 1 or not 1 <= self.j <= BASE**self.n:
            raise ValueError(f"cell index out of range: {self}")


@dataclass(frozen=True)
class ReturnJacobian:
    """Derivative data of one return F = f^n, upper triangular.

    a_entry is the (1,1) entry (product of the branch derivatives along
    the return orbit), b_entry the (1,2) entry, det their product with
    the factor-map block 4**n. det and b_entry overflow to inf for very
    long returns; b_scaled = b_entry/4**n and log_det stay finite.
    """

    a_entry: float
    b_entry: float
    det: float
    n: int
    b_scaled: float
    log_det: float


def _solve_f1(theta, target, params: MapParams, tol: float):
    """Solve f1(x, theta) = target for x in (0, 3/4], vectorized.

    f1 is strictly increasing in x with slope >= 1, so [0, 3/4] brackets
    whenever target <= f1(3/4, theta).
    """
    theta = np.asarray(theta, dtype=float)
    target = np.asarray(target, dtype=float)
    shape = np.broadcast_shapes(theta.shape, target.shape)
    theta = np.broadcast_to(theta, shape)
    target = np.broadcast_to(target, shape)

    def f1(x):
        return x * (1.0 + x**params.gamma * profile_u(x, theta, params))

    hi = np.full(shape, BRANCH_SPLIT)
    if np.any(f1(hi) < target):
        raise RootBracketError(
            "f1(3/4, theta) below the recursion target; parameters leave"
            " the admissible family"
        )
    lo = np.zeros(shape)
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        below = f1(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x = 0.5 * (lo + hi)
    for _ in range(6):
        step = (f1(x) - target) / partial_f1_x(x, theta, params)
        x = np.clip(x - step, lo, hi)
        if np.max(np.abs(step)) <= tol:
            break
    return x


# Level tables keyed by (params_hash, grid): list whose m-th entry is the
# curve x_m sampled at theta = i/grid. Single-writer append under _CACHE_LOCK;
# reads are lock-free (list growth is append-only).
_CURVE_CACHE: dict[tuple[str, int], list[np.ndarray]] = {}
_CACHE_LOCK = threading.Lock()


def clear_curve_cache() -> None:
    _CURVE_CACHE.clear()


def curve_table(
    params: MapParams,
    n: int,
    grid: int = _DEFAULT_GRID,
    tol: float = _DEFAULT_ROOT_TOL,
) -> BoundaryCurve:
    """Sampled curve x_n on the closed grid theta_i = i/grid.

    The uniform grid is invariant under the factor map (4*i mod grid), so
    each level is one vectorized root solve against a permutation of the
    previous level. Levels accumulate in a process-wide cache.
    """
    if n < 0:
        raise ValueError("level must be >= 0")
    key = (params_hash(params), grid)
    thetas = np.arange(grid) / grid
    with _CACHE_LOCK:
        levels = _CURVE_CACHE.setdefault(key, [np.full(grid, BRANCH_SPLIT)])
        while len(levels) <= n:
            prev = levels[-1][(np.arange(grid) * BASE) % grid]
            levels.append(_solve_f1(thetas, prev, params, tol))
        xs = levels[n]
    return BoundaryCurve(level=n, thetas=thetas, xs=xs, params_hash=key[0])


def boundary_x(n: int, theta, params: MapParams, *, tol: float = _DEFAULT_ROOT_TOL):
    """Pointwise x_n(theta) by n levels of bracketed root-finding.

    Accepts scalar or array theta; exact to `tol` at the given floats.
    """
    if n < 0:
        raise ValueError("level must be >= 0")
    th = np.asarray(theta, dtype=float) % 1.0
    scalar = th.ndim == 0
    th = np.atleast_1d(th)
    angles = np.empty((n + 1,) + th.shape)
    angles[0] = th
    for k in range(1, n + 1):
        angles[k] = (BASE * angles[k - 1]) % 1.0
    val = np.full(th.shape, BRANCH_SPLIT)
    for level in range(1, n + 1):
        val = _solve_f1(angles[n - level], val, params, tol)
    return float(val[0]) if scalar else val


def boundary_y(n: int, theta, params: MapParams, *, tol: float = _DEFAULT_ROOT_TOL):
    """Lower boundary y_n(theta) of the n-th return cell in Y; n >= 1."""
    if n < 1:
        raise ValueError("boundary_y is defined for n >= 1")
    th = np.asarray(theta, dtype=float) % 1.0
    lifted = (BASE * th) % 1.0
    xs = boundary_x(n - 1, lifted, params, tol=tol)
    out = (np.asarray(xs) + (BASE - 1.0)) / BASE
    return float(out) if np.ndim(theta) == 0 else out


def in_Y(p: Point, params: MapParams) -> bool:
    """Membership in Y = {(y, theta): 3/4 <= y <= envelope(theta)}."""
    y, theta = p
    return BRANCH_SPLIT <= y <= float(envelope(theta % 1.0, params))


def _strip_index(theta: float, n: int) -> int:
    """j = ceil(theta * 4**n) clamped to [1, 4**n], exact in rationals.

    Floats are dyadic, so Fraction arithmetic gives the true strip even
    when 4**n exceeds float resolution; a theta exactly on a strip
    boundary joins the lower strip.
    """
    v = Fraction(theta % 1.0) * BASE**n
    j = -((-v.numerator) // v.denominator)
    return min(max(j, 1), BASE**n)


def cell_of(p: Point, params: MapParams, *, cap: int = 10**6) -> CellIndex:
    """Return cell label of p in Y: first-return time and theta-strip."""
    y, theta = float(p[0]), float(p[1]) % 1.0
    if not in_Y(Point(y, theta), params):
        raise NotInYError(f"({y}, {theta}) is not in Y")
    x, th = y, theta
    for n in range(1, cap + 1):
        x, th = evaluate_map(x, th, params)
        if x >= BRANCH_SPLIT:
            return CellIndex(n=n, j=_strip_index(theta, n))
    raise ReturnOverflowError(f"no return within {cap} steps from ({y}, {theta})")


def tail_measure(
    n: int,
    params: MapParams,
    quadrature_points: int = _DEFAULT_GRID,
    *,
    with_error: bool = False,
):
    """Leb(return time > n) = (1/4) * integral of x_{n-1} over the circle.

    n = 0 gives the full strip measure 1/4 (the curve convention
    x_{-1} = 1). Levels up to 12 use composite Simpson on the closed
    curve grid; deeper levels switch to Monte Carlo because the integrand
    picks up more kinks than any fixed grid resolves, and the standard
    error is reported alongside. With with_error=True returns
    (value, standard_error); deterministic quadrature reports 0.0.
    """
    if n < 0:
        raise ValueError("tail index must be >= 0")
    if n == 0:
        value, err = (1.0 - BRANCH_SPLIT) * 1.0, 0.0
    elif params.pert_amp == 0.0 or n - 1 <= _SIMPSON_MAX_LEVEL:
        grid = quadrature_points + (quadrature_points % 2)
        curve = curve_table(params, n - 1, grid=grid)
        closed = np.append(curve.xs, curve.xs[0])
        thetas = np.append(curve.thetas, 1.0)
        value = simpson(closed, x=thetas) / BASE
        err = 0.0
    else:
        seed_material = ("tail_measure", params_hash(params), n, quadrature_points)
        ss = np.random.SeedSequence(
            int.from_bytes(hashlib.sha256(repr(seed_material).encode()).digest()[:8], "big")
        )
        rng = np.random.default_rng(ss)
        thetas = rng.random(quadrature_points)
        xs = boundary_x(n - 1, thetas, params)
        value = float(np.mean(xs)) / BASE
        err = float(np.std(xs, ddof=1)) / (BASE * math.sqrt(quadrature_points))
    return (value, err) if with_error else value


def return_jacobian(p: Point, params: MapParams, *, cap: int = 10**6) -> ReturnJacobian:
    """Chain-rule product of Df along the first-return orbit of p.

    Accumulates the (1,1) entry directly and the (1,2) entry through the
    scale-free recursion r' = (d11*r + d12)/4, so nothing overflows until
    the final 4**n lift.
    """
    y, theta = float(p[0]), float(p[1]) % 1.0
    if not in_Y(Point(y, theta), params):
        raise NotInYError(f"({y}, {theta}) is not in Y")
    x, th = y, theta
    a_entry = 1.0
    log_a = 0.0
    r = 0.0
    for n in range(1, cap + 1):
        if x == BRANCH_SPLIT:
            raise BranchBoundaryError("return orbit hit x = 3/4 exactly")
        d11 = float(partial_f1_x(x, th, params))
        d12 = float(partial_f1_theta(x, th, params))
        a_entry *= d11
        log_a += math.log(d11)
        r = (d11 * r + d12) / BASE
        x, th = evaluate_map(x, th, params)
        if x >= BRANCH_SPLIT:
            log_det = n * math.log(BASE) + log_a
            scale = float(BASE) ** n if n * math.log(BASE) < 700 else math.inf
            return ReturnJacobian(
                a_entry=a_entry,
                b_entry=r * scale,
                det=math.exp(log_det) if log_det < 700 else math.inf,
                n=n,
                b_scaled=r,
                log_det=log_det,
            )
    raise ReturnOverflowError(f"no return within {cap} steps from ({y}, {theta})")


@dataclass(frozen=True)
class SlopeCheck:
    """Finite-difference slope audit of the curves x_n."""

    max_slope: float
    flagged: bool
    threshold: float
    per_level: np.ndarray


def slope_bound_check(
    params: MapParams, n_max: int, *, grid: int = _DEFAULT_GRID
) -> SlopeCheck:
    """Max |x_n'(theta)| over n <= n_max by finite differences.

    Differentiability statements about the curves attach to the
    inverse-branch parameterization: the level-n point sits at angle
    theta/4**n and satisfies f1(x_n(theta), theta/4**n) = x_{n-1}(theta),
    so each level damps theta-sensitivity by the branch derivative and
    slopes decay like n**-(1+alpha). The same set graphed over a point's
    own angle steepens by 4**n per level and admits no uniform bound;
    see the curve-evaluation functions for that form.
    """
    thetas = np.arange(grid) / grid
    xs = np.full(grid, BRANCH_SPLIT)
    per_level = np.empty(n_max)
    for n in range(1, n_max + 1):
        xs = _solve_f1(thetas * 4.0**-n, xs, params, _DEFAULT_ROOT_TOL)
        per_level[n - 1] = np.max(np.abs(np.diff(xs))) * grid
    max_slope = float(per_level.max()) if n_max else 0.0
    return SlopeCheck(
        max_slope=max_slope,
        flagged=max_slope >= SLOPE_BOUND,
        threshold=SLOPE_BOUND,
        per_level=per_level,
    )


@dataclass(frozen=True)
class ExpansionDistortionReport:
    """Sampled audit of inverse-branch contraction and distortion.

    Pairs are built inside one return cell and pushed forward, which
    lands both images in the same branch range by construction; the
    contraction ratio then reads |w1 - w2| / |F w1 - F w2| and the
    distortion constant |log JF(w1) - log JF(w2)| / |F w1 - F w2|.
    """

    pairs_checked: int
    lam: float
    eps0: float
    contraction_violations: int
    max_ratio: float
    n_levels: np.ndarray
    max_distortion_per_n: np.ndarray
    max_distortion: float


def _circle_dist(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b)) % 1.0
    return np.minimum(d, 1.0 - d)


def _orbit_products(y, theta, n, params):
    """Push (y, theta) through n map steps, accumulating DF data.

    Returns (x_final, theta_final, log_a, landed) where landed flags the
    orbits whose first branch switch happens exactly at step n.
    """
    x = np.array(y, dtype=float)
    th = np.array(theta, dtype=float)
    log_a = np.zeros_like(x)
    landed_at = np.zeros(x.shape, dtype=np.int64)
    for step in range(1, n + 1):
        log_a += np.log(partial_f1_x(x, th, params))
        x, th = evaluate_map(x, th, params)
        first = (landed_at == 0) & (x >= BRANCH_SPLIT)
        landed_at[first] = step
    return x, th, log_a, landed_at == n


def verify_expansion_distortion(
    params: MapParams,
    sample_count: int,
    *,
    lam: float = 0.3,
    eps0: float = 1e-3,
    n_max: int = 50,
    seed: int = 0,
) -> ExpansionDistortionReport:
    """Sample nearby pairs per return cell and audit F^{-1} estimates.

    For each return time n <= n_max, draws points in the interior of a
    cell Y_{n,j}, pairs each with a same-cell neighbour scaled so the
    image separation stays under eps0, and checks the contraction bound
    |F^{-1} z1 - F^{-1} z2| <= lam * |z1 - z2| plus the pairwise
    distortion constant. Violations are reported as data, never raised.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(11,)))
    per_cell = max(sample_count // n_max, 4)
    violations = 0
    pairs = 0
    max_ratio = 0.0
    levels = np.arange(1, n_max + 1)
    max_c = np.zeros(n_max)
    for n in levels:
        strips = BASE ** min(int(n), 10)
        j = rng.integers(0, strips, per_cell)
        th1 = (j + rng.uniform(0.3, 0.7, per_cell)) / strips
        y_lo = boundary_y(int(n), th1, params)
        y_hi = (
            np.asarray(envelope(th1, params))
            if n == 1
            else np.asarray(boundary_y(int(n) - 1, th1, params))
        )
        width = y_hi - y_lo
        y1 = y_lo + width * rng.uniform(0.1, 0.9, per_cell)

        gx1, gth1, log_a1, ok1 = _orbit_products(y1, th1, int(n), params)
        a1 = np.exp(log_a1)
        dy = eps0 * rng.uniform(0.2, 0.5, per_cell) / a1
        dy = np.minimum(dy, 0.05 * width) * np.where(rng.random(per_cell) < 0.5, -1, 1)
        y2 = np.clip(y1 + dy, y_lo + 1e-4 * width, y_hi - 1e-4 * width)
        if n <= 10:
            dth = rng.uniform(-0.1, 0.1, per_cell) / BASE ** int(n)
            th2 = th1 + dth
        else:
            th2 = th1
        gx2, gth2, log_a2, ok2 = _orbit_products(y2, th2, int(n), params)

        dz = np.hypot(gx1 - gx2, _circle_dist(gth1, gth2))
        dw = np.hypot(y1 - y2, _circle_dist(th1, th2))
        use = ok1 & ok2 & (dz > 0.0) & (dz < eps0)
        if not np.any(use):
            continue
        ratio = dw[use] / dz[use]
        violations += int(np.sum(ratio > lam))
        max_ratio = max(max_ratio, float(ratio.max()))
        max_c[n - 1] = float(np.max(np.abs(log_a1 - log_a2)[use] / dz[use]))
        pairs += int(np.sum(use))
    return ExpansionDistortionReport(
        pairs_checked=pairs,
        lam=lam,
        eps0=eps0,
        contraction_violations=violations,
        max_ratio=max_ratio,
        n_levels=levels,
        max_distortion_per_n=max_c,
        max_distortion=float(max_c.max()) if n_max else 0.0,
    )
