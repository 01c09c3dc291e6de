"""Map family, admissibility validation, and closed-form constants.

The phase space is M = [0,1] x T with T = R/Z. The map is a skew product

    f(x, theta) = (f1(x, theta), 4*theta mod 1)

where f1 has a neutral fixed circle at x = 0 and a uniformly expanding
linear branch on (3/4, 1]:

    f1(x, theta) = x * (1 + x**gamma * u(x, theta))   for x <= 3/4,
    f1(x, theta) = 4*x - 3                            for x > 3/4.

The perturbation profile is the smallest smooth family with one knob `a`
that keeps u(0, theta) = c0 exactly:

    u(x, theta) = c0 * (1 + a * x * (1 + cos(2*pi*theta)) / 2).

With a = 0 the map is independent of theta in its first coordinate; with
a > 0 the factor dynamics feeds into the fibre and the map is genuinely
two-dimensional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "AdmissibilityError",
    "BranchBoundaryError",
    "BASE",
    "BRANCH_SPLIT",
    "DerivedConstants",
    "MapParams",
    "PRESETS",
    "Point",
    "admissible_c0_interval",
    "derive_constants",
    "envelope",
    "evaluate_jacobian",
    "evaluate_map",
    "in_domain_X",
    "make_params",
    "min_singular_value",
    "preset",
    "profile_u",
    "partial_f1_x",
    "partial_f1_theta",
]

# Expansion constant of the linear branch and of the factor map.
BASE = 4
# The two x-branches meet here; the point itself belongs to the left branch.
BRANCH_SPLIT = 0.75

# Validation grid: at least 4096 points per inequality, margin 1e-9.
# Expansion inequalities hold with equality on the neutral circle x = 0,
# so they are tested one-sided against 1 - margin.
_GRID_THETA = 256
_GRID_X = 256
_MARGIN = 1e-9


class AdmissibilityError(ValueError):
    """Raised when parameters violate one of the standing inequalities."""


class BranchBoundaryError(ValueError):
    """Raised when a derivative is requested exactly on the branch split."""


class Point(NamedTuple):
    """A point of M; theta is kept reduced into [0, 1)."""

    x: float
    theta: float


@dataclass(frozen=True)
class MapParams:
    """Validated parameters of one member of the family.

    Instances should be produced by :func:`make_params`, which checks the
    admissibility inequalities on a grid. `base` is the expansion constant
    of the linear branch and is fixed at 4.
    """

    gamma: float
    c0: float
    pert_amp: float = 0.0
    base: int = BASE


@dataclass(frozen=True)
class DerivedConstants:
    """Closed-form constants attached to a parameter choice.

    alpha = 1/gamma, c1 = (c0*gamma)**(-alpha), cprime = c1**(1+gamma)*c0.
    c1 scales the boundary-curve decay x_n ~ c1 * n**(-alpha); cprime the
    gaps x_n - x_{n+1} ~ cprime * n**(-(1+alpha)).
    """

    alpha: float
    c1: float
    cprime: float


#: Named parameter choices used throughout the experiments. Each satisfies
#: the admissibility bounds for pert_amp in {0, 0.05}.
PRESETS: dict[str, tuple[float, float]] = {
    "clt": (0.3, 0.30),
    "decay": (0.5, 0.35),
    "stable": (0.75, 0.36),
    "barrier": (1.0, 0.40),
    "infinite": (1.5, 0.45),
}


def profile_u(x, theta, params: MapParams):
    """The perturbation profile u(x, theta); vectorizes over inputs."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    bump = 1.0 + params.pert_amp * x * (1.0 + np.cos(2.0 * np.pi * theta)) / 2.0
    return params.c0 * bump


def _du_dx(x, theta, params: MapParams):
    return params.c0 * params.pert_amp * (1.0 + np.cos(2.0 * np.pi * theta)) / 2.0


def _du_dtheta(x, theta, params: MapParams):
    return -np.pi * params.c0 * params.pert_amp * x * np.sin(2.0 * np.pi * theta)


def _f1_left(x, theta, params: MapParams):
    return x * (1.0 + x ** params.gamma * profile_u(x, theta, params))


def evaluate_map(x, theta, params: MapParams):
    """One application of f; accepts scalars or arrays, returns (x', theta').

    theta is advanced as 4*theta mod 1 in floating point, which is exact
    for a single step. Long orbits should go through the orbit engine,
    which carries theta in fixed point to avoid digit exhaustion.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    x_new = np.where(
        x <= BRANCH_SPLIT,
        _f1_left(np.minimum(x, BRANCH_SPLIT), theta, params),
        BASE * x - (BASE - 1.0),
    )
    theta_new = (BASE * theta) % 1.0
    if x_new.ndim == 0:
        return float(x_new), float(theta_new)
    return x_new, theta_new


def partial_f1_x(x, theta, params: MapParams):
    """d f1 / d x, valid on both branches away from the split."""
    x = np.asarray(x, dtype=float)
    g = params.gamma
    u = profile_u(x, theta, params)
    left = 1.0 + (1.0 + g) * x**g * u + x ** (1.0 + g) * _du_dx(x, theta, params)
    return np.where(x <= BRANCH_SPLIT, left, float(BASE))


def partial_f1_theta(x, theta, params: MapParams):
    """d f1 / d theta; vanishes on the linear branch."""
    x = np.asarray(x, dtype=float)
    left = x ** (1.0 + params.gamma) * _du_dtheta(x, theta, params)
    return np.where(x <= BRANCH_SPLIT, left, 0.0)


def evaluate_jacobian(x, theta, params: MapParams):
    """Df at a point: upper-triangular [[d11, d12], [0, 4]].

    Raises
    ------
    BranchBoundaryError
        If x equals the branch split exactly, where f1 is not
        differentiable.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr == BRANCH_SPLIT):
        raise BranchBoundaryError("derivative undefined at x = 3/4")
    d11 = partial_f1_x(x_arr, theta, params)
    d12 = partial_f1_theta(x_arr, theta, params)
    if d11.ndim == 0:
        return np.array([[float(d11), float(d12)], [0.0, float(BASE)]])
    out = np.zeros(d11.shape + (2, 2))
    out[..., 0, 0] = d11
    out[..., 0, 1] = d12
    out[..., 1, 1] = BASE
    return out


def min_singular_value(x, theta, params: MapParams):
    """Smallest singular value of Df, closed form for the 2x2 triangle."""
    d = partial_f1_x(x, theta, params)
    b = partial_f1_theta(x, theta, params)
    trace_gram = d * d + b * b + float(BASE * BASE)
    det = float(BASE) * d
    disc = np.sqrt(np.maximum(trace_gram * trace_gram - 4.0 * det * det, 0.0))
    return np.sqrt((trace_gram - disc) / 2.0)


def admissible_c0_interval(gamma: float, pert_amp: float = 0.0) -> tuple[float, float]:
    """The (open, closed] interval of admissible c0 at a given gamma.

    The standing bounds require, for every theta,
    (1/4)*(4/3)**gamma < u(3/4, theta) <= (1/3)*(4/3)**gamma.
    u(3/4, .) ranges over [c0, c0*(1 + 3*pert_amp/4)], so the upper bound
    binds at theta = 0 and the lower at theta = 1/2.
    """
    lo = 0.25 * (4.0 / 3.0) ** gamma
    hi = (1.0 / 3.0) * (4.0 / 3.0) ** gamma
    return lo, hi / (1.0 + 0.75 * pert_amp)


def make_params(gamma: float, c0: float, pert_amp: float = 0.0) -> MapParams:
    """Validate and freeze a parameter choice.

    Checks, on grids of at least 4096 points with margin 1e-9:
    the u(3/4, theta) bounds, df1/dx >= 1 on [0, 3/4] x T, and the
    expansion hypothesis min-singular-value(Df) >= 1 on the same strip.

    Raises
    ------
    AdmissibilityError
        Naming the first violated inequality and the grid point at which
        it fails.
    """
    for name, value in (("gamma", gamma), ("c0", c0), ("pert_amp", pert_amp)):
        if not math.isfinite(value):
            raise AdmissibilityError(f"{name} must be finite, got {value!r}")
    if gamma <= 0:
        raise AdmissibilityError(f"gamma must be positive, got {gamma}")
    if c0 <= 0:
        raise AdmissibilityError(f"c0 must be positive, got {c0}")
    if not 0.0 <= pert_amp < 1.0:
        raise AdmissibilityError(f"pert_amp must lie in [0, 1), got {pert_amp}")

    params = MapParams(gamma=gamma, c0=c0, pert_amp=pert_amp)
    thetas = np.linspace(0.0, 1.0, 4096, endpoint=False)

    lo = 0.25 * (4.0 / 3.0) ** gamma
    hi = (1.0 / 3.0) * (4.0 / 3.0) ** gamma
    u_edge = profile_u(BRANCH_SPLIT, thetas, params)
    bad = u_edge <= lo + _MARGIN
    if np.any(bad):
        k = int(np.argmax(bad))
        raise AdmissibilityError(
            f"u(3/4, theta) = {u_edge[k]:.6g} <= lower bound {lo:.6g} "
            f"at theta = {thetas[k]:.6g} (f1(3/4) <= 15/16)"
        )
    bad = u_edge > hi + _MARGIN
    if np.any(bad):
        k = int(np.argmax(bad))
        raise AdmissibilityError(
            f"u(3/4, theta) = {u_edge[k]:.6g} > upper bound {hi:.6g} "
            f"at theta = {thetas[k]:.6g} (f1(3/4) > 1)"
        )

    xs = np.linspace(0.0, BRANCH_SPLIT, _GRID_X)
    xg, tg = np.meshgrid(xs, np.linspace(0.0, 1.0, _GRID_THETA, endpoint=False))
    slope = partial_f1_x(xg, tg, params)
    bad2 = slope < 1.0 - _MARGIN
    if np.any(bad2):
        i, j = np.unravel_index(int(np.argmax(bad2)), bad2.shape)
        raise AdmissibilityError(
            f"df1/dx = {slope[i, j]:.6g} < 1 at (x, theta) = "
            f"({xg[i, j]:.6g}, {tg[i, j]:.6g})"
        )
    smin = min_singular_value(xg, tg, params)
    bad2 = smin < 1.0 - _MARGIN
    if np.any(bad2):
        i, j = np.unravel_index(int(np.argmax(bad2)), bad2.shape)
        raise AdmissibilityError(
            f"min singular value {smin[i, j]:.6g} < 1 at (x, theta) = "
            f"({xg[i, j]:.6g}, {tg[i, j]:.6g})"
        )
    return params


def derive_constants(params: MapParams) -> DerivedConstants:
    """alpha, c1, cprime by direct formula evaluation."""
    alpha = 1.0 / params.gamma
    c1 = (params.c0 * params.gamma) ** (-alpha)
    cprime = c1 ** (1.0 + params.gamma) * params.c0
    return DerivedConstants(alpha=alpha, c1=c1, cprime=cprime)


def envelope(theta, params: MapParams):
    """Upper boundary of the invariant region X at a given theta.

    env(theta) = max over the four preimage angles (theta + i)/4 of
    f1(3/4, .): nothing in X lies above the image of the branch edge.
    """
    theta = np.asarray(theta, dtype=float)
    best = None
    for i in range(BASE):
        cand = _f1_left(BRANCH_SPLIT, (theta + i) / BASE, params)
        best = cand if best is None else np.maximum(best, cand)
    return best if best.ndim else float(best)


def in_domain_X(x, theta, params: MapParams):
    """Membership in X = {(x, theta): x <= env(theta)}."""
    x = np.asarray(x, dtype=float)
    res = x <= envelope(theta, params)
    return bool(res) if res.ndim == 0 else res


def preset(name: str, pert_amp: float = 0.0) -> MapParams:
    """Build a validated preset by name; see :data:`PRESETS`."""
    try:
        gamma, c0 = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return make_params(gamma, c0, pert_amp)
