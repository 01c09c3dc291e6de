"""Orbit engine: batched iteration, first returns, excursions, samplers.

Two evaluation paths coexist. Scalar operations follow the map exactly in
floating point, where 4*theta mod 1 is exact because floats are dyadic;
they match the geometry module point for point. Batch statistics run on
the orbit kernels, which carry theta as a Q0.64 integer refreshed with
two counter-derived bits per step: a dyadic float angle empties its
digits after ~26 quadruplings, while the integer stream remains
distribution-exact for Lebesgue-random starts, with every orbit a pure
function of (x0, t0, key) regardless of batching or thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import kernels
from .geometry import (
    NotInYError,
    ReturnOverflowError,
    CellIndex,
    _strip_index,
    in_Y,
)
from .mapcore import (
    BRANCH_SPLIT,
    MapParams,
    Point,
    derive_constants,
    envelope,
    evaluate_map,
)

__all__ = [
    "BirkhoffSample",
    "EffectiveRange",
    "ExcursionOverflowError",
    "ExcursionRecord",
    "Observable",
    "OrbitEnsemble",
    "ReturnEvent",
    "ZConfig",
    "birkhoff",
    "effective_n_range",
    "excursion_to_Z",
    "first_return",
    "indicator_observable",
    "iterate",
    "iterate_orbit",
    "make_ensemble",
    "sample_lebesgue",
    "sample_mu_Y",
    "trig_observable",
    "write_excursions_csv",
    "write_returns_csv",
]

_ENV_GRID = 2**12


class ExcursionOverflowError(RuntimeError):
    """Excursion exceeded the configured cap on F-steps."""


@dataclass(frozen=True)
class ReturnEvent:
    """One first return to Y: start, landing = f^phi(start), and cell."""

    start: Point
    landing: Point
    phi: int
    cell: CellIndex


@dataclass(frozen=True)
class ExcursionRecord:
    """One excursion from Z back to Z through first returns of F.

    rho_z counts the F-steps, tau their total f-steps (the sum of the phi
    values along the excursion), max_phi the largest single phi.
    """

    rho_z: int
    tau: int
    max_phi: int


@dataclass(frozen=True)
class BirkhoffSample:
    """Birkhoff sum of an observable over n steps from one start."""

    n: int
    value: float
    start: Point


@dataclass(frozen=True)
class ZConfig:
    """The small target square Z about the branch corner (3/4, 0).

    Z is the square of side c_frac*delta centered at (3/4, 0), clipped to
    Y; zprime_box gives the doubled square. The stated side scale c=1/100
    pairs with delta = 20 to give a side of 0.2, the smallest round size
    whose measure supports excursion statistics at reasonable cost.
    """

    delta: float = 20.0
    center: tuple[float, float] = (BRANCH_SPLIT, 0.0)
    c_frac: float = 0.01

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    def _box(self, side: float, params: MapParams) -> tuple[float, float, float, float]:
        cx, cth = self.center
        env_min = float(np.min(envelope(np.arange(_ENV_GRID) / _ENV_GRID, params)))
        x_lo = max(cx - side / 2.0, BRANCH_SPLIT)
        x_hi = cx + side / 2.0
        if x_hi > env_min:
            raise ValueError("Z square pokes above the Y envelope; shrink delta")
        return (x_lo, x_hi, (cth - side / 2.0) % 1.0, (cth + side / 2.0) % 1.0)

    def zbox(self, params: MapParams) -> tuple[float, float, float, float]:
        """(x_lo, x_hi, th_lo, th_hi) of Z; the theta interval wraps."""
        return self._box(self.c_frac * self.delta, params)

    def zprime_box(self, params: MapParams) -> tuple[float, float, float, float]:
        return self._box(2.0 * self.c_frac * self.delta, params)


def _in_box(x: float, th: float, box: tuple[float, float, float, float]) -> bool:
    x_lo, x_hi, th_lo, th_hi = box
    if not x_lo <= x <= x_hi:
        return False
    if th_lo <= th_hi:
        return th_lo <= th <= th_hi
    return th >= th_lo or th <= th_hi


@dataclass(frozen=True)
class Observable:
    """Observable on M, evaluable directly and (when possible) in-kernel.

    kind 'indicator_rect' and 'smooth_trig' map onto the kernel observable
    family and stream at full speed; 'custom' wraps an arbitrary callable
    and is evaluated step-by-step in NumPy.
    """

    kind: str
    prm: tuple[float, ...] = ()
    fn: Callable | None = None

    def values(self, x, th):
        if self.kind == "indicator_rect":
            return kernels.obs_values(0, np.asarray(self.prm), np.asarray(x), np.asarray(th))
        if self.kind == "smooth_trig":
            return kernels.obs_values(1, np.asarray(self.prm), np.asarray(x), np.asarray(th))
        if self.kind == "custom":
            return np.asarray(self.fn(x, th), dtype=float)
        raise ValueError(f"unknown observable kind {self.kind!r}")

    def kernel_spec(self) -> tuple[int, np.ndarray] | None:
        """(kind code, parameter vector) when the kernels can stream it."""
        if self.kind == "indicator_rect":
            return 0, np.asarray(self.prm, dtype=float)
        if self.kind == "smooth_trig":
            return 1, np.asarray(self.prm, dtype=float)
        return None


def indicator_observable(
    x_lo: float, x_hi: float, th_lo: float = 0.0, th_hi: float = 1.0
) -> Observable:
    """Indicator of a rectangle; the theta interval wraps when lo > hi."""
    return Observable(kind="indicator_rect", prm=(x_lo, x_hi, th_lo, th_hi))


def trig_observable(
    const: float = 0.0, lin: float = 0.0, cos_amp: float = 0.0, sin_amp: float = 0.0
) -> Observable:
    """const + lin*(1-x) + cos_amp*cos(2 pi theta) + sin_amp*sin(2 pi theta)."""
    return Observable(kind="smooth_trig", prm=(const, lin, cos_amp, sin_amp))


# ---------------------------------------------------------------------------
# scalar, float-exact operations


def iterate(p: Point, n: int, params: MapParams) -> Point:
    """f applied n times to p, exact floating orbit of the dyadic point."""
    if n < 0:
        raise ValueError("step count must be >= 0")
    x, th = float(p[0]), float(p[1]) % 1.0
    for _ in range(n):
        x, th = evaluate_map(x, th, params)
    return Point(x, th)


def iterate_orbit(p: Point, n: int, params: MapParams) -> Iterator[Point]:
    """Yield p, f(p), ..., f^n(p)."""
    x, th = float(p[0]), float(p[1]) % 1.0
    yield Point(x, th)
    for _ in range(n):
        x, th = evaluate_map(x, th, params)
        yield Point(x, th)


def first_return(p: Point, params: MapParams, *, cap: int = 10**6) -> ReturnEvent:
    """First return of p in Y to Y, with its cell label."""
    y, theta = float(p[0]), float(p[1]) % 1.0
    if not in_Y(Point(y, theta), params):
        raise NotInYError(f"({y}, {theta}) is not in Y")
    x, th = y, theta
    for n in range(1, cap + 1):
        x, th = evaluate_map(x, th, params)
        if x >= BRANCH_SPLIT:
            return ReturnEvent(
                start=Point(y, theta),
                landing=Point(x, th),
                phi=n,
                cell=CellIndex(n=n, j=_strip_index(theta, n)),
            )
    raise ReturnOverflowError(f"no return within {cap} steps from ({y}, {theta})")


def excursion_to_Z(
    p: Point,
    zcfg: ZConfig,
    params: MapParams,
    *,
    cap_f: int = 10**5,
    cap_phi: int = 10**6,
) -> ExcursionRecord:
    """Apply F until the iterate lands in Z; tally tau and max_phi."""
    box = zcfg.zbox(params)
    x, th = float(p[0]), float(p[1]) % 1.0
    if not _in_box(x, th, box):
        raise NotInYError(f"({x}, {th}) is not in Z")
    tau = 0
    max_phi = 0
    for rho in range(1, cap_f + 1):
        event = first_return(Point(x, th), params, cap=cap_phi)
        x, th = event.landing
        tau += event.phi
        max_phi = max(max_phi, event.phi)
        if _in_box(x, th, box):
            return ExcursionRecord(rho_z=rho, tau=tau, max_phi=max_phi)
    raise ExcursionOverflowError(f"no Z-return within {cap_f} F-steps")


# ---------------------------------------------------------------------------
# seeded samplers


def _rngs(seed: int, stream: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for coordinates and for per-orbit keys."""
    children = np.random.SeedSequence(seed, spawn_key=(stream,)).spawn(2)
    return (
        np.random.Generator(np.random.Philox(children[0])),
        np.random.Generator(np.random.Philox(children[1])),
    )


def sample_lebesgue(
    count: int,
    region: str,
    seed: int,
    params: MapParams,
    *,
    zcfg: ZConfig | None = None,
    stream: int = 0,
) -> np.ndarray:
    """i.i.d. uniform points in region 'M', 'Y', or 'Z', shape (count, 2).

    Y and Z sampling reject against the theta-dependent envelope, so the
    draw is exactly uniform on the region. Deterministic given seed.
    """
    rng, _ = _rngs(seed, stream)
    out = np.empty((count, 2))
    if region == "M":
        out[:, 0] = rng.uniform(0.0, 1.0, count)
        out[:, 1] = rng.uniform(0.0, 1.0, count)
        return out
    if region == "Y":
        x_lo, x_hi = BRANCH_SPLIT, None
    elif region == "Z":
        x_lo, x_hi_z, th_lo, th_hi = (zcfg or ZConfig()).zbox(params)
    else:
        raise ValueError(f"unknown region {region!r}")
    grid = np.arange(_ENV_GRID) / _ENV_GRID
    env_max = float(np.max(envelope(grid, params)))
    filled = 0
    while filled < count:
        want = count - filled
        draw = int(want * 1.5) + 16
        if region == "Y":
            xs = rng.uniform(BRANCH_SPLIT, env_max, draw)
            ths = rng.uniform(0.0, 1.0, draw)
        else:
            xs = rng.uniform(x_lo, min(x_hi_z, env_max), draw)
            width = (th_hi - th_lo) % 1.0
            ths = (th_lo + rng.uniform(0.0, width, draw)) % 1.0
        keep = xs <= envelope(ths, params)
        take = min(int(np.sum(keep)), want)
        out[filled : filled + take, 0] = xs[keep][:take]
        out[filled : filled + take, 1] = ths[keep][:take]
        filled += take
    return out


# ---------------------------------------------------------------------------
# batched kernel engine


@dataclass
class OrbitEnsemble:
    """A batch of kernel orbits: coordinates, angle words, keys, counters."""

    x: np.ndarray
    t: np.ndarray
    key: np.ndarray
    ctr: np.ndarray
    params: MapParams
    threads: int = 1

    @property
    def size(self) -> int:
        return self.x.size

    @property
    def theta(self) -> np.ndarray:
        return kernels.theta_float(self.t)

    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.theta])

    def _run(self, fn, n_state: int, *args):
        """Apply a kernel chunk-parallel; merge preserves point order.

        Each orbit is a pure function of its own state, so any chunking
        yields identical numbers; threads only help when the compiled
        backend releases the GIL.
        """
        p = self.params
        tail = (p.gamma, p.c0, p.pert_amp)

        def call(sl):
            return fn(self.x[sl], self.t[sl], self.key[sl], self.ctr[sl], *args, *tail)

        if self.threads <= 1 or self.size < 2 * self.threads:
            parts = [call(slice(None))]
        else:
            edges = np.linspace(0, self.size, self.threads + 1, dtype=int)
            slices = [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                parts = list(pool.map(call, slices))
        if len(parts) == 1:
            merged = parts[0]
        else:
            merged = tuple(
                np.concatenate([part[i] for part in parts])
                for i in range(len(parts[0]))
            )
        self.x, self.t, self.ctr = merged[-n_state:][:3]
        return merged

    def advance(self, nsteps: int) -> None:
        self._run(kernels.advance, 3, int(nsteps))

    def checkpoint_states(self, checkpoints) -> tuple[np.ndarray, np.ndarray]:
        out = self._run(
            kernels.checkpoint_states, 3, np.asarray(checkpoints, dtype=np.int64)
        )
        return out[0], out[1]

    def birkhoff_sums(self, checkpoints, obs: Observable) -> np.ndarray:
        spec = obs.kernel_spec()
        cps = np.asarray(checkpoints, dtype=np.int64)
        if spec is not None:
            kind, prm = spec
            return self._run(kernels.birkhoff_sums, 3, cps, kind, prm)[0]
        sums = np.empty((self.size, cps.size))
        acc = np.zeros(self.size)
        done = 0
        for k, cp in enumerate(cps):
            for _ in range(int(cp) - done):
                acc += obs.values(self.x, self.theta)
                self.advance(1)
            done = int(cp)
            sums[:, k] = acc
        return sums

    def first_returns(self, kreturns: int, cap: int = 10**6):
        """(phis, xs, ts, overflow) for the next kreturns landings per orbit."""
        out = self._run(kernels.first_returns, 4, int(kreturns), int(cap))
        phis, xs, ts = out[0], out[1], out[2]
        return phis, xs, ts, out[6]

    def excursions(self, quota: int, zbox, cap_f: int = 10**5, cap_phi: int = 10**6):
        """(rho, tau, max_phi, overflow) for the next quota Z-excursions."""
        out = self._run(
            kernels.excursions, 4, int(quota), tuple(zbox), int(cap_f), int(cap_phi)
        )
        return out[0], out[1], out[2], out[6]


def make_ensemble(
    count: int,
    region: str,
    seed: int,
    params: MapParams,
    *,
    zcfg: ZConfig | None = None,
    stream: int = 0,
    threads: int = 1,
) -> OrbitEnsemble:
    """Ensemble of kernel orbits started uniformly in a region."""
    pts = sample_lebesgue(count, region, seed, params, zcfg=zcfg, stream=stream)
    _, key_rng = _rngs(seed, stream)
    return OrbitEnsemble(
        x=pts[:, 0].copy(),
        t=kernels.theta_fixed(pts[:, 1]),
        key=key_rng.integers(0, 2**64, count, dtype=np.uint64),
        ctr=np.zeros(count, dtype=np.int64),
        params=params,
        threads=threads,
    )


def sample_mu_Y(
    count: int,
    burn_in: int,
    seed: int,
    params: MapParams,
    *,
    chains: int = 1024,
    cap: int = 10**6,
    threads: int = 1,
    stream: int = 0,
    stats_out: dict | None = None,
) -> np.ndarray:
    """Approximate mu_Y sample of shape (count, 2).

    Lebesgue starts in Y, burn_in F-steps discarded, then successive
    F-landings emitted per chain (a correlated stream interleaved across
    the independent chains). A chain whose excursion exceeds the step cap
    is swapped for a fresh burnt-in chain, counted in
    stats_out['overflow_replacements'] when a dict is supplied.
    """
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    chains = max(1, min(int(chains), int(count)))
    per_chain = -(-int(count) // chains)
    ens = make_ensemble(chains, "Y", seed, params, stream=stream, threads=threads)
    replacements = 0

    def advance_block(k: int) -> tuple[np.ndarray, np.ndarray]:
        nonlocal replacements
        _, xs, ts, over = ens.first_returns(k, cap=cap)
        while np.any(over):
            bad = np.nonzero(over)[0]
            replacements += bad.size
            if replacements > 64 * chains:
                raise ReturnOverflowError(
                    "excursion cap keeps tripping; raise cap or rethink the preset"
                )
            fresh = make_ensemble(
                bad.size, "Y", seed, params, stream=stream + 7919 + replacements
            )
            _, b_xs, b_ts, b_over = fresh.first_returns(burn_in + k, cap=cap)
            ens.x[bad], ens.t[bad] = fresh.x, fresh.t
            ens.key[bad], ens.ctr[bad] = fresh.key, fresh.ctr
            xs[bad], ts[bad] = b_xs[:, -k:], b_ts[:, -k:]
            over = np.zeros_like(over)
            over[bad] = b_over
        return xs, ts

    block = 128
    burnt = 0
    while burnt < burn_in:
        advance_block(min(block, burn_in - burnt))
        burnt += min(block, burn_in - burnt)
    out = np.empty((chains * per_chain, 2))
    emitted = 0
    while emitted < per_chain:
        k = min(block, per_chain - emitted)
        xs, ts = advance_block(k)
        cols = np.stack([xs, kernels.theta_float(ts)], axis=-1)
        out[emitted * chains : (emitted + k) * chains] = (
            cols.transpose(1, 0, 2).reshape(-1, 2)
        )
        emitted += k
    if stats_out is not None:
        stats_out["overflow_replacements"] = replacements
    return out[:count]


def birkhoff(
    v: Observable,
    n: int,
    starts: np.ndarray,
    params: MapParams,
    *,
    seed: int = 0,
    stream: int = 0,
    threads: int = 1,
    checkpoints=None,
) -> np.ndarray:
    """Birkhoff sums of v over n steps from each start.

    starts is an (npts, 2) array; returns shape (npts,) or, when
    checkpoints is given (ascending step counts, ending at n), the
    (npts, len(checkpoints)) running sums.
    """
    pts = np.asarray(starts, dtype=float)
    _, key_rng = _rngs(seed, stream)
    ens = OrbitEnsemble(
        x=pts[:, 0].copy(),
        t=kernels.theta_fixed(pts[:, 1]),
        key=key_rng.integers(0, 2**64, pts.shape[0], dtype=np.uint64),
        ctr=np.zeros(pts.shape[0], dtype=np.int64),
        params=params,
        threads=threads,
    )
    cps = np.asarray([n] if checkpoints is None else list(checkpoints), dtype=np.int64)
    sums = ens.birkhoff_sums(cps, v)
    return sums[:, -1] if checkpoints is None else sums


def birkhoff_sample(
    v: Observable, n: int, p: Point, params: MapParams, *, seed: int = 0
) -> BirkhoffSample:
    value = float(birkhoff(v, n, np.asarray([list(p)]), params, seed=seed)[0])
    return BirkhoffSample(n=n, value=value, start=Point(float(p[0]), float(p[1])))


@dataclass(frozen=True)
class EffectiveRange:
    """Floating-granularity ceiling on resolvable escape times.

    Below x_floor the per-step increment x**(1+gamma)*u drops under one
    ulp of x and the discretized neutral dynamics stalls, so escape
    times beyond n_ceiling ~ (c1/x_floor)**gamma are artifacts of the
    number format rather than the map.
    """

    x_floor: float
    n_ceiling: float


def effective_n_range(params: MapParams) -> EffectiveRange:
    x_floor = (2.0**-52 / params.c0) ** (1.0 / params.gamma)
    c1 = derive_constants(params).c1
    return EffectiveRange(x_floor=x_floor, n_ceiling=(c1 / x_floor) ** params.gamma)


# ---------------------------------------------------------------------------
# CSV sinks


def write_returns_csv(path, starts, phis, cells) -> None:
    """Rows `start_x,start_theta,phi,cell_n,cell_j` at full precision."""
    starts = np.asarray(starts)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("start_x,start_theta,phi,cell_n,cell_j\n")
        for (sx, sth), phi, cell in zip(starts, phis, cells):
            fh.write(f"{sx:.17g},{sth:.17g},{int(phi)},{cell.n},{cell.j}\n")


def write_excursions_csv(path, records) -> None:
    """Rows `rho_z,tau,max_phi`; accepts ExcursionRecords or row triples."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rho_z,tau,max_phi\n")
        for rec in records:
            if isinstance(rec, ExcursionRecord):
                fh.write(f"{rec.rho_z},{rec.tau},{rec.max_phi}\n")
            else:
                rho, tau, mx = rec
                fh.write(f"{int(rho)},{int(tau)},{int(mx)}\n")
