"""Monte-Carlo experiments for mixing rates and limit laws, plus the
estimator toolkit they share (Hill index, KS distances, Mann-Kendall
trend, Wilson intervals, orbit bootstrap, log-log regression).

Observables are declared once with their analytic side data (the
theta-average at x = 0, mean-correction state) and stream through the
orbit kernels; mean correction is applied to the *sums* as value - n *
shift, so indicator observables stay kernel-streamable after centering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import stats as sps

from . import kernels
from .mapcore import MapParams, derive_constants
from .orbits import Observable, ZConfig, make_ensemble, sample_lebesgue, sample_mu_Y

__all__ = [
    "CorrelationSeries",
    "FitResult",
    "InfiniteMixingReport",
    "IVZeroError",
    "LargeDeviationSeries",
    "LimitLawReport",
    "MomentSeries",
    "ObservableSpec",
    "TauTailReport",
    "WindowTooNoisy",
    "bootstrap_se",
    "clt_experiment",
    "correlation_mc",
    "fit_decay_exponent",
    "hill_index",
    "infinite_mixing_experiment",
    "ks_to_fitted_normal",
    "ks_to_standard_normal",
    "large_deviation_experiment",
    "mann_kendall",
    "mean_estimate",
    "moment_experiment",
    "stable_experiment",
    "tau_tail_experiment",
    "wilson_interval",
]


class WindowTooNoisy(RuntimeError):
    """Regression window contains points indistinguishable from noise."""


class IVZeroError(ValueError):
    """Stable-law experiment needs a nonzero theta-average at x = 0."""


@dataclass(frozen=True)
class ObservableSpec:
    """Observable with the side data the experiments need.

    parameters follow the kind: indicator_rect is (x_lo, x_hi, th_lo,
    th_hi); smooth_trig is (const, lin, cos_amp, sin_amp) standing for
    const + lin*(1-x) + cos_amp*cos(2 pi th) + sin_amp*sin(2 pi th);
    custom_grid is a 2D value array over a uniform mesh on M, looked up
    by cell. shift is the constant already subtracted from the raw kind
    (mean correction); i_v tracks the theta-average at x = 0 of the
    corrected observable.
    """

    kind: str
    parameters: object = ()
    mean_corrected: bool = False
    i_v: float | None = None
    shift: float = 0.0

    @classmethod
    def indicator(cls, x_lo, x_hi, th_lo=0.0, th_hi=1.0) -> "ObservableSpec":
        width = (th_hi - th_lo) % 1.0 or 1.0
        iv = width if x_lo <= 0.0 <= x_hi else 0.0
        return cls("indicator_rect", (x_lo, x_hi, th_lo, th_hi), i_v=iv)

    @classmethod
    def trig(cls, const=0.0, lin=0.0, cos_amp=0.0, sin_amp=0.0) -> "ObservableSpec":
        return cls("smooth_trig", (const, lin, cos_amp, sin_amp), i_v=const + lin)

    def observable(self) -> Observable:
        """The raw (uncorrected) streaming observable."""
        if self.kind in ("indicator_rect", "smooth_trig"):
            return Observable(
                kind=self.kind, prm=tuple(float(p) for p in self.parameters)
            )
        if self.kind == "custom_grid":
            grid = np.asarray(self.parameters, dtype=float)

            def lookup(x, th):
                gx, gt = grid.shape
                i = np.clip((np.asarray(x) * gx).astype(int), 0, gx - 1)
                j = np.clip((np.asarray(th) % 1.0 * gt).astype(int), 0, gt - 1)
                return grid[i, j]

            return Observable(kind="custom", fn=lookup)
        raise ValueError(f"unknown observable kind {self.kind!r}")

    def values(self, x, th) -> np.ndarray:
        return self.observable().values(x, th) - self.shift

    def centered(self, mean: float) -> "ObservableSpec":
        """Spec with `mean` subtracted; i_v is shifted accordingly."""
        iv = None if self.i_v is None else self.i_v - mean
        return replace(
            self, mean_corrected=True, shift=self.shift + mean, i_v=iv
        )


#: Default Holder observable of the limit-law experiments, I_v = 1.
DEFAULT_V = ObservableSpec.trig(lin=1.0, cos_amp=1.0)


# ---------------------------------------------------------------------------
# estimator toolkit


def hill_index(samples: np.ndarray, tail_fraction: float = 0.01) -> float:
    """Hill tail-index estimate on the top fraction of positive samples."""
    pos = np.asarray(samples, dtype=float)
    pos = pos[pos > 0]
    if pos.size < 10:
        return float("nan")
    k = max(2, int(round(tail_fraction * pos.size)))
    top = np.sort(pos)[-(k + 1) :]
    logs = np.log(top[1:]) - np.log(top[0])
    mean_log = float(np.mean(logs))
    return float("inf") if mean_log == 0 else 1.0 / mean_log


def ks_to_fitted_normal(samples: np.ndarray) -> tuple[float, float]:
    """(KS distance, fitted sigma) against the centered normal N(0, s)."""
    vals = np.asarray(samples, dtype=float)
    sigma = float(np.sqrt(np.mean(vals**2)))
    if sigma == 0.0:
        return (0.0 if np.all(vals == 0) else 1.0), 0.0
    ks = sps.kstest(vals, lambda x: sps.norm.cdf(x, 0.0, sigma)).statistic
    return float(ks), sigma


def ks_to_standard_normal(samples: np.ndarray) -> float:
    return float(sps.kstest(np.asarray(samples, dtype=float), sps.norm.cdf).statistic)


class MKResult(NamedTuple):
    s: int
    z: float
    p_one_sided: float


def mann_kendall(values) -> MKResult:
    """Mann-Kendall trend test, tie-corrected, one-sided for an upward trend.

    Positive z favors an increasing trend; p_one_sided is the
    probability of a statistic at least this large under no trend.
    """
    v = np.asarray(values, dtype=float)
    m = v.size
    if m < 3:
        return MKResult(0, 0.0, 1.0)
    diff_sign = np.sign(v[None, :] - v[:, None])
    s = int(np.triu(diff_sign, 1).sum())
    _, tie_counts = np.unique(v, return_counts=True)
    var = (m * (m - 1) * (2 * m + 5) - np.sum(
        tie_counts * (tie_counts - 1) * (2 * tie_counts + 5)
    )) / 18.0
    if var <= 0:
        return MKResult(s, 0.0, 1.0)
    z = (s - np.sign(s)) / math.sqrt(var)
    return MKResult(s, float(z), float(sps.norm.sf(z)))


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z**2 / trials
    center = (p + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def bootstrap_se(orbit_values: np.ndarray, n_boot: int = 200, seed: int = 0):
    """Bootstrap standard error of the mean over axis 0 (orbits)."""
    vals = np.asarray(orbit_values, dtype=float)
    squeeze = vals.ndim == 1
    if squeeze:
        vals = vals[:, None]
    rng = np.random.default_rng(seed)
    m = vals.shape[0]
    idx = rng.integers(0, m, size=(n_boot, m))
    means = vals[idx].mean(axis=1)
    se = means.std(axis=0, ddof=1)
    return float(se[0]) if squeeze else se


class FitResult(NamedTuple):
    slope: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class CorrelationSeries:
    n_values: np.ndarray
    rho: np.ndarray
    stderr: np.ndarray
    method: str

    def __post_init__(self):
        if not (len(self.n_values) == len(self.rho) == len(self.stderr)):
            raise ValueError("series lengths disagree")
        if np.any(np.asarray(self.stderr) < 0):
            raise ValueError("stderr must be nonnegative")


def fit_decay_exponent(
    series: CorrelationSeries, n_lo: int, n_hi: int
) -> FitResult:
    """Least squares of log|rho| on log n over the window [n_lo, n_hi].

    Every point in the window must clear 3x its standard error, else the
    fit would be fitting noise and WindowTooNoisy is raised.
    """
    n = np.asarray(series.n_values, dtype=float)
    mask = (n >= n_lo) & (n <= n_hi)
    if mask.sum() < 3:
        raise WindowTooNoisy("fewer than 3 points in the fit window")
    rho = np.asarray(series.rho, dtype=float)[mask]
    err = np.asarray(series.stderr, dtype=float)[mask]
    if np.any(np.abs(rho) <= 3.0 * err):
        raise WindowTooNoisy("window points are within 3 standard errors of zero")
    x = np.log(n[mask])
    y = np.log(np.abs(rho))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), float(r2))


# ---------------------------------------------------------------------------
# experiments


def mean_estimate(
    v: ObservableSpec,
    params: MapParams,
    seed: int,
    *,
    total_steps: int = 10**7,
    chains: int = 64,
    burn_in: int = 10**3,
) -> float:
    """Mean of the raw observable along burned-in Lebesgue orbits."""
    per_chain = total_steps // chains
    ens = make_ensemble(chains, "M", seed, params)
    ens.advance(burn_in)
    obs = v.observable()
    sums = ens.birkhoff_sums([per_chain], obs)[:, 0]
    return float(sums.mean() / per_chain)


def _corrected_sums(
    v: ObservableSpec, checkpoints, starts, params, seed, threads=1
) -> np.ndarray:
    """Birkhoff sums of the corrected observable at each checkpoint."""
    from .orbits import birkhoff

    cps = np.asarray(checkpoints, dtype=np.int64)
    raw = birkhoff(
        v.observable(), int(cps[-1]), starts, params,
        seed=seed, threads=threads, checkpoints=cps,
    )
    return raw - cps[None, :].astype(float) * v.shift


def correlation_mc(
    v: ObservableSpec,
    w: ObservableSpec,
    n_max: int,
    orbit_len: int,
    n_orbits: int,
    seed: int,
    params: MapParams,
    *,
    burn_in: int = 10**3,
    n_boot: int = 200,
) -> CorrelationSeries:
    """Lag covariances over independent burned-in orbits.

    rho(n) = mean over orbits of the lag-n covariance against the global
    means; standard errors by bootstrap over orbits.
    """
    ens = make_ensemble(n_orbits, "M", seed, params)
    ens.advance(burn_in)
    obs_v, obs_w = v.observable(), w.observable()
    vs = np.empty((orbit_len, n_orbits))
    ws = np.empty((orbit_len, n_orbits))
    for t in range(orbit_len):
        th = ens.theta
        vs[t] = obs_v.values(ens.x, th) - v.shift
        ws[t] = obs_w.values(ens.x, th) - w.shift
        ens.advance(1)
    v_mean = vs.mean()
    w_mean = ws.mean()
    dv = vs - v_mean
    dw = ws - w_mean
    n_values = np.arange(1, n_max + 1)
    per_orbit = np.empty((n_orbits, n_max))
    for i, n in enumerate(n_values):
        per_orbit[:, i] = np.mean(dv[: orbit_len - n] * dw[n:], axis=0)
    rho = per_orbit.mean(axis=0)
    stderr = bootstrap_se(per_orbit, n_boot=n_boot, seed=seed + 1)
    return CorrelationSeries(n_values, rho, stderr, method="monte_carlo")


@dataclass(frozen=True)
class LimitLawReport:
    normalization: str
    sample_values: np.ndarray
    ks_to_gaussian: float
    hill_index: float
    skewness: float
    fitted_sigma: float
    n: int
    n_samples: int
    tail_fraction: float = 0.01
    extras: dict = field(default_factory=dict)


def clt_experiment(
    v: ObservableSpec,
    n: int,
    n_samples: int,
    seed: int,
    params: MapParams,
    *,
    threads: int = 1,
) -> LimitLawReport:
    """Normalized Birkhoff sums n^{-1/2} v_n from Lebesgue starts.

    Reports the KS distance to the best-fit centered normal; valid in
    the gamma < 1/2 regime where the CLT holds. The shift in v is
    refined by the run's own grand mean: any residual mean error delta
    displaces the normalized samples by sqrt(n)*delta, which would
    swamp the KS distance long before it biased anything else, and the
    grand mean over n*n_samples steps is the sharpest estimate of the
    invariant mean this data can offer. The refinement applied is
    returned in extras.
    """
    if not v.mean_corrected:
        raise ValueError("clt_experiment expects a mean-corrected observable")
    starts = sample_lebesgue(n_samples, "M", seed, params)
    sums = _corrected_sums(v, [n], starts, params, seed + 1, threads)[:, 0]
    residual = float(sums.mean()) / n
    samples = (sums - residual * n) / math.sqrt(n)
    ks, sigma = ks_to_fitted_normal(samples)
    return LimitLawReport(
        normalization="sqrt_n",
        sample_values=samples,
        ks_to_gaussian=ks,
        hill_index=hill_index(np.abs(samples)),
        skewness=float(sps.skew(samples)),
        fitted_sigma=sigma,
        n=n,
        n_samples=n_samples,
        extras={"residual_mean_refinement": residual},
    )


def stable_experiment(
    v: ObservableSpec,
    n: int,
    n_samples: int,
    seed: int,
    params: MapParams,
    *,
    threads: int = 1,
    tail_fraction: float = 0.01,
    sigma: float | None = None,
    phi_bar: float | None = None,
) -> LimitLawReport:
    """Normalized sums n^{-1/alpha} v_n in the stable regime gamma in (1/2, 1).

    Reports the Hill index of the positive tail, skewness, and (when the
    spectral scale sigma and mean return time are supplied) both
    candidate limiting constants whose exponent the source leaves
    ambiguous.
    """
    alpha = derive_constants(params).alpha
    if v.i_v is None or v.i_v == 0.0:
        raise IVZeroError("theta-average at x = 0 vanishes; stable limit degenerate")
    starts = sample_lebesgue(n_samples, "M", seed, params)
    sums = _corrected_sums(v, [n], starts, params, seed + 1, threads)[:, 0]
    samples = sums * n ** (-1.0 / alpha)
    ks, fitted = ks_to_fitted_normal(samples)
    extras = {
        "i_v": v.i_v,
        "positive_support_bound": abs(v.i_v) * n ** (1.0 - 1.0 / alpha),
        "hill_sweep": {
            str(f): hill_index(samples, f) for f in (0.005, 0.01, 0.02)
        },
    }
    if sigma is not None and phi_bar is not None:
        extras["constant_candidates"] = {
            "phibar_inv_alpha_iv_sigma": phi_bar ** (-1.0 / alpha) * abs(v.i_v) * sigma,
            "sigma_to_inv_alpha": sigma ** (1.0 / alpha),
        }
    return LimitLawReport(
        normalization="n_inv_alpha",
        sample_values=samples,
        ks_to_gaussian=ks,
        hill_index=hill_index(samples, tail_fraction),
        skewness=float(sps.skew(samples)),
        fitted_sigma=fitted,
        n=n,
        n_samples=n_samples,
        tail_fraction=tail_fraction,
        extras=extras,
    )


@dataclass(frozen=True)
class LargeDeviationSeries:
    n_values: np.ndarray
    probabilities: np.ndarray
    wilson_lo: np.ndarray
    wilson_hi: np.ndarray
    threshold: float


def large_deviation_experiment(
    v: ObservableSpec,
    a: float,
    n_grid,
    n_samples: int,
    seed: int,
    params: MapParams,
    *,
    threads: int = 1,
) -> LargeDeviationSeries:
    """Empirical P(|v_n / n| > a) on an ascending n grid, one orbit pass."""
    if a <= 0:
        raise ValueError("threshold a must be positive")
    if not v.mean_corrected:
        raise ValueError("large deviations expect a mean-corrected observable")
    cps = np.asarray(sorted(int(n) for n in n_grid), dtype=np.int64)
    starts = sample_lebesgue(n_samples, "M", seed, params)
    sums = _corrected_sums(v, cps, starts, params, seed + 1, threads)
    exceed = np.abs(sums / cps[None, :]) > a
    counts = exceed.sum(axis=0)
    lo = np.empty(cps.size)
    hi = np.empty(cps.size)
    for i, c in enumerate(counts):
        lo[i], hi[i] = wilson_interval(int(c), n_samples)
    return LargeDeviationSeries(
        n_values=cps,
        probabilities=counts / n_samples,
        wilson_lo=lo,
        wilson_hi=hi,
        threshold=a,
    )


@dataclass(frozen=True)
class MomentSeries:
    n_values: np.ndarray
    moments: np.ndarray
    stderr: np.ndarray
    p: float
    fitted_exponent: float
    reference_exponent: float


def moment_experiment(
    v: ObservableSpec,
    p: float,
    n_grid,
    n_samples: int,
    seed: int,
    params: MapParams,
    *,
    threads: int = 1,
) -> MomentSeries:
    """Empirical E|v_n|^p over an n grid with a log-log growth fit.

    The reference exponent is the theoretical growth max(g(n), n^{p - alpha
    + 1}) branch for the parameter regime: g(n) = n^{p/2} for alpha > 2,
    n^{p/alpha} for alpha < 2 (log-corrected at alpha = 2).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    alpha = derive_constants(params).alpha
    cps = np.asarray(sorted(int(n) for n in n_grid), dtype=np.int64)
    starts = sample_lebesgue(n_samples, "M", seed, params)
    sums = _corrected_sums(v, cps, starts, params, seed + 1, threads)
    pows = np.abs(sums) ** p
    moments = pows.mean(axis=0)
    stderr = pows.std(axis=0, ddof=1) / math.sqrt(n_samples)
    slope, _ = np.polyfit(np.log(cps.astype(float)), np.log(moments), 1)
    g_exp = p / 2.0 if alpha > 2.0 else p / alpha
    reference = max(g_exp, p - alpha + 1.0)
    return MomentSeries(
        n_values=cps,
        moments=moments,
        stderr=stderr,
        p=p,
        fitted_exponent=float(slope),
        reference_exponent=float(reference),
    )


@dataclass(frozen=True)
class InfiniteMixingReport:
    n_values: np.ndarray
    scaled_integral: np.ndarray
    stderr: np.ndarray
    scale: str


def infinite_mixing_experiment(
    v: ObservableSpec,
    w: ObservableSpec,
    n_grid,
    n_samples: int,
    seed: int,
    params: MapParams,
    *,
    burn_in: int = 10**3,
    block_frac: float = 0.125,
    threads: int = 1,
) -> InfiniteMixingReport:
    """Scaled mixing integrals n^{1-alpha} int_Y v . w o f^n dmu.

    mu is normalized so mu_Y is its restriction to Y: the integral is
    then E_{mu_Y}[v * w o f^n], estimated from mu_Y starts. A point
    evaluation of w at step n has binomial variance for indicator
    observables, hopeless once the integral has decayed; instead w is
    averaged over the block [n, n + block_frac*n), which changes the
    slowly varying integral by O(block_frac) but shrinks the variance by
    roughly the block length. block_frac = 0 recovers the pointwise
    estimator. At gamma = 1 the scaling is log n instead.
    """
    if params.gamma < 1.0:
        raise ValueError("infinite-measure mixing needs gamma >= 1")
    if not 0.0 <= block_frac < 0.5:
        raise ValueError("block_frac must be in [0, 1/2)")
    alpha = derive_constants(params).alpha
    cps = np.asarray(sorted(int(n) for n in n_grid), dtype=np.int64)
    starts = sample_mu_Y(n_samples, burn_in, seed, params, threads=threads)
    v0 = v.values(starts[:, 0], starts[:, 1])
    ens_seed = np.random.SeedSequence(seed, spawn_key=(3,))
    key_rng = np.random.Generator(np.random.Philox(ens_seed))
    from .orbits import OrbitEnsemble

    def fresh_ensemble():
        return OrbitEnsemble(
            x=starts[:, 0].copy(),
            t=kernels.theta_fixed(starts[:, 1]),
            key=key_rng.integers(0, 2**64, n_samples, dtype=np.uint64),
            ctr=np.zeros(n_samples, dtype=np.int64),
            params=params,
            threads=threads,
        )

    if block_frac == 0.0:
        xs, ts = fresh_ensemble().checkpoint_states(cps)
        w_at_n = [
            w.values(xs[:, i], kernels.theta_float(ts[:, i]))
            for i in range(cps.size)
        ]
        centers = cps.astype(float)
    else:
        blocks = np.maximum((cps * block_frac).astype(np.int64), 1)
        if np.any(cps[:-1] + blocks[:-1] > cps[1:]):
            raise ValueError("n grid too dense for the block length")
        edges = np.empty(2 * cps.size, dtype=np.int64)
        edges[0::2] = cps
        edges[1::2] = cps + blocks
        sums = fresh_ensemble().birkhoff_sums(edges, w.observable())
        w_at_n = [
            (sums[:, 2 * i + 1] - sums[:, 2 * i]) / blocks[i] - w.shift
            for i in range(cps.size)
        ]
        centers = cps + blocks / 2.0
    if params.gamma == 1.0:
        factors = np.log(centers)
        scale = "log_n"
    else:
        factors = centers ** (1.0 - alpha)
        scale = "n_power_1_minus_alpha"
    scaled = np.empty(cps.size)
    stderr = np.empty(cps.size)
    for i in range(cps.size):
        prod = v0 * w_at_n[i]
        scaled[i] = factors[i] * prod.mean()
        stderr[i] = factors[i] * prod.std(ddof=1) / math.sqrt(n_samples)
    return InfiniteMixingReport(
        n_values=cps, scaled_integral=scaled, stderr=stderr, scale=scale
    )


@dataclass(frozen=True)
class TauTailReport:
    n_values: np.ndarray
    survival: np.ndarray
    scaled: np.ndarray
    counts: np.ndarray
    mk_z: float
    n_excursions: int


def tau_tail_experiment(
    params: MapParams,
    n_excursions: int,
    seed: int,
    *,
    zcfg: ZConfig | None = None,
    quota: int = 16,
    cap_f: int = 10**5,
    cap_phi: int = 10**6,
    threads: int = 1,
) -> TauTailReport:
    """Tail of the excursion length tau on a dyadic n grid.

    P(tau > n) * n^alpha should stay bounded with no upward trend; grid
    points keep only levels with survival <= 1/4 (tail regime) and at
    least 10 exceedances (signal). mk_z is the one-sided Mann-Kendall
    statistic for an upward trend in the scaled tail.
    """
    alpha = derive_constants(params).alpha
    zcfg = zcfg or ZConfig()
    n_orbits = max(1, n_excursions // quota)
    ens = make_ensemble(n_orbits, "Z", seed, params, zcfg=zcfg, threads=threads)
    box = zcfg.zbox(params)
    rho, tau, _, overflow = ens.excursions(quota, box, cap_f, cap_phi)
    taus = tau[~overflow].ravel().astype(float)
    taus = taus[taus > 0]
    total = taus.size
    levels = 2 ** np.arange(1, 40)
    keep_n, surv, cnt = [], [], []
    for n in levels:
        exceed = int(np.sum(taus > n))
        p = exceed / total
        if p <= 0.25 and exceed >= 10:
            keep_n.append(int(n))
            surv.append(p)
            cnt.append(exceed)
        if exceed < 10:
            break
    keep_n = np.asarray(keep_n, dtype=np.int64)
    surv = np.asarray(surv)
    scaled = surv * keep_n.astype(float) ** alpha
    mk = mann_kendall(scaled) if scaled.size >= 3 else MKResult(0, 0.0, 1.0)
    return TauTailReport(
        n_values=keep_n,
        survival=surv,
        scaled=scaled,
        counts=np.asarray(cnt, dtype=np.int64),
        mk_z=mk.z,
        n_excursions=total,
    )
