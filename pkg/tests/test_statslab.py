import numpy as np
import pytest

from intermap.statslab import (
    DEFAULT_V,
    CorrelationSeries,
    IVZeroError,
    ObservableSpec,
    WindowTooNoisy,
    bootstrap_se,
    clt_experiment,
    correlation_mc,
    fit_decay_exponent,
    hill_index,
    infinite_mixing_experiment,
    ks_to_fitted_normal,
    ks_to_standard_normal,
    large_deviation_experiment,
    mann_kendall,
    mean_estimate,
    moment_experiment,
    stable_experiment,
    tau_tail_experiment,
    wilson_interval,
)


class TestHillEstimator:
    @pytest.mark.parametrize("alpha", [1.0, 1.5, 2.5])
    def test_recovers_pareto_index(self, alpha):
        rng = np.random.default_rng(42)
        samples = rng.pareto(alpha, 200_000) + 1.0
        assert hill_index(samples, 0.01) == pytest.approx(alpha, abs=0.12)

    def test_ignores_nonpositive_samples(self):
        rng = np.random.default_rng(1)
        pareto = rng.pareto(1.5, 100_000) + 1.0
        mixed = np.concatenate([pareto, -np.ones(5000), np.zeros(5000)])
        assert hill_index(mixed, 0.01) == pytest.approx(
            hill_index(pareto, 0.01), rel=0.05
        )


class TestKolmogorovSmirnov:
    def test_fitted_normal_accepts_normal_samples(self):
        rng = np.random.default_rng(7)
        ks, sigma = ks_to_fitted_normal(rng.normal(0.0, 2.5, 8000))
        assert ks < 0.02
        assert sigma == pytest.approx(2.5, rel=0.05)

    def test_fitted_normal_rejects_heavy_tails(self):
        rng = np.random.default_rng(7)
        ks, _ = ks_to_fitted_normal(rng.standard_cauchy(8000))
        assert ks > 0.1

    def test_standard_normal_detects_wrong_scale(self):
        rng = np.random.default_rng(7)
        assert ks_to_standard_normal(rng.normal(0, 1, 8000)) < 0.02
        assert ks_to_standard_normal(rng.normal(0, 2, 8000)) > 0.1


class TestMannKendall:
    def test_monotone_sequences(self):
        up = mann_kendall(np.arange(30.0))
        down = mann_kendall(-np.arange(30.0))
        assert up.z > 3 and up.p_one_sided < 0.001
        assert down.z < -3

    def test_iid_noise_is_trendless(self):
        rng = np.random.default_rng(3)
        res = mann_kendall(rng.normal(size=40))
        assert abs(res.z) < 2.0

    def test_s_statistic_counts_pairs(self):
        res = mann_kendall([1.0, 2.0, 3.0])
        assert res.s == 3


class TestWilson:
    def test_interval_brackets_proportion(self):
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi
        assert (lo, hi) == (pytest.approx(0.4038, abs=2e-3), pytest.approx(0.5962, abs=2e-3))

    def test_degenerate_counts_stay_in_unit_interval(self):
        lo, hi = wilson_interval(0, 50)
        assert lo == 0.0 and 0 < hi < 0.2
        lo, hi = wilson_interval(50, 50)
        assert 0.8 < lo < 1 and hi == 1.0


class TestBootstrap:
    def test_matches_analytic_se_for_iid(self):
        rng = np.random.default_rng(11)
        vals = rng.normal(0, 3.0, size=(400, 2))
        se = bootstrap_se(vals, n_boot=400, seed=0)
        analytic = 3.0 / np.sqrt(400)
        assert se[0] == pytest.approx(analytic, rel=0.2)
        assert se[1] == pytest.approx(analytic, rel=0.2)


class TestFitDecayExponent:
    def _series(self, rho, err=None):
        n = np.arange(1, len(rho) + 1)
        err = np.zeros(len(rho)) if err is None else err
        return CorrelationSeries(n, np.asarray(rho), np.asarray(err), "synthetic")

    def test_exact_power_law(self):
        n = np.arange(1, 101, dtype=float)
        fit = fit_decay_exponent(self._series(7.0 / n), 10, 100)
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)
        assert fit.intercept == pytest.approx(np.log(7.0), abs=1e-12)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)

    def test_sign_flips_do_not_break_the_fit(self):
        n = np.arange(1, 101, dtype=float)
        fit = fit_decay_exponent(self._series(-(3.0) * n**-2.0), 5, 80)
        assert fit.slope == pytest.approx(-2.0, abs=1e-12)

    def test_noisy_window_rejected(self):
        rho = 7.0 / np.arange(1, 101, dtype=float)
        err = np.full(100, 10.0)
        with pytest.raises(WindowTooNoisy, match="standard errors"):
            fit_decay_exponent(self._series(rho, err), 10, 100)

    def test_sparse_window_rejected(self):
        with pytest.raises(WindowTooNoisy, match="fewer than 3"):
            fit_decay_exponent(self._series([1.0, 0.5, 0.25]), 10, 100)


class TestObservableSpec:
    def test_indicator_iv_is_theta_width_when_straddling_zero(self):
        spec = ObservableSpec.indicator(0.0, 0.5, 0.2, 0.7)
        assert spec.i_v == pytest.approx(0.5)
        away = ObservableSpec.indicator(0.3, 0.5)
        assert away.i_v == 0.0

    def test_trig_iv(self):
        assert ObservableSpec.trig(const=0.5, lin=1.0).i_v == pytest.approx(1.5)
        assert DEFAULT_V.i_v == pytest.approx(1.0)

    def test_centering_shifts_values_and_iv(self):
        spec = DEFAULT_V.centered(0.4)
        assert spec.mean_corrected
        assert spec.shift == pytest.approx(0.4)
        assert spec.i_v == pytest.approx(0.6)
        x, th = np.array([0.25]), np.array([0.0])
        raw = DEFAULT_V.values(x, th)
        assert spec.values(x, th)[0] == pytest.approx(raw[0] - 0.4)

    def test_custom_grid_lookup(self):
        grid = np.arange(6.0).reshape(2, 3)
        spec = ObservableSpec("custom_grid", grid)
        vals = spec.values(np.array([0.1, 0.9]), np.array([0.1, 0.9]))
        assert vals.tolist() == [0.0, 5.0]


class TestMapExperiments:
    def test_mean_estimate_deterministic_and_sane(self, decay):
        m1 = mean_estimate(DEFAULT_V, decay, 5, total_steps=200_000)
        m2 = mean_estimate(DEFAULT_V, decay, 5, total_steps=200_000)
        assert m1 == m2
        # E[(1-x) + cos(2 pi theta)]: the x-marginal mean is below 1 and
        # the angular term nearly cancels
        assert 0.3 < m1 < 0.9

    def test_clt_experiment_self_centers(self, clt):
        v = DEFAULT_V.centered(mean_estimate(DEFAULT_V, clt, 7, total_steps=400_000))
        rep = clt_experiment(v, 512, 1024, 19, clt)
        assert rep.sample_values.shape == (1024,)
        assert rep.ks_to_gaussian < 0.06
        assert "residual_mean_refinement" in rep.extras
        assert abs(rep.extras["residual_mean_refinement"]) < 0.05
        assert rep.fitted_sigma > 0

    def test_clt_requires_centering(self, clt):
        with pytest.raises(ValueError, match="mean-corrected"):
            clt_experiment(DEFAULT_V, 64, 64, 1, clt)

    def test_stable_experiment_reports_tail_data(self, stable):
        v = DEFAULT_V.centered(mean_estimate(DEFAULT_V, stable, 7, total_steps=400_000))
        rep = stable_experiment(v, 2000, 1500, 23, stable)
        assert rep.normalization == "n_inv_alpha"
        assert np.isfinite(rep.sample_values).all()
        assert rep.skewness > 0  # positive jumps from the neutral passages
        assert "hill_sweep" in rep.extras
        assert rep.extras["positive_support_bound"] > 0

    def test_stable_rejects_vanishing_iv(self, stable):
        v = ObservableSpec.indicator(0.3, 0.5).centered(0.0)
        with pytest.raises(IVZeroError):
            stable_experiment(v, 100, 50, 1, stable)

    def test_large_deviation_probabilities_shrink(self, clt):
        v = DEFAULT_V.centered(mean_estimate(DEFAULT_V, clt, 7, total_steps=400_000))
        series = large_deviation_experiment(
            v, 0.1, [100, 400, 1600], 2000, 31, clt
        )
        assert series.probabilities[0] > series.probabilities[-1]
        assert np.all(series.wilson_lo <= series.probabilities)
        assert np.all(series.probabilities <= series.wilson_hi)

    def test_large_deviation_validates_inputs(self, clt):
        v = DEFAULT_V.centered(0.5)
        with pytest.raises(ValueError, match="positive"):
            large_deviation_experiment(v, -0.1, [10], 10, 1, clt)
        with pytest.raises(ValueError, match="mean-corrected"):
            large_deviation_experiment(DEFAULT_V, 0.1, [10], 10, 1, clt)

    def test_moment_growth_clt_regime(self, clt):
        v = DEFAULT_V.centered(mean_estimate(DEFAULT_V, clt, 7, total_steps=400_000))
        series = moment_experiment(v, 2.0, [200, 400, 800, 1600], 1500, 37, clt)
        # second moment of a CLT-regime sum grows linearly
        assert series.reference_exponent == pytest.approx(1.0)
        assert series.fitted_exponent == pytest.approx(1.0, abs=0.25)
        assert np.all(series.moments > 0)


class TestInfiniteMixing:
    def test_rejects_finite_measure_presets(self, decay):
        with pytest.raises(ValueError, match="gamma"):
            infinite_mixing_experiment(
                ObservableSpec.indicator(0.75, 1.0),
                ObservableSpec.indicator(0.75, 1.0),
                [100, 200],
                16,
                1,
                decay,
            )

    def test_rejects_bad_block_fraction(self, infinite):
        spec = ObservableSpec.indicator(0.75, 1.0)
        with pytest.raises(ValueError, match="block_frac"):
            infinite_mixing_experiment(
                spec, spec, [100, 200], 16, 1, infinite, block_frac=0.7
            )

    def test_rejects_overlapping_blocks(self, infinite):
        spec = ObservableSpec.indicator(0.75, 1.0)
        with pytest.raises(ValueError, match="too dense"):
            infinite_mixing_experiment(
                spec, spec, [100, 110], 16, 1, infinite, block_frac=0.45
            )

    def test_block_estimator_consistent_with_pointwise(self, infinite):
        spec = ObservableSpec.indicator(0.75, 1.0)
        grid = [200, 400]
        block = infinite_mixing_experiment(
            spec, spec, grid, 768, 3, infinite, burn_in=256
        )
        point = infinite_mixing_experiment(
            spec, spec, grid, 768, 3, infinite, burn_in=256, block_frac=0.0
        )
        assert block.scale == point.scale == "n_power_1_minus_alpha"
        for i in range(2):
            gap = abs(block.scaled_integral[i] - point.scaled_integral[i])
            comb = np.hypot(block.stderr[i], point.stderr[i])
            assert gap <= 4.0 * comb + 0.05
        # averaging inside the slowly varying integral cuts the noise
        assert np.all(block.stderr < point.stderr)


class TestTauTail:
    def test_small_run_structure(self, decay):
        rep = tau_tail_experiment(decay, 3000, 41, quota=8)
        assert np.all(np.diff(rep.n_values) > 0)
        assert np.all(rep.counts >= 10)
        assert np.all((rep.survival > 0) & (rep.survival <= 0.25))
        assert np.isfinite(rep.mk_z)


class TestCorrelationMC:
    def test_exact_short_lag_identity(self, decay):
        # the slab 0.78 <= x <= 0.86 cannot return to itself in under
        # four steps, so rho(n) = -E[v]^2 exactly for n <= 3
        v = ObservableSpec.indicator(0.78, 0.86)
        series = correlation_mc(v, v, 5, 4000, 128, 43, decay)
        mean_v = series.rho[0] * 0 - series.rho[:3].mean()  # -rho ~ E[v]^2
        assert np.allclose(series.rho[:3], series.rho[0], atol=3e-4)
        assert series.rho[0] < 0
        assert mean_v > 0
