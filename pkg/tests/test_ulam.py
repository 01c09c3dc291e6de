import numpy as np
import pytest

from intermap.mapcore import envelope
from intermap.orbits import indicator_observable, trig_observable
from intermap.ulam import (
    DensityEstimate,
    Mesh,
    NonConvergence,
    PhiUnavailable,
    build_ulam_F,
    build_ulam_f,
    c2_estimate,
    cell_average,
    correlation_operator,
    interpolate_density,
    invariant_density,
    leading_eigenvalue,
    mean_phi,
    measure_of_Y,
    phi_distribution,
    save_density_csv,
    save_operator_coo,
    twist,
    twisted_spectral_radius,
)


@pytest.fixture(scope="module")
def op_Y(decay):
    return build_ulam_F(Mesh("Y", 16, 16), decay, 24, seed=2)


@pytest.fixture(scope="module")
def hY(op_Y):
    dens, rep = invariant_density(op_Y)
    return dens, rep


class TestMesh:
    def test_validation(self):
        with pytest.raises(ValueError, match="region"):
            Mesh("Q", 4, 4)
        with pytest.raises(ValueError, match="ungraded"):
            Mesh("Y", 4, 4, grading=1.1)
        with pytest.raises(ValueError, match="grading"):
            Mesh("M", 4, 4, grading=0.9)
        with pytest.raises(ValueError, match="positive"):
            Mesh("M", 0, 4)

    def test_m_mesh_areas_tile_the_square(self, decay):
        mesh = Mesh("M", 8, 8, grading=1.05)
        assert mesh.areas(decay).sum() == pytest.approx(1.0, rel=1e-12)
        assert mesh.n_cells == 64

    def test_y_mesh_areas_fill_the_region(self, decay):
        mesh = Mesh("Y", 8, 64)
        expect = np.mean(envelope(mesh.theta_mids(), decay) - 0.75)
        assert mesh.areas(decay).sum() == pytest.approx(expect, rel=1e-12)

    def test_grading_concentrates_cells_near_zero(self):
        mesh = Mesh("M", 32, 4, grading=1.1)
        edges = mesh.x_edges_M()
        widths = np.diff(edges)
        assert widths[0] < widths[-1] / 10
        assert edges[0] == 0.0 and edges[-1] == 1.0

    def test_locate_inverts_centers(self, decay):
        for mesh in (Mesh("M", 8, 8, grading=1.05), Mesh("Y", 8, 8)):
            c = mesh.centers(decay)
            ids = mesh.locate(c[:, 0], c[:, 1], decay)
            assert np.array_equal(ids, np.arange(mesh.n_cells))

    def test_sample_points_stay_in_cells(self, decay):
        mesh = Mesh("Y", 4, 4)
        pts = mesh.sample_points(8, 1, decay)
        b = mesh.cell_bounds(decay)
        assert pts.shape == (16, 8, 2)
        for i in range(16):
            assert np.all(pts[i, :, 0] >= b[i, 0]) and np.all(pts[i, :, 0] <= b[i, 1])
            assert np.all(pts[i, :, 1] >= b[i, 2]) and np.all(pts[i, :, 1] <= b[i, 3])


class TestInducedOperator:
    def test_rows_are_stochastic(self, op_Y):
        assert np.allclose(op_Y.row_sums(), 1.0, atol=1e-12)
        assert op_Y.matrix.min() >= 0.0
        assert op_Y.overflow_fraction == 0.0

    def test_return_times_recorded(self, op_Y):
        assert op_Y.phi_mode is not None
        assert op_Y.phi_mode.min() >= 1
        assert op_Y.triplets is not None

    def test_invariant_density_fixed_point(self, op_Y, hY):
        dens, rep = hY
        assert abs(rep.leading_eigenvalue - 1.0) <= 1e-8
        assert rep.residual <= 1e-10
        assert dens.values.min() > 0.0
        mass = dens.values @ op_Y.mesh.areas(op_Y.params)
        assert mass == pytest.approx(1.0, rel=1e-10)
        # stationarity under one more operator application
        masses = dens.values * op_Y.mesh.areas(op_Y.params)
        pushed = op_Y.matrix.T @ masses
        assert np.allclose(pushed, masses, atol=1e-10)

    def test_spectral_gap_reported(self, hY):
        _, rep = hY
        assert 0.0 < rep.subleading_modulus < 1.0

    def test_mean_return_time_in_kac_band(self, op_Y, hY):
        dens, _ = hY
        assert 7.0 < mean_phi(op_Y, dens) < 9.5

    def test_phi_distribution_normalizes(self, op_Y, hY):
        dens, _ = hY
        dist = phi_distribution(op_Y, dens, 200)
        assert dist.min() >= 0.0
        assert dist.sum() == pytest.approx(1.0, abs=0.02)
        # polynomial tail: the far levels carry far less mass than the head
        assert dist[50:].max() < dist[:10].max() / 50

    def test_c2_positive(self, op_Y, hY, decay):
        dens, _ = hY
        assert c2_estimate(dens, decay) > 0.0


class TestFullOperator:
    def test_full_map_operator_and_measure_of_Y(self, decay):
        mesh = Mesh("M", 48, 32, grading=1.1)
        op = build_ulam_f(mesh, decay, 24, seed=3)
        assert np.allclose(op.row_sums(), 1.0, atol=1e-12)
        dens, rep = invariant_density(op)
        assert abs(rep.leading_eigenvalue - 1.0) <= 1e-8
        muY = measure_of_Y(dens, decay)
        assert 0.08 < muY < 0.18

    def test_phi_unavailable_on_full_operator(self, decay):
        mesh = Mesh("M", 8, 8)
        op = build_ulam_f(mesh, decay, 8, seed=1)
        dens, _ = invariant_density(op)
        with pytest.raises(PhiUnavailable):
            phi_distribution(op, dens, 10)


class TestTwist:
    def test_unit_twist_is_identity(self, op_Y):
        tw = twist(op_Y, 1.0)
        assert (tw.matrix != op_Y.matrix).nnz == 0

    def test_twisted_rows_shrink(self, op_Y):
        tw = twist(op_Y, np.exp(2j * np.pi / 8))
        assert np.all(tw.row_sums() <= 1.0 + 1e-12)

    def test_twisted_radius_matches_dense_eigenvalues(self, op_Y):
        omega = np.exp(2j * np.pi * 3 / 8)
        r = twisted_spectral_radius(op_Y, omega)
        dense = np.abs(np.linalg.eigvals(twist(op_Y, omega).matrix.toarray()))
        assert r == pytest.approx(dense.max(), abs=1e-8)

    def test_twisted_radius_handles_real_negative_twist(self, op_Y):
        # omega = -1 makes the matrix real with a conjugate leading pair
        r = twisted_spectral_radius(op_Y, -1.0)
        dense = np.abs(np.linalg.eigvals(twist(op_Y, -1.0).matrix.toarray()))
        assert r == pytest.approx(dense.max(), abs=1e-8)
        assert r < 1.0

    def test_leading_eigenvalue_of_stochastic_matrix_is_one(self, op_Y):
        lam, residual, vec = leading_eigenvalue(op_Y)
        assert abs(lam - 1.0) <= 1e-8
        assert residual <= 1e-8
        assert vec.shape == (op_Y.mesh.n_cells,)


class TestDensityTools:
    def test_interpolation_to_same_mesh_is_identity(self, op_Y, hY):
        dens, _ = hY
        vals = interpolate_density(dens, op_Y.mesh, op_Y.params)
        assert np.allclose(vals, dens.values, rtol=1e-12)

    def test_interpolation_to_refined_mesh_preserves_mass(self, op_Y, hY, decay):
        dens, _ = hY
        fine = Mesh("Y", 32, 32)
        vals = interpolate_density(dens, fine, decay)
        mass = vals @ fine.areas(decay)
        assert mass == pytest.approx(1.0, abs=0.02)

    def test_cell_average_of_constant(self, decay):
        mesh = Mesh("Y", 4, 4)
        obs = trig_observable(const=2.5)
        avg = cell_average(obs, mesh, decay)
        assert np.allclose(avg, 2.5, rtol=1e-12)

    def test_cell_average_of_indicator_matches_overlap(self, decay):
        mesh = Mesh("Y", 4, 4)
        obs = indicator_observable(0.0, 1.0, 0.0, 0.5)
        avg = cell_average(obs, mesh, decay, samples=64)
        b = mesh.cell_bounds(decay)
        inside = b[:, 3] <= 0.5
        outside = b[:, 2] >= 0.5
        assert np.allclose(avg[inside], 1.0)
        assert np.allclose(avg[outside], 0.0)


class TestCorrelationOperator:
    def test_series_shape_and_decay(self, decay):
        mesh = Mesh("M", 32, 32, grading=1.05)
        op = build_ulam_f(mesh, decay, 16, seed=4)
        v = indicator_observable(0.78, 0.86)
        rho = correlation_operator(op, v, v, 20)
        assert rho.shape == (20,)
        assert np.all(np.isfinite(rho))
        # mixing: far lags sit well below the early-lag scale
        assert np.abs(rho[-3:]).max() < np.abs(rho).max()


class TestSinks:
    def test_operator_coo_round_trip(self, tmp_path, op_Y):
        path = tmp_path / "op.csv"
        save_operator_coo(path, op_Y)
        rows = np.loadtxt(path, delimiter=",", skiprows=1)
        rebuilt = np.zeros((op_Y.mesh.n_cells, op_Y.mesh.n_cells))
        rebuilt[rows[:, 0].astype(int), rows[:, 1].astype(int)] = rows[:, 2]
        assert np.allclose(rebuilt, op_Y.matrix.toarray(), atol=1e-15)

    def test_density_csv_contains_all_cells(self, tmp_path, op_Y, hY):
        dens, _ = hY
        path = tmp_path / "dens.csv"
        save_density_csv(path, dens, op_Y.params)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == op_Y.mesh.n_cells + 1


class TestNonConvergence:
    def test_error_carries_residual(self):
        err = NonConvergence("power iteration stalled", 0.125)
        assert err.residual == 0.125
        assert "stalled" in str(err)
