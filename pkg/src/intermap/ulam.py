"""Ulam discretizations of the transfer operators of F on Y and f on M.

The operator of the induced map F is assembled by quasi-random cell
sampling routed through the orbit kernels, so every sample also carries
its return time; that makes twisted operators (complex weights in the
return time) and return-time statistics available from the same build.
The one-step operator of f uses the exact map, no kernels involved.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.stats import qmc

from . import kernels
from .mapcore import (
    BRANCH_SPLIT,
    MapParams,
    derive_constants,
    envelope,
    evaluate_map,
)
from .orbits import Observable

__all__ = [
    "DensityEstimate",
    "Mesh",
    "NonConvergence",
    "PhiUnavailable",
    "SpectralReport",
    "UlamOperator",
    "boundary_trace",
    "build_ulam_F",
    "build_ulam_f",
    "c2_estimate",
    "cell_average",
    "correlation_operator",
    "eigenvalue_curve",
    "interpolate_density",
    "invariant_density",
    "leading_eigenvalue",
    "mean_phi",
    "measure_of_Y",
    "phi_distribution",
    "save_density_csv",
    "save_operator_coo",
    "twist",
    "twisted_spectral_radius",
]

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    """Power iteration missed its tolerance; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class PhiUnavailable(ValueError):
    """Operator has no recorded return times, so it cannot be twisted."""


@dataclass(frozen=True)
class Mesh:
    """Grid on Y (per-column height up to the envelope) or on M.

    On M the x-edges are geometric with ratio `grading` toward x = 0,
    resolving the invariant-density singularity there; on Y the grading
    is fixed at 1 and each theta-column is split uniformly between 3/4
    and the envelope at the column midpoint.
    """

    region: str
    x_cells: int
    theta_cells: int
    grading: float = 1.0

    def __post_init__(self) -> None:
        if self.region not in ("M", "Y"):
            raise ValueError("region must be 'M' or 'Y'")
        if self.x_cells < 1 or self.theta_cells < 1:
            raise ValueError("cell counts must be positive")
        if self.grading < 1.0:
            raise ValueError("grading must be >= 1")
        if self.region == "Y" and self.grading != 1.0:
            raise ValueError("Y meshes are ungraded")

    @property
    def n_cells(self) -> int:
        return self.x_cells * self.theta_cells

    def theta_mids(self) -> np.ndarray:
        return (np.arange(self.theta_cells) + 0.5) / self.theta_cells

    def column_heights(self, params: MapParams) -> np.ndarray:
        """Per-column x-extent; constant 1.0 columns on M."""
        if self.region == "M":
            return np.ones(self.theta_cells)
        return envelope(self.theta_mids(), params) - BRANCH_SPLIT

    def x_edges_M(self) -> np.ndarray:
        r, g = self.x_cells, self.grading
        if g == 1.0:
            widths = np.full(r, 1.0 / r)
        else:
            widths = g ** np.arange(r) * ((g - 1.0) / (g**r - 1.0))
        edges = np.concatenate([[0.0], np.cumsum(widths)])
        edges[-1] = 1.0
        return edges

    def locate(self, x, th, params: MapParams) -> np.ndarray:
        """Cell ids (column-major: id = col * x_cells + row)."""
        x = np.asarray(x, dtype=float)
        th = np.asarray(th, dtype=float) % 1.0
        col = np.clip((th * self.theta_cells).astype(np.int64), 0, self.theta_cells - 1)
        if self.region == "M":
            row = np.searchsorted(self.x_edges_M(), x, side="right") - 1
        else:
            h = self.column_heights(params)[col]
            row = ((x - BRANCH_SPLIT) / h * self.x_cells).astype(np.int64)
        row = np.clip(row, 0, self.x_cells - 1)
        return col * self.x_cells + row

    def cell_bounds(self, params: MapParams) -> np.ndarray:
        """(n_cells, 4) array of (x_lo, x_hi, th_lo, th_hi), id-ordered."""
        r, k = self.x_cells, self.theta_cells
        th_lo = np.repeat(np.arange(k) / k, r)
        th_hi = np.repeat((np.arange(k) + 1.0) / k, r)
        if self.region == "M":
            edges = self.x_edges_M()
            x_lo = np.tile(edges[:-1], k)
            x_hi = np.tile(edges[1:], k)
        else:
            h = np.repeat(self.column_heights(params), r)
            frac = np.tile(np.arange(r), k)
            x_lo = BRANCH_SPLIT + h * frac / r
            x_hi = BRANCH_SPLIT + h * (frac + 1.0) / r
        return np.column_stack([x_lo, x_hi, th_lo, th_hi])

    def areas(self, params: MapParams) -> np.ndarray:
        b = self.cell_bounds(params)
        return (b[:, 1] - b[:, 0]) * (b[:, 3] - b[:, 2])

    def centers(self, params: MapParams) -> np.ndarray:
        b = self.cell_bounds(params)
        return np.column_stack([(b[:, 0] + b[:, 1]) / 2, (b[:, 2] + b[:, 3]) / 2])

    def sample_points(
        self, samples_per_cell: int, seed: int, params: MapParams
    ) -> np.ndarray:
        """(n_cells, S, 2) low-discrepancy points, one rotated Sobol set.

        All cells share one Sobol block, randomized per cell by a
        Cranley-Patterson rotation so cell errors decorrelate.
        """
        m = max(1, int(np.ceil(np.log2(samples_per_cell))))
        unit = qmc.Sobol(d=2, scramble=False).random_base2(m)[:samples_per_cell]
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=(17,)))
        )
        shift = rng.random((self.n_cells, 2))
        u = (unit[None, :, :] + shift[:, None, :]) % 1.0
        b = self.cell_bounds(params)
        pts = np.empty_like(u)
        pts[:, :, 0] = b[:, 0, None] + u[:, :, 0] * (b[:, 1] - b[:, 0])[:, None]
        pts[:, :, 1] = b[:, 2, None] + u[:, :, 1] * (b[:, 3] - b[:, 2])[:, None]
        return pts


@dataclass
class UlamOperator:
    """Row-stochastic (or twisted sub-stochastic) cell-transition operator.

    matrix[i, j] is the sampled fraction of cell i landing in cell j.
    For induced-map operators each sample's return time is kept as
    (src, dst, phi, count) triplets; phi_mode is the per-source modal
    value, and flagged marks cells whose samples disagree on phi for
    more than 20% of the draws (they straddle a return-time boundary).
    """

    mesh: Mesh
    matrix: sp.csr_matrix
    params: MapParams
    samples_per_cell: int
    phi_mode: np.ndarray | None = None
    triplets: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = None
    twist_weight: np.ndarray | None = None
    overflow_fraction: float = 0.0
    flagged: np.ndarray | None = None

    def row_sums(self) -> np.ndarray:
        return np.asarray(np.abs(self.matrix).sum(axis=1)).ravel()


@dataclass(frozen=True)
class DensityEstimate:
    """Per-cell density values with their stated normalization.

    normalization 'probability' means the density integrates to 1 over
    the mesh region; 'sigma_finite_Y1' scales the sigma-finite density
    so its restriction to Y integrates to 1.
    """

    mesh: Mesh
    values: np.ndarray
    normalization: str = "probability"


@dataclass(frozen=True)
class SpectralReport:
    leading_eigenvalue: complex
    subleading_modulus: float
    residual: float


def _mode_per_source(src, phi, counts, n_cells):
    """Modal phi per source cell: ascending-count writes, last wins."""
    mode = np.zeros(n_cells, dtype=np.int64)
    agree = np.zeros(n_cells, dtype=np.int64)
    # collapse (src, phi) duplicates across destinations first
    span = int(phi.max()) + 1
    enc = src.astype(np.int64) * span + phi
    uniq, inv = np.unique(enc, return_inverse=True)
    cnt = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(cnt, inv, counts)
    order = np.argsort(cnt, kind="stable")
    mode[(uniq // span)[order]] = (uniq % span)[order]
    agree[(uniq // span)[order]] = cnt[order]
    return mode, agree


def build_ulam_F(
    mesh: Mesh,
    params: MapParams,
    samples_per_cell: int = 64,
    *,
    seed: int = 0,
    cap: int = 10**6,
) -> UlamOperator:
    """Ulam operator of the induced first-return map F on Y.

    Each cell contributes samples_per_cell quasi-random starts advanced
    to their first landing by the orbit kernels; the landing cell and the
    return time are recorded per sample. Samples that exceed the step
    cap are dropped, their fraction reported, and the row renormalized
    over the survivors.
    """
    if mesh.region != "Y":
        raise ValueError("build_ulam_F needs a mesh on Y")
    n_cells, s = mesh.n_cells, samples_per_cell
    pts = mesh.sample_points(s, seed, params).reshape(-1, 2)
    key_rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(23,)))
    )
    keys = key_rng.integers(0, 2**64, pts.shape[0], dtype=np.uint64)
    phis, xs, ts, _, _, _, overflow = kernels.first_returns(
        pts[:, 0],
        kernels.theta_fixed(pts[:, 1]),
        keys,
        np.zeros(pts.shape[0], dtype=np.int64),
        1,
        cap,
        params.gamma,
        params.c0,
        params.pert_amp,
    )
    phi = phis[:, 0]
    keep = ~overflow
    src = np.repeat(np.arange(n_cells, dtype=np.int64), s)[keep]
    dst = mesh.locate(xs[keep, 0], kernels.theta_float(ts[keep, 0]), params)
    phi = phi[keep]
    return _assemble(mesh, params, s, src, dst, phi, float(np.mean(overflow)))


def _assemble(mesh, params, s, src, dst, phi, overflow_fraction):
    n_cells = mesh.n_cells
    if (phi.size and phi.max() >= (1 << 24)) or n_cells > (1 << 16):
        raise ValueError("mesh too large for packed triplet encoding")
    enc = (src << 40) | (dst << 24) | phi.astype(np.int64)
    uniq, counts = np.unique(enc, return_counts=True)
    u_src = uniq >> 40
    u_dst = (uniq >> 24) & ((1 << 16) - 1)
    u_phi = uniq & ((1 << 24) - 1)
    valid = np.bincount(src, minlength=n_cells).astype(float)
    empty = valid == 0
    if np.any(empty):
        log.warning("%d cells lost every sample to the cap; self-looped", empty.sum())
        idx = np.nonzero(empty)[0]
        u_src = np.concatenate([u_src, idx])
        u_dst = np.concatenate([u_dst, idx])
        u_phi = np.concatenate([u_phi, np.ones(idx.size, dtype=np.int64)])
        counts = np.concatenate([counts, np.full(idx.size, s)])
        valid[empty] = s
    data = counts / valid[u_src]
    matrix = sp.csr_matrix(
        (data, (u_src, u_dst)), shape=(n_cells, n_cells), dtype=np.float64
    )
    mode, agree = _mode_per_source(u_src, u_phi, counts, n_cells)
    flagged = (valid - agree) / valid > 0.2
    if np.any(flagged):
        log.info(
            "%d/%d cells straddle a return-time boundary (phi disagreement > 20%%)",
            int(flagged.sum()),
            n_cells,
        )
    return UlamOperator(
        mesh=mesh,
        matrix=matrix,
        params=params,
        samples_per_cell=s,
        phi_mode=mode,
        triplets=(u_src, u_dst, u_phi, counts.astype(np.int64)),
        overflow_fraction=overflow_fraction,
        flagged=flagged,
    )


def build_ulam_f(
    mesh: Mesh,
    params: MapParams,
    samples_per_cell: int = 64,
    *,
    seed: int = 0,
) -> UlamOperator:
    """Ulam operator of one step of f on M, exact map, no return times."""
    if mesh.region != "M":
        raise ValueError("build_ulam_f needs a mesh on M")
    n_cells, s = mesh.n_cells, samples_per_cell
    pts = mesh.sample_points(s, seed, params).reshape(-1, 2)
    x_img, th_img = evaluate_map(pts[:, 0], pts[:, 1], params)
    src = np.repeat(np.arange(n_cells, dtype=np.int64), s)
    dst = mesh.locate(x_img, th_img, params)
    enc = src * n_cells + dst
    uniq, counts = np.unique(enc, return_counts=True)
    matrix = sp.csr_matrix(
        (counts / float(s), (uniq // n_cells, uniq % n_cells)),
        shape=(n_cells, n_cells),
        dtype=np.float64,
    )
    return UlamOperator(
        mesh=mesh, matrix=matrix, params=params, samples_per_cell=s
    )


def invariant_density(
    op: UlamOperator,
    *,
    tol: float = 1e-12,
    max_sweeps: int = 10**5,
    warm_start: DensityEstimate | None = None,
    subleading_sweeps: int = 256,
) -> tuple[DensityEstimate, SpectralReport]:
    """Left fixed vector by power iteration, plus a gap diagnostic.

    The iteration runs on cell measures (masses), so stochastic rows
    conserve the total exactly; the density is mass over cell area. The
    subleading modulus comes from iterating a zero-sum vector, which is
    the single deflation the fixed right eigenvector allows.
    """
    if op.twist_weight is not None or np.iscomplexobj(op.matrix):
        raise ValueError("invariant_density wants the untwisted operator")
    n = op.mesh.n_cells
    areas = op.mesh.areas(op.params)
    if warm_start is not None:
        m = interpolate_density(warm_start, op.mesh, op.params) * areas
        m = np.clip(m, 1e-300, None)
    else:
        m = areas.copy()
    m /= m.sum()
    residual = np.inf
    for sweep in range(max_sweeps):
        m_new = m @ op.matrix
        m_new /= m_new.sum()
        residual = float(np.abs(m_new - m).sum())
        m = m_new
        if residual < tol:
            break
    else:
        raise NonConvergence("invariant density power iteration", residual)
    # Deflate the known fixed pair (left vector m, right vector 1) every
    # sweep: floating drift otherwise re-seeds the lambda=1 mode and the
    # ratio saturates at 1 once |lambda_2|^k underflows the drift.
    rng = np.random.default_rng(7)
    w = rng.standard_normal(n)
    w -= w.sum() * m
    w /= np.abs(w).sum()
    half = subleading_sweeps // 2
    log_ratios = np.empty(subleading_sweeps)
    for k in range(subleading_sweeps):
        w = w @ op.matrix
        w -= w.sum() * m
        nrm = float(np.abs(w).sum())
        log_ratios[k] = np.log(max(nrm, 1e-300))
        w /= max(nrm, 1e-300)
    sub = float(np.exp(np.mean(log_ratios[half:])))
    density = m / areas
    normalization = "probability"
    if op.mesh.region == "M" and op.params.gamma >= 1.0:
        est = DensityEstimate(mesh=op.mesh, values=density)
        density = density / measure_of_Y(est, op.params)
        normalization = "sigma_finite_Y1"
    report = SpectralReport(
        leading_eigenvalue=1.0 + 0.0j, subleading_modulus=float(sub), residual=residual
    )
    return DensityEstimate(op.mesh, density, normalization), report


def interpolate_density(
    density: DensityEstimate, new_mesh: Mesh, params: MapParams
) -> np.ndarray:
    """Density values transferred to another mesh by center lookup."""
    centers = new_mesh.centers(params)
    ids = density.mesh.locate(centers[:, 0], centers[:, 1], params)
    return density.values[ids]


def measure_of_Y(density: DensityEstimate, params: MapParams) -> float:
    """Mass the density assigns to Y, with fractional boundary cells."""
    b = density.mesh.cell_bounds(params)
    if density.mesh.region == "Y":
        areas = density.mesh.areas(params)
        return float(np.sum(density.values * areas))
    mids = (b[:, 2] + b[:, 3]) / 2
    env = envelope(mids, params)
    x_lo = np.maximum(b[:, 0], BRANCH_SPLIT)
    x_hi = np.minimum(b[:, 1], env)
    overlap = np.clip(x_hi - x_lo, 0.0, None) * (b[:, 3] - b[:, 2])
    return float(np.sum(density.values * overlap))


def twist(op: UlamOperator, omega: complex, *, exact: bool = True) -> UlamOperator:
    """Operator with entries weighted by omega**phi.

    exact=True weights every recorded sample by its own return time, so
    cells straddling a {phi = n} boundary carry the correct mixture;
    exact=False multiplies row i by omega**phi_mode[i] wholesale.
    """
    if abs(omega) > 1.0 + 1e-12:
        raise ValueError("|omega| must be <= 1")
    if op.phi_mode is None or op.triplets is None:
        raise PhiUnavailable("operator was built without return times")
    n = op.mesh.n_cells
    if exact:
        u_src, u_dst, u_phi, counts = op.triplets
        valid = np.bincount(
            u_src, weights=counts.astype(float), minlength=n
        )
        data = counts * np.power(complex(omega), u_phi) / valid[u_src]
        matrix = sp.csr_matrix((data, (u_src, u_dst)), shape=(n, n))
        weight = None
    else:
        weight = np.power(complex(omega), op.phi_mode)
        matrix = (sp.diags(weight) @ op.matrix).tocsr()
    return replace(op, matrix=matrix, twist_weight=weight)


def leading_eigenvalue(
    op: UlamOperator,
    *,
    v0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_sweeps: int = 20000,
) -> tuple[complex, float, np.ndarray]:
    """Dominant eigenvalue of a (possibly complex) operator, left iteration.

    Returns (lambda, residual, vector); the vector warm-starts the next
    nearby operator in a parameter sweep.
    """
    n = op.mesh.n_cells
    rng = np.random.default_rng(11)
    v = (
        v0.astype(complex)
        if v0 is not None
        else rng.standard_normal(n) + 0.1j * rng.standard_normal(n)
    )
    v /= np.linalg.norm(v)
    lam = 0.0 + 0.0j
    for sweep in range(max_sweeps):
        v_new = v @ op.matrix
        lam_new = complex(np.vdot(v, v_new))
        norm = np.linalg.norm(v_new)
        if norm == 0.0:
            return 0.0 + 0.0j, 0.0, v
        v_new /= norm
        if abs(lam_new - lam) < tol * max(1.0, abs(lam_new)):
            return lam_new, float(abs(lam_new - lam)), v_new
        v, lam = v_new, lam_new
    raise NonConvergence("leading eigenvalue power iteration", float(abs(lam)))


def twisted_spectral_radius(op: UlamOperator, omega: complex, *, k: int = 2) -> float:
    """Largest eigenvalue modulus of the omega-twisted operator.

    At real negative omega the twisted matrix is real and its leading
    eigenvalues form a conjugate pair, which defeats single-vector power
    iteration; a small Arnoldi solve reads off the modulus regardless.
    """
    tw = twist(op, omega)
    n = tw.mesh.n_cells
    if n <= max(k + 1, 8):
        vals = np.linalg.eigvals(tw.matrix.toarray())
        return float(np.max(np.abs(vals)))
    try:
        vals = spla.eigs(
            tw.matrix.astype(complex), k=k, which="LM",
            return_eigenvectors=False, maxiter=50 * n, tol=1e-10,
        )
    except spla.ArpackNoConvergence as err:
        raise NonConvergence("twisted Arnoldi solve", float("nan")) from err
    return float(np.max(np.abs(vals)))


def eigenvalue_curve(
    op: UlamOperator,
    psi_shift: float,
    t_grid,
    *,
    tol: float = 1e-10,
    max_sweeps: int = 20000,
    exact: bool = True,
) -> list[tuple[float, complex]]:
    """Leading eigenvalue of R_t, weights e^{i t (phi - psi_shift)}.

    Sweeps t in the given order, warm-starting each solve with the
    previous eigenvector; t values whose iteration fails to converge
    are reported and skipped.
    """
    out: list[tuple[float, complex]] = []
    v = None
    for t in t_grid:
        twisted = twist(op, np.exp(1j * t), exact=exact)
        try:
            lam, _, v = leading_eigenvalue(twisted, v0=v, tol=tol, max_sweeps=max_sweeps)
        except NonConvergence as err:
            log.warning("eigenvalue curve skipped t=%g: %s", t, err)
            continue
        out.append((float(t), lam * np.exp(-1j * t * psi_shift)))
    return out


def mean_phi(op: UlamOperator, density: DensityEstimate) -> float:
    """E[phi] under the given invariant density, exact per-sample phi."""
    if op.triplets is None:
        raise PhiUnavailable("operator was built without return times")
    u_src, _, u_phi, counts = op.triplets
    n = op.mesh.n_cells
    valid = np.bincount(u_src, weights=counts.astype(float), minlength=n)
    phi_bar_cell = np.bincount(
        u_src, weights=counts * u_phi.astype(float), minlength=n
    ) / valid
    mass = density.values * op.mesh.areas(op.params)
    mass = mass / mass.sum()
    return float(np.sum(mass * phi_bar_cell))


def phi_distribution(
    op: UlamOperator, density: DensityEstimate, n_max: int
) -> np.ndarray:
    """mu_Y(phi = n) for n = 1..n_max from the per-sample return times."""
    if op.triplets is None:
        raise PhiUnavailable("operator was built without return times")
    u_src, _, u_phi, counts = op.triplets
    n = op.mesh.n_cells
    valid = np.bincount(u_src, weights=counts.astype(float), minlength=n)
    mass = density.values * op.mesh.areas(op.params)
    mass = mass / mass.sum()
    weights = mass[u_src] * counts / valid[u_src]
    dist = np.bincount(
        np.clip(u_phi, 0, n_max + 1), weights=weights, minlength=n_max + 2
    )
    return dist[1 : n_max + 1]


def boundary_trace(density: DensityEstimate) -> float:
    """Integral over theta of the density in the first x-row (x = 3/4+)."""
    if density.mesh.region != "Y":
        raise ValueError("boundary trace is defined on Y meshes")
    r, k = density.mesh.x_cells, density.mesh.theta_cells
    first_row = density.values.reshape(k, r)[:, 0]
    return float(first_row.mean())


def c2_estimate(density: DensityEstimate, params: MapParams) -> float:
    """Return-tail constant (c'/4) * integral of h_Y at the 3/4 edge."""
    return derive_constants(params).cprime / 4.0 * boundary_trace(density)


def cell_average(
    obs: Observable, mesh: Mesh, params: MapParams, *, samples: int = 16, seed: int = 5
) -> np.ndarray:
    """Observable averaged over each cell by the shared Sobol block."""
    pts = mesh.sample_points(samples, seed, params)
    vals = obs.values(pts[:, :, 0].ravel(), pts[:, :, 1].ravel())
    return vals.reshape(mesh.n_cells, samples).mean(axis=1)


def correlation_operator(
    op_f: UlamOperator,
    v: Observable,
    w: Observable,
    n_max: int,
    *,
    density: DensityEstimate | None = None,
) -> np.ndarray:
    """Deterministic correlations rho(1..n_max) by operator iteration.

    rho(n) = <pushforward^n of (v * mu), w> - mean(v) * mean(w), means
    taken under the invariant density of f.
    """
    if op_f.mesh.region != "M":
        raise ValueError("correlations iterate the one-step operator on M")
    if density is None:
        density, _ = invariant_density(op_f)
    mesh, params = op_f.mesh, op_f.params
    v_bar = cell_average(v, mesh, params)
    w_bar = cell_average(w, mesh, params)
    mass = density.values * mesh.areas(params)
    mass = mass / mass.sum()
    mean_v = float(np.sum(v_bar * mass))
    mean_w = float(np.sum(w_bar * mass))
    m = v_bar * mass
    out = np.empty(n_max)
    for n in range(1, n_max + 1):
        m = m @ op_f.matrix
        out[n - 1] = float(np.sum(w_bar * m)) - mean_v * mean_w
    return out


def save_operator_coo(path, op: UlamOperator) -> None:
    """Text export `row,col,value_re,value_im`, row-major order."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row,col,value_re,value_im\n")
        for r, c, val in zip(coo.row[order], coo.col[order], coo.data[order]):
            z = complex(val)
            fh.write(f"{r},{c},{z.real:.17g},{z.imag:.17g}\n")


def save_density_csv(path, density: DensityEstimate, params: MapParams) -> None:
    """CSV export `cell_x_lo,cell_x_hi,cell_theta_lo,cell_theta_hi,value`."""
    b = density.mesh.cell_bounds(params)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("cell_x_lo,cell_x_hi,cell_theta_lo,cell_theta_hi,value\n")
        for row, val in zip(b, density.values):
            fh.write(
                f"{row[0]:.17g},{row[1]:.17g},{row[2]:.17g},{row[3]:.17g},{val:.17g}\n"
            )
