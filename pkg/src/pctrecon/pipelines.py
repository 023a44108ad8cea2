"""End-to-end reconstruction pipelines and the material/noise sweeps.

Both routes consume the same normalized intensity contrast. The flat-field
(per-projection DC) bin carries no usable signal after normalization, so each
route fits its linear model on mean-free data with the matching mean-free
operator: stage 2 of the two-stage route removes per-projection means, the
combined route zeroes the DC bin of the spectrum on both sides.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .forward import (
    Sinogram,
    add_poisson_noise,
    intensity_contrast,
    project,
    propagate_intensity,
)
from .geometry import Material, Phantom, ScanGeometry, duality_sigma, make_grain_phantom
from .metrics import relative_error, segmentation_error
from .operators import LinearOperator, acd_operator, estimate_norm, radon
from .retrieval import RetrievalConfig, duality_delta, retrieve_absorption
from .solver import SolveReport, SolverConfig, TVProblem, solve_tv

SIGMA_SMALLEST_BETA_GRAIN = "smallest-beta-grain"

# 7-point log grid, factor sqrt(10), centered at 0.1 * max|2 K^H b|; the
# center was fixed once against the desk-scale error minima of both methods
ALPHA_GRID_CENTER = 0.1
ALPHA_GRID_POINTS = 7
ALPHA_GRID_FACTOR = math.sqrt(10.0)

# caption values of the reference-scale experiments: per material row and,
# for the noise study, per photon count in the sweep's ascending N0 order
FULL_SCALE_ALPHA_MATERIALS = {
    "tsd": [0.01, 0.1, 0.12, 6.0],
    "acd": [120.0, 110.0, 112.0, 5.0],
}
FULL_SCALE_ALPHA_NOISE = {
    "tsd": {1e3: 0.14, 5e3: 0.08, 1e4: 0.05, 5e4: 0.03},
    "acd": {1e3: 300.0, 5e3: 170.0, 1e4: 140.0, 5e4: 100.0},
}


@dataclass
class ExperimentSpec:
    """One simulated experiment: physics, phantom recipe and solver knobs."""

    geometry: ScanGeometry
    background: Material
    grain_a: Material
    grain_b: Material
    n_grains: int = 12
    phantom_seed: int = 7
    sigma_rule: str | float = SIGMA_SMALLEST_BETA_GRAIN
    alpha_tsd: float | None = None
    alpha_acd: float | None = None
    noise_seed: int = 11
    epsilon: float = 1e-3
    tau_tol: float = 1e-6
    max_iters: int = 20000
    output_dir: Path | None = None

    def resolve_sigma(self) -> float:
        if isinstance(self.sigma_rule, (int, float)):
            return float(self.sigma_rule)
        if self.sigma_rule != SIGMA_SMALLEST_BETA_GRAIN:
            raise ValueError(f"unknown sigma rule {self.sigma_rule!r}")
        grains = [m for m in (self.grain_a, self.grain_b) if m.beta > 0]
        if not grains:
            raise ValueError("sigma rule needs a grain material with beta > 0")
        return duality_sigma(min(grains, key=lambda m: m.beta))


@dataclass(eq=False)
class CellResult:
    """Reconstruction record of one (experiment, method) cell."""

    experiment_id: str
    method: str
    n0: float
    alpha: float
    sigma: float
    E: float
    Es: float
    iterations: int
    converged: bool
    seconds: float
    report: SolveReport = field(repr=False, default=None)
    beta: np.ndarray = field(repr=False, default=None)
    delta: np.ndarray = field(repr=False, default=None)

    def csv_row(self):
        return [
            self.experiment_id, self.method, f"{self.n0:g}", f"{self.alpha:.8e}",
            f"{self.sigma:.8e}", f"{self.E:.8f}", f"{self.Es:.8f}",
            str(self.iterations), str(self.converged).lower(), f"{self.seconds:.3f}",
        ]


CSV_COLUMNS = ["experiment_id", "method", "n0", "alpha", "sigma", "E", "Es",
               "iterations", "converged", "seconds"]


def simulate_contrast(spec: ExperimentSpec, n0: float | None = None,
                      noise_seed: int | None = None):
    """Phantom, forward simulation, Poisson noise and normalization.

    Returns (phantom, clean intensity, noisy intensity, contrast sinogram).
    """
    geo = spec.geometry
    phantom = make_grain_phantom(
        geo, spec.background, spec.grain_a, spec.grain_b, spec.n_grains,
        spec.phantom_seed,
    )
    A = radon(geo)
    B, phi = project(phantom, geo, A)
    clean = propagate_intensity(B, phi, geo)
    noisy = add_poisson_noise(
        clean, geo.photons_N0 if n0 is None else n0,
        spec.noise_seed if noise_seed is None else noise_seed,
    )
    return phantom, clean, noisy, intensity_contrast(noisy)


def _mean_free(op: LinearOperator, scale: float = 1.0) -> LinearOperator:
    # compose per-projection mean removal (a self-adjoint projector) with a
    # scaled operator; keeps the fit blind to the flat-field bin
    def fwd(x):
        y = scale * op.apply(x)
        return y - y.mean(axis=0, keepdims=True)

    def adj(y):
        return scale * op.apply_adjoint(y - y.mean(axis=0, keepdims=True))

    return LinearOperator(op.domain_shape, op.range_shape, fwd, adj,
                          name=f"{op.name}+meanfree")


def _dc_masked(op: LinearOperator) -> LinearOperator:
    def fwd(x):
        y = op.apply(x)
        y[0, :] = 0.0
        return y

    def adj(y):
        z = y.copy()
        z[0, :] = 0.0
        return op.apply_adjoint(z)

    return LinearOperator(op.domain_shape, op.range_shape, fwd, adj,
                          name=f"{op.name}+dcfree")


def tsd_problem(spec: ExperimentSpec, g: Sinogram, A: LinearOperator | None = None):
    """Stage 1 + the stage-2 TV problem of the two-stage route.

    Returns (K, b): K is the mean-free scaled Radon operator, b the retrieved
    absorption sinogram with per-projection means removed.
    """
    geo = spec.geometry
    if A is None:
        A = radon(geo)
    sigma = spec.resolve_sigma()
    retrieved = retrieve_absorption(g, geo, RetrievalConfig(sigma, spec.epsilon))
    K = _mean_free(A, geo.wavenumber_scale)
    b = retrieved.values - retrieved.values.mean(axis=0, keepdims=True)
    return K, b


def acd_problem(spec: ExperimentSpec, g: Sinogram):
    """The one-shot TV problem of the combined route.

    Returns (K, b): K the DC-masked combined operator, b the per-projection
    spectrum of the contrast with DC bins zeroed.
    """
    geo = spec.geometry
    K = _dc_masked(acd_operator(geo, spec.resolve_sigma()))
    b = np.fft.fft(g.values, axis=0, norm="ortho")
    b[0, :] = 0.0
    return K, b


def _solve(spec: ExperimentSpec, K, b, alpha, operator_norm) -> SolveReport:
    problem = TVProblem(K, b, float(alpha), spec.geometry.n_pixels)
    cfg = SolverConfig(tau_tol=spec.tau_tol, max_iters=spec.max_iters,
                       operator_norm=operator_norm)
    return solve_tv(problem, cfg)


def alpha_grid(K: LinearOperator, b: np.ndarray) -> list[float]:
    """Deterministic per-problem search grid around 0.1 * max|2 K^H b|."""
    ref = float(np.abs(2.0 * K.apply_adjoint(b)).max())
    if ref == 0.0:
        ref = 1.0
    center = ALPHA_GRID_CENTER * ref
    half = ALPHA_GRID_POINTS // 2
    return [center * ALPHA_GRID_FACTOR**k for k in range(-half, half + 1)]


def run_tsd(spec: ExperimentSpec, g: Sinogram, A: LinearOperator | None = None) -> SolveReport:
    """Two-stage reconstruction: filter inversion, then the TV-regularized
    tomography solve. The solution is the absorption-index image."""
    if spec.alpha_tsd is None:
        raise ValueError("spec.alpha_tsd is not set; use grid_searched_cell or set it")
    K, b = tsd_problem(spec, g, A)
    return _solve(spec, K, b, spec.alpha_tsd, estimate_norm(K))


def run_acd(spec: ExperimentSpec, g: Sinogram) -> SolveReport:
    """Combined reconstruction: one TV solve through the composed operator."""
    if spec.alpha_acd is None:
        raise ValueError("spec.alpha_acd is not set; use grid_searched_cell or set it")
    K, b = acd_problem(spec, g)
    return _solve(spec, K, b, spec.alpha_acd, estimate_norm(K))


def grid_searched_cell(spec: ExperimentSpec, method: str, g: Sinogram,
                       phantom: Phantom, experiment_id: str, n0: float,
                       A: LinearOperator | None = None) -> CellResult:
    """Run one method on one cell, selecting alpha by the error-minimizing
    grid search unless the spec pins it."""
    sigma = spec.resolve_sigma()
    if method == "tsd":
        K, b = tsd_problem(spec, g, A)
        pinned = spec.alpha_tsd
    elif method == "acd":
        K, b = acd_problem(spec, g)
        pinned = spec.alpha_acd
    else:
        raise ValueError(f"unknown method {method!r}")
    norm_k = estimate_norm(K)
    alphas = [pinned] if pinned is not None else alpha_grid(K, b)

    best = None
    started = time.perf_counter()
    for alpha in alphas:
        report = _solve(spec, K, b, alpha, norm_k)
        err = relative_error(report.solution, phantom.beta_map)
        if best is None or err < best[0]:
            best = (err, alpha, report)
    err, alpha, report = best
    seconds = time.perf_counter() - started
    try:
        es = segmentation_error(report.solution, phantom.label_map,
                                len(np.unique(phantom.label_map)))
    except ValueError:
        es = float("nan")
    return CellResult(
        experiment_id=experiment_id, method=method, n0=n0, alpha=alpha,
        sigma=sigma, E=err, Es=es, iterations=report.iterations,
        converged=report.converged, seconds=seconds, report=report,
        beta=report.solution, delta=duality_delta(report.solution, sigma),
    )


def material_rows() -> list[tuple[str, str, str]]:
    """(background, low-beta grain, high-beta grain) per sweep row."""
    return [
        ("vacuum", "polycarbonate", "diamond"),
        ("polycarbonate", "magnesium", "silicon"),
        ("polycarbonate", "aluminium", "silicon"),
        ("polycarbonate", "iron", "copper"),
    ]


def _material_cell(args):
    spec, row_idx, names, full_scale = args
    from .geometry import material_by_name

    bg, a, b = (material_by_name(n) for n in names)
    cell_spec = replace(spec, background=bg, grain_a=a, grain_b=b)
    if full_scale:
        cell_spec = replace(
            cell_spec,
            alpha_tsd=FULL_SCALE_ALPHA_MATERIALS["tsd"][row_idx],
            alpha_acd=FULL_SCALE_ALPHA_MATERIALS["acd"][row_idx],
        )
    experiment_id = f"materials-row{row_idx + 1}"
    phantom, _, _, g = simulate_contrast(cell_spec)
    A = radon(cell_spec.geometry)
    out = []
    for method in ("tsd", "acd"):
        try:
            out.append(grid_searched_cell(cell_spec, method, g, phantom,
                                          experiment_id, cell_spec.geometry.photons_N0, A))
        except Exception as e:  # failed solves mark the cell, sweep continues
            out.append(CellResult(experiment_id, method, cell_spec.geometry.photons_N0,
                                  float("nan"), cell_spec.resolve_sigma(),
                                  float("nan"), float("nan"), 0, False, 0.0))
            print(f"warning: {experiment_id}/{method} failed: {e}")
    return phantom, out


def _noise_cell(args):
    spec, n0, full_scale = args
    experiment_id = f"noise-n0-{n0:g}"
    cell_spec = spec
    if full_scale:
        sched_t = FULL_SCALE_ALPHA_NOISE["tsd"].get(n0)
        sched_a = FULL_SCALE_ALPHA_NOISE["acd"].get(n0)
        if sched_t is not None:
            cell_spec = replace(spec, alpha_tsd=sched_t, alpha_acd=sched_a)
    phantom, _, _, g = simulate_contrast(cell_spec, n0=n0)
    A = radon(cell_spec.geometry)
    out = []
    for method in ("tsd", "acd"):
        try:
            out.append(grid_searched_cell(cell_spec, method, g, phantom,
                                          experiment_id, n0, A))
        except Exception as e:
            out.append(CellResult(experiment_id, method, n0, float("nan"),
                                  cell_spec.resolve_sigma(), float("nan"),
                                  float("nan"), 0, False, 0.0))
            print(f"warning: {experiment_id}/{method} failed: {e}")
    return phantom, out


def _run_cells(worker, jobs, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, jobs))
    return [worker(job) for job in jobs]


def material_sweep(base: ExperimentSpec, workers: int = 1,
                   full_scale: bool = False):
    """Both methods on the four material rows; paired noise per row.

    Returns (cells, phantoms): cells ordered by (row, method), one phantom
    per row for rendering.
    """
    jobs = [(base, i, names, full_scale)
            for i, names in enumerate(material_rows())]
    results = _run_cells(_material_cell, jobs, workers)
    phantoms = [ph for ph, _ in results]
    cells = [cell for _, pair in results for cell in pair]
    return cells, phantoms


def noise_sweep(base: ExperimentSpec, n0_list=None, workers: int = 1,
                full_scale: bool = False):
    """Both methods across photon budgets on the low-absorption phantom.

    Uses the vacuum-background polycarbonate/diamond phantom; cells ordered
    by (ascending N0, method).
    """
    from .geometry import material_by_name

    if n0_list is None:
        n0_list = [1e3, 5e3, 1e4, 5e4]
    n0_list = sorted(float(v) for v in n0_list)
    spec = replace(
        base,
        background=material_by_name("vacuum"),
        grain_a=material_by_name("polycarbonate"),
        grain_b=material_by_name("diamond"),
    )
    jobs = [(spec, n0, full_scale) for n0 in n0_list]
    results = _run_cells(_noise_cell, jobs, workers)
    phantoms = [ph for ph, _ in results]
    cells = [cell for _, pair in results for cell in pair]
    return cells, phantoms


def write_cells_csv(path, cells) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for cell in cells:
            writer.writerow(cell.csv_row())


def write_noise_curves_csv(path, cells) -> None:
    """Pivot of the noise sweep: one row per N0 with both methods' errors."""
    by_n0: dict[float, dict[str, CellResult]] = {}
    for cell in cells:
        by_n0.setdefault(cell.n0, {})[cell.method] = cell
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n0", "E_tsd", "E_acd", "Es_tsd", "Es_acd"])
        for n0 in sorted(by_n0):
            row = by_n0[n0]
            writer.writerow([
                f"{n0:g}",
                f"{row['tsd'].E:.8f}", f"{row['acd'].E:.8f}",
                f"{row['tsd'].Es:.8f}", f"{row['acd'].Es:.8f}",
            ])
