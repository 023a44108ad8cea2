"""Simulation and TV-regularized reconstruction for single-distance
propagation-based phase-contrast tomography."""

__version__ = "0.1.0"

from .geometry import (
    Material,
    Phantom,
    ScanGeometry,
    builtin_materials,
    duality_sigma,
    make_grain_phantom,
    material_by_name,
    wavelength_from_energy,
)
from .operators import (
    CTFFilter,
    LinearOperator,
    acd_operator,
    ctf_filter,
    estimate_norm,
    gradient,
    matrix_operator,
    projection_dft,
    radon,
)
from .forward import (
    Sinogram,
    Spectrum,
    add_poisson_noise,
    intensity_contrast,
    project,
    propagate_intensity,
)
from .retrieval import RetrievalConfig, duality_delta, retrieve_absorption
from .solver import SolveReport, SolverConfig, TVProblem, solve_tv
from .metrics import MetricReport, otsu_multilevel, relative_error, segmentation_error
