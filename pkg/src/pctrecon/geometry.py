"""Scan geometry, material database and grain phantom generation.

Physical conventions: all lengths in meters, angles in degrees in [0, 180),
spatial frequencies in cycles per meter. The detector sampling frequency is
``F_s = 1 / detector_pixel_size`` and every spectral grid in the package is
derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# hc in keV * m; 40 keV -> 3.0996e-11 m = 0.31 Angstrom
HC_KEV_M = 1.23984193e-9


def wavelength_from_energy(energy_kev: float) -> float:
    """X-ray wavelength in meters for a photon energy in keV."""
    if energy_kev <= 0:
        raise ValueError(f"photon energy must be positive, got {energy_kev}")
    return HC_KEV_M / energy_kev


@dataclass(frozen=True)
class Material:
    """Complex refractive index n = 1 - delta + i*beta of one material."""

    name: str
    beta: float
    delta: float

    def __post_init__(self):
        physical = self.beta > 0 and self.delta > 0
        vacuum = self.beta == 0 and self.delta == 0
        if not (physical or vacuum):
            raise ValueError(
                f"material {self.name!r}: beta and delta must both be positive "
                f"(or both zero for vacuum), got beta={self.beta}, delta={self.delta}"
            )


# beta / delta for 40 keV X-rays.
_BUILTIN = [
    Material("polycarbonate", 8.43e-12, 1.64e-7),
    Material("diamond", 1.90e-11, 4.55e-7),
    Material("magnesium", 1.15e-10, 2.22e-7),
    Material("aluminium", 2.32e-10, 3.37e-7),
    Material("silicon", 2.68e-10, 3.01e-7),
    Material("iron", 6.42e-9, 9.54e-7),
    Material("copper", 9.96e-9, 1.06e-6),
    Material("vacuum", 0.0, 0.0),
]


def builtin_materials() -> list[Material]:
    """The seven built-in 40 keV materials plus vacuum."""
    return list(_BUILTIN)


def material_by_name(name: str) -> Material:
    key = name.strip().lower()
    for m in _BUILTIN:
        if m.name == key:
            return m
    known = ", ".join(m.name for m in _BUILTIN)
    raise ValueError(f"unknown material {name!r}; known materials: {known}")


def duality_sigma(m: Material) -> float:
    """Proportionality constant sigma = -delta/beta of the duality assumption."""
    if m.beta <= 0:
        raise ValueError(f"duality constant undefined for beta <= 0 ({m.name!r})")
    return -m.delta / m.beta


def default_detector_width(n_pixels: int, pad_margin_at_200: int = 64) -> int:
    """Detector bin count leaving room for near-field fringes.

    Next even integer >= 2*ceil(n*sqrt(2)/2) plus twice a pad margin that is
    64 bins at the 200-pixel reference scale and scales proportionally.
    """
    shadow = 2 * math.ceil(n_pixels * math.sqrt(2.0) / 2.0)
    pad = max(1, round(pad_margin_at_200 * n_pixels / 200))
    m = shadow + 2 * pad
    return m if m % 2 == 0 else m + 1


def uniform_angles(n_angles: int) -> tuple[float, ...]:
    """n_angles equally spaced view angles in [0, 180) degrees."""
    if n_angles < 1:
        raise ValueError("need at least one angle")
    return tuple(180.0 * i / n_angles for i in range(n_angles))


@dataclass(frozen=True)
class ScanGeometry:
    """All physical and discretization parameters of one simulated scan.

    Attributes
    ----------
    n_pixels : object grid is n_pixels x n_pixels square pixels.
    object_pixel_size : side length of one object pixel [m].
    wavelength : X-ray wavelength [m].
    distance_R : object-to-detector propagation distance [m].
    detector_pixel_size : detector bin width [m].
    n_detector : detector bins per projection.
    angles : view angles in degrees, strictly increasing, in [0, 180).
    photons_N0 : mean incident photons per detector pixel per projection.
    rng_seed : base seed for the noise streams.
    """

    n_pixels: int
    object_pixel_size: float
    wavelength: float
    distance_R: float
    detector_pixel_size: float
    n_detector: int
    angles: tuple[float, ...]
    photons_N0: float = 1e5
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_pixels < 2:
            raise ValueError("n_pixels must be at least 2")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.distance_R < 0:
            raise ValueError("distance_R must be nonnegative")
        if self.object_pixel_size <= 0 or self.detector_pixel_size <= 0:
            raise ValueError("pixel sizes must be positive")
        min_det = math.ceil(self.n_pixels * math.sqrt(2.0))
        if self.n_detector < min_det:
            raise ValueError(
                f"n_detector={self.n_detector} too small: rotated object needs "
                f"at least {min_det} bins"
            )
        ang = np.asarray(self.angles, dtype=float)
        if ang.size == 0:
            raise ValueError("need at least one projection angle")
        if np.any(ang < 0) or np.any(ang >= 180.0):
            raise ValueError("angles must lie in [0, 180) degrees")
        if np.any(np.diff(ang) <= 0):
            raise ValueError("angles must be strictly increasing")
        if self.photons_N0 <= 0:
            raise ValueError("photons_N0 must be positive")
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))

    @property
    def n_angles(self) -> int:
        return len(self.angles)

    @property
    def sampling_frequency(self) -> float:
        """Detector sampling frequency F_s = 1/p [1/m]."""
        return 1.0 / self.detector_pixel_size

    @property
    def wavenumber_scale(self) -> float:
        """2*pi/lambda, the scale between line integrals and B/phi."""
        return 2.0 * math.pi / self.wavelength

    def angles_rad(self) -> np.ndarray:
        return np.deg2rad(np.asarray(self.angles, dtype=np.float64))

    def detector_offsets(self) -> np.ndarray:
        """Perpendicular ray offsets t [m], centered on the object."""
        m = self.n_detector
        return (np.arange(m) - 0.5 * (m - 1)) * self.detector_pixel_size

    def frequencies(self) -> np.ndarray:
        """Detector-domain DFT frequencies [1/m], native (fftshift-free) order."""
        return np.fft.fftfreq(self.n_detector, d=self.detector_pixel_size)


@dataclass(eq=False)
class Phantom:
    """Two-channel object map on the square pixel grid.

    beta_map / delta_map are piecewise constant; label_map holds the material
    class per pixel with 0 = background.
    """

    beta_map: np.ndarray
    delta_map: np.ndarray
    label_map: np.ndarray

    def __post_init__(self):
        if not (self.beta_map.shape == self.delta_map.shape == self.label_map.shape):
            raise ValueError("phantom grids must share one shape")
        if self.beta_map.ndim != 2 or self.beta_map.shape[0] != self.beta_map.shape[1]:
            raise ValueError("phantom grids must be square 2-D arrays")

    @property
    def n_pixels(self) -> int:
        return self.beta_map.shape[0]


def make_grain_phantom(
    geometry: ScanGeometry,
    background: Material,
    grain_a: Material,
    grain_b: Material,
    n_grains: int,
    seed: int,
) -> Phantom:
    """Voronoi grain phantom inside the inscribed disk of the pixel grid.

    n_grains seed points are drawn uniformly in the disk with a seeded RNG and
    every disk pixel is assigned to its nearest seed; cells alternate between
    grain_a (label 1) and grain_b (label 2) in a randomly permuted order, so
    both materials occur for n_grains >= 2. Pixels outside the disk get the
    background material (label 0). Same arguments give a bit-identical phantom.
    """
    n = geometry.n_pixels
    if n < 16:
        raise ValueError("grain phantom needs a grid of at least 16 pixels")
    if n_grains < 2:
        raise ValueError("need at least two grains")
    if n_grains > n * n:
        raise ValueError(f"n_grains={n_grains} exceeds pixel count {n * n}")

    rng = np.random.default_rng(seed)
    radius = 0.5 * n

    # rejection-sample seed points uniformly in the inscribed disk
    pts = np.empty((0, 2))
    while pts.shape[0] < n_grains:
        cand = rng.uniform(-radius, radius, size=(4 * n_grains, 2))
        keep = cand[:, 0] ** 2 + cand[:, 1] ** 2 <= radius**2
        pts = np.vstack([pts, cand[keep]])
    pts = pts[:n_grains]

    # pixel centers relative to the grid center, in pixel units
    c = np.arange(n) - 0.5 * (n - 1)
    yy, xx = np.meshgrid(c, c, indexing="ij")
    disk = xx**2 + yy**2 <= radius**2

    d2 = (xx[None] - pts[:, 0, None, None]) ** 2 + (yy[None] - pts[:, 1, None, None]) ** 2
    cell = np.argmin(d2, axis=0)

    order = rng.permutation(n_grains)
    cell_label = np.empty(n_grains, dtype=np.int64)
    cell_label[order] = np.where(np.arange(n_grains) % 2 == 0, 1, 2)

    label = np.where(disk, cell_label[cell], 0)
    betas = np.array([background.beta, grain_a.beta, grain_b.beta])
    deltas = np.array([background.delta, grain_a.delta, grain_b.delta])
    return Phantom(betas[label], deltas[label], label)
