"""Nonlinear forward simulation of a free-space propagation scan.

Transmittance, near-field propagation, intensity formation, flat-field
normalization and Poisson counting noise; produces the measured data both
reconstruction routes consume. The incident intensity is normalized to 1,
so the photon budget enters only through the noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Phantom, ScanGeometry
from .operators import LinearOperator

KIND_ABSORPTION = "absorption"
KIND_PHASE = "phase"
KIND_INTENSITY = "intensity"
KIND_CONTRAST = "contrast"

_KINDS = (KIND_ABSORPTION, KIND_PHASE, KIND_INTENSITY, KIND_CONTRAST)


@dataclass(eq=False)
class Sinogram:
    """Real detector-domain data, (n_detector x n_angles), with a kind tag."""

    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown sinogram kind {self.kind!r}")
        if self.values.ndim != 2:
            raise ValueError("sinogram values must be 2-D")
        if self.kind == KIND_INTENSITY and np.any(self.values < 0):
            raise ValueError("intensity sinogram must be nonnegative")


@dataclass(eq=False)
class Spectrum:
    """Per-projection DFT of a sinogram, frequency ordering of CTFFilter."""

    values: np.ndarray


def sinogram_spectrum(s: Sinogram) -> Spectrum:
    """Unitary per-projection DFT of a sinogram."""
    return Spectrum(np.fft.fft(s.values, axis=0, norm="ortho"))


def project(phantom: Phantom, geometry: ScanGeometry, A: LinearOperator):
    """Absorption and phase-shift sinograms of a phantom.

    B = (2*pi/lambda) * A @ beta_map and phi = -(2*pi/lambda) * A @ delta_map.
    """
    if A.domain_shape != phantom.beta_map.shape:
        raise ValueError(
            f"operator domain {A.domain_shape} does not match phantom "
            f"{phantom.beta_map.shape}"
        )
    scale = geometry.wavenumber_scale
    b = scale * A.apply(phantom.beta_map)
    phi = -scale * A.apply(phantom.delta_map)
    return Sinogram(b, KIND_ABSORPTION), Sinogram(phi, KIND_PHASE)


def propagate_intensity(B: Sinogram, phi: Sinogram, geometry: ScanGeometry) -> Sinogram:
    """Detector intensity of the transmittance exp(-B + i*phi) after distance R.

    Propagation multiplies each projection's spectrum by the unit-modulus
    Fresnel transfer function exp(-i*pi*lambda*R*omega**2); R = 0 returns
    exp(-2B) exactly. Outside the object shadow B = phi = 0, so the
    transmittance is already padded with vacuum on the wide detector.
    """
    if B.kind != KIND_ABSORPTION or phi.kind != KIND_PHASE:
        raise ValueError("propagate_intensity expects (absorption, phase) sinograms")
    if B.values.shape != phi.values.shape:
        raise ValueError("absorption and phase sinograms must share a shape")
    if geometry.distance_R == 0.0:
        return Sinogram(np.exp(-2.0 * B.values), KIND_INTENSITY)
    transmittance = np.exp(-B.values + 1j * phi.values)
    omega = geometry.frequencies()[:, None]
    h = np.exp(-1j * math.pi * geometry.wavelength * geometry.distance_R * omega**2)
    wave = np.fft.ifft(h * np.fft.fft(transmittance, axis=0), axis=0)
    return Sinogram(np.abs(wave) ** 2, KIND_INTENSITY)


def add_poisson_noise(I: Sinogram, N0: float, seed: int) -> Sinogram:
    """Replace every bin by Poisson(N0 * I) / N0.

    One counter-based stream per projection keyed on (seed, angle index), so
    the noise per projection is independent of any evaluation order.
    """
    if I.kind != KIND_INTENSITY:
        raise ValueError("noise applies to intensity sinograms")
    if np.any(I.values < 0):
        raise ValueError("negative intensity input")
    if N0 <= 0:
        raise ValueError("photon count N0 must be positive")
    out = np.empty_like(I.values)
    for j in range(I.values.shape[1]):
        stream = np.random.Generator(np.random.Philox(key=(seed, j)))
        out[:, j] = stream.poisson(N0 * I.values[:, j]) / N0
    return Sinogram(out, KIND_INTENSITY)


def intensity_contrast(I: Sinogram) -> Sinogram:
    """Normalized intensity contrast g = I - 1, the linear models' data.

    The flat-field term of the linearized model is absorbed by the
    subtraction; any residual per-projection DC is zeroed in spectrum space
    (equivalently, each projection of g has its mean removed).
    """
    if I.kind != KIND_INTENSITY:
        raise ValueError("intensity_contrast expects an intensity sinogram")
    g = I.values - 1.0
    g = g - g.mean(axis=0, keepdims=True)
    return Sinogram(g, KIND_CONTRAST)
