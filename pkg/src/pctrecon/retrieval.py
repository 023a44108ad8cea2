"""Stage-1 phase retrieval: per-projection inversion of the duality filter.

Recovers the absorption sinogram from measured intensity contrast by a
regularized division in frequency space; no cross-projection coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import KIND_ABSORPTION, KIND_CONTRAST, Sinogram
from .geometry import ScanGeometry
from .operators import ctf_filter


@dataclass(frozen=True)
class RetrievalConfig:
    """Duality constant and the relative floor of the regularized division.

    epsilon is relative to max |w|; the duality filter has zeros wherever
    tan(psi) = 1/sigma and the floor keeps the inversion total there.
    epsilon = 0 reproduces plain division wherever w != 0.
    """

    sigma: float
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


def retrieve_absorption(g: Sinogram, geometry: ScanGeometry,
                        cfg: RetrievalConfig) -> Sinogram:
    """Invert the duality filter: B_hat = g_hat * w / (w**2 + eps**2 * max(w**2)).

    Returns the real part of the inverse per-projection DFT; linear in g.
    """
    if g.kind != KIND_CONTRAST:
        raise ValueError("retrieve_absorption expects normalized intensity contrast")
    w = ctf_filter(geometry, cfg.sigma).weights
    denom = w**2 + cfg.epsilon**2 * np.max(w**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        filt = np.where(denom > 0, w / np.where(denom > 0, denom, 1.0), 0.0)
    spec = np.fft.fft(g.values, axis=0, norm="ortho")
    b = np.fft.ifft(filt[:, None] * spec, axis=0, norm="ortho")
    return Sinogram(np.ascontiguousarray(b.real), KIND_ABSORPTION)


def duality_delta(beta: np.ndarray, sigma: float) -> np.ndarray:
    """Refractive decrement image under duality: delta = -sigma * beta."""
    return -sigma * np.asarray(beta)
