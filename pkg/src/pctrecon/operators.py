"""Matrix-free linear operators with exact adjoints and norm estimates.

Covers the discrete Radon transform (line-intersection method), the
forward-difference gradient, the per-projection unitary DFT, the duality
contrast-transfer filter and their composition into the combined operator
(2*pi/lambda) * W * F * A mapping an absorption-index image directly to the
per-projection intensity spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._siddon import _adjoint_kernel, _forward_kernel
from .geometry import ScanGeometry


class LinearOperator:
    """Forward/adjoint pair given as callables on ndarrays.

    The adjoint is exact with respect to the real part of the Hermitian
    inner product; operators with a real domain return real arrays from
    apply_adjoint.
    """

    def __init__(self, domain_shape, range_shape, apply_fn, adjoint_fn, name=""):
        self.domain_shape = tuple(domain_shape)
        self.range_shape = tuple(range_shape)
        self._apply = apply_fn
        self._adjoint = adjoint_fn
        self.name = name
        self._norm = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        if tuple(x.shape) != self.domain_shape:
            raise ValueError(f"{self.name or 'operator'}: expected domain shape "
                             f"{self.domain_shape}, got {x.shape}")
        return self._apply(x)

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        if tuple(y.shape) != self.range_shape:
            raise ValueError(f"{self.name or 'operator'}: expected range shape "
                             f"{self.range_shape}, got {y.shape}")
        return self._adjoint(y)

    @property
    def norm_estimate(self) -> float:
        """Cached power-iteration estimate of the operator 2-norm."""
        if self._norm is None:
            self._norm = estimate_norm(self, iters=64, seed=0)
        return self._norm


def radon(geometry: ScanGeometry) -> LinearOperator:
    """Discrete Radon transform of the scan geometry.

    Maps an n x n image to an (n_detector x n_angles) sinogram; entries are
    exact ray-pixel intersection lengths in meters, one parallel ray per
    detector bin with offsets centered on the object. The adjoint is the
    transpose action (backprojection with identical weights).
    """
    n = geometry.n_pixels
    h = geometry.object_pixel_size
    m = geometry.n_detector
    p = geometry.detector_pixel_size
    ang = geometry.angles_rad()
    dom = (n, n)
    rng_shape = (m, len(ang))

    def fwd(x):
        img = np.ascontiguousarray(x, dtype=np.float64)
        out = np.empty(rng_shape, dtype=np.float64)
        _forward_kernel(img, n, h, ang, m, p, out)
        return out

    def adj(y):
        sino = np.ascontiguousarray(y, dtype=np.float64)
        out = np.zeros(dom, dtype=np.float64)
        _adjoint_kernel(sino, n, h, ang, m, p, out)
        return out

    return LinearOperator(dom, rng_shape, fwd, adj, name="radon")


def gradient(n: int) -> LinearOperator:
    """Forward-difference gradient on an n x n grid, Neumann boundary.

    Range shape (2, n, n): component 0 holds horizontal differences,
    component 1 vertical; the last column/row of differences is zero.
    The adjoint is the matching negative divergence.
    """
    if n < 2:
        raise ValueError("gradient needs n >= 2")

    def fwd(u):
        g = np.zeros((2, n, n), dtype=np.result_type(u.dtype, np.float64))
        g[0, :, :-1] = u[:, 1:] - u[:, :-1]
        g[1, :-1, :] = u[1:, :] - u[:-1, :]
        return g

    def adj(y):
        out = np.zeros((n, n), dtype=np.result_type(y.dtype, np.float64))
        yx = y[0]
        yy = y[1]
        out[:, 1:] += yx[:, :-1]
        out[:, :-1] -= yx[:, :-1]
        out[1:, :] += yy[:-1, :]
        out[:-1, :] -= yy[:-1, :]
        return out

    return LinearOperator((n, n), (2, n, n), fwd, adj, name="gradient")


def projection_dft(geometry: ScanGeometry) -> LinearOperator:
    """Unitary 1-D DFT applied independently to each projection.

    Each detector column of the sinogram transforms along axis 0; frequencies
    follow the native (fftshift-free) ordering of ScanGeometry.frequencies().
    The adjoint is the inverse transform.
    """
    shape = (geometry.n_detector, geometry.n_angles)

    def fwd(x):
        return np.fft.fft(x, axis=0, norm="ortho")

    def adj(y):
        return np.fft.ifft(y, axis=0, norm="ortho")

    return LinearOperator(shape, shape, fwd, adj, name="projection_dft")


@dataclass(frozen=True, eq=False)
class CTFFilter:
    """Duality contrast-transfer weights on the detector frequency grid.

    psi[m] = pi * lambda * R * omega_m**2 and
    weights[m] = -2*cos(psi[m]) + 2*sigma*sin(psi[m]), stored in native DFT
    ordering so they multiply spectra without permutations.
    """

    sigma: float
    psi: np.ndarray
    weights: np.ndarray


def ctf_filter(geometry: ScanGeometry, sigma: float) -> CTFFilter:
    """Contrast-transfer filter for the geometry and duality constant sigma."""
    omega = geometry.frequencies()
    psi = math.pi * geometry.wavelength * geometry.distance_R * omega**2
    weights = -2.0 * np.cos(psi) + 2.0 * sigma * np.sin(psi)
    return CTFFilter(sigma=float(sigma), psi=psi, weights=weights)


def acd_operator(geometry: ScanGeometry, sigma: float) -> LinearOperator:
    """Combined operator (2*pi/lambda) * W * F * A.

    Maps a real n x n absorption-index image to the complex per-projection
    intensity spectrum. The adjoint composes the factor adjoints in reverse
    and returns the real part, keeping domain vectors real.
    """
    A = radon(geometry)
    w = ctf_filter(geometry, sigma).weights[:, None]
    scale = geometry.wavenumber_scale

    def fwd(x):
        sino = A.apply(x)
        spec = np.fft.fft(sino, axis=0, norm="ortho")
        return scale * (w * spec)

    def adj(y):
        z = np.fft.ifft(w * y, axis=0, norm="ortho")
        return scale * A.apply_adjoint(np.ascontiguousarray(z.real))

    return LinearOperator(A.domain_shape, A.range_shape, fwd, adj, name="acd")


def matrix_operator(mat: np.ndarray, domain_shape=None, range_shape=None,
                    real_domain=None) -> LinearOperator:
    """Wrap a dense matrix as a LinearOperator (small instances and tests).

    real_domain=True makes apply_adjoint return the real part, matching the
    convention of complex-ranged operators acting on real images.
    """
    mat = np.asarray(mat)
    nr, nc = mat.shape
    dom = (nc,) if domain_shape is None else tuple(domain_shape)
    rng_shape = (nr,) if range_shape is None else tuple(range_shape)
    if real_domain is None:
        real_domain = not np.iscomplexobj(mat)
    mh = mat.conj().T

    def fwd(x):
        return (mat @ x.ravel()).reshape(rng_shape)

    def adj(y):
        out = (mh @ y.ravel()).reshape(dom)
        return out.real if real_domain else out

    return LinearOperator(dom, rng_shape, fwd, adj, name="matrix")


class _StackedOperator:
    """Vertical stack x -> (op_0 x, op_1 x, ...) with summed adjoint.

    apply returns a tuple of range arrays; apply_adjoint takes the matching
    tuple. Only used to estimate the norm of [K; D] in the solver.
    """

    def __init__(self, ops):
        dom = ops[0].domain_shape
        if any(op.domain_shape != dom for op in ops):
            raise ValueError("stacked operators must share a domain shape")
        self.ops = list(ops)
        self.domain_shape = dom

    def apply(self, x):
        return tuple(op.apply(x) for op in self.ops)

    def apply_adjoint(self, ys):
        out = self.ops[0].apply_adjoint(ys[0])
        for op, y in zip(self.ops[1:], ys[1:]):
            out = out + op.apply_adjoint(y)
        return out


def stacked_operator(ops) -> "_StackedOperator":
    return _StackedOperator(ops)


def estimate_norm(op: LinearOperator, iters: int = 64, seed: int = 0) -> float:
    """Power-iteration estimate of the operator 2-norm, times a 1.05 margin.

    Iterates x <- Op^H Op x from a seeded random start; the Rayleigh quotient
    of the normal operator is non-decreasing over iterations.
    """
    if iters < 10:
        raise ValueError("estimate_norm needs iters >= 10")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.domain_shape)
    rayleigh = 0.0
    for _ in range(iters):
        bx = op.apply_adjoint(op.apply(x))
        xx = np.vdot(x, x).real
        if xx == 0.0:
            return 0.0
        rayleigh = max(rayleigh, np.vdot(x, bx).real / xx)
        nb = np.sqrt(np.vdot(bx, bx).real)
        if nb == 0.0:
            return 0.0
        x = bx / nb
    return 1.05 * math.sqrt(max(rayleigh, 0.0))
