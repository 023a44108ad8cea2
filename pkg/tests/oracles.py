"""Independent brute-force oracles used by the tests.

These deliberately avoid the package's fast code paths: the Radon oracle
clips every ray against every pixel square separately, the Otsu oracle
re-scores every threshold tuple from the raw histogram.
"""

import numpy as np


def ray_pixel_length(px, py, dx, dy, x0, x1, y0, y1):
    """Length of the intersection of the line (px,py)+t(dx,dy) with the
    axis-aligned box [x0,x1]x[y0,y1] (Liang-Barsky clipping)."""
    t0, t1 = -np.inf, np.inf
    for p, d, lo, hi in ((px, dx, x0, x1), (py, dy, y0, y1)):
        if d == 0.0:
            if p <= lo or p >= hi:
                return 0.0
        else:
            ta, tb = (lo - p) / d, (hi - p) / d
            t0 = max(t0, min(ta, tb))
            t1 = min(t1, max(ta, tb))
    return max(0.0, t1 - t0)


def dense_radon_matrix(geometry):
    """Dense system matrix by per-ray, per-pixel clipping. O(rays * n^2);
    keep n <= 16."""
    n = geometry.n_pixels
    h = geometry.object_pixel_size
    m = geometry.n_detector
    p = geometry.detector_pixel_size
    angles = geometry.angles_rad()
    half = 0.5 * n * h
    mat = np.zeros((m * angles.size, n * n))
    for a, th in enumerate(angles):
        ct, st = np.cos(th), np.sin(th)
        dx, dy = -st, ct
        for k in range(m):
            t = (k - 0.5 * (m - 1)) * p
            px, py = t * ct, t * st
            row = a * m + k
            for iy in range(n):
                for ix in range(n):
                    x0 = -half + ix * h
                    y0 = -half + iy * h
                    mat[row, iy * n + ix] = ray_pixel_length(
                        px, py, dx, dy, x0, x0 + h, y0, y0 + h
                    )
    return mat


def apply_dense(mat, x, range_shape, m):
    """Apply a dense matrix laid out angle-major to an image, returning the
    (m x n_angles) sinogram."""
    y = mat @ x.ravel()
    n_angles = range_shape[1]
    return y.reshape(n_angles, m).T


def dense_operator_matrix(op):
    """Assemble any LinearOperator densely by applying it to basis vectors."""
    size = int(np.prod(op.domain_shape))
    cols = []
    for i in range(size):
        e = np.zeros(size)
        e[i] = 1.0
        cols.append(op.apply(e.reshape(op.domain_shape)).ravel())
    return np.stack(cols, axis=1)


def otsu_bruteforce(u, n_classes, n_bins=256):
    """Best threshold tuple by direct evaluation of the between-class
    variance for every combination, ties to the smallest tuple."""
    from itertools import combinations

    u = np.asarray(u, dtype=float).ravel()
    counts, edges = np.histogram(u, bins=n_bins, range=(u.min(), u.max()))
    p = counts / counts.sum()
    centers = 0.5 * (edges[:-1] + edges[1:])
    grand = float(np.sum(p * centers))
    best, best_val = None, -np.inf
    for combo in combinations(range(n_bins - 1), n_classes - 1):
        bounds = (-1,) + combo + (n_bins - 1,)
        val = 0.0
        ok = True
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            pk = p[lo + 1:hi + 1].sum()
            if pk == 0:
                ok = False
                break
            mk = np.sum(p[lo + 1:hi + 1] * centers[lo + 1:hi + 1]) / pk
            val += pk * (mk - grand) ** 2
        if ok and val > best_val:
            best_val = val
            best = combo
    return tuple(float(edges[i + 1]) for i in best)
