"""Numba ray-tracing kernels for the parallel-beam line-intersection projector.

Forward and backprojection walk every ray with identical arithmetic, so the
backprojector is the exact transpose of the projector. One ray per detector
bin; the ray at angle theta and offset t passes through (t cos, t sin) with
direction (-sin, cos), and segment lengths are accumulated in meters.
"""

import numpy as np
from numba import njit

_BIG = 1e300


@njit(cache=True)
def _forward_kernel(image, n, h, angles, m, p, out):
    half = 0.5 * n * h
    for a in range(angles.size):
        ct = np.cos(angles[a])
        st = np.sin(angles[a])
        dx = -st
        dy = ct
        for k in range(m):
            t = (k - 0.5 * (m - 1)) * p
            px = t * ct
            py = t * st

            # clip the ray against the grid bounding square
            t0 = -_BIG
            t1 = _BIG
            if dx != 0.0:
                ta = (-half - px) / dx
                tb = (half - px) / dx
                t0 = min(ta, tb)
                t1 = max(ta, tb)
            elif px <= -half or px >= half:
                out[k, a] = 0.0
                continue
            if dy != 0.0:
                ta = (-half - py) / dy
                tb = (half - py) / dy
                t0 = max(t0, min(ta, tb))
                t1 = min(t1, max(ta, tb))
            elif py <= -half or py >= half:
                out[k, a] = 0.0
                continue
            if t1 <= t0:
                out[k, a] = 0.0
                continue

            ex = px + t0 * dx
            ey = py + t0 * dy
            ix = int((ex + half) / h)
            iy = int((ey + half) / h)
            if ix > n - 1:
                ix = n - 1
            if iy > n - 1:
                iy = n - 1

            if dx > 0.0:
                tx = t0 + ((ix + 1) * h - half - ex) / dx
                dtx = h / dx
                sx = 1
            elif dx < 0.0:
                tx = t0 + (ix * h - half - ex) / dx
                dtx = -h / dx
                sx = -1
            else:
                tx = _BIG
                dtx = _BIG
                sx = 0
            if dy > 0.0:
                ty = t0 + ((iy + 1) * h - half - ey) / dy
                dty = h / dy
                sy = 1
            elif dy < 0.0:
                ty = t0 + (iy * h - half - ey) / dy
                dty = -h / dy
                sy = -1
            else:
                ty = _BIG
                dty = _BIG
                sy = 0

            acc = 0.0
            tcur = t0
            for _ in range(2 * n + 4):
                tn = tx if tx < ty else ty
                if tn > t1:
                    tn = t1
                seg = tn - tcur
                if seg > 0.0 and 0 <= ix < n and 0 <= iy < n:
                    acc += seg * image[iy, ix]
                if tn >= t1:
                    break
                if tx <= ty:
                    ix += sx
                    tx += dtx
                else:
                    iy += sy
                    ty += dty
                tcur = tn
            out[k, a] = acc


@njit(cache=True)
def _adjoint_kernel(sino, n, h, angles, m, p, out):
    # same traversal as _forward_kernel with the accumulation reversed;
    # serial loop order keeps float sums deterministic
    half = 0.5 * n * h
    for a in range(angles.size):
        ct = np.cos(angles[a])
        st = np.sin(angles[a])
        dx = -st
        dy = ct
        for k in range(m):
            val = sino[k, a]
            if val == 0.0:
                continue
            t = (k - 0.5 * (m - 1)) * p
            px = t * ct
            py = t * st

            t0 = -_BIG
            t1 = _BIG
            if dx != 0.0:
                ta = (-half - px) / dx
                tb = (half - px) / dx
                t0 = min(ta, tb)
                t1 = max(ta, tb)
            elif px <= -half or px >= half:
                continue
            if dy != 0.0:
                ta = (-half - py) / dy
                tb = (half - py) / dy
                t0 = max(t0, min(ta, tb))
                t1 = min(t1, max(ta, tb))
            elif py <= -half or py >= half:
                continue
            if t1 <= t0:
                continue

            ex = px + t0 * dx
            ey = py + t0 * dy
            ix = int((ex + half) / h)
            iy = int((ey + half) / h)
            if ix > n - 1:
                ix = n - 1
            if iy > n - 1:
                iy = n - 1

            if dx > 0.0:
                tx = t0 + ((ix + 1) * h - half - ex) / dx
                dtx = h / dx
                sx = 1
            elif dx < 0.0:
                tx = t0 + (ix * h - half - ex) / dx
                dtx = -h / dx
                sx = -1
            else:
                tx = _BIG
                dtx = _BIG
                sx = 0
            if dy > 0.0:
                ty = t0 + ((iy + 1) * h - half - ey) / dy
                dty = h / dy
                sy = 1
            elif dy < 0.0:
                ty = t0 + (iy * h - half - ey) / dy
                dty = -h / dy
                sy = -1
            else:
                ty = _BIG
                dty = _BIG
                sy = 0

            tcur = t0
            for _ in range(2 * n + 4):
                tn = tx if tx < ty else ty
                if tn > t1:
                    tn = t1
                seg = tn - tcur
                if seg > 0.0 and 0 <= ix < n and 0 <= iy < n:
                    out[iy, ix] += seg * val
                if tn >= t1:
                    break
                if tx <= ty:
                    ix += sx
                    tx += dtx
                else:
                    iy += sy
                    ty += dty
                tcur = tn
