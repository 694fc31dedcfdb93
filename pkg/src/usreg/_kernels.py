"""Compiled inner loop of the similarity measure."""

import numpy as np
from numba import njit

_SNAP = 1e-9


@njit(cache=True, nogil=True)
def _snap(v):
    r = np.rint(v)
    if abs(v - r) < _SNAP:
        return r
    return v


@njit(cache=True, nogil=True)
def resample_gated(points, M, origin, spacing, flat, dims, roi, use_roi, out, keep):
    """Trilinear resampling of ``flat`` at ``M @ points``, with bounds and ROI gating.

    ``flat`` and ``roi`` are x-fastest flattened grids of shape ``dims``.
    Writes ``out[i]`` and ``keep[i]``; returns the number of kept samples.
    """
    nx, ny, nz = dims[0], dims[1], dims[2]
    sy = nx
    sz = nx * ny
    n_keep = 0
    for i in range(points.shape[0]):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        wx = M[0, 0] * px + M[0, 1] * py + M[0, 2] * pz + M[0, 3]
        wy = M[1, 0] * px + M[1, 1] * py + M[1, 2] * pz + M[1, 3]
        wz = M[2, 0] * px + M[2, 1] * py + M[2, 2] * pz + M[2, 3]
        fx = _snap((wx - origin[0]) / spacing[0])
        fy = _snap((wy - origin[1]) / spacing[1])
        fz = _snap((wz - origin[2]) / spacing[2])
        out[i] = 0.0
        keep[i] = False
        if fx < 0 or fy < 0 or fz < 0 or fx > nx - 1 or fy > ny - 1 or fz > nz - 1:
            continue
        if use_roi:
            r = int(np.rint(fx)) + sy * int(np.rint(fy)) + sz * int(np.rint(fz))
            if not roi[r]:
                continue
        ix = min(int(np.floor(fx)), max(nx - 2, 0))
        iy = min(int(np.floor(fy)), max(ny - 2, 0))
        iz = min(int(np.floor(fz)), max(nz - 2, 0))
        tx = fx - ix
        ty = fy - iy
        tz = fz - iz
        dx = 1 if nx > 1 else 0
        dy = sy if ny > 1 else 0
        dz = sz if nz > 1 else 0
        b = ix + sy * iy + sz * iz
        c00 = flat[b] * (1 - tx) + flat[b + dx] * tx
        c10 = flat[b + dy] * (1 - tx) + flat[b + dy + dx] * tx
        c01 = flat[b + dz] * (1 - tx) + flat[b + dz + dx] * tx
        c11 = flat[b + dz + dy] * (1 - tx) + flat[b + dz + dy + dx] * tx
        out[i] = (c00 * (1 - ty) + c10 * ty) * (1 - tz) + (c01 * (1 - ty) + c11 * ty) * tz
        keep[i] = True
        n_keep += 1
    return n_keep
