"""Volumetric image container, trilinear sampling, orthogonal reslicing and
raw+JSON file I/O.

Voxel data are held in an array indexed ``[x, y, z]``. On disk the payload
is written with x varying fastest, then y, then z. World coordinates of a
voxel are ``origin + index * spacing``; there is no orientation matrix.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_DIMS = (199, 199, 199)
DEFAULT_SPACING = (0.28, 0.28, 0.28)

# indices closer than this to an integer are snapped, so that identity
# reslices hit voxel centres exactly
_SNAP = 1e-9

_DTYPES = {"u8": np.dtype("<u1"), "f32": np.dtype("<f4")}


class VolumeIOError(ValueError):
    """Base class for volume file errors."""


class MalformedHeaderError(VolumeIOError):
    pass


class SizeMismatchError(VolumeIOError):
    pass


class UnsupportedDtypeError(VolumeIOError):
    pass


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Scalar voxel grid with physical spacing.

    Parameters
    ----------
    data : array, shape (nx, ny, nz)
        Intensities in [0, 1].
    spacing : 3 floats
        Voxel size in mm along x, y, z.
    origin : 3 floats, optional
        World position (mm) of the centre of voxel (0, 0, 0). Defaults to the
        value that puts the volume centre at the world origin.
    """

    data: np.ndarray
    spacing: tuple = DEFAULT_SPACING
    origin: tuple | None = None
    _flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        data = np.asfortranarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"volume data must be a non-empty 3-D array, got shape {data.shape}")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(s > 0 and np.isfinite(s) for s in spacing):
            raise ValueError(f"spacing must be 3 strictly positive values, got {self.spacing}")
        if not np.all(np.isfinite(data)):
            raise ValueError("volume intensities must be finite")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError("volume intensities must lie in [0, 1]")
        if self.origin is None:
            origin = tuple(-(n - 1) / 2.0 * s for n, s in zip(data.shape, spacing))
        else:
            origin = tuple(float(o) for o in self.origin)
            if len(origin) != 3:
                raise ValueError("origin must have 3 components")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "_flat", data.ravel(order="F"))

    @property
    def dims(self) -> tuple:
        return tuple(int(n) for n in self.data.shape)

    @property
    def center(self) -> np.ndarray:
        """World position of the geometric centre of the voxel-centre box."""
        return np.asarray(self.origin) + (np.asarray(self.dims) - 1) / 2.0 * np.asarray(self.spacing)

    def world_to_index(self, points) -> np.ndarray:
        """Continuous voxel indices of world points, shape (..., 3)."""
        idx = (np.asarray(points, dtype=float) - np.asarray(self.origin)) / np.asarray(self.spacing)
        near = np.rint(idx)
        return np.where(np.abs(idx - near) < _SNAP, near, idx)

    def index_to_world(self, index) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(index, dtype=float) * np.asarray(self.spacing)

    def with_data(self, data) -> "Volume3D":
        """New volume on the same grid."""
        return Volume3D(data, self.spacing, self.origin)

    def sample(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised trilinear sampling; see :func:`sample_trilinear`."""
        return _trilinear(self, self.world_to_index(points))


def _trilinear(vol: Volume3D, idx: np.ndarray):
    shape = idx.shape[:-1]
    idx = idx.reshape(-1, 3)
    dims = np.asarray(vol.dims)
    valid = np.all((idx >= 0) & (idx <= dims - 1), axis=1)
    values = np.zeros(idx.shape[0])
    if not valid.any():
        return values.reshape(shape), valid.reshape(shape)
    p = idx[valid]
    # lower corner clamped so that points on the upper face use weight 1 on it
    base = np.minimum(np.floor(p), np.maximum(dims - 2, 0)).astype(np.intp)
    frac = p - base
    nx, ny = vol.dims[0], vol.dims[1]
    step = np.array([1, nx, nx * ny])
    # single-voxel axes have no upper neighbour; their frac is always 0
    step = np.where(dims > 1, step, 0)
    flat = vol._flat
    i0 = base @ np.array([1, nx, nx * ny])
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
    gx, gy, gz = 1.0 - fx, 1.0 - fy, 1.0 - fz
    sx, sy, sz = step
    c00 = flat[i0] * gx + flat[i0 + sx] * fx
    c10 = flat[i0 + sy] * gx + flat[i0 + sy + sx] * fx
    c01 = flat[i0 + sz] * gx + flat[i0 + sz + sx] * fx
    c11 = flat[i0 + sz + sy] * gx + flat[i0 + sz + sy + sx] * fx
    values[valid] = (c00 * gy + c10 * fy) * gz + (c01 * gy + c11 * fy) * fz
    return values.reshape(shape), valid.reshape(shape)


def sample_trilinear(vol: Volume3D, p) -> tuple[float, bool]:
    """Trilinear interpolation at a single world point.

    Points outside the box spanned by the voxel centres give ``(0.0, False)``.
    """
    values, valid = vol.sample(np.asarray(p, dtype=float).reshape(1, 3))
    return float(values[0]), bool(valid[0])


@dataclass(frozen=True)
class PlaneSpec:
    """A regularly sampled plane: ``center + (i - (nu-1)/2) * step * u + (j - (nv-1)/2) * step * v``."""

    center: tuple
    u: tuple
    v: tuple
    extent: tuple
    step: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if abs(np.linalg.norm(u) - 1) > 1e-9 or abs(np.linalg.norm(v) - 1) > 1e-9:
            raise ValueError("plane axes must be unit vectors")
        if abs(u @ v) > 1e-9:
            raise ValueError("plane axes must be orthogonal")
        if len(self.extent) != 2 or min(self.extent) < 1:
            raise ValueError("plane extent must be 2 positive integers")
        if not self.step > 0:
            raise ValueError("plane sample step must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "u", tuple(u.tolist()))
        object.__setattr__(self, "v", tuple(v.tolist()))
        object.__setattr__(self, "extent", tuple(int(n) for n in self.extent))
        object.__setattr__(self, "step", float(self.step))

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.u, self.v)

    def points(self) -> np.ndarray:
        """Sample positions, shape (nu, nv, 3)."""
        nu, nv = self.extent
        a = (np.arange(nu) - (nu - 1) / 2.0) * self.step
        b = (np.arange(nv) - (nv - 1) / 2.0) * self.step
        return (np.asarray(self.center)
                + a[:, None, None] * np.asarray(self.u)
                + b[None, :, None] * np.asarray(self.v))


def orthogonal_layout(vol: Volume3D, beam_axis: int = 2, n_planes: int = 2,
                      extent=None, step=None) -> tuple:
    """Planes through the volume centre that all contain the beam axis.

    The first plane is spanned by the first lateral axis and the beam, the
    second by the other lateral axis and the beam. A third plane, if asked
    for, is perpendicular to the beam.
    """
    if n_planes not in (2, 3):
        raise ValueError("n_planes must be 2 or 3")
    eye = np.eye(3)
    lateral = [a for a in range(3) if a != beam_axis]
    axes = [(lateral[0], beam_axis), (lateral[1], beam_axis), (lateral[0], lateral[1])]
    planes = []
    for a, b in axes[:n_planes]:
        ext = extent if extent is not None else (vol.dims[a], vol.dims[b])
        st = step if step is not None else vol.spacing[a]
        planes.append(PlaneSpec(tuple(vol.center), tuple(eye[a]), tuple(eye[b]), ext, st))
    return tuple(planes)


@dataclass(frozen=True, eq=False)
class SliceSet:
    """One simulated 4D frame: orthogonal planes sampled from a volume.

    ``points[k]`` holds the local (untransformed) sample positions of plane
    ``k``, ``values[k]`` the sampled intensities and ``valid[k]`` whether the
    sample fell inside the volume. Invalid samples have value 0 and are
    ignored by the similarity measure.
    """

    planes: tuple
    points: tuple
    values: tuple
    valid: tuple

    def __post_init__(self):
        if len(self.planes) < 2:
            raise ValueError("a frame needs at least 2 planes")
        normals = [p.normal for p in self.planes]
        for i in range(len(normals)):
            for j in range(i + 1, len(normals)):
                if abs(normals[i] @ normals[j]) > 1e-9:
                    raise ValueError("frame planes must be mutually orthogonal")

    def flat(self):
        """Concatenated (points, values, valid) over all planes."""
        pts = np.concatenate([p.reshape(-1, 3) for p in self.points])
        vals = np.concatenate([v.ravel() for v in self.values])
        ok = np.concatenate([m.ravel() for m in self.valid])
        return pts, vals, ok

    @property
    def n_valid(self) -> int:
        return int(sum(int(m.sum()) for m in self.valid))


def extract_slices(vol: Volume3D, T, layout) -> SliceSet:
    """Reslice ``vol`` along ``layout`` moved by rigid transform ``T``.

    Each local sample position ``q`` takes the value ``vol(T q)``.
    """
    points, values, valid = [], [], []
    for plane in layout:
        q = plane.points()
        val, ok = vol.sample(T.apply(q.reshape(-1, 3)))
        points.append(q)
        values.append(val.reshape(q.shape[:-1]))
        valid.append(ok.reshape(q.shape[:-1]))
    return SliceSet(tuple(layout), tuple(points), tuple(values), tuple(valid))


def save_volume(vol: Volume3D, path, dtype: str = "f32", data_file: str | None = None) -> None:
    """Write ``path`` (JSON header) plus a little-endian raw payload next to it."""
    if dtype not in _DTYPES:
        raise UnsupportedDtypeError(f"unsupported dtype {dtype!r}; expected one of {sorted(_DTYPES)}")
    path = os.fspath(path)
    if data_file is None:
        stem = os.path.basename(path)
        stem = stem[:-5] if stem.endswith(".json") else stem
        data_file = stem + ".raw"
    flat = vol.data.ravel(order="F")
    if dtype == "u8":
        payload = np.rint(flat * 255.0).astype(_DTYPES["u8"])
    else:
        payload = flat.astype(_DTYPES["f32"])
    header = {
        "dims": list(vol.dims),
        "spacing_mm": list(vol.spacing),
        "origin_mm": list(vol.origin),
        "dtype": dtype,
        "data_file": data_file,
    }
    with open(path, "w") as fh:
        json.dump(header, fh, indent=2)
    payload.tofile(os.path.join(os.path.dirname(path), data_file))


def _read_header(path) -> dict:
    try:
        with open(path) as fh:
            header = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(header, dict):
        raise MalformedHeaderError(f"{path}: header must be a JSON object")
    for key in ("dims", "spacing_mm", "origin_mm", "dtype", "data_file"):
        if key not in header:
            raise MalformedHeaderError(f"{path}: missing header field {key!r}")
    for key in ("dims", "spacing_mm", "origin_mm"):
        val = header[key]
        if not isinstance(val, list) or len(val) != 3 or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in val):
            raise MalformedHeaderError(f"{path}: {key!r} must be a list of 3 numbers")
    if not all(isinstance(n, int) and n > 0 for n in header["dims"]):
        raise MalformedHeaderError(f"{path}: dims must be positive integers")
    if not all(s > 0 for s in header["spacing_mm"]):
        raise MalformedHeaderError(f"{path}: spacing_mm must be positive")
    if not isinstance(header["data_file"], str) or not header["data_file"]:
        raise MalformedHeaderError(f"{path}: data_file must be a non-empty string")
    return header


def load_raw(path) -> tuple[dict, np.ndarray]:
    """Header dict and undecoded raw payload (in file order)."""
    path = os.fspath(path)
    header = _read_header(path)
    dtype = header["dtype"]
    if dtype not in _DTYPES:
        raise UnsupportedDtypeError(f"{path}: unsupported dtype {dtype!r}")
    raw_path = os.path.join(os.path.dirname(path), header["data_file"])
    payload = np.fromfile(raw_path, dtype=np.uint8)
    itemsize = _DTYPES[dtype].itemsize
    expected = int(np.prod(header["dims"]))
    if payload.size % itemsize or payload.size // itemsize != expected:
        raise SizeMismatchError(
            f"{path}: header declares {expected} voxels, {raw_path} holds "
            f"{payload.size / itemsize:g}")
    return header, payload.view(_DTYPES[dtype])


def load_volume(path) -> Volume3D:
    """Read a volume written by :func:`save_volume`; u8 payloads map to [0, 1]."""
    header, payload = load_raw(path)
    if header["dtype"] == "u8":
        flat = payload.astype(np.float64) / 255.0
    else:
        flat = payload.astype(np.float64)
    data = flat.reshape(header["dims"], order="F")
    return Volume3D(data, tuple(header["spacing_mm"]), tuple(header["origin_mm"]))
