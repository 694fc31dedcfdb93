"""Synthetic ultrasound-like bone phantom with ground truth.

Beams run along +z (shallow at z index 0). Each beam column crosses a bone
surface: soft tissue above it, a bright band of fixed thickness at it, and an
acoustic shadow below it. Soft tissue and shadow carry multiplicative speckle.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .volume import DEFAULT_DIMS, DEFAULT_SPACING, Volume3D

# Asymmetric relief (x_mm, y_mm, sigma_mm, amplitude_mm) placed near the two
# central beam planes so every rigid degree of freedom changes what the
# planes see. Positive amplitude raises the surface towards the probe.
DEFAULT_FEATURES = (
    (6.0, 2.5, 5.25, 3.5),
    (14.0, -3.0, 6.0, -3.0),
    (-9.0, -3.0, 6.75, 3.0),
    (-18.0, 2.0, 5.25, 2.5),
    (2.5, -7.0, 5.25, 3.0),
    (-3.0, -16.0, 6.0, -2.5),
    (-2.0, 10.0, 6.0, 3.5),
    (3.5, 18.0, 5.25, 2.0),
)


class InvalidPhantomSpec(ValueError):
    pass


@dataclass(frozen=True)
class PhantomSpec:
    """Phantom parameters. Lengths in mm unless the name says otherwise.

    ``depth_mm`` is the surface depth below the first voxel plane at the
    lateral centre (None for mid-depth). The surface height above that
    depth is ``tan(tilt) . (x, y) + bump_mm * (1 - r^2 / bump_radius_mm^2)
    + sum of Gaussian features``.
    """

    dims: tuple = DEFAULT_DIMS
    spacing: tuple = DEFAULT_SPACING
    depth_mm: float | None = None
    tilt_deg: tuple = (4.0, -3.0)
    bump_mm: float = 2.0
    bump_radius_mm: float = 25.0
    features: tuple = DEFAULT_FEATURES
    interface_value: float = 0.9
    thickness_vox: int = 3
    tissue_mean: float = 0.35
    shadow_mean: float = 0.05
    speckle_sigma: float = 0.25
    speckle_corr_vox: float = 1.5
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "tilt_deg", tuple(float(a) for a in self.tilt_deg))
        object.__setattr__(self, "features", tuple(tuple(float(x) for x in f) for f in self.features))
        self.validate()

    def validate(self):
        if len(self.dims) != 3 or min(self.dims) < 2:
            raise InvalidPhantomSpec("dims must be 3 integers >= 2")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise InvalidPhantomSpec("spacing must be 3 positive values")
        if not (self.interface_value > self.tissue_mean > self.shadow_mean >= 0):
            raise InvalidPhantomSpec(
                "band ordering violated: need interface_value > tissue_mean > shadow_mean >= 0 "
                f"(got {self.interface_value}, {self.tissue_mean}, {self.shadow_mean})")
        if self.interface_value > 1:
            raise InvalidPhantomSpec("interface_value must be <= 1")
        if len(self.tilt_deg) != 2 or max(abs(a) for a in self.tilt_deg) > 15:
            raise InvalidPhantomSpec("tilt angles must be 2 values within +-15 degrees")
        if self.thickness_vox < 1:
            raise InvalidPhantomSpec("thickness_vox must be >= 1")
        if self.speckle_sigma < 0:
            raise InvalidPhantomSpec("speckle_sigma must be >= 0")
        if self.speckle_corr_vox < 0:
            raise InvalidPhantomSpec("speckle_corr_vox must be >= 0")
        if self.bump_radius_mm <= 0:
            raise InvalidPhantomSpec("bump_radius_mm must be positive")
        for f in self.features:
            if len(f) != 4 or f[2] <= 0:
                raise InvalidPhantomSpec("features are (x_mm, y_mm, sigma_mm>0, amplitude_mm)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["features"] = [list(f) for f in self.features]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def surface_depth(spec: PhantomSpec, x, y):
    """Surface depth (mm below the first voxel plane) at lateral offsets x, y from the centre."""
    nz, dz = spec.dims[2], spec.spacing[2]
    depth = (nz - 1) * dz / 2.0 if spec.depth_mm is None else spec.depth_mm
    tx, ty = np.deg2rad(spec.tilt_deg)
    height = np.tan(tx) * x + np.tan(ty) * y
    height = height + spec.bump_mm * (1.0 - (x ** 2 + y ** 2) / spec.bump_radius_mm ** 2)
    for fx, fy, s, a in spec.features:
        height = height + a * np.exp(-((x - fx) ** 2 + (y - fy) ** 2) / (2 * s * s))
    return depth - height


def speckle(shape, sigma: float, rng, corr_vox: float = 0.0) -> np.ndarray:
    """Unit-mean squared-Gaussian multiplicative noise.

    Standard normal draws are taken in x-fastest voxel order. With
    ``corr_vox > 0`` the field is Gaussian-smoothed with that standard
    deviation (voxels) and rescaled to unit variance, which gives speckle
    grains of a few voxels instead of independent voxels.
    """
    if sigma == 0:
        return np.ones(shape)
    n = rng.standard_normal(int(np.prod(shape))).reshape(shape, order="F")
    if corr_vox > 0:
        n = ndimage.gaussian_filter(n, corr_vox, mode="wrap")
        n /= n.std()
    return (1.0 + sigma * n) ** 2 / (1.0 + sigma ** 2)


def generate(spec: PhantomSpec = PhantomSpec()) -> tuple[Volume3D, np.ndarray]:
    """Render the phantom.

    Returns
    -------
    vol : Volume3D
        Centred on the world origin.
    interface : bool array, shape dims
        Exact set of bright-band voxels.
    """
    nx, ny, nz = spec.dims
    sx, sy, sz = spec.spacing
    x = (np.arange(nx) - (nx - 1) / 2.0) * sx
    y = (np.arange(ny) - (ny - 1) / 2.0) * sy
    depth = surface_depth(spec, x[:, None], y[None, :])
    top = np.rint(depth / sz).astype(int)[:, :, None]
    k = np.arange(nz)[None, None, :]
    above = k < top
    band = (k >= top) & (k < top + spec.thickness_vox)

    rng = np.random.default_rng(spec.seed)
    noise = speckle(spec.dims, spec.speckle_sigma, rng, spec.speckle_corr_vox)
    data = np.where(above, spec.tissue_mean, spec.shadow_mean) * noise
    data = np.where(band, spec.interface_value, data)
    np.clip(data, 0.0, 1.0, out=data)
    return Volume3D(data, spec.spacing), band


def spec_echo(spec: PhantomSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2)
