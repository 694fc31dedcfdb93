"""Normalized cross-correlation between a frame and a reference volume."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .segmentation import RoiMask
from .transform import RigidTransform
from ._kernels import resample_gated
from .volume import SliceSet, Volume3D

MIN_SAMPLES = 100
# deviation sums below this count as zero variance
VARIANCE_EPS = 1e-12


class SimilarityError(ValueError):
    pass


class InsufficientOverlapError(SimilarityError):
    pass


class ZeroVarianceError(SimilarityError):
    pass


def ncc_values(a, b) -> float:
    """Pearson correlation of two equally long 1-D samples, two-pass."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da = a - a.mean()
    db = b - b.mean()
    saa = np.dot(da, da)
    sbb = np.dot(db, db)
    if saa < VARIANCE_EPS or sbb < VARIANCE_EPS:
        raise ZeroVarianceError("a signal is constant over the included samples")
    r = np.dot(da, db) / np.sqrt(saa * sbb)
    return float(min(1.0, max(-1.0, r)))


@dataclass(frozen=True)
class NccResult:
    value: float
    sample_count: int
    overlap_fraction: float


class FrameSimilarity:
    """NCC of one frame against a volume, reusable across candidate transforms.

    For each valid frame sample ``i`` with local position ``q_i`` the
    reference is resampled at ``T q_i``; the sample is kept if that point is
    inside the volume and, with an ROI, its nearest voxel is in the ROI.
    """

    def __init__(self, frame: SliceSet, vol: Volume3D, roi: RoiMask | None = None,
                 min_samples: int = MIN_SAMPLES):
        if roi is not None and roi.dims != vol.dims:
            raise ValueError(f"ROI dims {roi.dims} do not match volume dims {vol.dims}")
        pts, vals, ok = frame.flat()
        if not ok.any():
            raise InsufficientOverlapError("frame has no valid sample")
        self.points = np.ascontiguousarray(pts[ok])
        self.values = vals[ok]
        self.vol = vol
        self.roi_flat = (np.zeros(1, dtype=np.bool_) if roi is None
                         else np.ascontiguousarray(roi.bits.ravel(order="F")))
        self.use_roi = roi is not None
        self.min_samples = min_samples
        self._args = (np.asarray(vol.origin), np.asarray(vol.spacing),
                      np.ascontiguousarray(vol.data.ravel(order="F")), np.asarray(vol.dims, dtype=np.int64))
        self._b = np.empty(len(self.values))
        self._keep = np.empty(len(self.values), dtype=np.bool_)

    def resample(self, T: RigidTransform):
        """Reference values under ``T`` and the inclusion mask (internal buffers, overwritten per call)."""
        origin, spacing, flat, dims = self._args
        resample_gated(self.points, T.matrix, origin, spacing, flat, dims,
                       self.roi_flat, self.use_roi, self._b, self._keep)
        return self._b, self._keep

    def __call__(self, T: RigidTransform) -> NccResult:
        b, keep = self.resample(T)
        n = int(keep.sum())
        if n < self.min_samples:
            raise InsufficientOverlapError(f"{n} included samples, need at least {self.min_samples}")
        value = ncc_values(self.values[keep], b[keep])
        return NccResult(value, n, n / self.values.size)


def ncc(frame: SliceSet, vol: Volume3D, roi: RoiMask | None, T: RigidTransform,
        min_samples: int = MIN_SAMPLES) -> NccResult:
    """NCC between frame samples and the reference resampled under ``T``.

    Raises
    ------
    InsufficientOverlapError
        Fewer than ``min_samples`` samples survive bounds and ROI gating.
    ZeroVarianceError
        Either signal is constant over the included samples.
    """
    return FrameSimilarity(frame, vol, roi, min_samples)(T)
