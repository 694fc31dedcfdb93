"""Coarse bone-interface segmentation.

Pipeline (one beam axis, default z):

1. Otsu threshold of the raw intensities (256-bin histogram).
2. Depth-oriented Sobel filter; only bright-above-dark edges are kept.
3. Box averaging of the edge response and of the intensities.
4. Fusion: smoothed intensity above the Otsu threshold AND interface
   membership, i.e. a strict local maximum of the smoothed intensity along
   the beam with a positive smoothed edge response there.
5. Dilation of the fused mask.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .volume import Volume3D

logger = logging.getLogger(__name__)

N_BINS = 256
_AXES = {"x": 0, "y": 1, "z": 2}


class DegenerateHistogramError(ValueError):
    """All voxels fall into a single histogram bin."""


def _axis(beam_axis) -> int:
    if isinstance(beam_axis, str):
        return _AXES[beam_axis.lower()]
    if beam_axis not in (0, 1, 2):
        raise ValueError(f"beam axis must be one of x, y, z or 0, 1, 2; got {beam_axis!r}")
    return int(beam_axis)


def _as_array(vol) -> np.ndarray:
    return vol.data if isinstance(vol, Volume3D) else np.asarray(vol, dtype=float)


def histogram_bins(values) -> np.ndarray:
    """Bin index in [0, 255] of each intensity in [0, 1]."""
    return np.clip(np.floor(np.asarray(values, dtype=float) * N_BINS), 0, N_BINS - 1).astype(np.intp)


def otsu_threshold(vol) -> float:
    """Otsu level on a 256-bin histogram of [0, 1] intensities.

    Candidate level ``k / 256`` splits the bins into ``[0, k)`` and
    ``[k, 256)``. The between-class variance is compared exactly (rational
    arithmetic), and the lowest maximizing ``k`` wins.
    """
    counts = np.bincount(histogram_bins(_as_array(vol)).ravel(), minlength=N_BINS)
    if np.count_nonzero(counts) < 2:
        raise DegenerateHistogramError("all intensities fall in one histogram bin; no threshold exists")
    counts = [int(c) for c in counts]
    total = sum(counts)
    weighted_total = sum(i * c for i, c in enumerate(counts))
    best_k, best = None, None
    c0 = s0 = 0
    for k in range(1, N_BINS):
        c0 += counts[k - 1]
        s0 += (k - 1) * counts[k - 1]
        c1, s1 = total - c0, weighted_total - s0
        if c0 == 0 or c1 == 0:
            continue
        # w0 w1 (mu1 - mu0)^2 up to the constant factor 1 / total^2
        score = Fraction((s1 * c0 - s0 * c1) ** 2, c0 * c1)
        if best is None or score > best:
            best_k, best = k, score
    return best_k / N_BINS


def sobel_depth(vol, beam_axis="z", lateral_axis=None) -> np.ndarray:
    """Bright-above-dark edge strength along the beam.

    A 3x3 Sobel kernel is applied in each plane spanned by the beam and one
    lateral axis: central difference ``(I[d-1] - I[d+1]) / 2`` along the beam,
    ``[1, 2, 1] / 4`` smoothing across it, edge replication at borders.
    The result is clipped at zero, so a unit step from bright (shallow) to
    dark (deep) gives 0.5 on both voxels next to the step.
    """
    data = _as_array(vol)
    beam = _axis(beam_axis)
    lateral = min(a for a in range(3) if a != beam) if lateral_axis is None else _axis(lateral_axis)
    if lateral == beam:
        raise ValueError("lateral axis must differ from the beam axis")
    g = ndimage.correlate1d(data, [0.5, 0.0, -0.5], axis=beam, mode="nearest")
    g = ndimage.correlate1d(g, [0.25, 0.5, 0.25], axis=lateral, mode="nearest")
    return np.maximum(g, 0.0)


def mean_filter(vol, radius: int = 1) -> np.ndarray:
    """Box average over the (2r+1)^3 neighbourhood, edge replication."""
    if radius < 1:
        raise ValueError("mean filter radius must be >= 1")
    return ndimage.uniform_filter(_as_array(vol), size=2 * radius + 1, mode="nearest")


def beam_local_maxima(vol, beam_axis="z") -> np.ndarray:
    """Voxels strictly brighter than both beam neighbours.

    Boundary voxels are compared against their single neighbour; plateaus
    are never marked.
    """
    data = np.moveaxis(_as_array(vol), _axis(beam_axis), -1)
    out = np.zeros(data.shape, dtype=bool)
    n = data.shape[-1]
    if n == 1:
        return np.moveaxis(out, -1, _axis(beam_axis))
    gt_prev = data[..., 1:] > data[..., :-1]
    gt_next = data[..., :-1] > data[..., 1:]
    out[..., 0] = gt_next[..., 0]
    out[..., -1] = gt_prev[..., -1]
    out[..., 1:-1] = gt_prev[..., :-1] & gt_next[..., 1:]
    return np.moveaxis(out, -1, _axis(beam_axis))


def dilate(mask, radius: int) -> np.ndarray:
    """Dilate ``radius`` times with the 6-connected unit ball."""
    mask = np.asarray(mask, dtype=bool)
    if radius <= 0:
        return mask.copy()
    return ndimage.binary_dilation(mask, ndimage.generate_binary_structure(3, 1), iterations=radius)


@dataclass(frozen=True, eq=False)
class RoiMask:
    """Boolean region of interest on a volume grid; ``empty`` flags a fusion with no survivor."""

    bits: np.ndarray
    empty: bool = False

    def __post_init__(self):
        bits = np.asfortranarray(self.bits, dtype=bool)
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "empty", bool(self.empty or not bits.any()))

    @property
    def dims(self) -> tuple:
        return tuple(self.bits.shape)

    @property
    def fraction(self) -> float:
        return float(self.bits.mean())

    @classmethod
    def full(cls, dims) -> "RoiMask":
        return cls(np.ones(dims, dtype=bool))

    def as_volume(self, like: Volume3D) -> Volume3D:
        return like.with_data(self.bits.astype(float))


def fuse_and_dilate(smoothed, threshold: float, maxima, dilation_radius: int = 16) -> RoiMask:
    """``dilate((smoothed > threshold) & maxima)``; the result is flagged empty if fusion kills everything."""
    smoothed = _as_array(smoothed)
    maxima = np.asarray(maxima, dtype=bool)
    if smoothed.shape != maxima.shape:
        raise ValueError(f"shape mismatch: {smoothed.shape} vs {maxima.shape}")
    fused = (smoothed > threshold) & maxima
    if not fused.any():
        logger.warning("coarse segmentation selected no voxel")
        return RoiMask(fused, empty=True)
    return RoiMask(dilate(fused, dilation_radius))


@dataclass(frozen=True)
class SegmentationConfig:
    beam_axis: str = "z"
    mean_radius: int = 1
    # the ROI margin bounds the capture range of the registration
    dilation_radius: int = 16
    # "sobel_first": average the Sobel response; "smooth_first": Sobel of the averaged image
    order: str = "sobel_first"

    def __post_init__(self):
        if self.order not in ("sobel_first", "smooth_first"):
            raise ValueError(f"unknown pipeline order {self.order!r}")
        if self.mean_radius < 1 or self.dilation_radius < 0:
            raise ValueError("mean_radius must be >= 1 and dilation_radius >= 0")


def segment_roi(vol: Volume3D, config: SegmentationConfig = SegmentationConfig()) -> RoiMask:
    """Run the full coarse segmentation pipeline on ``vol``."""
    threshold = otsu_threshold(vol)
    smoothed = mean_filter(vol, config.mean_radius)
    if config.order == "sobel_first":
        edges = mean_filter(sobel_depth(vol, config.beam_axis), config.mean_radius)
    else:
        edges = sobel_depth(smoothed, config.beam_axis)
    # a flat step gives a two-voxel plateau in the edge response, so the
    # beam maximum is taken on the smoothed intensity and the edge only gates
    maxima = beam_local_maxima(smoothed, config.beam_axis) & (edges > 0)
    roi = fuse_and_dilate(smoothed, threshold, maxima, config.dilation_radius)
    logger.info("segmentation: otsu=%.4f selected=%.4f%%", threshold, 100 * roi.fraction)
    return roi
