"""Single-frame rigid registration and warm-started sequence tracking."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from .optimizer import OptimizerError, SimplexConfig, minimize
from .segmentation import RoiMask
from .similarity import MIN_SAMPLES, FrameSimilarity, SimilarityError
from .transform import RigidTransform, error_of, from_params, to_params
from .volume import SliceSet, Volume3D

logger = logging.getLogger(__name__)

NCC_SUCCESS = 0.95
# cost of a candidate whose NCC is undefined; equals 1 - NCC at NCC = -1
WORST_COST = 2.0


class EmptyRoiError(ValueError):
    pass


@dataclass(frozen=True)
class RegistrationConfig:
    simplex: SimplexConfig = SimplexConfig()
    use_roi: bool = True
    min_samples: int = MIN_SAMPLES
    # per-frame wall-time budget in seconds
    time_budget: float | None = None


@dataclass
class RegistrationResult:
    transform: RigidTransform
    ncc: float
    evals: int
    wall_time: float
    converged: bool
    reason: str = ""
    error: str | None = None
    success: bool | None = None
    # transform the search started from
    start: RigidTransform | None = None

    def to_dict(self) -> dict:
        return {"transform": self.transform.to_dict(), "ncc": self.ncc, "evals": self.evals,
                "wall_time": self.wall_time, "converged": self.converged, "reason": self.reason,
                "error": self.error, "success": self.success,
                "start": None if self.start is None else self.start.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RegistrationResult":
        d = dict(d)
        d["transform"] = RigidTransform.from_dict(d["transform"])
        if d.get("start") is not None:
            d["start"] = RigidTransform.from_dict(d["start"])
        return cls(**d)


def write_jsonl(results, path) -> None:
    with open(path, "w") as fh:
        for r in results:
            fh.write(r.to_json() + "\n")


def read_jsonl(path) -> list:
    with open(path) as fh:
        return [RegistrationResult.from_dict(json.loads(line)) for line in fh if line.strip()]


def make_cost(frame: SliceSet, vol: Volume3D, roi: RoiMask | None, center, min_samples=MIN_SAMPLES):
    """``p -> 1 - NCC`` over normalized parameters; undefined NCC scores ``WORST_COST``."""
    sim = FrameSimilarity(frame, vol, roi, min_samples)

    def cost(p):
        try:
            return 1.0 - sim(from_params(p, center)).value
        except SimilarityError:
            return WORST_COST

    return cost


def register_frame(vol: Volume3D, roi: RoiMask | None, frame: SliceSet,
                   init: RigidTransform | None = None,
                   cfg: RegistrationConfig = RegistrationConfig()) -> RegistrationResult:
    """Find the transform maximizing NCC between ``frame`` and ``vol``.

    The search starts at ``init`` (identity about the volume centre by
    default) and minimizes ``1 - NCC`` with the simplex method.
    """
    t0 = time.perf_counter()
    center = tuple(vol.center)
    if init is None:
        init = RigidTransform.identity(center)
    elif not np.allclose(init.center, center):
        init = RigidTransform.from_matrix(init.matrix, center)
    if cfg.use_roi:
        if roi is None or roi.empty:
            raise EmptyRoiError("registration needs a non-empty ROI")
    else:
        roi = None
    simplex = cfg.simplex
    if cfg.time_budget is not None:
        simplex = replace(simplex, max_time=cfg.time_budget)
    cost = make_cost(frame, vol, roi, center, cfg.min_samples)
    opt = minimize(cost, to_params(init), simplex)
    T = from_params(opt.x, center)
    wall = time.perf_counter() - t0
    return RegistrationResult(T, 1.0 - opt.fun, opt.evals, wall,
                              opt.reason in ("x_tol", "f_tol"), opt.reason, start=init)


def is_success(result: RegistrationResult, truth: RigidTransform | None = None) -> bool:
    """With ground truth: NCC > 0.95 and every residual below 1 mm / 1 deg.
    Without: NCC >= 0.95."""
    if result.error is not None or result.reason == "timeout":
        return False
    if truth is None:
        return result.ncc >= NCC_SUCCESS
    err = error_of(truth, result.transform)
    return result.ncc > NCC_SUCCESS and err.max_translation < 1.0 and err.max_angle < 1.0


def track_sequence(vol: Volume3D, roi: RoiMask | None, frames, init: RigidTransform | None = None,
                   cfg: RegistrationConfig = RegistrationConfig(), truths=None,
                   warm_start: bool = True) -> list:
    """Register an ordered sequence of frames.

    Each frame starts from the last successful result (or ``init`` until the
    first success). A failing frame never stops the sequence; its record
    carries the error text and ``success=False``.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("track_sequence needs at least one frame")
    if truths is not None and len(truths) != len(frames):
        raise ValueError("one ground-truth transform per frame is required")
    center = tuple(vol.center)
    start = RigidTransform.identity(center) if init is None else init
    last_good = start
    results = []
    for k, frame in enumerate(frames):
        seed = last_good if warm_start else start
        t0 = time.perf_counter()
        try:
            res = register_frame(vol, roi, frame, seed, cfg)
        except (SimilarityError, OptimizerError, EmptyRoiError) as exc:
            res = RegistrationResult(seed, float("nan"), 0, time.perf_counter() - t0, False,
                                     "error", error=str(exc), start=seed)
        res.success = is_success(res, None if truths is None else truths[k])
        if res.success:
            last_good = res.transform
        logger.info("frame %d: ncc=%.4f success=%s", k, res.ncc, res.success)
        results.append(res)
    return results
