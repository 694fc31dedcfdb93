"""Evaluation protocol: random reference perturbations, registration, error
decomposition, success classification and tabular reports.

Each trial draws a reference transform, reslices the orthogonal frame at it,
registers the frame starting from identity and decomposes
``T_ref^-1 T_reg`` into three translation and three Euler residuals.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .optimizer import OptimizerError
from .registration import (NCC_SUCCESS, EmptyRoiError, RegistrationConfig, register_frame)
from .segmentation import RoiMask
from .similarity import SimilarityError
from .transform import RigidTransform, error_of, from_params, to_params
from .volume import Volume3D, extract_slices, orthogonal_layout

logger = logging.getLogger(__name__)

TRANSLATION_SUCCESS_MM = 1.0
ANGLE_SUCCESS_DEG = 1.0

TRIAL_COLUMNS = (
    ["trial_id"]
    + [f"ref_{k}" for k in ("tx", "ty", "tz", "rx", "ry", "rz")]
    + [f"reg_{k}" for k in ("tx", "ty", "tz", "rx", "ry", "rz")]
    + [f"err_{k}" for k in ("tx", "ty", "tz", "rx", "ry", "rz")]
    + ["max_trans_err_mm", "max_angle_err_deg", "trans_err_norm_mm", "geodesic_err_deg",
       "ncc", "evals", "reason", "success", "wall_time_s"]
)
SUMMARY_COLUMNS = ["data_set", "success_pct", "total_time_s", "n_trials", "mean_time_s"]
CORRELATION_COLUMNS = ["trial_id", "max_residual", "max_trans_err_mm", "max_angle_err_deg", "ncc", "success"]


@dataclass(frozen=True)
class PerturbationRanges:
    """Half-widths of the uniform reference perturbation, per axis.

    The beam (probe) axis gets the smaller translation limit; rotation
    about the x axis gets the smaller angular limit.
    """

    translation_mm: tuple = (10.0, 10.0, 5.0)
    rotation_deg: tuple = (6.0, 12.0, 12.0)
    beam_axis: int = 2

    def __post_init__(self):
        t = tuple(float(x) for x in self.translation_mm)
        r = tuple(float(x) for x in self.rotation_deg)
        if len(t) != 3 or len(r) != 3:
            raise ValueError("ranges need 3 translation and 3 rotation limits")
        if min(t + r) < 0:
            raise ValueError("range limits must be non-negative")
        lateral = [t[a] for a in range(3) if a != self.beam_axis]
        if t[self.beam_axis] > min(lateral):
            raise ValueError("the beam-axis translation limit must not exceed the lateral limits")
        object.__setattr__(self, "translation_mm", t)
        object.__setattr__(self, "rotation_deg", r)

    @property
    def limits(self) -> np.ndarray:
        return np.array(self.translation_mm + self.rotation_deg)

    def scaled(self, factor: float) -> "PerturbationRanges":
        return PerturbationRanges(tuple(factor * x for x in self.translation_mm),
                                  tuple(factor * x for x in self.rotation_deg), self.beam_axis)


def sample_reference_transform(ranges: PerturbationRanges, rng, center=(0.0, 0.0, 0.0)) -> RigidTransform:
    """Each parameter uniform in ``[-limit, limit]``, drawn independently."""
    lim = ranges.limits
    return from_params(rng.uniform(-lim, lim), center)


def trial_success(ncc: float, max_translation: float, max_angle: float) -> bool:
    """NCC over 0.95 and every residual below 1 mm / 1 degree (all strict)."""
    return bool(ncc > NCC_SUCCESS and max_translation < TRANSLATION_SUCCESS_MM
                and max_angle < ANGLE_SUCCESS_DEG)


@dataclass
class TrialRecord:
    trial_id: int
    T_reference: RigidTransform
    T_registration: RigidTransform
    translation_residuals: tuple
    angle_residuals: tuple
    ncc: float
    evals: int
    wall_time: float
    reason: str = ""
    geodesic_deg: float = float("nan")
    success: bool = field(init=False)

    def __post_init__(self):
        self.success = trial_success(self.ncc, self.max_translation, self.max_angle)

    @property
    def max_translation(self) -> float:
        return max(abs(x) for x in self.translation_residuals)

    @property
    def max_angle(self) -> float:
        return max(abs(x) for x in self.angle_residuals)

    @property
    def translation_norm(self) -> float:
        return float(np.linalg.norm(self.translation_residuals))

    def row(self) -> list:
        return ([self.trial_id] + list(to_params(self.T_reference)) + list(to_params(self.T_registration))
                + list(self.translation_residuals) + list(self.angle_residuals)
                + [self.max_translation, self.max_angle, self.translation_norm, self.geodesic_deg,
                   self.ncc, self.evals, self.reason, int(self.success), self.wall_time])


def run_trial(vol: Volume3D, roi: RoiMask | None, ranges: PerturbationRanges, rng,
              cfg: RegistrationConfig = RegistrationConfig(), layout=None, trial_id: int = 0,
              init: RigidTransform | None = None) -> TrialRecord:
    """One draw-reslice-register-compare cycle. Registration errors give a failed record."""
    center = tuple(vol.center)
    layout = orthogonal_layout(vol) if layout is None else layout
    T_ref = sample_reference_transform(ranges, rng, center)
    frame = extract_slices(vol, T_ref, layout)
    init = RigidTransform.identity(center) if init is None else init
    t0 = time.perf_counter()
    try:
        res = register_frame(vol, roi, frame, init, cfg)
        T_reg, ncc, evals, reason = res.transform, res.ncc, res.evals, res.reason
    except (SimilarityError, OptimizerError, EmptyRoiError) as exc:
        logger.warning("trial %d failed: %s", trial_id, exc)
        T_reg, ncc, evals, reason = init, float("nan"), 0, "error"
    wall = time.perf_counter() - t0
    err = error_of(T_ref, T_reg)
    return TrialRecord(trial_id, T_ref, T_reg, err.translation, err.angles, ncc, evals, wall,
                       reason, err.geodesic_deg)


def trial_rng(seed: int, trial_id: int):
    """Per-trial stream, independent of scheduling order."""
    return np.random.default_rng([seed, trial_id])


@dataclass
class DatasetReport:
    label: str
    records: list

    @property
    def n_trials(self) -> int:
        return len(self.records)

    @property
    def successes(self) -> int:
        return sum(r.success for r in self.records)

    @property
    def success_pct(self) -> float:
        return 100.0 * self.successes / self.n_trials

    @property
    def total_time(self) -> float:
        return float(sum(r.wall_time for r in self.records))

    @property
    def mean_time(self) -> float:
        return self.total_time / self.n_trials

    def summary_row(self) -> list:
        return [self.label, self.success_pct, self.total_time, self.n_trials, self.mean_time]


_WORKER = {}


def _init_worker(vol, roi, ranges, cfg, layout, seed):
    _WORKER.update(vol=vol, roi=roi, ranges=ranges, cfg=cfg, layout=layout, seed=seed)


def _worker_trial(trial_id):
    w = _WORKER
    return run_trial(w["vol"], w["roi"], w["ranges"], trial_rng(w["seed"], trial_id),
                     w["cfg"], w["layout"], trial_id)


def run_dataset(vol: Volume3D, roi: RoiMask | None, n_trials: int = 60,
                ranges: PerturbationRanges = PerturbationRanges(), seed: int = 0,
                cfg: RegistrationConfig = RegistrationConfig(), layout=None,
                label: str = "1", workers: int = 1) -> DatasetReport:
    """Run ``n_trials`` independent trials; results depend only on (seed, config)."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    layout = orthogonal_layout(vol) if layout is None else layout
    ids = range(n_trials)
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(vol, roi, ranges, cfg, layout, seed)) as pool:
            records = list(pool.map(_worker_trial, ids))
    else:
        records = []
        for i in ids:
            rec = run_trial(vol, roi, ranges, trial_rng(seed, i), cfg, layout, i)
            logger.info("trial %d: ncc=%.4f max_t=%.3f max_a=%.3f success=%s", i, rec.ncc,
                        rec.max_translation, rec.max_angle, rec.success)
            records.append(rec)
    return DatasetReport(label, records)


@dataclass
class CorrelationTable:
    rows: list
    # share of sub-1 mm / 1 deg trials whose NCC lies in [0.95, 1]
    accurate_high_ncc_fraction: float
    n_accurate: int


def export_correlation(records) -> CorrelationTable:
    """One (residual, NCC) row per trial.

    ``max_residual`` is the largest of the six absolute residuals in
    normalized units (1 mm = 1 degree = 1 unit).
    """
    records = list(records)
    if not records:
        raise ValueError("export_correlation needs at least one record")
    rows = []
    n_acc = n_acc_high = 0
    for r in records:
        rows.append([r.trial_id, max(r.max_translation, r.max_angle), r.max_translation,
                     r.max_angle, r.ncc, int(r.success)])
        if r.max_translation < TRANSLATION_SUCCESS_MM and r.max_angle < ANGLE_SUCCESS_DEG:
            n_acc += 1
            n_acc_high += NCC_SUCCESS <= r.ncc <= 1.0
    frac = n_acc_high / n_acc if n_acc else float("nan")
    return CorrelationTable(rows, frac, n_acc)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        # no negative zero in the output
        return f"{x:.6g}" if x != 0 else "0"
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_trials_csv(report: DatasetReport, path) -> None:
    _write_csv(path, TRIAL_COLUMNS, [r.row() for r in report.records])


def write_summary_csv(reports, path) -> None:
    _write_csv(path, SUMMARY_COLUMNS, [rep.summary_row() for rep in reports])


def write_correlation_csv(table: CorrelationTable, path) -> None:
    _write_csv(path, CORRELATION_COLUMNS, table.rows)


def write_report(report: DatasetReport, outdir) -> dict:
    """Write trials.csv, summary.csv and correlation.csv into ``outdir``."""
    os.makedirs(outdir, exist_ok=True)
    paths = {name: os.path.join(outdir, f"{name}.csv") for name in ("trials", "summary", "correlation")}
    write_trials_csv(report, paths["trials"])
    write_summary_csv([report], paths["summary"])
    write_correlation_csv(export_correlation(report.records), paths["correlation"])
    return paths


def read_summary_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_correlation_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def format_table(summary_rows) -> str:
    """Aligned text table with the columns Data Sets / Success (%) / Total Time (s)."""
    header = ("Data Sets", "Success (%)", "Total Time (s)")
    body = [(str(r["data_set"]), f"{float(r['success_pct']):.1f}", f"{float(r['total_time_s']):.0f}")
            for r in summary_rows]
    widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h) for i, h in enumerate(header)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths))
    out = [line, "-" * len(line)]
    out += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in body]
    return "\n".join(out)
