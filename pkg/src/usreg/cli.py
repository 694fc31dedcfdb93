"""Batch command-line front end.

Every subcommand writes ``config.json`` (the effective configuration) into its
output directory. Values come from built-in defaults, then ``--config FILE``
(a JSON object keyed by the option names below, with dashes as
underscores), then explicit flags. ``USREG_OUT`` sets the default output
directory.

Exit codes: 0 done, 2 usage error, 3 degenerate histogram, 4 missing input,
5 dimension mismatch, 6 invalid parameters, 7 unreadable volume file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import evaluation as ev
from .optimizer import SimplexConfig
from .phantom import InvalidPhantomSpec, PhantomSpec, generate
from .registration import RegistrationConfig, is_success, register_frame, track_sequence, write_jsonl
from .segmentation import DegenerateHistogramError, RoiMask, SegmentationConfig, segment_roi
from .transform import RigidTransform, error_of, from_params
from .volume import VolumeIOError, extract_slices, load_volume, orthogonal_layout, save_volume

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_MISSING, EXIT_DIMS, EXIT_INVALID, EXIT_IO = 0, 2, 3, 4, 5, 6, 7

DEFAULTS = {
    "out": None,
    "seed": 42,
    # phantom
    "dims": None,
    "spacing": 0.28,
    "speckle_sigma": 0.25,
    "speckle_corr": 1.5,
    "interface_value": 0.9,
    "tissue_mean": 0.35,
    "shadow_mean": 0.05,
    "thickness": 3,
    # segmentation
    "beam_axis": "z",
    "mean_radius": 1,
    "dilate": 16,
    "order": "sobel_first",
    # optimizer / registration
    "simplex_size": 4.0,
    "x_tol": 0.01,
    "f_tol": 1e-5,
    "max_evals": 2000,
    "restart": False,
    "no_roi": False,
    "time_budget": None,
    # inputs
    "volume": None,
    "roi": None,
    "reference": None,
    "init": None,
    "transforms": None,
    "frames": 5,
    "drift": "1,0,0,0,0,0",
    "cold": False,
    # evaluation
    "trials": 60,
    "range_scale": 1.0,
    "translation_range": "10,10,5",
    "rotation_range": "6,12,12",
    "workers": 1,
    "label": "1",
    "dirs": None,
}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _floats(text, n=None, name="value"):
    try:
        vals = [float(x) for x in str(text).split(",")]
    except ValueError:
        raise CliError(EXIT_USAGE, f"{name}: expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise CliError(EXIT_USAGE, f"{name}: expected {n} numbers, got {len(vals)}")
    return vals


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--out", default=S, help="output directory (default $USREG_OUT or .)")
    common.add_argument("--seed", type=int, default=S, help="the single source of randomness")
    common.add_argument("-v", "--verbose", action="store_true")

    phantom = argparse.ArgumentParser(add_help=False)
    phantom.add_argument("--dims", type=_positive_int, nargs="+", default=S, help="1 or 3 sizes")
    phantom.add_argument("--spacing", type=float, default=S)
    phantom.add_argument("--speckle-sigma", type=float, default=S)
    phantom.add_argument("--speckle-corr", type=float, default=S, help="speckle grain size (voxels)")
    phantom.add_argument("--interface-value", type=float, default=S)
    phantom.add_argument("--tissue-mean", type=float, default=S)
    phantom.add_argument("--shadow-mean", type=float, default=S)
    phantom.add_argument("--thickness", type=int, default=S)

    seg = argparse.ArgumentParser(add_help=False)
    seg.add_argument("--beam-axis", choices=["x", "y", "z"], default=S)
    seg.add_argument("--mean-radius", type=int, default=S)
    seg.add_argument("--dilate", type=int, default=S, help="ROI dilation radius (voxels)")
    seg.add_argument("--order", choices=["sobel_first", "smooth_first"], default=S)

    reg = argparse.ArgumentParser(add_help=False)
    reg.add_argument("--volume", default=S, help="volume header (.json)")
    reg.add_argument("--roi", default=S, help="ROI header (.json)")
    reg.add_argument("--simplex-size", type=float, default=S)
    reg.add_argument("--x-tol", type=float, default=S)
    reg.add_argument("--f-tol", type=float, default=S)
    reg.add_argument("--max-evals", type=int, default=S)
    reg.add_argument("--restart", action="store_true", default=S)
    reg.add_argument("--no-roi", action="store_true", default=S)
    reg.add_argument("--time-budget", type=float, default=S, help="seconds per frame")

    p = argparse.ArgumentParser(prog="usreg", description="3D/4D ultrasound bone registration toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("phantom", parents=[common, phantom], help="generate a synthetic phantom")
    s = sub.add_parser("segment", parents=[common, seg], help="coarse ROI segmentation")
    s.add_argument("--volume", default=S)
    s = sub.add_parser("register", parents=[common, reg], help="register one simulated frame")
    s.add_argument("--reference", default=S, help="tx,ty,tz,rx,ry,rz the frame is resliced at")
    s.add_argument("--init", default=S, help="starting tx,ty,tz,rx,ry,rz")
    s = sub.add_parser("track", parents=[common, reg], help="register a simulated frame sequence")
    s.add_argument("--transforms", default=S, help="JSON-lines file of frame transforms")
    s.add_argument("--frames", type=_positive_int, default=S)
    s.add_argument("--drift", default=S, help="per-frame parameter increment")
    s.add_argument("--cold", action="store_true", default=S, help="disable warm start")
    s = sub.add_parser("evaluate", parents=[common, phantom, seg, reg], help="run the evaluation protocol")
    s.add_argument("--trials", type=_positive_int, default=S)
    s.add_argument("--range-scale", type=float, default=S)
    s.add_argument("--translation-range", default=S)
    s.add_argument("--rotation-range", default=S)
    s.add_argument("--workers", type=_positive_int, default=S)
    s.add_argument("--label", default=S)
    s = sub.add_parser("report", parents=[common], help="print a results table")
    s.add_argument("dirs", nargs="*", default=S, help="evaluation output directories")
    return p


def effective_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                from_file = json.load(fh)
        except FileNotFoundError:
            raise CliError(EXIT_MISSING, f"config file not found: {args.config}")
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_USAGE, f"config file is not valid JSON: {exc}")
        unknown = set(from_file) - set(DEFAULTS) - {"command"}
        if unknown:
            raise CliError(EXIT_USAGE, f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in from_file.items() if k != "command"})
    for k, v in vars(args).items():
        if k in DEFAULTS:
            cfg[k] = v
    if cfg["out"] is None:
        cfg["out"] = os.environ.get("USREG_OUT", ".")
    cfg["command"] = args.command
    return cfg


def _echo_config(cfg, outdir):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)


def _phantom_spec(cfg) -> PhantomSpec:
    kw = {}
    if cfg["dims"] is not None:
        dims = list(cfg["dims"]) if isinstance(cfg["dims"], (list, tuple)) else [cfg["dims"]]
        if len(dims) == 1:
            dims = dims * 3
        if len(dims) != 3:
            raise CliError(EXIT_USAGE, "--dims takes 1 or 3 values")
        kw["dims"] = tuple(dims)
    return PhantomSpec(spacing=(cfg["spacing"],) * 3, speckle_sigma=cfg["speckle_sigma"],
                       speckle_corr_vox=cfg["speckle_corr"], interface_value=cfg["interface_value"],
                       tissue_mean=cfg["tissue_mean"], shadow_mean=cfg["shadow_mean"],
                       thickness_vox=cfg["thickness"], seed=cfg["seed"], **kw)


def _seg_config(cfg) -> SegmentationConfig:
    return SegmentationConfig(cfg["beam_axis"], cfg["mean_radius"], cfg["dilate"], cfg["order"])


def _reg_config(cfg) -> RegistrationConfig:
    simplex = SimplexConfig(initial_size_units=cfg["simplex_size"], x_tol=cfg["x_tol"], f_tol=cfg["f_tol"],
                            max_evals=cfg["max_evals"], restart=bool(cfg["restart"]))
    return RegistrationConfig(simplex, use_roi=not cfg["no_roi"], time_budget=cfg["time_budget"])


def _load(path, what):
    if path is None:
        raise CliError(EXIT_MISSING, f"--{what} is required")
    if not os.path.exists(path):
        raise CliError(EXIT_MISSING, f"{what} file not found: {path}")
    try:
        return load_volume(path)
    except VolumeIOError as exc:
        raise CliError(EXIT_IO, str(exc))
    except ValueError as exc:
        raise CliError(EXIT_IO, f"{path}: {exc}")


def _load_inputs(cfg, need_roi=True):
    vol = _load(cfg["volume"], "volume")
    roi = None
    if need_roi and not cfg["no_roi"]:
        mask = _load(cfg["roi"], "roi")
        if mask.dims != vol.dims:
            raise CliError(EXIT_DIMS, f"ROI dims {mask.dims} do not match volume dims {vol.dims}")
        roi = RoiMask(mask.data > 0.5)
    return vol, roi


def cmd_phantom(cfg):
    out = cfg["out"]
    spec = _phantom_spec(cfg)
    vol, truth = generate(spec)
    _echo_config(cfg, out)
    save_volume(vol, os.path.join(out, "volume.json"), dtype="f32")
    save_volume(vol.with_data(truth.astype(float)), os.path.join(out, "truth.json"), dtype="u8")
    with open(os.path.join(out, "phantom.json"), "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
    print(f"phantom {vol.dims} written to {out} ({int(truth.sum())} interface voxels)")


def cmd_segment(cfg):
    vol = _load(cfg["volume"], "volume")
    roi = segment_roi(vol, _seg_config(cfg))
    out = cfg["out"]
    _echo_config(cfg, out)
    save_volume(roi.as_volume(vol), os.path.join(out, "roi.json"), dtype="u8")
    stats = {"selected_fraction": roi.fraction, "selected_voxels": int(roi.bits.sum()), "empty": roi.empty}
    with open(os.path.join(out, "roi_stats.json"), "w") as fh:
        json.dump(stats, fh, indent=2)
    print(f"selected {stats['selected_voxels']} voxels ({100 * roi.fraction:.2f}%)"
          + (" -- EMPTY" if roi.empty else ""))


def _transform_arg(text, center, name):
    if text is None:
        return RigidTransform.identity(center)
    return from_params(_floats(text, 6, name), center)


def cmd_register(cfg):
    vol, roi = _load_inputs(cfg)
    center = tuple(vol.center)
    T_ref = _transform_arg(cfg["reference"], center, "--reference")
    init = _transform_arg(cfg["init"], center, "--init")
    frame = extract_slices(vol, T_ref, orthogonal_layout(vol))
    res = register_frame(vol, roi, frame, init, _reg_config(cfg))
    res.success = is_success(res, T_ref)
    out = cfg["out"]
    _echo_config(cfg, out)
    write_jsonl([res], os.path.join(out, "register.jsonl"))
    err = error_of(T_ref, res.transform)
    print(f"ncc={res.ncc:.4f} max_err={err.max_translation:.3f} mm / {err.max_angle:.3f} deg "
          f"evals={res.evals} success={res.success}")


def cmd_track(cfg):
    vol, roi = _load_inputs(cfg)
    center = tuple(vol.center)
    if cfg["transforms"]:
        with open(cfg["transforms"]) as fh:
            truths = [RigidTransform.from_dict(json.loads(line)) for line in fh if line.strip()]
        truths = [RigidTransform.from_matrix(T.matrix, center) for T in truths]
    else:
        drift = np.array(_floats(cfg["drift"], 6, "--drift"))
        truths = [from_params(k * drift, center) for k in range(cfg["frames"])]
    layout = orthogonal_layout(vol)
    frames = [extract_slices(vol, T, layout) for T in truths]
    results = track_sequence(vol, roi, frames, None, _reg_config(cfg), truths, warm_start=not cfg["cold"])
    out = cfg["out"]
    _echo_config(cfg, out)
    write_jsonl(results, os.path.join(out, "track.jsonl"))
    print(f"{sum(bool(r.success) for r in results)}/{len(results)} frames registered successfully")


def cmd_evaluate(cfg):
    if cfg["trials"] < 1:
        raise CliError(EXIT_USAGE, "--trials must be >= 1")
    if cfg["volume"]:
        vol = _load(cfg["volume"], "volume")
    else:
        vol, _ = generate(_phantom_spec(cfg))
    if cfg["no_roi"]:
        roi = None
    elif cfg["roi"]:
        mask = _load(cfg["roi"], "roi")
        if mask.dims != vol.dims:
            raise CliError(EXIT_DIMS, f"ROI dims {mask.dims} do not match volume dims {vol.dims}")
        roi = RoiMask(mask.data > 0.5)
    else:
        roi = segment_roi(vol, _seg_config(cfg))
    ranges = ev.PerturbationRanges(tuple(_floats(cfg["translation_range"], 3, "--translation-range")),
                                   tuple(_floats(cfg["rotation_range"], 3, "--rotation-range")))
    ranges = ranges.scaled(cfg["range_scale"])
    report = ev.run_dataset(vol, roi, cfg["trials"], ranges, cfg["seed"], _reg_config(cfg),
                            label=str(cfg["label"]), workers=cfg["workers"])
    out = cfg["out"]
    _echo_config(cfg, out)
    ev.write_report(report, out)
    print(f"data set {report.label}: success {report.success_pct:.1f}% over {report.n_trials} trials, "
          f"total time {report.total_time:.1f} s")


def cmd_report(cfg):
    dirs = cfg["dirs"] or [cfg["out"]]
    rows, corr = [], []
    for d in dirs:
        path = os.path.join(d, "summary.csv")
        if not os.path.exists(path):
            raise CliError(EXIT_MISSING, f"no summary.csv in {d}")
        rows += ev.read_summary_csv(path)
        cpath = os.path.join(d, "correlation.csv")
        if os.path.exists(cpath):
            corr += ev.read_correlation_csv(cpath)
    print(ev.format_table(rows))
    for r in rows:
        print(f"Data set {r['data_set']}: Success (%) {float(r['success_pct']):.1f}")
    acc = [r for r in corr if float(r["max_trans_err_mm"]) < 1 and float(r["max_angle_err_deg"]) < 1]
    if acc:
        high = sum(0.95 <= float(r["ncc"]) <= 1 for r in acc)
        print(f"NCC in [0.95, 1] for {high}/{len(acc)} trials with errors below 1 mm / 1 deg "
              f"({100 * high / len(acc):.1f}%)")
    elif corr:
        print("no trial with errors below 1 mm / 1 deg")


COMMANDS = {"phantom": cmd_phantom, "segment": cmd_segment, "register": cmd_register,
            "track": cmd_track, "evaluate": cmd_evaluate, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(args)
        COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"usreg {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except DegenerateHistogramError as exc:
        print(f"usreg {args.command}: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except InvalidPhantomSpec as exc:
        print(f"usreg {args.command}: invalid phantom: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, VolumeIOError) as exc:
        print(f"usreg {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc, VolumeIOError) else EXIT_MISSING
    except ValueError as exc:
        print(f"usreg {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
