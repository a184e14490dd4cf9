"""Command-line entry point: generate | train | localize | evaluate.

All randomness derives from the configured seeds, so repeated runs with
the same flags produce byte-identical CSV artifacts.  Timing values are
kept out of the deterministic CSVs and reported in summary/timing files
instead.
"""

from __future__ import annotations

import argparse
import csv
import importlib.resources
import json
import os
import sys

import numpy as np

from . import __version__, data, evaluate as ev
from .channel import EnvironmentSpec, generate_dataset
from .kernels import backend_name
from .localize import localize
from .model import MODEL_FORMAT_VERSION, load_model, save_model
from .training import TrainConfig, TrainingDivergedError, train

DEFAULT_GRID_SPACING = 1.0
DEFAULT_PACKETS_PER_SP = 30

BUNDLED_ENVIRONMENTS = ("classroom", "hall")


def _resolve_env(name_or_path: str) -> EnvironmentSpec:
    if name_or_path in BUNDLED_ENVIRONMENTS:
        ref = importlib.resources.files("csiloc.environments") \
            .joinpath(f"{name_or_path}.json")
        with importlib.resources.as_file(ref) as p:
            return EnvironmentSpec.from_json(p)
    if not os.path.exists(name_or_path):
        raise FileNotFoundError(
            f"environment spec not found: {name_or_path} "
            f"(bundled: {', '.join(BUNDLED_ENVIRONMENTS)})")
    return EnvironmentSpec.from_json(name_or_path)


def _load_train_config(path: str | None, seed: int | None) -> TrainConfig:
    if path is None:
        cfg = TrainConfig()
    elif path in BUNDLED_ENVIRONMENTS:
        ref = importlib.resources.files("csiloc.environments") \
            .joinpath(f"{path}_train.json")
        with importlib.resources.as_file(ref) as p, open(p) as fh:
            cfg = TrainConfig.from_dict(json.load(fh))
    else:
        with open(path) as fh:
            cfg = TrainConfig.from_dict(json.load(fh))
    if seed is not None:
        cfg.seed = seed
    return cfg


def _atomic_csv(path: str, header: list[str], rows) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    os.replace(tmp, path)


def _read_packets(path: str) -> np.ndarray:
    """Amplitude columns from a dataset-format CSV, in file order."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 4 + data.PACKET_LEN:
            raise data.DatasetFormatError(
                f"{path}: expected dataset CSV with "
                f"{4 + data.PACKET_LEN} columns")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row[4:]])
            except ValueError as exc:
                raise data.DatasetFormatError(
                    f"{path} line {lineno}: {exc}") from None
    if not rows:
        raise data.DatasetFormatError(f"{path}: no packet rows")
    return np.array(rows, dtype=np.float64)


def _cmd_generate(args) -> int:
    env = _resolve_env(args.env)
    if args.seed is not None:
        from dataclasses import replace
        env = replace(env, rng_seed=args.seed)
    ds = generate_dataset(env, args.spacing, args.packets)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "fingerprints.csv")
    data.write_dataset(ds, out_csv)
    print(f"generated {ds.n_points} sample points x "
          f"{ds.sample_points[0].packet_count} packets -> {out_csv}")
    return 0


def _cmd_train(args) -> int:
    ds = data.load_dataset(args.dataset)
    problems = data.validate_dataset(ds)
    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        return 1
    cfg = _load_train_config(args.config, args.seed)
    try:
        model, report = train(ds, cfg)
    except TrainingDivergedError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 1
    save_model(model, args.out)
    _atomic_csv(args.out + ".report.csv", ["epoch", "loss"],
                [(i + 1, repr(l)) for i, l in enumerate(report.epoch_losses)])
    print(f"trained {report.epochs_run} epochs, final loss "
          f"{report.epoch_losses[-1]:.6f}, {report.wall_seconds:.2f}s, "
          f"~{report.peak_memory_bytes / 1e6:.1f} MB peak -> {args.out}")
    return 0


def _cmd_localize(args) -> int:
    model = load_model(args.model)
    packets = _read_packets(args.packets)
    if args.raw:
        if model.normalization is None:
            print("error: model has no normalization record; cannot scale "
                  "raw packets", file=sys.stderr)
            return 1
        packets = data.apply_normalization(packets, model.normalization)
    if args.p is not None:
        packets = packets[:args.p]
    result = localize(model, packets, args.r)
    print(f"packets_used: {result.packets_used}")
    print("per_label_errors:")
    for j, e in enumerate(result.per_label_errors):
        print(f"  label {j}: {e:.9f}")
    print("candidates:")
    for label, e in result.candidates:
        _, x, y = next(c for c in model.sp_coordinates if c[0] == label)
        print(f"  label {label} at ({x}, {y}): error {e:.9f}")
    print(f"estimate: ({result.estimate[0]:.4f}, {result.estimate[1]:.4f})")
    print(f"online_seconds: {result.elapsed_seconds:.6f}")
    return 0


def _cmd_evaluate(args) -> int:
    ds = data.load_dataset(args.dataset)
    cfg = _load_train_config(args.config, args.seed)
    os.makedirs(args.out, exist_ok=True)
    folds, summary = ev.loocv(ds, cfg, r=args.r, p=args.p,
                              seed=args.seed if args.seed is not None else 0)

    _atomic_csv(os.path.join(args.out, "folds.csv"),
                ["sp_id", "true_x", "true_y", "est_x", "est_y",
                 "error_m", "baseline_error_m", "failed"],
                [(f.sp_id, repr(f.true_position[0]), repr(f.true_position[1]),
                  repr(f.estimate[0]), repr(f.estimate[1]), repr(f.error_m),
                  repr(f.baseline_error_m), int(f.failed)) for f in folds])
    _atomic_csv(os.path.join(args.out, "cdf.csv"), ["threshold_m", "fraction"],
                [(repr(t), repr(fr)) for t, fr in summary.cdf])
    # wall-clock values are run-dependent; kept apart from the
    # deterministic artifacts
    _atomic_csv(os.path.join(args.out, "timings.csv"),
                ["sp_id", "train_seconds", "online_seconds"],
                [(f.sp_id, repr(f.train_seconds), repr(f.online_seconds))
                 for f in folds])

    lines = [
        f"folds: {summary.folds} ({summary.failed_folds} failed)",
        f"mean error (m): {summary.mean_error:.4f}",
        f"median error (m): {summary.median_error:.4f}",
        f"std error (m): {summary.std_error:.4f}",
        f"80th percentile error (m): "
        f"<= {ev.percentile_at(summary.cdf, 0.8)}",
        f"naive centroid baseline mean error (m): "
        f"{summary.baseline_mean_error:.4f}",
        f"mean training time per fold (s): {summary.mean_train_seconds:.3f}",
        f"mean online localization time (s): "
        f"{summary.mean_online_seconds:.6f}",
        "",
    ] + ev.reference_report_lines()

    if args.overhead_sizes:
        sizes = [int(s) for s in args.overhead_sizes.split(",")]
        from .training import measure_training_overhead
        rows_t = measure_training_overhead(
            ds, cfg, sizes, cap=args.overhead_cap,
            seed=args.seed if args.seed is not None else 0)
        _atomic_csv(os.path.join(args.out, "overhead_training.csv"),
                    ["n_sps", "runs", "mean_train_seconds",
                     "mean_peak_memory_bytes"],
                    [(r["n_sps"], r["runs"], repr(r["mean_train_seconds"]),
                      repr(r["mean_peak_memory_bytes"])) for r in rows_t])
        rows_o = ev.measure_online_overhead(
            ds, cfg, sizes, r=args.r, p=args.p, cap=args.overhead_cap,
            seed=args.seed if args.seed is not None else 0)
        _atomic_csv(os.path.join(args.out, "overhead_online.csv"),
                    ["n_sps", "runs", "mean_error_m", "mean_online_seconds"],
                    [(r["n_sps"], r["runs"], repr(r["mean_error_m"]),
                      repr(r["mean_online_seconds"])) for r in rows_o])

    tmp = os.path.join(args.out, "summary.txt.tmp")
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, os.path.join(args.out, "summary.txt"))
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csiloc",
        description="Single-model CSI fingerprint indoor localization")
    parser.add_argument(
        "--version", action="version",
        version=f"csiloc {__version__} (model format {MODEL_FORMAT_VERSION}, "
                f"kernels: {backend_name()})")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a fingerprint dataset")
    g.add_argument("--env", required=True,
                   help="environment spec JSON, or bundled name "
                        "(classroom, hall)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--spacing", type=float, default=DEFAULT_GRID_SPACING,
                   help="sample-point grid spacing in meters")
    g.add_argument("--packets", type=int, default=DEFAULT_PACKETS_PER_SP,
                   help="packets per sample point")
    g.add_argument("--seed", type=int, default=None,
                   help="override the spec's rng_seed")
    g.set_defaults(func=_cmd_generate)

    t = sub.add_parser("train", help="train the environment model")
    t.add_argument("--dataset", required=True, help="fingerprints CSV")
    t.add_argument("--config", default=None,
                   help="train config JSON, or bundled name "
                        "(classroom, hall)")
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(func=_cmd_train)

    l = sub.add_parser("localize", help="estimate a position from packets")
    l.add_argument("--model", required=True)
    l.add_argument("--packets", required=True,
                   help="dataset-format CSV with the test packets")
    l.add_argument("--r", type=int, default=2,
                   help="number of candidate sample points")
    l.add_argument("--p", type=int, default=None,
                   help="use only the first p packets")
    l.add_argument("--raw", action="store_true",
                   help="packets are raw amplitudes; apply the model's "
                        "normalization record")
    l.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    l.set_defaults(func=_cmd_localize)

    e = sub.add_parser("evaluate", help="leave-one-out cross-validation")
    e.add_argument("--dataset", required=True)
    e.add_argument("--config", default=None)
    e.add_argument("--r", type=int, default=2)
    e.add_argument("--p", type=int, default=5)
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--overhead-sizes", default=None,
                   help="comma-separated SP counts for overhead tables, "
                        "e.g. 5,10,15")
    e.add_argument("--overhead-cap", type=int, default=5,
                   help="max SP combinations per overhead size")
    e.add_argument("--threads", type=int, default=None,
                   help="cap worker threads used by the kernels")
    e.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None):
        try:
            import numba
            numba.set_num_threads(max(1, args.threads))
        except ImportError:
            pass
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
