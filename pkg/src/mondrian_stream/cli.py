"""Command-line experiment runner.

One invocation runs one prequential experiment (or one per budget with
``--sweep-memory``) and writes a ``point_index,f1`` CSV next to a flat
``key=value`` manifest. ``--from-manifest`` replays a manifest; flags given
alongside it override the stored values.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from typing import Iterable, List, Optional, Sequence

from . import __version__
from .config import ConfigError, ForestConfig, SplitMethod, Strategy, TrimMethod
from .core import LabeledPoint, MondrianForest
from .datagen import FAMILIES, GeneratorConfig, make_generator
from .evaluation import DEFAULT_EVAL_FADING, run_prequential
from .ingest import drop_label, parse_csv_stream, window_features, write_csv_stream

PROG = "mondrian-stream"
DERIVED_PREFIX = "derived."
# run-control keys that never end up in a manifest
_NOT_RECORDED = ("from_manifest", "manifest", "sweep_memory", "dump_stream")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _real_or_inf(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise argparse.ArgumentTypeError("nan is not allowed")
    return value


def _threshold(text: str):
    return "auto" if text == "auto" else float(text)


def _int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, allow_abbrev=False, description="Memory-bounded Mondrian forest stream benchmark.")
    p.add_argument("--version", action="version", version=f"{PROG} {__version__}")

    src = p.add_argument_group("data source")
    src.add_argument("--input", metavar="PATH", help="CSV stream: feature columns then an integer label")
    src.add_argument("--generator", choices=FAMILIES)
    src.add_argument("--points", type=int, default=20_000)
    src.add_argument("--noise", type=float, default=0.0)
    src.add_argument("--centroids", type=int, default=50)
    src.add_argument("--features", type=int, default=10)
    src.add_argument("--labels", type=int, default=None,
                     help="label count (randomrbf: default 2; CSV: default max label + 1)")
    src.add_argument("--sea-function", type=int, default=1)
    src.add_argument("--sine-function", type=int, default=1)
    src.add_argument("--drift-magnitude", type=float, default=0.0)
    src.add_argument("--drifting-attributes", type=int, default=2)
    src.add_argument("--switch-function", type=int, default=None)
    src.add_argument("--label-shift", action="store_true")
    src.add_argument("--shift-at", type=int, default=None)
    src.add_argument("--window", type=int, default=None, metavar="N")
    src.add_argument("--axes", type=_int_list, default=None, metavar="I,J,...")
    src.add_argument("--drop-label-0", action="store_true")
    src.add_argument("--dump-stream", metavar="PATH", help="also write the (transformed) input stream as CSV")

    forest = p.add_argument_group("forest")
    forest.add_argument("--trees", type=_positive_int, default=10)
    forest.add_argument("--memory-bytes", type=_positive_int, default=600_000)
    forest.add_argument("--budget", type=_real_or_inf, default=math.inf, metavar="R|inf")
    forest.add_argument("--base-count", type=float, default=1.0)
    forest.add_argument("--discount", type=float, default=0.5)
    forest.add_argument("--strategy", choices=[s.cli_name for s in Strategy], default="extend-node")
    forest.add_argument("--trim", choices=[s.cli_name for s in TrimMethod], default="none")
    forest.add_argument("--split", choices=[s.cli_name for s in SplitMethod], default="none")
    forest.add_argument("--trim-threshold", type=_threshold, default="auto", metavar="R|auto")
    forest.add_argument("--leaf-fading", type=float, default=0.99)
    forest.add_argument("--seed", type=int, default=0)

    run = p.add_argument_group("evaluation and output")
    run.add_argument("--eval-fading", type=float, default=DEFAULT_EVAL_FADING)
    run.add_argument("--report-every", type=_positive_int, default=100)
    run.add_argument("--out", metavar="PATH", help="results CSV (required)")
    run.add_argument("--manifest", metavar="PATH", help="manifest path (default: OUT.manifest)")
    run.add_argument("--sweep-memory", type=_int_list, default=None, metavar="B1,B2,...",
                     help="one run per memory budget; writes OUT_mem<B>.csv per budget")
    run.add_argument("--from-manifest", metavar="PATH", help="replay the run recorded in a manifest")
    return p


# manifest round trip ---------------------------------------------------------


def _format_value(value) -> str:
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_manifest(path: str) -> dict:
    entries = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{n}: expected key=value")
            entries[key.strip()] = value.strip()
    return entries


def manifest_to_argv(entries: dict) -> List[str]:
    argv = []
    for key, value in entries.items():
        if key.startswith(DERIVED_PREFIX):
            continue
        flag = "--" + key.replace("_", "-")
        if value == "None" or value == "False":
            continue
        if value == "True":
            argv.append(flag)
        else:
            argv.extend([flag, value])
    return argv


def write_manifest(path: str, args: argparse.Namespace, derived: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, value in sorted(vars(args).items()):
            if key in _NOT_RECORDED:
                continue
            fh.write(f"{key}={_format_value(value)}\n")
        for key, value in derived.items():
            fh.write(f"{DERIVED_PREFIX}{key}={_format_value(value)}\n")


def resolve_args(argv: Optional[Sequence[str]]) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.from_manifest:
        stored = manifest_to_argv(read_manifest(args.from_manifest))
        # stored values first so explicit flags win
        args = parser.parse_args(stored + argv)
        if args.input and args.generator and "--input" in argv:
            args.generator = None
        elif args.input and args.generator and "--generator" in argv:
            args.input = None
    if bool(args.input) == bool(args.generator):
        raise UsageError("exactly one of --input or --generator is required")
    if not args.out:
        raise UsageError("--out is required")
    return args


# data ------------------------------------------------------------------------


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _transform(points: Iterable[LabeledPoint], args) -> Iterable[LabeledPoint]:
    if args.window is not None:
        points = window_features(points, args.window, args.axes)
    elif args.axes is not None:
        axes = list(args.axes)
        points = (LabeledPoint(p.features[axes], p.label) for p in points)
    if args.drop_label_0:
        points = drop_label(points, 0)
    return points


def load_stream(args):
    """Materialise the stream. Returns (points, feature_count, label_count, derived info)."""
    derived = {}
    if args.input:
        points = list(_transform(parse_csv_stream(args.input), args))
        derived["input_sha256"] = _sha256(args.input)
        if not points:
            raise ValueError(f"{args.input}: no data rows")
        feature_count = len(points[0].features)
        label_count = args.labels if args.labels is not None else max(p.label for p in points) + 1
        bad = next((p.label for p in points if p.label >= label_count), None)
        if bad is not None:
            raise ValueError(f"label {bad} out of range for --labels {label_count}")
    else:
        gcfg = GeneratorConfig(
            family=args.generator,
            seed=args.seed,
            n_points=args.points,
            noise=args.noise,
            centroids=args.centroids,
            features=args.features,
            labels=2 if args.labels is None else args.labels,
            sea_function=args.sea_function,
            sine_function=args.sine_function,
            drift_magnitude=args.drift_magnitude,
            drifting_attributes=args.drifting_attributes,
            switch_function=args.switch_function,
            label_shift=args.label_shift,
            shift_at=args.shift_at,
        )
        points = list(_transform(make_generator(gcfg), args))
        feature_count = gcfg.feature_count
        label_count = gcfg.label_count
        if points:
            feature_count = len(points[0].features)
    return points, feature_count, label_count, derived


def forest_config(args, feature_count: int, label_count: int, memory_bytes: int) -> ForestConfig:
    return ForestConfig(
        feature_count=feature_count,
        label_count=label_count,
        tree_count=args.trees,
        memory_budget_bytes=memory_bytes,
        budget=args.budget,
        base_count=args.base_count,
        discount_factor=args.discount,
        strategy=args.strategy,
        trim_method=args.trim,
        split_method=args.split,
        trim_threshold=args.trim_threshold,
        leaf_fading=args.leaf_fading,
        seed=args.seed,
    )


def write_results(path: str, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("point_index,f1\n")
        for index, f1 in rows:
            fh.write(f"{index},{f1!r}\n")


def sweep_path(out: str, memory_bytes: int) -> str:
    stem, ext = os.path.splitext(out)
    return f"{stem}_mem{memory_bytes}{ext or '.csv'}"


def run_once(args, points, feature_count, label_count, derived, memory_bytes, out, manifest) -> float:
    cfg = forest_config(args, feature_count, label_count, memory_bytes)
    forest = MondrianForest(cfg)
    rows = run_prequential(points, forest, args.eval_fading, args.report_every)
    write_results(out, rows)
    info = dict(derived)
    info.update(
        feature_count=feature_count,
        label_count=label_count,
        node_size=cfg.node_size,
        capacity=cfg.capacity,
        points=len(points),
        nodes_used=forest.used,
        trim_rounds=forest.trim_rounds,
        trims=forest.trims,
        forced_splits=forest.forced_splits,
        final_f1=rows[-1][1] if rows else float("nan"),
    )
    recorded = argparse.Namespace(**vars(args))
    recorded.memory_bytes = memory_bytes
    recorded.out = out
    write_manifest(manifest, recorded, info)
    return info["final_f1"]


def run_experiment(args: argparse.Namespace) -> int:
    points, feature_count, label_count, derived = load_stream(args)
    if args.dump_stream:
        with open(args.dump_stream, "w", newline="") as fh:
            write_csv_stream(points, fh)
    if args.sweep_memory:
        for budget in args.sweep_memory:
            out = sweep_path(args.out, budget)
            run_once(args, points, feature_count, label_count, derived, budget, out, out + ".manifest")
    else:
        manifest = args.manifest or args.out + ".manifest"
        run_once(args, points, feature_count, label_count, derived, args.memory_bytes, args.out, manifest)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = resolve_args(argv)
        return run_experiment(args)
    except UsageError as exc:
        print(f"{PROG}: usage error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
