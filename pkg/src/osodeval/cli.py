"""Command-line entry point: ``osodeval {eval,gen-splits,baseline,sweep,validate}``.

Exit codes: 0 success, 1 input or configuration error, 2 numeric or
evaluation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .baseline import BaselineConfig, cross_label_nms, relabel_all, sweep_baseline
from .data import (
    apply_split,
    load_detections,
    load_ground_truth,
    load_split,
    serialize_detections,
    serialize_split,
    validate,
)
from .data.io import read_bytes
from .data.types import SplitProtocol
from .errors import ConfigurationError, OsodError, ParseError, SchemaError
from .evaluation import EvalConfig
from .report import atomic_write, render_sweep_grid
from .runner import TABLE_SUFFIX, _slug, load_manifest, run_eval
from .splits import (
    PRESETS,
    RandomSplitConfig,
    build_cooccurrence_graph,
    normalized_cut,
    preset_splits,
    splits_from_partition,
    splits_from_random,
)

logger = logging.getLogger("osodeval")

GAMMA_GRID = (1.5, 2.0, 3.0, 4.0, 5.0, 10.0, 15.0, 50.0)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _global_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", type=Path, help="JSON file with evaluation settings")
    g.add_argument("--out", type=Path, help="output directory (output file for 'baseline')")
    g.add_argument("--format", choices=sorted(TABLE_SUFFIX), default="markdown", help="table format")
    g.add_argument("--threads", type=int, default=1, help="worker threads for 'eval'")
    g.add_argument("--seed", type=int, default=0, help="seed for split generation")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = argparse.ArgumentParser(prog="osodeval", description="Open-set object detection evaluation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="evaluate methods over splits from a manifest")
    p.add_argument("manifest", type=Path)

    p = sub.add_parser("gen-splits", parents=[common], help="generate known/unknown class splits")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--dataset-format", choices=["native", "coco"], default="native")
    p.add_argument("--method", choices=["random", "ncut", "preset"], required=True)
    p.add_argument("--k", type=int, help="number of class groups / clusters (random, ncut)")
    p.add_argument("--preset", choices=PRESETS, help="shipped class grouping (preset)")
    p.add_argument("--protocol", choices=["keep", "drop"], default=None,
                   help="train-image rule (default: keep for random, drop for ncut, per preset otherwise)")
    p.add_argument("--known-groups", type=int, default=1,
                   help="random only: groups that form the known set in each split")

    p = sub.add_parser("baseline", parents=[common], help="relabel raw detector outputs with the ratio rule")
    p.add_argument("--raw", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--dataset-format", choices=["native", "coco"], default="native")
    p.add_argument("--split", type=Path, help="split whose known classes index the score vectors")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--top-m", type=int, default=3)
    p.add_argument("--cross-nms", type=float, default=None, metavar="IOU")

    p = sub.add_parser("sweep", parents=[common], help="evaluate the baseline over a gamma x temperature grid")
    p.add_argument("--raw", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--dataset-format", choices=["native", "coco"], default="native")
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--gammas", type=_float_list, default=list(GAMMA_GRID))
    p.add_argument("--temperatures", type=_float_list, default=[1.0])
    p.add_argument("--top-m", type=int, default=3)
    p.add_argument("--cross-nms", type=float, default=None, metavar="IOU")

    p = sub.add_parser("validate", parents=[common], help="check a dataset (and optionally a split or detections)")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--dataset-format", choices=["native", "coco"], default="native")
    p.add_argument("--split", type=Path)
    p.add_argument("--detections", type=Path)
    p.add_argument("--kind", choices=["labeled", "raw"], default="labeled")
    return parser


def _load_config(path: Path | None) -> EvalConfig | None:
    if path is None:
        return None
    try:
        doc = json.loads(read_bytes(path).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: config must be a JSON object")
    return EvalConfig.from_dict(doc.get("eval", doc))


def _emit(data: bytes) -> None:
    sys.stdout.buffer.write(data)
    sys.stdout.flush()


def _load_view(args, with_split: bool):
    dataset = _prefixed(args.dataset, load_ground_truth, args.dataset, args.dataset_format)
    if with_split and args.split is not None:
        split = _prefixed(args.split, load_split, args.split, dataset.taxonomy)
        protocol = SplitProtocol.coerce(split.provenance.get("protocol", SplitProtocol.KEEP))
        return apply_split(dataset, split, protocol)
    return dataset


def _prefixed(path, fn, *a):
    """Run a loader, naming ``path`` in any error it raises."""
    try:
        return fn(*a)
    except OsodError as exc:
        if str(path) not in str(exc):
            exc.args = (f"{path}: {exc}",)
        raise


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    result = run_eval(
        manifest, args.out, threads=args.threads, format=args.format, cfg=_load_config(args.config)
    )
    for where, exc in result.errors:
        msg = str(exc)
        print(f"error: {msg if where in msg else f'{where}: {msg}'}", file=sys.stderr)
    if result.rows:
        out = Path(args.out or manifest.output or "results")
        _emit((out / f"table.{TABLE_SUFFIX[args.format]}").read_bytes())
    return result.exit_code


def cmd_gen_splits(args) -> int:
    dataset = _prefixed(args.dataset, load_ground_truth, args.dataset, args.dataset_format)
    out = Path(args.out or "splits")
    if args.method == "preset":
        if args.preset is None:
            raise ConfigurationError("--method preset needs --preset NAME")
        specs = preset_splits(dataset, args.preset, args.protocol, args.seed)
    elif args.k is None:
        raise ConfigurationError(f"--method {args.method} needs --k")
    elif args.method == "random":
        protocol = args.protocol or "keep"
        cfg = RandomSplitConfig(args.k, args.seed, dataset.taxonomy.class_ids)
        specs = splits_from_random(dataset, cfg, protocol, args.known_groups)
    else:
        protocol = args.protocol or "drop"
        graph = build_cooccurrence_graph(dataset, dataset.taxonomy.class_ids)
        partition = normalized_cut(graph, args.k, seed=args.seed)
        specs = splits_from_partition(dataset, graph, partition, protocol, args.seed)
    out.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        path = out / f"{_slug(spec.name)}.json"
        atomic_write(path, serialize_split(spec, dataset.taxonomy))
        print(
            f"{path}: {len(spec.known_classes)} known, {len(spec.unknown_classes)} unknown, "
            f"{len(spec.train_images)}/{len(spec.val_images)}/{len(spec.test_images)} train/val/test images"
        )
    return 0


def _relabel_known(args, view):
    known = sorted(view.split.known_classes) if view.split is not None else None
    preds = _prefixed(args.raw, load_detections, args.raw, "raw", view.taxonomy, known)
    if known is None:
        # Score vectors follow the file's own class list, or the whole taxonomy.
        doc = json.loads(read_bytes(args.raw).decode("utf-8"))
        names = doc.get("classes")
        known = sorted(view.taxonomy.id_of(n) for n in names) if names else list(view.taxonomy.class_ids)
    return preds, known


def cmd_baseline(args) -> int:
    if args.out is None:
        raise ConfigurationError("baseline needs --out PATH for the relabeled detections")
    view = _load_view(args, with_split=True)
    preds, known = _relabel_known(args, view)
    dets = relabel_all(preds, BaselineConfig(args.gamma, args.temperature, args.top_m), known)
    if args.cross_nms is not None:
        dets = cross_label_nms(dets, args.cross_nms)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    atomic_write(args.out, serialize_detections(dets, view.taxonomy))
    n_unknown = sum(1 for d in dets if d.is_unknown)
    print(f"{args.out}: {len(dets)} detections, {n_unknown} labeled unknown")
    return 0


def cmd_sweep(args) -> int:
    view = _load_view(args, with_split=True)
    preds, known = _relabel_known(args, view)
    cells = sweep_baseline(
        preds,
        args.gammas,
        args.temperatures,
        view,
        _load_config(args.config),
        top_m=args.top_m,
        class_ids=known,
        cross_nms=args.cross_nms,
    )
    table = render_sweep_grid(cells, args.format)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        atomic_write(args.out / f"baseline_sweep.{TABLE_SUFFIX[args.format]}", table)
    _emit(table)
    return 0


def cmd_validate(args) -> int:
    view = _load_view(args, with_split=False)
    if args.split is not None:
        split = _prefixed(args.split, load_split, args.split, view.taxonomy)
        view = type(view)(view.taxonomy, view.images, view.instances, split)
    diagnostics = validate(view)
    for d in diagnostics:
        print(f"{d.severity}: {d.message}")
    n_err = sum(1 for d in diagnostics if d.severity == "error")
    if args.detections is not None and n_err == 0:
        known = sorted(view.split.known_classes) if view.split is not None else None
        dets = _prefixed(args.detections, load_detections, args.detections, args.kind, view.taxonomy, known)
        print(f"{args.detections}: {len(dets)} {args.kind} detections")
    print(
        f"{args.dataset}: {len(view.images)} images, {len(view.instances)} instances, "
        f"{n_err} errors, {len(diagnostics) - n_err} warnings"
    )
    return 1 if n_err else 0


COMMANDS = {
    "eval": cmd_eval,
    "gen-splits": cmd_gen_splits,
    "baseline": cmd_baseline,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except OsodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
