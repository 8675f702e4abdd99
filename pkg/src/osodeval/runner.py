"""Manifest-driven evaluation of several methods over several splits.

Manifest (JSON; relative paths resolve against the manifest's directory)::

    {
      "dataset": "gt.json",
      "dataset_format": "native",
      "splits": ["splits/split1.json", "splits/split2.json"],
      "methods": [
        {"name": "ORE", "kind": "labeled", "detections": ["ore_s1.json", "ore_s2.json"]},
        {"name": "FCOS baseline", "kind": "raw", "detections": ["fcos_s1.json", "fcos_s2.json"],
         "baseline": {"gamma": 4.0, "temperature": 1.0, "top_m": 3, "cross_nms": null}}
      ],
      "eval": {"aose_conf_threshold": 0.05},
      "sweep_thresholds": [0.0, 0.05, ..., 1.0],
      "output": "results"
    }

``detections`` lists one file per split, in split order.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .baseline import BaselineConfig, cross_label_nms, relabel_all
from .data import apply_split, load_detections, load_ground_truth, load_split
from .data.io import read_bytes
from .data.types import DatasetView, SplitProtocol
from .errors import ConfigurationError, InputFileError, OsodError, ParseError, SchemaError
from .evaluation import EvalConfig, MetricsReport, evaluate
from .report import AggregateRow, aggregate, atomic_write, render_table, sweep_csv

logger = logging.getLogger(__name__)

DEFAULT_SWEEP = tuple(round(0.05 * i, 2) for i in range(21))
TABLE_SUFFIX = {"markdown": "md", "csv": "csv", "json": "json"}


@dataclass(frozen=True)
class MethodEntry:
    name: str
    kind: str
    detections: tuple[Path, ...]
    baseline: dict[str, Any] | None = None


@dataclass(frozen=True)
class RunManifest:
    dataset: Path
    splits: tuple[Path, ...]
    methods: tuple[MethodEntry, ...]
    dataset_format: str = "native"
    eval_overrides: dict[str, Any] = field(default_factory=dict)
    sweep_thresholds: tuple[float, ...] = DEFAULT_SWEEP
    output: Path | None = None

    def paths(self) -> list[Path]:
        return [self.dataset, *self.splits, *(p for m in self.methods for p in m.detections)]


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    try:
        doc = json.loads(read_bytes(path).decode("utf-8"))
    except UnicodeDecodeError:
        raise ParseError(f"{path}: not valid UTF-8") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: manifest must be a JSON object")
    base = path.parent

    def resolve(p: Any) -> Path:
        if not isinstance(p, str):
            raise SchemaError(f"{path}: expected a path string, got {p!r}")
        q = Path(p)
        return q if q.is_absolute() else base / q

    try:
        splits = tuple(resolve(p) for p in doc["splits"])
        methods = []
        for i, m in enumerate(doc["methods"]):
            kind = m.get("kind", "labeled")
            if kind not in ("labeled", "raw"):
                raise SchemaError(f"{path}: methods[{i}].kind must be 'labeled' or 'raw'")
            dets = tuple(resolve(p) for p in m["detections"])
            if len(dets) != len(splits):
                raise SchemaError(
                    f"{path}: method {m['name']!r} lists {len(dets)} detection files for {len(splits)} splits"
                )
            if kind == "raw" and not m.get("baseline"):
                raise SchemaError(f"{path}: raw method {m['name']!r} needs a 'baseline' section")
            methods.append(MethodEntry(str(m["name"]), kind, dets, m.get("baseline")))
        names = [m.name for m in methods]
        if len(set(names)) != len(names):
            raise SchemaError(f"{path}: method names must be unique")
        manifest = RunManifest(
            dataset=resolve(doc["dataset"]),
            splits=splits,
            methods=tuple(methods),
            dataset_format=doc.get("dataset_format", "native"),
            eval_overrides=dict(doc.get("eval", {})),
            sweep_thresholds=tuple(doc.get("sweep_thresholds", DEFAULT_SWEEP)),
            output=resolve(doc["output"]) if doc.get("output") else None,
        )
    except KeyError as exc:
        raise SchemaError(f"{path}: missing field {exc.args[0]!r}") from None
    return manifest


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("_") or "unnamed"


@dataclass
class RunResult:
    reports: dict[tuple[str, str], MetricsReport]
    rows: list[AggregateRow]
    errors: list[tuple[str, OsodError]]

    @property
    def exit_code(self) -> int:
        return max((e.exit_code for _, e in self.errors), default=0)


def _evaluate_one(method: MethodEntry, det_path: Path, view: DatasetView, cfg: EvalConfig, sweep):
    split = view.split
    if method.kind == "raw":
        known = sorted(split.known_classes)
        preds = load_detections(det_path, "raw", view.taxonomy, known)
        bl = dict(method.baseline)
        cross = bl.pop("cross_nms", None)
        try:
            bl_cfg = BaselineConfig(**bl)
        except TypeError as exc:
            raise ConfigurationError(f"baseline section of {method.name!r}: {exc}") from None
        dets = relabel_all(preds, bl_cfg, known)
        if cross is not None:
            dets = cross_label_nms(dets, float(cross))
    else:
        dets = load_detections(det_path, "labeled", view.taxonomy, split.known_classes)
    return evaluate(dets, view, cfg, sweep)


def run_eval(
    manifest: RunManifest,
    out_dir: str | Path | None = None,
    *,
    threads: int = 1,
    format: str = "markdown",
    cfg: EvalConfig | None = None,
) -> RunResult:
    """Evaluate every (method, split) pair and write reports, sweeps and the aggregate table.

    Files written under ``out_dir``: ``reports/<method>__<split>.json``,
    ``sweeps/<method>__<split>.csv`` and ``table.<md|csv|json>``. Output is
    independent of ``threads``; rows follow manifest order.
    """
    out = Path(out_dir or manifest.output or "results")
    missing = [p for p in manifest.paths() if not p.is_file()]
    if missing:
        errs = [(str(p), InputFileError(f"file not found: {p}")) for p in missing]
        return RunResult({}, [], errs)

    if cfg is None:
        cfg = EvalConfig.from_dict(manifest.eval_overrides) if manifest.eval_overrides else EvalConfig()
    errors: list[tuple[str, OsodError]] = []
    try:
        dataset = load_ground_truth(manifest.dataset, manifest.dataset_format)
    except OsodError as exc:
        return RunResult({}, [], [(str(manifest.dataset), exc)])

    views: list[DatasetView] = []
    split_names: list[str] = []
    for i, sp in enumerate(manifest.splits):
        try:
            split = load_split(sp, dataset.taxonomy)
            protocol = SplitProtocol.coerce(split.provenance.get("protocol", SplitProtocol.KEEP))
            views.append(apply_split(dataset, split, protocol))
            split_names.append(split.name or f"split{i + 1}")
        except OsodError as exc:
            errors.append((str(sp), exc))
    if errors:
        return RunResult({}, [], errors)
    if len(set(split_names)) != len(split_names):
        return RunResult({}, [], [("manifest", ConfigurationError(f"duplicate split names {split_names}"))])

    tasks = [(m, si) for m in manifest.methods for si in range(len(views))]

    def work(task):
        m, si = task
        try:
            return _evaluate_one(m, m.detections[si], views[si], cfg, manifest.sweep_thresholds), None
        except OsodError as exc:
            return None, (str(m.detections[si]), exc)

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(work, tasks))

    reports: dict[tuple[str, str], MetricsReport] = {}
    for (m, si), (report, err) in zip(tasks, results):
        if err is not None:
            errors.append(err)
        else:
            reports[(m.name, split_names[si])] = report

    (out / "reports").mkdir(parents=True, exist_ok=True)
    (out / "sweeps").mkdir(parents=True, exist_ok=True)
    rows = []
    for m in manifest.methods:
        for s in split_names:
            r = reports.get((m.name, s))
            if r is None:
                continue
            stem = f"{_slug(m.name)}__{_slug(s)}"
            doc = {"method": m.name, "split": s, **r.to_dict()}
            atomic_write(out / "reports" / f"{stem}.json", (json.dumps(doc, indent=2) + "\n").encode("utf-8"))
            if r.sweep:
                atomic_write(out / "sweeps" / f"{stem}.csv", sweep_csv(r.sweep))
        if all((m.name, s) in reports for s in split_names):
            rows.append(aggregate(m.name, [(s, reports[(m.name, s)]) for s in split_names]))
    atomic_write(out / f"table.{TABLE_SUFFIX[format]}", render_table(rows, format, split_names))
    return RunResult(reports, rows, errors)
