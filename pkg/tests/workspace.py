"""On-disk fixture: dataset, random splits, labeled and raw detections, and a manifest."""

from __future__ import annotations

import json
from pathlib import Path

from osodeval.cli import main
from osodeval.data import (
    apply_split,
    load_split,
    serialize_detections,
    serialize_ground_truth,
    serialize_raw_predictions,
)

import synth


def build(root: Path, n_images: int = 150, n_classes: int = 12, k: int = 4, seed: int = 11) -> Path:
    """Write everything under ``root`` and return the manifest path."""
    base = synth.dataset(n_images, n_classes, seed=seed)
    (root / "gt.json").write_bytes(serialize_ground_truth(base))
    rc = main(["gen-splits", "--dataset", str(root / "gt.json"), "--method", "random", "--k", str(k),
               "--seed", "7", "--known-groups", "3", "--out", str(root / "splits")])
    assert rc == 0
    split_files = sorted((root / "splits").glob("*.json"))
    labeled, raw = [], []
    for i, sp in enumerate(split_files):
        split = load_split(sp, base.taxonomy)
        view = apply_split(base, split)
        dets = synth.detections(view, seed=100 + i)
        path = root / f"dets_{i}.json"
        path.write_bytes(serialize_detections(dets, base.taxonomy))
        labeled.append(path.name)
        known = sorted(split.known_classes)
        preds = synth.raw_predictions(view, seed=200 + i)
        path = root / f"raw_{i}.json"
        path.write_bytes(serialize_raw_predictions(preds, base.taxonomy, known))
        raw.append(path.name)
    manifest = {
        "dataset": "gt.json",
        "splits": [f"splits/{p.name}" for p in split_files],
        "methods": [
            {"name": "noisy", "kind": "labeled", "detections": labeled},
            {"name": "ratio", "kind": "raw", "detections": raw, "baseline": {"gamma": 3.0}},
        ],
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path
