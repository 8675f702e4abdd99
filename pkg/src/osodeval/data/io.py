"""Reading and writing annotation, detection and split documents (JSON).

Native ground truth::

    {"taxonomy": {"super_class": "Animal", "classes": ["Cat", "Dog"]},
     "images": [{"id": "img1", "width": 640, "height": 480, "subset": "test"}],
     "annotations": [{"image_id": "img1", "class": "Cat", "box": [x0, y0, x1, y1]}]}

Detections::

    {"detections": [{"image_id": ..., "box": [...], "label": "Cat" | "unknown", "score": 0.9}]}
    {"classes": [...], "value_kind": "logits", "head_kind": "softmax",
     "detections": [{"image_id": ..., "box": [...], "scores": [...]}]}

Files always reference classes by name; integer ids are internal.
"""

from __future__ import annotations

import io
import json
import logging
import os
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, BinaryIO, Union

from ..errors import InputFileError, ParseError, SchemaError
from .types import (
    BoundingBox,
    ClassTaxonomy,
    DatasetView,
    Detection,
    GroundTruthInstance,
    HeadKind,
    ImageInfo,
    RawPrediction,
    SplitSpec,
    ValueKind,
)

logger = logging.getLogger(__name__)

Source = Union[bytes, bytearray, str, BinaryIO, io.TextIOBase]

UNKNOWN_LABEL = "unknown"
_GROUP_FLAGS = ("group_of", "is_group_of", "IsGroupOf", "iscrowd", "crowd")


def _load_json(source: Source) -> Any:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"document is not valid UTF-8: {exc.reason} at byte {exc.start}") from None
    try:
        return json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None


def _dump_json(doc: Any) -> bytes:
    return (json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n").encode("utf-8")


def read_bytes(path: str | os.PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc.strerror or exc}") from None


def _require(record: dict, key: str, where: str) -> Any:
    if not isinstance(record, dict):
        raise SchemaError(f"{where}: expected an object, got {type(record).__name__}")
    if key not in record:
        raise SchemaError(f"{where}: missing field {key!r}")
    return record[key]


def _box(value: Any, where: str) -> BoundingBox:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise SchemaError(f"{where}: box must be [x_min, y_min, x_max, y_max]")
    try:
        return BoundingBox(*(float(v) for v in value))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from None


def _is_group(record: dict) -> bool:
    return any(bool(record.get(flag)) for flag in _GROUP_FLAGS)


# -- ground truth -------------------------------------------------------------


def parse_ground_truth(source: Source, format: str = "native") -> DatasetView:
    """Parse a ground-truth document into a validated :class:`DatasetView`.

    ``format`` is ``"native"`` or ``"coco"`` (``"coco-like"`` is accepted too).
    Instance order follows document order. Group-of/crowd annotations are dropped
    with a warning.
    """
    doc = _load_json(source)
    if format == "native":
        view = _native_to_view(doc)
    elif format in ("coco", "coco-like"):
        view = _coco_to_view(doc)
    else:
        raise ValueError(f"unknown ground-truth format {format!r}")

    from .ops import validate

    diagnostics = validate(view)
    errors = [d for d in diagnostics if d.severity == "error"]
    for d in diagnostics:
        if d.severity == "warning":
            logger.warning("%s", d.message)
    if errors:
        raise SchemaError("; ".join(d.message for d in errors[:5]))
    return view


def load_ground_truth(path: str | os.PathLike, format: str = "native") -> DatasetView:
    return parse_ground_truth(read_bytes(path), format=format)


def _native_to_view(doc: Any) -> DatasetView:
    if not isinstance(doc, dict):
        raise SchemaError("ground-truth document must be an object")
    tax_doc = _require(doc, "taxonomy", "document")
    classes = _require(tax_doc, "classes", "taxonomy")
    if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
        raise SchemaError("taxonomy.classes must be a list of class names")
    try:
        taxonomy = ClassTaxonomy(str(tax_doc.get("super_class", "")), tuple(classes))
    except ValueError as exc:
        raise SchemaError(f"taxonomy: {exc}") from None

    images = []
    seen: set[str] = set()
    for i, rec in enumerate(_require(doc, "images", "document")):
        where = f"images[{i}]"
        image_id = str(_require(rec, "id", where))
        if image_id in seen:
            raise SchemaError(f"{where}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        subset = rec.get("subset")
        images.append(
            ImageInfo(
                image_id,
                _opt_float(rec.get("width"), where),
                _opt_float(rec.get("height"), where),
                None if subset is None else str(subset),
            )
        )

    instances = []
    for i, rec in enumerate(doc.get("annotations", [])):
        where = f"annotations[{i}]"
        image_id = str(_require(rec, "image_id", where))
        name = _require(rec, "class", where)
        try:
            class_id = taxonomy.id_of(name)
        except KeyError:
            raise SchemaError(f"{where}: unknown class name {name!r}") from None
        box = _box(_require(rec, "box", where), where)
        if image_id not in seen:
            raise SchemaError(f"{where}: image_id {image_id!r} not declared in images")
        if _is_group(rec):
            logger.warning("%s: dropping group-of/crowd annotation", where)
            continue
        instances.append(GroundTruthInstance(image_id, box, class_id))

    split = None
    if doc.get("split") is not None:
        split = _split_from_doc(doc["split"], taxonomy)
    return DatasetView(taxonomy, tuple(images), tuple(instances), split)


def _opt_float(value: Any, where: str) -> float | None:
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SchemaError(f"{where}: expected a number, got {value!r}") from None


def _coco_to_view(doc: Any) -> DatasetView:
    if not isinstance(doc, dict):
        raise SchemaError("COCO document must be an object")
    categories = _require(doc, "categories", "document")
    cat_index: dict[Any, int] = {}
    names = []
    supers = set()
    for i, cat in enumerate(categories):
        where = f"categories[{i}]"
        cid = _require(cat, "id", where)
        if cid in cat_index:
            raise SchemaError(f"{where}: duplicate category id {cid!r}")
        cat_index[cid] = len(names)
        names.append(str(_require(cat, "name", where)))
        if cat.get("supercategory"):
            supers.add(str(cat["supercategory"]))
    super_class = supers.pop() if len(supers) == 1 else ""
    try:
        taxonomy = ClassTaxonomy(super_class, tuple(names))
    except ValueError as exc:
        raise SchemaError(f"categories: {exc}") from None

    images = []
    seen: set[str] = set()
    for i, rec in enumerate(_require(doc, "images", "document")):
        where = f"images[{i}]"
        image_id = str(_require(rec, "id", where))
        if image_id in seen:
            raise SchemaError(f"{where}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        subset = rec.get("subset")
        images.append(
            ImageInfo(
                image_id,
                _opt_float(rec.get("width"), where),
                _opt_float(rec.get("height"), where),
                None if subset is None else str(subset),
            )
        )

    instances = []
    for i, rec in enumerate(doc.get("annotations", [])):
        where = f"annotations[{i}]"
        image_id = str(_require(rec, "image_id", where))
        cid = _require(rec, "category_id", where)
        if cid not in cat_index:
            raise SchemaError(f"{where}: unknown category_id {cid!r}")
        bbox = _require(rec, "bbox", where)
        if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
            raise SchemaError(f"{where}: bbox must be [x, y, w, h]")
        try:
            box = BoundingBox.from_xywh(*bbox)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: {exc}") from None
        if image_id not in seen:
            raise SchemaError(f"{where}: image_id {image_id!r} not declared in images")
        if _is_group(rec):
            logger.warning("%s: dropping crowd annotation", where)
            continue
        instances.append(GroundTruthInstance(image_id, box, cat_index[cid]))
    return DatasetView(taxonomy, tuple(images), tuple(instances))


def ground_truth_to_doc(view: DatasetView) -> dict:
    tax = view.taxonomy
    images = []
    for img in view.images:
        rec: dict[str, Any] = {"id": img.image_id}
        if img.width is not None:
            rec["width"] = img.width
        if img.height is not None:
            rec["height"] = img.height
        if img.subset is not None:
            rec["subset"] = img.subset
        images.append(rec)
    doc: dict[str, Any] = {
        "taxonomy": {"super_class": tax.super_class, "classes": list(tax.classes)},
        "images": images,
        "annotations": [
            {"image_id": inst.image_id, "class": tax.name_of(inst.class_id), "box": inst.box.as_list()}
            for inst in view.instances
        ],
    }
    if view.split is not None:
        doc["split"] = split_to_doc(view.split, tax)
    return doc


def serialize_ground_truth(view: DatasetView) -> bytes:
    return _dump_json(ground_truth_to_doc(view))


# -- detections ---------------------------------------------------------------


def parse_detections(
    source: Source,
    kind: str,
    taxonomy: ClassTaxonomy,
    known_classes: Iterable[int] | None = None,
) -> list[Detection] | list[RawPrediction]:
    """Parse a detection document.

    ``kind="labeled"`` yields :class:`Detection` records; the label ``"unknown"``
    is matched case-insensitively. ``kind="raw"`` yields :class:`RawPrediction`
    records whose score vectors are indexed by the known classes in ascending
    class-id order (all taxonomy classes when ``known_classes`` is None).
    """
    doc = _load_json(source)
    if not isinstance(doc, dict) or not isinstance(doc.get("detections"), list):
        raise SchemaError("detection document must be an object with a 'detections' list")
    known = sorted(set(known_classes)) if known_classes is not None else None
    if kind == "labeled":
        return _parse_labeled(doc["detections"], taxonomy, known)
    if kind == "raw":
        return _parse_raw(doc, taxonomy, known)
    raise ValueError(f"unknown detection kind {kind!r}")


def load_detections(path, kind, taxonomy, known_classes=None):
    return parse_detections(read_bytes(path), kind, taxonomy, known_classes)


def _parse_labeled(records: list, taxonomy: ClassTaxonomy, known: list[int] | None) -> list[Detection]:
    known_set = set(known) if known is not None else None
    out = []
    for i, rec in enumerate(records):
        where = f"detections[{i}]"
        label = _require(rec, "label", where)
        if not isinstance(label, str):
            raise SchemaError(f"{where}: label must be a string")
        if label.lower() == UNKNOWN_LABEL:
            class_id = None
        else:
            try:
                class_id = taxonomy.id_of(label)
            except KeyError:
                raise SchemaError(f"{where}: unknown class name {label!r}") from None
            if known_set is not None and class_id not in known_set:
                raise SchemaError(f"{where}: label {label!r} is not a known class")
        score = _require(rec, "score", where)
        if not isinstance(score, (int, float)) or isinstance(score, bool):
            raise SchemaError(f"{where}: score must be a number")
        if score < 0:
            raise SchemaError(f"{where}: negative score {score}")
        box = _box(_require(rec, "box", where), where)
        try:
            out.append(Detection(str(_require(rec, "image_id", where)), box, class_id, float(score)))
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from None
    return out


def _parse_raw(doc: dict, taxonomy: ClassTaxonomy, known: list[int] | None) -> list[RawPrediction]:
    if known is None:
        if doc.get("classes") is not None:
            try:
                known = sorted(taxonomy.id_of(n) for n in doc["classes"])
            except KeyError as exc:
                raise SchemaError(f"classes: {exc.args[0]}") from None
        else:
            known = list(taxonomy.class_ids)
    expected = len(known)
    default_value = doc.get("value_kind", ValueKind.PROBABILITIES.value)
    default_head = doc.get("head_kind", HeadKind.SIGMOID.value)
    out = []
    for i, rec in enumerate(doc["detections"]):
        where = f"detections[{i}]"
        scores = _require(rec, "scores", where)
        if not isinstance(scores, list):
            raise SchemaError(f"{where}: scores must be a list")
        if len(scores) != expected:
            raise SchemaError(f"{where}: score vector has length {len(scores)}, expected {expected}")
        value_kind = rec.get("value_kind", default_value)
        head_kind = rec.get("head_kind", default_head)
        try:
            value_kind = ValueKind(value_kind)
            head_kind = HeadKind(head_kind)
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from None
        if value_kind is ValueKind.PROBABILITIES and any(
            isinstance(s, (int, float)) and s < 0 for s in scores
        ):
            raise SchemaError(f"{where}: negative score in probability vector")
        box = _box(_require(rec, "box", where), where)
        try:
            out.append(
                RawPrediction(str(_require(rec, "image_id", where)), box, tuple(scores), value_kind, head_kind)
            )
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: {exc}") from None
    return out


def serialize_detections(dets: Sequence[Detection], taxonomy: ClassTaxonomy) -> bytes:
    records = [
        {
            "image_id": d.image_id,
            "box": d.box.as_list(),
            "label": UNKNOWN_LABEL if d.class_id is None else taxonomy.name_of(d.class_id),
            "score": d.score,
        }
        for d in dets
    ]
    return _dump_json({"detections": records})


def serialize_raw_predictions(preds: Sequence[RawPrediction], taxonomy: ClassTaxonomy, known_classes) -> bytes:
    records = [
        {
            "image_id": p.image_id,
            "box": p.box.as_list(),
            "scores": list(p.scores),
            "value_kind": p.value_kind.value,
            "head_kind": p.head_kind.value,
        }
        for p in preds
    ]
    classes = [taxonomy.name_of(c) for c in sorted(known_classes)]
    return _dump_json({"classes": classes, "detections": records})


# -- splits -------------------------------------------------------------------


def split_to_doc(split: SplitSpec, taxonomy: ClassTaxonomy) -> dict:
    return {
        "name": split.name,
        "known": [taxonomy.name_of(c) for c in sorted(split.known_classes)],
        "unknown": [taxonomy.name_of(c) for c in sorted(split.unknown_classes)],
        "train": list(split.train_images),
        "val": list(split.val_images),
        "test": list(split.test_images),
        "provenance": dict(split.provenance),
    }


def _split_from_doc(doc: Any, taxonomy: ClassTaxonomy) -> SplitSpec:
    if not isinstance(doc, dict):
        raise SchemaError("split document must be an object")

    def ids(names, key):
        if not isinstance(names, list):
            raise SchemaError(f"split.{key} must be a list")
        try:
            return frozenset(taxonomy.id_of(n) for n in names)
        except KeyError as exc:
            raise SchemaError(f"split.{key}: {exc.args[0]}") from None

    try:
        return SplitSpec(
            known_classes=ids(_require(doc, "known", "split"), "known"),
            unknown_classes=ids(_require(doc, "unknown", "split"), "unknown"),
            train_images=tuple(str(i) for i in doc.get("train", [])),
            val_images=tuple(str(i) for i in doc.get("val", [])),
            test_images=tuple(str(i) for i in doc.get("test", [])),
            name=str(doc.get("name", "")),
            provenance=dict(doc.get("provenance", {})),
        )
    except ValueError as exc:
        raise SchemaError(f"split: {exc}") from None


def serialize_split(split: SplitSpec, taxonomy: ClassTaxonomy) -> bytes:
    return _dump_json(split_to_doc(split, taxonomy))


def parse_split(source: Source, taxonomy: ClassTaxonomy) -> SplitSpec:
    return _split_from_doc(_load_json(source), taxonomy)


def load_split(path, taxonomy: ClassTaxonomy) -> SplitSpec:
    return parse_split(read_bytes(path), taxonomy)
