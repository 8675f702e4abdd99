"""Core immutable data types."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any


class ValueKind(str, Enum):
    LOGITS = "logits"
    PROBABILITIES = "probabilities"


class HeadKind(str, Enum):
    SOFTMAX = "softmax"
    SIGMOID = "sigmoid"


class SplitProtocol(str, Enum):
    """How training images that contain unknown objects are handled."""

    KEEP = "keep-unknown-train-images"
    DROP = "drop-unknown-train-images"

    @classmethod
    def coerce(cls, value: "SplitProtocol | str") -> "SplitProtocol":
        if isinstance(value, cls):
            return value
        aliases = {"keep": cls.KEEP, "drop": cls.DROP}
        if value in aliases:
            return aliases[value]
        return cls(value)


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box ``[x_min, y_min, x_max, y_max]`` in pixels.

    Areas use the continuous convention (no +1 pixel).
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite box coordinates {list(coords)}")
        if not self.x_max > self.x_min:
            raise ValueError(f"box has x_max <= x_min: {list(coords)}")
        if not self.y_max > self.y_min:
            raise ValueError(f"box has y_max <= y_min: {list(coords)}")

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "BoundingBox":
        return cls(float(x), float(y), float(x) + float(w), float(y) + float(h))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class ClassTaxonomy:
    """Leaf classes of one super-class. Class ids are positions in ``classes``."""

    super_class: str
    classes: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise ValueError("taxonomy must declare at least one class")
        if len(set(self.classes)) != len(self.classes):
            dupes = sorted({c for c in self.classes if self.classes.count(c) > 1})
            raise ValueError(f"duplicate class names in taxonomy: {dupes}")

    def __len__(self) -> int:
        return len(self.classes)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.classes)}

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown class name {name!r}") from None

    def name_of(self, class_id: int) -> str:
        return self.classes[class_id]

    def __contains__(self, class_id: object) -> bool:
        return isinstance(class_id, int) and 0 <= class_id < len(self.classes)

    @property
    def class_ids(self) -> range:
        return range(len(self.classes))


@dataclass(frozen=True, slots=True)
class ImageInfo:
    image_id: str
    width: float | None = None
    height: float | None = None
    # Original dataset subset ("train", "val" or "test"), when the source provides one.
    subset: str | None = None


@dataclass(frozen=True, slots=True)
class GroundTruthInstance:
    image_id: str
    box: BoundingBox
    class_id: int


@dataclass(frozen=True)
class SplitSpec:
    """A known/unknown class partition together with its image subsets."""

    known_classes: frozenset[int]
    unknown_classes: frozenset[int]
    train_images: tuple[str, ...] = ()
    val_images: tuple[str, ...] = ()
    test_images: tuple[str, ...] = ()
    name: str = ""
    provenance: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "known_classes", frozenset(self.known_classes))
        object.__setattr__(self, "unknown_classes", frozenset(self.unknown_classes))
        for attr in ("train_images", "val_images", "test_images"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        overlap = self.known_classes & self.unknown_classes
        if overlap:
            raise ValueError(f"classes both known and unknown: {sorted(overlap)}")
        subsets = {
            "train": set(self.train_images),
            "val": set(self.val_images),
            "test": set(self.test_images),
        }
        for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
            shared = subsets[a] & subsets[b]
            if shared:
                raise ValueError(f"{a} and {b} image lists share {len(shared)} image(s), e.g. {min(shared)!r}")

    @property
    def evaluated_classes(self) -> frozenset[int]:
        return self.known_classes | self.unknown_classes

    def subset_of(self, image_id: str) -> str | None:
        for subset, ids in (("train", self.train_images), ("val", self.val_images), ("test", self.test_images)):
            if image_id in ids:
                return subset
        return None


@dataclass(frozen=True)
class DatasetView:
    """Images, ground-truth boxes and taxonomy, optionally restricted by a split.

    Construction does not validate; see :func:`osodeval.data.ops.validate`.
    """

    taxonomy: ClassTaxonomy
    images: tuple[ImageInfo, ...]
    instances: tuple[GroundTruthInstance, ...]
    split: SplitSpec | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "instances", tuple(self.instances))

    @cached_property
    def image_index(self) -> dict[str, ImageInfo]:
        return {img.image_id: img for img in self.images}

    @cached_property
    def instances_by_image(self) -> dict[str, list[GroundTruthInstance]]:
        grouped: dict[str, list[GroundTruthInstance]] = {}
        for inst in self.instances:
            grouped.setdefault(inst.image_id, []).append(inst)
        return grouped


@dataclass(frozen=True, slots=True)
class RawPrediction:
    """Detector output before open-set labeling: one box with a per-known-class vector."""

    image_id: str
    box: BoundingBox
    scores: tuple[float, ...]
    value_kind: ValueKind = ValueKind.PROBABILITIES
    head_kind: HeadKind = HeadKind.SIGMOID

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        object.__setattr__(self, "value_kind", ValueKind(self.value_kind))
        object.__setattr__(self, "head_kind", HeadKind(self.head_kind))
        if not self.scores:
            raise ValueError("empty score vector")
        if not all(math.isfinite(s) for s in self.scores):
            raise ValueError("non-finite score in vector")
        if self.value_kind is ValueKind.PROBABILITIES:
            if any(s < 0.0 or s > 1.0 for s in self.scores):
                raise ValueError("probability outside [0, 1]")
            if self.head_kind is HeadKind.SOFTMAX and math.fsum(self.scores) > 1.0 + 1e-6:
                raise ValueError(f"softmax probabilities sum to {math.fsum(self.scores):.8f} > 1")


@dataclass(frozen=True, slots=True)
class Detection:
    """A labeled detection. ``class_id is None`` means the box is labeled unknown."""

    image_id: str
    box: BoundingBox
    class_id: int | None
    score: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.score) or self.score < 0.0:
            raise ValueError(f"detection score must be finite and >= 0, got {self.score}")

    @property
    def is_unknown(self) -> bool:
        return self.class_id is None


def sorted_class_ids(classes: Sequence[int] | frozenset[int]) -> list[int]:
    return sorted(int(c) for c in classes)
