from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Literal

from ..errors import ConfigurationError
from .types import DatasetView, GroundTruthInstance, SplitProtocol, SplitSpec


@dataclass(frozen=True)
class Diagnostic:
    severity: Literal["error", "warning"]
    message: str


def validate(dataset: DatasetView) -> list[Diagnostic]:
    """Check every data-model invariant; an empty list means the view is valid.

    Boxes overflowing their image bounds are warnings, not errors, since
    annotations in the wild routinely exceed the frame by a pixel or two.
    """
    out: list[Diagnostic] = []
    counts = Counter(img.image_id for img in dataset.images)
    for image_id, n in counts.items():
        if n > 1:
            out.append(Diagnostic("error", f"duplicate image_id {image_id!r} ({n} occurrences)"))

    index = dataset.image_index
    n_classes = len(dataset.taxonomy)
    for i, inst in enumerate(dataset.instances):
        if inst.image_id not in index:
            out.append(Diagnostic("error", f"instance {i}: image_id {inst.image_id!r} not in images"))
            continue
        if not (0 <= inst.class_id < n_classes):
            out.append(Diagnostic("error", f"instance {i}: class_id {inst.class_id} not in taxonomy"))
        img = index[inst.image_id]
        b = inst.box
        if img.width is not None and img.height is not None:
            if b.x_min < 0 or b.y_min < 0 or b.x_max > img.width or b.y_max > img.height:
                out.append(
                    Diagnostic(
                        "warning",
                        f"instance {i}: box {b.as_list()} exceeds bounds of image "
                        f"{inst.image_id!r} ({img.width}x{img.height})",
                    )
                )

    if dataset.split is not None:
        out.extend(_validate_split(dataset, dataset.split))
    return out


def _validate_split(dataset: DatasetView, split: SplitSpec) -> list[Diagnostic]:
    out = []
    n_classes = len(dataset.taxonomy)
    stray = sorted(c for c in split.evaluated_classes if not 0 <= c < n_classes)
    if stray:
        out.append(Diagnostic("error", f"split references classes outside taxonomy: {stray}"))
    index = dataset.image_index
    by_image = dataset.instances_by_image
    for subset, ids in (("train", split.train_images), ("val", split.val_images), ("test", split.test_images)):
        missing = [i for i in ids if i not in index]
        if missing:
            out.append(Diagnostic("error", f"split {subset} list names {len(missing)} unknown image(s), e.g. {missing[0]!r}"))
    protocol = split.provenance.get("protocol", SplitProtocol.KEEP)
    drop = SplitProtocol.coerce(protocol) is SplitProtocol.DROP
    for image_id in split.train_images:
        insts = by_image.get(image_id, [])
        if not any(inst.class_id in split.known_classes for inst in insts):
            out.append(Diagnostic("error", f"train image {image_id!r} has no known-class instance"))
        # Under the drop protocol a train image must not show any unknown object;
        # under keep, non-known annotations are simply filtered out.
        if drop:
            bad = {inst.class_id for inst in insts if inst.class_id in split.unknown_classes}
            if bad:
                out.append(Diagnostic("error", f"train image {image_id!r} shows unknown classes {sorted(bad)}"))
    return out


def apply_split(
    dataset: DatasetView,
    split: SplitSpec,
    protocol: SplitProtocol | str = SplitProtocol.KEEP,
) -> DatasetView:
    """Restrict a dataset to a split's image subsets and class sets.

    Train images need at least one known instance and keep only known
    annotations; under the drop protocol any train image with an unknown
    instance is removed. Validation images need a known instance, test images
    a known or unknown one; both keep known and unknown annotations. All
    other classes' annotations are removed everywhere.
    """
    protocol = SplitProtocol.coerce(protocol)
    n_classes = len(dataset.taxonomy)
    stray = sorted(c for c in split.evaluated_classes if not 0 <= c < n_classes)
    if stray:
        raise ConfigurationError(f"split references classes outside taxonomy: {stray}")

    known, unknown = split.known_classes, split.unknown_classes
    by_image = dataset.instances_by_image
    kept: dict[str, list[GroundTruthInstance]] = {}
    removed_annotations = 0
    removed_images = 0

    train = []
    for image_id in split.train_images:
        insts = by_image.get(image_id, [])
        has_known = any(i.class_id in known for i in insts)
        has_unknown = any(i.class_id in unknown for i in insts)
        if not has_known or (protocol is SplitProtocol.DROP and has_unknown):
            removed_images += 1
            continue
        train.append(image_id)
        kept[image_id] = [i for i in insts if i.class_id in known]
        removed_annotations += sum(1 for i in insts if i.class_id in unknown)

    val = []
    for image_id in split.val_images:
        insts = by_image.get(image_id, [])
        if any(i.class_id in known for i in insts):
            val.append(image_id)
            kept[image_id] = [i for i in insts if i.class_id in known or i.class_id in unknown]

    test = []
    for image_id in split.test_images:
        insts = [i for i in by_image.get(image_id, []) if i.class_id in known or i.class_id in unknown]
        if insts:
            test.append(image_id)
            kept[image_id] = insts

    if not train:
        raise ConfigurationError("split leaves the training set empty")

    provenance = dict(split.provenance)
    provenance["protocol"] = protocol.value
    # Removed unknown objects may be learned as background; recorded, not acted upon.
    provenance.setdefault("removed_unknown_train_annotations", removed_annotations)
    provenance.setdefault("removed_train_images", removed_images)
    new_split = replace(
        split,
        train_images=tuple(train),
        val_images=tuple(val),
        test_images=tuple(test),
        provenance=provenance,
    )
    images = tuple(img for img in dataset.images if img.image_id in kept)
    instances = tuple(inst for img in images for inst in kept[img.image_id])
    return DatasetView(dataset.taxonomy, images, instances, new_split)
