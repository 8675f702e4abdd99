"""Published class groupings shipped as data, turned into split specs for a dataset."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from ..data.types import DatasetView, SplitProtocol, SplitSpec
from ..errors import ConfigurationError
from .spec import make_split_spec

PRESETS = ("cub200", "mtsd", "openimages_animal", "openimages_vehicle")

# How groups become known sets: one group known; one group unknown; or every
# listed group unknown and the remaining taxonomy classes known.
RULES = ("one_group", "all_but_one_group", "complement")


@dataclass(frozen=True)
class Preset:
    name: str
    super_class: str
    known_rule: str
    groups: dict[str, tuple[str, ...]]


def load_preset(name: str) -> Preset:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    doc = json.loads(resources.files("osodeval").joinpath("presets", f"{name}.json").read_text("utf-8"))
    groups = {k: tuple(v) for k, v in doc["groups"].items()}
    return Preset(name, doc["super_class"], doc["known_rule"], groups)


def preset_splits(
    dataset: DatasetView,
    name: str,
    protocol: SplitProtocol | str | None = None,
    seed: int = 0,
) -> list[SplitSpec]:
    """Splits for ``dataset`` following a shipped grouping; class names must match the taxonomy.

    The default protocol keeps unknown objects in train images for the
    one-group layout and drops such images otherwise.
    """
    preset = load_preset(name)
    tax = dataset.taxonomy
    names = set(tax.classes)
    missing = [n for g in preset.groups.values() for n in g if n not in names]
    if missing:
        raise ConfigurationError(
            f"preset {name!r}: {len(missing)} class name(s) not in the taxonomy, e.g. {missing[:3]}"
        )
    ids = {label: [tax.id_of(n) for n in g] for label, g in preset.groups.items()}
    if protocol is None:
        protocol = SplitProtocol.KEEP if preset.known_rule == "one_group" else SplitProtocol.DROP
    provenance = {"method": "preset", "preset": name}
    if preset.known_rule == "complement":
        listed = {c for g in ids.values() for c in g}
        known = [c for c in tax.class_ids if c not in listed]
        return make_split_spec(dataset, known, list(ids.values()), protocol, seed,
                               names=list(ids), provenance=provenance)
    specs = []
    for label, group in ids.items():
        others = [c for other, g in ids.items() if other != label for c in g]
        known, unknown = (group, others) if preset.known_rule == "one_group" else (others, group)
        specs += make_split_spec(dataset, known, [unknown], protocol, seed, names=[label],
                                 provenance={**provenance, "group": label})
    return specs
