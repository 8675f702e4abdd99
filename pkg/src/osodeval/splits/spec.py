"""Turning class groups into complete :class:`SplitSpec` objects."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from typing import Any

from ..data.types import DatasetView, SplitProtocol, SplitSpec
from ..errors import ConfigurationError
from .ncut import CoOccurrenceGraph, Partition, ncut_value
from .random_split import RandomSplitConfig, random_k_splits
from .rng import Xoshiro256

SUBSETS = ("train", "val", "test")
# Used only for images whose source carries no original subset.
DEFAULT_SUBSET_FRACTIONS = (0.7, 0.1, 0.2)


def _assign_subsets(
    dataset: DatasetView, seed: int, fractions: Sequence[float]
) -> tuple[dict[str, str], int]:
    subsets: dict[str, str] = {}
    loose = []
    for img in dataset.images:
        if img.subset is None:
            loose.append(img.image_id)
        elif img.subset in SUBSETS:
            subsets[img.image_id] = img.subset
        else:
            raise ConfigurationError(f"image {img.image_id!r} has unrecognised subset {img.subset!r}")
    if loose:
        if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
            raise ConfigurationError("subset fractions must be three non-negative numbers summing to 1")
        order = sorted(loose)
        Xoshiro256(seed).shuffle(order)
        n_train = int(round(fractions[0] * len(order)))
        n_val = int(round(fractions[1] * len(order)))
        for i, image_id in enumerate(order):
            subsets[image_id] = "train" if i < n_train else "val" if i < n_train + n_val else "test"
    return subsets, len(loose)


def make_split_spec(
    dataset: DatasetView,
    known: Iterable[int],
    unknowns: Sequence[Iterable[int]],
    protocol: SplitProtocol | str = SplitProtocol.KEEP,
    seed: int = 0,
    *,
    names: Sequence[str] | None = None,
    provenance: Mapping[str, Any] | None = None,
    subset_fractions: Sequence[float] = DEFAULT_SUBSET_FRACTIONS,
) -> list[SplitSpec]:
    """Build one split per unknown set, plus their union when there are several.

    Unknown sets are named ``U1``, ``U2``, ... and the union ``U1+2`` (or
    ``U1+2+3`` and so on) unless ``names`` is given. Image subsets follow
    the same rules as :func:`osodeval.data.ops.apply_split`: train images need
    a known instance (and, under the drop protocol, no unknown one), val
    images a known instance, test images a known or unknown instance.
    Images without an original subset are assigned by a seeded shuffle.
    """
    protocol = SplitProtocol.coerce(protocol)
    known = frozenset(int(c) for c in known)
    unknown_sets = [frozenset(int(c) for c in u) for u in unknowns]
    if not known:
        raise ConfigurationError("known class set is empty")
    if not unknown_sets or any(not u for u in unknown_sets):
        raise ConfigurationError("every unknown class set must be non-empty")
    groups = [known, *unknown_sets]
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            shared = groups[i] & groups[j]
            if shared:
                raise ConfigurationError(f"class sets overlap on {sorted(shared)}")
    n_classes = len(dataset.taxonomy)
    stray = sorted(c for g in groups for c in g if not 0 <= c < n_classes)
    if stray:
        raise ConfigurationError(f"classes outside taxonomy: {stray}")

    variants: list[tuple[str, frozenset[int]]] = []
    labels = list(names) if names is not None else [f"U{i + 1}" for i in range(len(unknown_sets))]
    if len(labels) != len(unknown_sets):
        raise ConfigurationError("names must match the number of unknown sets")
    variants.extend(zip(labels, unknown_sets))
    if len(unknown_sets) > 1:
        union_name = "U" + "+".join(str(i + 1) for i in range(len(unknown_sets))) if names is None else "+".join(labels)
        variants.append((union_name, frozenset().union(*unknown_sets)))

    subsets, n_loose = _assign_subsets(dataset, seed, subset_fractions)
    by_image = dataset.instances_by_image
    specs = []
    for name, unknown in variants:
        lists: dict[str, list[str]] = {s: [] for s in SUBSETS}
        for img in dataset.images:
            classes = {inst.class_id for inst in by_image.get(img.image_id, [])}
            has_known = bool(classes & known)
            has_unknown = bool(classes & unknown)
            subset = subsets[img.image_id]
            if subset == "train":
                ok = has_known and not (protocol is SplitProtocol.DROP and has_unknown)
            elif subset == "val":
                ok = has_known
            else:
                ok = has_known or has_unknown
            if ok:
                lists[subset].append(img.image_id)
        if not lists["train"]:
            raise ConfigurationError(f"split {name!r} has an empty training set")
        prov = dict(provenance or {})
        prov.update({"seed": int(seed), "protocol": protocol.value, "unknown_set": name})
        if n_loose:
            prov["randomly_assigned_images"] = n_loose
            prov["subset_fractions"] = list(subset_fractions)
        specs.append(
            SplitSpec(
                known_classes=known,
                unknown_classes=unknown,
                train_images=tuple(lists["train"]),
                val_images=tuple(lists["val"]),
                test_images=tuple(lists["test"]),
                name=name,
                provenance=prov,
            )
        )
    return specs


def known_from_partition(partition: Partition) -> tuple[int, list[int], bool]:
    """Pick the largest cluster as known; returns ``(known, unknown clusters, tie)``.

    Size ties resolve to the lowest cluster index.
    """
    sizes = partition.sizes()
    largest = max(sizes)
    known = sizes.index(largest)
    tie = sizes.count(largest) > 1
    return known, [c for c in range(partition.k) if c != known], tie


def splits_from_partition(
    dataset: DatasetView,
    graph: CoOccurrenceGraph,
    partition: Partition,
    protocol: SplitProtocol | str = SplitProtocol.DROP,
    seed: int = 0,
) -> list[SplitSpec]:
    """Known = largest cluster; each remaining cluster (and their union) is an unknown set."""
    known_c, unknown_cs, tie = known_from_partition(partition)
    vertex_class = graph.class_ids
    known = [vertex_class[v] for v in partition.members(known_c)]
    unknowns = [[vertex_class[v] for v in partition.members(c)] for c in unknown_cs]
    provenance = {
        "method": "ncut",
        "k": partition.k,
        "ncut_value": ncut_value(graph, partition),
        "known_cluster": known_c,
        "cluster_sizes": partition.sizes(),
        "largest_cluster_tie": tie,
        "isolated_classes": [vertex_class[v] for v in partition.isolated],
    }
    return make_split_spec(dataset, known, unknowns, protocol, seed, provenance=provenance)


def splits_from_random(
    dataset: DatasetView,
    config: RandomSplitConfig,
    protocol: SplitProtocol | str = SplitProtocol.KEEP,
    known_groups: int = 1,
) -> list[SplitSpec]:
    """One split per rotation of ``k`` random class groups.

    ``known_groups=1`` makes one group known and the union of the rest unknown
    (the Open Images layout); ``known_groups=k-1`` makes one group unknown
    (the CUB200 layout). Split ``i`` is named ``split{i+1}``.
    """
    groups = random_k_splits(config)
    k = config.k
    if not 1 <= known_groups < k:
        raise ConfigurationError(f"known_groups must be in [1, {k - 1}]")
    specs = []
    for i in range(k):
        chosen = [(i + j) % k for j in range(known_groups)]
        known = [c for g in chosen for c in groups[g]]
        unknown = [c for g in range(k) if g not in chosen for c in groups[g]]
        provenance = {"method": "random", "k": k, "split_index": i, "known_groups": chosen}
        spec = make_split_spec(
            dataset, known, [unknown], protocol, config.seed, names=[f"split{i + 1}"], provenance=provenance
        )[0]
        specs.append(spec)
    return specs
