from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigurationError
from .rng import Xoshiro256


@dataclass(frozen=True)
class RandomSplitConfig:
    k: int
    seed: int
    class_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "class_ids", tuple(int(c) for c in self.class_ids))
        if len(set(self.class_ids)) != len(self.class_ids):
            raise ConfigurationError("class_ids contain duplicates")
        if self.k < 2:
            raise ConfigurationError(f"k must be >= 2, got {self.k}")
        if self.k > len(self.class_ids):
            raise ConfigurationError(f"k={self.k} exceeds the number of classes ({len(self.class_ids)})")


def random_k_splits(config: RandomSplitConfig) -> list[tuple[int, ...]]:
    """Partition classes into ``k`` near-equal random groups.

    The sorted class ids are shuffled with :class:`Xoshiro256` seeded by
    ``config.seed`` and cut into consecutive chunks; the first ``n % k``
    chunks take the extra element. Each returned group is sorted.
    """
    ids = sorted(config.class_ids)
    Xoshiro256(config.seed).shuffle(ids)
    n, k = len(ids), config.k
    base, extra = divmod(n, k)
    groups = []
    start = 0
    for g in range(k):
        size = base + (1 if g < extra else 0)
        groups.append(tuple(sorted(ids[start:start + size])))
        start += size
    return groups
