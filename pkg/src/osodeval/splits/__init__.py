from .ncut import (
    CoOccurrenceGraph,
    Partition,
    build_cooccurrence_graph,
    ncut_value,
    normalized_cut,
)
from .presets import PRESETS, Preset, load_preset, preset_splits
from .random_split import RandomSplitConfig, random_k_splits
from .rng import Xoshiro256, splitmix64
from .spec import known_from_partition, make_split_spec, splits_from_partition, splits_from_random
