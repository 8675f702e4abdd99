from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any

from ..errors import ConfigurationError

DEFAULT_IOU_GRID = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation settings.

    The A-OSE confidence floor of 0.05 and the WI recall operating point of
    0.8 follow common open-world detection practice; both open-set metrics
    are computed at a single IoU threshold.
    """

    iou_grid: tuple[float, ...] = DEFAULT_IOU_GRID
    aose_conf_threshold: float = 0.05
    wi_recall_target: float = 0.8
    single_iou_for_openset: float = 0.5
    max_dets_per_image: int = 100

    def __post_init__(self) -> None:
        grid = tuple(float(t) for t in self.iou_grid)
        object.__setattr__(self, "iou_grid", grid)
        if not grid:
            raise ConfigurationError("iou_grid must not be empty")
        if any(not 0.0 < t <= 1.0 for t in grid):
            raise ConfigurationError("iou_grid values must lie in (0, 1]")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError("iou_grid must be strictly increasing")
        if not 0.0 < self.aose_conf_threshold < 1.0:
            raise ConfigurationError("aose_conf_threshold must lie in (0, 1)")
        if not 0.0 < self.single_iou_for_openset < 1.0:
            raise ConfigurationError("single_iou_for_openset must lie in (0, 1)")
        if not 0.0 < self.wi_recall_target <= 1.0:
            raise ConfigurationError("wi_recall_target must lie in (0, 1]")
        if int(self.max_dets_per_image) < 1:
            raise ConfigurationError("max_dets_per_image must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["iou_grid"] = list(self.iou_grid)
        return out

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "EvalConfig":
        allowed = {f.name for f in fields(cls)}
        unknown = set(doc) - allowed
        if unknown:
            raise ConfigurationError(f"unknown evaluation settings: {sorted(unknown)}")
        kwargs = dict(doc)
        if "iou_grid" in kwargs:
            kwargs["iou_grid"] = tuple(kwargs["iou_grid"])
        return cls(**kwargs)
