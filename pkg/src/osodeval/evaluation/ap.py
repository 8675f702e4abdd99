from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RECALL_POINTS = 101


@dataclass(frozen=True, eq=False)
class PRCurve:
    """Precision-recall points of a ranked detection list.

    Point ``i`` describes the top ``i + 1`` detections. Counts are kept as
    integers so recall levels can be compared exactly.
    """

    scores: np.ndarray
    tp_cum: np.ndarray
    fp_cum: np.ndarray
    n_gt: int

    @classmethod
    def from_ranked(cls, scores, is_tp, n_gt: int) -> "PRCurve":
        """Build from detections already sorted by descending score."""
        is_tp = np.asarray(is_tp, dtype=bool)
        return cls(
            np.asarray(scores, dtype=np.float64),
            np.cumsum(is_tp, dtype=np.int64),
            np.cumsum(~is_tp, dtype=np.int64),
            int(n_gt),
        )

    @property
    def recall(self) -> np.ndarray:
        return self.tp_cum / self.n_gt if self.n_gt else np.zeros(len(self.tp_cum))

    @property
    def precision(self) -> np.ndarray:
        return self.tp_cum / np.maximum(self.tp_cum + self.fp_cum, 1)

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.recall.tolist(), self.precision.tolist(), self.scores.tolist()))


def average_precision(curve: PRCurve) -> float | None:
    """101-point interpolated AP (COCO convention); None when there is no ground truth.

    Recall level ``j/100`` counts as reached when ``100 * TP >= j * n_gt``,
    which avoids the float round-off of comparing against ``linspace`` values.
    """
    if curve.n_gt == 0:
        return None
    n = len(curve.tp_cum)
    if n == 0:
        return 0.0
    envelope = np.maximum.accumulate(curve.precision[::-1])[::-1]
    need = np.arange(RECALL_POINTS, dtype=np.int64) * curve.n_gt
    idx = np.searchsorted(100 * curve.tp_cum, need, side="left")
    sampled = np.where(idx < n, envelope[np.minimum(idx, n - 1)], 0.0)
    return float(sampled.sum() / RECALL_POINTS)
