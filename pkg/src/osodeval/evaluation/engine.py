"""Open-set detection metrics over a whole test set.

Every detection belongs to exactly one pool: its labeled known class, or the
class-agnostic unknown pool. Matching is done once per (image, pool, IoU
threshold) and all metrics are read off the cached match table.

Open-set bookkeeping follows the wilderness-impact decomposition: a
known-labeled detection at the open-set IoU is a true positive, an open-set
error (not a TP, overlaps an unknown object) or a closed-set false positive
(everything else). ``fp_known`` counts only the last kind, so that
``P_K / P_KuU - 1 == A-OSE / (TP_known + FP_known)`` holds exactly.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..data.types import DatasetView, Detection
from ..errors import ConfigurationError, EvaluationError, RecallUnreachableError
from .ap import PRCurve, average_precision
from .config import EvalConfig
from .matching import match_groups, max_iou_by_image

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OperatingPointStats:
    conf_threshold: float
    tp_known: int
    fp_known: int
    aose: int
    recall_known: float
    precision_closed: float | None
    precision_open: float | None

    @property
    def wi(self) -> float | None:
        """Wilderness impact from counts; None when TP + FP is zero."""
        denom = self.tp_known + self.fp_known
        return self.aose / denom if denom else None

    @property
    def wi_from_precisions(self) -> float | None:
        """Wilderness impact as the precision ratio; None when either precision is zero or absent."""
        if not self.precision_closed or not self.precision_open:
            return None
        return self.precision_closed / self.precision_open - 1.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "threshold": self.conf_threshold,
            "tp": self.tp_known,
            "fp": self.fp_known,
            "aose": self.aose,
            "recall": self.recall_known,
            "precision_closed": self.precision_closed,
            "precision_open": self.precision_open,
            "wi": self.wi,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "OperatingPointStats":
        return cls(
            doc["threshold"], doc["tp"], doc["fp"], doc["aose"], doc["recall"],
            doc["precision_closed"], doc["precision_open"],
        )


@dataclass(frozen=True)
class MetricsReport:
    """All metrics for one (method, split) evaluation. APs are fractions in [0, 1]."""

    ap_known_per_class: dict[str, float]
    map_known: float
    ap_unk: float | None
    aose: int
    wi: float | None
    config: EvalConfig
    wi_threshold: float | None = None
    # Set when the WI recall target is unreachable.
    wi_max_recall: float | None = None
    sweep: list[OperatingPointStats] | None = None
    counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "ap_known_per_class": dict(self.ap_known_per_class),
            "map_known": self.map_known,
            "ap_unk": self.ap_unk,
            "aose": self.aose,
            "wi": self.wi,
            "wi_threshold": self.wi_threshold,
            "wi_max_recall": self.wi_max_recall,
            "sweep": None if self.sweep is None else [s.to_dict() for s in self.sweep],
            "counts": dict(self.counts),
            "config": self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "MetricsReport":
        sweep = doc.get("sweep")
        return cls(
            ap_known_per_class=dict(doc["ap_known_per_class"]),
            map_known=doc["map_known"],
            ap_unk=doc["ap_unk"],
            aose=doc["aose"],
            wi=doc["wi"],
            config=EvalConfig.from_dict(doc["config"]),
            wi_threshold=doc.get("wi_threshold"),
            wi_max_recall=doc.get("wi_max_recall"),
            sweep=None if sweep is None else [OperatingPointStats.from_dict(s) for s in sweep],
            counts=dict(doc.get("counts", {})),
        )


class OpenSetEvaluator:
    """Matches detections against a split's test set once and serves every metric.

    ``gt_view`` must carry a split (normally the output of ``apply_split``):
    its test images define the evaluation set and its known/unknown classes
    define the pools. Ground truth of other classes is ignored, as are
    detections on images outside the test set.
    """

    def __init__(self, dets: Sequence[Detection], gt_view: DatasetView, cfg: EvalConfig | None = None):
        self.cfg = cfg = cfg or EvalConfig()
        split = gt_view.split
        if split is None:
            raise ConfigurationError("ground-truth view carries no split; apply one first")
        self.taxonomy = gt_view.taxonomy
        self.known = sorted(split.known_classes)
        known_set = split.known_classes
        unknown_set = split.unknown_classes
        n_classes = len(gt_view.taxonomy)
        self.unk_pool = n_classes
        n_pools = n_classes + 1

        test_ids = split.test_images
        if not test_ids:
            raise ConfigurationError("split has no test images")
        img_index = {image_id: i for i, image_id in enumerate(test_ids)}
        n_img = len(test_ids)

        # Ground truth.
        gts = [
            g for g in gt_view.instances
            if g.image_id in img_index and (g.class_id in known_set or g.class_id in unknown_set)
        ]
        gt_img = np.array([img_index[g.image_id] for g in gts], dtype=np.int64)
        gt_pool = np.array(
            [g.class_id if g.class_id in known_set else self.unk_pool for g in gts], dtype=np.int64
        )
        gt_boxes = np.array([(g.box.x_min, g.box.y_min, g.box.x_max, g.box.y_max) for g in gts],
                            dtype=np.float64).reshape(-1, 4)
        self.n_gt = np.bincount(gt_pool, minlength=n_pools)
        self.n_known_gt = int(self.n_gt[:n_classes].sum())
        self.n_unknown_gt = int(self.n_gt[self.unk_pool])

        # Detections.
        self.n_input = len(dets)
        det_img = np.array([img_index.get(d.image_id, -1) for d in dets], dtype=np.int64)
        det_pool = np.empty(len(dets), dtype=np.int64)
        for i, d in enumerate(dets):
            if d.class_id is None:
                det_pool[i] = self.unk_pool
            elif d.class_id in known_set:
                det_pool[i] = d.class_id
            else:
                raise ConfigurationError(
                    f"detection {i} is labeled with class {d.class_id}, which is not a known class"
                )
        det_score = np.array([d.score for d in dets], dtype=np.float64)
        det_boxes = np.array([(d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max) for d in dets],
                             dtype=np.float64).reshape(-1, 4)
        det_orig = np.arange(len(dets), dtype=np.int64)
        on_test = det_img >= 0
        if not on_test.all():
            logger.info("ignoring %d detection(s) on images outside the test set", int((~on_test).sum()))
        det_img, det_pool, det_score, det_boxes, det_orig = (
            a[on_test] for a in (det_img, det_pool, det_score, det_boxes, det_orig)
        )

        # Rank detections inside each (image, pool) group; keep the top max_dets.
        key = det_img * n_pools + det_pool
        order = np.lexsort((det_orig, -det_score, key))
        key = key[order]
        group_keys, group_start = np.unique(key, return_index=True)
        rank = np.arange(len(key)) - np.repeat(group_start, np.diff(np.append(group_start, len(key))))
        keep = order[rank < cfg.max_dets_per_image]
        self.n_truncated = int(len(order) - len(keep))
        det_img, det_pool, det_score, det_boxes, det_orig = (
            a[keep] for a in (det_img, det_pool, det_score, det_boxes, det_orig)
        )
        key = key[rank < cfg.max_dets_per_image]
        group_keys, group_start = np.unique(key, return_index=True)
        group_end = np.append(group_start[1:], len(key))

        gt_key = gt_img * n_pools + gt_pool
        gt_order = np.argsort(gt_key, kind="stable")
        gt_key_sorted = gt_key[gt_order]
        gt_boxes_sorted = np.ascontiguousarray(gt_boxes[gt_order])
        gt_start = np.searchsorted(gt_key_sorted, group_keys, side="left")
        gt_end = np.searchsorted(gt_key_sorted, group_keys, side="right")

        thresholds = list(cfg.iou_grid)
        if cfg.single_iou_for_openset in thresholds:
            self._openset_col = thresholds.index(cfg.single_iou_for_openset)
        else:
            self._openset_col = len(thresholds)
            thresholds.append(cfg.single_iou_for_openset)
        matched = match_groups(
            np.ascontiguousarray(det_boxes), group_start.astype(np.int64), group_end.astype(np.int64),
            gt_boxes_sorted, gt_start.astype(np.int64), gt_end.astype(np.int64),
            np.array(thresholds, dtype=np.float64),
        )
        self._tp = matched >= 0
        self._grid_cols = len(cfg.iou_grid)

        # Overlap of known-labeled detections with unknown objects.
        unk = gt_pool == self.unk_pool
        unk_img = gt_img[unk]
        unk_order = np.argsort(unk_img, kind="stable")
        unk_boxes = np.ascontiguousarray(gt_boxes[unk][unk_order])
        unk_img_sorted = unk_img[unk_order]
        img_range = np.arange(n_img)
        unk_start = np.searchsorted(unk_img_sorted, img_range, side="left")
        unk_end = np.searchsorted(unk_img_sorted, img_range, side="right")
        self._unk_iou = max_iou_by_image(
            np.ascontiguousarray(det_boxes), det_img, unk_boxes,
            unk_start.astype(np.int64), unk_end.astype(np.int64),
        )

        self._pool = det_pool
        self._score = det_score
        self._orig = det_orig

        # Known-labeled detections in global rank order, for operating points.
        known_mask = det_pool != self.unk_pool
        k_idx = np.flatnonzero(known_mask)
        k_idx = k_idx[np.lexsort((det_orig[k_idx], -det_score[k_idx]))]
        tp = self._tp[k_idx, self._openset_col]
        ose = ~tp & (self._unk_iou[k_idx] >= cfg.single_iou_for_openset)
        fpc = ~tp & ~ose
        self._k_score = det_score[k_idx]
        self._k_neg_score = -self._k_score
        self._k_cum_tp = np.concatenate(([0], np.cumsum(tp)))
        self._k_cum_ose = np.concatenate(([0], np.cumsum(ose)))
        self._k_cum_fpc = np.concatenate(([0], np.cumsum(fpc)))

    # -- average precision ----------------------------------------------------

    def _pool_curves(self, pool: int) -> list[PRCurve]:
        sel = np.flatnonzero(self._pool == pool)
        sel = sel[np.lexsort((self._orig[sel], -self._score[sel]))]
        n_gt = int(self.n_gt[pool])
        scores = self._score[sel]
        return [
            PRCurve.from_ranked(scores, self._tp[sel, t], n_gt) for t in range(self._grid_cols)
        ]

    def _pool_ap(self, pool: int) -> float | None:
        if self.n_gt[pool] == 0:
            return None
        aps = [average_precision(c) for c in self._pool_curves(pool)]
        return float(sum(aps) / len(aps))

    def ap_known(self) -> tuple[dict[int, float], float]:
        per_class = {}
        for c in self.known:
            ap = self._pool_ap(c)
            if ap is not None:
                per_class[c] = ap
        if not per_class:
            raise EvaluationError("no known-class ground truth in the test set")
        return per_class, float(sum(per_class.values()) / len(per_class))

    def ap_unknown(self) -> float | None:
        return self._pool_ap(self.unk_pool)

    # -- operating points -----------------------------------------------------

    def _count_at(self, threshold: float) -> int:
        return int(np.searchsorted(self._k_neg_score, -threshold, side="right"))

    def _stats_at_count(self, threshold: float, m: int) -> OperatingPointStats:
        tp = int(self._k_cum_tp[m])
        fp = int(self._k_cum_fpc[m])
        aose = int(self._k_cum_ose[m])
        recall = tp / self.n_known_gt if self.n_known_gt else 0.0
        closed = tp / (tp + fp) if tp + fp else None
        opened = tp / (tp + fp + aose) if tp + fp + aose else None
        return OperatingPointStats(float(threshold), tp, fp, aose, recall, closed, opened)

    def operating_point(self, conf_threshold: float) -> OperatingPointStats:
        return self._stats_at_count(conf_threshold, self._count_at(conf_threshold))

    def sweep(self, thresholds: Sequence[float]) -> list[OperatingPointStats]:
        thresholds = [float(t) for t in thresholds]
        if any(b < a for a, b in zip(thresholds, thresholds[1:])):
            raise ConfigurationError("sweep thresholds must be sorted ascending")
        return [self.operating_point(t) for t in thresholds]

    def a_ose(self) -> int:
        return int(self._k_cum_ose[self._count_at(self.cfg.aose_conf_threshold)])

    def wilderness_impact(self) -> tuple[float, OperatingPointStats]:
        """WI at the highest score threshold whose micro known recall reaches the target."""
        if self.n_known_gt == 0:
            raise EvaluationError("no known-class ground truth in the test set")
        target = self.cfg.wi_recall_target
        scores = self._k_score
        if len(scores) == 0:
            raise RecallUnreachableError(target, 0.0)
        # Last position of every run of equal scores.
        ends = np.flatnonzero(np.append(scores[1:] != scores[:-1], True))
        recall = self._k_cum_tp[ends + 1] / self.n_known_gt
        hit = np.flatnonzero(recall >= target)
        if hit.size == 0:
            raise RecallUnreachableError(target, float(recall.max()))
        end = int(ends[hit[0]])
        stats = self._stats_at_count(scores[end], end + 1)
        wi = stats.wi
        if wi is None:
            raise EvaluationError("no known detections at the WI operating point")
        return wi, stats

    # -- full report ----------------------------------------------------------

    def report(self, sweep_thresholds: Sequence[float] | None = None) -> MetricsReport:
        per_class, map_known = self.ap_known()
        wi = wi_threshold = wi_max_recall = None
        try:
            wi, stats = self.wilderness_impact()
            wi_threshold = stats.conf_threshold
        except RecallUnreachableError as exc:
            wi_max_recall = exc.max_recall
            logger.warning("%s", exc)
        return MetricsReport(
            ap_known_per_class={self.taxonomy.name_of(c): ap for c, ap in per_class.items()},
            map_known=map_known,
            ap_unk=self.ap_unknown(),
            aose=self.a_ose(),
            wi=wi,
            config=self.cfg,
            wi_threshold=wi_threshold,
            wi_max_recall=wi_max_recall,
            sweep=None if sweep_thresholds is None else self.sweep(sweep_thresholds),
            counts={
                "detections": self.n_input,
                "evaluated_detections": int(len(self._pool)),
                "truncated_detections": self.n_truncated,
                "known_gt": self.n_known_gt,
                "unknown_gt": self.n_unknown_gt,
            },
        )


def ap_known(dets, gt_view, cfg=None) -> tuple[dict[int, float], float]:
    """Per-class AP averaged over the IoU grid, and their unweighted mean.

    Classes without test ground truth are left out of both.
    """
    return OpenSetEvaluator(dets, gt_view, cfg).ap_known()


def ap_unknown(dets, gt_view, cfg=None) -> float | None:
    """Class-agnostic AP of unknown-labeled detections; None without unknown ground truth."""
    return OpenSetEvaluator(dets, gt_view, cfg).ap_unknown()


def a_ose(dets, gt_view, cfg=None) -> int:
    return OpenSetEvaluator(dets, gt_view, cfg).a_ose()


def operating_point(dets, gt_view, conf_threshold: float, cfg=None) -> OperatingPointStats:
    return OpenSetEvaluator(dets, gt_view, cfg).operating_point(conf_threshold)


def wilderness_impact(dets, gt_view, cfg=None) -> float:
    return OpenSetEvaluator(dets, gt_view, cfg).wilderness_impact()[0]


def sweep_operating_points(dets, gt_view, thresholds, cfg=None) -> list[OperatingPointStats]:
    return OpenSetEvaluator(dets, gt_view, cfg).sweep(thresholds)


def evaluate(dets, gt_view, cfg=None, sweep_thresholds=None) -> MetricsReport:
    return OpenSetEvaluator(dets, gt_view, cfg).report(sweep_thresholds)
