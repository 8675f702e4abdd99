"""Score-ratio baseline: turn plain closed-set detector outputs into open-set detections.

A box whose top-1 / top-2 class-score ratio falls below ``gamma`` is labeled
unknown and scored by the sum of its top ``top_m`` class scores; otherwise it
keeps its argmax class and top-1 score.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .data.geometry import iou
from .data.types import Detection, HeadKind, RawPrediction, ValueKind
from .errors import ConfigurationError, OsodError
from .evaluation import MetricsReport, evaluate


@dataclass(frozen=True)
class BaselineConfig:
    gamma: float
    temperature: float = 1.0
    top_m: int = 3

    def __post_init__(self) -> None:
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigurationError(f"gamma must be a positive number, got {self.gamma}")
        if not (self.temperature > 0 and math.isfinite(self.temperature)):
            raise ConfigurationError(f"temperature must be a positive number, got {self.temperature}")
        if int(self.top_m) < 1:
            raise ConfigurationError(f"top_m must be >= 1, got {self.top_m}")


def scores_from_raw(pred: RawPrediction, temperature: float = 1.0) -> np.ndarray:
    """Class probabilities for one raw prediction.

    Softmax logits are divided by ``temperature`` first; sigmoid logits ignore
    it (with a warning when it is not 1). Probabilities pass through, and
    then only ``temperature == 1`` is allowed.
    """
    z = np.asarray(pred.scores, dtype=np.float64)
    if pred.value_kind is ValueKind.PROBABILITIES:
        if temperature != 1.0:
            raise ConfigurationError("temperature scaling needs logits, got probabilities")
        return z
    if pred.head_kind is HeadKind.SOFTMAX:
        z = z / temperature
        e = np.exp(z - z.max())
        return e / e.sum()
    if temperature != 1.0:
        warnings.warn("temperature has no effect on sigmoid heads; ignored", stacklevel=2)
    return 1.0 / (1.0 + np.exp(-z))


def relabel(pred: RawPrediction, cfg: BaselineConfig, class_ids: Sequence[int] | None = None) -> Detection:
    """Apply the ratio rule to one prediction.

    ``class_ids[i]`` is the class behind score position ``i`` (identity when
    omitted). A zero runner-up score gives an infinite ratio, hence a known
    label. Argmax ties go to the lowest position.
    """
    probs = scores_from_raw(pred, cfg.temperature)
    n = probs.shape[0]
    if n < 2:
        raise ConfigurationError("the ratio rule needs at least two classes")
    if cfg.top_m > n:
        raise ConfigurationError(f"top_m={cfg.top_m} exceeds the number of classes ({n})")
    if class_ids is not None and len(class_ids) != n:
        raise ConfigurationError(f"class_ids has {len(class_ids)} entries for {n} scores")
    if pred.value_kind is ValueKind.LOGITS and pred.head_kind is HeadKind.SOFTMAX:
        # Softmax ratios depend only on the logit gap; computing them from it
        # keeps the decision exactly monotone in the temperature.
        z = np.asarray(pred.scores, dtype=np.float64)
        order = np.argsort(-z, kind="stable")
        gap = (z[order[0]] - z[order[1]]) / cfg.temperature
        ratio = math.exp(gap) if gap < 709.0 else math.inf
    else:
        order = np.argsort(-probs, kind="stable")
        s1, s2 = probs[order[0]], probs[order[1]]
        with np.errstate(over="ignore"):
            ratio = math.inf if s2 == 0.0 else float(s1 / s2)
    if ratio < cfg.gamma:
        return Detection(pred.image_id, pred.box, None, float(math.fsum(probs[order[: cfg.top_m]])))
    top = int(order[0])
    return Detection(pred.image_id, pred.box, top if class_ids is None else int(class_ids[top]), float(probs[top]))


def relabel_all(
    preds: Sequence[RawPrediction], cfg: BaselineConfig, class_ids: Sequence[int] | None = None
) -> list[Detection]:
    out = []
    for i, p in enumerate(preds):
        try:
            out.append(relabel(p, cfg, class_ids))
        except (OsodError, ValueError) as exc:
            raise ConfigurationError(f"prediction {i}: {exc}") from exc
    return out


def cross_label_nms(dets: Sequence[Detection], iou_thresh: float) -> list[Detection]:
    """Suppress known/unknown duplicates of the same object.

    Greedy in score order (ties: known before unknown, then input order). A
    detection is dropped when a kept detection of the opposite kind in the
    same image overlaps it with IoU >= ``iou_thresh``. Pairs with the same
    kind are never compared. Survivors keep their input order.
    """
    if not 0.0 < iou_thresh <= 1.0:
        raise ConfigurationError("iou_thresh must lie in (0, 1]")
    by_image: dict[str, list[int]] = {}
    for i, d in enumerate(dets):
        by_image.setdefault(d.image_id, []).append(i)
    keep = [False] * len(dets)
    for idx in by_image.values():
        idx.sort(key=lambda i: (-dets[i].score, dets[i].is_unknown, i))
        kept: list[int] = []
        for i in idx:
            d = dets[i]
            if any(
                dets[j].is_unknown != d.is_unknown and iou(dets[j].box, d.box) >= iou_thresh for j in kept
            ):
                continue
            kept.append(i)
            keep[i] = True
    return [d for d, k in zip(dets, keep) if k]


@dataclass(frozen=True)
class SweepCell:
    gamma: float
    temperature: float
    n_unknown: int
    report: MetricsReport


def sweep_baseline(
    preds: Sequence[RawPrediction],
    gamma_grid: Sequence[float],
    temperature_grid: Sequence[float],
    gt_view,
    eval_cfg=None,
    *,
    top_m: int = 3,
    class_ids: Sequence[int] | None = None,
    cross_nms: float | None = None,
    sweep_thresholds: Sequence[float] | None = None,
) -> list[SweepCell]:
    """Evaluate the baseline at every (gamma, temperature) grid cell.

    Cells are ordered temperature-major, gamma-minor, each grid in the order given.
    """
    if not gamma_grid or not temperature_grid:
        raise ConfigurationError("gamma and temperature grids must be non-empty")
    if class_ids is None and gt_view.split is not None:
        class_ids = sorted(gt_view.split.known_classes)
    cells = []
    for t in temperature_grid:
        for g in gamma_grid:
            dets = relabel_all(preds, BaselineConfig(g, t, top_m), class_ids)
            if cross_nms is not None:
                dets = cross_label_nms(dets, cross_nms)
            n_unknown = sum(1 for d in dets if d.is_unknown)
            cells.append(SweepCell(float(g), float(t), n_unknown, evaluate(dets, gt_view, eval_cfg, sweep_thresholds)))
    return cells
