"""Greedy detection-to-ground-truth matching."""

from __future__ import annotations

from collections.abc import Collection, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from ..data.geometry import boxes_to_array
from ..data.types import Detection, GroundTruthInstance

UNKNOWN_POOL = "unknown"


@njit(cache=True, nogil=True, inline="always")
def _box_iou(ax0, ay0, ax1, ay1, bx0, by0, bx1, by1):
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return min(1.0, inter / union)


@njit(cache=True, nogil=True)
def match_groups(det_boxes, det_start, det_end, gt_boxes, gt_start, gt_end, thresholds):
    """Greedy matching for many independent (image, pool) groups.

    Within each group detections must already be in rank order. For every
    threshold, each detection takes the unmatched ground truth with the highest
    IoU >= threshold, ties to the lowest ground-truth position. Returns an
    ``(n_det, n_thresholds)`` array of matched ground-truth positions, -1 for
    unmatched.
    """
    n_det = det_boxes.shape[0]
    n_thr = thresholds.shape[0]
    out = np.full((n_det, n_thr), -1, dtype=np.int64)
    for g in range(det_start.shape[0]):
        d0 = det_start[g]
        g0 = gt_start[g]
        nd = det_end[g] - d0
        ng = gt_end[g] - g0
        if nd == 0 or ng == 0:
            continue
        ious = np.empty((nd, ng))
        for i in range(nd):
            a = det_boxes[d0 + i]
            for j in range(ng):
                b = gt_boxes[g0 + j]
                ious[i, j] = _box_iou(a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3])
        used = np.empty(ng, dtype=np.bool_)
        for t in range(n_thr):
            thr = thresholds[t]
            used[:] = False
            for i in range(nd):
                best = -1
                best_iou = 0.0
                for j in range(ng):
                    if used[j]:
                        continue
                    v = ious[i, j]
                    if v >= thr and (best < 0 or v > best_iou):
                        best = j
                        best_iou = v
                if best >= 0:
                    used[best] = True
                    out[d0 + i, t] = g0 + best
    return out


@njit(cache=True, nogil=True)
def max_iou_by_image(det_boxes, det_image, gt_boxes, gt_image_start, gt_image_end):
    """Largest IoU between each detection and any ground truth in its image."""
    n = det_boxes.shape[0]
    out = np.zeros(n)
    for i in range(n):
        img = det_image[i]
        a = det_boxes[i]
        best = 0.0
        for j in range(gt_image_start[img], gt_image_end[img]):
            b = gt_boxes[j]
            v = _box_iou(a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3])
            if v > best:
                best = v
        out[i] = best
    return out


class MatchKind(str, Enum):
    TP = "tp"
    FP = "fp"
    OPEN_SET_ERROR = "open_set_error"
    IGNORED_WRONG_POOL = "ignored_wrong_pool"


@dataclass(frozen=True, slots=True)
class MatchOutcome:
    kind: MatchKind
    gt_index: int | None = None


def match_image(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthInstance],
    iou_t: float,
    pool: int | str,
    unknown_classes: Collection[int] = (),
) -> list[MatchOutcome]:
    """Match one image's detections against one evaluation pool.

    ``pool`` is a known class id or ``"unknown"``. A class pool holds the
    ground truth of that class and detections labeled with it; the unknown
    pool holds all unknown-class ground truth and unknown-labeled detections.
    Detections outside the pool are reported as ignored. In a class pool,
    an unmatched detection overlapping an unknown object at ``iou_t`` is an
    open-set error. Outcomes are returned in input order; ``gt_index``
    indexes ``gts``.
    """
    unknown_classes = set(unknown_classes)
    if pool == UNKNOWN_POOL:
        in_pool = [i for i, d in enumerate(dets) if d.class_id is None]
        gt_pool = [j for j, g in enumerate(gts) if g.class_id in unknown_classes]
    else:
        in_pool = [i for i, d in enumerate(dets) if d.class_id == pool]
        gt_pool = [j for j, g in enumerate(gts) if g.class_id == pool]

    out = [MatchOutcome(MatchKind.IGNORED_WRONG_POOL)] * len(dets)
    order = sorted(in_pool, key=lambda i: (-dets[i].score, i))
    if not order:
        return out
    det_boxes = boxes_to_array([dets[i].box for i in order])
    gt_boxes = boxes_to_array([gts[j].box for j in gt_pool])
    one = np.zeros(1, dtype=np.int64)
    matched = match_groups(
        det_boxes, one, one + len(order), gt_boxes.reshape(-1, 4), one, one + len(gt_pool),
        np.array([iou_t], dtype=np.float64),
    )[:, 0]

    unk_idx = [j for j, g in enumerate(gts) if g.class_id in unknown_classes]
    if pool != UNKNOWN_POOL and unk_idx:
        unk_boxes = boxes_to_array([gts[j].box for j in unk_idx])
        det_img = np.zeros(len(order), dtype=np.int64)
        unk_iou = max_iou_by_image(det_boxes, det_img, unk_boxes, one, one + len(unk_idx))
    else:
        unk_iou = np.zeros(len(order))

    for rank, i in enumerate(order):
        m = matched[rank]
        if m >= 0:
            out[i] = MatchOutcome(MatchKind.TP, gt_pool[m])
        elif unk_iou[rank] >= iou_t:
            ious = [
                _box_iou(*dets[i].box.as_list(), *gts[j].box.as_list()) for j in unk_idx
            ]
            best = max(range(len(unk_idx)), key=lambda k: (ious[k], -k))
            out[i] = MatchOutcome(MatchKind.OPEN_SET_ERROR, unk_idx[best])
        else:
            out[i] = MatchOutcome(MatchKind.FP)
    return out
