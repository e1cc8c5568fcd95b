"""Class-aware greedy matching of predictions to ground truth and the
object-level detection metrics built on top of it.

The matching protocol: predictions below the confidence threshold are
discarded; the rest are processed in descending confidence (ties broken
by higher best-IoU against same-class ground truth, then input order).
Each prediction claims the unmatched same-class ground-truth box with the
highest IoU when that IoU clears the threshold (ties go to the lower
ground-truth index); otherwise it is a false positive. Ground truth left
unmatched is a false negative. Cross-class IoU is never consulted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import SchemaError, UndefinedMetricError
from .geometry import ARTEFACT, FUNGAL, Box, iou_matrix

ScenePair = tuple[Sequence[Box], Sequence[Box]]  # (ground truth, predictions)

AP_IOU_THRESHOLDS = tuple(t / 100 for t in range(50, 100, 5))


@dataclass(frozen=True)
class OperatingPoint:
    """The (confidence, IoU) pair at which count-based metrics are read.

    Object-level matching keeps predictions with confidence >= the
    threshold; the image-level screening rule fires on strictly greater.
    Both comparisons live here so they cannot drift apart.
    """

    conf_threshold: float = 0.25
    iou_threshold: float = 0.50

    def __post_init__(self):
        for name in ("conf_threshold", "iou_threshold"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise SchemaError(f"{name} must lie in (0, 1], got {value}")

    def admits(self, confidence: float) -> bool:
        """Object-level keep rule: confidence >= threshold."""
        return confidence >= self.conf_threshold

    def flags_positive(self, confidence: float) -> bool:
        """Image-level screening rule: confidence strictly > threshold."""
        return confidence > self.conf_threshold


@dataclass(frozen=True)
class MatchReport:
    """Matching outcome for one image at one operating point.

    Indices refer to the ground-truth / prediction lists handed to
    ``match_image``. Each index appears at most once; together the fields
    partition the thresholded predictions and the ground truth exactly.
    ``class_counts`` maps class_id -> (tp, fp, fn).
    """

    tp_pairs: tuple[tuple[int, int, float], ...]
    fp_pred_indices: tuple[int, ...]
    fn_gt_indices: tuple[int, ...]
    class_counts: Mapping[int, tuple[int, int, int]] = field(default_factory=dict)


def _prediction_order(preds: Sequence[Box], kept: Sequence[int],
                      best_iou: Sequence[float]) -> list[int]:
    # Sort positions into `kept` by (-confidence, -best same-class IoU, input order).
    return sorted(range(len(kept)),
                  key=lambda j: (-preds[kept[j]].confidence, -best_iou[j], kept[j]))


def _count_classes(gts: Sequence[Box], preds: Sequence[Box],
                   tp_pairs, fp_indices, fn_indices) -> dict[int, tuple[int, int, int]]:
    classes = sorted({b.class_id for b in gts} | {preds[i].class_id for i in
                     itertools.chain((p for _, p, _ in tp_pairs), fp_indices)})
    counts = {}
    for c in classes:
        tp = sum(1 for g, _, _ in tp_pairs if gts[g].class_id == c)
        fp = sum(1 for i in fp_indices if preds[i].class_id == c)
        fn = sum(1 for i in fn_indices if gts[i].class_id == c)
        counts[c] = (tp, fp, fn)
    return counts


def match_image(gts: Sequence[Box], preds: Sequence[Box],
                op: OperatingPoint = OperatingPoint()) -> MatchReport:
    """Match one image's predictions to its ground truth.

    Vectorized over an IoU matrix; bit-for-bit equivalent to the naive
    reference matcher in :mod:`koheval.synth`.
    """
    kept = [i for i, p in enumerate(preds) if op.admits(p.confidence)]
    ious = iou_matrix(gts, [preds[i] for i in kept])
    same_class = np.array(
        [[g.class_id == preds[i].class_id for i in kept] for g in gts]
    ).reshape(len(gts), len(kept))
    candidate = np.where(same_class, ious, -1.0)

    best_static = candidate.max(axis=0, initial=0.0)
    best_static = np.maximum(best_static, 0.0)

    available = np.ones(len(gts), dtype=bool)
    tp_pairs: list[tuple[int, int, float]] = []
    fp_indices: list[int] = []
    for j in _prediction_order(preds, kept, best_static):
        column = np.where(available, candidate[:, j], -1.0)
        if column.size:
            g = int(np.argmax(column))
            value = column[g]
        else:
            value = -1.0
        if value >= op.iou_threshold:
            available[g] = False
            tp_pairs.append((g, kept[j], float(ious[g, j])))
        else:
            fp_indices.append(kept[j])
    fn_indices = [g for g in range(len(gts)) if available[g]]
    fp_indices.sort()
    return MatchReport(
        tp_pairs=tuple(tp_pairs),
        fp_pred_indices=tuple(fp_indices),
        fn_gt_indices=tuple(fn_indices),
        class_counts=_count_classes(gts, preds, tp_pairs, fp_indices, fn_indices),
    )


def counts_to_prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall and F1 from raw counts (0/0 reads as 0)."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class PRCurve:
    """Cumulative precision/recall sampled at each distinct confidence,
    ordered by descending confidence."""

    points: tuple[tuple[float, float, float], ...]  # (confidence, precision, recall)
    total_gt: int

    def __post_init__(self):
        confs = [p[0] for p in self.points]
        recalls = [p[2] for p in self.points]
        if confs != sorted(confs, reverse=True):
            raise SchemaError("curve points must be sorted by descending confidence")
        if recalls != sorted(recalls):
            raise SchemaError("recall must be non-decreasing as confidence drops")


def pr_curve(scenes: Sequence[ScenePair], class_id: int,
             iou_threshold: float = 0.50) -> PRCurve:
    """Pooled precision-recall curve for one class across images.

    Predictions are pooled over all scenes and swept in descending
    confidence, applying the greedy match rule incrementally within each
    prediction's own image. Callers wanting order-independent output
    should pass scenes sorted by image id.
    """
    gt_lists = [[b for b in gts if b.class_id == class_id] for gts, _ in scenes]
    total_gt = sum(len(g) for g in gt_lists)
    if total_gt == 0:
        raise UndefinedMetricError(
            f"no ground truth of class {class_id}: recall undefined"
        )

    pooled = []  # (sort key..., image index, iou column)
    matrices = []
    for img_rank, (gts, preds) in enumerate(scenes):
        class_preds = [(i, p) for i, p in enumerate(preds)
                       if p.class_id == class_id]
        matrix = iou_matrix(gt_lists[img_rank], [p for _, p in class_preds])
        matrices.append(matrix)
        for col, (pred_index, pred) in enumerate(class_preds):
            best = float(matrix[:, col].max(initial=0.0))
            pooled.append((-pred.confidence, -best, img_rank, pred_index, col))
    pooled.sort()

    available = [np.ones(len(g), dtype=bool) for g in gt_lists]
    points: list[tuple[float, float, float]] = []
    tp = fp = 0
    for neg_conf, _, img_rank, _, col in pooled:
        column = matrices[img_rank][:, col]
        masked = np.where(available[img_rank], column, -1.0)
        if masked.size:
            g = int(np.argmax(masked))
            value = masked[g]
        else:
            value = -1.0
        if value >= iou_threshold:
            available[img_rank][g] = False
            tp += 1
        else:
            fp += 1
        points.append((-neg_conf, tp / (tp + fp), tp / total_gt))

    # Collapse to the last cumulative state per distinct confidence.
    collapsed = [list(group)[-1] for _, group in
                 itertools.groupby(points, key=lambda p: p[0])]
    return PRCurve(points=tuple(collapsed), total_gt=total_gt)


def _envelope(curve: PRCurve) -> tuple[np.ndarray, np.ndarray]:
    # Points run from high confidence to low, which is ascending recall.
    # The suffix maximum makes the envelope non-increasing in recall.
    recalls = np.array([p[2] for p in curve.points])
    precisions = np.array([p[1] for p in curve.points])
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    return recalls, envelope


def average_precision(curve: PRCurve, interpolation: str = "101") -> float:
    """Average precision from a PR curve.

    ``"101"`` computes the 101-point interpolated mean (precision envelope
    sampled at recalls 0.00, 0.01, ..., 1.00); ``"all"`` integrates the
    envelope step function exactly.
    """
    if interpolation not in ("101", "all"):
        raise SchemaError(f"unknown interpolation {interpolation!r}")
    if not curve.points:
        return 0.0
    recalls, envelope = _envelope(curve)
    if interpolation == "101":
        grid = np.arange(101) / 100.0
        idx = np.searchsorted(recalls, grid, side="left")
        sampled = np.where(idx < len(recalls),
                           envelope[np.minimum(idx, len(recalls) - 1)], 0.0)
        return float(sampled.mean())
    steps = np.diff(np.concatenate(([0.0], recalls)))
    return float(np.sum(steps * envelope))


def ap_sweep(scenes: Sequence[ScenePair], class_id: int,
             interpolation: str = "101") -> tuple[float, float]:
    """AP at IoU 0.50 and the mean over thresholds 0.50:0.05:0.95."""
    values = [average_precision(pr_curve(scenes, class_id, t), interpolation)
              for t in AP_IOU_THRESHOLDS]
    return values[0], sum(values) / len(values)


def mean_matched_iou(reports: Sequence[MatchReport]) -> float:
    """Arithmetic mean IoU over every matched (TP) pair in the reports."""
    ious = [v for report in reports for _, _, v in report.tp_pairs]
    if not ious:
        raise UndefinedMetricError("no matched pairs: mean IoU undefined")
    return sum(ious) / len(ious)


# ---------------------------------------------------------------------------
# Dataset-level assembly


@dataclass(frozen=True)
class ClassMetrics:
    """Object-level metrics for a single class."""

    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    ap50: float | None
    ap50_95: float | None
    mean_iou: float | None


@dataclass(frozen=True)
class MacroMetrics:
    """Unweighted averages of per-class values; None where no class has a
    defined value."""

    precision: float | None
    recall: float | None
    f1: float | None
    ap50: float | None
    ap50_95: float | None
    mean_iou: float | None


@dataclass(frozen=True)
class ObjectMetrics:
    per_class: Mapping[int, ClassMetrics]
    macro: MacroMetrics

    @property
    def fungal(self) -> ClassMetrics:
        """The headline class: clinically, artefact detections are
        suppressors, not findings."""
        return self.per_class[FUNGAL]


def _macro(values: Sequence[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def evaluate_detections(records, op: OperatingPoint = OperatingPoint(),
                        interpolation: str = "101",
                        class_ids: Sequence[int] = (FUNGAL, ARTEFACT)
                        ) -> ObjectMetrics:
    """Run matching over a whole dataset and assemble per-class + macro
    object-level metrics.

    ``records`` is a sequence of ImageRecord; pooling order is fixed by
    sorting on image_id, so record order never changes the result.
    """
    ordered = sorted(records, key=lambda r: r.image_id)
    scenes = [(r.ground_truth, r.predictions) for r in ordered]
    reports = [match_image(gts, preds, op) for gts, preds in scenes]

    per_class: dict[int, ClassMetrics] = {}
    for c in class_ids:
        tp = fp = fn = 0
        matched: list[float] = []
        for (gts, _), report in zip(scenes, reports):
            c_tp, c_fp, c_fn = report.class_counts.get(c, (0, 0, 0))
            tp, fp, fn = tp + c_tp, fp + c_fp, fn + c_fn
            matched.extend(v for g, _, v in report.tp_pairs
                           if gts[g].class_id == c)
        precision, recall, f1 = counts_to_prf(tp, fp, fn)
        if tp + fn > 0:
            ap50, ap50_95 = ap_sweep(scenes, c, interpolation)
        else:
            ap50 = ap50_95 = None
        mean_iou = sum(matched) / len(matched) if matched else None
        per_class[c] = ClassMetrics(tp, fp, fn, precision, recall, f1,
                                    ap50, ap50_95, mean_iou)

    present = [m for m in per_class.values() if m.tp + m.fp + m.fn > 0]
    macro = MacroMetrics(
        precision=_macro([m.precision for m in present]),
        recall=_macro([m.recall for m in present]),
        f1=_macro([m.f1 for m in present]),
        ap50=_macro([m.ap50 for m in per_class.values()]),
        ap50_95=_macro([m.ap50_95 for m in per_class.values()]),
        mean_iou=_macro([m.mean_iou for m in per_class.values()]),
    )
    return ObjectMetrics(per_class=per_class, macro=macro)
