"""Seeded synthetic cohorts with planted TP/FP/FN structure, plus naive
reference implementations of the matcher and the AP integrator.

Every generated box is snapped to the 6-decimal grid of the line format
before use, so a cohort written to disk and read back is bit-identical to
the in-memory one. Placement keeps a 2.5x envelope around each object
disjoint from all others; perturbed predictions stay inside their own
envelope, so a planted TP can only match its own ground-truth box and a
planted FP overlaps nothing. Planted roles are therefore exact at the
default operating point, not merely probable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import (
    Dataset,
    ImageRecord,
    atomic_write_text,
    attach_predictions,
    format_gt_file,
    format_pred_file,
    load_ground_truth,
)
from .errors import GenerationError, SchemaError
from .geometry import ARTEFACT, FUNGAL, Box, ImageDims, iou
from .metrics import MatchReport, OperatingPoint, PRCurve

ROLES = ("tp", "fp", "fn", "suppressed")

_PLACEMENT_TRIES = 200
_ENVELOPE_FACTOR = 2.5
# Reserved PRNG stream for cross-image assignment decisions; image streams
# use the image index, which never reaches this value.
_ASSIGN_STREAM = 2**32


def _q6(value: float) -> float:
    """Snap to the 6-decimal grid used by the line format."""
    return float(f"{value:.6f}")


def _grid_box(frame: ImageDims, class_id: int, cx: float, cy: float,
              w: float, h: float, confidence: float | None) -> Box:
    """Build a box from pixel center/size, snapped to the file grid.

    Denormalization mirrors the parser exactly, so this box survives a
    write/read round-trip bit for bit.
    """
    ncx = _q6(cx / frame.width)
    ncy = _q6(cy / frame.height)
    nw = _q6(w / frame.width)
    nh = _q6(h / frame.height)
    if confidence is not None:
        confidence = _q6(confidence)
    return Box((ncx - nw / 2.0) * frame.width,
               (ncy - nh / 2.0) * frame.height,
               (ncx + nw / 2.0) * frame.width,
               (ncy + nh / 2.0) * frame.height,
               class_id, confidence)


@dataclass(frozen=True)
class SynthSpec:
    """Configuration for cohort generation.

    Confidence bands keep roles decidable at the default operating point:
    suppressed predictions sit strictly below the confidence threshold,
    TP and FP predictions strictly above it.
    """

    n_images: int = 40
    frame: ImageDims = ImageDims(2048, 2048)
    fungal_per_image: tuple[int, int] = (0, 3)
    artefact_per_image: tuple[int, int] = (0, 2)
    tp_rate: float = 0.85
    fp_extra_rate: float = 0.30
    iou_mean: float = 0.80
    iou_spread: float = 0.10
    tp_confidence: tuple[float, float] = (0.60, 0.95)
    fp_confidence: tuple[float, float] = (0.30, 0.55)
    suppressed_confidence: tuple[float, float] = (0.05, 0.20)
    seed: int = 0

    def __post_init__(self):
        if self.n_images < 1:
            raise SchemaError("n_images must be at least 1")
        for name in ("fungal_per_image", "artefact_per_image"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise SchemaError(f"{name} must be an ordered non-negative range")
        for name in ("tp_rate", "fp_extra_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SchemaError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.iou_mean <= 1.0:
            raise SchemaError("iou_mean must lie in (0, 1]")
        if self.iou_spread < 0.0:
            raise SchemaError("iou_spread must be non-negative")
        for name in ("tp_confidence", "fp_confidence", "suppressed_confidence"):
            lo, hi = getattr(self, name)
            if not 0.0 < lo <= hi <= 1.0:
                raise SchemaError(f"{name} must satisfy 0 < lo <= hi <= 1")
        if self.suppressed_confidence[1] >= min(self.tp_confidence[0],
                                                self.fp_confidence[0]):
            raise SchemaError(
                "suppressed confidences must sit strictly below TP/FP ones"
            )


@dataclass(frozen=True)
class PlantedBox:
    """One planted object and its intended fate at the operating point.

    Roles "tp", "fn" and "suppressed" describe a ground-truth box
    (gt_index set); "tp" and "suppressed" additionally planted a
    prediction. Role "fp" is a prediction with no ground truth behind it.
    """

    role: str
    class_id: int
    gt_index: int | None = None
    pred_index: int | None = None
    target_iou: float | None = None
    achieved_iou: float | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise SchemaError(f"unknown planted role {self.role!r}")


@dataclass(frozen=True)
class ImageTruth:
    image_id: str
    planted: tuple[PlantedBox, ...]

    def gt_positive(self) -> bool:
        return any(p.class_id == FUNGAL and p.gt_index is not None
                   for p in self.planted)

    def predicted_positive(self) -> bool:
        # TP and FP confidences sit strictly above the threshold,
        # suppressed ones strictly below, so roles decide the call.
        return any(p.class_id == FUNGAL and p.role in ("tp", "fp")
                   for p in self.planted)


@dataclass(frozen=True)
class SynthTruth:
    """What the generator planted, for closed-loop verification."""

    seed: int
    images: tuple[ImageTruth, ...]

    def _plants(self, class_id: int | None):
        for image in self.images:
            for p in image.planted:
                if class_id is None or p.class_id == class_id:
                    yield p

    def expected_counts(self, class_id: int | None = None) -> tuple[int, int, int]:
        """(tp, fp, fn) the matcher must recover at the default operating
        point; suppressed plants surface as FNs there."""
        tp = fp = fn = 0
        for p in self._plants(class_id):
            if p.role == "tp":
                tp += 1
            elif p.role == "fp":
                fp += 1
            else:
                fn += 1
        return tp, fp, fn

    def planted_mean_iou(self, class_id: int | None = None) -> float | None:
        achieved = [p.achieved_iou for p in self._plants(class_id)
                    if p.role == "tp"]
        return sum(achieved) / len(achieved) if achieved else None

    def expected_screening(self) -> tuple[int, int, int, int]:
        """(tp, fn, fp, tn) over images under the screening rule."""
        tp = fn = fp = tn = 0
        for image in self.images:
            sick, called = image.gt_positive(), image.predicted_positive()
            if sick and called:
                tp += 1
            elif sick:
                fn += 1
            elif called:
                fp += 1
            else:
                tn += 1
        return tp, fn, fp, tn

    def to_json(self) -> str:
        doc = {
            "schema": "koheval-synth-truth/1",
            "seed": self.seed,
            "images": [
                {
                    "image_id": image.image_id,
                    "planted": [
                        {
                            "role": p.role,
                            "class_id": p.class_id,
                            "gt_index": p.gt_index,
                            "pred_index": p.pred_index,
                            "target_iou": p.target_iou,
                            "achieved_iou": p.achieved_iou,
                        }
                        for p in image.planted
                    ],
                }
                for image in self.images
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SynthTruth":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"truth file is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or doc.get("schema") != "koheval-synth-truth/1":
            raise SchemaError("not a koheval-synth-truth/1 document")
        images = []
        for entry in doc.get("images", []):
            planted = tuple(
                PlantedBox(role=p["role"], class_id=p["class_id"],
                           gt_index=p["gt_index"], pred_index=p["pred_index"],
                           target_iou=p["target_iou"],
                           achieved_iou=p["achieved_iou"])
                for p in entry["planted"]
            )
            images.append(ImageTruth(image_id=entry["image_id"], planted=planted))
        return cls(seed=doc.get("seed", 0), images=tuple(images))


# ---------------------------------------------------------------------------
# Scene construction


def _image_rng(seed: int, stream: int) -> np.random.Generator:
    # PCG64 with an explicit two-word seed sequence; identical streams on
    # every platform.
    return np.random.default_rng(np.random.SeedSequence((seed, stream)))


def _sample_dims(rng: np.random.Generator, frame: ImageDims,
                 class_id: int) -> tuple[float, float]:
    # Fungal structures are thin and elongated; artefacts compact.
    scale = min(frame.width, frame.height)
    if class_id == FUNGAL:
        long_side = rng.uniform(0.06, 0.16) * scale
        aspect = rng.uniform(3.0, 7.0)
    else:
        long_side = rng.uniform(0.04, 0.10) * scale
        aspect = rng.uniform(1.0, 2.0)
    short_side = long_side / aspect
    if rng.random() < 0.5:
        return long_side, short_side
    return short_side, long_side


def _envelopes_intersect(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _place_center(rng: np.random.Generator, frame: ImageDims, taken: list,
                  w: float, h: float, image_id: str) -> tuple[float, float]:
    half_w = _ENVELOPE_FACTOR * w / 2.0
    half_h = _ENVELOPE_FACTOR * h / 2.0
    if 2 * half_w >= frame.width or 2 * half_h >= frame.height:
        raise GenerationError(
            f"{image_id}: object envelope exceeds the frame; shrink objects "
            f"or enlarge the frame"
        )
    for _ in range(_PLACEMENT_TRIES):
        cx = rng.uniform(half_w, frame.width - half_w)
        cy = rng.uniform(half_h, frame.height - half_h)
        envelope = (cx - half_w, cy - half_h, cx + half_w, cy + half_h)
        if not any(_envelopes_intersect(envelope, other) for other in taken):
            taken.append(envelope)
            return cx, cy
    raise GenerationError(
        f"{image_id}: could not place an object after {_PLACEMENT_TRIES} "
        f"attempts; the scene is too crowded"
    )


def _perturb_to_iou(rng: np.random.Generator, frame: ImageDims, gt: Box,
                    target: float, confidence: float, image_id: str) -> Box:
    """Jitter a copy of ``gt`` until its IoU with ``gt`` hits ``target``.

    A random scale inside (sqrt(t), 1/sqrt(t)) guarantees the zero-offset
    IoU exceeds the target; IoU then falls monotonically along any
    translation ray, so bisection on the offset converges.
    """
    s_lo, s_hi = math.sqrt(target), 1.0 / math.sqrt(target)
    margin = 0.02 * (s_hi - s_lo)
    scale = rng.uniform(s_lo + margin, s_hi - margin)
    angle = rng.uniform(0.0, 2.0 * math.pi)
    dx, dy = math.cos(angle), math.sin(angle)

    w, h = gt.width * scale, gt.height * scale
    cx0, cy0 = gt.center

    def iou_at(t: float) -> float:
        cx, cy = cx0 + t * dx, cy0 + t * dy
        return iou(gt, Box(cx - w / 2.0, cy - h / 2.0,
                           cx + w / 2.0, cy + h / 2.0, gt.class_id))

    t_hi = gt.width + gt.height
    for _ in range(60):
        if iou_at(t_hi) < target:
            break
        t_hi *= 2.0
    else:
        raise GenerationError(f"{image_id}: could not bracket the target IoU")
    t_lo = 0.0
    for _ in range(80):
        mid = (t_lo + t_hi) / 2.0
        if iou_at(mid) >= target:
            t_lo = mid
        else:
            t_hi = mid

    pred = _grid_box(frame, gt.class_id, cx0 + t_lo * dx, cy0 + t_lo * dy,
                     w, h, confidence)
    if abs(iou(gt, pred) - target) > 1e-3:
        raise GenerationError(
            f"{image_id}: perturbation missed the target IoU {target:.4f}"
        )
    return pred


def _sample_target_iou(rng: np.random.Generator, spec: SynthSpec) -> float:
    raw = rng.uniform(spec.iou_mean - spec.iou_spread,
                      spec.iou_mean + spec.iou_spread)
    # Keep clear of both the 0.50 match threshold and degenerate overlap.
    return float(min(max(raw, 0.55), 0.95))


def _build_scene(rng: np.random.Generator, spec: SynthSpec, image_id: str,
                 gt_plants: Sequence[tuple[int, str]],
                 fp_classes: Sequence[int]) -> tuple[ImageRecord, ImageTruth]:
    """Place the requested plants in one frame.

    ``gt_plants`` lists (class_id, role) for ground-truth boxes, role in
    {"tp", "fn", "suppressed"}; ``fp_classes`` lists classes of extra
    unmatched predictions.
    """
    taken: list = []
    gt_boxes: list[Box] = []
    staged: list[tuple[Box, int]] = []  # (prediction, plant position)
    planted: list[PlantedBox] = []

    for class_id, role in gt_plants:
        w, h = _sample_dims(rng, spec.frame, class_id)
        cx, cy = _place_center(rng, spec.frame, taken, w, h, image_id)
        gt = _grid_box(spec.frame, class_id, cx, cy, w, h, None)
        gt_index = len(gt_boxes)
        gt_boxes.append(gt)
        if role == "fn":
            planted.append(PlantedBox("fn", class_id, gt_index=gt_index))
            continue
        band = (spec.tp_confidence if role == "tp"
                else spec.suppressed_confidence)
        target = _sample_target_iou(rng, spec)
        pred = _perturb_to_iou(rng, spec.frame, gt, target,
                               rng.uniform(*band), image_id)
        staged.append((pred, len(planted)))
        planted.append(PlantedBox(role, class_id, gt_index=gt_index,
                                  target_iou=target,
                                  achieved_iou=iou(gt, pred)))

    for class_id in fp_classes:
        w, h = _sample_dims(rng, spec.frame, class_id)
        cx, cy = _place_center(rng, spec.frame, taken, w, h, image_id)
        pred = _grid_box(spec.frame, class_id, cx, cy, w, h,
                         rng.uniform(*spec.fp_confidence))
        staged.append((pred, len(planted)))
        planted.append(PlantedBox("fp", class_id))

    # Shuffle prediction order so matching never sees generation order.
    order = rng.permutation(len(staged))
    predictions: list[Box] = []
    for new_index, old_index in enumerate(order):
        box, plant_pos = staged[old_index]
        predictions.append(box)
        planted[plant_pos] = replace(planted[plant_pos], pred_index=new_index)

    record = ImageRecord(image_id=image_id, dims=spec.frame,
                         ground_truth=gt_boxes, predictions=predictions)
    return record, ImageTruth(image_id=image_id, planted=tuple(planted))


def _check_bands(spec: SynthSpec, op: OperatingPoint) -> None:
    if not (spec.suppressed_confidence[1] < op.conf_threshold
            < min(spec.tp_confidence[0], spec.fp_confidence[0])):
        raise GenerationError(
            "confidence bands must straddle the operating threshold "
            f"{op.conf_threshold} for planted roles to hold"
        )


def generate(spec: SynthSpec) -> tuple[Dataset, SynthTruth]:
    """Generate a cohort whose matching outcome is known by construction.

    Deterministic in ``spec.seed``; each image draws from its own PRNG
    stream, so images are independent of cohort size and order.
    """
    _check_bands(spec, OperatingPoint())
    records, truths = [], []
    for i in range(spec.n_images):
        rng = _image_rng(spec.seed, i)
        gt_plants: list[tuple[int, str]] = []
        for class_id, (lo, hi) in ((FUNGAL, spec.fungal_per_image),
                                   (ARTEFACT, spec.artefact_per_image)):
            for _ in range(int(rng.integers(lo, hi + 1))):
                if rng.random() < spec.tp_rate:
                    role = "tp"
                elif rng.random() < 0.5:
                    role = "suppressed"
                else:
                    role = "fn"
                gt_plants.append((class_id, role))
        n_fp = int(rng.binomial(2, spec.fp_extra_rate))
        fp_classes = [int(rng.integers(0, 2)) for _ in range(n_fp)]
        record, truth = _build_scene(rng, spec, f"synth-{i:04d}",
                                     gt_plants, fp_classes)
        records.append(record)
        truths.append(truth)
    return Dataset(records=records), SynthTruth(seed=spec.seed,
                                                images=tuple(truths))


def _deal(rng: np.random.Generator, items: list, n_buckets: int) -> list[list]:
    """Shuffle and deal items round-robin into n_buckets lists."""
    order = rng.permutation(len(items))
    buckets: list[list] = [[] for _ in range(n_buckets)]
    for pos, item_index in enumerate(order):
        buckets[pos % n_buckets].append(items[item_index])
    return buckets


def plant_object_counts(tp: int, fp: int, fn: int, *, class_id: int = FUNGAL,
                        seed: int = 0, frame: ImageDims = ImageDims(2048, 2048),
                        max_per_image: int = 3,
                        dressing: bool = True) -> tuple[Dataset, SynthTruth]:
    """Cohort whose object-level counts for ``class_id`` are exactly
    (tp, fp, fn) at the default operating point.

    ``dressing`` sprinkles matched other-class objects through the cohort;
    they exercise class-aware matching without touching the target counts.
    """
    if min(tp, fp, fn) < 0 or tp + fp + fn == 0:
        raise SchemaError("counts must be non-negative and not all zero")
    spec = SynthSpec(frame=frame, seed=seed)
    plants = (["tp"] * tp + ["fn"] * fn + ["fp"] * fp)
    n_images = max(1, math.ceil(len(plants) / max_per_image))
    assign = _image_rng(seed, _ASSIGN_STREAM)
    buckets = _deal(assign, plants, n_images)
    other = ARTEFACT if class_id == FUNGAL else FUNGAL

    records, truths = [], []
    for i, bucket in enumerate(buckets):
        rng = _image_rng(seed, i)
        gt_plants = [(class_id, role) for role in bucket if role != "fp"]
        fp_classes = [class_id] * sum(1 for role in bucket if role == "fp")
        if dressing and rng.random() < 0.5:
            gt_plants.append((other, "tp"))
        record, truth = _build_scene(rng, spec, f"plant-{i:04d}",
                                     gt_plants, fp_classes)
        records.append(record)
        truths.append(truth)
    return Dataset(records=records), SynthTruth(seed=seed, images=tuple(truths))


def plant_screening_matrix(tp: int, fn: int, fp: int, tn: int, *,
                           seed: int = 0,
                           frame: ImageDims = ImageDims(2048, 2048)
                           ) -> tuple[Dataset, SynthTruth]:
    """Cohort of tp+fn+fp+tn images whose screening confusion matrix is
    exactly (tp, fn, fp, tn) at the default operating point."""
    if min(tp, fn, fp, tn) < 0 or tp + fn + fp + tn == 0:
        raise SchemaError("matrix cells must be non-negative and not all zero")
    spec = SynthSpec(frame=frame, seed=seed)
    outcomes = ["tp"] * tp + ["fn"] * fn + ["fp"] * fp + ["tn"] * tn
    assign = _image_rng(seed, _ASSIGN_STREAM)
    order = assign.permutation(len(outcomes))

    records, truths = [], []
    for i, outcome_index in enumerate(order):
        outcome = outcomes[outcome_index]
        rng = _image_rng(seed, i)
        gt_plants: list[tuple[int, str]] = []
        fp_classes: list[int] = []
        if outcome == "tp":
            for _ in range(1 + int(rng.integers(0, 2))):
                gt_plants.append((FUNGAL, "tp"))
        elif outcome == "fn":
            role = "suppressed" if rng.random() < 0.5 else "fn"
            gt_plants.append((FUNGAL, role))
        elif outcome == "fp":
            fp_classes.append(FUNGAL)
        if rng.random() < 0.5:
            gt_plants.append((ARTEFACT, "tp"))
        record, truth = _build_scene(rng, spec, f"screen-{i:04d}",
                                     gt_plants, fp_classes)
        records.append(record)
        truths.append(truth)
    return Dataset(records=records), SynthTruth(seed=seed, images=tuple(truths))


def plant_uniform_iou_cohort(n_images: int = 8,
                             frame: ImageDims = ImageDims(2000, 2000)
                             ) -> Dataset:
    """Every prediction overlaps its ground truth at IoU exactly 7/10.

    Integer pixel coordinates make the ratio land on the float64 literal
    0.7, so threshold sweeps flip from all-TP to all-FP precisely between
    0.70 and 0.75.
    """
    if not 1 <= n_images <= 20:
        raise SchemaError("n_images must lie in [1, 20]")
    records = []
    for i in range(n_images):
        ox, oy = 17 * i, 13 * i
        gt = Box(200 + ox, 500 + oy, 500 + ox, 1500 + oy, FUNGAL)
        pred = Box(200 + ox, 500 + oy, 500 + ox, 1200 + oy, FUNGAL,
                   confidence=_q6(0.9 - 0.4 * i / max(1, n_images - 1)))
        records.append(ImageRecord(image_id=f"uniform-{i:04d}", dims=frame,
                                   ground_truth=[gt], predictions=[pred]))
    return Dataset(records=records)


# ---------------------------------------------------------------------------
# Brute-force reference implementations


def reference_match(gts: Sequence[Box], preds: Sequence[Box],
                    op: OperatingPoint = OperatingPoint()) -> MatchReport:
    """Direct transcription of the greedy matching protocol.

    No vectorization, no early exits; must agree with
    :func:`koheval.metrics.match_image` bit for bit.
    """
    kept = [i for i in range(len(preds)) if op.admits(preds[i].confidence)]
    best = {}
    for i in kept:
        same = [iou(g, preds[i]) for g in gts if g.class_id == preds[i].class_id]
        best[i] = max(same, default=0.0)
        if best[i] < 0.0:
            best[i] = 0.0
    order = sorted(kept, key=lambda i: (-preds[i].confidence, -best[i], i))

    unmatched = list(range(len(gts)))
    tp_pairs = []
    fp_indices = []
    for i in order:
        chosen = None
        chosen_iou = -1.0
        for g in unmatched:
            if gts[g].class_id != preds[i].class_id:
                continue
            value = iou(gts[g], preds[i])
            if value > chosen_iou:
                chosen, chosen_iou = g, value
        if chosen is not None and chosen_iou >= op.iou_threshold:
            unmatched.remove(chosen)
            tp_pairs.append((chosen, i, chosen_iou))
        else:
            fp_indices.append(i)
    fp_indices.sort()

    classes = sorted({b.class_id for b in gts}
                     | {preds[i].class_id for i in fp_indices}
                     | {preds[i].class_id for _, i, _ in tp_pairs})
    class_counts = {}
    for c in classes:
        c_tp = sum(1 for g, _, _ in tp_pairs if gts[g].class_id == c)
        c_fp = sum(1 for i in fp_indices if preds[i].class_id == c)
        c_fn = sum(1 for g in unmatched if gts[g].class_id == c)
        class_counts[c] = (c_tp, c_fp, c_fn)

    return MatchReport(tp_pairs=tuple(tp_pairs),
                       fp_pred_indices=tuple(fp_indices),
                       fn_gt_indices=tuple(sorted(unmatched)),
                       class_counts=class_counts)


def reference_ap(curve: PRCurve, interpolation: str = "101") -> float:
    """Envelope integrator written as a direct definition-chasing loop.

    Must agree with :func:`koheval.metrics.average_precision` within
    1e-12.
    """
    if interpolation not in ("101", "all"):
        raise SchemaError(f"unknown interpolation {interpolation!r}")
    if not curve.points:
        return 0.0
    # Descending-confidence point order is ascending-recall order.
    ascending = [(r, p) for _, p, r in curve.points]

    def envelope_at(recall: float) -> float:
        candidates = [p for r, p in ascending if r >= recall]
        return max(candidates) if candidates else 0.0

    if interpolation == "101":
        total = 0.0
        for k in range(101):
            total += envelope_at(k / 100.0)
        return total / 101.0
    total = 0.0
    previous = 0.0
    for r, _ in ascending:
        total += (r - previous) * envelope_at(r)
        previous = r
    return total


# ---------------------------------------------------------------------------
# Cohort files


def write_cohort(dataset: Dataset, out_dir: Path | str,
                 truth: SynthTruth | None = None) -> Path:
    """Write a cohort directory: gt/*.txt, pred/*.txt, dims.json and,
    when given, truth.json. All writes are atomic."""
    out = Path(out_dir)
    dims = {rec.dims for rec in dataset}
    if len(dims) != 1:
        raise SchemaError("cohort directories require uniform image dims")
    frame = dims.pop()
    (out / "gt").mkdir(parents=True, exist_ok=True)
    (out / "pred").mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "dims.json", json.dumps(
        {"width": frame.width, "height": frame.height}, sort_keys=True) + "\n")
    for rec in dataset:
        atomic_write_text(out / "gt" / f"{rec.image_id}.txt",
                          format_gt_file(rec.ground_truth, rec.dims))
        atomic_write_text(out / "pred" / f"{rec.image_id}.txt",
                          format_pred_file(rec.predictions, rec.dims))
    if truth is not None:
        atomic_write_text(out / "truth.json", truth.to_json())
    return out


def read_cohort(path: Path | str) -> Dataset:
    """Read a cohort directory written by :func:`write_cohort`."""
    root = Path(path)
    dims_file = root / "dims.json"
    if not dims_file.is_file():
        raise SchemaError(f"{root}: not a cohort directory (no dims.json)")
    doc = json.loads(dims_file.read_text())
    frame = ImageDims(width=doc["width"], height=doc["height"])
    dataset = load_ground_truth(root / "gt", dims=frame)
    return attach_predictions(dataset, root / "pred")


def read_truth(path: Path | str) -> SynthTruth:
    """Read a truth file, or the truth.json inside a cohort directory."""
    p = Path(path)
    if p.is_dir():
        p = p / "truth.json"
    return SynthTruth.from_json(p.read_text())
