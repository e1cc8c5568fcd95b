"""Annotation / prediction file parsing, the dataset container, and the
stratified train/val/test split.

Two interchange formats are supported: a line-oriented normalized format
(``class cx cy w h`` for ground truth, plus a trailing confidence for
predictions) and a COCO-style JSON document for ground truth with image
dimensions attached. Parsing is pure per file; a Dataset is treated as
immutable after construction.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    ClassError,
    OutOfFrameError,
    ParseError,
    RangeError,
    ReferentialError,
    SchemaError,
)
from .geometry import ARTEFACT, CLASS_NAMES, FUNGAL, Box, ImageDims, clip_to_frame

CONTAINMENT_TOL = 1e-6

# Composition strata for the split: (has_fungal, has_artefact).
STRATA = ((False, False), (False, True), (True, False), (True, True))


@dataclass
class ImageRecord:
    """One frame: identity, dimensions, ground truth, and predictions.

    Ground-truth boxes must carry no confidence, predictions must carry
    one, and every box must lie within the frame (tolerance 1e-6).
    """

    image_id: str
    dims: ImageDims
    ground_truth: list[Box] = field(default_factory=list)
    predictions: list[Box] = field(default_factory=list)

    def __post_init__(self):
        if not self.image_id:
            raise SchemaError("image_id must be non-empty")
        for box in self.ground_truth:
            if box.confidence is not None:
                raise SchemaError(
                    f"{self.image_id}: ground-truth box carries a confidence"
                )
            self._check_contained(box)
        for box in self.predictions:
            if box.confidence is None:
                raise SchemaError(f"{self.image_id}: prediction lacks a confidence")
            self._check_contained(box)

    def _check_contained(self, box: Box) -> None:
        if (box.x_min < -CONTAINMENT_TOL
                or box.y_min < -CONTAINMENT_TOL
                or box.x_max > self.dims.width + CONTAINMENT_TOL
                or box.y_max > self.dims.height + CONTAINMENT_TOL):
            raise OutOfFrameError(
                f"{self.image_id}: box ({box.x_min}, {box.y_min}, "
                f"{box.x_max}, {box.y_max}) exceeds the "
                f"{self.dims.width}x{self.dims.height} frame"
            )

    def composition_stratum(self) -> tuple[bool, bool]:
        """(has_fungal, has_artefact) presence pair of the ground truth."""
        classes = {b.class_id for b in self.ground_truth}
        return (FUNGAL in classes, ARTEFACT in classes)


@dataclass
class Dataset:
    """An immutable collection of image records with a class-name table."""

    records: list[ImageRecord]
    class_names: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        seen: set[str] = set()
        for rec in self.records:
            if rec.image_id in seen:
                raise SchemaError(f"duplicate image_id {rec.image_id!r}")
            seen.add(rec.image_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self.records)

    def ids(self) -> list[str]:
        return [rec.image_id for rec in self.records]

    def by_id(self, image_id: str) -> ImageRecord:
        for rec in self.records:
            if rec.image_id == image_id:
                return rec
        raise ReferentialError(f"unknown image_id {image_id!r}")


# ---------------------------------------------------------------------------
# Line-oriented normalized format


def _denormalize(values, dims: ImageDims, class_id: int,
                 confidence: float | None, lineno: int) -> Box:
    cx, cy, w, h = values
    if w == 0.0 or h == 0.0:
        raise ParseError("zero-area box", line=lineno)
    x_min = (cx - w / 2.0) * dims.width
    x_max = (cx + w / 2.0) * dims.width
    y_min = (cy - h / 2.0) * dims.height
    y_max = (cy + h / 2.0) * dims.height
    return Box(x_min, y_min, x_max, y_max, class_id, confidence)


def _parse_lines(text: str, dims: ImageDims, with_confidence: bool) -> list[Box]:
    n_fields = 6 if with_confidence else 5
    boxes: list[Box] = []
    clipped = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != n_fields:
            raise ParseError(
                f"expected {n_fields} fields, got {len(parts)}", line=lineno
            )
        try:
            class_id = int(parts[0])
            values = [float(p) for p in parts[1:5]]
            confidence = float(parts[5]) if with_confidence else None
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", line=lineno) from None
        if class_id not in (FUNGAL, ARTEFACT):
            raise ClassError(f"unknown class id {class_id}", line=lineno)
        for name, value in zip(("cx", "cy", "w", "h"), values):
            if not 0.0 <= value <= 1.0:
                raise RangeError(f"{name}={value} outside [0, 1]", line=lineno)
        if confidence is not None and not 0.0 <= confidence <= 1.0:
            raise RangeError(f"conf={confidence} outside [0, 1]", line=lineno)
        box = _denormalize(values, dims, class_id, confidence, lineno)
        kept = clip_to_frame(box, dims)
        if kept is not box:
            clipped += 1
        boxes.append(kept)
    if clipped:
        warnings.warn(f"{clipped} box(es) clipped to the frame", stacklevel=3)
    return boxes


def parse_gt_file(text: str, dims: ImageDims) -> list[Box]:
    """Parse ground-truth lines ``class cx cy w h`` into pixel-space boxes."""
    return _parse_lines(text, dims, with_confidence=False)


def parse_pred_file(text: str, dims: ImageDims) -> list[Box]:
    """Parse prediction lines ``class cx cy w h conf``; an empty file is a
    legal negative image and yields an empty list."""
    return _parse_lines(text, dims, with_confidence=True)


def _normalize_line(box: Box, dims: ImageDims) -> str:
    cx = (box.x_min + box.x_max) / 2.0 / dims.width
    cy = (box.y_min + box.y_max) / 2.0 / dims.height
    w = (box.x_max - box.x_min) / dims.width
    h = (box.y_max - box.y_min) / dims.height
    fields = f"{box.class_id} {cx:.6f} {cy:.6f} {w:.6f} {h:.6f}"
    if box.confidence is not None:
        fields += f" {box.confidence:.6f}"
    return fields


def format_gt_file(boxes: Sequence[Box], dims: ImageDims) -> str:
    return "".join(_normalize_line(b, dims) + "\n" for b in boxes)


def format_pred_file(boxes: Sequence[Box], dims: ImageDims) -> str:
    return "".join(_normalize_line(b, dims) + "\n" for b in boxes)


# ---------------------------------------------------------------------------
# COCO-style structured documents


def _require(mapping, key, context):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SchemaError(f"{context}: missing field {key!r}")
    return mapping[key]


def parse_coco_json(document: str | bytes | dict) -> Dataset:
    """Read a COCO-style document into a ground-truth Dataset.

    Only ``images`` (id, file_name, width, height), ``annotations``
    (image_id, category_id, bbox as [x, y, w, h]) and ``categories`` are
    consulted; category names must map onto the {fungal, artefact}
    taxonomy. The image id is the file name without its extension.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise SchemaError("top-level document must be an object")

    images = _require(document, "images", "document")
    annotations = _require(document, "annotations", "document")
    categories = _require(document, "categories", "document")

    class_of_category: dict[int, int] = {}
    for cat in categories:
        cat_id = _require(cat, "id", "category")
        name = str(_require(cat, "name", "category")).lower()
        if name not in CLASS_NAMES:
            raise SchemaError(f"category name {name!r} outside {set(CLASS_NAMES)}")
        class_of_category[cat_id] = CLASS_NAMES.index(name)

    records: dict[int, ImageRecord] = {}
    order: list[int] = []
    for img in images:
        img_id = _require(img, "id", "image")
        file_name = str(_require(img, "file_name", "image"))
        width = _require(img, "width", "image")
        height = _require(img, "height", "image")
        if not isinstance(width, int) or not isinstance(height, int):
            raise SchemaError(f"image {img_id}: width/height must be integers")
        stem = Path(file_name).stem
        if not stem:
            raise SchemaError(f"image {img_id}: empty file_name")
        records[img_id] = ImageRecord(stem, ImageDims(width, height))
        order.append(img_id)

    boxes_of: dict[int, list[Box]] = {img_id: [] for img_id in records}
    clipped = 0
    for ann in annotations:
        img_ref = _require(ann, "image_id", "annotation")
        cat_ref = _require(ann, "category_id", "annotation")
        bbox = _require(ann, "bbox", "annotation")
        if img_ref not in records:
            raise ReferentialError(f"annotation references unknown image {img_ref}")
        if cat_ref not in class_of_category:
            raise ReferentialError(f"annotation references unknown category {cat_ref}")
        if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
            raise SchemaError(f"bbox must be [x, y, w, h], got {bbox!r}")
        x, y, w, h = (float(v) for v in bbox)
        if w <= 0.0 or h <= 0.0:
            raise SchemaError(f"bbox has non-positive size: {bbox!r}")
        rec = records[img_ref]
        box = Box(x, y, x + w, y + h, class_of_category[cat_ref])
        kept = clip_to_frame(box, rec.dims)
        if kept is not box:
            clipped += 1
        boxes_of[img_ref].append(kept)
    if clipped:
        warnings.warn(f"{clipped} box(es) clipped to the frame", stacklevel=2)

    final = [
        ImageRecord(records[i].image_id, records[i].dims, boxes_of[i])
        for i in order
    ]
    return Dataset(final)


def format_coco_json(dataset: Dataset) -> str:
    """Serialize a Dataset's ground truth as a COCO-style document.

    Output is deterministic: images sorted by image_id, stable integer
    ids, sorted keys.
    """
    cat_of_class = {FUNGAL: 1, ARTEFACT: 2}
    images = []
    annotations = []
    ann_id = 1
    for idx, rec in enumerate(sorted(dataset.records, key=lambda r: r.image_id),
                              start=1):
        images.append({
            "id": idx,
            "file_name": f"{rec.image_id}.png",
            "width": rec.dims.width,
            "height": rec.dims.height,
        })
        for box in rec.ground_truth:
            annotations.append({
                "id": ann_id,
                "image_id": idx,
                "category_id": cat_of_class[box.class_id],
                "bbox": [box.x_min, box.y_min,
                         box.x_max - box.x_min, box.y_max - box.y_min],
            })
            ann_id += 1
    document = {
        "images": images,
        "annotations": annotations,
        "categories": [
            {"id": 1, "name": "fungal"},
            {"id": 2, "name": "artefact"},
        ],
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Loading datasets from disk


def atomic_write_text(path: Path | str, text: str) -> None:
    """Write a file atomically (temp file + rename in the same directory)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def load_ground_truth(path: Path | str,
                      dims: ImageDims | None = None) -> Dataset:
    """Load ground truth from a COCO-style ``.json`` file or a directory of
    line-format ``.txt`` files (one image per file, named by image id).

    Line-format directories need ``dims`` because the format stores only
    normalized fractions.
    """
    path = Path(path)
    if path.is_file():
        return parse_coco_json(path.read_text())
    if path.is_dir():
        if dims is None:
            raise SchemaError(
                "line-format ground truth needs image dimensions (--dims)"
            )
        records = []
        for txt in sorted(path.glob("*.txt")):
            try:
                boxes = parse_gt_file(txt.read_text(), dims)
            except ParseError as exc:
                raise type(exc)(f"{txt}: {exc}") from None
            records.append(ImageRecord(txt.stem, dims, boxes))
        if not records:
            raise SchemaError(f"no .txt annotation files under {path}")
        return Dataset(records)
    raise SchemaError(f"ground-truth path {path} does not exist")


def attach_predictions(dataset: Dataset, pred_dir: Path | str) -> Dataset:
    """Pair per-image prediction files with the dataset's records.

    A missing file means an empty prediction list; a file whose id is not
    in the dataset is a referential error.
    """
    pred_dir = Path(pred_dir)
    if not pred_dir.is_dir():
        raise SchemaError(f"prediction directory {pred_dir} does not exist")
    known = set(dataset.ids())
    for txt in pred_dir.glob("*.txt"):
        if txt.stem not in known:
            raise ReferentialError(
                f"prediction file {txt.name} has no matching image"
            )
    records = []
    for rec in dataset.records:
        pred_file = pred_dir / f"{rec.image_id}.txt"
        if pred_file.exists():
            try:
                preds = parse_pred_file(pred_file.read_text(), rec.dims)
            except ParseError as exc:
                raise type(exc)(f"{pred_file}: {exc}") from None
        else:
            preds = []
        records.append(ImageRecord(rec.image_id, rec.dims,
                                   list(rec.ground_truth), preds))
    return Dataset(records, dataset.class_names)


# ---------------------------------------------------------------------------
# Stratified split


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train/val/test id sets plus the seed that produced them."""

    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int

    def __post_init__(self):
        parts = (set(self.train), set(self.val), set(self.test))
        total = sum(len(p) for p in parts)
        if len(parts[0] | parts[1] | parts[2]) != total:
            raise SchemaError("split parts are not disjoint")

    def all_ids(self) -> set[str]:
        return set(self.train) | set(self.val) | set(self.test)

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "train": sorted(self.train),
            "val": sorted(self.val),
            "test": sorted(self.test),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitAssignment":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from None
        for key in ("seed", "train", "val", "test"):
            if key not in payload:
                raise SchemaError(f"split file missing field {key!r}")
        return cls(tuple(payload["train"]), tuple(payload["val"]),
                   tuple(payload["test"]), int(payload["seed"]))


def largest_remainder_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    """Split ``n`` items into integer part sizes proportional to
    ``fractions`` using largest-remainder rounding (deterministic,
    proportion-exact to +/-1)."""
    quotas = [n * f for f in fractions]
    sizes = [math.floor(q) for q in quotas]
    leftover = n - sum(sizes)
    by_remainder = sorted(range(len(fractions)),
                          key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in by_remainder[:leftover]:
        sizes[i] += 1
    return sizes


def stratified_split(dataset: Dataset,
                     fractions: Sequence[float] = (0.8, 0.1, 0.1),
                     seed: int = 0) -> SplitAssignment:
    """Partition image ids into train/val/test, stratified by ground-truth
    composition ``(has_fungal, has_artefact)``.

    Each stratum is shuffled by a seeded PCG64 stream and cut with
    largest-remainder rounding, so the same seed always reproduces the
    same assignment regardless of record order.
    """
    if len(dataset) == 0:
        raise SchemaError("cannot split an empty dataset")
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise SchemaError("fractions must be three non-negative values")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise SchemaError(f"fractions must sum to 1, got {sum(fractions)}")

    by_stratum: dict[tuple[bool, bool], list[str]] = {s: [] for s in STRATA}
    for rec in sorted(dataset.records, key=lambda r: r.image_id):
        by_stratum[rec.composition_stratum()].append(rec.image_id)

    n_parts = sum(1 for f in fractions if f > 0)
    parts: tuple[list[str], list[str], list[str]] = ([], [], [])
    for s_index, stratum in enumerate(STRATA):
        ids = by_stratum[stratum]
        if not ids:
            continue
        if len(ids) < n_parts:
            warnings.warn(
                f"stratum {stratum} has only {len(ids)} image(s); "
                "assigned by remainder logic", stacklevel=2
            )
        rng = np.random.default_rng(np.random.SeedSequence((seed, s_index)))
        order = [ids[i] for i in rng.permutation(len(ids))]
        sizes = largest_remainder_sizes(len(order), fractions)
        start = 0
        for part, size in zip(parts, sizes):
            part.extend(order[start:start + size])
            start += size
    return SplitAssignment(tuple(sorted(parts[0])), tuple(sorted(parts[1])),
                           tuple(sorted(parts[2])), seed)


def split_table(dataset: Dataset, assignment: SplitAssignment) -> str:
    """Render per-stratum counts of a split as an aligned text table."""
    membership: dict[str, str] = {}
    for name, ids in (("train", assignment.train), ("val", assignment.val),
                      ("test", assignment.test)):
        for image_id in ids:
            membership[image_id] = name

    rows = []
    for stratum in STRATA:
        ids = [r.image_id for r in dataset.records
               if r.composition_stratum() == stratum]
        if not ids:
            continue
        counts = {"train": 0, "val": 0, "test": 0}
        for image_id in ids:
            counts[membership[image_id]] += 1
        label = "+".join(name for name, present
                         in zip(("fungal", "artefact"), stratum) if present)
        rows.append((label or "empty", len(ids), counts))

    lines = [f"{'stratum':<16}{'total':>8}{'train':>8}{'val':>8}{'test':>8}"]
    for label, total, counts in rows:
        lines.append(f"{label:<16}{total:>8}{counts['train']:>8}"
                     f"{counts['val']:>8}{counts['test']:>8}")
    lines.append(f"{'all':<16}{len(dataset):>8}{len(assignment.train):>8}"
                 f"{len(assignment.val):>8}{len(assignment.test):>8}")
    return "\n".join(lines) + "\n"
