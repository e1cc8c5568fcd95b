"""Training-protocol manifest: a validated record of the hyperparameters
the upstream detector was trained with.

The manifest is stored and echoed in reports but never executed; its only
job is provenance. ``validate_manifest`` checks a manifest field by field
against the reference protocol this toolkit evaluates.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

from .errors import SchemaError


@dataclass(frozen=True)
class TrainManifest:
    """Hyperparameter record. The defaults are the reference protocol."""

    epochs: int = 250
    optimizer: str = "AdamW"
    initial_lr: float = 5e-4
    cosine_warmup: bool = True
    batch_size: int = 8
    box_loss_weight: float = 7.5
    cls_loss_weight: float = 1.0
    patience: int = 50
    flip_prob: float = 0.2
    scale_jitter: float = 0.20
    translate_jitter: float = 0.05
    rotation_jitter_deg: float = 2.0
    mixup_enabled: bool = False
    input_size: int = 1024
    confidence_threshold: float = 0.25

    def __post_init__(self):
        positive = ("epochs", "initial_lr", "batch_size", "box_loss_weight",
                    "cls_loss_weight", "patience", "input_size",
                    "confidence_threshold")
        for name in positive:
            if getattr(self, name) <= 0:
                raise SchemaError(f"{name} must be positive")
        for name in ("flip_prob", "confidence_threshold"):
            if getattr(self, name) > 1.0:
                raise SchemaError(f"{name} must not exceed 1")
        for name in ("flip_prob", "scale_jitter", "translate_jitter",
                     "rotation_jitter_deg"):
            if getattr(self, name) < 0:
                raise SchemaError(f"{name} must be non-negative")
        if not self.optimizer:
            raise SchemaError("optimizer name must be non-empty")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TrainManifest":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise SchemaError("manifest must be a JSON object")
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(payload) - set(known)
        if unknown:
            raise SchemaError(f"unknown manifest field(s): {sorted(unknown)}")
        missing = set(known) - set(payload)
        if missing:
            raise SchemaError(f"manifest missing field(s): {sorted(missing)}")
        coerced = {}
        for name, spec in known.items():
            value = payload[name]
            if spec.type in ("int", int):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise SchemaError(f"{name} must be an integer")
            elif spec.type in ("float", float):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise SchemaError(f"{name} must be a number")
                value = float(value)
            elif spec.type in ("bool", bool):
                if not isinstance(value, bool):
                    raise SchemaError(f"{name} must be a boolean")
            else:
                if not isinstance(value, str):
                    raise SchemaError(f"{name} must be a string")
            coerced[name] = value
        return cls(**coerced)


REFERENCE_PROTOCOL = TrainManifest()


@dataclass(frozen=True)
class FieldVerdict:
    field: str
    expected: object
    actual: object
    ok: bool


def _values_match(expected, actual) -> bool:
    if isinstance(expected, bool) or isinstance(actual, bool):
        return expected is actual
    if isinstance(expected, float) or isinstance(actual, float):
        return math.isclose(expected, actual, rel_tol=1e-9, abs_tol=0.0)
    if isinstance(expected, str):
        return expected.lower() == str(actual).lower()
    return expected == actual


def validate_manifest(manifest: TrainManifest,
                      reference: TrainManifest = REFERENCE_PROTOCOL
                      ) -> list[FieldVerdict]:
    """Compare every manifest field against the reference protocol."""
    verdicts = []
    for spec in dataclasses.fields(TrainManifest):
        expected = getattr(reference, spec.name)
        actual = getattr(manifest, spec.name)
        verdicts.append(FieldVerdict(spec.name, expected, actual,
                                     _values_match(expected, actual)))
    return verdicts


def manifest_conforms(verdicts: list[FieldVerdict]) -> bool:
    return all(v.ok for v in verdicts)


def verdict_table(verdicts: list[FieldVerdict]) -> str:
    lines = [f"{'field':<22}{'expected':>14}{'actual':>14}  verdict"]
    for v in verdicts:
        status = "ok" if v.ok else "MISMATCH"
        lines.append(f"{v.field:<22}{v.expected!s:>14}{v.actual!s:>14}  {status}")
    return "\n".join(lines) + "\n"
