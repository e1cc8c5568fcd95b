"""Versioned run reports and their presentation forms.

A report is a plain dict with a ``schema_version`` field, rendered to
canonical JSON (sorted keys, two-space indent, trailing newline) so that
parse + render is byte-identical. CSV and table renderers are
presentation-only; every number lives in the report as a fraction and is
formatted at the edge (AP as a two-decimal percentage, counts as
integers, everything else to four decimals).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path
from typing import Mapping

from .errors import SchemaError
from .geometry import CLASS_NAMES
from .manifest import TrainManifest
from .metrics import ClassMetrics, ObjectMetrics, OperatingPoint, PRCurve
from .screening import ScreeningReport

SCHEMA_VERSION = "koheval-report/1"
TOOL_VERSION = "0.1.0"

_RATE_NAMES = ("sensitivity", "specificity", "precision", "npv",
               "accuracy", "f1", "balanced_accuracy")
_CLASS_FIELDS = ("tp", "fp", "fn", "precision", "recall", "f1",
                 "ap50", "ap50_95", "mean_iou")


# ---------------------------------------------------------------------------
# Input digests


def sha256_file(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_path(path: Path | str) -> str:
    """Digest of a file, or of a directory as the digest of its sorted
    (relative name, file digest) pairs."""
    p = Path(path)
    if p.is_file():
        return sha256_file(p)
    if p.is_dir():
        digest = hashlib.sha256()
        for child in sorted(f for f in p.rglob("*") if f.is_file()):
            digest.update(child.relative_to(p).as_posix().encode())
            digest.update(b"\0")
            digest.update(sha256_file(child).encode())
            digest.update(b"\0")
        return digest.hexdigest()
    raise SchemaError(f"{p}: no such file or directory")


# ---------------------------------------------------------------------------
# Report assembly


def _class_payload(metrics: ClassMetrics) -> dict:
    return {name: getattr(metrics, name) for name in _CLASS_FIELDS}


def build_report(*, op: OperatingPoint, interpolation: str = "101",
                 object_metrics: ObjectMetrics | None = None,
                 screening: ScreeningReport | None = None,
                 manifest: TrainManifest | None = None,
                 inputs: Mapping[str, Path | str] | None = None,
                 timing_seconds: float | None = None) -> dict:
    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "koheval", "version": TOOL_VERSION},
        "operating_point": {"conf_threshold": op.conf_threshold,
                            "iou_threshold": op.iou_threshold},
        "interpolation": interpolation,
    }
    if inputs:
        report["inputs"] = {
            name: {"path": str(path), "sha256": sha256_path(path)}
            for name, path in sorted(inputs.items())
        }
    if object_metrics is not None:
        per_class = {
            CLASS_NAMES[class_id]: _class_payload(metrics)
            for class_id, metrics in sorted(object_metrics.per_class.items())
        }
        report["object_metrics"] = {
            "per_class": per_class,
            "macro": asdict(object_metrics.macro),
        }
    if screening is not None:
        matrix = screening.matrix
        report["screening"] = {
            "matrix": {"tp": matrix.tp, "fn": matrix.fn,
                       "fp": matrix.fp, "tn": matrix.tn},
            "rates": {name: getattr(matrix, name) for name in _RATE_NAMES},
            "false_negative_ids": list(screening.false_negative_ids),
            "false_positive_ids": list(screening.false_positive_ids),
        }
    if manifest is not None:
        report["manifest"] = asdict(manifest)
    if timing_seconds is not None:
        report["timing"] = {"seconds": timing_seconds}
    return report


def render_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def parse_report(text: str) -> dict:
    try:
        report = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"report is not valid JSON: {exc}") from exc
    if not isinstance(report, dict):
        raise SchemaError("report must be a JSON object")
    if report.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {report.get('schema_version')!r}; "
            f"expected {SCHEMA_VERSION!r}"
        )
    return report


# ---------------------------------------------------------------------------
# Presentation


def _fmt(value, percent: bool = False) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if percent:
        return f"{100.0 * value:.2f}"
    return f"{value:.4f}"


def _aligned(rows: list[list[str]], indent: str = "  ") -> list[str]:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    out = []
    for row in rows:
        cells = [row[0].ljust(widths[0])]
        cells += [cell.rjust(width) for cell, width in zip(row[1:], widths[1:])]
        out.append(indent + "  ".join(cells).rstrip())
    return out


def render_table(report: dict) -> str:
    lines: list[str] = []
    op = report.get("operating_point", {})
    lines.append(f"koheval report (schema {report.get('schema_version')})")
    lines.append(
        f"operating point: conf {_fmt(op.get('conf_threshold'))}, "
        f"IoU {_fmt(op.get('iou_threshold'))}, "
        f"interpolation {report.get('interpolation')}"
    )

    if "inputs" in report:
        lines.append("")
        lines.append("inputs")
        for name, entry in sorted(report["inputs"].items()):
            lines.append(f"  {name}: {entry['path']}  sha256 "
                         f"{entry['sha256'][:12]}")

    if "object_metrics" in report:
        lines.append("")
        lines.append("object level")
        header = ["class", "tp", "fp", "fn", "prec", "rec", "f1",
                  "ap50%", "ap50:95%", "miou"]
        rows = [header]
        block = report["object_metrics"]
        for name, m in sorted(block["per_class"].items()):
            rows.append([name, _fmt(m["tp"]), _fmt(m["fp"]), _fmt(m["fn"]),
                         _fmt(m["precision"]), _fmt(m["recall"]),
                         _fmt(m["f1"]), _fmt(m["ap50"], percent=True),
                         _fmt(m["ap50_95"], percent=True),
                         _fmt(m["mean_iou"])])
        macro = block["macro"]
        rows.append(["macro", "-", "-", "-",
                     _fmt(macro["precision"]), _fmt(macro["recall"]),
                     _fmt(macro["f1"]), _fmt(macro["ap50"], percent=True),
                     _fmt(macro["ap50_95"], percent=True),
                     _fmt(macro["mean_iou"])])
        lines.extend(_aligned(rows))

    if "screening" in report:
        block = report["screening"]
        matrix = block["matrix"]
        lines.append("")
        lines.append("image level")
        rows = [["", "called +", "called -"],
                ["actual +", str(matrix["tp"]), str(matrix["fn"])],
                ["actual -", str(matrix["fp"]), str(matrix["tn"])]]
        lines.extend(_aligned(rows))
        rates = block["rates"]
        rows = [[name, _fmt(rates[name])] for name in _RATE_NAMES]
        lines.extend(_aligned(rows))
        if block.get("false_negative_ids"):
            lines.append("  missed positives: "
                         + ", ".join(block["false_negative_ids"]))

    if "manifest" in report:
        lines.append("")
        lines.append("manifest")
        for key, value in sorted(report["manifest"].items()):
            lines.append(f"  {key}: {_fmt(value) if value is None else value}")

    return "\n".join(lines) + "\n"


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(report: dict) -> str:
    rows = [("section", "metric", "class", "value")]
    op = report.get("operating_point", {})
    rows.append(("run", "conf_threshold", "", _csv_cell(op.get("conf_threshold"))))
    rows.append(("run", "iou_threshold", "", _csv_cell(op.get("iou_threshold"))))
    rows.append(("run", "interpolation", "", report.get("interpolation", "")))
    if "object_metrics" in report:
        block = report["object_metrics"]
        for name, m in sorted(block["per_class"].items()):
            for metric in _CLASS_FIELDS:
                rows.append(("object", metric, name, _csv_cell(m[metric])))
        for metric, value in sorted(block["macro"].items()):
            rows.append(("object", metric, "macro", _csv_cell(value)))
    if "screening" in report:
        block = report["screening"]
        for cell in ("tp", "fn", "fp", "tn"):
            rows.append(("screening", cell, "", _csv_cell(block["matrix"][cell])))
        for name in _RATE_NAMES:
            rows.append(("screening", name, "", _csv_cell(block["rates"][name])))
    if "manifest" in report:
        for key, value in sorted(report["manifest"].items()):
            rows.append(("manifest", key, "", _csv_cell(value)))
    return "\n".join(",".join(row) for row in rows) + "\n"


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return render_json(report)
    if fmt == "csv":
        return render_csv(report)
    if fmt == "table":
        return render_table(report)
    raise SchemaError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------------------
# PR-curve plots


_SVG_COLORS = ("#b03030", "#2060a8", "#208050", "#806020")


def pr_curve_svg(curves: Mapping[str, PRCurve],
                 width: int = 640, height: int = 460) -> str:
    """Self-contained SVG of one or more precision-recall curves.

    The raw points ride along in a ``<desc>`` block, so the plot is also
    a data file; nothing is computed here.
    """
    ml, mr, mt, mb = 54, 16, 16, 44
    pw, ph = width - ml - mr, height - mt - mb

    def sx(recall: float) -> float:
        return ml + recall * pw

    def sy(precision: float) -> float:
        return mt + (1.0 - precision) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" '
        f'font-size="12">',
        "<desc>" + json.dumps(
            {name: {"total_gt": c.total_gt, "points": [list(p) for p in c.points]}
             for name, c in sorted(curves.items())}, sort_keys=True) + "</desc>",
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        f'stroke="#404040"/>',
    ]
    for k in range(6):
        v = k / 5.0
        parts.append(f'<line x1="{sx(v):.1f}" y1="{mt}" x2="{sx(v):.1f}" '
                     f'y2="{mt + ph}" stroke="#d8d8d8"/>')
        parts.append(f'<line x1="{ml}" y1="{sy(v):.1f}" x2="{ml + pw}" '
                     f'y2="{sy(v):.1f}" stroke="#d8d8d8"/>')
        parts.append(f'<text x="{sx(v):.1f}" y="{mt + ph + 16}" '
                     f'text-anchor="middle">{v:.1f}</text>')
        parts.append(f'<text x="{ml - 6}" y="{sy(v) + 4:.1f}" '
                     f'text-anchor="end">{v:.1f}</text>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" '
                 f'text-anchor="middle">recall</text>')
    parts.append(f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {mt + ph / 2:.1f})">precision</text>')

    for slot, (name, curve) in enumerate(sorted(curves.items())):
        color = _SVG_COLORS[slot % len(_SVG_COLORS)]
        coords = [(sx(r), sy(p)) for _, p, r in curve.points]
        if coords:
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
            parts.append(f'<polyline points="{path}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
            for x, y in coords:
                parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.2" '
                             f'fill="{color}"/>')
        ly = mt + 16 + 16 * slot
        parts.append(f'<rect x="{ml + pw - 120}" y="{ly - 9}" width="10" '
                     f'height="10" fill="{color}"/>')
        parts.append(f'<text x="{ml + pw - 104}" y="{ly}">{name}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
