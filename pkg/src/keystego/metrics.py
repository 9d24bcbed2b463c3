"""Quantitative evaluation: PSNR, bit recovery accuracy, report assembly."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np

PSNR_CAP_DB = 200.0
PSNR_MAX = 1.0  # peak amplitude of the normalized domain


class MetricsError(ValueError):
    pass


def psnr(cover: np.ndarray, stego: np.ndarray) -> float:
    """10*log10(MAX^2 / MSE) with MAX = 1; capped at 200 dB when MSE ~ 0."""
    a = np.asarray(cover, dtype=np.float64).reshape(-1)
    b = np.asarray(stego, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise MetricsError(f"psnr length mismatch: {a.size} vs {b.size}")
    mse = float(np.mean((a - b) ** 2))
    if mse < 1e-20:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(PSNR_MAX**2 / mse))


def recovery_accuracy(sent: np.ndarray, received: np.ndarray) -> float:
    """Percentage of matching bits."""
    a = np.asarray(sent).reshape(-1)
    b = np.asarray(received).reshape(-1)
    if a.size != b.size:
        raise MetricsError(f"recovery_accuracy length mismatch: {a.size} vs {b.size}")
    return float(100.0 * np.mean(a == b))


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    config_digest: str = ""
    detector_labels: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "config_digest": self.config_digest,
                "detector_labels": self.detector_labels,
                "aggregates": self.aggregates,
                "rows": self.rows,
            },
            indent=2,
            sort_keys=True,
        )


def config_digest(config_doc: dict) -> str:
    return hashlib.sha256(json.dumps(config_doc, sort_keys=True).encode()).hexdigest()[:16]


def build_report(rows: list[dict], config_doc: dict | None = None, detector_labels: dict | None = None) -> EvalReport:
    """Aggregate per-clip rows into per-(payload, column) means.

    Each row: clip_id, payload_bps, psnr_db, clean_accuracy_pct, plus
    optional attack accuracy columns ("acc_<label>") and detector score
    columns ("det_<name>").
    """
    if not rows:
        raise MetricsError("build_report needs at least one row")
    payloads = sorted({r["payload_bps"] for r in rows})
    aggregates = {}
    for p in payloads:
        group = [r for r in rows if r["payload_bps"] == p]
        cell: dict = {"n_clips": len(group)}
        numeric_keys = sorted(
            k for k in group[0] if k not in ("clip_id", "payload_bps") and isinstance(group[0][k], (int, float))
        )
        for k in numeric_keys:
            cell[k] = float(np.mean([r[k] for r in group]))
        aggregates[f"{p}"] = cell
    return EvalReport(
        rows=list(rows),
        aggregates=aggregates,
        config_digest=config_digest(config_doc or {}),
        detector_labels=dict(detector_labels or {}),
    )


def report_to_csv(report: EvalReport) -> str:
    """Comma-separated, header row, '.' decimal separator."""
    keys = ["clip_id", "payload_bps"] + sorted(
        k for k in report.rows[0] if k not in ("clip_id", "payload_bps")
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(keys)
    for r in report.rows:
        writer.writerow([_fmt(r.get(k)) for k in keys])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return v


def csv_to_rows(text: str) -> list[dict]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in rec.items():
            if k == "clip_id":
                row[k] = v
            else:
                row[k] = float(v)
        rows.append(row)
    return rows
