"""MAE / RMSE / MAPE with explicit masking of near-zero targets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    """Error triple plus how many entries the percentage error actually used.

    mape_percent is None when every target was masked; n_evaluated and
    n_masked always sum to the total number of comparisons.
    """

    mae: float
    rmse: float
    mape_percent: float | None
    n_evaluated: int
    n_masked: int


def compute_metrics(pred, target, mask_epsilon: float = 1e-6) -> MetricsReport:
    """MAE and RMSE over all entries; MAPE over targets with |target| > mask_epsilon.

    Exact-zero targets are always excluded from MAPE (division by zero is
    never performed), so mask_epsilon=0 reproduces the unguarded percentage
    formula on every nonzero target.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if mask_epsilon < 0:
        raise ValueError(f"mask_epsilon must be >= 0, got {mask_epsilon}")
    diff = pred - target
    mae = float(np.mean(np.abs(diff)))
    rmse = float(np.sqrt(np.mean(diff * diff)))
    mask = np.abs(target) > mask_epsilon
    n_evaluated = int(np.count_nonzero(mask))
    n_masked = int(target.size - n_evaluated)
    if n_evaluated > 0:
        mape = float(np.mean(np.abs(diff[mask] / target[mask])) * 100.0)
    else:
        mape = None
    return MetricsReport(mae, rmse, mape, n_evaluated, n_masked)


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def render_metrics_table(rows: Sequence[tuple[str, MetricsReport]]) -> str:
    """Aligned plain-text table, one row per (label, report)."""
    header = ("", "MAE", "RMSE", "MAPE%", "n", "masked")
    body = [
        (label, _fmt(r.mae), _fmt(r.rmse), _fmt(r.mape_percent), str(r.n_evaluated + r.n_masked), str(r.n_masked))
        for label, r in rows
    ]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = []
    for row in [header] + body:
        lines.append("  ".join(cell.rjust(w) if i else cell.ljust(w) for i, (cell, w) in enumerate(zip(row, widths))))
    return "\n".join(lines)


METRICS_CSV_HEADER = "horizon_step,mae,rmse,mape,n,n_masked"


def metrics_csv_line(step_label: str, r: MetricsReport) -> str:
    mape = "" if r.mape_percent is None else f"{r.mape_percent:.6f}"
    return f"{step_label},{r.mae:.6f},{r.rmse:.6f},{mape},{r.n_evaluated + r.n_masked},{r.n_masked}"
