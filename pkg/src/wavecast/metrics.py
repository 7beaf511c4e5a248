"""Forecast error metrics and the report that bundles them."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

# |y| below this is left out of MAPE (elevations cross zero all the time)
MAPE_FLOOR = 1e-8
# 1-based horizon steps reported individually
HORIZON_OFFSETS = (1, 7, 13, 19, 25, 31, 37, 43)
UNDEFINED = "undefined"


@dataclass(frozen=True)
class MetricSet:
    mse: float
    mae: float
    rmse: float
    mape: float | None  # percent; None when every sample was skipped
    n: int
    mape_skipped: int

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "mae": self.mae,
            "rmse": self.rmse,
            "mape": UNDEFINED if self.mape is None else self.mape,
            "n": self.n,
            "mape_skipped": self.mape_skipped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricSet":
        mape = None if d["mape"] == UNDEFINED else float(d["mape"])
        return cls(float(d["mse"]), float(d["mae"]), float(d["rmse"]), mape, int(d["n"]), int(d["mape_skipped"]))


def compute_metrics(y, yhat) -> MetricSet:
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"target and prediction sizes differ: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise ValueError("no samples to score")
    err = yhat - y
    mse = float(np.mean(err * err))
    keep = np.abs(y) >= MAPE_FLOOR
    skipped = int(y.size - keep.sum())
    mape = float(100.0 * np.mean(np.abs(err[keep] / y[keep]))) if keep.any() else None
    return MetricSet(mse, float(np.mean(np.abs(err))), math.sqrt(mse), mape, int(y.size), skipped)


@dataclass
class MetricsReport:
    aggregate: MetricSet
    per_gauge: dict[str, MetricSet]
    per_horizon: dict[int, MetricSet]
    cumulative_abs_error: dict[str, float]
    fingerprint: str
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.aggregate.n

    def to_dict(self) -> dict:
        return {
            "aggregate": self.aggregate.to_dict(),
            "per_gauge": {k: v.to_dict() for k, v in self.per_gauge.items()},
            "per_horizon": {str(k): v.to_dict() for k, v in self.per_horizon.items()},
            "cumulative_abs_error": dict(self.cumulative_abs_error),
            "fingerprint": self.fingerprint,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            MetricSet.from_dict(d["aggregate"]),
            {k: MetricSet.from_dict(v) for k, v in d["per_gauge"].items()},
            {int(k): MetricSet.from_dict(v) for k, v in d["per_horizon"].items()},
            {k: float(v) for k, v in d["cumulative_abs_error"].items()},
            d["fingerprint"],
            d.get("provenance", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def fingerprint(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_report(y, yhat, gauge_names, provenance: dict | None = None) -> MetricsReport:
    """Score ``[n, H, G]`` targets/predictions (G target gauges, physical units)."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 3:
        raise ValueError(f"expected matching [n, H, G] arrays, got {y.shape} and {yhat.shape}")
    if y.shape[2] != len(gauge_names):
        raise ValueError("one gauge name per last-axis column is required")
    provenance = dict(provenance or {})
    per_gauge = {g: compute_metrics(y[:, :, j], yhat[:, :, j]) for j, g in enumerate(gauge_names)}
    per_horizon = {
        off: compute_metrics(y[:, off - 1, :], yhat[:, off - 1, :]) for off in HORIZON_OFFSETS if off <= y.shape[1]
    }
    cae = {g: float(np.sum(np.abs(yhat[:, :, j] - y[:, :, j]))) for j, g in enumerate(gauge_names)}
    return MetricsReport(
        compute_metrics(y, yhat), per_gauge, per_horizon, cae, fingerprint(provenance), provenance
    )
