"""Delivery, cost and latency metrics, confidence intervals and reports."""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .core_model import SECONDS_PER_DAY
from .errors import MetricUndefinedError

logger = logging.getLogger(__name__)

Z_95 = 1.96

REPORT_COLUMNS = [
    "scenario", "protocol", "param_name", "param_value", "seed_count",
    "delivery_mean", "delivery_ci", "cost_mean", "cost_ci",
    "latency_mean_s", "latency_ci", "peak_buffer_bytes_max", "density",
]


def delivery_probability(r) -> float:
    """Delivered over expected (message, recipient) pairs"""
    if r.expected == 0:
        raise MetricUndefinedError("no deliveries were expected")
    return r.delivered / r.expected


def cost(r) -> float:
    """Replicas per delivered message, the delivery hop itself excluded"""
    if r.delivered == 0:
        raise MetricUndefinedError("cost is undefined without deliveries")
    return (r.transmissions - r.delivered) / r.delivered


def cost_inclusive(r) -> float:
    if r.delivered == 0:
        raise MetricUndefinedError("cost is undefined without deliveries")
    return r.transmissions / r.delivered


def replica_count(r) -> int:
    return r.transmissions - r.delivered


def mean_latency(r) -> float:
    if not r.latencies:
        raise MetricUndefinedError("latency is undefined without deliveries")
    return math.fsum(r.latencies.values()) / len(r.latencies)


def direct_delivery_ratio(r) -> float:
    """Share of deliveries the source made itself"""
    if r.delivered == 0:
        raise MetricUndefinedError("no deliveries")
    return r.direct_deliveries / r.delivered


def ci95(samples):
    """Mean and normal-approximation 95% half-width"""
    values = np.asarray(list(samples), dtype=float)
    if len(values) < 2:
        raise ValueError("a confidence interval needs at least two samples")
    half_width = Z_95 * values.std(ddof=1) / math.sqrt(len(values))
    return float(values.mean()), float(half_width)


def estimate_buffer_occupancy(forwardings, days, relay_nodes, avg_msg_bytes) -> float:
    """Bytes each relay would hold if every forwarding of a day stayed buffered"""
    for name, value in (("forwardings", forwardings), ("days", days),
                        ("relay_nodes", relay_nodes), ("avg_msg_bytes", avg_msg_bytes)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")
    return forwardings / days / relay_nodes * avg_msg_bytes


def _or_nan(fn, r):
    try:
        return fn(r)
    except (MetricUndefinedError, ValueError):
        return math.nan


@dataclass
class RunRecord:
    scenario: str
    protocol: str
    param_name: str
    param_value: object
    seed: int
    result: object
    density: Optional[float] = None

    @property
    def key(self):
        return (self.scenario, self.protocol, self.param_name, str(self.param_value), self.seed)


def _estimated_buffer(r):
    days = r.duration / SECONDS_PER_DAY
    return estimate_buffer_occupancy(r.transmissions, days, r.relay_nodes, r.mean_message_size)


def run_details(records) -> pd.DataFrame:
    """One row per seed with every per-run quantity"""
    rows = []
    for record in sorted(records, key=lambda rec: rec.key):
        r = record.result
        rows.append({
            "scenario": record.scenario,
            "protocol": record.protocol,
            "param_name": record.param_name,
            "param_value": record.param_value,
            "seed": record.seed,
            "expected": r.expected,
            "delivered": r.delivered,
            "transmissions": r.transmissions,
            "replicas": replica_count(r),
            "delivery": _or_nan(delivery_probability, r),
            "cost": _or_nan(cost, r),
            "cost_inclusive": _or_nan(cost_inclusive, r),
            "latency_mean_s": _or_nan(mean_latency, r),
            "direct_delivery_ratio": _or_nan(direct_delivery_ratio, r),
            "drops": r.drops,
            "aborted": r.aborted,
            "peak_buffer_bytes": r.peak_buffer_restricted,
            "estimated_buffer_bytes_per_day": _or_nan(_estimated_buffer, r),
            "hub_count": len(r.hubs),
            "density": record.density if record.density is not None else math.nan,
        })
    return pd.DataFrame(rows)


def _mean_and_ci(values):
    defined = [v for v in values if not math.isnan(v)]
    if not defined:
        return math.nan, math.nan
    if len(defined) < 2:
        return float(defined[0]), math.nan
    return ci95(defined)


def build_report(records) -> pd.DataFrame:
    """Aggregate per-seed results into one row per configuration"""
    details = run_details(records)
    if details.empty:
        return pd.DataFrame(columns=REPORT_COLUMNS)

    rows = []
    grouped = details.groupby(["scenario", "protocol", "param_name", "param_value"], sort=True, dropna=False)
    for (scenario, protocol, param_name, param_value), group in grouped:
        delivery_mean, delivery_ci = _mean_and_ci(group["delivery"].tolist())
        cost_mean, cost_ci = _mean_and_ci(group["cost"].tolist())
        latency_mean, latency_ci = _mean_and_ci(group["latency_mean_s"].tolist())
        rows.append({
            "scenario": scenario,
            "protocol": protocol,
            "param_name": param_name,
            "param_value": param_value,
            "seed_count": int(len(group)),
            "delivery_mean": delivery_mean,
            "delivery_ci": delivery_ci,
            "cost_mean": cost_mean,
            "cost_ci": cost_ci,
            "latency_mean_s": latency_mean,
            "latency_ci": latency_ci,
            "peak_buffer_bytes_max": int(group["peak_buffer_bytes"].max()),
            "density": float(group["density"].mean()) if group["density"].notna().any() else math.nan,
        })
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    logger.info("Report written to %s (%d rows)", path, len(report))
    return path


PLOT_METRICS = {
    "delivery": ("delivery_mean", "delivery_ci"),
    "cost": ("cost_mean", "cost_ci"),
    "latency": ("latency_mean_s", "latency_ci"),
}


def write_plot_data(report, out_dir):
    """Tidy per-figure tables: one metric against one swept parameter"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for param_name, block in report.groupby("param_name", sort=True):
        for metric, (mean_col, ci_col) in PLOT_METRICS.items():
            tidy = block[["scenario", "protocol", "param_value", mean_col, ci_col]].rename(
                columns={mean_col: "mean", ci_col: "ci"}
            )
            tidy = tidy.sort_values(["protocol", "scenario", "param_value"], kind="mergesort")
            path = out_dir / f"{metric}_vs_{param_name}.csv"
            tidy.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
            written.append(path)
    return written
