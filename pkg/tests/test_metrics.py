import math

import pandas as pd
import pytest

from src.errors import MetricUndefinedError
from src.metrics import (
    REPORT_COLUMNS,
    RunRecord,
    build_report,
    ci95,
    cost,
    cost_inclusive,
    delivery_probability,
    direct_delivery_ratio,
    estimate_buffer_occupancy,
    mean_latency,
    replica_count,
    run_details,
    write_plot_data,
    write_report,
)
from src.sim_engine import RunResult


def result(expected=4, delivered=2, transmissions=10, latencies=None, **kwargs):
    return RunResult(
        protocol="dlife",
        seed=1,
        expected=expected,
        delivered=delivered,
        transmissions=transmissions,
        latencies=latencies if latencies is not None else {(i, 1): 100.0 for i in range(delivered)},
        duration=86400,
        relay_nodes=35,
        mean_message_size=52_000,
        **kwargs,
    )


def record(seed, r, protocol="dlife", value=1):
    return RunRecord("cambridge", protocol, "msg_int", value, seed, r, density=26.83)


def test_delivery_probability():
    assert delivery_probability(result(expected=4, delivered=2)) == 0.5
    assert delivery_probability(result(expected=4, delivered=4)) == 1.0
    assert delivery_probability(result(expected=200, delivered=187)) == pytest.approx(0.935)
    with pytest.raises(MetricUndefinedError):
        delivery_probability(result(expected=0, delivered=0, transmissions=0))


def test_cost_variants():
    r = result(transmissions=10, delivered=2)
    assert cost(r) == 4.0
    assert cost_inclusive(r) == 5.0
    assert replica_count(r) == 8
    assert cost(result(transmissions=3, delivered=3)) == 0.0
    with pytest.raises(MetricUndefinedError):
        cost(result(delivered=0, transmissions=7))


def test_mean_latency():
    assert mean_latency(result(delivered=1, latencies={(0, 1): 120.0})) == 120
    assert mean_latency(result(delivered=2, latencies={(0, 1): 100.0, (1, 1): 300.0})) == 200
    with pytest.raises(MetricUndefinedError):
        mean_latency(result(delivered=0, latencies={}))


def test_direct_delivery_ratio():
    assert direct_delivery_ratio(result(delivered=4, direct_deliveries=2)) == 0.5


def test_ci95():
    assert ci95([5, 5, 5, 5]) == (5, 0)
    mean, half = ci95([1, 3])
    assert mean == 2
    assert half == pytest.approx(1.96)
    with pytest.raises(ValueError):
        ci95([1])


def test_buffer_estimate_worked_example():
    estimate = estimate_buffer_occupancy(80340.7, 12, 35, 52_000)
    assert 9.84e6 <= estimate <= 10.04e6
    assert estimate_buffer_occupancy(35, 1, 35, 1000) == 1000
    with pytest.raises(ValueError):
        estimate_buffer_occupancy(10, 0, 35, 1000)


def test_report_aggregates_seeds():
    records = [record(seed, result(delivered=d, transmissions=10)) for seed, d in enumerate([2, 2, 2, 2, 2])]
    report = build_report(records)
    assert list(report.columns) == REPORT_COLUMNS
    assert len(report) == 1
    row = report.iloc[0]
    assert row["seed_count"] == 5
    assert row["delivery_mean"] == 0.5
    assert row["delivery_ci"] == 0
    assert row["cost_mean"] == 4.0


def test_undefined_metrics_become_blank():
    records = [record(1, result(delivered=0, transmissions=5)), record(2, result(delivered=0, transmissions=2))]
    report = build_report(records)
    assert math.isnan(report.iloc[0]["cost_mean"])
    assert math.isnan(report.iloc[0]["latency_mean_s"])
    assert report.iloc[0]["delivery_mean"] == 0


def test_report_rows_per_configuration():
    records = [
        record(seed, result(), protocol=protocol, value=value)
        for protocol in ("bubblerap", "dlife", "scorp")
        for value in (1, 5, 10, 20, 35)
        for seed in (1, 2)
    ]
    report = build_report(records)
    assert len(report) == 15
    assert list(report["protocol"].unique()) == ["bubblerap", "dlife", "scorp"]


def test_report_is_order_independent(tmp_path):
    records = [record(seed, result(delivered=seed % 3 + 1)) for seed in range(5)]
    first = write_report(build_report(records), tmp_path / "a.csv")
    second = write_report(build_report(list(reversed(records))), tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text().splitlines()[0] == ",".join(REPORT_COLUMNS)


def test_run_details_columns():
    details = run_details([record(1, result(direct_deliveries=1))])
    row = details.iloc[0]
    assert row["replicas"] == 8
    assert row["direct_delivery_ratio"] == 0.5
    assert row["estimated_buffer_bytes_per_day"] == pytest.approx(10 / 1 / 35 * 52_000)


def test_plot_data_tables(tmp_path):
    records = [record(seed, result(), value=value) for value in (1, 5) for seed in (1, 2)]
    paths = write_plot_data(build_report(records), tmp_path)
    assert sorted(p.name for p in paths) == ["cost_vs_msg_int.csv", "delivery_vs_msg_int.csv", "latency_vs_msg_int.csv"]
    table = pd.read_csv(tmp_path / "delivery_vs_msg_int.csv")
    assert list(table.columns) == ["scenario", "protocol", "param_value", "mean", "ci"]
    assert list(table["param_value"]) == [1, 5]
