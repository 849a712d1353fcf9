import math

from src.metrics import RunRecord
from src.mobility import scaled_synthetic_scenario
from src.results_manager import save_generated_trace, save_results, sidecar_path_for
from src.rng import make_rng
from src.sim_engine import RunResult
from src.trace_io import read_contact_trace, read_sidecar
from src.utils import format_number, format_report_row


def records():
    result = RunResult(protocol="scorp", seed=1, expected=4, delivered=4, transmissions=5,
                       latencies={(0, i): 60.0 for i in range(4)}, duration=86400, relay_nodes=13,
                       mean_message_size=50_000)
    return [RunRecord("synthetic-15", "scorp", "pause", 100, 1, result, density=9.5)]


def test_save_results_writes_report_and_details(tmp_path):
    report, paths = save_results(records(), tmp_path, plot_data=True)
    assert paths["report"].exists()
    assert paths["details"].exists()
    assert len(paths["plot_data"]) == 3
    assert report.loc[0, "cost_mean"] == 0.25


def test_generated_trace_and_sidecar(tmp_path):
    scenario = scaled_synthetic_scenario(2, 0.05, 100, seed=3)
    trace_path, sidecar_path = save_generated_trace(scenario, tmp_path / "gen.csv", {"seed": 3})
    assert sidecar_path == sidecar_path_for(trace_path) == tmp_path / "gen.groups.json"
    assert read_contact_trace(trace_path) == scenario.trace
    groups, profiles, payload = read_sidecar(sidecar_path)
    assert groups == scenario.groups
    assert profiles == scenario.profiles
    assert payload["sources"] == [0, 4]
    assert payload["seed"] == 3


def test_format_report_row(tmp_path):
    report, _ = save_results(records(), tmp_path)
    line = format_report_row(report.iloc[0])
    assert line.startswith("scorp [pause=100] delivery 1.000")
    assert format_number(math.nan) == "n/a"


def test_named_streams_are_independent_and_repeatable():
    assert make_rng(7, "mobility").random() == make_rng(7, "mobility").random()
    assert make_rng(7, "mobility").random() != make_rng(7, "workload").random()
    assert make_rng(7, "mobility").random() != make_rng(8, "mobility").random()
