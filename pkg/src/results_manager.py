import logging
from pathlib import Path

from .metrics import build_report, run_details, write_plot_data, write_report
from .trace_io import save_contact_trace, write_sidecar

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).resolve().parent.parent
RESULTS_DIR = BASE_DIR / "results"
REPORT_NAME = "report.csv"
DETAILS_NAME = "run_details.csv"


def ensure_results_directory(out_dir=None):
    """Ensure the output directory exists and return it"""
    out_dir = Path(out_dir) if out_dir is not None else RESULTS_DIR
    if not out_dir.exists():
        out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def log_directory(out_dir):
    return ensure_results_directory(out_dir) / "events"


def social_directory(out_dir):
    return ensure_results_directory(out_dir) / "social"


def plot_directory(out_dir):
    return ensure_results_directory(out_dir) / "plot_data"


def save_results(records, out_dir=None, plot_data=False):
    """Write the aggregated report, the per-seed details and optionally plot tables"""
    out_dir = ensure_results_directory(out_dir)
    report = build_report(records)
    details = run_details(records)

    paths = {"report": write_report(report, out_dir / REPORT_NAME)}
    details.to_csv(out_dir / DETAILS_NAME, index=False, float_format="%.10g", lineterminator="\n")
    paths["details"] = out_dir / DETAILS_NAME
    if plot_data:
        paths["plot_data"] = write_plot_data(report, plot_directory(out_dir))
    logger.info("Results saved to %s", out_dir)
    return report, paths


def save_generated_trace(scenario, trace_path, extra=None):
    """Write a synthetic trace and its group/interest sidecar side by side"""
    trace_path = Path(trace_path)
    save_contact_trace(scenario.trace, trace_path)
    sidecar_path = sidecar_path_for(trace_path)
    payload = {"sources": list(scenario.sources), "mean_movements": scenario.mean_movements}
    if extra:
        payload.update(extra)
    write_sidecar(sidecar_path, scenario.groups, scenario.profiles, payload)
    logger.info("Trace written to %s, sidecar to %s", trace_path, sidecar_path)
    return trace_path, sidecar_path


def sidecar_path_for(trace_path):
    trace_path = Path(trace_path)
    return trace_path.with_name(trace_path.stem + ".groups.json")
