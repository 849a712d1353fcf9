import math


def format_number(value, digits=3):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    return f"{value:.{digits}f}"


def format_report_row(row):
    """Nicely formats a report row into a one-line summary for printing."""
    return (
        f"{row['protocol']} [{row['param_name']}={row['param_value']}] "
        f"delivery {format_number(row['delivery_mean'])} ± {format_number(row['delivery_ci'])}, "
        f"cost {format_number(row['cost_mean'])}, "
        f"latency {format_number(row['latency_mean_s'], 1)} s "
        f"({row['seed_count']} seeds)"
    )
