"""Write run reports as CSV, JSON or SVG charts."""

import csv
import io
import json
import os

from c2tcp_lab.metrics import CSV_HEADER, TIMESERIES_HEADER
from c2tcp_lab.sim import US_PER_MS


def reports_csv(reports):
    """Metrics CSV, one row per flow per run.

    Runs that came from a sweep get a leading column named after the swept
    key holding that run's value.
    """
    reports = list(reports)
    key = reports[0].sweep_key if reports else None
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(((key,) if key else ()) + CSV_HEADER)
    for report in reports:
        prefix = (_fmt(report.sweep_value),) if key else ()
        for fm in report.flows:
            writer.writerow(prefix + fm.csv_row())
    return buf.getvalue()


def timeseries_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TIMESERIES_HEADER)
    for flow_id in sorted(report.timeseries):
        for t, mbps in report.timeseries[flow_id]:
            writer.writerow((t // US_PER_MS, flow_id, f"{mbps:.6f}"))
    return buf.getvalue()


def _fmt(value):
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def report_dict(report):
    return {
        "name": report.config.name,
        "seed": report.config.seed,
        "digest": report.digest,
        "sweep": {"key": report.sweep_key, "value": report.sweep_value} if report.sweep_key else None,
        "flows": [fm.as_dict() for fm in report.flows],
        "aggregate": report.aggregate.as_dict(),
        "flow_stats": {str(k): v for k, v in report.flow_stats.items()},
        "link_counters": {q: {str(f): c for f, c in counters.items()}
                          for q, counters in report.link_counters.items()},
        "events": report.events,
        "config": report.config.to_dict(),
    }


def reports_json(reports):
    return json.dumps([report_dict(r) for r in reports], indent=2, sort_keys=True) + "\n"


def scatter_svg(reports, path):
    """Throughput against average delay (log axis), one point per flow per run."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for report in reports:
        for fm in report.flows:
            label = fm.algorithm
            if report.sweep_key:
                label += f" ({report.sweep_key}={_fmt(report.sweep_value)})"
            ax.scatter(max(fm.avg_delay_ms, 1e-3), fm.avg_throughput_mbps, label=label)
    ax.set_xscale("log")
    # lower delay is better, so delay grows to the left: good schemes sit up and to the right
    ax.invert_xaxis()
    ax.set_xlabel("average per-packet delay (ms, log scale)")
    ax.set_ylabel("average throughput (Mbps)")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def timeseries_svg(report, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    algorithms = {fm.flow_id: fm.algorithm for fm in report.flows}
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for flow_id in sorted(report.timeseries):
        points = report.timeseries[flow_id]
        ax.plot([t / 1e6 for t, _ in points], [m for _, m in points],
                label=f"flow {flow_id} {algorithms.get(flow_id, '')}")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("throughput (Mbps)")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit(reports, out_dir, fmt="csv", stem=None):
    """Write ``reports`` into ``out_dir``; returns the paths written."""
    reports = list(reports)
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or reports[0].config.name
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(path)

    if fmt == "csv":
        put(f"{stem}.csv", reports_csv(reports))
        if len(reports) == 1:
            put(f"{stem}_timeseries.csv", timeseries_csv(reports[0]))
    elif fmt == "json":
        put(f"{stem}.json", reports_json(reports))
    elif fmt == "svg":
        path = os.path.join(out_dir, f"{stem}_scatter.svg")
        scatter_svg(reports, path)
        written.append(path)
        for i, report in enumerate(reports):
            suffix = f"_{_fmt(report.sweep_value)}" if report.sweep_key else ""
            path = os.path.join(out_dir, f"{stem}{suffix}_timeseries.svg")
            timeseries_svg(report, path)
            written.append(path)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    return written
