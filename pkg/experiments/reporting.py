"""
Sweep artifacts: the compliance CSV, one SVG chart per (load, scheduler),
failures and sampling side files, and the merge-time benchmark summary.

Column order of ``compliance.csv`` is fixed by ``CSV_COLUMNS``.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

from django.template.loader import render_to_string

from ponhv.dba.core import FRAME_DURATION_US, SLA_TYPES

COMPLIANCE_CSV = "compliance.csv"
FAILURES_CSV = "failures.csv"
SAMPLING_CSV = "sampling.csv"
BENCH_CSV = "bench.csv"

CSV_COLUMNS = (
    "scheduler",
    "load_fraction",
    "sla_share",
    "burst_class",
    "sla_type",
    "compliance",
    "flow_frames",
    "mean_merge_us",
    "p99_merge_us",
    "seed",
)

FAILURE_COLUMNS = ("scheduler", "load_fraction", "sla_share", "burst_class", "seed", "error")
SAMPLING_COLUMNS = ("scheduler", "load_fraction", "sla_share", "burst_class", "seed",
                    "frames", "sample_size")
BENCH_COLUMNS = ("scheduler", "load_fraction", "samples", "mean_merge_us", "p50_merge_us",
                 "p99_merge_us", "cv", "frame_share", "ratio_to_stateless")

BURST_COLORS = {"small": "#1b9e77", "medium": "#d95f02", "large": "#7570b3"}
SLA_DASHES = {"type1": "", "type2": "6 4"}


def result_records(result, timing: bool = False) -> list[dict]:
    """One row per SLA type, keyed like CSV_COLUMNS."""
    scenario = result.scenario
    mean = p99 = None
    if timing and result.timing is not None:
        mean, p99 = result.timing.mean_us, result.timing.p99_us
    return [
        {
            "scheduler": result.scheduler,
            "load_fraction": scenario.load_fraction,
            "sla_share": scenario.sla_share,
            "burst_class": scenario.burst_class.value,
            "sla_type": t.value,
            "compliance": result.compliance[t],
            "flow_frames": result.flow_frames[t],
            "mean_merge_us": mean,
            "p99_merge_us": p99,
            "seed": scenario.seed,
        }
        for t in SLA_TYPES
    ]


def _cell(key, value) -> str:
    if value is None:
        return ""
    if key == "compliance":
        return "%.6f" % value
    if key in ("mean_merge_us", "p99_merge_us"):
        return "%.3f" % value
    if isinstance(value, float):
        return "%g" % value
    return str(value)


def csv_rows(results, timing: bool = False) -> list[list[str]]:
    return [
        [_cell(k, record[k]) for k in CSV_COLUMNS]
        for result in results
        for record in result_records(result, timing)
    ]


def write_compliance_csv(path: Path, results, timing: bool = False) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(csv_rows(results, timing))
    return path


def write_failures(path: Path, failures) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(FAILURE_COLUMNS)
        for outcome in failures:
            s = outcome.job.scenario
            writer.writerow([outcome.job.scheduler, "%g" % s.load_fraction, "%g" % s.sla_share,
                             s.burst_class.value, s.seed, outcome.error])
    return path


def write_sampling(path: Path, results) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SAMPLING_COLUMNS)
        for r in results:
            s = r.scenario
            writer.writerow([r.scheduler, "%g" % s.load_fraction, "%g" % s.sla_share,
                             s.burst_class.value, s.seed, s.frames, r.sample_size])
    return path


# Chart geometry in SVG user units.
WIDTH, HEIGHT = 600, 380
LEFT, RIGHT, TOP, BOTTOM = 64, 170, 44, 56


def _x(share: float) -> float:
    return LEFT + share * (WIDTH - LEFT - RIGHT)


def _y(compliance: float) -> float:
    return HEIGHT - BOTTOM - compliance * (HEIGHT - TOP - BOTTOM)


def chart_context(load: float, scheduler: str, results) -> dict:
    """
    Template context for one chart: x is sla_share, y is compliance, one
    colour per burst class, solid for Type1 and dashed for Type2.
    """
    points = defaultdict(list)
    sampled = None
    for r in results:
        s = r.scenario
        if r.sample_size is not None:
            sampled = r.sample_size
        for t in SLA_TYPES:
            points[(s.burst_class.value, t.value)].append((s.sla_share, r.compliance[t]))
    series = []
    for burst in BURST_COLORS:
        for sla, dash in SLA_DASHES.items():
            pts = sorted(points.get((burst, sla), ()))
            if not pts:
                continue
            coords = [("%.1f" % _x(x), "%.1f" % _y(y)) for x, y in pts]
            series.append({
                "label": "%s %s" % (burst, sla),
                "color": BURST_COLORS[burst],
                "dash": dash,
                "points": " ".join("%s,%s" % c for c in coords),
                "markers": coords,
            })
    for k, s in enumerate(series):
        s["legend_y"] = TOP + 14 + 20 * k
    ticks = [k / 5 for k in range(6)]
    return {
        "title": "%s, load %g%s" % (scheduler, load,
                                    "" if sampled is None else ", %d sampled frames" % sampled),
        "width": WIDTH,
        "height": HEIGHT,
        "left": LEFT,
        "right_edge": WIDTH - RIGHT,
        "top": TOP,
        "bottom_edge": HEIGHT - BOTTOM,
        "legend_x": WIDTH - RIGHT + 16,
        "x_ticks": [{"pos": "%.1f" % _x(t), "label": "%g" % t} for t in ticks],
        "y_ticks": [{"pos": "%.1f" % _y(t), "label": "%g" % t} for t in ticks],
        "series": series,
    }


def render_chart(load: float, scheduler: str, results) -> str:
    return render_to_string("experiments/compliance_chart.svg",
                            chart_context(load, scheduler, results))


def chart_name(scheduler: str, load: float) -> str:
    return "compliance_%s_load%s.svg" % (scheduler, ("%g" % load).replace(".", "_"))


def write_charts(out_dir: Path, results) -> list[Path]:
    groups = defaultdict(list)
    for r in results:
        groups[(r.scenario.load_fraction, r.scheduler)].append(r)
    paths = []
    for (load, scheduler), group in sorted(groups.items()):
        path = out_dir / chart_name(scheduler, load)
        path.write_text(render_chart(load, scheduler, group), encoding="utf-8")
        paths.append(path)
    sampled = [r for r in results if r.sample_size is not None]
    if sampled:
        paths.append(write_sampling(out_dir / SAMPLING_CSV, sampled))
    return paths


def frame_share(mean_us: float, frame_duration_us: float = FRAME_DURATION_US) -> str:
    """``3.52`` -> ``"2.8%"``."""
    return "%.1f%%" % (100.0 * mean_us / frame_duration_us)


def speed_ratio(mean_us: float, baseline_us: float) -> str:
    """``(3.52, 2.72)`` -> ``"1.29"``."""
    return "%.2f" % (mean_us / baseline_us)


def bench_rows(rows) -> list[list[str]]:
    """CSV cells for each benchmark row that has timing samples."""
    baseline = {
        r.load_fraction: r.timing.mean_us
        for r in rows if r.scheduler == "stateless" and r.timing is not None
    }
    out = []
    for r in rows:
        t = r.timing
        if t is None or t.samples == 0:
            continue
        base = baseline.get(r.load_fraction)
        ratio = speed_ratio(t.mean_us, base) if base else ""
        out.append([r.scheduler, "%g" % r.load_fraction, str(t.samples), "%.3f" % t.mean_us,
                    "%.3f" % t.p50_us, "%.3f" % t.p99_us, "%.3f" % t.cv,
                    frame_share(t.mean_us), ratio])
    return out


def emit_bench(rows, out_dir: Path, stdout=None) -> Path:
    """Write ``bench.csv`` and a one-line summary per row to ``stdout``."""
    table = bench_rows(rows)
    path = out_dir / BENCH_CSV
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(BENCH_COLUMNS)
        writer.writerows(table)
    if stdout is not None:
        for scheduler, load, samples, mean, p50, p99, cv, share, ratio in table:
            line = "%-9s load %-4s mean %s us (%s of frame duration), p50 %s us, p99 %s us, cv %s, n=%s" % (
                scheduler, load, mean, share, p50, p99, cv, samples)
            if ratio and scheduler != "stateless":
                line += ", %sx stateless" % ratio
            stdout.write(line + "\n")
    return path
