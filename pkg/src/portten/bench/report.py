"""CSV output, gnuplot scripts and matplotlib figures for benchmark results."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence, TextIO

from .harness import BandwidthRow, LayerRow, SummaryRow

BANDWIDTH_COLUMNS = ("size", "reps", "mean_time_s", "gb_per_s")
LAYER_COLUMNS = ("index", "type", "geometry", "mean_time_s", "checksum")
SUMMARY_COLUMNS = ("type", "mean_time_s", "fraction")


def _fmt(value) -> str:
    if value is None:
        return "skipped"
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _write(columns, records, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([_fmt(v) for v in rec])


def write_bandwidth_csv(rows: Sequence[BandwidthRow], out: TextIO) -> None:
    _write(BANDWIDTH_COLUMNS,
           ((r.size, r.repetitions, r.mean_time_s, r.gb_per_s) for r in rows), out)


def write_layer_csv(rows: Sequence[LayerRow], out: TextIO) -> None:
    _write(LAYER_COLUMNS,
           ((r.index, r.type, r.geometry, r.mean_time_s, r.checksum) for r in rows), out)


def write_summary_csv(rows: Sequence[SummaryRow], out: TextIO) -> None:
    _write(SUMMARY_COLUMNS, ((r.type, r.mean_time_s, r.fraction) for r in rows), out)


def to_csv(writer, rows) -> str:
    buf = io.StringIO()
    writer(rows, buf)
    return buf.getvalue()


def read_csv(path_or_text: str | Path) -> list[dict[str, str]]:
    """Parse a CSV file (or CSV text) produced by the writers above."""
    text = path_or_text
    if isinstance(path_or_text, Path) or "\n" not in str(path_or_text):
        text = Path(path_or_text).read_text()
    return list(csv.DictReader(io.StringIO(text)))


# --- gnuplot ---------------------------------------------------------------

def gnuplot_bandwidth(csv_path: str, image: str = "bandwidth.png") -> str:
    return f"""set datafile separator ","
set terminal pngcairo size 800,600
set output "{image}"
set logscale xy
set xlabel "floats per kernel launch"
set ylabel "bandwidth (GB/s)"
set key off
plot "{csv_path}" using 1:4 every ::1 with linespoints
"""


def gnuplot_layers(layer_csv: str, summary_csv: str | None, image: str = "layers.png") -> str:
    script = f"""set datafile separator ","
set terminal pngcairo size 1000,{900 if summary_csv else 500}
set output "{image}"
set style data histograms
set style fill solid 0.8
set key off
"""
    if summary_csv:
        script += "set multiplot layout 2,1\n"
    script += f"""set ylabel "time (s)"
set xtics rotate by -45
set title "per-layer time"
plot "{layer_csv}" using 4:xtic(sprintf("%s %s", stringcolumn(1), stringcolumn(2))) every ::1
"""
    if summary_csv:
        script += f"""set title "time by layer type"
plot "{summary_csv}" using 2:xtic(1) every ::1
unset multiplot
"""
    return script


# --- matplotlib ------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_bandwidth(rows: Sequence[BandwidthRow], path: str | Path, label: str = "") -> Path:
    """Log-log bandwidth against floats per launch."""
    plt = _pyplot()
    done = [r for r in rows if not r.skipped]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog([r.size for r in done], [r.gb_per_s for r in done], "o-", label=label or None)
    ax.set_xlabel("floats per kernel launch")
    ax.set_ylabel("bandwidth (GB/s)")
    ax.grid(True, which="both", alpha=0.3)
    if label:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_layers(rows: Sequence[LayerRow], summary: Sequence[SummaryRow], path: str | Path,
                title: str = "") -> Path:
    """Per-layer bars above per-type totals."""
    plt = _pyplot()
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 7))
    colors = {"conv": "tab:blue", "pool-max": "tab:orange", "relu": "tab:green"}
    top.bar(range(len(rows)), [r.mean_time_s for r in rows],
            color=[colors.get(r.type, "tab:gray") for r in rows])
    top.set_xticks(range(len(rows)))
    top.set_xticklabels([f"{r.index} {r.type}" for r in rows], rotation=60, ha="right", fontsize=7)
    top.set_ylabel("time (s)")
    top.set_title(title or "per-layer time")
    bottom.bar([s.type for s in summary], [s.mean_time_s for s in summary],
               color=[colors.get(s.type, "tab:gray") for s in summary])
    for i, s in enumerate(summary):
        bottom.annotate(f"{100 * s.fraction:.0f}%", (i, s.mean_time_s), ha="center", va="bottom")
    bottom.set_ylabel("time (s)")
    bottom.set_title("time by layer type")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
