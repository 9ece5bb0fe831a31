"""CSV tables and SVG plots for sweep results.  All outputs are byte-stable
for identical inputs."""

from __future__ import annotations

import csv
import hashlib
import io
from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib
from matplotlib.figure import Figure

from .features import ALL_EXTRACTORS, ExtractorId
from .sorteval import CerRow

REPORT_HEADER = ["sigma", "channel", "extractor", "n_samples", "cer", "n_add", "n_mul", "comp"]
SUMMARY_HEADER = ["sigma", "extractor", "n_samples", "mean_cer", "n_add", "n_mul", "comp"]
COMP_HEADER = ["extractor", "n_samples", "mean_cer", "n_add", "n_mul", "comp"]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def _order(r: CerRow):
    return (r.sigma, ALL_EXTRACTORS.index(r.extractor_id), -r.n_samples, r.channel)


def report_rows(rows: Sequence[CerRow]) -> list[list]:
    return [[_fmt(r.sigma), r.channel, r.extractor_id.value, r.n_samples, _fmt(r.cer),
             r.cost.n_add, r.cost.n_mul, r.cost.comp] for r in sorted(rows, key=_order)]


def summary_rows(rows: Sequence[CerRow]) -> list[list]:
    """Mean CER over channels per (sigma, extractor, length)."""
    cells = defaultdict(list)
    for r in sorted(rows, key=_order):
        cells[(r.sigma, r.extractor_id, r.n_samples)].append(r)
    out = []
    for (sigma, e, n), group in cells.items():
        cost = group[0].cost
        mean = sum(g.cer for g in group) / len(group)
        out.append([_fmt(sigma), e.value, n, _fmt(mean), cost.n_add, cost.n_mul, cost.comp])
    return out


def comp_rows(rows: Sequence[CerRow]) -> list[list]:
    """Mean CER over channels and sigmas against the cost of each (extractor, length)."""
    cells = defaultdict(list)
    for r in sorted(rows, key=lambda r: (ALL_EXTRACTORS.index(r.extractor_id), -r.n_samples)):
        cells[(r.extractor_id, r.n_samples)].append(r)
    out = []
    for (e, n), group in cells.items():
        cost = group[0].cost
        mean = sum(g.cer for g in group) / len(group)
        out.append([e.value, n, _fmt(mean), cost.n_add, cost.n_mul, cost.comp])
    return out


def write_tables(out_dir: Path, rows: Sequence[CerRow]) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out_dir / "report.csv",
        "summary": out_dir / "summary.csv",
        "cer_vs_comp": out_dir / "cer_vs_comp.csv",
    }
    _write_rows(paths["report"], REPORT_HEADER, report_rows(rows))
    _write_rows(paths["summary"], SUMMARY_HEADER, summary_rows(rows))
    _write_rows(paths["cer_vs_comp"], COMP_HEADER, comp_rows(rows))
    return paths


def read_table(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _save_svg(fig: Figure, path: Path) -> None:
    with matplotlib.rc_context({"svg.hashsalt": "spikeapprox", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def plot_cer_vs_sigma(summary_csv: Path, out_path: Path) -> None:
    table = read_table(summary_csv)
    fig = Figure(figsize=(9, 3.6))
    axes = fig.subplots(1, 2, sharey=True)
    lengths = sorted({int(r["n_samples"]) for r in table}, reverse=True)
    for ax, n in zip(axes, lengths):
        for e in ALL_EXTRACTORS:
            pts = [(float(r["sigma"]), float(r["mean_cer"])) for r in table
                   if r["extractor"] == e.value and int(r["n_samples"]) == n]
            if pts:
                ax.plot(*zip(*pts), marker="o", label=e.value)
        ax.set_title(f"N = {n}")
        ax.set_xlabel("noise sigma")
    axes[0].set_ylabel("mean CER")
    axes[-1].legend(fontsize="small")
    fig.tight_layout()
    _save_svg(fig, out_path)


def plot_cer_vs_comp(comp_csv: Path, out_path: Path) -> None:
    table = read_table(comp_csv)
    fig = Figure(figsize=(5.5, 4))
    ax = fig.subplots()
    for r in table:
        comp = max(int(r["comp"]), 1)
        ax.scatter(comp, float(r["mean_cer"]), marker="o" if int(r["n_samples"]) > 22 else "s")
        ax.annotate(f'{r["extractor"]}{r["n_samples"]}', (comp, float(r["mean_cer"])), fontsize="x-small")
    ax.set_xscale("log")
    ax.set_xlabel("Comp = N_add + 10 N_mul")
    ax.set_ylabel("mean CER")
    fig.tight_layout()
    _save_svg(fig, out_path)


def render_plots(out_dir: Path) -> dict[str, Path]:
    paths = {"fig_cer_vs_sigma": out_dir / "cer_vs_sigma.svg", "fig_cer_vs_comp": out_dir / "cer_vs_comp.svg"}
    plot_cer_vs_sigma(out_dir / "summary.csv", paths["fig_cer_vs_sigma"])
    plot_cer_vs_comp(out_dir / "cer_vs_comp.csv", paths["fig_cer_vs_comp"])
    return paths


def sha256_of(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
