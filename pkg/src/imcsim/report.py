"""CSV and figure emission for the CLI report paths.

CSV is the canonical machine-readable output; every row carries the config
that produced it.  Figures are rendered to PNG next to the CSV for quick
inspection.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .energy import EnergyReport
from .timing import ClusterConfig, RooflinePoint, Timeline
from .tilepack import Packing


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    tmp.replace(path)


def _cfg_cols(cfg: ClusterConfig) -> list:
    return [cfg.bus_width, int(cfg.f_clk)]


def write_roofline_csv(path: Path, sweeps: list[tuple[ClusterConfig, str, list[RooflinePoint]]]) -> None:
    rows = []
    for cfg, model, points in sweeps:
        for p in points:
            rows.append([f"{p.intensity:.6g}", f"{p.roof:.6g}", f"{p.bw_bound:.6g}",
                         f"{p.attainable:.6g}", model, *_cfg_cols(cfg),
                         f"{p.utilization:.4f}",
                         "memory" if p.memory_bound else "compute"])
    write_csv(path, ["intensity_ops_per_byte", "roof_ops_s", "bw_bound_ops_s",
                     "attainable_ops_s", "model", "bus_bits", "f_clk_hz",
                     "utilization", "bound"], rows)


def save_roofline_figure(path: Path, sweeps) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    for cfg, model, points in sweeps:
        xs = [p.intensity for p in points]
        ax.loglog(xs, [p.attainable for p in points], marker="o", ms=3,
                  label=f"{cfg.bus_width}b @ {cfg.f_clk/1e6:.0f} MHz ({model})")
    if sweeps:
        pts = sweeps[0][2]
        ax.loglog([p.intensity for p in pts], [p.roof for p in pts],
                  "k--", lw=1, label="compute roof")
    ax.set_xlabel("operational intensity [ops/byte]")
    ax.set_ylabel("attainable throughput [ops/s]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_packing_csv(path: Path, packing: Packing) -> None:
    rows = []
    for b in packing.bins:
        for p in b.placements:
            rows.append([b.index, p.tile.name, p.x, p.y, p.tile.w, p.tile.h,
                         f"{b.utilization:.4f}", packing.bin_size])
    write_csv(path, ["bin", "tile", "x", "y", "w", "h", "bin_utilization",
                     "bin_size"], rows)


def write_packing_summary(path: Path, packing: Packing) -> None:
    lines = [f"bins required: {packing.n_ima_required}"]
    if packing.shortfall:
        lines.append(f"WARNING: short of {packing.shortfall} crossbars")
    for b in packing.bins:
        lines.append(f"bin {b.index}: {len(b.placements)} tiles, "
                     f"utilization {b.utilization:.1%}")
    path.write_text("\n".join(lines) + "\n")


def save_packing_figure(path: Path, packing: Packing, max_bins: int = 36) -> None:
    bins = packing.bins[:max_bins]
    if not bins:
        return
    ncols = min(6, len(bins))
    nrows = (len(bins) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(2.2 * ncols, 2.2 * nrows),
                             squeeze=False)
    cmap = plt.get_cmap("tab20")
    for i, b in enumerate(bins):
        ax = axes[i // ncols][i % ncols]
        ax.set_xlim(0, packing.bin_size)
        ax.set_ylim(0, packing.bin_size)
        ax.invert_yaxis()
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_title(f"bin {b.index} ({b.utilization:.0%})", fontsize=7)
        for j, p in enumerate(b.placements):
            ax.add_patch(plt.Rectangle((p.x, p.y), p.tile.w, p.tile.h,
                                       facecolor=cmap(j % 20), edgecolor="k",
                                       linewidth=0.4))
    for k in range(len(bins), nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_timeline_csv(path: Path, timelines: list[tuple[Timeline, EnergyReport | None]]) -> None:
    rows = []
    for tl, rep in timelines:
        joules = {r.layer: r.joules for r in rep.rows} if rep else {}
        for e in tl.entries:
            rows.append([tl.label, e.layer, e.block, e.cycles,
                         f"{e.seconds:.9f}", e.ops,
                         f"{joules.get(e.layer, 0.0):.12f}",
                         *_cfg_cols(tl.cfg)])
    write_csv(path, ["schedule", "layer", "block", "cycles", "seconds", "ops",
                     "joules", "bus_bits", "f_clk_hz"], rows)


def save_breakdown_figure(path: Path, timelines: list[Timeline]) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = [tl.label for tl in timelines]
    blocks = ("ima", "dw", "cores")
    colors = {"ima": "#1f77b4", "dw": "#ff7f0e", "cores": "#2ca02c"}
    bottoms = [0.0] * len(timelines)
    for blk in blocks:
        vals = [sum(e.seconds for e in tl.entries if e.block == blk) * 1e3
                for tl in timelines]
        ax.bar(labels, vals, bottom=bottoms, label=blk, color=colors[blk])
        bottoms = [b + v for b, v in zip(bottoms, vals)]
    ax.set_ylabel("latency [ms]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_e2e_figure(path: Path, timeline: Timeline, report: EnergyReport) -> None:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
    names = [e.layer for e in timeline.entries]
    secs = [e.seconds * 1e3 for e in timeline.entries]
    joules = [r.joules * 1e6 for r in report.rows]
    xs = range(len(names))
    ax1.bar(xs, secs, color="#1f77b4")
    ax1.set_ylabel("latency [ms]")
    ax2.bar(xs, joules, color="#ff7f0e")
    ax2.set_ylabel("energy [uJ]")
    ax2.set_xticks(list(xs))
    ax2.set_xticklabels(names, rotation=90, fontsize=4)
    fig.suptitle(f"total {timeline.total_seconds*1e3:.2f} ms, "
                 f"{report.total_joules*1e6:.0f} uJ")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
