"""Command-line entry point: scenario ingestion, sweep orchestration and
report emission for packing, roofline, bottleneck and end-to-end runs.

Exit codes: 0 success, 1 model/scheduling error, 2 I/O or config error.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click

from . import energy as en
from . import nnspec, report, tilepack, timing

DATA = Path(__file__).parent / "data"


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _load_network(path: str | None, default: str = "mobilenet_v2") -> nnspec.NetworkSpec:
    p = Path(path) if path else DATA / f"{default}.yaml"
    if not p.exists():
        _fail(2, f"network file not found: {p}")
    try:
        return nnspec.parse_network(p)
    except (nnspec.NetworkParseError, nnspec.NetworkValidationError) as e:
        _fail(2, f"bad network file {p}: {e}")


def _load_config(path: str | None) -> timing.ClusterConfig:
    p = Path(path) if path else DATA / "cluster_default.yaml"
    if not p.exists():
        _fail(2, f"config file not found: {p}")
    try:
        return timing.load_cluster_config(p)
    except (ValueError, TypeError) as e:
        _fail(2, f"bad cluster config {p}: {e}")


def _load_profile(path: str | None) -> en.PowerProfile:
    p = Path(path) if path else DATA / "power_calibrated.yaml"
    if not p.exists():
        _fail(2, f"power profile not found: {p}")
    try:
        return en.load_power_profile(p)
    except en.ProfileError as e:
        _fail(2, f"bad power profile {p}: {e}")


def _parse_sweeps(sweeps: tuple[str, ...]) -> dict[str, list[float]]:
    axes: dict[str, list[float]] = {}
    for s in sweeps:
        if "=" not in s:
            _fail(2, f"bad sweep spec '{s}' (expected AXIS=v1,v2,...)")
        axis, vals = s.split("=", 1)
        try:
            parsed = [float(v) for v in vals.split(",") if v]
        except ValueError:
            _fail(2, f"bad sweep values in '{s}'")
        if not parsed:
            _fail(2, f"empty sweep axis '{axis}'")
        axes[axis.strip()] = parsed
    return axes


def _outdir(out: str) -> Path:
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


@click.group()
def main():
    """Analytical simulator for the heterogeneous IMC DNN cluster."""


@main.command("pack")
@click.option("--network", type=str, default=None, help="network YAML (default: bundled MobileNetV2)")
@click.option("--out", type=str, default="out", show_default=True)
@click.option("--bin-side", type=int, default=256, show_default=True)
@click.option("--n-ima", type=int, default=None, help="available crossbars (report shortfall)")
@click.option("--include-first-conv/--no-include-first-conv", default=True, show_default=True)
@click.option("--include-classifier/--no-include-classifier", default=False, show_default=True)
@click.option("--include-depthwise/--no-include-depthwise", default=False, show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_pack(network, out, bin_side, n_ima, include_first_conv,
             include_classifier, include_depthwise, figures):
    """Tile & pack a network's weight matrices onto crossbars."""
    net = _load_network(network)
    outdir = _outdir(out)
    try:
        packing = tilepack.pack_network(
            net, side=bin_side, n_ima_available=n_ima,
            include_first_conv=include_first_conv,
            include_classifier=include_classifier,
            include_depthwise=include_depthwise)
    except tilepack.UnpackableError as e:
        _fail(1, str(e))
    report.write_packing_csv(outdir / "packing.csv", packing)
    report.write_packing_summary(outdir / "packing.txt", packing)
    if figures:
        report.save_packing_figure(outdir / "packing.png", packing)
    click.echo(f"{packing.n_ima_required} crossbars required "
               f"(min utilization {min(packing.per_bin_utilization):.1%})")
    if packing.shortfall:
        click.echo(f"warning: {packing.shortfall} crossbars short of the "
                   f"{n_ima} available", err=True)


@main.command("roofline")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--sweep", "sweeps", type=str, multiple=True,
              help="AXIS=v1,v2,... for axes bus_width, f_clk, utilization")
@click.option("--model", type=click.Choice(["sequential", "pipelined", "both"]),
              default="both", show_default=True)
@click.option("--out", type=str, default="out", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_roofline(config_path, sweeps, model, out, figures):
    """Roofline sweep over utilization, bus width and frequency."""
    base = _load_config(config_path)
    axes = _parse_sweeps(sweeps)
    outdir = _outdir(out)
    bus_widths = [int(v) for v in axes.get("bus_width", [base.bus_width])]
    f_clks = axes.get("f_clk", [base.f_clk])
    utils = axes.get("utilization", [i / 100 for i in range(5, 101, 5)])
    models = ["sequential", "pipelined"] if model == "both" else [model]
    results = []
    try:
        for bw in bus_widths:
            for f in f_clks:
                cfg = replace(base, bus_width=bw, f_clk=f)
                for m in models:
                    results.append((cfg, m, timing.roofline(cfg, utils)))
    except ValueError as e:
        _fail(1, str(e))
    report.write_roofline_csv(outdir / "roofline.csv", results)
    if figures:
        report.save_roofline_figure(outdir / "roofline.png", results)
    click.echo(f"wrote {sum(len(r[2]) for r in results)} roofline points "
               f"to {outdir / 'roofline.csv'}")


@main.command("bottleneck")
@click.option("--network", type=str, default=None, help="bottleneck YAML (default: bundled)")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--profile", "profile_path", type=str, default=None)
@click.option("--strategy", type=str, default="all", show_default=True,
              help="cores | ima_cjob8 | ima_cjob16 | hybrid | ima_dw | all")
@click.option("--out", type=str, default="out", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_bottleneck(network, config_path, profile_path, strategy, out, figures):
    """Compare mapping strategies on a bottleneck block."""
    net = _load_network(network, default="bottleneck")
    cfg = _load_config(config_path)
    profile = _load_profile(profile_path)
    outdir = _outdir(out)
    wanted = [("cores", timing.Strategy.CORES, None),
              ("ima_cjob8", timing.Strategy.IMA_CJOB, 8),
              ("ima_cjob16", timing.Strategy.IMA_CJOB, 16),
              ("hybrid", timing.Strategy.HYBRID, None),
              ("ima_dw", timing.Strategy.IMA_DW, None)]
    if strategy != "all":
        wanted = [w for w in wanted if w[0] == strategy]
        if not wanted:
            _fail(2, f"unknown strategy '{strategy}'")
    rows = []
    timelines = []
    baseline = None
    any_ok = False
    for label, strat, c_job in wanted:
        try:
            tl = timing.bottleneck_schedule(net, strat, cfg,
                                            c_job=c_job or 16)
        except timing.SchedulingError as e:
            click.echo(f"{label}: infeasible ({e})", err=True)
            rows.append([label, "infeasible", "", "", "", "",
                         cfg.bus_width, int(cfg.f_clk)])
            continue
        any_ok = True
        rep = en.timeline_energy(tl, profile)
        cells = _strategy_cells(net, strat, c_job or 16)
        area = max(en.crossbar_area_mm2(cells), 1e-6)
        met = en.efficiency_metrics(rep, tl.total_ops, area)
        if strat == timing.Strategy.CORES:
            baseline = tl.total_seconds
        norm = baseline / tl.total_seconds if baseline else ""
        rows.append([label, f"{tl.total_seconds:.9f}",
                     f"{rep.total_joules:.12f}", f"{met.gops:.3f}",
                     f"{met.tops_per_watt:.4f}", f"{met.gops_per_mm2:.2f}",
                     cfg.bus_width, int(cfg.f_clk), norm])
        timelines.append((tl, rep))
    report.write_csv(outdir / "bottleneck.csv",
                     ["strategy", "seconds", "joules", "gops", "tops_per_w",
                      "gops_per_mm2", "bus_bits", "f_clk_hz", "norm_perf"],
                     rows)
    report.write_timeline_csv(outdir / "bottleneck_timeline.csv", timelines)
    if figures and timelines:
        report.save_breakdown_figure(outdir / "bottleneck.png",
                                     [t for t, _ in timelines])
    if not any_ok:
        _fail(1, "no strategy could be scheduled")
    click.echo(f"wrote strategy comparison to {outdir / 'bottleneck.csv'}")


def _strategy_cells(net, strat, c_job):
    """Programmed crossbar cells used by a strategy (for area efficiency)."""
    from .mapping import map_depthwise_cjob, map_standard_conv
    from .nnspec import LayerKind
    cells = 0
    for layer, input in zip(net.layers, net.layer_inputs):
        if layer.kind == LayerKind.DEPTHWISE and strat == timing.Strategy.IMA_CJOB:
            try:
                _, plan = map_depthwise_cjob(layer, input, c_job)
                cells += plan.cells_programmed
            except Exception:
                pass
        elif layer.kind in nnspec.MATRIX_KINDS and strat != timing.Strategy.CORES:
            cells += map_standard_conv(layer, input).cells_programmed
    return cells


@main.command("e2e")
@click.option("--network", type=str, default=None)
@click.option("--config", "config_path", type=str, default=None)
@click.option("--profile", "profile_path", type=str, default=None)
@click.option("--n-ima", type=int, default=None, help="available crossbars")
@click.option("--out", type=str, default="out", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_e2e(network, config_path, profile_path, n_ima, out, figures):
    """End-to-end latency/energy report for a full network."""
    net = _load_network(network)
    cfg = _load_config(config_path)
    profile = _load_profile(profile_path)
    outdir = _outdir(out)
    try:
        packing = tilepack.pack_network(net, n_ima_available=n_ima)
        tl = timing.e2e_schedule(net, cfg)
    except (timing.SchedulingError, tilepack.UnpackableError) as e:
        _fail(1, str(e))
    rep = en.timeline_energy(tl, profile)
    report.write_timeline_csv(outdir / "e2e.csv", [(tl, rep)])
    report.write_packing_csv(outdir / "e2e_packing.csv", packing)
    if figures:
        report.save_e2e_figure(outdir / "e2e.png", tl, rep)
    if packing.shortfall:
        click.echo(f"warning: packing needs {packing.n_ima_required} crossbars, "
                   f"{packing.shortfall} more than available", err=True)
    click.echo(f"latency {tl.total_seconds*1e3:.2f} ms, "
               f"energy {rep.total_joules*1e6:.1f} uJ, "
               f"{packing.n_ima_required} crossbars")


if __name__ == "__main__":
    main()
