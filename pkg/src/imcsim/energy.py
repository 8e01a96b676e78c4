"""Energy accounting over execution timelines.

Per-block average powers come from a calibration profile; block energy is
power times busy time.  While an accelerator runs, the cores are billed at
their clock-gated sleep power; shared memory and interconnect are billed as
always-on background over the whole timeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .timing import Timeline, TimelineEntry


class ProfileError(ValueError):
    """Unknown hardware block label or malformed power profile."""


class UndefinedMetricError(ZeroDivisionError):
    """Efficiency metric requested over a zero-duration report."""


@dataclass(frozen=True)
class PowerProfile:
    """Average power in watts per activity state."""
    cores_active: float
    cores_sleep: float
    ima_compute: float
    ima_stream: float
    dw_active: float
    tcdm: float
    interconnect: float
    label: str = "unnamed"

    def __post_init__(self):
        for f in ("cores_active", "cores_sleep", "ima_compute", "ima_stream",
                  "dw_active", "tcdm", "interconnect"):
            if getattr(self, f) < 0:
                raise ProfileError(f"power '{f}' must be non-negative")


def load_power_profile(source) -> PowerProfile:
    """Load a PowerProfile from a YAML file path, YAML text, or mapping."""
    if isinstance(source, Path):
        source = source.read_text()
    doc = yaml.safe_load(source) if isinstance(source, str) else dict(source)
    if not isinstance(doc, dict):
        raise ProfileError("power profile must be a mapping")
    doc = dict(doc)
    doc.pop("notes", None)
    try:
        return PowerProfile(**doc)
    except TypeError as e:
        raise ProfileError(f"bad power profile: {e}") from e


@dataclass(frozen=True)
class ScalingFactors:
    """Classical technology scaling: a is dimensional, b is voltage."""
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("scaling factors must be positive")


def scale_power(p: float, s: ScalingFactors) -> float:
    """Constant-frequency power scaling: p * a * b^2."""
    if p < 0:
        raise ValueError("power must be non-negative")
    return p * s.a * s.b * s.b


def scale_area(area: float, a: float) -> float:
    """Area follows the dimensional scaling factor alone."""
    return area * a


@dataclass(frozen=True)
class EnergyRow:
    layer: str
    block: str
    seconds: float
    block_joules: float      # active block (incl. cores-sleep billing)
    background_joules: float # tcdm + interconnect share

    @property
    def joules(self) -> float:
        return self.block_joules + self.background_joules


@dataclass(frozen=True)
class EnergyReport:
    label: str
    rows: tuple[EnergyRow, ...]
    per_block_joules: dict

    @property
    def total_seconds(self) -> float:
        return sum(r.seconds for r in self.rows)

    @property
    def total_joules(self) -> float:
        return sum(r.joules for r in self.rows)


def _entry_energy(e: TimelineEntry, p: PowerProfile) -> dict:
    parts: dict[str, float] = {}
    if e.block == "cores":
        parts["cores"] = p.cores_active * e.seconds
    elif e.block == "ima":
        # split the interval into compute and stream portions by cycle share
        total = max(e.cycles, 1)
        comp_s = e.seconds * min(e.compute_cycles, total) / total
        parts["ima_compute"] = p.ima_compute * comp_s
        parts["ima_stream"] = p.ima_stream * (e.seconds - comp_s)
        parts["cores_sleep"] = p.cores_sleep * e.seconds
    elif e.block == "dw":
        parts["dw"] = p.dw_active * e.seconds
        parts["cores_sleep"] = p.cores_sleep * e.seconds
    else:
        raise ProfileError(f"unknown hardware block label '{e.block}'")
    parts["tcdm"] = p.tcdm * e.seconds
    parts["interconnect"] = p.interconnect * e.seconds
    return parts


def timeline_energy(timeline: Timeline, profile: PowerProfile) -> EnergyReport:
    """Integrate block powers over a timeline; additivity holds exactly."""
    rows = []
    per_block: dict[str, float] = {}
    for e in timeline.entries:
        parts = _entry_energy(e, profile)
        for k, v in parts.items():
            per_block[k] = per_block.get(k, 0.0) + v
        background = parts["tcdm"] + parts["interconnect"]
        rows.append(EnergyRow(
            layer=e.layer, block=e.block, seconds=e.seconds,
            block_joules=sum(parts.values()) - background,
            background_joules=background))
    return EnergyReport(timeline.label, tuple(rows), per_block)


@dataclass(frozen=True)
class EfficiencyMetrics:
    gops: float
    tops_per_watt: float
    gops_per_mm2: float


def efficiency_metrics(report: EnergyReport, ops: int, area_mm2: float) -> EfficiencyMetrics:
    """Throughput, energy efficiency and area efficiency of a run."""
    if report.total_seconds <= 0:
        raise UndefinedMetricError("zero-duration report")
    if ops <= 0 or area_mm2 <= 0:
        raise ValueError("ops and area must be positive")
    ops_per_s = ops / report.total_seconds
    power = report.total_joules / report.total_seconds
    tops_w = float("inf") if power == 0 else ops_per_s / power / 1e12
    return EfficiencyMetrics(
        gops=ops_per_s / 1e9,
        tops_per_watt=tops_w,
        gops_per_mm2=ops_per_s / 1e9 / area_mm2,
    )


#: Single-crossbar accelerator area in mm^2 (22 nm node).
IMA_AREA_MM2 = 0.83

#: Two PCM devices encode one signed weight; reports double device counts.
DEVICES_PER_WEIGHT = 2


def pcm_device_count(cells_programmed: int) -> int:
    return DEVICES_PER_WEIGHT * cells_programmed


def crossbar_area_mm2(cells_programmed: int, side: int = 256) -> float:
    """Effective analog array area of the programmed cells, padding included."""
    return IMA_AREA_MM2 * cells_programmed / (side * side)
