"""Lowering of DNN layers onto the crossbar geometry.

Standard and point-wise convolutions use the virtual im2col mapping: one job
computes all output channels of one output pixel.  Depth-wise layers use the
block-diagonal padded mapping with a configurable per-job channel count
(the C_job split).  Activations are 8-bit, so stream byte counts equal
element counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nnspec import (LayerKind, LayerSpec, TensorShape, UnsupportedKindError,
                     output_shape, weight_matrix_dims)
from .xbar import CROSSBAR_SIDE

CROSSBAR_CELLS = CROSSBAR_SIDE * CROSSBAR_SIDE


class TilingRequiredError(ValueError):
    """Layer weight matrix exceeds one crossbar; caller must tile first."""

    def __init__(self, rows: int, cols: int):
        super().__init__(f"weight matrix {rows}x{cols} exceeds one "
                         f"{CROSSBAR_SIDE}x{CROSSBAR_SIDE} crossbar")
        self.rows = rows
        self.cols = cols


class MappingConfigError(ValueError):
    """Invalid mapping parameter (e.g. c_job not dividing the channel count)."""


@dataclass(frozen=True)
class JobPlan:
    """Per-layer stream of identical crossbar jobs."""
    layer: str
    n_jobs: int
    in_bytes_per_job: int
    out_bytes_per_job: int
    rows_used: int
    cols_used: int
    cells_programmed: int
    cells_nonzero: int

    def __post_init__(self):
        if self.rows_used > CROSSBAR_SIDE or self.cols_used > CROSSBAR_SIDE:
            raise ValueError("job plan exceeds crossbar dimensions")
        if self.cells_programmed < self.cells_nonzero:
            raise ValueError("programmed cells cannot be fewer than useful cells")
        if self.n_jobs < 1:
            raise ValueError("a plan needs at least one job")

    @property
    def utilization(self) -> float:
        return self.cells_programmed / CROSSBAR_CELLS

    @property
    def ops(self) -> int:
        """Total operations streamed through the plan (2 per useful MAC)."""
        return 2 * self.cells_nonzero * self.n_jobs


@dataclass(frozen=True)
class DepthwiseMapping:
    """Block-diagonal C_job mapping summary for one depth-wise layer."""
    c_job: int
    n_xbar_cells: int
    jobs_per_pixel: int

    def __post_init__(self):
        if self.jobs_per_pixel * self.c_job <= 0:
            raise ValueError("invalid depth-wise mapping")


def map_standard_conv(layer: LayerSpec, input: TensorShape) -> JobPlan:
    """im2col job plan: one job per output pixel, full K^2*C_in window streamed in."""
    rows, cols = weight_matrix_dims(layer)
    if rows > CROSSBAR_SIDE or cols > CROSSBAR_SIDE:
        raise TilingRequiredError(rows, cols)
    out = output_shape(layer, input)
    return JobPlan(
        layer=layer.name,
        n_jobs=out.height * out.width,
        in_bytes_per_job=rows,
        out_bytes_per_job=cols,
        rows_used=rows,
        cols_used=cols,
        cells_programmed=rows * cols,
        cells_nonzero=rows * cols,
    )


def map_depthwise_dense(layer: LayerSpec) -> tuple[int, int]:
    """(programmed, useful) cell counts of the fully dense-expanded depth-wise layer."""
    if layer.kind != LayerKind.DEPTHWISE:
        raise UnsupportedKindError(f"layer {layer.name} is not depth-wise")
    k2 = layer.kernel * layer.kernel
    c = layer.in_channels
    return (k2 * c * c, k2 * c)


def map_depthwise_cjob(layer: LayerSpec, input: TensorShape,
                       c_job: int) -> tuple[DepthwiseMapping, JobPlan]:
    """Split the depth-wise layer into jobs of c_job channels each.

    Each job streams a K^2*c_job window block and produces c_job output
    pixels; N_xbar = K^2 * C * c_job cells are programmed in total.
    """
    if layer.kind != LayerKind.DEPTHWISE:
        raise UnsupportedKindError(f"layer {layer.name} is not depth-wise")
    c = layer.in_channels
    if c_job < 1 or c % c_job != 0:
        raise MappingConfigError(f"c_job={c_job} does not divide C={c}")
    k2 = layer.kernel * layer.kernel
    if k2 * c_job > CROSSBAR_SIDE:
        raise MappingConfigError(
            f"block height K^2*c_job = {k2 * c_job} exceeds {CROSSBAR_SIDE}")
    if c > CROSSBAR_SIDE:
        raise MappingConfigError(
            f"C = {c} output columns exceed one crossbar side ({CROSSBAR_SIDE})")
    n_cells = k2 * c * c_job
    if n_cells > CROSSBAR_CELLS:
        raise MappingConfigError(
            f"N_xbar = {n_cells} exceeds one crossbar ({CROSSBAR_CELLS} cells)")
    jobs_per_pixel = c // c_job
    out = output_shape(layer, input)
    mapping = DepthwiseMapping(c_job=c_job, n_xbar_cells=n_cells,
                               jobs_per_pixel=jobs_per_pixel)
    plan = JobPlan(
        layer=layer.name,
        n_jobs=out.height * out.width * jobs_per_pixel,
        in_bytes_per_job=k2 * c_job,
        out_bytes_per_job=c_job,
        # blocks share the same row band and sit side by side across columns,
        # so the programmed region is exactly (K^2*c_job) x C
        rows_used=k2 * c_job,
        cols_used=c,
        cells_programmed=n_cells,
        cells_nonzero=k2 * c,
    )
    return mapping, plan


@dataclass(frozen=True)
class OccupancySummary:
    per_plan_utilization: tuple[float, ...]
    padding_fraction: float


def occupancy_stats(plans: list[JobPlan]) -> OccupancySummary:
    """Per-plan crossbar utilization plus the aggregate zero-padding fraction."""
    utils = tuple(p.utilization for p in plans)
    programmed = sum(p.cells_programmed for p in plans)
    nonzero = sum(p.cells_nonzero for p in plans)
    padding = 0.0 if programmed == 0 else 1.0 - nonzero / programmed
    return OccupancySummary(utils, padding)


def cjob_device_increase(net, c_job: int) -> float:
    """Fractional extra devices of the C_job depth-wise mapping over storing
    only true weights, across all crossbar-mapped layers of a network."""
    from .nnspec import MATRIX_KINDS
    true_cells = 0
    programmed = 0
    for layer in net.layers:
        if layer.kind == LayerKind.DEPTHWISE:
            k2 = layer.kernel * layer.kernel
            true_cells += k2 * layer.in_channels
            programmed += k2 * layer.in_channels * c_job
        elif layer.kind in MATRIX_KINDS:
            rows, cols = weight_matrix_dims(layer)
            true_cells += rows * cols
            programmed += rows * cols
    if true_cells == 0:
        return 0.0
    return programmed / true_cells - 1.0


# im2col helpers used to check conv-by-crossbar equivalence against a direct
# convolution oracle.  Weight tensors are laid out (K, K, C_in, C_out) and
# patches follow the same (ky, kx, c) linearization.

def conv_weight_matrix(weights: np.ndarray) -> np.ndarray:
    """Flatten a (K, K, C_in, C_out) kernel into the (K^2*C_in, C_out) crossbar matrix."""
    w = np.asarray(weights)
    if w.ndim != 4 or w.shape[0] != w.shape[1]:
        raise ValueError("expected a (K, K, C_in, C_out) kernel tensor")
    k, _, cin, cout = w.shape
    return w.reshape(k * k * cin, cout)


def im2col_patches(activations: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Linearized receptive fields under "same" zero padding.

    Returns an (H_out*W_out, K^2*C) array whose row order is row-major over
    output pixels.
    """
    a = np.asarray(activations)
    if a.ndim != 3:
        raise ValueError("expected an (H, W, C) activation tensor")
    h, w, c = a.shape
    h_out = math.ceil(h / stride)
    w_out = math.ceil(w / stride)
    pad_top = ((h_out - 1) * stride + k - h) // 2 if k > 1 else 0
    pad_left = ((w_out - 1) * stride + k - w) // 2 if k > 1 else 0
    padded = np.zeros((h + k, w + k, c), dtype=a.dtype)
    padded[pad_top:pad_top + h, pad_left:pad_left + w] = a
    rows = np.empty((h_out * w_out, k * k * c), dtype=a.dtype)
    for oy in range(h_out):
        for ox in range(w_out):
            patch = padded[oy * stride:oy * stride + k, ox * stride:ox * stride + k]
            rows[oy * w_out + ox] = patch.reshape(-1)
    return rows
