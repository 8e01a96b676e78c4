"""Bit-exact golden model of the analog crossbar matrix-vector multiply.

Signed 4-bit weights times signed 8-bit inputs; the column ADCs divide the
integrated dot product by a configurable scale, round half away from zero and
clip to signed 8-bit.  Deterministic by design: no conductance noise, drift
or programming error is modeled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

CROSSBAR_SIDE = 256
WEIGHT_MIN, WEIGHT_MAX = -8, 7
OUT_MIN, OUT_MAX = -128, 127


class WeightRangeError(ValueError):
    """Weight outside the signed 4-bit range [-8, 7]."""


class CapacityError(ValueError):
    """Weight matrix larger than the physical crossbar."""


class DimensionError(ValueError):
    """Input vector length does not match the programmed rows."""


@dataclass(frozen=True)
class QuantVector:
    """Signed 8-bit vector, at most one crossbar side long."""
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.values) > CROSSBAR_SIDE:
            raise DimensionError(f"vector longer than {CROSSBAR_SIDE}")
        for v in self.values:
            if not (OUT_MIN <= v <= OUT_MAX):
                raise ValueError(f"value {v} outside signed 8-bit range")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class CrossbarState:
    """Programmed crossbar: origin-anchored weight block plus ADC scale."""
    weights: np.ndarray          # (256, 256) int8, zeros where unprogrammed
    programmed: np.ndarray       # (256, 256) bool
    rows: int
    cols: int
    adc_scale: Fraction

    @property
    def cells_programmed(self) -> int:
        return int(self.programmed.sum())

    @property
    def utilization(self) -> float:
        return self.cells_programmed / (CROSSBAR_SIDE * CROSSBAR_SIDE)


def program(weights, adc_scale=1) -> CrossbarState:
    """Program a weight matrix at the crossbar origin; other cells stay unprogrammed."""
    w = np.asarray(weights, dtype=np.int64)
    if w.ndim != 2:
        raise CapacityError("weight matrix must be two-dimensional")
    rows, cols = w.shape
    if rows > CROSSBAR_SIDE or cols > CROSSBAR_SIDE:
        raise CapacityError(f"matrix {rows}x{cols} exceeds {CROSSBAR_SIDE}x{CROSSBAR_SIDE}")
    if rows == 0 or cols == 0:
        raise CapacityError("weight matrix must be non-empty")
    if w.min() < WEIGHT_MIN or w.max() > WEIGHT_MAX:
        bad = w[(w < WEIGHT_MIN) | (w > WEIGHT_MAX)][0]
        raise WeightRangeError(f"weight {bad} outside [{WEIGHT_MIN}, {WEIGHT_MAX}]")
    scale = Fraction(adc_scale)
    if scale <= 0:
        raise ValueError("adc_scale must be positive")
    full = np.zeros((CROSSBAR_SIDE, CROSSBAR_SIDE), dtype=np.int8)
    full[:rows, :cols] = w
    mask = np.zeros((CROSSBAR_SIDE, CROSSBAR_SIDE), dtype=bool)
    mask[:rows, :cols] = True
    full.setflags(write=False)
    mask.setflags(write=False)
    return CrossbarState(full, mask, rows, cols, scale)


def _adc(total: int, scale: Fraction) -> int:
    # round half away from zero, exactly, then clip to signed 8-bit
    q = Fraction(abs(total)) / scale
    rounded = (q.numerator * 2 + q.denominator) // (2 * q.denominator)
    if total < 0:
        rounded = -rounded
    return max(OUT_MIN, min(OUT_MAX, rounded))


def mvm(state: CrossbarState, input: QuantVector) -> QuantVector:
    """y_i = clamp(round(sum_j A_ji * x_j / adc_scale)) over the programmed columns."""
    if len(input) != state.rows:
        raise DimensionError(
            f"input length {len(input)} != programmed rows {state.rows}")
    x = np.asarray(input.values, dtype=np.int64)
    sums = state.weights[:state.rows, :state.cols].astype(np.int64).T @ x
    return QuantVector(tuple(_adc(int(s), state.adc_scale) for s in sums))


def read_cell(state: CrossbarState, row: int, col: int):
    """Stored 4-bit value at (row, col), or None if the cell is unprogrammed."""
    if not (0 <= row < CROSSBAR_SIDE and 0 <= col < CROSSBAR_SIDE):
        raise IndexError(f"cell ({row}, {col}) outside the {CROSSBAR_SIDE}x{CROSSBAR_SIDE} array")
    if not state.programmed[row, col]:
        return None
    return int(state.weights[row, col])
