import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imcsim import xbar
from imcsim.xbar import (CROSSBAR_SIDE, CapacityError, DimensionError,
                         QuantVector, WeightRangeError, mvm, program,
                         read_cell)


def oracle_mvm(weights, x, scale):
    """Independent saturating-quantized MVM on plain Python integers."""
    scale = Fraction(scale)
    rows = len(weights)
    cols = len(weights[0])
    out = []
    for c in range(cols):
        total = sum(weights[r][c] * x[r] for r in range(rows))
        q = Fraction(abs(total)) / scale
        # round half away from zero: floor(q + 1/2) for non-negative q
        r = (2 * q.numerator + q.denominator) // (2 * q.denominator)
        if total < 0:
            r = -r
        out.append(max(-128, min(127, r)))
    return tuple(out)


def test_program_basics():
    st8 = program([[1, -8], [7, 0]])
    assert st8.rows == 2 and st8.cols == 2
    assert st8.cells_programmed == 4
    assert st8.utilization == 4 / (256 * 256)
    assert read_cell(st8, 0, 1) == -8
    assert read_cell(st8, 1, 0) == 7
    assert read_cell(st8, 2, 2) is None           # unprogrammed
    with pytest.raises(IndexError):
        read_cell(st8, 256, 0)


def test_program_rejects_out_of_range_weights():
    with pytest.raises(WeightRangeError):
        program([[8]])
    with pytest.raises(WeightRangeError):
        program([[-9]])


def test_program_rejects_oversize_and_empty():
    with pytest.raises(CapacityError):
        program(np.zeros((257, 1), dtype=int))
    with pytest.raises(CapacityError):
        program(np.zeros((0, 4), dtype=int))
    with pytest.raises(ValueError):
        program([[1]], adc_scale=0)


def test_mvm_dimension_check():
    state = program([[1, 2], [3, 4]])
    with pytest.raises(DimensionError):
        mvm(state, QuantVector((1,)))


def test_quant_vector_range():
    with pytest.raises(ValueError):
        QuantVector((128,))
    with pytest.raises(DimensionError):
        QuantVector(tuple([0] * (CROSSBAR_SIDE + 1)))


def test_rounding_half_away_from_zero():
    # columns accumulate x * w = total; scale 2 exposes the .5 cases
    state = program([[1], [1]], adc_scale=2)
    assert mvm(state, QuantVector((1, 2))).values == (2,)     # 1.5 -> 2
    assert mvm(state, QuantVector((-1, -2))).values == (-2,)  # -1.5 -> -2
    assert mvm(state, QuantVector((2, 3))).values == (3,)     # 2.5 -> 3
    state4 = program([[1]], adc_scale=4)
    assert mvm(state4, QuantVector((1,))).values == (0,)      # 0.25 -> 0
    assert mvm(state4, QuantVector((2,))).values == (1,)      # 0.5 -> 1


def test_fractional_adc_scale():
    state = program([[3]], adc_scale=Fraction(3, 2))
    assert mvm(state, QuantVector((5,))).values == (10,)      # 15 / 1.5


def test_output_clamps_to_signed_8bit():
    state = program([[7]] * 64)
    y = mvm(state, QuantVector((127,) * 64))
    assert y.values == (127,)
    y = mvm(state, QuantVector((-128,) * 64))
    assert y.values == (-128,)


def test_mvm_matches_oracle_fixed_seed():
    rng = random.Random(20260823)
    for _ in range(300):
        rows = rng.randint(1, 32)
        cols = rng.randint(1, 32)
        w = [[rng.randint(-8, 7) for _ in range(cols)] for _ in range(rows)]
        x = [rng.randint(-128, 127) for _ in range(rows)]
        scale = Fraction(rng.randint(1, 64), rng.randint(1, 8))
        state = program(w, adc_scale=scale)
        assert mvm(state, QuantVector(tuple(x))).values == oracle_mvm(w, x, scale)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_mvm_matches_oracle_property(data):
    rows = data.draw(st.integers(1, 16))
    cols = data.draw(st.integers(1, 16))
    w = data.draw(st.lists(st.lists(st.integers(-8, 7), min_size=cols, max_size=cols),
                           min_size=rows, max_size=rows))
    x = data.draw(st.lists(st.integers(-128, 127), min_size=rows, max_size=rows))
    scale = data.draw(st.integers(1, 256))
    state = program(w, adc_scale=scale)
    assert mvm(state, QuantVector(tuple(x))).values == oracle_mvm(w, x, scale)


def test_zero_input_gives_zero_output():
    state = program(np.full((32, 8), 7))
    assert mvm(state, QuantVector((0,) * 32)).values == (0,) * 8


def test_state_weights_are_immutable():
    state = program([[1]])
    with pytest.raises(ValueError):
        state.weights[0, 0] = 3
