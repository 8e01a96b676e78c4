"""Acceptance gate: the ten headline checks, one test (and one printed
pass/fail line) each.  Expected values are frozen from independent hand
calculations and closed-form oracles; tolerances are stated inline."""

import math
import random
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from imcsim import energy as en
from imcsim import nnspec, tilepack, timing, xbar
from imcsim.mapping import (JobPlan, conv_weight_matrix, im2col_patches,
                            map_depthwise_cjob, map_depthwise_dense)
from imcsim.nnspec import LayerKind, LayerSpec, TensorShape
from imcsim.timing import (ClusterConfig, DwConfig, ExecutionModel, Strategy,
                           bottleneck_schedule, dw_layer_cycles,
                           e2e_schedule, ima_layer_time, roofline)

DATA = Path(timing.__file__).parent / "data"


def _report(criterion: str, detail: str):
    print(f"PASS {criterion}: {detail}")


def _plan(rows, cols, n):
    return JobPlan("p", n, rows, cols, rows, cols, rows * cols, rows * cols)


def test_criterion_01_compute_roof_peak():
    """Quadratic compute roof peaks at ~1.008e12 ops/s at intensity 256."""
    pts = roofline(ClusterConfig(), [1.0])
    peak = pts[0].roof
    expected = 2 * 256 * 256 / 130e-9
    assert pts[0].intensity == 256
    assert peak == pytest.approx(expected, rel=1e-12)
    assert peak == pytest.approx(1.008246e12, rel=1e-6)
    _report("criterion 1", f"compute roof {peak:.6e} ops/s at intensity 256")


def test_criterion_02_958_gops_peak():
    """Full-utilization 1000-job pipelined layer at 250 MHz / 128-bit reaches
    ~958 GOPS (within 0.1%)."""
    cfg = ClusterConfig(f_clk=250e6, bus_width=128)
    plan = _plan(256, 256, 1000)
    gops = ima_layer_time(plan, cfg).gops
    assert gops == pytest.approx(958.0, rel=1e-3)
    _report("criterion 2", f"pipelined peak {gops:.2f} GOPS at 250 MHz/128-bit")


def test_criterion_03_roofline_boundedness_cases():
    """Full-utilization boundedness matches the four quoted bus/clock cases."""
    cases = [(32, 500e6, True), (64, 500e6, False),
             (64, 250e6, True), (128, 250e6, False)]
    for bus, f, memory_bound in cases:
        p = roofline(ClusterConfig(f_clk=f, bus_width=bus), [1.0])[0]
        assert p.memory_bound == memory_bound, (bus, f)
    _report("criterion 3", "32b/500MHz mem, 64b/500MHz comp, "
                           "64b/250MHz mem, 128b/250MHz comp")


def test_criterion_04_pipeline_and_roofline_bounds_random():
    """10,000 random square plans/configs: pipelined <= sequential cycles and
    achieved GOPS <= roofline attainable at the plan's intensity."""
    rng = random.Random(0xACC4)
    buses = (32, 64, 128, 256, 512)
    clocks = (50e6, 100e6, 250e6, 500e6, 1e9)
    for i in range(10_000):
        side = rng.randint(1, 256)
        n = rng.randint(1, 4000)
        cfg = ClusterConfig(f_clk=rng.choice(clocks), bus_width=rng.choice(buses))
        plan = _plan(side, side, n)
        pipe = ima_layer_time(plan, cfg)
        seq = ima_layer_time(plan, cfg, ExecutionModel.SEQUENTIAL)
        assert pipe.breakdown.total <= seq.breakdown.total, (side, n, cfg)
        attainable = min(2 * side * side / cfg.t_mvm,
                         cfg.bus_bytes * cfg.f_clk * side)
        assert pipe.gops * 1e9 <= attainable * (1 + 1e-12), (side, n, cfg)
        assert seq.gops * 1e9 <= attainable * (1 + 1e-12), (side, n, cfg)
    _report("criterion 4", "10000 random plans: pipelined <= sequential, "
                           "GOPS <= roofline attainable")


def test_criterion_05_mobilenet_tile_and_pack():
    """MobileNetV2 dense weights pack into 34 +- 2 crossbars; trailing bins
    absorb the waste (min utilization < 84%); geometry is sound."""
    net = nnspec.load_bundled_network("mobilenet_v2")
    packing = tilepack.pack_network(net)
    n = packing.n_ima_required
    assert 32 <= n <= 36
    utils = packing.per_bin_utilization
    assert min(utils) < 0.84
    full = sum(1 for u in utils if u == 1.0)
    assert full >= 0.6 * n           # waste concentrates in the tail bins
    for b in packing.bins:
        rects = [p.rect for p in b.placements]
        for r in rects:
            assert 0 <= r.x and 0 <= r.y
            assert r.x + r.w <= b.size and r.y + r.h <= b.size
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                assert not rects[i].overlaps(rects[j])
    _report("criterion 5", f"{n} bins, {full} at 100% utilization, "
                           f"min utilization {min(utils):.1%}")


def test_criterion_06_depthwise_mapping_formulas():
    """N_xbar = K^2*C*C_job and jobs_per_pixel = C/C_job hold exactly; the
    C_job = C boundary equals the dense-expanded mapping."""
    rng = random.Random(0xD1)
    checked = 0
    shape_cache = {}
    for _ in range(2000):
        k = rng.choice([1, 3, 5])
        c = rng.randint(1, 256)
        divisors = [d for d in range(1, c + 1) if c % d == 0 and k * k * d <= 256]
        c_job = rng.choice(divisors)
        layer = LayerSpec("dw", LayerKind.DEPTHWISE, k, 1, c, c)
        shape = shape_cache.setdefault(c, TensorShape(8, 8, c))
        m, plan = map_depthwise_cjob(layer, shape, c_job)
        assert m.n_xbar_cells == k * k * c * c_job
        assert m.jobs_per_pixel == c // c_job
        assert plan.n_jobs == 64 * (c // c_job)
        if c_job == c:
            assert m.n_xbar_cells == map_depthwise_dense(layer)[0]
        checked += 1
    assert checked == 2000
    _report("criterion 6", "N_xbar and jobs_per_pixel formulas exact on "
                           "2000 random (K, C, C_job); dense boundary equal")


def test_criterion_07_dw_accelerator_model():
    """Zero-overhead 28x28/16-ch trace = 3397 cycles; memory savings 65 +- 2%;
    calibrated average MAC/cycle in [28, 31]; never above the 36 peak."""
    layer = LayerSpec("dw", LayerKind.DEPTHWISE, 3, 1, 16, 16)
    shape = TensorShape(28, 28, 16)
    zero = replace(ClusterConfig(), dw=DwConfig(edge_clear_cycles=0))
    t = dw_layer_cycles(layer, shape, zero)
    # closed-form trace oracle: weight preload + 28 columns of
    # (window preload + 28 rows x 4-cycle inner loop)
    assert t.cycles == 9 + 28 * (9 + 28 * 4) == 3397
    savings = dw_layer_cycles(layer, shape, ClusterConfig()).memory_savings
    assert abs(savings - 0.65) <= 0.02
    cal = replace(ClusterConfig(), dw=DwConfig.calibrated())
    rates = [dw_layer_cycles(layer, TensorShape(h, h, 16), cal).mac_per_cycle
             for h in (112, 56, 28, 14, 7)]
    avg = sum(rates) / len(rates)
    assert 28 <= avg <= 31
    rng = random.Random(7)
    for _ in range(500):
        c = rng.randint(1, 512)
        l = LayerSpec("d", LayerKind.DEPTHWISE, 3, 1, c, c)
        cfg = replace(ClusterConfig(),
                      dw=DwConfig(edge_clear_cycles=rng.randint(0, 16)))
        r = dw_layer_cycles(l, TensorShape(rng.randint(3, 224),
                                           rng.randint(3, 224), c), cfg)
        assert r.mac_per_cycle <= 36
    _report("criterion 7", f"3397-cycle trace exact, savings {savings:.1%}, "
                           f"calibrated avg {avg:.2f} MAC/cycle, peak bound holds")


def _oracle_mvm(weights, x, scale):
    scale = Fraction(scale)
    out = []
    for c in range(len(weights[0])):
        total = sum(weights[r][c] * x[r] for r in range(len(weights)))
        q = Fraction(abs(total)) / scale
        r = (2 * q.numerator + q.denominator) // (2 * q.denominator)
        if total < 0:
            r = -r
        out.append(max(-128, min(127, r)))
    return tuple(out)


def test_criterion_08_functional_crossbar_oracle():
    """mvm equals a brute-force saturating-quantized integer oracle on 10,000
    random instances up to 32x32; im2col-lowered convolution equals direct
    integer convolution on random small layers."""
    rng = random.Random(0x0C8)
    for _ in range(10_000):
        rows = rng.randint(1, 32)
        cols = rng.randint(1, 32)
        w = [[rng.randint(-8, 7) for _ in range(cols)] for _ in range(rows)]
        x = [rng.randint(-128, 127) for _ in range(rows)]
        scale = Fraction(rng.randint(1, 128), rng.randint(1, 8))
        state = xbar.program(w, adc_scale=scale)
        got = xbar.mvm(state, xbar.QuantVector(tuple(x))).values
        assert got == _oracle_mvm(w, x, scale)

    def direct_conv(acts, kernel, stride):
        h, w, cin = acts.shape
        k = kernel.shape[0]
        cout = kernel.shape[3]
        h_out, w_out = -(-h // stride), -(-w // stride)
        pad_top = ((h_out - 1) * stride + k - h) // 2 if k > 1 else 0
        pad_left = ((w_out - 1) * stride + k - w) // 2 if k > 1 else 0
        padded = np.zeros((h + k, w + k, cin), dtype=np.int64)
        padded[pad_top:pad_top + h, pad_left:pad_left + w] = acts
        out = np.zeros((h_out, w_out, cout), dtype=np.int64)
        for oy in range(h_out):
            for ox in range(w_out):
                for ky in range(k):
                    for kx in range(k):
                        px = padded[oy * stride + ky, ox * stride + kx]
                        out[oy, ox] += px @ kernel[ky, kx].astype(np.int64)
        return out

    np_rng = np.random.default_rng(0x0C8)
    for _ in range(50):
        k = int(np_rng.choice([1, 3, 5]))
        stride = int(np_rng.choice([1, 2]))
        h = int(np_rng.integers(k, 12))
        w_ = int(np_rng.integers(k, 12))
        cin = int(np_rng.integers(1, 5))
        cout = int(np_rng.integers(1, 5))
        acts = np_rng.integers(-128, 128, size=(h, w_, cin), dtype=np.int64)
        kern = np_rng.integers(-8, 8, size=(k, k, cin, cout), dtype=np.int64)
        lowered = im2col_patches(acts, k, stride) @ conv_weight_matrix(kern)
        direct = direct_conv(acts, kern, stride)
        assert np.array_equal(lowered.reshape(direct.shape), direct)
    _report("criterion 8", "10000 mvm instances and 50 convolution lowerings "
                           "match the integer oracles exactly")


def test_criterion_09_end_to_end_calibration():
    """Shipped calibrated profile: MobileNetV2 within +-20% of 10.1 ms / 482 uJ."""
    net = nnspec.load_bundled_network("mobilenet_v2")
    cfg = timing.load_cluster_config(DATA / "cluster_default.yaml")
    profile = en.load_power_profile(DATA / "power_calibrated.yaml")
    tl = e2e_schedule(net, cfg)
    rep = en.timeline_energy(tl, profile)
    ms = tl.total_seconds * 1e3
    uj = rep.total_joules * 1e6
    assert abs(ms - 10.1) / 10.1 <= 0.20
    assert abs(uj - 482.0) / 482.0 <= 0.20
    _report("criterion 9", f"end-to-end {ms:.2f} ms / {uj:.1f} uJ "
                           "(targets 10.1 ms / 482 uJ, +-20%)")


def test_criterion_10_bottleneck_strategy_ordering():
    """Strategy ordering on the bundled bottleneck: ima_dw strictly fastest,
    all-cores strictly slowest."""
    net = nnspec.load_bundled_network("bottleneck")
    cfg = timing.load_cluster_config(DATA / "cluster_default.yaml")
    t = {"cores": bottleneck_schedule(net, Strategy.CORES, cfg).total_seconds,
         "ima_cjob8": bottleneck_schedule(net, Strategy.IMA_CJOB, cfg, c_job=8).total_seconds,
         "ima_cjob16": bottleneck_schedule(net, Strategy.IMA_CJOB, cfg, c_job=16).total_seconds,
         "hybrid": bottleneck_schedule(net, Strategy.HYBRID, cfg).total_seconds,
         "ima_dw": bottleneck_schedule(net, Strategy.IMA_DW, cfg).total_seconds}
    others = [v for k, v in t.items() if k not in ("ima_dw", "cores")]
    assert t["ima_dw"] < min(others)
    assert t["cores"] > max(others)
    order = sorted(t, key=t.get)
    _report("criterion 10", "latency order " + " < ".join(order))
