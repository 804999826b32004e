import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fefetsim.config import MemConfig
from fefetsim.device import CellBlock, DeviceParams, Pulse, new_cell
from fefetsim.programming import (
    CalibrationError,
    EnergyModel,
    SinglePulseScheme,
    WriteVerifyScheme,
    calibrate_single_pulse,
    expected_set_latency,
    histogram_edges,
    population_stats,
    program_cells,
    program_single_pulse,
    program_write_verify,
    set_latency,
    write_windows,
)
from fefetsim.sensing import AdcConfig, nominal_thresholds, target_levels


def nls_fraction(p, amp, dur):
    tau = p.tau0 * math.exp(p.alpha * p.vc_median / abs(amp))
    return 1 - math.exp(-((dur / tau) ** p.beta))


@pytest.mark.parametrize("bpc", [1, 2, 3])
def test_calibration_hits_targets(bpc):
    p = DeviceParams()
    adc = AdcConfig(bits_per_cell=bpc)
    L = target_levels(adc)
    sch = calibrate_single_pulse(p.nominal(), L)
    assert sch.amplitude_per_level[0] == 0.0
    assert np.all(np.diff(sch.amplitude_per_level[1:]) > 0)
    for j in range(1, len(L)):
        f = (L[j] - p.i_low) / (p.i_high - p.i_low)
        assert nls_fraction(p, sch.amplitude_per_level[j], sch.pulse_duration) == \
            pytest.approx(f, abs=1e-3)


def test_calibration_errors():
    p = DeviceParams().nominal()
    with pytest.raises(CalibrationError, match="level 3"):
        calibrate_single_pulse(p, target_levels(AdcConfig()), v_max=4.5)
    with pytest.raises(CalibrationError):
        calibrate_single_pulse(p, [1.0, 5.0, 4.0])


def test_single_pulse_scheme_rejects_decreasing():
    with pytest.raises(ValueError):
        SinglePulseScheme((0.0, 3.0, 2.0))


def test_verify_scheme_validation():
    for bad in ({"v_set": -1.0}, {"v_soft_reset": 1.0}, {"window_frac": 1.0},
                {"max_soft_resets": -1}):
        with pytest.raises(ValueError):
            WriteVerifyScheme(**bad)


def test_write_windows_by_hand():
    t = np.array([2.0, 4.0, 8.0])
    L = np.array([1.0, math.sqrt(8), math.sqrt(32), math.sqrt(128)])
    lo, hi = write_windows(t, L, 0.4, 16.0)
    assert lo[0] == -np.inf and hi[0] == pytest.approx(1 + 0.4 * 1.0)
    assert lo[2] == pytest.approx(L[2] - 0.4 * (L[2] - 4.0))
    assert hi[2] == pytest.approx(L[2] + 0.4 * (8.0 - L[2]))
    assert hi[3] == pytest.approx(L[3] + 0.4 * (16.0 - L[3]))


def test_single_pulse_level_zero_and_latency():
    mem = MemConfig(scheme_name="single")
    c = new_cell(mem.device, 0, 0)
    r = program_single_pulse(c, 0, mem.scheme)
    assert r.n_set_pulses == 0 and r.final_current == pytest.approx(1.0, abs=0.2)
    assert r.latency == pytest.approx(1e-6)
    r = program_single_pulse(new_cell(mem.device, 0, 1), 2, mem.scheme)
    assert r.success and r.n_set_pulses == 1
    assert r.latency == pytest.approx(1e-6 + mem.scheme.pulse_duration)
    with pytest.raises(ValueError):
        program_single_pulse(c, 4, mem.scheme)


def _overlap_mass(n_domains):
    mem = MemConfig(scheme_name="single").with_(n_domains)
    t = nominal_thresholds(mem.adc)
    m = mem.adc.n_levels
    out = program_cells(mem, np.repeat(np.arange(m), 1500), np.arange(1500 * m), 0)
    lv, cur = out.level, out.current
    lower = np.concatenate([[-np.inf], t])[lv]
    upper = np.append(t, np.inf)[lv]
    return np.mean((cur <= lower) | (cur > upper))


def test_single_pulse_overlap_shrinks_with_cell_size():
    small, large = _overlap_mass(50), _overlap_mass(200)
    assert small > 0
    assert large < small


def test_write_verify_level_zero():
    mem = MemConfig()
    r = program_write_verify(new_cell(mem.device, 0, 0), 0, mem.verify,
                             nominal_thresholds(mem.adc))
    assert r.success and r.n_set_pulses == r.n_soft_resets == 0
    assert r.final_current == pytest.approx(1.0, abs=0.2)
    assert r.latency == pytest.approx(1e-6)


@given(st.integers(0, 2**32), st.integers(0, 3), st.sampled_from([20, 50, 150]))
def test_write_verify_postconditions(seed, level, n):
    mem = MemConfig().with_(n)
    sch = replace(mem.verify, t_verify=5e-9)
    t = nominal_thresholds(mem.adc)
    lo, hi = write_windows(t, target_levels(mem.adc), sch.window_frac, mem.adc.i_high)
    r = program_write_verify(new_cell(mem.device, seed, 0), level, sch, t)
    if r.success:
        assert lo[level] <= r.final_current <= hi[level]
    assert r.n_soft_resets <= sch.max_soft_resets
    assert r.n_set_pulses + r.n_soft_resets <= sch.max_total_pulses
    assert r.latency == pytest.approx(
        1e-6 + (r.n_set_pulses + r.n_soft_resets) * (sch.pulse_duration + sch.t_verify))
    e = EnergyModel()
    assert r.energy == pytest.approx(
        e.pulse_energy(n, -4.0) + r.n_set_pulses * e.pulse_energy(n, sch.v_set)
        + r.n_soft_resets * e.pulse_energy(n, sch.v_soft_reset))


def test_energy_model_formula():
    e = EnergyModel()
    c = 1.73 * 0.02 * 150 * 100e-18
    assert e.cell_capacitance(150) == pytest.approx(c)
    assert e.pulse_energy(150, 3.0) == pytest.approx(2 * c * 9)


@pytest.mark.parametrize("scheme", ["single", "verify"])
@pytest.mark.parametrize("n", [20, 150])
def test_batch_engine_matches_scalar_reference(scheme, n):
    mem = MemConfig(scheme_name=scheme).with_(n)
    levels = np.arange(120) % 4
    idx = np.arange(120) * 7 + 3
    out = program_cells(mem, levels, idx, 13)
    t = nominal_thresholds(mem.adc)
    for i in range(len(levels)):
        cell = new_cell(mem.device, 13, int(idx[i]))
        if scheme == "verify":
            r = program_write_verify(cell, int(levels[i]), mem.verify, t, mem.energy)
        else:
            r = program_single_pulse(cell, int(levels[i]), mem.scheme, mem.energy)
        assert (r.success, r.n_set_pulses, r.n_soft_resets) == \
            (out.success[i], out.n_set[i], out.n_reset[i])
        assert r.final_current == out.current[i]
        assert r.latency == pytest.approx(out.latency[i], rel=1e-12)
        assert r.energy == pytest.approx(out.energy[i], rel=1e-12)


def test_program_cells_independent_of_blocking_and_threads(monkeypatch):
    mem = MemConfig().with_(60)
    levels = np.arange(3000) % 4
    idx = np.arange(3000)
    ref = program_cells(mem, levels, idx, 5)
    import fefetsim.programming as prog

    real = prog._block_ranges
    monkeypatch.setattr(prog, "_block_ranges", lambda n, d, max_elems=0: real(n, d, 7 * d))
    for threads in (1, 4):
        out = program_cells(mem, levels, idx, 5, threads=threads)
        for f in ("current", "n_set", "n_reset", "success", "energy"):
            assert np.array_equal(getattr(out, f), getattr(ref, f))


def test_program_cells_rejects_bad_levels():
    with pytest.raises(ValueError):
        program_cells(MemConfig(), [0, 4], [0, 1], 0)
    with pytest.raises(ValueError):
        program_cells(MemConfig(), [0, 1], [0], 0)
    assert len(program_cells(MemConfig(), [], [], 0).current) == 0


def test_zero_variance_population_lands_in_window():
    mem = MemConfig().zero_variance()
    stats = population_stats(mem, 200, 0)
    assert all(s.failure_rate == 0 for s in stats.levels)
    for s in stats.levels:
        assert np.count_nonzero(s.counts) == 1


def test_population_stats_accounting():
    mem = MemConfig()
    stats = population_stats(mem, 400, 3)
    assert len(stats.levels) == 4
    edges = histogram_edges(1.0, 16.0)
    assert len(edges) == 65 and edges[0] == 0.5 and edges[-1] == pytest.approx(32.0)
    centers = np.sqrt(edges[1:] * edges[:-1])
    outside = (centers < 1.0 * 0.97) | (centers > 16.0 * 1.03)
    for s in stats.levels:
        assert s.counts.sum() == 400
        assert s.counts[outside].sum() == 0
    assert stats.mean_latency == pytest.approx(
        expected_set_latency(stats.mean_pulses, mem.verify), rel=1e-12)
    assert set_latency(8, 100e-9) == pytest.approx(1.8e-6)
    d = stats.to_dict()
    assert len(d["levels"]) == 4 and len(d["bin_edges_ua"]) == 65


def test_population_stats_deterministic():
    a = population_stats(MemConfig().with_(50), 300, 9).to_dict()
    b = population_stats(MemConfig().with_(50), 300, 9, threads=3).to_dict()
    assert a == b


def test_soft_reset_is_partial():
    mem = MemConfig()
    b = CellBlock.create(mem.device, 1, np.arange(10_000))
    b.hard_reset()
    for _ in range(8):
        b.apply_pulse(Pulse(mem.verify.v_set, mem.verify.pulse_duration))
    before = b.n_set().mean()
    b.apply_pulse(Pulse(mem.verify.v_soft_reset, mem.verify.pulse_duration))
    assert b.n_set().mean() / before > 0.5
    assert b.n_set().mean() < before
