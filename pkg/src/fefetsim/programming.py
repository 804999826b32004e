"""Single-pulse and write-verify programming over cells and populations."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .device import (
    HARD_RESET_PULSE,
    CellBlock,
    DeviceParams,
    FeFETCell,
    Pulse,
    apply_pulse,
    hard_reset,
    read_current,
)
from .sensing import nominal_thresholds, target_levels

if TYPE_CHECKING:
    from .config import MemConfig

T_HARD_RESET = HARD_RESET_PULSE.duration
DOMAIN_AREA_M2 = 100e-18  # 10 nm x 10 nm


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class SinglePulseScheme:
    amplitude_per_level: tuple  # V; slot 0 unused
    pulse_duration: float = 100e-9

    def __post_init__(self):
        amps = self.amplitude_per_level[1:]
        if any(b < a for a, b in zip(amps, amps[1:])):
            raise ValueError("single-pulse amplitudes must be non-decreasing in level")


@dataclass(frozen=True)
class WriteVerifyScheme:
    v_set: float = 3.0
    v_soft_reset: float = -3.6
    pulse_duration: float = 100e-9
    max_soft_resets: int = 10
    max_total_pulses: int = 64
    window_frac: float = 0.4
    t_verify: float = 0.0

    def __post_init__(self):
        if not self.v_set > 0 > self.v_soft_reset:
            raise ValueError("need v_set > 0 > v_soft_reset")
        if self.max_soft_resets < 0 or self.max_total_pulses < 1:
            raise ValueError("pulse caps must be non-negative")
        if not 0 < self.window_frac < 1:
            raise ValueError("window_frac must lie in (0, 1)")


@dataclass(frozen=True)
class EnergyModel:
    """Per-pulse gate charging energy ``drive_factor * C_cell * V**2``."""

    gate_cap_factor: float = 1.73  # FeFET gate vs. plain CMOS gate
    c_ox: float = 0.02  # F/m^2
    drive_factor: float = 2.0

    def cell_capacitance(self, n_domains: int) -> float:
        return self.gate_cap_factor * self.c_ox * n_domains * DOMAIN_AREA_M2

    def pulse_energy(self, n_domains: int, amplitude) -> np.ndarray:
        return self.drive_factor * self.cell_capacitance(n_domains) * np.square(amplitude)


@dataclass
class ProgramResult:
    success: bool
    final_current: float
    n_set_pulses: int
    n_soft_resets: int
    latency: float
    energy: float


def set_latency(n_pulses, pulse_duration: float, t_verify: float = 0.0):
    """Hard reset followed by ``n_pulses`` programming pulses (each with a verify slot)."""
    return T_HARD_RESET + np.asarray(n_pulses) * (pulse_duration + t_verify)


def expected_set_latency(mean_pulses: float, scheme) -> float:
    t_verify = getattr(scheme, "t_verify", 0.0)
    return float(set_latency(mean_pulses, scheme.pulse_duration, t_verify))


def calibrate_single_pulse(params: DeviceParams, targets, pulse_duration: float = 100e-9,
                           v_max: float = 6.0, tol: float = 1e-6) -> SinglePulseScheme:
    """Bisect, per level, the amplitude whose nominal-cell switched fraction hits the target."""
    targets = np.asarray(targets, dtype=float)
    if np.any(np.diff(targets) <= 0):
        raise CalibrationError("targets must be strictly increasing")
    amps = [0.0]
    for j, target in enumerate(targets[1:], start=1):
        f = (target - params.i_low) / (params.i_high - params.i_low)
        if f <= 0:
            amps.append(0.0)
            continue
        if not params.expected_fraction(v_max, pulse_duration) >= f:
            raise CalibrationError(f"level {j} unreachable within (0, {v_max}] V")
        lo, hi = 0.0, v_max
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if params.expected_fraction(mid, pulse_duration) < f:
                lo = mid
            else:
                hi = mid
        amps.append(0.5 * (lo + hi))
    return SinglePulseScheme(tuple(amps), pulse_duration)


def write_windows(thresholds, targets, window_frac: float, i_high: float):
    """Per-level verify windows ``(lo, hi)``; level 0 is unbounded below."""
    t = np.asarray(thresholds, dtype=float)
    L = np.asarray(targets, dtype=float)
    lower = np.concatenate([[-np.inf], t])
    upper = np.append(t, i_high)
    lo = L - window_frac * (L - np.where(np.isfinite(lower), lower, L))
    hi = L + window_frac * (upper - L)
    lo[0] = -np.inf
    return lo, hi


def _check_level(level: int, n_levels: int):
    if not 0 <= level < n_levels:
        raise ValueError(f"level {level} out of range [0, {n_levels - 1}]")


def program_single_pulse(cell: FeFETCell, level: int, scheme: SinglePulseScheme,
                         energy: EnergyModel = EnergyModel()) -> ProgramResult:
    _check_level(level, len(scheme.amplitude_per_level))
    n = cell.params.n_domains
    hard_reset(cell)
    e = float(energy.pulse_energy(n, HARD_RESET_PULSE.amplitude))
    n_set = 0
    if level > 0:
        amp = scheme.amplitude_per_level[level]
        apply_pulse(cell, Pulse(amp, scheme.pulse_duration))
        e += float(energy.pulse_energy(n, amp))
        n_set = 1
    return ProgramResult(True, read_current(cell), n_set, 0,
                         float(set_latency(n_set, scheme.pulse_duration)), e)


def program_write_verify(cell: FeFETCell, level: int, scheme: WriteVerifyScheme,
                         thresholds, energy: EnergyModel = EnergyModel()) -> ProgramResult:
    """Reference (one cell at a time) write-verify loop."""
    p = cell.params
    thresholds = np.asarray(thresholds, dtype=float)
    _check_level(level, len(thresholds) + 1)
    targets = _targets_from_thresholds(thresholds, p.i_low, p.i_high)
    lo, hi = write_windows(thresholds, targets, scheme.window_frac, p.i_high)
    lo, hi = lo[level], hi[level]

    hard_reset(cell)
    e = float(energy.pulse_energy(p.n_domains, HARD_RESET_PULSE.amplitude))
    e_set = float(energy.pulse_energy(p.n_domains, scheme.v_set))
    e_reset = float(energy.pulse_energy(p.n_domains, scheme.v_soft_reset))
    n_set = n_reset = 0
    success = level == 0
    while not success:
        current = read_current(cell)
        if lo <= current <= hi:
            success = True
            break
        if n_reset >= scheme.max_soft_resets or n_set + n_reset >= scheme.max_total_pulses:
            break
        if current < lo:
            apply_pulse(cell, Pulse(scheme.v_set, scheme.pulse_duration))
            n_set += 1
            e += e_set
        else:
            apply_pulse(cell, Pulse(scheme.v_soft_reset, scheme.pulse_duration))
            n_reset += 1
            e += e_reset
    lat = float(set_latency(n_set + n_reset, scheme.pulse_duration, scheme.t_verify))
    return ProgramResult(success, read_current(cell), n_set, n_reset, lat, e)


def _targets_from_thresholds(thresholds, i_low, i_high):
    t = np.append(thresholds, i_high)
    return np.concatenate([[i_low], np.sqrt(t[:-1] * t[1:])])


# --- populations -----------------------------------------------------------


@dataclass
class CellOutcome:
    """Column arrays over programmed cells, in input order."""

    index: np.ndarray
    level: np.ndarray
    current: np.ndarray
    success: np.ndarray
    n_set: np.ndarray
    n_reset: np.ndarray
    latency: np.ndarray
    energy: np.ndarray

    @classmethod
    def concat(cls, parts):
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in cls.__dataclass_fields__))


def _read_rows(block: CellBlock, rows: np.ndarray) -> np.ndarray:
    p = block.params
    return p.i_low + block.state[rows].sum(axis=1) / p.n_domains * (p.i_high - p.i_low)


def _single_pulse_block(block: CellBlock, levels, scheme: SinglePulseScheme, energy):
    n = block.params.n_domains
    block.hard_reset()
    e = np.full(len(block), float(energy.pulse_energy(n, HARD_RESET_PULSE.amplitude)))
    for j in np.unique(levels):
        if j == 0:
            continue
        rows = np.nonzero(levels == j)[0]
        amp = scheme.amplitude_per_level[j]
        block.apply_pulse(Pulse(amp, scheme.pulse_duration), rows)
        e[rows] += energy.pulse_energy(n, amp)
    n_set = (levels > 0).astype(np.int64)
    return (np.ones(len(block), dtype=bool), n_set, np.zeros_like(n_set),
            set_latency(n_set, scheme.pulse_duration), e)


def _write_verify_block(block: CellBlock, levels, scheme: WriteVerifyScheme, lo_tab, hi_tab,
                        energy):
    c = len(block)
    n = block.params.n_domains
    lo, hi = lo_tab[levels], hi_tab[levels]
    block.hard_reset()
    n_set = np.zeros(c, dtype=np.int64)
    n_reset = np.zeros(c, dtype=np.int64)
    success = levels == 0
    active = np.nonzero(~success)[0]
    set_pulse = Pulse(scheme.v_set, scheme.pulse_duration)
    reset_pulse = Pulse(scheme.v_soft_reset, scheme.pulse_duration)
    while len(active):
        current = _read_rows(block, active)
        inside = (current >= lo[active]) & (current <= hi[active])
        success[active[inside]] = True
        exhausted = (n_reset[active] >= scheme.max_soft_resets) | (
            n_set[active] + n_reset[active] >= scheme.max_total_pulses)
        keep = ~inside & ~exhausted
        below = active[keep & (current < lo[active])]
        above = active[keep & (current > hi[active])]
        block.apply_pulse(set_pulse, below)
        block.apply_pulse(reset_pulse, above)
        n_set[below] += 1
        n_reset[above] += 1
        active = active[keep]
    e = (energy.pulse_energy(n, HARD_RESET_PULSE.amplitude)
         + n_set * energy.pulse_energy(n, scheme.v_set)
         + n_reset * energy.pulse_energy(n, scheme.v_soft_reset))
    lat = set_latency(n_set + n_reset, scheme.pulse_duration, scheme.t_verify)
    return success, n_set, n_reset, lat, e


def _block_ranges(n_cells: int, n_domains: int, max_elems: int = 1 << 21):
    step = max(1, min(n_cells, max_elems // max(n_domains, 1)))
    return [(s, min(s + step, n_cells)) for s in range(0, n_cells, step)]


def program_cells(mem: "MemConfig", levels, indices, master_seed: int,
                  threads: int = 1) -> CellOutcome:
    """Create, hard-reset and program one fresh cell per entry of ``levels``.

    Cell ``indices[i]`` keys all randomness of cell ``i``; output is
    independent of ``threads`` and of how cells are blocked.
    """
    levels = np.asarray(levels, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    if levels.shape != indices.shape:
        raise ValueError("levels and indices must align")
    if len(levels) and (levels.min() < 0 or levels.max() >= mem.adc.n_levels):
        raise ValueError("level out of range")
    params, scheme, energy = mem.device, mem.scheme, mem.energy
    if isinstance(scheme, WriteVerifyScheme):
        lo_tab, hi_tab = write_windows(nominal_thresholds(mem.adc), target_levels(mem.adc),
                                       scheme.window_frac, mem.adc.i_high)

    def work(rng_slice):
        a, b = rng_slice
        block = CellBlock.create(params, master_seed, indices[a:b])
        lv = levels[a:b]
        if isinstance(scheme, WriteVerifyScheme):
            out = _write_verify_block(block, lv, scheme, lo_tab, hi_tab, energy)
        else:
            out = _single_pulse_block(block, lv, scheme, energy)
        return CellOutcome(indices[a:b], lv, block.read_current(), *out)

    ranges = _block_ranges(len(levels), params.n_domains)
    if not ranges:
        empty = np.zeros(0)
        return CellOutcome(indices, levels, empty, empty.astype(bool), levels, levels, empty,
                           empty)
    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, ranges))
    else:
        parts = [work(r) for r in ranges]
    return CellOutcome.concat(parts)


N_HIST_BINS = 64


def histogram_edges(i_low: float, i_high: float) -> np.ndarray:
    return np.geomspace(i_low / 2, 2 * i_high, N_HIST_BINS + 1)


@dataclass
class LevelStats:
    level: int
    target: float
    n_cells: int
    counts: np.ndarray
    mean_current: float
    std_current: float
    mean_set_pulses: float
    max_set_pulses: int
    mean_soft_resets: float
    max_soft_resets: int
    failure_rate: float
    mean_latency: float
    mean_energy: float


@dataclass
class PopulationStats:
    levels: list
    bin_edges: np.ndarray
    scheme: str
    n_domains: int
    bits_per_cell: int
    # averages over uniformly distributed stored levels
    mean_pulses: float = field(init=False)
    mean_latency: float = field(init=False)
    mean_energy: float = field(init=False)

    def __post_init__(self):
        self.mean_pulses = float(np.mean(
            [s.mean_set_pulses + s.mean_soft_resets for s in self.levels]))
        self.mean_latency = float(np.mean([s.mean_latency for s in self.levels]))
        self.mean_energy = float(np.mean([s.mean_energy for s in self.levels]))

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "n_domains": self.n_domains,
            "bits_per_cell": self.bits_per_cell,
            "mean_pulses": self.mean_pulses,
            "mean_latency_s": self.mean_latency,
            "mean_energy_j": self.mean_energy,
            "bin_edges_ua": self.bin_edges.tolist(),
            "levels": [
                {
                    "level": s.level,
                    "target_ua": s.target,
                    "n_cells": s.n_cells,
                    "histogram": s.counts.tolist(),
                    "mean_current_ua": s.mean_current,
                    "std_current_ua": s.std_current,
                    "mean_set_pulses": s.mean_set_pulses,
                    "max_set_pulses": s.max_set_pulses,
                    "mean_soft_resets": s.mean_soft_resets,
                    "max_soft_resets": s.max_soft_resets,
                    "failure_rate": s.failure_rate,
                    "mean_latency_s": s.mean_latency,
                    "mean_energy_j": s.mean_energy,
                }
                for s in self.levels
            ],
        }


def population_stats(mem: "MemConfig", n_cells: int = 1500, master_seed: int = 0,
                     threads: int = 1) -> PopulationStats:
    """Program ``n_cells`` fresh cells per level and summarize."""
    m = mem.adc.n_levels
    levels = np.repeat(np.arange(m), n_cells)
    out = program_cells(mem, levels, np.arange(m * n_cells), master_seed, threads)
    edges = histogram_edges(mem.device.i_low, mem.device.i_high)
    targets = target_levels(mem.adc)
    stats = []
    for j in range(m):
        sl = slice(j * n_cells, (j + 1) * n_cells)
        cur = out.current[sl]
        stats.append(LevelStats(
            level=j,
            target=float(targets[j]),
            n_cells=n_cells,
            counts=np.histogram(cur, edges)[0],
            mean_current=float(cur.mean()),
            std_current=float(cur.std()),
            mean_set_pulses=float(out.n_set[sl].mean()),
            max_set_pulses=int(out.n_set[sl].max()),
            mean_soft_resets=float(out.n_reset[sl].mean()),
            max_soft_resets=int(out.n_reset[sl].max()),
            failure_rate=float(1.0 - out.success[sl].mean()),
            mean_latency=float(out.latency[sl].mean()),
            mean_energy=float(out.energy[sl].mean()),
        ))
    return PopulationStats(stats, edges, mem.scheme_name, mem.device.n_domains,
                           mem.adc.bits_per_cell)
