"""Analytical AND-array model: area, read timing/energy, write cost, density.

A lumped-RC stand-in for a full array simulator.  The memory is split into
``n_banks`` banks of identical ``rows x cols`` subarrays; a word of
``word_width`` bits lives in ``ceil(word_width / bits_per_cell)`` cells of one
subarray row, each sensed by a flash sense amplifier with ``2**n - 1``
comparators.  Peripheral constants are free parameters; the defaults are
calibrated against a reference 4 MB, 2-bit, 150-domain design point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .programming import DOMAIN_AREA_M2, EnergyModel, expected_set_latency

MB = 1 << 20  # bytes
OPT_TARGETS = ("read_latency", "read_energy", "read_edp", "area")
SWEEP_DIMS = tuple(2**k for k in range(7, 12))  # 128 .. 2048


class InfeasibleError(ValueError):
    pass


def cell_geometry(n_domains: int, layout_factor: float = 1.5) -> float:
    """Cell footprint in um^2."""
    if n_domains < 1:
        raise ValueError("n_domains must be >= 1")
    return n_domains * DOMAIN_AREA_M2 * 1e12 * layout_factor


@dataclass(frozen=True)
class Periphery:
    layout_factor: float = 1.5
    wire_res_ohm_per_um: float = 8.0
    wire_cap_ff_per_um: float = 0.2
    drain_cap_ff: float = 0.05  # per cell on the bitline
    wl_driver_ohm: float = 400.0
    decoder_stage_ns: float = 0.03
    sense_ns: float = 0.45
    route_ns_per_mm: float = 0.35
    v_read: float = 1.0  # wordline read bias
    v_bitline: float = 0.2
    v_dd: float = 0.9
    comparator_energy_pj: float = 0.05
    decoder_energy_pj: float = 0.02  # per stage
    route_cap_ff_per_um: float = 0.3
    row_driver_area_um2: float = 0.15
    col_mux_area_um2: float = 0.05
    comparator_area_um2: float = 1.0
    write_driver_area_um2: float = 1.0
    bank_area_um2: float = 4000.0
    energy: EnergyModel = EnergyModel()


@dataclass(frozen=True)
class WriteStats:
    """Per-cell write statistics of a programming scheme (from a population run)."""

    mean_pulses: float
    mean_cell_energy: float  # J per programmed cell
    scheme: object  # SinglePulseScheme | WriteVerifyScheme

    @classmethod
    def from_population(cls, stats, scheme) -> "WriteStats":
        return cls(stats.mean_pulses, stats.mean_energy, scheme)


@dataclass(frozen=True)
class Organization:
    subarray_rows: int
    subarray_cols: int
    n_banks: int

    def to_dict(self) -> dict:
        return {"subarray_rows": self.subarray_rows, "subarray_cols": self.subarray_cols,
                "n_banks": self.n_banks}


@dataclass(frozen=True)
class ArrayConfig:
    capacity_bits: int
    write: WriteStats
    word_width: int = 64
    bits_per_cell: int = 2
    n_domains: int = 150
    periphery: Periphery = field(default_factory=Periphery)
    organization: Organization | None = None  # None: sweep

    def __post_init__(self):
        if self.capacity_bits <= 0 or self.word_width <= 0:
            raise ValueError("capacity and word width must be positive")
        if self.capacity_bits % self.word_width:
            raise ValueError("capacity must be a multiple of the word width")
        if not 1 <= self.bits_per_cell <= 3:
            raise ValueError("bits_per_cell must be 1, 2 or 3")

    @property
    def cells_per_word(self) -> int:
        return -(-self.word_width // self.bits_per_cell)

    @property
    def n_words(self) -> int:
        return self.capacity_bits // self.word_width

    def with_organization(self, rows: int, cols: int, banks: int) -> "ArrayConfig":
        return replace(self, organization=Organization(rows, cols, banks))


@dataclass(frozen=True)
class ArrayMetrics:
    area_mm2: float
    read_latency_ns: float
    read_energy_pj_per_bit: float
    set_latency_us: float
    set_energy_pj_per_bit: float
    density_mb_per_mm2: float

    @property
    def read_edp(self) -> float:
        return self.read_latency_ns * self.read_energy_pj_per_bit

    def to_dict(self) -> dict:
        return {
            "area_mm2": self.area_mm2,
            "read_latency_ns": self.read_latency_ns,
            "read_energy_pj_per_bit": self.read_energy_pj_per_bit,
            "set_latency_us": self.set_latency_us,
            "set_energy_pj_per_bit": self.set_energy_pj_per_bit,
            "density_mb_per_mm2": self.density_mb_per_mm2,
            "read_edp_ns_pj": self.read_edp,
        }


def _layout(cfg: ArrayConfig):
    org = cfg.organization
    if org is None:
        raise InfeasibleError("evaluate_array needs a fixed organization")
    rows, cols, banks = org.subarray_rows, org.subarray_cols, org.n_banks
    if min(rows, cols, banks) < 1:
        raise InfeasibleError("organization dimensions must be positive")
    k = cfg.cells_per_word
    if cols < k:
        raise InfeasibleError(f"{cols} columns cannot hold a {k}-cell word")
    words_per_sub = rows * (cols // k)
    if words_per_sub > cfg.n_words:
        raise InfeasibleError("subarray larger than capacity")
    n_sub = -(-cfg.n_words // words_per_sub)
    if banks > n_sub:
        raise InfeasibleError("more banks than subarrays")
    per_bank = -(-n_sub // banks)
    return rows, cols, banks, k, per_bank


def evaluate_array(cfg: ArrayConfig) -> ArrayMetrics:
    rows, cols, banks, k, per_bank = _layout(cfg)
    pp = cfg.periphery
    n_sub = banks * per_bank
    n_cmp = 2**cfg.bits_per_cell - 1

    # area (um^2)
    a_cell = cell_geometry(cfg.n_domains, pp.layout_factor)
    pitch = math.sqrt(a_cell)
    a_sub = (rows * cols * a_cell + rows * pp.row_driver_area_um2 + cols * pp.col_mux_area_um2
             + k * (n_cmp * pp.comparator_area_um2 + pp.write_driver_area_um2))
    area_um2 = n_sub * a_sub + banks * pp.bank_area_um2
    area_mm2 = area_um2 * 1e-6

    # read latency: decode, wordline and bitline RC, sensing, global route
    c_gate = pp.energy.cell_capacitance(cfg.n_domains)  # F
    wl_len, bl_len = cols * pitch, rows * pitch  # um
    r_wl = pp.wire_res_ohm_per_um * wl_len
    c_wl = pp.wire_cap_ff_per_um * wl_len * 1e-15 + cols * c_gate
    r_bl = pp.wire_res_ohm_per_um * bl_len
    c_bl = (pp.wire_cap_ff_per_um * bl_len + rows * pp.drain_cap_ff) * 1e-15
    t_wl = pp.wl_driver_ohm * c_wl + 0.5 * r_wl * c_wl
    t_bl = 0.5 * r_bl * c_bl
    stages = math.log2(rows) + math.log2(n_sub)
    route_mm = 0.5 * (math.sqrt(area_mm2) + math.sqrt(area_mm2 / banks))
    read_ns = (stages * pp.decoder_stage_ns + (t_wl + t_bl) * 1e9 + pp.sense_ns
               + route_mm * pp.route_ns_per_mm)

    # read energy per word
    e_wl = c_wl * pp.v_read**2
    e_bl = k * c_bl * pp.v_bitline**2
    e_sense = k * n_cmp * pp.comparator_energy_pj * 1e-12
    e_dec = stages * pp.decoder_energy_pj * 1e-12
    e_route = cfg.word_width * pp.route_cap_ff_per_um * route_mm * 1e3 * 1e-15 * pp.v_dd**2
    read_pj_bit = (e_wl + e_bl + e_sense + e_dec + e_route) * 1e12 / cfg.word_width

    # write: per-cell pulse energy plus wordline charging at the same pulse voltages
    w = cfg.write
    v2_per_cell = w.mean_cell_energy / (pp.energy.drive_factor * c_gate)
    e_word = k * w.mean_cell_energy + c_wl * v2_per_cell + e_route
    set_pj_bit = e_word * 1e12 / cfg.word_width
    set_us = expected_set_latency(w.mean_pulses, w.scheme) * 1e6

    capacity_mb = cfg.capacity_bits / 8 / MB
    return ArrayMetrics(area_mm2, read_ns, read_pj_bit, set_us, set_pj_bit,
                        capacity_mb / area_mm2)


def _objective(m: ArrayMetrics, target: str) -> float:
    return {
        "read_latency": m.read_latency_ns,
        "read_energy": m.read_energy_pj_per_bit,
        "read_edp": m.read_edp,
        "area": m.area_mm2,
    }[target]


def sweep_organizations(cfg: ArrayConfig, dims=SWEEP_DIMS):
    """All feasible ``(Organization, ArrayMetrics)`` pairs of the sweep space."""
    out = []
    for rows in dims:
        for cols in dims:
            b = 1
            while True:
                c = cfg.with_organization(rows, cols, b)
                try:
                    out.append((c.organization, evaluate_array(c)))
                except InfeasibleError:
                    break
                b *= 2
    return out


def optimize_array(cfg: ArrayConfig, target: str = "read_edp", dims=SWEEP_DIMS):
    """Best feasible organization for ``target``; ties go to smaller area, then fewer banks."""
    if target not in OPT_TARGETS:
        raise ValueError(f"unknown optimization target {target!r}; choose from {OPT_TARGETS}")
    if not dims or any(d < 1 or d & (d - 1) for d in dims):
        raise ValueError("sweep dimensions must be powers of two")
    points = sweep_organizations(cfg, dims)
    if not points:
        raise InfeasibleError("no feasible organization")
    keys = [(_objective(m, target), m.area_mm2, o.n_banks) for o, m in points]
    best = min(range(len(points)), key=keys.__getitem__)
    return points[best]


def capacity_bits_from_mb(capacity_mb: float, word_width: int = 64) -> int:
    bits = int(round(capacity_mb * MB * 8))
    return bits - bits % word_width


def array_config_for(mem, capacity_mb: float = 4.0, n_cells: int = 1500, master_seed: int = 0,
                     word_width: int = 64, periphery: Periphery | None = None,
                     organization: Organization | None = None, threads: int = 1) -> ArrayConfig:
    """Array config whose write statistics come from a population run of ``mem``."""
    from .programming import population_stats

    stats = population_stats(mem, n_cells, master_seed, threads)
    pp = periphery or Periphery(energy=mem.energy)
    return ArrayConfig(
        capacity_bits=capacity_bits_from_mb(capacity_mb, word_width),
        write=WriteStats.from_population(stats, mem.scheme),
        word_width=word_width,
        bits_per_cell=mem.adc.bits_per_cell,
        n_domains=mem.device.n_domains,
        periphery=pp,
        organization=organization,
    )


def graph_storage_mb(n_nodes: int) -> float:
    """Dense adjacency-matrix footprint in MB."""
    return n_nodes * n_nodes / 8 / MB

