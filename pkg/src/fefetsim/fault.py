"""Device + ADC fault characterization: confusion matrices and shmoo sweeps."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .config import MemConfig
from .programming import program_cells
from .sensing import sense_cells, threshold_set

SHMOO_HEADER = ["n_domains", "bpc", "scheme", "max_fault", "mean_fault", "below_mass",
                "above_mass", "samples", "seed"]
DEFAULT_DOMAIN_GRID = (20, 50, 100, 150, 200, 250, 300, 400, 500)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # counts[j, k]: programmed j, read k

    @property
    def samples(self) -> int:
        return int(self.counts[0].sum())

    @property
    def n_levels(self) -> int:
        return len(self.counts)

    @property
    def p(self) -> np.ndarray:
        return self.counts / self.counts.sum(axis=1, keepdims=True)

    def fault_rates(self) -> np.ndarray:
        return 1.0 - np.diag(self.p)

    def below_mass(self) -> float:
        """Mis-read-as-lower probability for a uniformly random stored level."""
        return float(np.tril(self.p, -1).sum() / self.n_levels)

    def above_mass(self) -> float:
        return float(np.triu(self.p, 1).sum() / self.n_levels)


def max_fault_rate(m: ConfusionMatrix) -> float:
    return float(m.fault_rates().max())


def read_back(mem: MemConfig, levels, indices, master_seed: int, threads: int = 1):
    """Program fresh cells to ``levels`` and sense them; returns (read levels, outcome)."""
    out = program_cells(mem, levels, indices, master_seed, threads)
    ts = threshold_set(mem.adc, master_seed)
    return sense_cells(ts, out.current, out.index), out


def confusion_matrix(mem: MemConfig, samples_per_level: int, master_seed: int,
                     threads: int = 1) -> ConfusionMatrix:
    if samples_per_level < 1:
        raise ValueError("samples_per_level must be >= 1")
    m = mem.adc.n_levels
    levels = np.repeat(np.arange(m), samples_per_level)
    read, _ = read_back(mem, levels, np.arange(len(levels)), master_seed, threads)
    counts = np.zeros((m, m), dtype=np.int64)
    np.add.at(counts, (levels, read), 1)
    return ConfusionMatrix(counts)


@dataclass
class ShmooRow:
    n_domains: int
    bpc: int
    scheme: str
    max_fault: float
    mean_fault: float
    below_mass: float
    above_mass: float
    samples: int
    seed: int

    @property
    def stderr(self) -> float:
        """Binomial standard error of ``max_fault``."""
        p = self.max_fault
        return float(np.sqrt(max(p * (1 - p), 0.0) / self.samples))


def shmoo(domain_grid, bpc_set, schemes, samples: int, master_seed: int, base: MemConfig = None,
          threads: int = 1) -> list:
    if not (domain_grid and bpc_set and schemes):
        raise ValueError("shmoo grids must be non-empty")
    base = base or MemConfig()
    rows = []
    for n in domain_grid:
        for bpc in bpc_set:
            for scheme in schemes:
                cm = confusion_matrix(base.with_(n, bpc, scheme), samples, master_seed, threads)
                rows.append(ShmooRow(n, bpc, scheme, max_fault_rate(cm),
                                     float(cm.fault_rates().mean()), cm.below_mass(),
                                     cm.above_mass(), samples, master_seed))
    return rows


def shmoo_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SHMOO_HEADER)
    for r in rows:
        w.writerow([r.n_domains, r.bpc, r.scheme, repr(r.max_fault), repr(r.mean_fault),
                    repr(r.below_mass), repr(r.above_mass), r.samples, r.seed])
    return buf.getvalue()
