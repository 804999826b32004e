"""Flash-style multi-level sensing with static per-instance reference variation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng


@dataclass(frozen=True)
class AdcConfig:
    bits_per_cell: int = 2
    i_low: float = 1.0  # uA
    i_high: float = 16.0  # uA
    sigma_rel: float = 0.05 / 3  # 3 sigma = 5 %
    n_instances: int = 64

    def __post_init__(self):
        if not 1 <= self.bits_per_cell <= 3:
            raise ValueError("bits_per_cell must be 1, 2 or 3")
        if not 0 < self.i_low < self.i_high:
            raise ValueError("need 0 < i_low < i_high")
        if self.sigma_rel < 0:
            raise ValueError("sigma_rel must be non-negative")
        if self.n_instances < 1:
            raise ValueError("n_instances must be >= 1")

    @property
    def n_levels(self) -> int:
        return 2**self.bits_per_cell

    @property
    def ratio(self) -> float:
        """Per-step current ratio between adjacent thresholds."""
        return (self.i_high / self.i_low) ** (1.0 / self.n_levels)


@dataclass(frozen=True)
class ThresholdSet:
    nominal: np.ndarray  # (2**n - 1,)
    sampled: np.ndarray  # (n_instances, 2**n - 1)

    def row(self, instance: int) -> np.ndarray:
        return self.sampled[instance % len(self.sampled)]


def nominal_thresholds(cfg: AdcConfig) -> np.ndarray:
    """Geometrically spaced references ``i_low * rho**k``, k = 1 .. 2**n - 1."""
    k = np.arange(1, cfg.n_levels)
    return cfg.i_low * cfg.ratio**k


def target_levels(cfg: AdcConfig) -> np.ndarray:
    """Programming targets: ``i_low`` for level 0, geometric midpoints above."""
    t = np.append(nominal_thresholds(cfg), cfg.i_high)
    return np.concatenate([[cfg.i_low], np.sqrt(t[:-1] * t[1:])])


def sample_adc(cfg: AdcConfig, master_seed: int, instance_index: int) -> np.ndarray:
    """One instance's reference row, perturbed once and kept sorted."""
    nominal = nominal_thresholds(cfg)
    if cfg.sigma_rel == 0:
        return nominal.copy()
    eps = rng.normal(master_seed, rng.ADC, instance_index, np.arange(len(nominal)))
    return np.sort(nominal * (1.0 + cfg.sigma_rel * eps))


def threshold_set(cfg: AdcConfig, master_seed: int) -> ThresholdSet:
    nominal = nominal_thresholds(cfg)
    if cfg.sigma_rel == 0:
        sampled = np.tile(nominal, (cfg.n_instances, 1))
    else:
        inst = np.arange(cfg.n_instances)[:, None]
        eps = rng.normal(master_seed, rng.ADC, inst, np.arange(len(nominal))[None, :])
        sampled = np.sort(nominal * (1.0 + cfg.sigma_rel * eps), axis=1)
    return ThresholdSet(nominal, sampled)


def sense(row: np.ndarray, current):
    """Level = number of references strictly below ``current``."""
    level = np.searchsorted(row, current, side="left")
    return int(level) if np.ndim(level) == 0 else level


def sense_cells(ts: ThresholdSet, currents: np.ndarray, cell_indices: np.ndarray) -> np.ndarray:
    """Sense each cell through ADC instance ``cell_index mod n_instances``."""
    rows = ts.sampled[np.asarray(cell_indices) % len(ts.sampled)]
    return (np.asarray(currents)[:, None] > rows).sum(axis=1)
