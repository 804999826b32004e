"""Stochastic multi-domain FeFET cell.

A cell is a set of independent ferroelectric domains, each SET or RESET.
A pulse of amplitude ``V`` and width ``t`` delivers a normalized dose
``t / tau`` with ``tau = tau0 * exp(alpha * vc / |V|)`` to every domain that
opposes the pulse polarity.  Switching follows a nucleation-limited law:
a domain that has survived dose ``u`` switches within a further ``du`` with
probability ``1 - exp(-((u + du)**beta - u**beta))``.

Internally every domain carries a *barrier* ``E ~ Exp(1)`` in cumulative
hazard units and switches as soon as ``dose**beta >= E``.  This realizes the
law above exactly, and makes pulse splitting bit-exact rather than merely
equal in distribution.  When a domain's dose is discarded (polarity
reversal) the barrier keeps only its residual ``E - dose**beta``, which is
again ``Exp(1)`` by memorylessness; after a switch a fresh barrier is drawn.

With ``stochastic=False`` barriers are pinned to evenly spaced quantiles of
``Exp(1)`` so that a cell switches exactly the expected fraction of its
domains (the deterministic limit used for calibration and zero-variance
runs).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import rng

RESET = False
SET = True


@dataclass(frozen=True)
class DeviceParams:
    n_domains: int = 150
    vc_median: float = 1.0  # V
    vc_sigma_ln: float = 0.03
    tau0: float = 1e-9  # s
    alpha: float = 22.0
    beta: float = 2.0
    i_low: float = 1.0  # uA, all domains RESET
    i_high: float = 16.0  # uA, all domains SET
    stochastic: bool = True

    def __post_init__(self):
        if self.n_domains < 1:
            raise ValueError("n_domains must be >= 1")
        if self.tau0 <= 0 or self.beta <= 0 or self.vc_median <= 0:
            raise ValueError("tau0, beta and vc_median must be positive")
        if self.vc_sigma_ln < 0:
            raise ValueError("vc_sigma_ln must be non-negative")
        if not 0 < self.i_low < self.i_high:
            raise ValueError("need 0 < i_low < i_high")

    def with_domains(self, n_domains: int) -> "DeviceParams":
        return replace(self, n_domains=n_domains)

    def nominal(self) -> "DeviceParams":
        """Zero-variance twin: median coercive voltage, deterministic switching."""
        return replace(self, vc_sigma_ln=0.0, stochastic=False)

    def tau(self, vc, amplitude: float):
        return self.tau0 * np.exp(self.alpha * np.asarray(vc) / abs(amplitude))

    def expected_fraction(self, amplitude: float, duration: float) -> float:
        """Switched fraction of a fresh nominal cell after one pulse."""
        u = duration / float(self.tau(self.vc_median, amplitude))
        return float(-np.expm1(-(u**self.beta)))


@dataclass(frozen=True)
class Pulse:
    amplitude: float  # V, positive = SET direction
    duration: float  # s

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")


HARD_RESET_PULSE = Pulse(-4.0, 1e-6)


def switch_probability(u_prev, delta_u, beta):
    """Probability that a domain surviving dose ``u_prev`` switches within ``delta_u``."""
    u_prev = np.asarray(u_prev, dtype=float)
    delta_u = np.asarray(delta_u, dtype=float)
    if np.any(u_prev < 0) or np.any(delta_u < 0) or beta <= 0:
        raise ValueError("switch_probability needs u_prev >= 0, delta_u >= 0, beta > 0")
    p = -np.expm1(-((u_prev + delta_u) ** beta - u_prev**beta))
    return p if p.ndim else float(p)


def _quantile_barriers(n: int) -> np.ndarray:
    return -np.log1p(-(np.arange(n) + 0.5) / n)


def _fresh_barriers(params: DeviceParams, seed: int, index, events, domain) -> np.ndarray:
    if params.stochastic:
        return rng.exponential(seed, rng.BARRIER, index, events, domain)
    return _quantile_barriers(params.n_domains)[domain]


def _sample_vc(params: DeviceParams, seed: int, index: np.ndarray) -> np.ndarray:
    n = params.n_domains
    shape = (len(index), n)
    if params.vc_sigma_ln == 0:
        return np.full(shape, params.vc_median)
    z = rng.normal(seed, rng.VC, index[:, None], np.arange(n)[None, :])
    return params.vc_median * np.exp(params.vc_sigma_ln * z)


def _apply_rows(params, seed, index, events, state, dose, barrier, target, du):
    """Advance one pulse on 2-D (cells x domains) views, in place.

    ``events`` is incremented; the new value keys any barrier redraws.
    """
    beta = params.beta
    events += 1
    opposing = state != target

    stale = ~opposing & (dose > 0)
    if stale.any():
        if params.stochastic:
            barrier[stale] -= dose[stale] ** beta
        else:
            barrier[stale] = _quantile_barriers(params.n_domains)[np.nonzero(stale)[1]]
        dose[stale] = 0.0

    new_dose = np.where(opposing, dose + du, dose)
    hazard = new_dose * new_dose if beta == 2 else new_dose**beta
    switched = opposing & (hazard >= barrier)
    dose[...] = new_dose
    if switched.any():
        r, d = np.nonzero(switched)
        state[r, d] = target
        dose[r, d] = 0.0
        barrier[r, d] = _fresh_barriers(params, seed, index[r], events[r], d)


@dataclass
class FeFETCell:
    """One cell; arrays are per-domain. ``events`` counts pulses applied."""

    params: DeviceParams
    seed: int
    index: int
    domain_state: np.ndarray
    domain_vc: np.ndarray
    domain_dose: np.ndarray
    domain_barrier: np.ndarray
    events: int = 0

    @property
    def n_set(self) -> int:
        return int(self.domain_state.sum())


def new_cell(params: DeviceParams, master_seed: int, cell_index: int) -> FeFETCell:
    idx = np.array([cell_index], dtype=np.int64)
    n = params.n_domains
    return FeFETCell(
        params=params,
        seed=master_seed,
        index=cell_index,
        domain_state=np.zeros(n, dtype=bool),
        domain_vc=_sample_vc(params, master_seed, idx)[0],
        domain_dose=np.zeros(n),
        domain_barrier=np.asarray(
            _fresh_barriers(params, master_seed, idx[:, None], 0, np.arange(n)[None, :])
        ).reshape(n),
    )


def apply_pulse(cell: FeFETCell, pulse: Pulse) -> FeFETCell:
    """Apply ``pulse`` to ``cell`` in place and return it."""
    p = cell.params
    du = pulse.duration / p.tau(cell.domain_vc, pulse.amplitude)
    events = np.array([cell.events], dtype=np.int64)
    _apply_rows(
        p,
        cell.seed,
        np.array([cell.index], dtype=np.int64),
        events,
        cell.domain_state[None, :],
        cell.domain_dose[None, :],
        cell.domain_barrier[None, :],
        pulse.amplitude > 0,
        du[None, :],
    )
    cell.events = int(events[0])
    return cell


def hard_reset(cell: FeFETCell) -> FeFETCell:
    apply_pulse(cell, HARD_RESET_PULSE)
    # residual barriers stay valid; only the dose bookkeeping is dropped
    _clear_dose(cell.params, cell.domain_dose[None, :], cell.domain_barrier[None, :])
    return cell


def _clear_dose(params, dose, barrier):
    dosed = dose > 0
    if not dosed.any():
        return
    if params.stochastic:
        barrier[dosed] -= dose[dosed] ** params.beta
    else:
        barrier[dosed] = _quantile_barriers(params.n_domains)[np.nonzero(dosed)[1]]
    dose[dosed] = 0.0


def read_current(cell: FeFETCell) -> float:
    p = cell.params
    return p.i_low + cell.n_set / p.n_domains * (p.i_high - p.i_low)


@dataclass
class CellBlock:
    """A population of cells advanced together; row ``r`` is cell ``index[r]``.

    Row-for-row identical to simulating each :class:`FeFETCell` alone.
    """

    params: DeviceParams
    seed: int
    index: np.ndarray
    state: np.ndarray
    vc: np.ndarray
    dose: np.ndarray
    barrier: np.ndarray
    events: np.ndarray
    _du_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def create(cls, params: DeviceParams, master_seed: int, indices) -> "CellBlock":
        index = np.asarray(indices, dtype=np.int64)
        n, c = params.n_domains, len(index)
        barrier = _fresh_barriers(
            params, master_seed, index[:, None], 0, np.arange(n)[None, :]
        )
        return cls(
            params=params,
            seed=master_seed,
            index=index,
            state=np.zeros((c, n), dtype=bool),
            vc=_sample_vc(params, master_seed, index),
            dose=np.zeros((c, n)),
            barrier=np.array(np.broadcast_to(barrier, (c, n)), dtype=float),
            events=np.zeros(c, dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.index)

    def _du(self, pulse: Pulse) -> np.ndarray:
        key = (abs(pulse.amplitude), pulse.duration)
        du = self._du_cache.get(key)
        if du is None:
            du = pulse.duration / self.params.tau(self.vc, pulse.amplitude)
            self._du_cache[key] = du
        return du

    def apply_pulse(self, pulse: Pulse, rows=None) -> None:
        du = self._du(pulse)
        if rows is None:
            _apply_rows(self.params, self.seed, self.index, self.events, self.state,
                        self.dose, self.barrier, pulse.amplitude > 0, du)
            return
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.nonzero(rows)[0]
        if len(rows) == 0:
            return
        state, dose, barrier = self.state[rows], self.dose[rows], self.barrier[rows]
        events = self.events[rows]
        _apply_rows(self.params, self.seed, self.index[rows], events, state, dose,
                    barrier, pulse.amplitude > 0, du[rows])
        self.state[rows], self.dose[rows], self.barrier[rows] = state, dose, barrier
        self.events[rows] = events

    def hard_reset(self) -> None:
        self.apply_pulse(HARD_RESET_PULSE)
        _clear_dose(self.params, self.dose, self.barrier)

    def n_set(self) -> np.ndarray:
        return self.state.sum(axis=1)

    def read_current(self) -> np.ndarray:
        p = self.params
        return p.i_low + self.n_set() / p.n_domains * (p.i_high - p.i_low)

    def cell(self, r: int) -> FeFETCell:
        """Copy of row ``r`` as a standalone cell."""
        return FeFETCell(self.params, self.seed, int(self.index[r]), self.state[r].copy(),
                         self.vc[r].copy(), self.dose[r].copy(), self.barrier[r].copy(),
                         int(self.events[r]))
