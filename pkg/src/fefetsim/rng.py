"""Counter-based random streams.

Every random draw in the simulator is a pure function of
``(master_seed, stream purpose, index, counter, ...)`` hashed through
SplitMix64.  This keeps results independent of batching, evaluation order
and thread count: a cell simulated alone and the same cell simulated as
row 7,000 of a block see exactly the same numbers.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# stream purposes
VC = 1
BARRIER = 2
ADC = 3
QUERY = 4
DATA = 5
CLASS_MEANS = 6
SAMPLES = 7


def splitmix64(x) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over uint64 arrays (wrapping)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _u64(v) -> np.ndarray:
    if isinstance(v, (int, np.integer)):
        return np.asarray(int(v) & _MASK64, dtype=np.uint64)
    return np.asarray(v).astype(np.uint64)


def hash64(*parts) -> np.ndarray:
    """Fold integer (or integer-array) parts into one 64-bit hash. Broadcasts."""
    h = splitmix64(_u64(parts[0]))
    for p in parts[1:]:
        h = splitmix64(h ^ splitmix64(_u64(p)))
    return h


def uniform(*parts) -> np.ndarray:
    """Uniform doubles strictly inside (0, 1)."""
    h = hash64(*parts)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def normal(*parts) -> np.ndarray:
    """Standard normal draws by inverse-CDF of :func:`uniform`."""
    return ndtri(uniform(*parts))


def exponential(*parts) -> np.ndarray:
    """Unit-rate exponential draws."""
    return -np.log(uniform(*parts))


def generator(*parts) -> np.random.Generator:
    """A numpy Generator keyed by the hashed parts (for bulk, non-per-cell draws)."""
    return np.random.default_rng(int(hash64(*parts)))
