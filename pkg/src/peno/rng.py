"""Counter-based random substreams.

Every random draw in the package comes from a Philox generator whose key is
derived from ``(root seed, stream id, counters...)``.  A given (stream,
counter) pair always yields the same numbers, no matter which thread asks or
in which order, so serial and parallel execution produce identical results.
"""

import numpy as np

# stream ids; never renumber, traces depend on them
INIT = 0
NOISE = 1
TIES = 2
TRAIN = 3
FORECAST = 4
EVAL = 5

_U64 = (1 << 64) - 1


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= _U64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def substream(seed: int, stream: int, *counters: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream, *counters)``."""
    key = (int(stream),) + tuple(int(c) for c in counters)
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
