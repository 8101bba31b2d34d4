"""Counter-based random streams.

Every stream is a Philox generator keyed by a master seed plus a tuple of
integers (instance index, N, ...), so parallel workers reproduce the same
draws regardless of scheduling.
"""

import numpy as np


def make_rng(seed, *keys):
    seq = np.random.SeedSequence([int(seed) & (2**64 - 1), *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(seq))
