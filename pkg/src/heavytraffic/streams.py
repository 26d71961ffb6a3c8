"""Counter-based random streams.

Every random quantity in the package is drawn from a stream identified by
``(master_seed, purpose, index)``.  Streams use the Philox counter-based
generator keyed through :class:`numpy.random.SeedSequence`, so replicate ``r``
produces the same draws no matter which worker evaluates it or in which order.
"""

import secrets

import numpy as np

PRELIMIT = 0
LIMIT = 1
BOOTSTRAP = 2
BLOCKS = 3
DIVERGENCE = 4
MISC = 5


def stream(seed, purpose, index=0):
    """Return an independent generator for ``(seed, purpose, index)``."""
    if seed is None:
        raise ValueError("an explicit master seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def fresh_seed():
    """Draw a new 63-bit master seed from the OS entropy pool."""
    return secrets.randbits(63)
