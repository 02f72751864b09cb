"""Deterministic random-stream derivation.

All randomness in the package flows from one user seed. Independent
streams are derived with ``numpy.random.SeedSequence`` spawn keys, so
results do not depend on evaluation order or chunking: a consumer that
needs randomness for (say) DIC sample 17 of stage 3 always derives the
same stream regardless of what ran before it.

Stream addresses are tuples of small integers. The first element is a
purpose tag from ``TAGS``; the remaining elements identify the stage,
direction, time index, or sample index as documented at each call site.
"""

import numpy as np

TAGS = {
    "simulate": 1,
    "dic": 2,
    "bands": 3,
    "forecast": 4,
    "states": 5,
}


def derive(seed, *path):
    """Return a Generator for the stream addressed by ``path`` under ``seed``.

    Path elements are ints or keys of ``TAGS``.
    """
    key = tuple(TAGS[p] if isinstance(p, str) else int(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))
