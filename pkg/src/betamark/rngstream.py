"""Counter-based random substreams.

Every random draw in the package flows from a single unsigned seed through
named Philox streams. A stream is addressed by (seed, stream id) as the
128-bit Philox key and a 256-bit counter, so any component can regenerate
its own substream independently of execution order or worker count.
"""

import numpy as np

# Named stream ids. Values are arbitrary but fixed: changing them changes
# every sampled trajectory for a given seed.
SIMULATE = 0x51
FFBS = 0x52
GIBBS = 0x53
HYPER = 0x54


def stream(seed, stream_id, *counter):
    """Generator for the given named stream at the given counter position.

    ``counter`` is up to four unsigned words, e.g. (iteration,) or
    (iteration, block_index).
    """
    if len(counter) > 4:
        raise ValueError("Philox counter takes at most four words")
    key = np.array([seed, stream_id], dtype=np.uint64)
    ctr = np.zeros(4, dtype=np.uint64)
    ctr[: len(counter)] = counter
    return np.random.Generator(np.random.Philox(key=key, counter=ctr))


def child_seed(seed, *salts):
    """Derive a stable unsigned sub-seed, for nested runs that need their
    own full stream family (e.g. one fit inside an experiment)."""
    ss = np.random.SeedSequence([int(seed), *[int(s) for s in salts]])
    return int(ss.generate_state(1, np.uint64)[0])
