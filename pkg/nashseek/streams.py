import numpy as np


def derive_stream(master_seed, *path):
    """
    Returns an independent random stream for a purpose path.

    The same (master_seed, path) always yields the same stream, and distinct
    paths yield statistically independent streams, so replays are bit-exact
    and replications never share draws.

    Args:
        master_seed (int): Seed of the whole run or study.
        *path (int): Purpose path, e.g. (seed_index, iteration).

    Returns:
        numpy.random.Generator
    """
    key = tuple(int(p) for p in path)
    if any(k < 0 for k in key):
        raise ValueError(f"Stream path entries must be non-negative, got {key}")
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.default_rng(seq)


def as_stream(rng):
    """Accepts a Generator or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
