import numpy as np

MAX_SEED = 2**64 - 1


def derive_stream(master_seed: int, grid_index: int = 0, trial_index: int = 0) -> np.random.Generator:
    """
    RandomStream for one unit of work.

    The stream depends only on (master_seed, grid_index, trial_index), so a sweep
    produces the same numbers whatever the number of workers or the order in
    which points finish.
    """
    if not 0 <= master_seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {master_seed}")
    sequence = np.random.SeedSequence(master_seed, spawn_key=(grid_index, trial_index))
    return np.random.default_rng(sequence)
