import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator backed by Philox-4x64 (counter-based, platform independent)."""
    return np.random.Generator(np.random.Philox(int(seed)))
