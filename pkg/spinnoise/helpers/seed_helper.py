from typing import Sequence, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


class SeedHelper:
    """
    Derives independent, reproducible RNG streams from integer seeds.
    """

    @staticmethod
    def sequence(seed: SeedLike) -> np.random.SeedSequence:
        if isinstance(seed, np.random.SeedSequence):
            return seed
        if isinstance(seed, np.random.Generator):
            return np.random.SeedSequence(
                int(seed.integers(0, 2**63 - 1, dtype=np.int64))
            )
        return np.random.SeedSequence(seed)

    @staticmethod
    def generator(seed: SeedLike) -> np.random.Generator:
        if isinstance(seed, np.random.Generator):
            return seed
        return np.random.default_rng(SeedHelper.sequence(seed))

    @staticmethod
    def streams(seed: SeedLike, n: int) -> list:
        return [
            np.random.default_rng(child) for child in SeedHelper.sequence(seed).spawn(n)
        ]

    @staticmethod
    def cell_sequence(base_seed: int, indices: Sequence[int]) -> np.random.SeedSequence:
        """Seed for one campaign cell, independent of scheduling order."""
        return np.random.SeedSequence([int(base_seed), *[int(i) for i in indices]])
