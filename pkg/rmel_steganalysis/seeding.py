"""Seeded randomness.

Every random draw in the package comes from a numpy ``Generator`` over the
``PCG64`` bit generator.  Independent streams are split off a single user
seed with ``SeedSequence([seed, *keys])``, whose first 64-bit output word is
the derived seed.  The stream keys below are part of the corpus format: the
same (seed, keys) always yields the same stream on every platform.
"""

from __future__ import annotations

import numpy as np

from . import errors


SEED_MAX = 2**64 - 1

PAYLOAD = 1
PERMUTATION = 2
SIGN = 3
CHIPS = 4
COX = 5
SPLIT = 6
FOLDS = 7
GA = 8
SYNTHESIS = 9
CALIBRATION = 10
CORPUS = 11
TRIAL = 12


def check_seed(seed: int) -> int:
    if not 0 <= seed <= SEED_MAX:
        raise errors.BadConfigError(
            f"seed {seed} is outside the unsigned 64-bit range"
        )
    return seed


def derive_seed(seed: int, *keys: int) -> int:
    seq = np.random.SeedSequence([check_seed(seed), *keys])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def rng(seed: int, *keys: int) -> np.random.Generator:
    if keys:
        seed = derive_seed(seed, *keys)
    return np.random.Generator(np.random.PCG64(check_seed(seed)))


def sklearn_state(seed: int, *keys: int) -> int:
    # scikit-learn only takes 32-bit random states
    return derive_seed(seed, *keys) % 2**32
