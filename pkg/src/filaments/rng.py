"""Named random streams derived from a single master seed.

Every random draw in the package goes through :func:`stream`, keyed by a
stream name ("resample", "smooth", "mc", ...) and one or more integer
indices, so work items can run in any order and still see the same numbers.
"""

from __future__ import annotations

import zlib

import numpy as np

DEFAULT_SEED = 20140101


def stream_key(name: str, *index: int) -> str:
    return "/".join([name] + [str(int(i)) for i in (index or (0,))])


def stream(master_seed: int, name: str, *index: int) -> np.random.Generator:
    """Independent generator for ``name/index...`` under ``master_seed``."""
    index = index or (0,)
    if master_seed < 0 or any(i < 0 for i in index):
        raise ValueError("seeds and stream indices must be non-negative")
    tag = zlib.crc32(name.encode("utf-8"))
    seq = np.random.SeedSequence([int(master_seed), tag] + [int(i) for i in index])
    return np.random.Generator(np.random.PCG64(seq))
