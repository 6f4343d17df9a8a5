"""Named random substreams derived from one root seed."""

import random
import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent numpy generator for the stage ``name`` under root ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode("utf-8"))]))


def py_random(seed: int, name: str) -> random.Random:
    # string seeds hash through sha512, so this is stable across processes
    return random.Random(f"{int(seed)}:{name}")
