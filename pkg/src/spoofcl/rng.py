"""Labelled random substreams derived from one master seed.

Every consumer of randomness asks for a stream by a tuple of labels, e.g.
``derive_rng(seed, "data", 3)``. Streams with different labels are
statistically independent, so adding a consumer never shifts another one.
"""

import hashlib

import numpy as np


def _label_key(label) -> int:
    digest = hashlib.blake2b(repr(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(master_seed: int, *labels) -> np.random.SeedSequence:
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF] + [_label_key(lbl) for lbl in labels]
    return np.random.SeedSequence(entropy)


def derive_rng(master_seed: int, *labels) -> np.random.Generator:
    """PCG64 generator for the substream named by ``labels``."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, *labels)))
