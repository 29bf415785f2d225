"""Deterministic seed derivation.

Every stochastic component in the pipeline draws from a generator whose seed
is a stable hash of (master seed, stage labels...).  Results are therefore
reproducible regardless of execution order or concurrency schedule, and two
pipelines that share a stage (same labels) see identical randomness.
"""

import hashlib

import numpy as np


def derive_seed(master_seed: int, *labels) -> int:
    """Derive a child seed from a master seed and a sequence of labels.

    The child is the first 8 bytes of SHA-256 over the decimal master seed
    joined with the string form of each label, so the mapping is stable
    across platforms, processes and library versions.
    """
    text = ":".join([str(int(master_seed))] + [str(lab) for lab in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master_seed: int, *labels) -> np.random.Generator:
    """A numpy Generator seeded via derive_seed."""
    return np.random.default_rng(derive_seed(master_seed, *labels))
