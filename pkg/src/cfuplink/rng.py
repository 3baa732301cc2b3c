"""Deterministic random-stream derivation for parallel Monte-Carlo trials.

Every trial and pipeline stage gets its own generator derived from the
master seed, a trial index and a stage tag, so results do not depend on
execution order or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_entropy(stage_tag: str) -> int:
    digest = hashlib.blake2b(stage_tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def seed_substream(master_seed: int, trial_index: int, stage_tag: str) -> np.random.Generator:
    """Independent generator for (seed, trial, stage); same inputs, same stream."""
    ss = np.random.SeedSequence(
        entropy=[int(master_seed), _tag_entropy(stage_tag), int(trial_index)]
    )
    return np.random.default_rng(ss)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly symmetric complex Gaussian draws of unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
