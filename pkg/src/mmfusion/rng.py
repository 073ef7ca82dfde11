"""Seed management.

Every random decision in the package flows from one root seed through a
named sub-stream, so individual components (init, shuffling, dropout, data
generation) can be perturbed or reproduced independently.
"""

import hashlib

import numpy as np


def substream(root_seed: int, name: str) -> np.random.Generator:
    """Derive an independent, reproducible generator for ``name``."""
    digest = hashlib.sha256(f"{root_seed}:{name}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))
