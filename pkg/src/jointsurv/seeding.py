"""Deterministic sub-seed derivation so one master seed reproduces a study."""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, label: str) -> int:
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def generator(master: int, label: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, label)))
