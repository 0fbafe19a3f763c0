"""Seed derivation so every stage can own an independent, reproducible stream."""
import zlib

import numpy as np

_MASK = (1 << 64) - 1


def _as_entropy(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK
    return zlib.crc32(f"{type(part).__name__}:{part}".encode("utf-8"))


def derive_rng(*parts) -> np.random.Generator:
    """Generator keyed on an arbitrary tuple of ints / strings / ids."""
    return np.random.default_rng(np.random.SeedSequence([_as_entropy(p) for p in parts]))


def derive_seed(*parts) -> int:
    return int(derive_rng(*parts).integers(0, 2**63 - 1))
