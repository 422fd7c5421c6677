"""Deterministic derivation of independent random streams.

Every stochastic operation in the toolkit takes a master seed plus a fixed
integer path (task tags, grid-cell indices).  Flattening the path into a
SeedSequence entropy list gives independent streams whose draws do not
depend on scheduling order, which is what makes threaded grid evaluation
bit-identical to the sequential one.
"""

from __future__ import annotations

import numpy as np

__all__ = ["seed_chain", "derive_rng"]

_MASK = (1 << 64) - 1


def seed_chain(*parts) -> list[int]:
    """Flatten seeds and integer tags into one entropy list."""
    out: list[int] = []
    for part in parts:
        if isinstance(part, (list, tuple)):
            out.extend(seed_chain(*part))
        else:
            out.append(int(part) & _MASK)
    return out


def derive_rng(*parts) -> np.random.Generator:
    """Generator for the stream addressed by (seed, tag, tag, ...)."""
    return np.random.default_rng(seed_chain(*parts))
