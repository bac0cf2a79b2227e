"""Seed derivation utilities.

All randomness in the package flows from a single 64-bit master seed.
Sub-seeds for independent purposes (replications, bootstrap draws,
partitions, ...) are derived by feeding the master seed together with a
sequence of labels into :class:`numpy.random.SeedSequence`.  The derivation
is stable across platforms and documented here so that any consumer can
reproduce a substream: strings are encoded as their UTF-8 bytes split into
unsigned 32-bit words, integers are used as-is (masked to 64 bits).
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

_MASK64 = (1 << 64) - 1


def _encode(part: int | str) -> list[int]:
    if isinstance(part, bool):  # guard: bool is an int subclass
        return [int(part)]
    if isinstance(part, int):
        return [part & _MASK64]
    if isinstance(part, str):
        raw = part.encode("utf-8")
        words = [int.from_bytes(raw[i : i + 4], "little") for i in range(0, len(raw), 4)]
        return [len(raw)] + words
    raise ParameterError(f"cannot derive a seed from {type(part).__name__!r}")


def seed_sequence(seed: int, *parts: int | str) -> np.random.SeedSequence:
    """SeedSequence for (seed, *parts); identical inputs give identical streams."""
    entropy: list[int] = [seed & _MASK64]
    for part in parts:
        entropy.extend(_encode(part))
    return np.random.SeedSequence(entropy)


def spawn_rng(seed: int, *parts: int | str) -> np.random.Generator:
    """Generator on the substream identified by (seed, *parts)."""
    return np.random.default_rng(seed_sequence(seed, *parts))


def derive_seed(seed: int, *parts: int | str) -> int:
    """64-bit sub-seed for (seed, *parts), printable for replay."""
    state = seed_sequence(seed, *parts).generate_state(1, dtype=np.uint64)
    return int(state[0])


def fresh_seed() -> int:
    """Entropy-based seed, used when the caller did not supply one."""
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
