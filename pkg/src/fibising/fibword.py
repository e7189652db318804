"""Fibonacci substitution words over the letters A (coupling J0) and B (J1)."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .tracecore import CouplingParams

DEFAULT_CAPACITY = 2**26


class Letter(enum.IntEnum):
    A = 0
    B = 1


class CapacityError(MemoryError):
    """Requested word is longer than the configured letter cap."""


def fib_length(k: int) -> int:
    """Length of the level-k word: 1, 2, 3, 5, 8, ... for k = 1, 2, 3, ..."""
    if k < 1:
        raise ValueError(f"level must be >= 1, got {k}")
    a, b = 1, 2
    for _ in range(k - 1):
        a, b = b, a + b
    return a


@dataclass(frozen=True, eq=False)
class FibWord:
    """A Fibonacci word stored as packed bits (0 = A, 1 = B)."""

    level: int
    length: int
    packed: np.ndarray = field(repr=False)

    @classmethod
    def from_letters(cls, level: int, letters) -> "FibWord":
        bits = np.asarray(letters, dtype=np.uint8)
        packed = np.packbits(bits)
        packed.flags.writeable = False
        return cls(level=level, length=bits.size, packed=packed)

    @classmethod
    def from_string(cls, level: int, text: str) -> "FibWord":
        if set(text) - {"A", "B"}:
            raise ValueError(f"words use only 'A' and 'B', got {text!r}")
        return cls.from_letters(level, [c == "B" for c in text])

    @property
    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed, count=self.length)

    @property
    def letters(self) -> list[Letter]:
        return [Letter(int(b)) for b in self.bits]

    def __len__(self) -> int:
        return self.length

    def __str__(self) -> str:
        return np.where(self.bits == 0, ord("A"), ord("B")).astype(np.uint8).tobytes().decode("ascii")

    def __eq__(self, other) -> bool:
        if not isinstance(other, FibWord):
            return NotImplemented
        return self.length == other.length and np.array_equal(self.packed, other.packed)

    def __hash__(self) -> int:
        return hash((self.length, self.packed.tobytes()))


def substitute(word: FibWord) -> FibWord:
    """Apply A -> AB, B -> A letterwise."""
    bits = word.bits
    out = np.zeros(bits.size + int(np.count_nonzero(bits == 0)), dtype=np.uint8)
    # A contributes two letters, B one; the second letter of each A image is B
    starts = np.concatenate([[0], np.cumsum(np.where(bits == 0, 2, 1))[:-1]])
    out[starts[bits == 0] + 1] = 1
    return FibWord.from_letters(word.level + 1, out)


@lru_cache(maxsize=64)
def _word_bits(k: int) -> np.ndarray:
    prev, cur = np.array([0], np.uint8), np.array([0, 1], np.uint8)
    if k == 1:
        cur = prev
    for _ in range(k - 2):
        prev, cur = cur, np.concatenate([cur, prev])
    cur.flags.writeable = False
    return cur


def word_at_level(k: int, capacity: int = DEFAULT_CAPACITY) -> FibWord:
    """Level-k word; ``word(k+1) = word(k) + word(k-1)``."""
    n = fib_length(k)
    if n > capacity:
        raise CapacityError(f"level {k} word has {n} letters, above the cap of {capacity}")
    return FibWord.from_letters(k, _word_bits(k))


def coupling_sequence(word: FibWord, params: CouplingParams) -> np.ndarray:
    """Letterwise A -> J0, B -> J1."""
    return np.where(word.bits == 0, params.J0, params.J1)
