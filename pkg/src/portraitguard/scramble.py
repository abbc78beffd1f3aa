"""Secret dimension permutations derived from the group random number.

A code is the factorial-number-system decoding of ``R mod N!``: for
``k = N-1 .. 0`` take ``i = R // k!``, emit ``S[i]`` from the sorted
remainder set S and continue with ``R % k!``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Mapping

import numpy as np

from .portrait import DEFAULT_DIMS, FeatureKind


@dataclass(frozen=True)
class ScrambleCode:
    """1-based permutation of {1..N}; output dimension j takes x[code[j]]."""

    code: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.code) != list(range(1, len(self.code) + 1)):
            raise ValueError("scramble code is not a permutation of 1..N")

    @property
    def N(self) -> int:
        return len(self.code)

    @property
    def index(self) -> np.ndarray:
        return np.asarray(self.code, dtype=np.intp) - 1

    def inverse(self) -> "ScrambleCode":
        inv = [0] * self.N
        for j, src in enumerate(self.code):
            inv[src - 1] = j + 1
        return ScrambleCode(tuple(inv))


def scramble_code(R: int, N: int) -> ScrambleCode:
    if N < 1:
        raise ValueError("N must be positive")
    if R < 0:
        raise ValueError("R must be non-negative")
    R %= factorial(N)
    remaining = list(range(1, N + 1))
    code = []
    for k in range(N - 1, -1, -1):
        f = factorial(k)
        i, R = divmod(R, f)
        code.append(remaining.pop(i))
    return ScrambleCode(tuple(code))


def rank_code(c: ScrambleCode) -> int:
    """Inverse of scramble_code on [0, N!)."""
    remaining = list(range(1, c.N + 1))
    r = 0
    for pos, v in enumerate(c.code):
        i = remaining.index(v)
        r += i * factorial(c.N - 1 - pos)
        remaining.pop(i)
    return r


def apply_scramble(x, c: ScrambleCode) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != c.N:
        raise ValueError(f"vector dimension {x.shape[-1]} != code length {c.N}")
    return x[..., c.index]


def unscramble(x, c: ScrambleCode) -> np.ndarray:
    return apply_scramble(x, c.inverse())


def kind_seed(R: int, kind: FeatureKind | str) -> int:
    tag = kind.tag if isinstance(kind, FeatureKind) else str(kind)
    nbytes = max(1, (R.bit_length() + 7) // 8)
    digest = hashlib.sha512(R.to_bytes(nbytes, "big") + b"/" + tag.encode()).digest()
    return int.from_bytes(digest, "big")


@lru_cache(maxsize=256)
def _kind_code(R: int, tag: str, N: int) -> ScrambleCode:
    return scramble_code(kind_seed(R, tag), N)


def kind_codes(R: int, dims: Mapping[FeatureKind, int] = DEFAULT_DIMS) -> dict[FeatureKind, ScrambleCode]:
    """One code per feature kind from a single agreed R.

    512 hash bits cover 64! (about 2**296), so reduction mod N! stays close
    to uniform for the default dimensions.
    """
    return {k: _kind_code(R, k.tag, n) for k, n in dims.items()}
