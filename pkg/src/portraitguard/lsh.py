"""Locality-sensitive hashing of feature vectors into m-bit codes.

Atomic hash: ``h_i(x) = 1 if (a_i . x) / W >= 1 else 0`` with ``a_i`` drawn
from N(0, I). Codes are compared by Hamming distance.

Projections come from a published, seed-deterministic generator so every
participant derives the same family from ``(seed, m, W, D)``:

``splitmix64-ctr/box-muller/v1``
    word k (k = 0, 1, ...) is ``mix(seed + (k + 1) * 0x9E3779B97F4A7C15)``
    (mod 2**64), where ``mix`` is the SplitMix64 finalizer. Words are
    consumed in pairs (u, v): ``u1 = ((u >> 11) + 1) / 2**53``,
    ``u2 = (v >> 11) / 2**53``, giving ``r = sqrt(-2 ln u1)`` and the two
    normals ``r cos(2 pi u2)``, ``r sin(2 pi u2)``. The m x D projection
    matrix is filled row-major from that stream.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .portrait import DEFAULT_DIMS, FeatureKind

GENERATOR_ID = "splitmix64-ctr/box-muller/v1"
GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1

DEFAULT_M = 128
DEFAULT_W = 3.0


def splitmix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def counter_words(seed: int, count: int) -> np.ndarray:
    k = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return splitmix64(np.uint64(seed & _MASK) + k * np.uint64(GOLDEN))


def gaussian_stream(seed: int, count: int) -> np.ndarray:
    """First ``count`` standard normals of the generator stream."""
    pairs = (count + 1) // 2
    words = counter_words(seed, 2 * pairs)
    u1 = ((words[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    u2 = (words[1::2] >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:count]


def kind_subseed(master_seed: int, kind: FeatureKind | str) -> int:
    tag = kind.tag if isinstance(kind, FeatureKind) else str(kind)
    digest = hashlib.sha256(struct.pack(">Q", master_seed & _MASK) + tag.encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class HashCode:
    """m-bit code, bit i stored MSB-first in byte i // 8."""

    bits: bytes
    m: int

    def __post_init__(self):
        if len(self.bits) != (self.m + 7) // 8:
            raise ValueError(f"{len(self.bits)} bytes cannot hold exactly {self.m} bits")

    @classmethod
    def from_bits(cls, bits) -> "HashCode":
        arr = np.asarray(bits, dtype=bool).ravel()
        return cls(np.packbits(arr).tobytes(), int(arr.size))

    @classmethod
    def from_string(cls, s: str) -> "HashCode":
        return cls.from_bits([c == "1" for c in s])

    @classmethod
    def from_bytes(cls, data: bytes, m: int | None = None) -> "HashCode":
        return cls(bytes(data), 8 * len(data) if m is None else m)

    def to_bytes(self) -> bytes:
        return self.bits

    def as_int(self) -> int:
        return int.from_bytes(self.bits, "big") >> (8 * len(self.bits) - self.m)

    def __len__(self) -> int:
        return self.m

    def __str__(self) -> str:
        return format(self.as_int(), f"0{self.m}b") if self.m else ""


def hamming(c1: HashCode, c2: HashCode) -> int:
    if c1.m != c2.m:
        raise ValueError(f"code length mismatch: {c1.m} vs {c2.m}")
    return (c1.as_int() ^ c2.as_int()).bit_count()


@dataclass(frozen=True)
class LshFamily:
    m: int
    W: float
    D: int
    seed: int
    projections: np.ndarray

    def __post_init__(self):
        self.projections.setflags(write=False)

    def hash(self, x) -> HashCode:
        return hash_vector(self, x)

    def message(self) -> dict:
        return family_message(self)


def generate_family(m: int = DEFAULT_M, W: float = DEFAULT_W, D: int = 64, seed: int = 0) -> LshFamily:
    if m < 1 or D < 1:
        raise ValueError("m and D must be positive")
    if not W > 0:
        raise ValueError("W must be positive")
    a = gaussian_stream(seed, m * D).reshape(m, D)
    return LshFamily(int(m), float(W), int(D), int(seed) & _MASK, a)


def hash_bits(f: LshFamily, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != f.D:
        raise ValueError(f"vector dimension {x.shape[-1]} != family dimension {f.D}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite vector value")
    return (x @ f.projections.T) / f.W >= 1.0


def hash_vector(f: LshFamily, x) -> HashCode:
    return HashCode.from_bits(hash_bits(f, x))


def family_message(f: LshFamily) -> dict:
    return {"m": f.m, "W": f.W, "D": f.D, "seed": f.seed, "generator": GENERATOR_ID}


def family_from_message(msg: Mapping) -> LshFamily:
    if msg.get("generator") != GENERATOR_ID:
        raise ValueError(f"unsupported generator {msg.get('generator')!r}")
    return generate_family(int(msg["m"]), float(msg["W"]), int(msg["D"]), int(msg["seed"]))


@dataclass(frozen=True)
class FamilySet:
    """One published family per feature kind, all derived from a master seed."""

    m: int
    W: float
    master_seed: int
    families: Mapping[FeatureKind, LshFamily]

    def __getitem__(self, kind: FeatureKind) -> LshFamily:
        return self.families[kind]

    def message(self) -> dict:
        return {
            "m": self.m, "W": self.W, "master_seed": self.master_seed,
            "generator": GENERATOR_ID,
            "dims": {k.tag: fam.D for k, fam in self.families.items()},
        }


def generate_family_set(master_seed: int, m: int = DEFAULT_M, W: float = DEFAULT_W,
                        dims: Mapping[FeatureKind, int] = DEFAULT_DIMS) -> FamilySet:
    fams = {k: generate_family(m, W, d, kind_subseed(master_seed, k)) for k, d in dims.items()}
    return FamilySet(m, W, master_seed, fams)


def family_set_from_message(msg: Mapping) -> FamilySet:
    if msg.get("generator") != GENERATOR_ID:
        raise ValueError(f"unsupported generator {msg.get('generator')!r}")
    dims = {FeatureKind[k.upper()]: int(v) for k, v in msg["dims"].items()}
    return generate_family_set(int(msg["master_seed"]), int(msg["m"]), float(msg["W"]), dims)
