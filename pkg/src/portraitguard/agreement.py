"""One-round ring agreement on a shared random number through a relay.

Participants hold ``a_i`` and publish ``b_i = g^a_i``. With ring neighbours
``b_{i-1}, b_{i+1}`` each member broadcasts ``c_i = (b_{i+1}/b_{i-1})^a_i``
and derives::

    R_i = b_{i-1}^(n a_i) * c_i^(n-1) * c_{i+1}^(n-2) * ... * c_{i-2}   (mod p)

which equals ``g^(a_1 a_2 + a_2 a_3 + ... + a_n a_1)`` for every member.
"""
from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import sympy

DEFAULT_BITS = 512


class AgreementError(Exception):
    """The ring cannot produce a consistent random number."""


@dataclass(frozen=True)
class GroupParams:
    p: int
    q: int
    g: int
    N: int

    def problems(self) -> list[str]:
        out = []
        if not sympy.isprime(self.q):
            out.append("q is not prime")
        if not sympy.isprime(self.p):
            out.append("p is not prime")
        if (self.p - 1) % self.q:
            out.append("q does not divide p-1")
        if not 1 < self.g < self.p:
            out.append("g outside (1, p)")
        elif pow(self.g, self.q, self.p) != 1:
            out.append("g does not have order q")
        return out

    def validate(self) -> "GroupParams":
        bad = self.problems()
        if bad:
            raise AgreementError("invalid group parameters: " + "; ".join(bad))
        return self

    def to_message(self) -> bytes:
        return encode_ints([self.p, self.q, self.g, self.N])

    @classmethod
    def from_message(cls, data: bytes) -> "GroupParams":
        p, q, g, n = decode_ints(data)
        return cls(p, q, g, n)


TOY_PARAMS = GroupParams(p=23, q=11, g=2, N=4)


def init_params(N: int = DEFAULT_BITS, c: int = 1, seed: int = 0) -> GroupParams:
    """Schnorr group: N-bit prime q, then p = kq + 1 for the smallest viable
    k with p >= 2**(c*N - 1), then g = h^((p-1)/q) != 1."""
    if N < 8:
        raise ValueError("N too small")
    rng = random.Random(seed)
    while True:
        cand = rng.getrandbits(N) | (1 << (N - 1)) | 1
        q = sympy.nextprime(cand - 1)
        if q.bit_length() == N:
            break
    k = max(2, -(-(1 << (c * N - 1)) // q))
    k += k % 2
    while not sympy.isprime(k * q + 1):
        k += 2
    p = k * q + 1
    while True:
        h = rng.randrange(2, p - 1)
        g = pow(h, (p - 1) // q, p)
        if g != 1:
            return GroupParams(p, q, g, N)


def keygen(params: GroupParams, rng: random.Random | None = None) -> tuple[int, int]:
    rng = rng or random.SystemRandom()
    a = rng.randrange(1, params.q)
    return a, public_key(params, a)


def public_key(params: GroupParams, a: int) -> int:
    return pow(params.g, a, params.p)


def check_public(params: GroupParams, b: int) -> bool:
    return 0 < b < params.p and pow(b, params.q, params.p) == 1


def compute_c(params: GroupParams, a_i: int, b_prev: int, b_next: int) -> int:
    if b_prev % params.p == 0:
        raise AgreementError("b_prev is not invertible mod p")
    ratio = b_next * pow(b_prev, -1, params.p) % params.p
    return pow(ratio, a_i, params.p)


def compute_R(params: GroupParams, i: int, n: int, a_i: int, b_prev: int,
              c: Sequence[int | None]) -> int:
    """R for ring position ``i`` (0-based) given all c values in ring order."""
    if n < 2:
        raise AgreementError("ring needs at least two members")
    if len(c) != n:
        raise AgreementError(f"expected {n} c values, got {len(c)}")
    p = params.p
    acc = pow(b_prev, n * a_i, p)
    for step in range(n - 1):
        cj = c[(i + step) % n]
        if cj is None:
            raise AgreementError(f"missing c for ring position {(i + step) % n}")
        acc = acc * pow(cj, n - 1 - step, p) % p
    return acc


def closed_form_R(params: GroupParams, a: Sequence[int]) -> int:
    n = len(a)
    e = sum(a[i] * a[(i + 1) % n] for i in range(n)) % params.q
    return pow(params.g, e, params.p)


def c_product_ok(params: GroupParams, c: Iterable[int]) -> bool:
    """Relay integrity check: the full ring's c values multiply to 1."""
    acc = 1
    for v in c:
        acc = acc * v % params.p
    return acc == 1


def run_ring(params: GroupParams, a: Sequence[int]) -> list[int]:
    """Every member's R_i for private keys ``a`` in ring order."""
    n = len(a)
    b = [public_key(params, x) for x in a]
    c = [compute_c(params, a[i], b[i - 1], b[(i + 1) % n]) for i in range(n)]
    return [compute_R(params, i, n, a[i], b[i - 1], c) for i in range(n)]


# ----------------------------------------------------------------------------
# cloud-side ring bookkeeping


@dataclass
class RingSession:
    """Cloud view of one ring: member order plus relayed publics and c values.

    Holds no private keys and no derived R.
    """

    params: GroupParams
    members: list[str]
    publics: dict[str, int] = field(default_factory=dict)
    cs: dict[str, int] = field(default_factory=dict)
    round: int = 0

    def __post_init__(self):
        if len(set(self.members)) != len(self.members):
            raise AgreementError("duplicate ring member")

    @property
    def n(self) -> int:
        return len(self.members)

    def position(self, member: str) -> int:
        return self.members.index(member)

    def neighbors(self, member: str) -> tuple[str, str]:
        i = self.position(member)
        return self.members[i - 1], self.members[(i + 1) % self.n]

    def neighbor_map(self) -> dict[str, tuple[str, str]]:
        return {m: self.neighbors(m) for m in self.members}

    def c_list(self) -> list[int | None]:
        return [self.cs.get(m) for m in self.members]

    def complete(self) -> bool:
        return all(m in self.cs for m in self.members)


def ring_update(session: RingSession, insert: tuple[str, int] | None = None,
                remove: str | None = None) -> set[str]:
    """Apply a single insert (member, position) or removal in place.

    Returns the members that must recompute c_i: those whose ring
    neighbours changed, plus any newly inserted member. Their stale c values
    are dropped; everyone still recomputes R from the new c list.
    """
    before = session.neighbor_map() if session.n else {}
    members = list(session.members)
    if remove is not None:
        if remove not in members:
            raise AgreementError(f"{remove} not in ring")
        if len(members) - 1 < 2:
            raise AgreementError("ring would shrink below two members")
        members.remove(remove)
        session.publics.pop(remove, None)
        session.cs.pop(remove, None)
    if insert is not None:
        who, pos = insert
        if who in members:
            raise AgreementError(f"{who} already in ring")
        members.insert(pos, who)
    if len(members) < 2:
        raise AgreementError("ring needs at least two members")
    session.members = members
    after = session.neighbor_map()
    stale = {m for m in members if before.get(m) != after[m]}
    for m in stale:
        session.cs.pop(m, None)
    if stale:
        session.round += 1
    return stale


# ----------------------------------------------------------------------------
# wire encoding: unsigned big-endian, 2-byte length prefix


def encode_int(x: int) -> bytes:
    if x < 0:
        raise ValueError("only non-negative integers are encoded")
    body = x.to_bytes(max(1, (x.bit_length() + 7) // 8), "big")
    return struct.pack(">H", len(body)) + body


def decode_int(data: bytes, pos: int = 0) -> tuple[int, int]:
    (length,) = struct.unpack_from(">H", data, pos)
    pos += 2
    body = data[pos:pos + length]
    if len(body) != length:
        raise ValueError("truncated integer")
    return int.from_bytes(body, "big"), pos + length


def encode_ints(xs: Iterable[int]) -> bytes:
    return b"".join(encode_int(x) for x in xs)


def decode_ints(data: bytes) -> list[int]:
    out, pos = [], 0
    while pos < len(data):
        x, pos = decode_int(data, pos)
        out.append(x)
    return out


def encode_public(i: int, b: int) -> bytes:
    return struct.pack(">H", i) + encode_int(b)


def encode_round(i: int, c: int) -> bytes:
    return struct.pack(">H", i) + encode_int(c)


def decode_indexed(data: bytes) -> list[tuple[int, int]]:
    """Decode a run of {index, value} records."""
    out, pos = [], 0
    while pos < len(data):
        (i,) = struct.unpack_from(">H", data, pos)
        v, pos = decode_int(data, pos + 2)
        out.append((i, v))
    return out
