"""Message envelope and body codecs.

Envelope: session id (16 bytes) | sender (1-byte length + UTF-8) |
type (1 byte) | body length (4 bytes, big-endian) | body.
"""
from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from typing import Sequence

from ..agreement import decode_indexed, encode_public
from ..lsh import HashCode
from ..portrait import (
    EncodingError, FeatureKind, FeatureVector, PortraitGraph, PortraitNode, deserialize_profile,
    serialize_profile,
)

SESSION_ID_LEN = 16


class MsgType(enum.IntEnum):
    POSE_REPORT = 1
    CAPTURE_REQUEST = 2
    CAPTURE_ACK = 3
    PROFILE_REQUEST = 4
    PROFILE_UPLOAD = 5
    PHOTO_UPLOAD = 6
    DIRECTIVES = 7
    PHOTO_SHARE = 8
    RING_INVITE = 10
    PUBLIC = 11
    NEIGHBORS = 12
    ROUND = 13
    ROUND_ALL = 14
    ABORT = 15
    VERIFY_REQUEST = 20
    VERIFY_VECTORS = 21
    VERIFY_RESPONSE = 22
    VERDICT = 23


AGREEMENT_TYPES = frozenset({MsgType.PUBLIC, MsgType.NEIGHBORS, MsgType.ROUND, MsgType.ROUND_ALL})


@dataclass(frozen=True)
class Envelope:
    session: bytes
    sender: str
    type: MsgType
    body: bytes = b""

    def encode(self) -> bytes:
        if len(self.session) != SESSION_ID_LEN:
            raise EncodingError("session id must be 16 bytes")
        sender = self.sender.encode("utf-8")
        if len(sender) > 255:
            raise EncodingError("sender id too long")
        return (self.session + bytes([len(sender)]) + sender + bytes([int(self.type)])
                + struct.pack(">I", len(self.body)) + self.body)

    @classmethod
    def decode(cls, data: bytes) -> "Envelope":
        session = data[:SESSION_ID_LEN]
        slen = data[SESSION_ID_LEN]
        pos = SESSION_ID_LEN + 1
        sender = data[pos:pos + slen].decode("utf-8")
        pos += slen
        mtype = MsgType(data[pos])
        (blen,) = struct.unpack_from(">I", data, pos + 1)
        body = data[pos + 5:pos + 5 + blen]
        if len(body) != blen:
            raise EncodingError("truncated envelope body")
        return cls(bytes(session), sender, mtype, bytes(body))


def text_body(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def parse_text(body: bytes):
    return json.loads(body.decode("utf-8"))


# ----------------------------------------------------------------------------
# photo upload: graph frames plus the photographer's region table


def encode_photo(graphs: Sequence[PortraitGraph], with_regions: bool = True) -> bytes:
    out = bytearray(struct.pack(">H", len(graphs)))
    for g in graphs:
        frame = serialize_profile(g)
        out += struct.pack(">I", len(frame)) + frame
        refs = [(n.id, n.region_ref) for n in g.nodes if with_regions and n.region_ref is not None]
        out += struct.pack(">H", len(refs))
        for node_id, ref in refs:
            raw = ref.encode("utf-8")
            out += struct.pack(">HB", node_id, len(raw)) + raw
    return bytes(out)


def decode_photo(data: bytes, m: int | None = None) -> list[PortraitGraph]:
    (count,) = struct.unpack_from(">H", data, 0)
    pos = 2
    graphs = []
    for _ in range(count):
        (flen,) = struct.unpack_from(">I", data, pos)
        pos += 4
        g = deserialize_profile(data[pos:pos + flen], m=m)
        pos += flen
        (nrefs,) = struct.unpack_from(">H", data, pos)
        pos += 2
        refs = {}
        for _ in range(nrefs):
            node_id, rlen = struct.unpack_from(">HB", data, pos)
            pos += 3
            refs[node_id] = data[pos:pos + rlen].decode("utf-8")
            pos += rlen
        if refs:
            nodes = tuple(PortraitNode(n.id, n.label, n.features, refs.get(n.id)) for n in g.nodes)
            g = type(g)(nodes, g.edges, g.owner_ref) if not g.hashed else type(g)(
                nodes, g.edges, g.owner_ref, g.session_ref)
        graphs.append(g)
    return graphs


# ----------------------------------------------------------------------------
# verification vectors


def encode_vectors(vectors: Sequence[FeatureVector]) -> bytes:
    out = bytearray(struct.pack(">H", len(vectors)))
    for v in vectors:
        payload = v.quantized()
        out += struct.pack(">BH", int(v.kind), len(payload)) + payload
    return bytes(out)


def decode_vectors(data: bytes) -> list[FeatureVector]:
    (count,) = struct.unpack_from(">H", data, 0)
    pos, out = 2, []
    for _ in range(count):
        kind, length = struct.unpack_from(">BH", data, pos)
        pos += 3
        out.append(FeatureVector.from_quantized(FeatureKind(kind), data[pos:pos + length]))
        pos += length
    return out


def encode_codes(codes: Sequence[HashCode]) -> bytes:
    out = bytearray(struct.pack(">H", len(codes)))
    for c in codes:
        out += struct.pack(">H", c.m) + c.to_bytes()
    return bytes(out)


def decode_codes(data: bytes) -> list[HashCode]:
    (count,) = struct.unpack_from(">H", data, 0)
    pos, out = 2, []
    for _ in range(count):
        (m,) = struct.unpack_from(">H", data, pos)
        pos += 2
        n = (m + 7) // 8
        out.append(HashCode.from_bytes(data[pos:pos + n], m))
        pos += n
    return out


# ----------------------------------------------------------------------------
# agreement bodies


def encode_neighbors(n: int, i: int, prev: tuple[int, int], nxt: tuple[int, int]) -> bytes:
    return struct.pack(">HH", n, i) + encode_public(*prev) + encode_public(*nxt)


def decode_neighbors(data: bytes) -> tuple[int, int, tuple[int, int], tuple[int, int]]:
    n, i = struct.unpack_from(">HH", data, 0)
    recs = decode_indexed(data[4:])
    return n, i, recs[0], recs[1]


def encode_round_all(n: int, i: int, cs: Sequence[tuple[int, int]]) -> bytes:
    return struct.pack(">HH", n, i) + b"".join(encode_public(j, c) for j, c in cs)


def decode_round_all(data: bytes) -> tuple[int, int, list[tuple[int, int]]]:
    n, i = struct.unpack_from(">HH", data, 0)
    return n, i, decode_indexed(data[4:])
