"""Transcript audits for advanced-mode confidentiality."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..agreement import encode_int
from ..portrait import PortraitGraph
from .messages import MsgType, decode_photo
from .relay import TranscriptEntry

# the shared photo and the verification vectors are public by design
PUBLIC_PHASES = frozenset({"share", "verify"})
_MIN_SECRET = 8  # shorter encodings collide with ordinary bytes by chance


@dataclass(frozen=True)
class Finding:
    seq: int
    what: str


def plain_payloads(graphs: Iterable[PortraitGraph]) -> list[bytes]:
    return [f.quantized() for g in graphs if not g.hashed for n in g.nodes for f in n.features]


def secret_encodings(values: Iterable[int]) -> list[bytes]:
    """Wire and raw forms of each secret integer."""
    out = []
    for v in values:
        raw = v.to_bytes(max(1, (v.bit_length() + 7) // 8), "big")
        if len(raw) >= _MIN_SECRET:
            out += [raw, encode_int(v)]
    return out


def scan_transcript(entries: Sequence[TranscriptEntry], *, self_profiles: Sequence[PortraitGraph] = (),
                    photo_graphs: Sequence[PortraitGraph] = (), secrets: Iterable[int] = ()) -> list[Finding]:
    """Self-profile payloads and secrets may never appear; photo-side plain
    payloads may only appear once the photo is published."""
    profile_bytes = plain_payloads(self_profiles)
    photo_bytes = plain_payloads(photo_graphs)
    secret_bytes = secret_encodings(secrets)
    found = []
    for e in entries:
        wire = e.wire
        for pb in profile_bytes:
            if pb in wire:
                found.append(Finding(e.seq, "self-profile payload"))
                break
        if e.phase not in PUBLIC_PHASES:
            for pb in photo_bytes:
                if pb in wire:
                    found.append(Finding(e.seq, "photo payload before sharing"))
                    break
        for sb in secret_bytes:
            if sb in wire:
                found.append(Finding(e.seq, "secret value"))
                break
        env = e.envelope()
        if env.type in (MsgType.PROFILE_UPLOAD,) and env.body[1:2] != b"\x01":
            found.append(Finding(e.seq, "plain profile frame"))
        if env.type == MsgType.PHOTO_UPLOAD and any(not g.hashed for g in decode_photo(env.body)):
            found.append(Finding(e.seq, "plain photo frame"))
    return found
