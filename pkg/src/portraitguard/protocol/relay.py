"""In-process message bus with per-channel visibility and a replayable transcript.

Every channel connects one user to the cloud; there are no user-to-user
links. A party sees exactly the entries on channels it terminates.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

from .messages import AGREEMENT_TYPES, Envelope, MsgType

CLOUD = "cloud"

PHASES = {
    MsgType.POSE_REPORT: "location",
    MsgType.CAPTURE_REQUEST: "capture",
    MsgType.CAPTURE_ACK: "capture",
    MsgType.RING_INVITE: "setup",
    MsgType.PROFILE_REQUEST: "upload",
    MsgType.PROFILE_UPLOAD: "upload",
    MsgType.PHOTO_UPLOAD: "upload",
    MsgType.DIRECTIVES: "match",
    MsgType.PHOTO_SHARE: "share",
    MsgType.ABORT: "abort",
    MsgType.VERIFY_REQUEST: "verify",
    MsgType.VERIFY_VECTORS: "verify",
    MsgType.VERIFY_RESPONSE: "verify",
    MsgType.VERDICT: "verify",
}
PHASES.update({t: "agreement" for t in AGREEMENT_TYPES})


class Party(Protocol):
    name: str

    def receive(self, env: Envelope, relay: "Relay") -> None: ...


@dataclass(frozen=True)
class TranscriptEntry:
    seq: int
    phase: str
    src: str
    dst: str
    wire: bytes

    def envelope(self) -> Envelope:
        return Envelope.decode(self.wire)

    @property
    def type(self) -> MsgType:
        return self.envelope().type

    def to_record(self) -> dict:
        env = self.envelope()
        return {
            "seq": self.seq, "phase": self.phase, "src": self.src, "dst": self.dst,
            "type": env.type.name, "session": env.session.hex(), "bytes": len(self.wire),
            "wire": self.wire.hex(),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TranscriptEntry":
        return cls(int(rec["seq"]), rec["phase"], rec["src"], rec["dst"], bytes.fromhex(rec["wire"]))


class Relay:
    def __init__(self):
        self.parties: dict[str, Party] = {}
        self.entries: list[TranscriptEntry] = []
        self._queue: deque[TranscriptEntry] = deque()

    def attach(self, party: Party) -> None:
        if party.name in self.parties:
            raise ValueError(f"duplicate party {party.name}")
        self.parties[party.name] = party

    def send(self, src: str, dst: str, env: Envelope) -> TranscriptEntry:
        if CLOUD not in (src, dst) or src == dst:
            raise ValueError(f"no channel between {src} and {dst}")
        if dst not in self.parties:
            raise KeyError(f"unknown party {dst}")
        entry = TranscriptEntry(len(self.entries), PHASES[env.type], src, dst, env.encode())
        self.entries.append(entry)
        self._queue.append(entry)
        return entry

    def run(self, limit: int = 1_000_000) -> int:
        """Deliver queued messages FIFO until the bus is quiet."""
        delivered = 0
        while self._queue:
            if delivered >= limit:
                raise RuntimeError("message limit exceeded")
            entry = self._queue.popleft()
            self.parties[entry.dst].receive(entry.envelope(), self)
            delivered += 1
        return delivered

    def visible_to(self, name: str) -> list[TranscriptEntry]:
        return [e for e in self.entries if name in (e.src, e.dst)]

    def cloud_visible(self) -> list[TranscriptEntry]:
        return self.visible_to(CLOUD)

    def for_session(self, session: bytes) -> list[TranscriptEntry]:
        return [e for e in self.entries if e.wire[:16] == session]


def dump_transcript(entries: Iterable[TranscriptEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e.to_record(), sort_keys=True) + "\n")


def load_transcript(path: str | Path) -> list[TranscriptEntry]:
    with open(path, encoding="utf-8") as fh:
        return [TranscriptEntry.from_record(json.loads(line)) for line in fh if line.strip()]


def count_types(entries: Iterable[TranscriptEntry]) -> dict[MsgType, int]:
    out: dict[MsgType, int] = {}
    for e in entries:
        out[e.type] = out.get(e.type, 0) + 1
    return out
