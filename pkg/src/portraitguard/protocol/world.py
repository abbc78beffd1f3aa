"""Simulation harness: one relay, one cloud, any number of phones."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

from .. import agreement as ga
from ..lsh import DEFAULT_M, DEFAULT_W, generate_family_set
from ..matching import DEFAULT_THETA, DEFAULT_XI, SimilaritySpace
from ..portrait import PortraitGraph
from .geometry import Pose
from .messages import AGREEMENT_TYPES, MsgType
from .parties import (
    CaptureMode, CaptureSession, CloudConfig, CloudService, Intent, UserClient, UserRecord,
)
from .relay import Relay, TranscriptEntry


@dataclass
class ProtocolConfig:
    xi: float = DEFAULT_XI
    theta: float = DEFAULT_THETA
    m: int = DEFAULT_M
    W: float = DEFAULT_W
    N: int = ga.DEFAULT_BITS
    seed: int = 0
    scale: float = 0.35
    hash_scale: float = 0.2

    def __post_init__(self):
        for name in ("xi", "theta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


@dataclass
class SessionStats:
    agreement: int
    setup: int
    profile_uploads: int
    photo_uploads: int
    match_results: int
    agreement_bytes: dict[str, int] = field(default_factory=dict)


class World:
    def __init__(self, config: ProtocolConfig | None = None, params: ga.GroupParams | None = None):
        self.config = config or ProtocolConfig()
        c = self.config
        self.params = params or ga.init_params(c.N, seed=c.seed)
        self.families = generate_family_set(c.seed, c.m, c.W)
        self.relay = Relay()
        cloud_cfg = CloudConfig(c.xi, c.theta, SimilaritySpace.plain(c.scale),
                                SimilaritySpace.hashed(c.m, c.hash_scale), c.seed)
        self.cloud = CloudService(self.params, self.families, cloud_cfg)
        self.relay.attach(self.cloud)
        self.clients: dict[str, UserClient] = {}
        self.poses: dict[str, Pose] = {}
        self._counter = 0

    def add_user(self, user_id: str, intent: Intent | str = Intent.NONE, pose: Pose | None = None,
                 profile: PortraitGraph | None = None, registered: bool = True,
                 fail_round: bool = False) -> UserClient:
        self.cloud.register(UserRecord(user_id, Intent(intent), None, None, registered))
        client = UserClient(user_id, profile, self.config.seed, fail_round)
        self.clients[user_id] = client
        self.relay.attach(client)
        if pose is not None:
            self.move(user_id, pose)
        return client

    def move(self, user_id: str, pose: Pose) -> None:
        self.poses[user_id] = pose
        self.clients[user_id].report_pose(self.relay, pose)
        self.relay.run()

    def set_intent(self, user_id: str, intent: Intent | str) -> None:
        self.cloud.users[user_id].intent = Intent(intent)

    def _session_id(self, photographer: str, photo_id: str) -> bytes:
        self._counter += 1
        key = f"{self.config.seed}/{photographer}/{photo_id}/{self._counter}".encode()
        return hashlib.sha256(key).digest()[:16]

    def capture(self, photographer: str, photo: Sequence[PortraitGraph], photo_id: str = "photo",
                mode: CaptureMode | str = CaptureMode.BASELINE,
                retain: Sequence[int] = ()) -> CaptureSession:
        """Run one capture to completion: directives, sharing and (baseline)
        cloud-side verification. ``retain`` lists photo indices a dishonest
        photographer keeps despite erase directives."""
        mode = CaptureMode(mode)
        pose = self.poses[photographer]
        sid = self._session_id(photographer, photo_id)
        self.clients[photographer].start_capture(self.relay, sid, list(photo), photo_id, mode, pose,
                                                 set(retain))
        self.relay.run()
        self.cloud.on_idle(self.relay)
        self.relay.run()
        return self.cloud.sessions[sid]

    def verify(self, user_id: str, session: CaptureSession) -> str:
        client = self.clients[user_id]
        client.request_verification(self.relay, session.session_id)
        self.relay.run()
        return client.verdicts[session.session_id]["verdict"]

    def expire(self, user_id: str, session: CaptureSession) -> None:
        self.clients[user_id].expire(session.session_id)

    # transcript views ---------------------------------------------------

    def transcript(self) -> list[TranscriptEntry]:
        return list(self.relay.entries)

    def session_entries(self, session: CaptureSession) -> list[TranscriptEntry]:
        return self.relay.for_session(session.session_id)

    def stats(self, session: CaptureSession) -> SessionStats:
        entries = self.session_entries(session)
        agreement = [e for e in entries if e.type in AGREEMENT_TYPES]
        per_user: dict[str, int] = {}
        for e in agreement:
            user = e.src if e.dst == "cloud" else e.dst
            per_user[user] = per_user.get(user, 0) + len(e.envelope().body)
        return SessionStats(
            agreement=len(agreement),
            setup=sum(e.type == MsgType.RING_INVITE for e in entries),
            profile_uploads=sum(e.type == MsgType.PROFILE_UPLOAD for e in entries),
            photo_uploads=sum(e.type == MsgType.PHOTO_UPLOAD for e in entries),
            match_results=sum(e.type == MsgType.DIRECTIVES for e in entries),
            agreement_bytes=per_user,
        )


def run_capture_baseline(world: World, photographer: str, photo: Sequence[PortraitGraph],
                         photo_id: str = "photo", retain: Sequence[int] = ()) -> CaptureSession:
    return world.capture(photographer, photo, photo_id, CaptureMode.BASELINE, retain)


def run_capture_advanced(world: World, photographer: str, photo: Sequence[PortraitGraph],
                         photo_id: str = "photo", retain: Sequence[int] = ()) -> CaptureSession:
    return world.capture(photographer, photo, photo_id, CaptureMode.ADVANCED, retain)


def verify_advanced(world: World, session: CaptureSession, user_id: str) -> str:
    """'violation', 'clean', 'unverifiable' or 'rejected'."""
    return world.verify(user_id, session)
