"""Client and cloud state machines for both capture workflows.

Clients are single-threaded: every reaction happens inside ``receive``.
The cloud keeps one actor state per capture session, keyed by session id,
plus one agreement ring per photographer so a later photo with unchanged
membership can reuse the previous ring.
"""
from __future__ import annotations

import enum
import random
import time
from dataclasses import dataclass, field

from .. import agreement as ga
from ..lsh import FamilySet, family_set_from_message
from ..matching import (
    DEFAULT_THETA, DEFAULT_XI, SimilaritySpace, match_profiles, profile_similarity,
)
from ..portrait import (
    HashedFeature, HashedPortraitGraph, PortraitGraph, PortraitNode, deserialize_profile,
    serialize_profile, strip_regions,
)
from ..transform import transform_codes, transform_graph
from .geometry import Pose, in_fov
from .messages import (
    Envelope, MsgType, decode_codes, decode_neighbors, decode_photo, decode_round_all,
    decode_vectors, encode_codes, encode_neighbors, encode_photo, encode_round_all,
    encode_vectors, parse_text, text_body,
)
from .relay import CLOUD, Relay


class Intent(str, enum.Enum):
    INVISIBLE = "invisible"
    TAGGED = "tagged"
    NONE = "none"


class CaptureMode(str, enum.Enum):
    BASELINE = "baseline"
    ADVANCED = "advanced"


class ProtocolError(RuntimeError):
    pass


@dataclass
class UserRecord:
    user_id: str
    intent: Intent
    pose: Pose | None = None
    profile: PortraitGraph | None = None
    registered: bool = True

    def __post_init__(self):
        self.intent = Intent(self.intent)
        if self.intent is not Intent.NONE and not self.registered:
            raise ValueError(f"{self.user_id}: only registered users can ask for protection")

    @property
    def protected(self) -> bool:
        return self.registered and self.intent is not Intent.NONE


@dataclass(frozen=True)
class ConcealmentDirective:
    region_refs: tuple[str, ...]
    action: str  # "erase" or "tag"
    user_id: str | None = None

    def __post_init__(self):
        if self.action not in ("erase", "tag"):
            raise ValueError(f"unknown action {self.action!r}")
        if self.action == "tag" and not self.user_id:
            raise ValueError("tag directive needs a user id")

    def to_record(self) -> dict:
        return {"region_refs": list(self.region_refs), "action": self.action, "user_id": self.user_id}

    @classmethod
    def from_record(cls, rec: dict) -> "ConcealmentDirective":
        return cls(tuple(rec["region_refs"]), rec["action"], rec.get("user_id"))


@dataclass
class CaptureSession:
    session_id: bytes
    photographer: str
    mode: CaptureMode
    photo_id: str = ""
    in_fov: list[str] = field(default_factory=list)
    photo: list[PortraitGraph] = field(default_factory=list)
    profiles: dict[str, PortraitGraph] = field(default_factory=dict)
    ring: ga.RingSession | None = None
    recomputed: set[str] = field(default_factory=set)
    reused_ring: bool = False
    matches: list[tuple[int, str, float]] = field(default_factory=list)
    directives: list[ConcealmentDirective] = field(default_factory=list)
    verification_log: list[dict] = field(default_factory=list)
    shared: list[PortraitGraph] | None = None
    status: str = "pending"
    abort_reason: str | None = None
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def violations(self) -> list[tuple[str, str]]:
        return [(r["photographer"], r["user"]) for r in self.verification_log
                if r["verdict"] == "violation"]


def _pose_record(p: Pose) -> dict:
    return {"position": list(p.position), "heading": p.heading, "fov_angle": p.fov_angle,
            "range": p.range}


def _pose_from(rec: dict) -> Pose:
    return Pose(tuple(rec["position"]), rec["heading"], rec["fov_angle"], rec["range"])


def proximity_check(photographer: Pose, users: list[UserRecord]) -> list[str]:
    """Ids of users whose last reported position lies in the photographer's FOV."""
    return [u.user_id for u in users if u.pose is not None and in_fov(photographer, u.pose.position)]


def verify_baseline(shared: list[PortraitGraph], cached: list[tuple[str, PortraitGraph]],
                    theta: float, space: SimilaritySpace, photographer: str = "",
                    xi: float = DEFAULT_XI) -> list[tuple[str, str]]:
    """(photographer, user) for every cached profile that still matches a
    shared-photo person at score >= theta."""
    out = []
    for uid, prof in cached:
        if any(profile_similarity(prof, g, space, xi) >= theta for g in shared):
            out.append((photographer, uid))
    return out


# ----------------------------------------------------------------------------
# client


@dataclass
class _RingKeys:
    a: int
    b: int
    i: int = 0
    n: int = 0
    b_prev: int | None = None
    b_next: int | None = None
    c: int | None = None
    R: int | None = None


class UserClient:
    """A phone: neighbour, photographer, or both over time."""

    def __init__(self, user_id: str, profile: PortraitGraph | None, seed: int = 0,
                 fail_round: bool = False):
        self.name = user_id
        self.profile = profile
        self.rng = random.Random(f"{seed}/{user_id}")
        self.fail_round = fail_round
        self.params: ga.GroupParams | None = None
        self.families: FamilySet | None = None
        self.rings: dict[str, _RingKeys] = {}
        self.session_ring: dict[bytes, str] = {}
        self.keys: dict[bytes, int] = {}  # R retained per session until expiry
        self.photos: dict[bytes, tuple[list[PortraitGraph], set[int], str]] = {}
        self.modes: dict[bytes, CaptureMode] = {}
        self.directives: dict[bytes, list[ConcealmentDirective]] = {}
        self.shared: dict[bytes, list[PortraitGraph]] = {}
        self.aborted: dict[bytes, str] = {}
        self.verdicts: dict[bytes, dict] = {}
        self.timings: dict[str, float] = {"agreement": 0.0, "transform": 0.0}

    # photographer side -------------------------------------------------

    def start_capture(self, relay: Relay, session: bytes, photo: list[PortraitGraph], photo_id: str,
                      mode: CaptureMode, pose: Pose, retain: set[int] = frozenset()) -> None:
        self.photos[session] = (list(photo), set(retain), photo_id)
        self.modes[session] = mode
        body = text_body({"photo_id": photo_id, "mode": mode.value, "pose": _pose_record(pose)})
        relay.send(self.name, CLOUD, Envelope(session, self.name, MsgType.CAPTURE_REQUEST, body))

    def report_pose(self, relay: Relay, pose: Pose) -> None:
        body = text_body(_pose_record(pose))
        relay.send(self.name, CLOUD, Envelope(bytes(16), self.name, MsgType.POSE_REPORT, body))

    def request_verification(self, relay: Relay, session: bytes) -> None:
        relay.send(self.name, CLOUD, Envelope(session, self.name, MsgType.VERIFY_REQUEST))

    def expire(self, session: bytes) -> None:
        self.keys.pop(session, None)

    def _send(self, relay: Relay, session: bytes, mtype: MsgType, body: bytes = b"") -> None:
        relay.send(self.name, CLOUD, Envelope(session, self.name, mtype, body))

    def _upload_photo(self, relay: Relay, session: bytes, R: int | None) -> None:
        photo = self.photos[session][0]
        if R is not None:
            t0 = time.perf_counter()
            photo = [transform_graph(g, R, self.families) for g in photo]
            self.timings["transform"] += time.perf_counter() - t0
        frames = [strip_owner(g) for g in photo]
        self._send(relay, session, MsgType.PHOTO_UPLOAD, encode_photo(frames))

    def _apply(self, relay: Relay, session: bytes, directives: list[ConcealmentDirective]) -> None:
        photo, retain, _ = self.photos[session]
        self.directives[session] = directives
        by_ref = {n.region_ref: k for k, g in enumerate(photo) for n in g.nodes}
        erased = set()
        for d in directives:
            if d.action != "erase":
                continue
            ks = {by_ref[r] for r in d.region_refs if r in by_ref}
            erased |= ks - retain
        shared = [g for k, g in enumerate(photo) if k not in erased]
        self.shared[session] = shared
        self._send(relay, session, MsgType.PHOTO_SHARE,
                   encode_photo([strip_regions(strip_owner(g)) for g in shared], with_regions=False))

    # neighbour side ----------------------------------------------------

    def _upload_profile(self, relay: Relay, session: bytes, R: int | None) -> None:
        if self.profile is None:
            raise ProtocolError(f"{self.name} has no self profile")
        g = self.profile
        if R is not None:
            t0 = time.perf_counter()
            g = transform_graph(g, R, self.families)
            self.timings["transform"] += time.perf_counter() - t0
        self._send(relay, session, MsgType.PROFILE_UPLOAD, serialize_profile(strip_owner(g)))

    # dispatch ----------------------------------------------------------

    def receive(self, env: Envelope, relay: Relay) -> None:
        s, t = env.session, env.type
        if t == MsgType.CAPTURE_ACK:
            info = parse_text(env.body)
            if not info["needed"]:
                return
            if self.modes[s] is CaptureMode.BASELINE:
                self._upload_photo(relay, s, None)
            else:
                self.session_ring[s] = info["ring"]
                if info["reuse"]:
                    R = self.rings[info["ring"]].R
                    self.keys[s] = R
                    self._upload_photo(relay, s, R)
        elif t == MsgType.PROFILE_REQUEST:
            self._upload_profile(relay, s, None)
        elif t == MsgType.RING_INVITE:
            info = parse_text(env.body)
            self.session_ring[s] = info["ring"]
            if not info["fresh"]:
                keys = self.rings.get(info["ring"])
                if keys is not None and keys.R is not None:
                    self.keys[s] = keys.R
                return
            self.params = ga.GroupParams.from_message(bytes.fromhex(info["params"]))
            self.families = family_set_from_message(info["families"])
            t0 = time.perf_counter()
            a, b = ga.keygen(self.params, self.rng)
            self.timings["agreement"] += time.perf_counter() - t0
            self.rings[info["ring"]] = _RingKeys(a, b, info["position"])
            self._send(relay, s, MsgType.PUBLIC, ga.encode_public(info["position"], b))
        elif t == MsgType.NEIGHBORS:
            if self.fail_round:
                return
            keys = self.rings[self.session_ring[s]]
            n, i, (_, b_prev), (_, b_next) = decode_neighbors(env.body)
            t0 = time.perf_counter()
            keys.n, keys.i, keys.b_prev, keys.b_next = n, i, b_prev, b_next
            keys.c = ga.compute_c(self.params, keys.a, b_prev, b_next)
            self.timings["agreement"] += time.perf_counter() - t0
            self._send(relay, s, MsgType.ROUND, ga.encode_round(i, keys.c))
        elif t == MsgType.ROUND_ALL:
            keys = self.rings[self.session_ring[s]]
            n, i, others = decode_round_all(env.body)
            cs: list[int | None] = [None] * n
            for j, c in others:
                cs[j] = c
            cs[i] = keys.c
            if any(c is None for c in cs):
                raise ProtocolError(f"{self.name}: incomplete c list")
            t0 = time.perf_counter()
            keys.n, keys.i = n, i
            keys.R = ga.compute_R(self.params, i, n, keys.a, keys.b_prev, cs)
            self.timings["agreement"] += time.perf_counter() - t0
            self.keys[s] = keys.R
            if s in self.photos:
                self._upload_photo(relay, s, keys.R)
            else:
                self._upload_profile(relay, s, keys.R)
        elif t == MsgType.DIRECTIVES:
            recs = parse_text(env.body)
            self._apply(relay, s, [ConcealmentDirective.from_record(r) for r in recs])
        elif t == MsgType.ABORT:
            self.aborted[s] = parse_text(env.body)["reason"]
        elif t == MsgType.VERIFY_VECTORS:
            R = self.keys.get(s)
            if R is None:
                self._send(relay, s, MsgType.VERIFY_RESPONSE, b"\x00")
                return
            codes = transform_codes(decode_vectors(env.body), R, self.families)
            self._send(relay, s, MsgType.VERIFY_RESPONSE, b"\x01" + encode_codes(codes))
        elif t == MsgType.VERDICT:
            self.verdicts[s] = parse_text(env.body)
        else:
            raise ProtocolError(f"{self.name}: unexpected {t.name}")


def strip_owner(g: PortraitGraph) -> PortraitGraph:
    if isinstance(g, HashedPortraitGraph):
        return HashedPortraitGraph(g.nodes, g.edges, None, None)
    return PortraitGraph(g.nodes, g.edges, None)


# ----------------------------------------------------------------------------
# cloud


@dataclass
class CloudConfig:
    xi: float = DEFAULT_XI
    theta: float = DEFAULT_THETA
    plain: SimilaritySpace = field(default_factory=SimilaritySpace.plain)
    hashed: SimilaritySpace = field(default_factory=SimilaritySpace.hashed)
    seed: int = 0


@dataclass
class _Pending:
    session: CaptureSession
    pose: Pose
    expected: set[str] = field(default_factory=set)
    invited: set[str] = field(default_factory=set)
    stale: set[str] = field(default_factory=set)


class CloudService:
    """Registry, proximity, ring relay, matching and verification.

    Never holds a private exponent or a ring's R.
    """

    name = CLOUD

    def __init__(self, params: ga.GroupParams, families: FamilySet, config: CloudConfig | None = None):
        self.params = params
        self.families = families
        self.config = config or CloudConfig()
        self.users: dict[str, UserRecord] = {}
        self.sessions: dict[bytes, CaptureSession] = {}
        self._pending: dict[bytes, _Pending] = {}
        self.rings: dict[str, ga.RingSession] = {}
        self._ring_profiles: dict[str, dict[str, PortraitGraph]] = {}
        self._verify: dict[tuple[bytes, str], list[tuple[int, int, int]]] = {}
        self.rng = random.Random(f"cloud/{self.config.seed}")

    def register(self, record: UserRecord) -> None:
        self.users[record.user_id] = record

    def _send(self, relay: Relay, dst: str, session: bytes, mtype: MsgType, body: bytes = b"") -> None:
        relay.send(CLOUD, dst, Envelope(session, CLOUD, mtype, body))

    # capture -----------------------------------------------------------

    def _on_capture(self, env: Envelope, relay: Relay) -> None:
        info = parse_text(env.body)
        who = env.sender
        rec = self.users.get(who)
        if rec is None or not rec.registered:
            raise ProtocolError(f"capture from unregistered user {who}")
        pose = _pose_from(info["pose"])
        mode = CaptureMode(info["mode"])
        cands = [u for u in self.users.values() if u.user_id != who and u.protected]
        in_fov_ids = sorted(proximity_check(pose, cands))
        sess = CaptureSession(env.session, who, mode, info["photo_id"], in_fov_ids)
        self.sessions[env.session] = sess
        pend = _Pending(sess, pose)
        self._pending[env.session] = pend
        if not in_fov_ids:
            self._send(relay, who, env.session, MsgType.CAPTURE_ACK, text_body({"needed": False}))
            self._finish_match(relay, pend)
            return
        if mode is CaptureMode.BASELINE:
            pend.expected = set(in_fov_ids)
            self._send(relay, who, env.session, MsgType.CAPTURE_ACK, text_body({"needed": True}))
            for uid in in_fov_ids:
                self._send(relay, uid, env.session, MsgType.PROFILE_REQUEST)
            return
        self._start_ring(relay, pend, who, in_fov_ids)

    def _start_ring(self, relay: Relay, pend: _Pending, who: str, members: list[str]) -> None:
        sess = pend.session
        rid = f"ring/{who}"
        desired = [who] + members
        ring = self.rings.get(rid)
        if ring is not None and set(ring.members) == set(desired) and ring.complete():
            sess.ring, sess.reused_ring = ring, True
            sess.profiles = dict(self._ring_profiles.get(rid, {}))
            pend.expected = {who}
            self._send(relay, who, sess.session_id, MsgType.CAPTURE_ACK,
                       text_body({"needed": True, "ring": rid, "reuse": True}))
            for m in members:
                self._send(relay, m, sess.session_id, MsgType.RING_INVITE,
                           text_body({"ring": rid, "position": ring.position(m), "fresh": False}))
            return
        if ring is None or not ring.complete():
            ring = ga.RingSession(self.params, desired)
            stale, added = set(desired), list(desired)
        else:
            stale, added = set(), [m for m in desired if m not in ring.members]
            for m in added:
                stale |= ga.ring_update(ring, insert=(m, ring.n))
            for m in [m for m in ring.members if m not in desired]:
                stale |= ga.ring_update(ring, remove=m)
                self._ring_profiles.get(rid, {}).pop(m, None)
            stale &= set(ring.members)
        self.rings[rid] = ring
        self._ring_profiles[rid] = {}
        sess.ring, sess.recomputed = ring, set(stale)
        pend.stale, pend.invited = set(stale), set(added)
        pend.expected = set(desired)
        self._send(relay, who, sess.session_id, MsgType.CAPTURE_ACK,
                   text_body({"needed": True, "ring": rid, "reuse": False}))
        invite = {"ring": rid, "params": self.params.to_message().hex(),
                  "families": self.families.message()}
        for m in ring.members:
            fresh = m in added
            body = dict(invite, position=ring.position(m), fresh=fresh) if fresh else \
                {"ring": rid, "position": ring.position(m), "fresh": False}
            self._send(relay, m, sess.session_id, MsgType.RING_INVITE, text_body(body))
        if not added:
            self._send_neighbors(relay, pend)

    def _send_neighbors(self, relay: Relay, pend: _Pending) -> None:
        ring = pend.session.ring
        for m in ring.members:
            if m not in pend.stale:
                continue
            i = ring.position(m)
            prev_m, next_m = ring.neighbors(m)
            body = encode_neighbors(ring.n, i, ((i - 1) % ring.n, ring.publics[prev_m]),
                                    ((i + 1) % ring.n, ring.publics[next_m]))
            self._send(relay, m, pend.session.session_id, MsgType.NEIGHBORS, body)

    def _on_public(self, env: Envelope, relay: Relay) -> None:
        pend = self._pending[env.session]
        ring = pend.session.ring
        [(_, b)] = ga.decode_indexed(env.body)
        if not ga.check_public(self.params, b):
            self._abort(relay, pend, f"invalid public value from {env.sender}")
            return
        ring.publics[env.sender] = b
        pend.invited.discard(env.sender)
        if not pend.invited:
            self._send_neighbors(relay, pend)

    def _on_round(self, env: Envelope, relay: Relay) -> None:
        pend = self._pending[env.session]
        ring = pend.session.ring
        [(_, c)] = ga.decode_indexed(env.body)
        ring.cs[env.sender] = c
        if not ring.complete():
            return
        if not ga.c_product_ok(self.params, ring.c_list()):
            self._abort(relay, pend, "c values inconsistent")
            return
        for m in ring.members:
            i = ring.position(m)
            others = [(j, ring.cs[o]) for j, o in enumerate(ring.members) if o != m]
            self._send(relay, m, pend.session.session_id, MsgType.ROUND_ALL,
                       encode_round_all(ring.n, i, others))

    def _on_profile(self, env: Envelope, relay: Relay) -> None:
        pend = self._pending[env.session]
        sess = pend.session
        hashed = sess.mode is CaptureMode.ADVANCED
        m = self.config.hashed.m if hashed else None
        g = deserialize_profile(env.body, owner_ref=env.sender, m=m)
        if g.hashed != hashed:
            raise ProtocolError(f"{env.sender}: profile mode does not match session mode")
        sess.profiles[env.sender] = g
        if hashed:
            self._ring_profiles[f"ring/{sess.photographer}"][env.sender] = g
        pend.expected.discard(env.sender)
        if not pend.expected:
            self._finish_match(relay, pend)

    def _on_photo(self, env: Envelope, relay: Relay) -> None:
        pend = self._pending[env.session]
        sess = pend.session
        hashed = sess.mode is CaptureMode.ADVANCED
        sess.photo = decode_photo(env.body, m=self.config.hashed.m if hashed else None)
        if any(g.hashed != hashed for g in sess.photo):
            raise ProtocolError("photo mode does not match session mode")
        pend.expected.discard(env.sender)
        if not pend.expected:
            self._finish_match(relay, pend)

    def _finish_match(self, relay: Relay, pend: _Pending) -> None:
        sess = pend.session
        space = self.config.hashed if sess.mode is CaptureMode.ADVANCED else self.config.plain
        cands = [(uid, sess.profiles[uid]) for uid in sess.in_fov if uid in sess.profiles]
        t0 = time.perf_counter()
        sess.matches = match_profiles(cands, sess.photo, space, self.config.xi, self.config.theta)
        sess.timings["matching"] = time.perf_counter() - t0
        for k, uid, _ in sess.matches:
            refs = tuple(n.region_ref for n in sess.photo[k].nodes if n.region_ref is not None)
            if self.users[uid].intent is Intent.TAGGED:
                sess.directives.append(ConcealmentDirective(refs, "tag", uid))
            else:
                sess.directives.append(ConcealmentDirective(refs, "erase"))
        self._send(relay, sess.photographer, sess.session_id, MsgType.DIRECTIVES,
                   text_body([d.to_record() for d in sess.directives]))
        sess.status = "matched"
        self._pending.pop(sess.session_id, None)

    def _abort(self, relay: Relay, pend: _Pending, reason: str) -> None:
        sess = pend.session
        sess.status, sess.abort_reason = "aborted", reason
        if sess.ring is not None and sess.mode is CaptureMode.ADVANCED:
            self.rings.pop(f"ring/{sess.photographer}", None)
        self._send(relay, sess.photographer, sess.session_id, MsgType.ABORT,
                   text_body({"reason": reason}))
        self._pending.pop(sess.session_id, None)

    def on_idle(self, relay: Relay) -> None:
        """Timeout sweep: any session still waiting once the bus is quiet
        has lost a message and is aborted."""
        for pend in list(self._pending.values()):
            ring = pend.session.ring
            if ring is not None and not ring.complete():
                missing = [m for m in ring.members if m not in ring.cs]
                self._abort(relay, pend, "missing c from " + ",".join(missing))
            else:
                self._abort(relay, pend, "missing upload from " + ",".join(sorted(pend.expected)))

    # share and verification ---------------------------------------------

    def _cached(self, sess: CaptureSession) -> list[tuple[str, PortraitGraph]]:
        return [(uid, sess.profiles[uid]) for uid in sess.in_fov
                if uid in sess.profiles and self.users[uid].intent is Intent.INVISIBLE]

    def _on_share(self, env: Envelope, relay: Relay) -> None:
        sess = self.sessions[env.session]
        sess.shared = decode_photo(env.body)
        sess.status = "complete"
        if sess.mode is CaptureMode.BASELINE:
            for who, uid in verify_baseline(sess.shared, self._cached(sess), self.config.theta,
                                            self.config.plain, sess.photographer, self.config.xi):
                sess.verification_log.append(
                    {"variant": "baseline", "photographer": who, "user": uid, "verdict": "violation"})

    def _on_verify_request(self, env: Envelope, relay: Relay) -> None:
        sess = self.sessions.get(env.session)
        uid = env.sender
        if sess is None or sess.shared is None or uid not in dict(self._cached(sess)):
            self._verdict(relay, env.session, sess, uid, "rejected")
            return
        refs = [(k, j, f) for k, g in enumerate(sess.shared)
                for j, n in enumerate(g.nodes) for f in range(len(n.features))]
        order = list(range(len(refs)))
        self.rng.shuffle(order)
        shuffled = [refs[t] for t in order]
        self._verify[(env.session, uid)] = shuffled
        vectors = [sess.shared[k].nodes[j].features[f] for k, j, f in shuffled]
        self._send(relay, uid, env.session, MsgType.VERIFY_VECTORS, encode_vectors(vectors))

    def _on_verify_response(self, env: Envelope, relay: Relay) -> None:
        sess = self.sessions[env.session]
        uid = env.sender
        shuffled = self._verify.pop((env.session, uid))
        if env.body[:1] != b"\x01":
            self._verdict(relay, env.session, sess, uid, "unverifiable")
            return
        codes = decode_codes(env.body[1:])
        hashed = rebuild_hashed(sess.shared, shuffled, codes)
        prof = sess.profiles[uid]
        hit = any(profile_similarity(prof, g, self.config.hashed, self.config.xi) >= self.config.theta
                  for g in hashed)
        self._verdict(relay, env.session, sess, uid, "violation" if hit else "clean")

    def _verdict(self, relay: Relay, session: bytes, sess: CaptureSession | None, uid: str,
                 verdict: str) -> None:
        rec = {"variant": "advanced", "photographer": sess.photographer if sess else None,
               "user": uid, "verdict": verdict}
        if sess is not None:
            sess.verification_log.append(rec)
        self._send(relay, uid, session, MsgType.VERDICT, text_body(rec))

    def _on_pose(self, env: Envelope, relay: Relay) -> None:
        rec = self.users.get(env.sender)
        if rec is not None:
            rec.pose = _pose_from(parse_text(env.body))

    _HANDLERS = {
        MsgType.POSE_REPORT: _on_pose,
        MsgType.CAPTURE_REQUEST: _on_capture,
        MsgType.PUBLIC: _on_public,
        MsgType.ROUND: _on_round,
        MsgType.PROFILE_UPLOAD: _on_profile,
        MsgType.PHOTO_UPLOAD: _on_photo,
        MsgType.PHOTO_SHARE: _on_share,
        MsgType.VERIFY_REQUEST: _on_verify_request,
        MsgType.VERIFY_RESPONSE: _on_verify_response,
    }

    def receive(self, env: Envelope, relay: Relay) -> None:
        handler = self._HANDLERS.get(env.type)
        if handler is None:
            raise ProtocolError(f"cloud: unexpected {env.type.name}")
        handler(self, env, relay)


def rebuild_hashed(shared: list[PortraitGraph], order: list[tuple[int, int, int]],
                   codes) -> list[HashedPortraitGraph]:
    """Put returned codes back into their graphs; order-independent by construction."""
    slots: dict[tuple[int, int, int], object] = dict(zip(order, codes))
    out = []
    for k, g in enumerate(shared):
        nodes = []
        for j, n in enumerate(g.nodes):
            feats = tuple(HashedFeature(f.kind, slots[(k, j, t)]) for t, f in enumerate(n.features))
            nodes.append(PortraitNode(n.id, n.label, feats))
        out.append(HashedPortraitGraph(tuple(nodes), g.edges, None, None))
    return out
