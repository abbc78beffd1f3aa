"""Scenario configuration and the end-to-end scenario runner."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .protocol.audit import Finding, scan_transcript
from .protocol.geometry import Pose
from .protocol.parties import CaptureMode, CaptureSession, Intent
from .protocol.relay import dump_transcript
from .protocol.world import ProtocolConfig, World
from .synth import NoiseModel, Scene, SyntheticPerson, gen_corpus, gen_scene, noise_from_dict


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RosterEntry:
    user_id: str
    intent: str = "none"
    position: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0
    registered: bool = True
    in_photo: bool = True  # False: in the FOV but occluded
    person: str | None = None  # corpus person id; default assigned in roster order


@dataclass
class ScenarioConfig:
    mode: str = "both"
    photographer: str = "alice"
    roster: list[RosterEntry] = field(default_factory=list)
    bystanders: int = 4
    photos: int = 1
    noise: NoiseModel = field(default_factory=NoiseModel)
    xi: float = 0.5
    theta: float = 0.5
    m: int = 128
    W: float = 3.0
    N: int = 512
    seed: int = 0
    dishonest: list[str] = field(default_factory=list)
    corpus: str | None = None
    out_dir: str = "out"

    def validate(self) -> "ScenarioConfig":
        if self.mode not in ("baseline", "advanced", "both"):
            raise ConfigError("mode", f"unknown mode {self.mode!r}")
        for name in ("xi", "theta"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not 0.0 < v < 1.0:
                raise ConfigError(name, "must lie in (0, 1)")
        if self.m < 1:
            raise ConfigError("m", "must be positive")
        if not self.W > 0:
            raise ConfigError("W", "must be positive")
        if self.N < 16:
            raise ConfigError("N", "must be at least 16 bits")
        if self.photos < 1:
            raise ConfigError("photos", "must be at least 1")
        if self.bystanders < 0:
            raise ConfigError("bystanders", "must be non-negative")
        ids = [r.user_id for r in self.roster]
        if len(set(ids)) != len(ids):
            raise ConfigError("roster", "duplicate user id")
        if self.photographer not in ids:
            raise ConfigError("photographer", f"{self.photographer!r} is not in the roster")
        by_id = {r.user_id: r for r in self.roster}
        for r in self.roster:
            if r.intent not in ("invisible", "tagged", "none"):
                raise ConfigError("roster", f"{r.user_id}: unknown intent {r.intent!r}")
            if r.intent != "none" and not r.registered:
                raise ConfigError("roster", f"{r.user_id}: unregistered users cannot be protected")
        for uid in self.dishonest:
            if uid not in by_id or by_id[uid].intent != "invisible":
                raise ConfigError("dishonest", f"{uid!r} is not an invisible roster user")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise"] = self.noise.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ScenarioConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        for k in d:
            if k not in known:
                raise ConfigError(k, "unknown field")
        try:
            if "roster" in d:
                d["roster"] = [RosterEntry(**{**r, "position": tuple(r.get("position", (0, 0)))})
                               for r in d["roster"]]
        except TypeError as exc:
            raise ConfigError("roster", str(exc)) from None
        if "noise" in d:
            try:
                d["noise"] = noise_from_dict(d["noise"])
            except (TypeError, ValueError) as exc:
                raise ConfigError("noise", str(exc)) from None
        return cls(**d)


def demo_config(**overrides) -> ScenarioConfig:
    """Three invisible users and one tagged user in front of the camera,
    one invisible user behind it, four bystanders."""
    roster = [
        RosterEntry("alice", "none", (0.0, 0.0), 0.0),
        RosterEntry("bob", "invisible", (5.0, 0.5)),
        RosterEntry("carol", "invisible", (8.0, -1.0)),
        RosterEntry("dave", "invisible", (11.0, 1.5)),
        RosterEntry("erin", "tagged", (6.5, -2.0)),
        RosterEntry("frank", "invisible", (-6.0, 0.0)),
    ]
    cfg = ScenarioConfig(roster=roster)
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg.validate()


# ----------------------------------------------------------------------------
# runner


@dataclass
class PhotoReport:
    photo_id: str
    mode: str
    status: str
    directives: list[dict]
    matches: list[dict]
    truth: dict[int, str]
    verification: list[dict]
    stats: dict
    timings: dict[str, float]


@dataclass
class ScenarioResult:
    reports: list[PhotoReport]
    findings: dict[str, list[Finding]]
    worlds: dict[str, World]
    sessions: dict[str, list[CaptureSession]]
    scenes: list[Scene]
    breaches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(self.findings.values()) and not self.breaches

    def directive_summary(self, mode: str) -> list[list[tuple[str, str | None]]]:
        """Per photo: sorted (action, cloud-matched user) pairs."""
        out = []
        for r in self.reports:
            if r.mode == mode:
                out.append(sorted((m["action"], m["user_id"]) for m in r.matches))
        return out


def assign_persons(cfg: ScenarioConfig, persons: Sequence[SyntheticPerson]
                   ) -> tuple[dict[str, SyntheticPerson], list[SyntheticPerson]]:
    pool = {p.person_id: p for p in persons}
    used: set[str] = {r.person for r in cfg.roster if r.person}
    free = [p for p in persons if p.person_id not in used]
    out = {}
    for r in cfg.roster:
        if r.person:
            if r.person not in pool:
                raise ConfigError("roster", f"{r.user_id}: unknown person {r.person!r}")
            out[r.user_id] = pool[r.person]
        else:
            if not free:
                raise ConfigError("roster", "corpus too small for roster")
            out[r.user_id] = free.pop(0)
    if len(free) < cfg.bystanders:
        raise ConfigError("bystanders", "corpus too small")
    return out, free[:cfg.bystanders]


def check_budget(world: World, sess: CaptureSession) -> list[str]:
    """Per-session message budget; empty when within limits."""
    st = world.stats(sess)
    out = []
    tag = f"{sess.photo_id}/{sess.mode.value}"
    if sess.status == "aborted":
        return out
    if st.match_results != 1:
        out.append(f"{tag}: {st.match_results} match results")
    if sess.mode is CaptureMode.ADVANCED and sess.ring is not None:
        n = sess.ring.n
        if st.agreement > 4 * n:
            out.append(f"{tag}: {st.agreement} agreement messages > 4n = {4 * n}")
        if sess.reused_ring and st.agreement:
            out.append(f"{tag}: reused ring sent {st.agreement} agreement messages")
        uploads = st.profile_uploads + st.photo_uploads
        expected = 1 if sess.reused_ring else n
        if uploads != expected or st.photo_uploads != 1:
            out.append(f"{tag}: {uploads} uploads, expected {expected}")
    return out


def _secrets(world: World) -> list[int]:
    vals = []
    for c in world.clients.values():
        vals += [k.a for k in c.rings.values()]
        vals += [k.R for k in c.rings.values() if k.R is not None]
    return vals


def _build_world(cfg: ScenarioConfig, users: Mapping[str, SyntheticPerson]) -> World:
    pc = ProtocolConfig(xi=cfg.xi, theta=cfg.theta, m=cfg.m, W=cfg.W, N=cfg.N, seed=cfg.seed)
    world = World(pc)
    for r in cfg.roster:
        world.add_user(r.user_id, r.intent, Pose(r.position, r.heading), users[r.user_id].graph,
                       r.registered)
    return world


def run_scenario(cfg: ScenarioConfig, persons: Sequence[SyntheticPerson] | None = None,
                 write: bool = False) -> ScenarioResult:
    cfg.validate()
    if persons is None:
        persons = gen_corpus(42, seed=cfg.seed)
    users, bystanders = assign_persons(cfg, persons)
    owner = {users[u].person_id: u for u in users}
    modes = ["baseline", "advanced"] if cfg.mode == "both" else [cfg.mode]
    by_id = {r.user_id: r for r in cfg.roster}
    pose = Pose(by_id[cfg.photographer].position, by_id[cfg.photographer].heading)
    rng = np.random.default_rng(cfg.seed)
    scenes = []
    for t in range(cfg.photos):
        subjects = [(users[r.user_id], r.position) for r in cfg.roster
                    if r.in_photo and r.user_id != cfg.photographer]
        scenes.append(gen_scene(subjects, pose, bystanders, int(rng.integers(2**62)), cfg.noise,
                                photo_id=f"photo-{t}"))
    result = ScenarioResult([], {}, {}, {}, scenes)
    for mode in modes:
        world = _build_world(cfg, users)
        sessions = []
        for scene in scenes:
            retain = [k for k, pid in scene.truth.items() if owner.get(pid) in cfg.dishonest]
            t0 = time.perf_counter()
            before = {u: dict(c.timings) for u, c in world.clients.items()}
            sess = world.capture(cfg.photographer, scene.graphs, scene.photo_id, mode, retain)
            wall = time.perf_counter() - t0
            agreement_time = sum(c.timings["agreement"] - before[u]["agreement"]
                                 for u, c in world.clients.items())
            if mode == "advanced" and sess.shared is not None:
                for uid in sess.in_fov:
                    if world.cloud.users[uid].intent is Intent.INVISIBLE and uid in sess.profiles:
                        world.verify(uid, sess)
            sessions.append(sess)
            result.breaches += check_budget(world, sess)
            truth = {k: owner.get(pid, pid) for k, pid in scene.truth.items()}
            matches = [{"photo_index": k, "user_id": uid, "score": round(float(s), 6),
                        "action": "tag" if world.cloud.users[uid].intent is Intent.TAGGED else "erase",
                        "truth": truth.get(k)} for k, uid, s in sess.matches]
            st = world.stats(sess)
            result.reports.append(PhotoReport(
                scene.photo_id, mode, sess.status, [d.to_record() for d in sess.directives], matches,
                truth, list(sess.verification_log), asdict(st),
                {"wall": wall, "matching": sess.timings.get("matching", 0.0),
                 "agreement": agreement_time}))
        result.worlds[mode] = world
        result.sessions[mode] = sessions
        if mode == "advanced":
            adv = [e for e in world.relay.cloud_visible()]
            result.findings[mode] = scan_transcript(
                adv, self_profiles=[p.graph for p in users.values()],
                photo_graphs=[g for s in scenes for g in s.graphs], secrets=_secrets(world))
    if write:
        write_outputs(cfg, result)
    return result


def write_outputs(cfg: ScenarioConfig, result: ScenarioResult) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for mode, world in result.worlds.items():
        dump_transcript(world.transcript(), out / f"transcript-{mode}.jsonl")
    lines = ["photo_id,mode,photo_index,action,user_id,score,truth"]
    for r in result.reports:
        for m in r.matches:
            lines.append(f"{r.photo_id},{r.mode},{m['photo_index']},{m['action']},{m['user_id']},"
                         f"{m['score']:.6f},{m['truth'] or ''}")
    (out / "directives.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    report = {"config": cfg.to_dict(), "photos": [asdict(r) for r in result.reports],
              "findings": {k: [asdict(f) for f in v] for k, v in result.findings.items()}}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=str) + "\n",
                                     encoding="utf-8")
    return out


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON: {exc}") from None
    return ScenarioConfig.from_dict(data)

