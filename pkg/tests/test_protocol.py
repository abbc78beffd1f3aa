import math

import pytest

from portraitguard.agreement import GroupParams, init_params
from portraitguard.lsh import HashCode
from portraitguard.matching import SimilaritySpace
from portraitguard.portrait import serialize_profile
from portraitguard.protocol.audit import plain_payloads, scan_transcript
from portraitguard.protocol.geometry import Pose, in_fov
from portraitguard.protocol.messages import (
    Envelope, MsgType, decode_codes, decode_photo, decode_vectors, encode_codes, encode_photo,
    encode_vectors,
)
from portraitguard.protocol.parties import (
    CaptureMode, ConcealmentDirective, Intent, UserRecord, proximity_check, verify_baseline,
)
from portraitguard.protocol.relay import Relay, dump_transcript, load_transcript
from portraitguard.protocol.world import ProtocolConfig, World
from portraitguard.synth import NoiseModel, gen_corpus, gen_scene

PARAMS = init_params(96, seed=5)
PEOPLE = gen_corpus(16, seed=11)
AHEAD = {"bob": (5.0, 0.5), "carol": (8.0, -1.0), "dave": (11.0, 1.5), "erin": (6.5, -2.0)}


def make_world(intents=None, fail=(), seed=0):
    if intents is None:
        intents = {"bob": "invisible", "carol": "invisible", "dave": "invisible",
                   "erin": "tagged"}
    w = World(ProtocolConfig(N=96, seed=seed), params=PARAMS)
    w.add_user("alice", "none", Pose((0.0, 0.0)), PEOPLE[0].graph)
    for k, (uid, pos) in enumerate(AHEAD.items()):
        w.add_user(uid, intents.get(uid, "none"), Pose(pos), PEOPLE[k + 1].graph,
                   fail_round=uid in fail)
    w.add_user("frank", "invisible", Pose((-6.0, 0.0)), PEOPLE[5].graph)
    return w


def scene_for(users=("bob", "carol", "dave", "erin"), bystanders=4, seed=3, photo_id="p"):
    idx = {u: k + 1 for k, u in enumerate(AHEAD)}
    subjects = [(PEOPLE[idx[u]], AHEAD[u]) for u in users]
    return gen_scene(subjects, Pose((0.0, 0.0)), PEOPLE[8:8 + bystanders], seed=seed,
                     photo_id=photo_id)


def owner_index(scene, uid):
    return scene.index_of(PEOPLE[list(AHEAD).index(uid) + 1].person_id)


def advanced_secrets(w):
    vals = []
    for c in w.clients.values():
        vals += [k.a for k in c.rings.values()] + [k.R for k in c.rings.values() if k.R]
    return vals


def assert_confidential(w, scenes):
    found = scan_transcript(w.relay.cloud_visible(), self_profiles=[p.graph for p in PEOPLE[:6]],
                            photo_graphs=[g for s in scenes for g in s.graphs],
                            secrets=advanced_secrets(w))
    assert found == []


# ----------------------------------------------------------------------------
# geometry and proximity


def test_fov_examples():
    pose = Pose((0.0, 0.0), heading=0.0)
    assert in_fov(pose, (5.0, 0.0))
    assert not in_fov(pose, (-5.0, 0.0))
    assert in_fov(pose, (15.0, 0.0))
    assert not in_fov(pose, (15.0 + 1e-6, 0.0))
    edge = (10 * math.cos(math.pi / 6), 10 * math.sin(math.pi / 6))
    assert in_fov(pose, edge)


def test_pose_invariants():
    with pytest.raises(ValueError):
        Pose((0, 0), fov_angle=0.0)
    with pytest.raises(ValueError):
        Pose((0, 0), range=0.0)


def test_proximity_check():
    users = [UserRecord("a", "invisible", Pose((3, 0))), UserRecord("b", "invisible", Pose((-3, 0))),
             UserRecord("c", "tagged", None)]
    assert proximity_check(Pose((0, 0)), users) == ["a"]


def test_unregistered_cannot_be_protected():
    with pytest.raises(ValueError):
        UserRecord("x", Intent.INVISIBLE, registered=False)
    assert not UserRecord("y", Intent.NONE, registered=False).protected


# ----------------------------------------------------------------------------
# wire formats


def test_envelope_roundtrip():
    env = Envelope(bytes(range(16)), "bob", MsgType.ROUND, b"\x00\x01payload")
    wire = env.encode()
    assert len(wire) == 16 + 1 + 3 + 1 + 4 + 9
    assert Envelope.decode(wire) == env
    with pytest.raises(ValueError):
        Envelope(b"short", "bob", MsgType.ROUND).encode()


def test_photo_and_vector_codecs():
    scene = scene_for(bystanders=1)
    back = decode_photo(encode_photo(scene.graphs))
    assert [serialize_profile(g) for g in back] == [serialize_profile(g) for g in scene.graphs]
    assert [[n.region_ref for n in g.nodes] for g in back] == \
        [[n.region_ref for n in g.nodes] for g in scene.graphs]
    vecs = [f for n in scene.graphs[0].nodes for f in n.features]
    out = decode_vectors(encode_vectors(vecs))
    assert [v.quantized() for v in out] == [v.quantized() for v in vecs]
    codes = [HashCode.from_string("10" * 64), HashCode.from_string("1" * 128)]
    assert decode_codes(encode_codes(codes)) == codes


def test_directive_record_roundtrip():
    d = ConcealmentDirective(("p/p1/r1", "p/p1/r2"), "tag", "erin")
    assert ConcealmentDirective.from_record(d.to_record()) == d
    with pytest.raises(ValueError):
        ConcealmentDirective(("r",), "tag")
    with pytest.raises(ValueError):
        ConcealmentDirective(("r",), "blur")


def test_relay_rejects_user_to_user():
    relay = Relay()
    with pytest.raises(ValueError):
        relay.send("bob", "carol", Envelope(bytes(16), "bob", MsgType.ROUND))


# ----------------------------------------------------------------------------
# baseline


def test_baseline_demo_directives():
    w = make_world()
    scene = scene_for()
    assert len(scene.graphs) == 8 and len(scene.truth) == 4
    sess = w.capture("alice", scene.graphs, "p", "baseline")
    assert sess.status == "complete"
    assert sorted(sess.in_fov) == ["bob", "carol", "dave", "erin"]
    actions = sorted(d.action for d in sess.directives)
    assert actions == ["erase", "erase", "erase", "tag"]
    assert [d.user_id for d in sess.directives if d.action == "tag"] == ["erin"]
    for k, uid, _ in sess.matches:
        assert owner_index(scene, uid) == k
    assert sess.violations == []
    # shared photo carries exactly the non-erased persons
    assert len(sess.shared) == 5


def test_baseline_directive_soundness():
    w = make_world()
    scene = scene_for()
    sess = w.capture("alice", scene.graphs, "p", "baseline")
    refs_of = {n.region_ref: k for k, g in enumerate(scene.graphs) for n in g.nodes}
    matched = {k: uid for k, uid, _ in sess.matches}
    for d in sess.directives:
        ks = {refs_of[r] for r in d.region_refs}
        assert len(ks) == 1
        (k,) = ks
        assert k in matched
        assert set(d.region_refs) == {n.region_ref for n in scene.graphs[k].nodes}
        intent = w.cloud.users[matched[k]].intent
        assert (d.action == "tag") == (intent is Intent.TAGGED)


def test_occluded_invisible_user_gets_no_directive():
    w = make_world()
    scene = scene_for(users=("bob", "carol"))
    sess = w.capture("alice", scene.graphs, "p", "baseline")
    assert "dave" in sess.in_fov
    assert sorted(uid for _, uid, _ in sess.matches) == ["bob", "carol"]


def test_no_protected_users_in_fov():
    w = make_world(intents={})
    scene = scene_for()
    sess = w.capture("alice", scene.graphs, "p", "baseline")
    assert sess.in_fov == [] and sess.directives == []
    assert sess.status == "complete"
    types = [e.type for e in w.session_entries(sess)]
    assert MsgType.PROFILE_UPLOAD not in types and MsgType.PHOTO_UPLOAD not in types


def test_unregistered_users_generate_no_uploads():
    w = make_world()
    w.add_user("ghost", "none", Pose((4.0, 0.0)), PEOPLE[6].graph, registered=False)
    sess = w.capture("alice", scene_for().graphs, "p", "baseline")
    assert "ghost" not in sess.in_fov
    assert all(e.src != "ghost" for e in w.session_entries(sess))


def test_baseline_dishonest_photographer():
    w = make_world()
    scene = scene_for()
    keep = owner_index(scene, "carol")
    sess = w.capture("alice", scene.graphs, "p", "baseline", retain=[keep])
    assert sess.violations == [("alice", "carol")]


def test_verify_baseline_function():
    space = SimilaritySpace.plain()
    cached = [("bob", PEOPLE[1].graph), ("carol", PEOPLE[2].graph)]
    assert verify_baseline([], cached, 0.5, space, "alice") == []
    scene = scene_for(users=("bob",), bystanders=2)
    assert verify_baseline(scene.graphs, cached, 0.5, space, "alice") == [("alice", "bob")]
    rest = [g for k, g in enumerate(scene.graphs) if k not in scene.truth]
    assert verify_baseline(rest, cached, 0.5, space, "alice") == []


# ----------------------------------------------------------------------------
# advanced


def test_advanced_matches_baseline_and_is_confidential():
    scene = scene_for()
    wb, wa = make_world(), make_world()
    sb = wb.capture("alice", scene.graphs, "p", "baseline")
    sa = wa.capture("alice", scene.graphs, "p", "advanced")
    assert sa.status == "complete"
    assert sorted(m[:2] for m in sa.matches) == sorted(m[:2] for m in sb.matches)
    assert sorted(d.to_record()["action"] for d in sa.directives) == ["erase", "erase", "erase", "tag"]
    assert all(g.hashed for g in sa.photo) and all(g.hashed for g in sa.profiles.values())
    keys = {wa.clients[u].keys[sa.session_id] for u in sa.ring.members}
    assert len(keys) == 1
    assert_confidential(wa, [scene])


def test_advanced_message_budget():
    w = make_world()
    sess = w.capture("alice", scene_for().graphs, "p", "advanced")
    n = sess.ring.n
    st = w.stats(sess)
    assert n == 5
    assert st.agreement <= 4 * n
    assert st.profile_uploads == n - 1 and st.photo_uploads == 1
    assert st.match_results == 1
    assert max(st.agreement_bytes.values()) <= 512


def test_ring_reuse_sends_no_agreement_messages():
    w = make_world()
    s1 = w.capture("alice", scene_for(seed=3, photo_id="p1").graphs, "p1", "advanced")
    s2 = w.capture("alice", scene_for(seed=4, photo_id="p2").graphs, "p2", "advanced")
    assert s2.reused_ring and s2.status == "complete"
    st = w.stats(s2)
    assert st.agreement == 0 and st.profile_uploads == 0 and st.photo_uploads == 1
    assert len(s2.directives) == 4
    assert w.clients["bob"].keys[s2.session_id] == w.clients["bob"].keys[s1.session_id]


def test_membership_insert_recomputes_at_most_three():
    w = make_world(intents={"bob": "invisible", "carol": "invisible"})
    s1 = w.capture("alice", scene_for(seed=3).graphs, "p1", "advanced")
    R1 = w.clients["alice"].keys[s1.session_id]
    w.set_intent("dave", "invisible")
    s2 = w.capture("alice", scene_for(seed=4).graphs, "p2", "advanced")
    assert s2.status == "complete" and not s2.reused_ring
    assert len(s2.recomputed) <= 3 and "dave" in s2.recomputed
    R2 = w.clients["alice"].keys[s2.session_id]
    assert R2 != R1
    assert {w.clients[u].keys[s2.session_id] for u in s2.ring.members} == {R2}
    n = s2.ring.n
    assert w.stats(s2).agreement <= 4 * n
    assert_confidential(w, [])


def test_membership_remove_recomputes_two():
    w = make_world()
    w.capture("alice", scene_for(seed=3).graphs, "p1", "advanced")
    w.move("dave", Pose((-3.0, 0.0)))
    s2 = w.capture("alice", scene_for(seed=4).graphs, "p2", "advanced")
    assert s2.status == "complete"
    assert "dave" not in s2.ring.members
    assert len(s2.recomputed) == 2


def test_missing_c_aborts_session():
    w = make_world(fail=("carol",))
    scene = scene_for()
    sess = w.capture("alice", scene.graphs, "p", "advanced")
    assert sess.status == "aborted" and "carol" in sess.abort_reason
    assert sess.session_id in w.clients["alice"].aborted
    assert sess.session_id not in w.clients["alice"].shared
    assert sess.shared is None
    assert not any(e.type == MsgType.PHOTO_SHARE for e in w.session_entries(sess))


def test_advanced_verification_variants():
    w = make_world()
    scene = scene_for()
    keep = owner_index(scene, "carol")
    sess = w.capture("alice", scene.graphs, "p", "advanced", retain=[keep])
    assert w.verify("carol", sess) == "violation"
    assert w.verify("bob", sess) == "clean"
    assert w.verify("dave", sess) == "clean"
    # repeat: fresh random order each time, same verdict
    orders = []
    for _ in range(2):
        w.verify("carol", sess)
        vec_msgs = [e for e in w.session_entries(sess) if e.type == MsgType.VERIFY_VECTORS]
        orders.append(vec_msgs[-1].wire)
    assert orders[0] != orders[1]
    assert [r["verdict"] for r in sess.verification_log if r["user"] == "carol"] == ["violation"] * 3
    assert sess.violations.count(("alice", "carol")) == 3
    assert ("alice", "bob") not in sess.violations
    w.expire("carol", sess)
    assert w.verify("carol", sess) == "unverifiable"
    assert sess.verification_log[-1]["verdict"] == "unverifiable"
    assert_confidential(w, [scene])


def test_tagged_user_cannot_request_verification():
    w = make_world()
    sess = w.capture("alice", scene_for().graphs, "p", "advanced")
    assert w.verify("erin", sess) == "rejected"


def test_eavesdropper_sees_only_own_channel():
    w = make_world()
    sess = w.capture("alice", scene_for().graphs, "p", "advanced")
    seen = w.relay.visible_to("bob")
    assert seen and all("bob" in (e.src, e.dst) for e in seen)
    others = plain_payloads([PEOPLE[k].graph for k in (2, 3, 4)])
    others += [serialize_profile(g) for uid, g in sess.profiles.items() if uid != "bob"]
    for e in seen:
        assert not any(o in e.wire for o in others)


def test_transcript_deterministic(tmp_path):
    def run():
        w = make_world()
        scene = scene_for()
        s = w.capture("alice", scene.graphs, "p", "advanced", retain=[owner_index(scene, "bob")])
        w.verify("bob", s)
        return w.transcript()

    a, b = run(), run()
    assert [e.wire for e in a] == [e.wire for e in b]
    dump_transcript(a, tmp_path / "a.jsonl")
    dump_transcript(b, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert [e.wire for e in load_transcript(tmp_path / "a.jsonl")] == [e.wire for e in a]


def test_cloud_holds_no_private_values():
    w = make_world()
    sess = w.capture("alice", scene_for().graphs, "p", "advanced")
    secrets = set(advanced_secrets(w))
    ring = sess.ring
    assert not secrets & set(ring.publics.values())
    assert not secrets & set(ring.cs.values())
    assert isinstance(ring.params, GroupParams)


def test_scan_detects_plain_upload():
    w = make_world()
    scene = scene_for()
    w.capture("alice", scene.graphs, "p", "baseline")
    found = scan_transcript(w.relay.cloud_visible(), self_profiles=[PEOPLE[1].graph],
                            photo_graphs=scene.graphs)
    whats = {f.what for f in found}
    assert "self-profile payload" in whats and "plain profile frame" in whats
    assert "photo payload before sharing" in whats


def test_noise_free_scene_matches():
    w = make_world()
    scene = gen_scene([(PEOPLE[1], AHEAD["bob"])], Pose((0.0, 0.0)), [], seed=1,
                      noise=NoiseModel.none(), photo_id="z")
    sess = w.capture("alice", scene.graphs, "z", CaptureMode.ADVANCED)
    assert [uid for _, uid, _ in sess.matches] == ["bob"]
