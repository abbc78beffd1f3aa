import numpy as np
import pytest

from portraitguard.matching import SimilaritySpace, profile_similarity
from portraitguard.portrait import NodeLabel, validate_graph
from portraitguard.protocol.geometry import Pose
from portraitguard.synth import (
    FACE_VISIBILITY, EmptyObservation, NoiseModel, corpus_manifest, gen_corpus, gen_person,
    gen_scene, load_corpus, observe, observe_safely, write_corpus,
)

PLAIN = SimilaritySpace.plain()


def test_person_deterministic_and_valid():
    assert gen_person(7) == gen_person(7)
    assert gen_person(7) != gen_person(8)
    for s in range(50):
        p = gen_person(s)
        assert validate_graph(p.graph) == []
        body = [n for n in p.graph.nodes if n.label == NodeLabel.HUMAN_BODY]
        assert 3 <= len(body) <= 10


def test_dense_preset_sizes():
    for s in range(5):
        body = [n for n in gen_person(s, preset="dense").graph.nodes if n.label == NodeLabel.HUMAN_BODY]
        assert 20 <= len(body) <= 35


def test_canonical_graph_connected():
    for s in range(30):
        g = gen_person(s).graph
        nb = g.neighbors()
        seen, stack = set(), [g.nodes[0].id]
        while stack:
            v = stack.pop()
            if v not in seen:
                seen.add(v)
                stack.extend(nb[v])
        assert seen == set(g.node_ids())


def test_noise_model_defaults_and_checks():
    assert NoiseModel().face_visibility == pytest.approx(412 / 1326)
    assert FACE_VISIBILITY == pytest.approx(0.3107, abs=1e-4)
    with pytest.raises(ValueError):
        NoiseModel(drop=1.5)
    with pytest.raises(ValueError):
        NoiseModel(sigma=-0.1)


def test_zero_noise_observation_is_canonical():
    p = gen_person(3)
    assert observe(p, NoiseModel.none(), 1) == p.graph


def test_face_visibility_zero_removes_face():
    noise = NoiseModel(face_visibility=0.0)
    for s in range(20):
        obs = observe(gen_person(s, p_face=1.0), noise, s)
        assert all(n.label != NodeLabel.HUMAN_FACE for n in obs.nodes)


def test_empty_observation_error():
    noise = NoiseModel(drop=1.0, face_visibility=0.0, background_mean=0.0)
    with pytest.raises(EmptyObservation, match="empty observation"):
        observe(gen_person(1), noise, 0)


def test_observations_valid():
    people = gen_corpus(10, seed=2)
    for k, p in enumerate(people):
        for s in range(10):
            assert validate_graph(observe_safely(p, NoiseModel(), 100 * k + s)) == []


def test_self_similarity_exceeds_cross():
    people = gen_corpus(20, seed=4)
    rng = np.random.default_rng(0)
    same, cross = [], []
    for t in range(300):
        a, b = rng.choice(len(people), 2, replace=False)
        obs = observe_safely(people[a], NoiseModel(), t)
        same.append(profile_similarity(people[a].graph, obs, PLAIN))
        cross.append(profile_similarity(people[b].graph, obs, PLAIN))
        assert profile_similarity(people[a].graph, people[b].graph, PLAIN) < 0.5
    assert np.mean(same) - np.mean(cross) >= 0.2


def test_noise_monotonicity():
    people = gen_corpus(25, seed=6)
    means = []
    for sigma in (0.0, 0.02, 0.05, 0.1):
        noise = NoiseModel(sigma=sigma)
        vals = [profile_similarity(people[t % 25].graph, observe_safely(people[t % 25], noise, t), PLAIN)
                for t in range(500)]
        means.append(np.mean(vals))
    assert all(a >= b for a, b in zip(means, means[1:])), means


def test_scene_construction():
    people = gen_corpus(12, seed=1)
    pose = Pose((0.0, 0.0))
    subjects = [(people[k], (4.0 + k, 0.0)) for k in range(3)]
    scene = gen_scene(subjects, pose, people[3:8], seed=9, photo_id="ph")
    assert len(scene.graphs) == 8
    assert sorted(scene.truth.values()) == [people[k].person_id for k in range(3)]
    assert len(scene.bystanders) == 5
    for k, g in enumerate(scene.graphs):
        assert all(n.region_ref.startswith(f"ph/p{k}/") for n in g.nodes)
        assert validate_graph(g) == []

    behind = gen_scene([(people[0], (-4.0, 0.0))], pose, people[3:5], seed=9)
    assert len(behind.graphs) == 2 and behind.truth == {}
    alone = gen_scene([], pose, people[3:8], seed=9)
    assert alone.truth == {} and len(alone.graphs) == 5


def test_corpus_manifest_roundtrip(tmp_path):
    people = gen_corpus(6, seed=3)
    m = corpus_manifest(people, 3, "small", 0.8, calibration={"scale": 0.35})
    write_corpus(tmp_path / "a", people, m)
    write_corpus(tmp_path / "b", gen_corpus(6, seed=3), corpus_manifest(gen_corpus(6, seed=3), 3,
                                                                        "small", 0.8,
                                                                        calibration={"scale": 0.35}))
    assert (tmp_path / "a/manifest.json").read_bytes() == (tmp_path / "b/manifest.json").read_bytes()
    manifest, back = load_corpus(tmp_path / "a")
    assert back == people
    assert manifest["noise"]["face_visibility"] == pytest.approx(412 / 1326)
    with pytest.raises(FileExistsError):
        write_corpus(tmp_path / "a", people, m)
    write_corpus(tmp_path / "a", people, m, force=True)


def test_default_corpus_size():
    people = gen_corpus()
    assert len(people) == 42 and len({p.person_id for p in people}) == 42
