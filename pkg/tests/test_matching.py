import itertools
import math

import numpy as np
import pytest

from portraitguard.lsh import HashCode
from portraitguard.matching import (
    DimensionMismatch, SimilaritySpace, graph_similarity, hungarian_max_weight, match_graphs,
    match_profiles, node_similarity, resolve_matches, score_assignment,
    stage1_filter, stage2_neighbor_map, stage3_vote,
)
from portraitguard.portrait import (
    FeatureKind, HashedFeature, NodeLabel, PortraitGraph, PortraitNode, body_node,
)

from conftest import path_graph, rand_body, rand_face

PLAIN = SimilaritySpace.plain()


def brute_force_assignment(w):
    w = np.asarray(w)
    p, q = w.shape
    best = 0.0
    if p <= q:
        for cols in itertools.permutations(range(q), p):
            best = max(best, math.fsum(w[i, c] for i, c in enumerate(cols)))
    else:
        for rows in itertools.permutations(range(p), q):
            best = max(best, math.fsum(w[r, j] for j, r in enumerate(rows)))
    return best


def total(w, assign):
    return math.fsum(w[i][j] for i, j in assign.items() if j is not None)


def test_node_similarity_basics(rng):
    a = rand_body(rng, 1)
    assert node_similarity(a, a, PLAIN) == 1.0
    assert node_similarity(a, rand_face(rng, 2), PLAIN) == 0.0
    hashed = SimilaritySpace.hashed(m=8)
    n1 = PortraitNode(1, NodeLabel.HUMAN_FACE, (HashedFeature(FeatureKind.FACE, HashCode.from_string("00000000")),))
    n2 = PortraitNode(2, NodeLabel.HUMAN_FACE, (HashedFeature(FeatureKind.FACE, HashCode.from_string("11111111")),))
    assert node_similarity(n1, n2, SimilaritySpace(hashed.mode, m=8, hash_scale=1.0)) == 0.0
    assert node_similarity(n1, n2, hashed) == 0.0
    assert node_similarity(n1, n1, hashed) == 1.0


def test_plain_similarity_formula(rng):
    h1, t1, h2, t2 = rng.random(64), rng.random(20), rng.random(64), rng.random(20)
    d = math.sqrt(np.sum((h1 - h2) ** 2) / 64 + np.sum((t1 - t2) ** 2) / 20)
    got = node_similarity(body_node(1, h1, t1), body_node(2, h2, t2), SimilaritySpace.plain(scale=1.0))
    assert got == pytest.approx(1 / (1 + d), rel=1e-12)


def test_hashed_similarity_formula():
    c = HashCode.from_string
    a = PortraitNode(1, NodeLabel.HUMAN_BODY, (HashedFeature(FeatureKind.COLOR_HISTOGRAM, c("11110000")),
                                               HashedFeature(FeatureKind.TEXTURE, c("10100000"))))
    b = PortraitNode(2, NodeLabel.HUMAN_BODY, (HashedFeature(FeatureKind.COLOR_HISTOGRAM, c("11100000")),
                                               HashedFeature(FeatureKind.TEXTURE, c("01100000"))))
    # literal form 1 - H/m averaged over the node's codes: (7/8 + 6/8) / 2
    assert node_similarity(a, b, SimilaritySpace.hashed(m=8, hash_scale=1.0)) == 0.8125
    # default saturation: max(0, 1 - H / (0.2 m)) with 0.2 * 8 = 1.6 bits
    assert node_similarity(a, b, SimilaritySpace.hashed(m=8)) == pytest.approx((1 - 1 / 1.6 + 0) / 2)
    with pytest.raises(DimensionMismatch):
        node_similarity(a, b, SimilaritySpace.hashed(m=16))


def test_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        node_similarity(rand_body(rng, 1), body_node(2, rng.random(10), rng.random(20)), PLAIN)


def test_stage1_examples(rng):
    g = path_graph(rng, 3)
    M = stage1_filter(g, g, PLAIN)
    assert np.all(np.diag(M.flags))
    sims = np.array([[0.9, 0.6], [0.4, 0.8]])
    g2 = path_graph(rng, 2)
    M = stage1_filter(g2, g2, PLAIN, 0.5, sims=sims)
    assert M.flags.tolist() == [[True, True], [False, True]]
    M = stage1_filter(g2, g2, PLAIN, 0.5, sims=np.full((2, 2), 0.3))
    assert not M.flags.any()


def test_hungarian_examples():
    assert hungarian_max_weight([[1, 0], [0, 1]]) == {0: 0, 1: 1}
    w = [[0.9, 0.8], [0.85, 0.1]]
    assert brute_force_assignment(w) == pytest.approx(1.65)
    a = hungarian_max_weight(w)
    assert a == {0: 1, 1: 0} and total(w, a) == pytest.approx(1.65)
    assert hungarian_max_weight([[0.0, 0.0], [0.0, 2.0]]) == {0: None, 1: 1}
    assert hungarian_max_weight(np.zeros((2, 0))) == {0: None, 1: None}
    with pytest.raises(ValueError):
        hungarian_max_weight([[-1.0]])


@pytest.mark.parametrize("shape", [(4, 4), (3, 5), (5, 2), (6, 6), (1, 6)])
def test_hungarian_matches_brute_force(rng, shape):
    for _ in range(30):
        w = rng.random(shape) * (rng.random(shape) < 0.7)
        a = hungarian_max_weight(w)
        assert total(w, a) == brute_force_assignment(w)
        used = [j for j in a.values() if j is not None]
        assert len(used) == len(set(used))


def _graph_with_sims(n_edges_path, rng):
    return path_graph(rng, n_edges_path)


def test_stage2_empty_neighbourhood(rng):
    g = PortraitGraph((rand_body(rng, 1),))
    M = stage2_neighbor_map(stage1_filter(g, g, PLAIN), g, g)
    assert M.nmap == {(0, 0): {}}


def test_stage2_star_leaves_map_to_twins(rng):
    nodes = tuple(rand_body(rng, k) for k in range(4))
    star = PortraitGraph(nodes, frozenset({(0, 1), (0, 2), (0, 3)}))
    M = stage2_neighbor_map(stage1_filter(star, star, PLAIN), star, star)
    assert M.nmap[(0, 0)] == {1: 1, 2: 2, 3: 3}
    # brute force over leaf permutations agrees
    best = max(itertools.permutations([1, 2, 3]),
               key=lambda perm: sum(M.sims[a, b] for a, b in zip([1, 2, 3], perm) if M.flags[a, b]))
    assert tuple(M.nmap[(0, 0)][a] for a in (1, 2, 3)) == best


def test_stage2_unflagged_neighbour_maps_to_phi(rng):
    g = path_graph(rng, 2)
    sims = np.array([[1.0, 0.0], [0.0, 0.2]])
    M = stage2_neighbor_map(stage1_filter(g, g, PLAIN, 0.5, sims=sims), g, g)
    assert M.nmap[(0, 0)] == {1: None}


def test_stage3_hand_simulated_path(rng):
    g = path_graph(rng, 3)
    sims = np.full((3, 3), 0.6)
    np.fill_diagonal(sims, 1.0)
    M = stage1_filter(g, g, PLAIN, 0.5, sims=sims)
    stage2_neighbor_map(M, g, g)
    stage3_vote(M, g, g)
    assert M.counters.tolist() == [[3, 3, 1], [3, 5, 1], [1, 1, 3]]
    assert M.flags.tolist() == np.eye(3, dtype=bool).tolist()
    assert graph_similarity(M, g, g) == pytest.approx(1.0)


def test_stage3_single_candidate_survives(rng):
    g = path_graph(rng, 2)
    sims = np.array([[0.0, 0.0], [0.0, 0.7]])
    M = stage1_filter(g, g, PLAIN, 0.5, sims=sims)
    stage3_vote(stage2_neighbor_map(M, g, g), g, g)
    assert M.flags.tolist() == [[False, False], [False, True]]


def test_stage3_similarity_breaks_ties(rng):
    gx = PortraitGraph((rand_body(rng, 1), rand_body(rng, 2)))
    gy = PortraitGraph((rand_body(rng, 1),))
    M = stage1_filter(gx, gy, PLAIN, 0.5, sims=np.array([[0.7], [0.9]]))
    stage3_vote(stage2_neighbor_map(M, gx, gy), gx, gy)
    assert M.flags[:, 0].tolist() == [False, True]


def test_graph_similarity_examples(rng):
    g = path_graph(rng, 4)
    r = match_graphs(g, g, PLAIN)
    assert r.graph_similarity == 1.0
    assert r.assignment == {k: k for k in range(4)}
    a = PortraitGraph((rand_body(rng, 1),))
    b = PortraitGraph((rand_body(rng, 1),))
    assert score_assignment([(0, 0)], np.array([[0.8]]), a, b) == pytest.approx(0.4)
    assert score_assignment([], np.array([[0.8]]), a, b) == 0.0


def test_one_to_one_and_symmetry(rng):
    from portraitguard import synth
    for seed in range(20):
        p = synth.gen_person(seed)
        obs = synth.relabel(synth.observe_safely(p, synth.NoiseModel(), seed), rng)
        r = match_graphs(p.graph, obs, PLAIN)
        f = r.matrix.flags
        assert (f.sum(0) <= 1).all() and (f.sum(1) <= 1).all()
        inv = [(j, i) for i, j in r.matrix.pairs()]
        assert score_assignment(inv, r.matrix.sims.T, obs, p.graph) == pytest.approx(r.graph_similarity, abs=1e-12)
        for i, j in r.matrix.pairs():
            assert r.matrix.sims[i, j] >= 0.5


def test_match_profiles_conflicts(rng):
    from portraitguard import synth
    persons = synth.gen_corpus(8, seed=3)
    photo = [synth.relabel(synth.observe_safely(p, synth.NoiseModel(), k), rng) for k, p in enumerate(persons)]
    users = [("u0", persons[2].graph), ("u1", persons[5].graph), ("u2", persons[7].graph)]
    got = match_profiles(users, photo, PLAIN)
    assert [(k, u) for k, u, _ in got] == [(2, "u0"), (5, "u1"), (7, "u2")]
    absent = synth.gen_person(999).graph
    assert match_profiles([("ghost", absent)], photo, PLAIN) == []
    dup = match_profiles([("a", persons[2].graph), ("b", persons[2].graph)], photo, PLAIN)
    assert len(dup) == 1 and dup[0][0] == 2


def test_resolve_matches_greedy():
    table = np.array([[0.9, 0.8], [0.95, 0.1]])
    assert resolve_matches(["a", "b"], table, 0.5) == [(0, "b", 0.95), (1, "a", 0.8)]
    assert resolve_matches(["a"], np.array([[0.4]]), 0.5) == []
