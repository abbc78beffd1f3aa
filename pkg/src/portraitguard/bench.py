"""Micro-benchmarks: per-stage matching time, kernel backends, payload sizes."""
from __future__ import annotations

import time
from typing import Callable

import numpy as np

from . import _pykernels, kernels
from .lsh import generate_family_set
from .matching import (
    SimilaritySpace, graph_similarity, similarity_matrix, stage1_filter, stage2_neighbor_map,
    stage3_vote,
)
from .portrait import (
    DEFAULT_DIMS, FeatureKind, PortraitGraph, body_node, face_node, feature_payload_size,
)
from .protocol.geometry import Pose
from .protocol.parties import CaptureMode
from .protocol.world import ProtocolConfig, World
from .synth import NoiseModel, gen_corpus, observe_safely
from .transform import transform_graph

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

TARGET_HASHED_KB = 0.15
TARGET_AGREEMENT_KB = 0.19


def _best_of(fn: Callable[[], object], repeat: int = 5, number: int = 1) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def ten_node_profile(seed: int = 0) -> PortraitGraph:
    rng = np.random.default_rng(seed)
    nodes = tuple(body_node(k, rng.random(DEFAULT_DIMS[FeatureKind.COLOR_HISTOGRAM]),
                            rng.random(DEFAULT_DIMS[FeatureKind.TEXTURE])) for k in range(10))
    return PortraitGraph(nodes, frozenset((k, k + 1) for k in range(9)))


def payload_report(m: int = 128) -> dict:
    """Feature payload sizes. The hashed law counts one code per node; body
    nodes carry two codes (histogram and texture), reported separately."""
    g = ten_node_profile()
    fams = generate_family_set(0, m)
    rng = np.random.default_rng(1)
    faces = PortraitGraph(tuple(face_node(k, rng.random(DEFAULT_DIMS[FeatureKind.FACE]))
                                for k in range(10)))
    return {"plain_10_body_bytes": feature_payload_size(g),
            "hashed_10_node_bytes": feature_payload_size(transform_graph(faces, 12345, fams)),
            "hashed_10_body_bytes": feature_payload_size(transform_graph(g, 12345, fams)),
            "target_hashed_kb": TARGET_HASHED_KB}


def agreement_report(N: int = 512, n: int = 4, seed: int = 0) -> dict:
    """Bytes of agreement values each member sends and receives in one ring
    formation with n members (envelopes excluded)."""
    world = World(ProtocolConfig(N=N, seed=seed))
    people = gen_corpus(n, seed=seed)
    world.add_user("u0", "none", Pose((0.0, 0.0)), people[0].graph)
    for k in range(1, n):
        world.add_user(f"u{k}", "invisible", Pose((3.0 + k, 0.0)), people[k].graph)
    t0 = time.perf_counter()
    sess = world.capture("u0", [people[1].graph], "bench", CaptureMode.ADVANCED)
    wall = time.perf_counter() - t0
    st = world.stats(sess)
    per_user = st.agreement_bytes
    return {"N": N, "n": n, "messages": st.agreement, "bytes_per_user_max": max(per_user.values()),
            "bytes_per_user": per_user, "target_kb": TARGET_AGREEMENT_KB,
            "ratio_to_target": max(per_user.values()) / (TARGET_AGREEMENT_KB * 1024),
            "agreement_cpu_s": sum(c.timings["agreement"] for c in world.clients.values()),
            "session_wall_s": wall}


def stage_times(gx: PortraitGraph, gy: PortraitGraph, space: SimilaritySpace, repeat: int = 3) -> dict:
    out = {}
    out["similarity"] = _best_of(lambda: similarity_matrix(gx, gy, space), repeat)
    sims = similarity_matrix(gx, gy, space)
    out["stage1"] = _best_of(lambda: stage1_filter(gx, gy, space, sims=sims), repeat)
    M = stage1_filter(gx, gy, space, sims=sims)

    def s2():
        stage2_neighbor_map(stage1_filter(gx, gy, space, sims=sims), gx, gy, space)

    out["stage2"] = max(_best_of(s2, repeat) - out["stage1"], 0.0)
    stage2_neighbor_map(M, gx, gy, space)
    base = M.flags.copy()

    def s3():
        M.flags = base.copy()
        stage3_vote(M, gx, gy)

    out["stage3"] = _best_of(s3, repeat)
    out["score"] = _best_of(lambda: graph_similarity(M, gx, gy, space), repeat)
    out["total"] = sum(out[k] for k in ("similarity", "stage1", "stage2", "stage3", "score"))
    return out


def matching_report(preset: str = "dense", pairs: int = 3, seed: int = 0) -> dict:
    people = gen_corpus(pairs, seed=seed, preset=preset)
    fams = generate_family_set(seed)
    plain, hashed = SimilaritySpace.plain(), SimilaritySpace.hashed()
    rows = {"plain": [], "hashed": []}
    for k, p in enumerate(people):
        obs = observe_safely(p, NoiseModel(), seed + k)
        rows["plain"].append(stage_times(p.graph, obs, plain))
        R = 987654321 + k
        rows["hashed"].append(stage_times(transform_graph(p.graph, R, fams), transform_graph(obs, R, fams),
                                          hashed))
    mean = {mode: {key: float(np.mean([r[key] for r in rs])) for key in rs[0]} for mode, rs in rows.items()}
    return {"preset": preset, "pairs": pairs, "backend": kernels.BACKEND, "seconds": mean,
            "plain_over_hashed": mean["plain"]["total"] / mean["hashed"]["total"],
            "similarity_plain_over_hashed": mean["plain"]["similarity"] / mean["hashed"]["similarity"]}


def kernel_report(seed: int = 0, size: int = 30, repeat: int = 5) -> dict:
    """Same inputs through both backends."""
    rng = np.random.default_rng(seed)
    w = rng.random((size, size))
    a = rng.integers(0, 256, (size, 16), dtype=np.uint8)
    b = rng.integers(0, 256, (size, 16), dtype=np.uint8)
    flags = (rng.random((size, size)) < 0.3).astype(np.uint8)
    deg = 4
    indptr = np.arange(0, size * deg + 1, deg, dtype=np.int32)
    indices = rng.integers(0, size, size * deg).astype(np.int32)
    nmap = rng.integers(-1, size, (size, size, deg)).astype(np.int32)
    cases = {
        "hungarian": lambda mod: mod.hungarian_max(w),
        "hamming": lambda mod: mod.hamming_matrix(a, b),
        "bfs_vote": lambda mod: mod.bfs_vote(flags, nmap, indptr, indices),
    }
    out = {}
    for name, fn in cases.items():
        row = {"python": _best_of(lambda: fn(_pykernels), repeat)}
        if _ckernels is not None:
            row["cython"] = _best_of(lambda: fn(_ckernels), repeat)
            row["speedup"] = row["python"] / row["cython"] if row["cython"] > 0 else float("inf")
        out[name] = row
    return {"size": size, "compiled_available": _ckernels is not None, "kernels": out}


def full_report(seed: int = 0, N: int = 512, preset: str = "dense", pairs: int = 3) -> dict:
    return {"payloads": payload_report(), "agreement": agreement_report(N=N, seed=seed),
            "matching": matching_report(preset, pairs, seed), "kernels": kernel_report(seed)}
