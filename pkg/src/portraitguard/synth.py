"""Synthetic persons, noisy observations and photo scenes.

Stands in for detection, segmentation and feature extraction: every person
is a connected body-region graph (plus an optional face) with uniform
[0, 1] features; observations perturb features and topology.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .portrait import (
    DEFAULT_DIMS, FeatureKind, FeatureVector, NodeLabel, PortraitGraph, PortraitNode,
    body_node, dump_graph, face_node, load_graph,
)
from .protocol.geometry import Pose, in_fov

# 1326 pedestrians, 412 detected faces in the field study
FACE_VISIBILITY = 412 / 1326

PRESETS = {"small": (3, 10), "dense": (20, 35)}


class EmptyObservation(ValueError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    sigma: float = 0.05
    drop: float = 0.03
    split: float = 0.05
    background_mean: float = 0.5
    face_visibility: float = FACE_VISIBILITY

    def __post_init__(self):
        for name in ("drop", "split", "face_visibility"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.sigma < 0 or self.background_mean < 0:
            raise ValueError("sigma and background_mean must be non-negative")

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls(sigma=0.0, drop=0.0, split=0.0, background_mean=0.0, face_visibility=1.0)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SyntheticPerson:
    person_id: str
    graph: PortraitGraph
    seed: int


def _random_features(rng: np.random.Generator, kind: FeatureKind, dims: Mapping[FeatureKind, int]):
    return rng.random(dims[kind])


def _new_body(rng, node_id, dims):
    return body_node(node_id, _random_features(rng, FeatureKind.COLOR_HISTOGRAM, dims),
                     _random_features(rng, FeatureKind.TEXTURE, dims))


def gen_person(seed: int, person_id: str | None = None, preset: str = "small",
               p_face: float = 0.8, extra_edge_rate: float = 0.3,
               dims: Mapping[FeatureKind, int] = DEFAULT_DIMS) -> SyntheticPerson:
    """Canonical portrait: body nodes 1..n on a random spanning tree plus
    extra chords, and a face node 0 attached to body node 1."""
    rng = np.random.default_rng(seed)
    lo, hi = PRESETS[preset]
    n = int(rng.integers(lo, hi + 1))
    nodes = [_new_body(rng, k, dims) for k in range(1, n + 1)]
    edges = {(int(rng.integers(1, k)), k) for k in range(2, n + 1)}
    for _ in range(int(rng.binomial(n, extra_edge_rate)) if n > 2 else 0):
        a, b = sorted(int(v) for v in rng.choice(np.arange(1, n + 1), 2, replace=False))
        edges.add((a, b))
    if rng.random() < p_face:
        nodes.insert(0, face_node(0, _random_features(rng, FeatureKind.FACE, dims)))
        edges.add((0, 1))
    pid = person_id if person_id is not None else f"person-{seed}"
    return SyntheticPerson(pid, PortraitGraph(tuple(nodes), frozenset(edges), pid), seed)


def _jitter(rng, values, sigma):
    v = np.asarray(values, dtype=np.float64)
    if sigma > 0:
        v = np.clip(v + rng.normal(0.0, sigma, v.shape), 0.0, 1.0)
    return v


def _noisy(rng, node: PortraitNode, node_id: int, sigma: float) -> PortraitNode:
    feats = tuple(FeatureVector(f.kind, _jitter(rng, f.values, sigma)) for f in node.features)
    return PortraitNode(node_id, node.label, feats)


def observe(person: SyntheticPerson, noise: NoiseModel, seed: int) -> PortraitGraph:
    """A noisy view of a person; kept nodes keep their canonical ids, split
    halves and background regions get fresh ids above the canonical range."""
    rng = np.random.default_rng(seed)
    g = person.graph
    next_id = max(g.node_ids()) + 1
    dims = _dims_of(g.nodes)
    kept: list[PortraitNode] = []
    for node in g.nodes:
        if node.label == NodeLabel.HUMAN_FACE:
            if rng.random() < noise.face_visibility:
                kept.append(node)
        elif rng.random() >= noise.drop:
            kept.append(node)
    if not kept:
        raise EmptyObservation("empty observation")
    kept_ids = {n.id for n in kept}
    edges = {e for e in g.edges if e[0] in kept_ids and e[1] in kept_ids}
    out: list[PortraitNode] = []
    for node in kept:
        out.append(_noisy(rng, node, node.id, noise.sigma))
        if node.label == NodeLabel.HUMAN_BODY and rng.random() < noise.split:
            twin = next_id
            next_id += 1
            out.append(_noisy(rng, node, twin, noise.sigma))
            for a, b in list(edges):
                if node.id in (a, b):
                    other = b if a == node.id else a
                    edges.add((other, twin))
            edges.add((node.id, twin))
    for _ in range(int(rng.poisson(noise.background_mean)) if noise.background_mean else 0):
        anchor = out[int(rng.integers(len(out)))].id
        out.append(_new_body(rng, next_id, dims))
        edges.add((anchor, next_id))
        next_id += 1
    return PortraitGraph(tuple(out), frozenset(edges), person.person_id)


def _dims_of(nodes: Sequence[PortraitNode]) -> dict[FeatureKind, int]:
    dims = dict(DEFAULT_DIMS)
    for n in nodes:
        for f in n.features:
            dims[f.kind] = f.dim
    return dims


def relabel(g: PortraitGraph, rng: np.random.Generator, prefix: str | None = None,
            owner_ref: str | None = None) -> PortraitGraph:
    """Shuffle node order, renumber ids 1..k and attach region tokens."""
    order = rng.permutation(len(g.nodes))
    mapping = {g.nodes[k].id: new for new, k in enumerate(order, start=1)}
    nodes = []
    for new, k in enumerate(order, start=1):
        old = g.nodes[k]
        ref = f"{prefix}/r{new}" if prefix is not None else None
        nodes.append(PortraitNode(new, old.label, old.features, ref))
    edges = frozenset((mapping[a], mapping[b]) for a, b in g.edges)
    return PortraitGraph(tuple(nodes), edges, owner_ref)


def observe_safely(person: SyntheticPerson, noise: NoiseModel, seed: int) -> PortraitGraph:
    """observe(), re-drawing with derived seeds if every node was dropped."""
    for attempt in range(64):
        try:
            return observe(person, noise, seed + 7919 * attempt)
        except EmptyObservation:
            continue
    raise EmptyObservation(f"no non-empty observation of {person.person_id}")


@dataclass
class Scene:
    photo_id: str
    graphs: list[PortraitGraph]
    truth: dict[int, str]  # photo index -> subject person id
    bystanders: dict[int, str] = field(default_factory=dict)

    def index_of(self, person_id: str) -> int | None:
        for k, pid in self.truth.items():
            if pid == person_id:
                return k
        return None


def gen_scene(subjects: Sequence[tuple[SyntheticPerson, tuple[float, float]]], pose: Pose,
              bystanders: Sequence[SyntheticPerson], seed: int,
              noise: NoiseModel | None = None, photo_id: str = "photo") -> Scene:
    """Observe every subject inside the photographer's FOV and every
    bystander, in shuffled photo order."""
    noise = noise or NoiseModel()
    rng = np.random.default_rng(seed)
    entries: list[tuple[SyntheticPerson, bool]] = []
    for person, pos in subjects:
        if in_fov(pose, pos):
            entries.append((person, True))
    entries.extend((b, False) for b in bystanders)
    order = rng.permutation(len(entries)) if entries else []
    graphs, truth, others = [], {}, {}
    for k, e in enumerate(order):
        person, is_subject = entries[e]
        obs = observe_safely(person, noise, int(rng.integers(2**62)))
        graphs.append(relabel(obs, rng, prefix=f"{photo_id}/p{k}"))
        (truth if is_subject else others)[k] = person.person_id
    return Scene(photo_id, graphs, truth, others)


def gen_corpus(n_persons: int = 42, seed: int = 0, preset: str = "small",
               p_face: float = 0.8) -> list[SyntheticPerson]:
    seeds = np.random.default_rng(seed).integers(0, 2**62, n_persons)
    return [gen_person(int(s), f"person-{k:03d}", preset, p_face) for k, s in enumerate(seeds)]


# ----------------------------------------------------------------------------
# corpus on disk: manifest plus one debug-encoded graph per person

MANIFEST = "manifest.json"
MANIFEST_VERSION = 1


def corpus_manifest(persons: Sequence[SyntheticPerson], seed: int, preset: str, p_face: float,
                    noise: NoiseModel | None = None, calibration: Mapping | None = None) -> dict:
    noise = noise or NoiseModel()
    return {
        "version": MANIFEST_VERSION,
        "seed": seed,
        "preset": preset,
        "p_face": p_face,
        "noise": noise.to_dict(),
        "calibration": dict(calibration or {}),
        "persons": [
            {"person_id": p.person_id, "seed": p.seed, "file": f"persons/{p.person_id}.json",
             "nodes": len(p.graph.nodes), "edges": len(p.graph.edges),
             "has_face": any(n.label == NodeLabel.HUMAN_FACE for n in p.graph.nodes)}
            for p in persons
        ],
    }


def write_corpus(out_dir, persons: Sequence[SyntheticPerson], manifest: dict, force: bool = False):
    out = Path(out_dir)
    target = out / MANIFEST
    if target.exists() and not force:
        raise FileExistsError(f"{target} exists; pass force to overwrite")
    (out / "persons").mkdir(parents=True, exist_ok=True)
    for p, rec in zip(persons, manifest["persons"]):
        dump_graph(p.graph, out / rec["file"])
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def load_corpus(corpus_dir) -> tuple[dict, list[SyntheticPerson]]:
    """Manifest and persons; graphs are read from disk, not regenerated."""
    root = Path(corpus_dir)
    manifest = json.loads((root / MANIFEST).read_text(encoding="utf-8"))
    if manifest.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {manifest.get('version')}")
    persons = [SyntheticPerson(rec["person_id"], load_graph(root / rec["file"]), rec["seed"])
               for rec in manifest["persons"]]
    return manifest, persons


def noise_from_dict(d: Mapping) -> NoiseModel:
    return NoiseModel(**{k: float(v) for k, v in d.items()})
