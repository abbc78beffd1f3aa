"""Three-stage voting matcher for portrait graphs.

Stage 1 keeps node pairs whose similarity reaches ``xi``; stage 2 maps the
one-hop neighbourhoods of every candidate pair with a maximum-weight
bipartite assignment; stage 3 grows paired BFS trees along those mappings,
lets every tree pair vote, and keeps the best-voted row per column (then
per row). The resolved flags are scored by node and edge agreement.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .portrait import FeatureKind, HashedFeature, LABEL_KINDS, NodeLabel, PortraitGraph, PortraitNode

DEFAULT_XI = 0.5
DEFAULT_THETA = 0.5


class Mode(str, enum.Enum):
    PLAIN = "plain_euclidean"
    HASHED = "hashed_hamming"


@dataclass(frozen=True)
class SimilaritySpace:
    """How node similarity is measured.

    plain: ``1 / (1 + d / scale)`` where d is the Euclidean distance over the
    concatenated same-kind vectors, each divided by sqrt(dim).
    hashed: per-code ``max(0, 1 - H / (hash_scale * m))`` averaged over the
    node's codes. ``scale`` and ``hash_scale`` set the distance at which
    similarity halves (plain) or reaches zero (hashed).
    """

    mode: Mode = Mode.PLAIN
    m: int = 128
    scale: float = 0.35
    hash_scale: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.scale <= 0 or not 0 < self.hash_scale <= 1:
            raise ValueError("scale must be > 0 and hash_scale in (0, 1]")

    @classmethod
    def plain(cls, scale: float = 0.35) -> "SimilaritySpace":
        return cls(Mode.PLAIN, scale=scale)

    @classmethod
    def hashed(cls, m: int = 128, hash_scale: float = 0.2) -> "SimilaritySpace":
        return cls(Mode.HASHED, m=m, hash_scale=hash_scale)


class DimensionMismatch(ValueError):
    pass


# ----------------------------------------------------------------------------
# node similarity


class _NodeTable:
    """Per-graph feature arrays grouped by label and kind."""

    def __init__(self, g: PortraitGraph, space: SimilaritySpace):
        self.ids = [n.id for n in g.nodes]
        self.labels = np.array([int(n.label) for n in g.nodes], dtype=np.int64)
        self.rows: dict[NodeLabel, np.ndarray] = {}
        self.feats: dict[NodeLabel, dict[FeatureKind, np.ndarray]] = {}
        for label, kinds in LABEL_KINDS.items():
            idx = np.nonzero(self.labels == int(label))[0]
            self.rows[label] = idx
            if not idx.size:
                continue
            per_kind = {}
            for kind in kinds:
                per_kind[kind] = _stack([g.nodes[i].feature(kind) for i in idx], space)
            self.feats[label] = per_kind


def _stack(feats, space: SimilaritySpace) -> np.ndarray:
    if space.mode is Mode.HASHED:
        if not all(isinstance(f, HashedFeature) for f in feats):
            raise TypeError("hashed similarity needs hashed features")
        lengths = {f.code.m for f in feats}
        if len(lengths) != 1:
            raise DimensionMismatch(f"mixed code lengths {sorted(lengths)}")
        return np.frombuffer(b"".join(f.code.bits for f in feats), dtype=np.uint8).reshape(len(feats), -1)
    if any(isinstance(f, HashedFeature) for f in feats):
        raise TypeError("plain similarity needs plain feature vectors")
    dims = {f.dim for f in feats}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed {feats[0].kind.tag} dimensions {sorted(dims)}")
    return np.array([f.values for f in feats], dtype=np.float64)


def similarity_matrix(gx: PortraitGraph, gy: PortraitGraph, space: SimilaritySpace) -> np.ndarray:
    tx, ty = _NodeTable(gx, space), _NodeTable(gy, space)
    sims = np.zeros((len(tx.ids), len(ty.ids)))
    for label, kinds in LABEL_KINDS.items():
        rx, ry = tx.rows[label], ty.rows[label]
        if not rx.size or not ry.size:
            continue
        if space.mode is Mode.PLAIN:
            d2 = np.zeros((rx.size, ry.size))
            for kind in kinds:
                a, b = tx.feats[label][kind], ty.feats[label][kind]
                if a.shape[1] != b.shape[1]:
                    raise DimensionMismatch(f"{kind.tag}: {a.shape[1]} vs {b.shape[1]} dims")
                diff = a[:, None, :] - b[None, :, :]
                d2 += np.einsum("ijk,ijk->ij", diff, diff) / a.shape[1]
            block = 1.0 / (1.0 + np.sqrt(d2) / space.scale)
        else:
            block = np.zeros((rx.size, ry.size))
            for kind in kinds:
                a, b = tx.feats[label][kind], ty.feats[label][kind]
                if a.shape[1] != b.shape[1] or a.shape[1] != (space.m + 7) // 8:
                    raise DimensionMismatch(f"{kind.tag}: code width does not match m={space.m}")
                h = kernels.hamming_matrix(a, b)
                block += np.clip(1.0 - h / (space.hash_scale * space.m), 0.0, 1.0)
            block /= len(kinds)
        sims[np.ix_(rx, ry)] = block
    return sims


def node_similarity(a: PortraitNode, b: PortraitNode, space: SimilaritySpace) -> float:
    """Similarity in [0, 1]; 0 across labels."""
    if a.label != b.label:
        return 0.0
    return float(similarity_matrix(PortraitGraph((a,)), PortraitGraph((b,)), space)[0, 0])


# ----------------------------------------------------------------------------
# match matrix


@dataclass
class MatchMatrix:
    """p x q working table. ``nmap[(i, j)]`` maps x-neighbour index to
    y-neighbour index (None for no match) for candidate (i, j)."""

    sims: np.ndarray
    flags: np.ndarray
    counters: np.ndarray
    nmap: dict[tuple[int, int], dict[int, int | None]] = field(default_factory=dict)
    candidates: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.flags.shape

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.flags))]


def _index_adjacency(g: PortraitGraph) -> list[list[int]]:
    pos = {n.id: k for k, n in enumerate(g.nodes)}
    adj: list[list[int]] = [[] for _ in g.nodes]
    for a, b in sorted(g.edges):
        if a in pos and b in pos and a != b:
            adj[pos[a]].append(pos[b])
            adj[pos[b]].append(pos[a])
    return adj


def stage1_filter(gx: PortraitGraph, gy: PortraitGraph, space: SimilaritySpace,
                  xi: float = DEFAULT_XI, sims: np.ndarray | None = None) -> MatchMatrix:
    if sims is None:
        sims = similarity_matrix(gx, gy, space)
    flags = sims >= xi
    return MatchMatrix(sims=sims, flags=flags.copy(),
                       counters=np.zeros(sims.shape, dtype=np.int64), candidates=flags)


def hungarian_max_weight(weights) -> dict[int, int | None]:
    """Maximum total weight one-to-one assignment; row -> column or None.

    Zero weight means no edge, so such pairs come back unassigned.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError("weights must be a matrix")
    if w.size and (not np.all(np.isfinite(w)) or w.min() < 0):
        raise ValueError("weights must be finite and non-negative")
    rows = kernels.hungarian_max(w) if w.size else np.full(w.shape[0], -1)
    out: dict[int, int | None] = {}
    for i, j in enumerate(rows):
        out[i] = int(j) if j >= 0 and w[i, j] > 0 else None
    return out


def stage2_neighbor_map(M: MatchMatrix, gx: PortraitGraph, gy: PortraitGraph,
                        space: SimilaritySpace | None = None) -> MatchMatrix:
    adj_x, adj_y = _index_adjacency(gx), _index_adjacency(gy)
    weights_all = np.where(M.flags, M.sims, 0.0)
    for i, j in M.pairs():
        nx_, ny_ = adj_x[i], adj_y[j]
        if not nx_ or not ny_:
            M.nmap[(i, j)] = {a: None for a in nx_}
            continue
        sub = weights_all[np.ix_(nx_, ny_)]
        assign = hungarian_max_weight(sub)
        M.nmap[(i, j)] = {nx_[r]: (ny_[c] if c is not None else None) for r, c in assign.items()}
    return M


def _csr(adj: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(len(adj) + 1, dtype=np.int32)
    for k, nb in enumerate(adj):
        indptr[k + 1] = indptr[k] + len(nb)
    indices = np.array([b for nb in adj for b in nb], dtype=np.int32)
    return indptr, indices


def _dense_nmap(M: MatchMatrix, adj_x: list[list[int]]) -> np.ndarray:
    p, q = M.shape
    dmax = max((len(nb) for nb in adj_x), default=0)
    nm = np.full((p, q, max(dmax, 1)), -1, dtype=np.int32)
    for (i, j), mapping in M.nmap.items():
        for t, a in enumerate(adj_x[i]):
            b = mapping.get(a)
            if b is not None:
                nm[i, j, t] = b
    return nm


def _resolve(M: MatchMatrix) -> None:
    p, q = M.shape
    f, c, s = M.flags, M.counters, M.sims
    for j in range(q):
        rows = np.nonzero(f[:, j])[0]
        if rows.size > 1:
            best = max(rows, key=lambda i: (c[i, j], s[i, j], -i))
            f[:, j] = False
            f[best, j] = True
    for i in range(p):
        cols = np.nonzero(f[i, :])[0]
        if cols.size > 1:
            best = max(cols, key=lambda j: (c[i, j], s[i, j], -j))
            f[i, :] = False
            f[i, best] = True


def stage3_vote(M: MatchMatrix, gx: PortraitGraph, gy: PortraitGraph) -> MatchMatrix:
    adj_x = _index_adjacency(gx)
    indptr, indices = _csr(adj_x)
    M.counters = kernels.bfs_vote(M.flags.astype(np.uint8), _dense_nmap(M, adj_x), indptr, indices)
    _resolve(M)
    return M


def graph_similarity(M: MatchMatrix, gx: PortraitGraph, gy: PortraitGraph,
                     space: SimilaritySpace | None = None) -> float:
    return score_assignment(assignment_pairs(M), M.sims, gx, gy)


def assignment_pairs(M: MatchMatrix) -> list[tuple[int, int]]:
    return M.pairs()


def score_assignment(pairs: Iterable[tuple[int, int]], sims: np.ndarray,
                     gx: PortraitGraph, gy: PortraitGraph) -> float:
    """Node term plus edge term for an index-level assignment.

    An x-edge (a, b) counts as preserved when its endpoints map onto the two
    ends of a y-edge, in either orientation.
    """
    pairs = list(pairs)
    p, q = len(gx.nodes), len(gy.nodes)
    node_term = math.fsum(float(sims[i, j]) for i, j in pairs) / (p + q) if p + q else 0.0
    ex, ey = _index_edges(gx), _index_edges(gy)
    if not ex and not ey:
        return node_term
    fwd = dict(pairs)
    preserved = 0
    for a, b in ex:
        c, d = fwd.get(a), fwd.get(b)
        if c is not None and d is not None and (min(c, d), max(c, d)) in ey:
            preserved += 1
    return node_term + preserved / (len(ex) + len(ey))


def _index_edges(g: PortraitGraph) -> set[tuple[int, int]]:
    pos = {n.id: k for k, n in enumerate(g.nodes)}
    out = set()
    for a, b in g.edges:
        if a in pos and b in pos and a != b:
            i, j = pos[a], pos[b]
            out.add((min(i, j), max(i, j)))
    return out


# ----------------------------------------------------------------------------
# pipeline


@dataclass
class MatchResult:
    assignment: dict[int, int | None]
    graph_similarity: float
    matrix: MatchMatrix

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(x, y) for y, x in self.assignment.items() if x is not None]


def match_graphs(gx: PortraitGraph, gy: PortraitGraph, space: SimilaritySpace,
                 xi: float = DEFAULT_XI) -> MatchResult:
    """Run all three stages. The assignment maps each y node id (photo side)
    to its matched x node id or None."""
    M = stage1_filter(gx, gy, space, xi)
    stage2_neighbor_map(M, gx, gy, space)
    stage3_vote(M, gx, gy)
    score = graph_similarity(M, gx, gy, space)
    assignment: dict[int, int | None] = {n.id: None for n in gy.nodes}
    for i, j in M.pairs():
        assignment[gy.nodes[j].id] = gx.nodes[i].id
    return MatchResult(assignment, score, M)


def profile_similarity(gx: PortraitGraph, gy: PortraitGraph, space: SimilaritySpace,
                       xi: float = DEFAULT_XI) -> float:
    return match_graphs(gx, gy, space, xi).graph_similarity


def score_table(invisible: Sequence[tuple[str, PortraitGraph]], photo: Sequence[PortraitGraph],
                space: SimilaritySpace, xi: float = DEFAULT_XI) -> np.ndarray:
    """graph_similarity for every (invisible user, photo person) pair."""
    table = np.zeros((len(invisible), len(photo)))
    for u, (_, gx) in enumerate(invisible):
        for k, gy in enumerate(photo):
            table[u, k] = profile_similarity(gx, gy, space, xi)
    return table


def resolve_matches(users: Sequence[str], table: np.ndarray,
                    theta: float = DEFAULT_THETA) -> list[tuple[int, str, float]]:
    """Greedy one-to-one acceptance by descending score (ties: photo index,
    then user order)."""
    cands = [(-table[u, k], k, u) for u in range(table.shape[0]) for k in range(table.shape[1])
             if table[u, k] >= theta]
    cands.sort()
    used_u: set[int] = set()
    used_k: set[int] = set()
    out = []
    for neg, k, u in cands:
        if u in used_u or k in used_k:
            continue
        used_u.add(u)
        used_k.add(k)
        out.append((k, users[u], -neg))
    out.sort()
    return out


def match_profiles(invisible: Sequence[tuple[str, PortraitGraph]], photo: Sequence[PortraitGraph],
                   space: SimilaritySpace, xi: float = DEFAULT_XI,
                   theta: float = DEFAULT_THETA) -> list[tuple[int, str, float]]:
    """Accepted (photo index, user id, score) triples, one-to-one."""
    table = score_table(invisible, photo, space, xi)
    return resolve_matches([uid for uid, _ in invisible], table, theta)
