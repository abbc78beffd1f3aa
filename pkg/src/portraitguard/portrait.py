"""Portrait graphs, feature vectors and their wire/debug encodings."""
from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Sequence, Union

import numpy as np

if TYPE_CHECKING:
    from .lsh import HashCode

FORMAT_VERSION = 1
MODE_PLAIN = 0
MODE_HASHED = 1


class FeatureKind(enum.IntEnum):
    FACE = 1
    COLOR_HISTOGRAM = 2
    TEXTURE = 3

    @property
    def tag(self) -> str:
        return self.name.lower()


class NodeLabel(enum.IntEnum):
    HUMAN_FACE = 1
    HUMAN_BODY = 2


DEFAULT_DIMS: dict[FeatureKind, int] = {
    FeatureKind.FACE: 48,
    FeatureKind.COLOR_HISTOGRAM: 64,
    FeatureKind.TEXTURE: 20,
}

# feature kinds each label must carry, in canonical order
LABEL_KINDS: dict[NodeLabel, tuple[FeatureKind, ...]] = {
    NodeLabel.HUMAN_FACE: (FeatureKind.FACE,),
    NodeLabel.HUMAN_BODY: (FeatureKind.COLOR_HISTOGRAM, FeatureKind.TEXTURE),
}


class EncodingError(ValueError):
    """Raised when a graph cannot be put on the wire."""


@dataclass(frozen=True)
class FeatureVector:
    kind: FeatureKind
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", FeatureKind(self.kind))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def dim(self) -> int:
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def quantized(self) -> bytes:
        """8-bit fixed point encoding; raises EncodingError on bad values."""
        arr = self.array()
        if not np.all(np.isfinite(arr)):
            raise EncodingError(f"non-finite value in {self.kind.tag} vector")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise EncodingError(f"{self.kind.tag} vector value outside [0, 1]")
        return bytes(np.rint(arr * 255.0).astype(np.uint8))

    @classmethod
    def from_quantized(cls, kind: FeatureKind, payload: bytes) -> "FeatureVector":
        return cls(kind, tuple(b / 255.0 for b in payload))


@dataclass(frozen=True)
class HashedFeature:
    """A feature vector after scrambling and LSH: an m-bit code."""

    kind: FeatureKind
    code: "HashCode"

    def __post_init__(self):
        object.__setattr__(self, "kind", FeatureKind(self.kind))


Feature = Union[FeatureVector, HashedFeature]


@dataclass(frozen=True)
class PortraitNode:
    id: int
    label: NodeLabel
    features: tuple[Feature, ...]
    region_ref: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "label", NodeLabel(self.label))
        object.__setattr__(self, "features", tuple(self.features))

    def feature(self, kind: FeatureKind) -> Feature:
        for f in self.features:
            if f.kind == kind:
                return f
        raise KeyError(kind)


def _norm_edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class PortraitGraph:
    nodes: tuple[PortraitNode, ...]
    edges: frozenset[tuple[int, int]] = frozenset()
    owner_ref: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(
            self, "edges", frozenset(_norm_edge(int(a), int(b)) for a, b in self.edges)
        )

    @property
    def hashed(self) -> bool:
        return False

    def node_ids(self) -> list[int]:
        return [n.id for n in self.nodes]

    def node(self, node_id: int) -> PortraitNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def neighbors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for a, b in sorted(self.edges):
            if a in adj and b in adj:
                adj[a].append(b)
                adj[b].append(a)
        return adj


@dataclass(frozen=True)
class HashedPortraitGraph(PortraitGraph):
    session_ref: str | None = None

    @property
    def hashed(self) -> bool:
        return True


# ----------------------------------------------------------------------------
# validation


def validate_graph(
    g: PortraitGraph, dims: Mapping[FeatureKind, int] = DEFAULT_DIMS, m: int | None = None
) -> list[str]:
    """Return a list of invariant violations; empty means valid.

    ``m`` is only checked for hashed graphs (code length in bits).
    """
    report: list[str] = []
    if not g.nodes:
        report.append("graph has no nodes")
    seen: set[int] = set()
    for node in g.nodes:
        if node.id in seen:
            report.append(f"duplicate node id {node.id}")
        seen.add(node.id)
        if not 0 <= node.id <= 0xFFFF:
            report.append(f"node id {node.id} out of range")
        if not node.features:
            report.append(f"node {node.id}: empty feature list")
            continue
        kinds = sorted(f.kind for f in node.features)
        if kinds != sorted(LABEL_KINDS[node.label]):
            report.append(
                f"node {node.id}: label/feature mismatch "
                f"({node.label.name.lower()} with {[k.tag for k in kinds]})"
            )
        for f in node.features:
            if isinstance(f, HashedFeature):
                if not g.hashed:
                    report.append(f"node {node.id}: hashed feature in plain graph")
                elif m is not None and f.code.m != m:
                    report.append(f"node {node.id}: {f.kind.tag} code has {f.code.m} bits, expected {m}")
                continue
            if g.hashed:
                report.append(f"node {node.id}: plain feature in hashed graph")
            want = dims.get(f.kind)
            if want is not None and f.dim != want:
                report.append(f"node {node.id}: {f.kind.tag} dim {f.dim} != {want}")
            arr = f.array()
            if not np.all(np.isfinite(arr)):
                report.append(f"node {node.id}: non-finite {f.kind.tag} value")
            elif arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                report.append(f"node {node.id}: {f.kind.tag} value outside [0, 1]")
    for a, b in sorted(g.edges):
        if a == b:
            report.append(f"self-loop on node {a}")
        for end in (a, b):
            if end not in seen:
                report.append(f"dangling edge endpoint {end} in edge ({a}, {b})")
    return report


# ----------------------------------------------------------------------------
# binary profile frame

_HEADER = struct.Struct(">BBH")
_NODE = struct.Struct(">HBB")
_FEATURE = struct.Struct(">BH")
_U16 = struct.Struct(">H")
_EDGE = struct.Struct(">HH")


def _feature_payload(f: Feature) -> bytes:
    if isinstance(f, HashedFeature):
        return f.code.to_bytes()
    return f.quantized()


def serialize_profile(g: PortraitGraph) -> bytes:
    """Encode a plain or hashed graph as a canonical binary frame.

    owner_ref, region_ref and session_ref are not part of the frame; they
    travel in the message envelope.
    """
    if not g.nodes:
        raise EncodingError("graph has no nodes")
    if len(g.nodes) > 0xFFFF or len(g.edges) > 0xFFFF:
        raise EncodingError("graph too large for frame")
    mode = MODE_HASHED if g.hashed else MODE_PLAIN
    out = bytearray(_HEADER.pack(FORMAT_VERSION, mode, len(g.nodes)))
    for node in g.nodes:
        if not node.features:
            raise EncodingError(f"node {node.id}: empty feature list")
        if not 0 <= node.id <= 0xFFFF:
            raise EncodingError(f"node id {node.id} out of range")
        out += _NODE.pack(node.id, int(node.label), len(node.features))
        for f in node.features:
            if isinstance(f, HashedFeature) != g.hashed:
                raise EncodingError(f"node {node.id}: feature type does not match frame mode")
            payload = _feature_payload(f)
            out += _FEATURE.pack(int(f.kind), len(payload))
            out += payload
    out += _U16.pack(len(g.edges))
    for a, b in sorted(g.edges):
        out += _EDGE.pack(a, b)
    return bytes(out)


def deserialize_profile(
    data: bytes, owner_ref: str | None = None, session_ref: str | None = None,
    m: int | None = None,
) -> PortraitGraph:
    """Inverse of serialize_profile. ``m`` trims hashed codes whose bit
    length is not a multiple of 8; by default m = 8 * payload length."""
    from .lsh import HashCode

    version, mode, count = _HEADER.unpack_from(data, 0)
    if version != FORMAT_VERSION:
        raise EncodingError(f"unsupported frame version {version}")
    if mode not in (MODE_PLAIN, MODE_HASHED):
        raise EncodingError(f"unknown frame mode {mode}")
    pos = _HEADER.size
    nodes = []
    for _ in range(count):
        node_id, label, nfeat = _NODE.unpack_from(data, pos)
        pos += _NODE.size
        feats: list[Feature] = []
        for _ in range(nfeat):
            kind, length = _FEATURE.unpack_from(data, pos)
            pos += _FEATURE.size
            payload = bytes(data[pos:pos + length])
            if len(payload) != length:
                raise EncodingError("truncated feature payload")
            pos += length
            if mode == MODE_HASHED:
                bits = m if m is not None else 8 * length
                feats.append(HashedFeature(FeatureKind(kind), HashCode.from_bytes(payload, bits)))
            else:
                feats.append(FeatureVector.from_quantized(FeatureKind(kind), payload))
        nodes.append(PortraitNode(node_id, NodeLabel(label), tuple(feats)))
    (nedges,) = _U16.unpack_from(data, pos)
    pos += _U16.size
    edges = set()
    for _ in range(nedges):
        edges.add(_EDGE.unpack_from(data, pos))
        pos += _EDGE.size
    if pos != len(data):
        raise EncodingError(f"{len(data) - pos} trailing bytes after frame")
    if mode == MODE_HASHED:
        return HashedPortraitGraph(tuple(nodes), frozenset(edges), owner_ref, session_ref)
    return PortraitGraph(tuple(nodes), frozenset(edges), owner_ref)


def feature_payload_size(g: PortraitGraph) -> int:
    """Bytes of feature payload in the frame (excluding all framing)."""
    return sum(len(_feature_payload(f)) for n in g.nodes for f in n.features)


def plain_payload_law(g: PortraitGraph, dims: Mapping[FeatureKind, int] = DEFAULT_DIMS) -> int:
    faces = sum(1 for n in g.nodes if n.label == NodeLabel.HUMAN_FACE)
    bodies = len(g.nodes) - faces
    face_bytes = dims[FeatureKind.FACE]
    body_bytes = dims[FeatureKind.COLOR_HISTOGRAM] + dims[FeatureKind.TEXTURE]
    return face_bytes * faces + body_bytes * bodies


# ----------------------------------------------------------------------------
# debug text encoding (JSON, one graph per file)


def graph_to_dict(g: PortraitGraph) -> dict:
    nodes = []
    for n in g.nodes:
        feats = []
        for f in n.features:
            if isinstance(f, HashedFeature):
                feats.append({"kind": f.kind.tag, "m": f.code.m, "code": f.code.to_bytes().hex()})
            else:
                feats.append({"kind": f.kind.tag, "values": list(f.values)})
        entry = {"id": n.id, "label": n.label.name.lower(), "features": feats}
        if n.region_ref is not None:
            entry["region_ref"] = n.region_ref
        nodes.append(entry)
    d = {
        "mode": "hashed" if g.hashed else "plain",
        "owner_ref": g.owner_ref,
        "nodes": nodes,
        "edges": [list(e) for e in sorted(g.edges)],
    }
    if isinstance(g, HashedPortraitGraph):
        d["session_ref"] = g.session_ref
    return d


def graph_from_dict(d: dict) -> PortraitGraph:
    from .lsh import HashCode

    nodes = []
    for entry in d["nodes"]:
        feats: list[Feature] = []
        for f in entry["features"]:
            kind = FeatureKind[f["kind"].upper()]
            if "code" in f:
                feats.append(HashedFeature(kind, HashCode.from_bytes(bytes.fromhex(f["code"]), f["m"])))
            else:
                feats.append(FeatureVector(kind, tuple(f["values"])))
        nodes.append(PortraitNode(entry["id"], NodeLabel[entry["label"].upper()],
                                  tuple(feats), entry.get("region_ref")))
    edges = frozenset(tuple(e) for e in d["edges"])
    if d.get("mode") == "hashed":
        return HashedPortraitGraph(tuple(nodes), edges, d.get("owner_ref"), d.get("session_ref"))
    return PortraitGraph(tuple(nodes), edges, d.get("owner_ref"))


def dump_graph(g: PortraitGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=1) + "\n", encoding="utf-8")


def load_graph(path: str | Path) -> PortraitGraph:
    return graph_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ----------------------------------------------------------------------------
# construction helpers


def face_node(node_id: int, face: Sequence[float], region_ref: str | None = None) -> PortraitNode:
    return PortraitNode(node_id, NodeLabel.HUMAN_FACE,
                        (FeatureVector(FeatureKind.FACE, tuple(face)),), region_ref)


def body_node(node_id: int, histogram: Sequence[float], texture: Sequence[float],
              region_ref: str | None = None) -> PortraitNode:
    return PortraitNode(
        node_id, NodeLabel.HUMAN_BODY,
        (FeatureVector(FeatureKind.COLOR_HISTOGRAM, tuple(histogram)),
         FeatureVector(FeatureKind.TEXTURE, tuple(texture))),
        region_ref,
    )


def quantize_graph(g: PortraitGraph) -> PortraitGraph:
    """One quantization pass, as a wire round-trip would apply."""
    return deserialize_profile(serialize_profile(g), owner_ref=g.owner_ref)


def with_owner(g: PortraitGraph, owner_ref: str | None) -> PortraitGraph:
    if isinstance(g, HashedPortraitGraph):
        return HashedPortraitGraph(g.nodes, g.edges, owner_ref, g.session_ref)
    return PortraitGraph(g.nodes, g.edges, owner_ref)


def strip_regions(g: PortraitGraph) -> PortraitGraph:
    nodes = tuple(PortraitNode(n.id, n.label, n.features) for n in g.nodes)
    return PortraitGraph(nodes, g.edges, g.owner_ref)

