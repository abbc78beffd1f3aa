"""Scramble-then-hash transform applied by every ring participant."""
from __future__ import annotations

from typing import Mapping

from .lsh import FamilySet, HashCode, hash_vector
from .portrait import (
    FeatureKind, FeatureVector, HashedFeature, HashedPortraitGraph, PortraitGraph, PortraitNode,
)
from .scramble import ScrambleCode, apply_scramble, kind_codes


def transform_vector(f: FeatureVector, codes: Mapping[FeatureKind, ScrambleCode],
                     families: FamilySet) -> HashedFeature:
    x = apply_scramble(f.array(), codes[f.kind])
    return HashedFeature(f.kind, hash_vector(families[f.kind], x))


def transform_graph(g: PortraitGraph, R: int, families: FamilySet,
                    session_ref: str | None = None) -> HashedPortraitGraph:
    """Same ids, labels, edges and region tokens; every vector replaced by
    the LSH code of its scrambled form."""
    dims = {k: fam.D for k, fam in families.families.items()}
    codes = kind_codes(R, dims)
    nodes = tuple(
        PortraitNode(n.id, n.label, tuple(transform_vector(f, codes, families) for f in n.features),
                     n.region_ref)
        for n in g.nodes
    )
    return HashedPortraitGraph(nodes, g.edges, g.owner_ref, session_ref)


def transform_codes(vectors: list[FeatureVector], R: int, families: FamilySet) -> list[HashCode]:
    dims = {k: fam.D for k, fam in families.families.items()}
    codes = kind_codes(R, dims)
    return [transform_vector(v, codes, families).code for v in vectors]
