"""Portrait matching with scrambled LSH codes and ring key agreement,
plus a message-level simulator of the capture protocol."""
from .agreement import GroupParams, closed_form_R, init_params, run_ring
from .kernels import BACKEND
from .lsh import FamilySet, HashCode, generate_family, generate_family_set, hamming, hash_vector
from .matching import SimilaritySpace, match_graphs, match_profiles
from .portrait import (
    FeatureKind, FeatureVector, NodeLabel, PortraitGraph, PortraitNode, body_node, face_node,
)
from .scramble import apply_scramble, scramble_code
from .synth import NoiseModel, gen_corpus, gen_person

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "FamilySet", "FeatureKind", "FeatureVector", "GroupParams", "HashCode", "NodeLabel",
    "NoiseModel", "PortraitGraph", "PortraitNode", "SimilaritySpace", "apply_scramble", "body_node",
    "closed_form_R", "face_node", "gen_corpus", "gen_person", "generate_family", "generate_family_set",
    "hamming", "hash_vector", "init_params", "match_graphs", "match_profiles", "run_ring",
    "scramble_code",
]
