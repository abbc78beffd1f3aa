"""Threshold sweeps and accuracy measurements over a synthetic corpus.

Every trial is a photo with some invisible users present among unregistered
bystanders. Score tables are computed once per mode and re-thresholded, so a
sweep costs no more than a single evaluation.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lsh import FamilySet, generate_family_set
from .matching import DEFAULT_THETA, DEFAULT_XI, SimilaritySpace, resolve_matches, score_table
from .portrait import PortraitGraph
from .protocol.geometry import Pose
from .synth import NoiseModel, SyntheticPerson, gen_scene, observe_safely
from .transform import transform_graph

DEFAULT_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass
class Trial:
    users: list[str]
    truth: dict[int, str]  # photo index -> invisible user present there
    n_photo: int
    tables: dict[str, np.ndarray]  # mode -> (users x photo) score table


def _place(k: int) -> tuple[float, float]:
    return (4.0 + k, 0.0)


def build_trials(persons: Sequence[SyntheticPerson], n_trials: int, seed: int = 0,
                 n_invisible: int = 3, n_bystanders: int = 5, absent: bool = False,
                 noise: NoiseModel | None = None, xi: float = DEFAULT_XI,
                 plain: SimilaritySpace | None = None, hashed: SimilaritySpace | None = None,
                 families: FamilySet | None = None) -> list[Trial]:
    """``absent=True`` keeps the invisible users out of the photo (they are
    near but occluded), the no-true-match regime."""
    plain = plain or SimilaritySpace.plain()
    hashed = hashed or SimilaritySpace.hashed()
    families = families or generate_family_set(seed, hashed.m)
    noise = noise or NoiseModel()
    rng = random.Random(seed)
    pose = Pose((0.0, 0.0))
    trials = []
    for t in range(n_trials):
        chosen = rng.sample(list(persons), n_invisible + n_bystanders)
        inv, bys = chosen[:n_invisible], chosen[n_invisible:]
        subjects = [] if absent else [(p, _place(k)) for k, p in enumerate(inv)]
        scene = gen_scene(subjects, pose, bys, seed=rng.getrandbits(62), noise=noise,
                          photo_id=f"t{t}")
        profiles = [(p.person_id, p.graph) for p in inv]
        R = rng.getrandbits(512)
        tables = {"plain": score_table(profiles, scene.graphs, plain, xi)}
        hprof = [(uid, transform_graph(g, R, families)) for uid, g in profiles]
        hphoto = [transform_graph(g, R, families) for g in scene.graphs]
        tables["hashed"] = score_table(hprof, hphoto, hashed, xi)
        trials.append(Trial([p.person_id for p in inv], dict(scene.truth), len(scene.graphs), tables))
    return trials


def decisions(trial: Trial, mode: str, theta: float) -> set[tuple[int, str]]:
    return {(k, uid) for k, uid, _ in resolve_matches(trial.users, trial.tables[mode], theta)}


def count_errors(trial: Trial, chosen: set[tuple[int, str]]) -> tuple[int, int, int, int]:
    """(FN, present invisible users, FP, photo persons).

    FN: an invisible user present in the photo whose own region is not
    erased. FP: an erasure that hits anyone other than the matched user.
    """
    erased_own = {uid for k, uid in chosen if trial.truth.get(k) == uid}
    present = set(trial.truth.values())
    fn = len(present - erased_own)
    fp = sum(1 for k, uid in chosen if trial.truth.get(k) != uid)
    return fn, len(present), fp, trial.n_photo


@dataclass(frozen=True)
class SweepRow:
    theta: float
    mode: str
    fn_rate: float
    fp_rate: float
    fn: int
    present: int
    fp: int
    persons: int


def sweep(trials: Sequence[Trial], thetas: Sequence[float] = DEFAULT_GRID,
          modes: Sequence[str] = ("plain", "hashed")) -> list[SweepRow]:
    if not thetas:
        raise ValueError("empty threshold grid")
    rows = []
    for mode in modes:
        for theta in thetas:
            fn = present = fp = persons = 0
            for tr in trials:
                a, b, c, d = count_errors(tr, decisions(tr, mode, theta))
                fn, present, fp, persons = fn + a, present + b, fp + c, persons + d
            rows.append(SweepRow(float(theta), mode, fn / present if present else 0.0,
                                 fp / persons if persons else 0.0, fn, present, fp, persons))
    return rows


def mode_agreement(trials: Sequence[Trial], theta: float = DEFAULT_THETA) -> float:
    """Fraction of trials where plain and hashed decisions are identical."""
    if not trials:
        return 1.0
    same = sum(decisions(t, "plain", theta) == decisions(t, "hashed", theta) for t in trials)
    return same / len(trials)


def self_cross(persons: Sequence[SyntheticPerson], n_pairs: int, seed: int = 0,
               noise: NoiseModel | None = None, space: SimilaritySpace | None = None,
               xi: float = DEFAULT_XI) -> tuple[np.ndarray, np.ndarray]:
    """Scores of canonical profiles against observations of the same person
    and of a different person."""
    from .matching import profile_similarity

    noise = noise or NoiseModel()
    space = space or SimilaritySpace.plain()
    rng = random.Random(seed)
    same, cross = [], []
    for _ in range(n_pairs):
        a, b = rng.sample(list(persons), 2)
        obs = observe_safely(a, noise, rng.getrandbits(62))
        same.append(profile_similarity(a.graph, obs, space, xi))
        cross.append(profile_similarity(b.graph, obs, space, xi))
    return np.array(same), np.array(cross)


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    lines = ["mode,theta,fn_rate,fp_rate,fn,present,fp,persons"]
    for r in rows:
        lines.append(f"{r.mode},{r.theta:.3f},{r.fn_rate:.6f},{r.fp_rate:.6f},"
                     f"{r.fn},{r.present},{r.fp},{r.persons}")
    return "\n".join(lines) + "\n"


def graphs_of(persons: Sequence[SyntheticPerson]) -> list[PortraitGraph]:
    return [p.graph for p in persons]
