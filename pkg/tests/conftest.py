import numpy as np
import pytest

from portraitguard.portrait import PortraitGraph, body_node, face_node


def rand_body(rng, node_id, region_ref=None):
    return body_node(node_id, rng.random(64), rng.random(20), region_ref)


def rand_face(rng, node_id, region_ref=None):
    return face_node(node_id, rng.random(48), region_ref)


def path_graph(rng, n, owner="u"):
    nodes = tuple(rand_body(rng, k) for k in range(n))
    return PortraitGraph(nodes, frozenset((k, k + 1) for k in range(n - 1)), owner)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# ----------------------------------------------------------------------------
# acceptance reporting: one line per criterion, plus the suite runtime limit

import time as _time

SUITE_LIMIT_S = 120.0
_results: list[tuple[int, bool, str]] = []
_start = [0.0]


def pytest_sessionstart(session):
    _start[0] = _time.perf_counter()


@pytest.fixture
def criterion(capsys):
    def report(number: int, ok: bool, detail: str) -> bool:
        _results.append((number, ok, detail))
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    elapsed = _time.perf_counter() - _start[0]
    if _results:
        terminalreporter.section("acceptance criteria")
        for number, ok, detail in sorted(_results):
            terminalreporter.line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    verdict = "PASS" if elapsed < SUITE_LIMIT_S else "FAIL"
    terminalreporter.line(f"suite runtime {elapsed:.1f} s (limit {SUITE_LIMIT_S:.0f} s): {verdict}")


def pytest_sessionfinish(session, exitstatus):
    if _time.perf_counter() - _start[0] >= SUITE_LIMIT_S and exitstatus == 0:
        session.exitstatus = 1
