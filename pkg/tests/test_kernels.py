import os
import subprocess
import sys

import numpy as np
import pytest

from portraitguard import _pykernels, kernels

ck = pytest.importorskip("portraitguard._ckernels")


def random_case(rng, p, q, deg=3):
    flags = (rng.random((p, q)) < 0.4).astype(np.uint8)
    indptr = np.zeros(p + 1, dtype=np.int32)
    nbrs = []
    for i in range(p):
        nb = rng.choice(p, size=min(deg, p), replace=False)
        nbrs.extend(int(x) for x in nb)
        indptr[i + 1] = len(nbrs)
    indices = np.array(nbrs, dtype=np.int32)
    dmax = int(np.diff(indptr).max()) if p else 1
    nmap = rng.integers(-1, q, (p, q, max(dmax, 1))).astype(np.int32)
    return flags, nmap, indptr, indices


def test_hungarian_backends_agree(rng):
    for _ in range(200):
        p, q = rng.integers(1, 9, 2)
        w = rng.random((p, q))
        w[rng.random((p, q)) < 0.2] = 0.0
        a, b = _pykernels.hungarian_max(w), ck.hungarian_max(w)
        ta = sum(w[i, j] for i, j in enumerate(a) if j >= 0)
        tb = sum(w[i, j] for i, j in enumerate(b) if j >= 0)
        assert ta == pytest.approx(tb, abs=1e-12)
        assert np.array_equal(a, b)


def test_hungarian_empty():
    for mod in (_pykernels, ck):
        assert mod.hungarian_max(np.zeros((0, 3))).shape == (0,)
        assert list(mod.hungarian_max(np.zeros((2, 0)))) == [-1, -1]


def test_hamming_backends_agree(rng):
    for nb in (1, 2, 16, 17):
        a = rng.integers(0, 256, (7, nb), dtype=np.uint8)
        b = rng.integers(0, 256, (5, nb), dtype=np.uint8)
        ref = np.array([[sum(bin(x ^ y).count("1") for x, y in zip(r, s)) for s in b] for r in a])
        assert np.array_equal(_pykernels.hamming_matrix(a, b), ref)
        assert np.array_equal(ck.hamming_matrix(a, b), ref)


def test_bfs_vote_backends_agree(rng):
    for _ in range(100):
        p, q = (int(v) for v in rng.integers(1, 8, 2))
        case = random_case(rng, p, q)
        assert np.array_equal(_pykernels.bfs_vote(*case), ck.bfs_vote(*case))


def test_backend_selection_env():
    assert kernels.BACKEND in ("cython", "python")
    code = "import portraitguard.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, PORTRAITGUARD_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env.pop("PORTRAITGUARD_PURE")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"
