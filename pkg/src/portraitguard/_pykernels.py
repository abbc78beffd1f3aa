"""Reference (pure Python / numpy) versions of the hot matching kernels.

Same signatures as the compiled ``_ckernels`` module; used when the
extension is not built or ``PORTRAITGUARD_PURE=1`` is set.
"""
from __future__ import annotations

from collections import deque

import numpy as np

INF = float("inf")


def hungarian_max(weights) -> np.ndarray:
    """Maximum-weight assignment on a dense p x q matrix.

    Returns ``rows`` of length p with the assigned column or -1. Every row is
    assigned when p <= q (zero-weight pairs included); callers drop those.
    """
    w = np.asarray(weights, dtype=np.float64)
    p, q = w.shape
    if p == 0 or q == 0:
        return np.full(p, -1, dtype=np.int64)
    transposed = p > q
    if transposed:
        w = w.T
        p, q = q, p
    cost = (-w).tolist()
    u = [0.0] * (p + 1)
    v = [0.0] * (q + 1)
    match = [0] * (q + 1)  # row (1-based) assigned to column j
    way = [0] * (q + 1)
    for i in range(1, p + 1):
        match[0] = i
        j0 = 0
        minv = [INF] * (q + 1)
        used = [False] * (q + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            row = cost[i0 - 1]
            ui0 = u[i0]
            delta = INF
            j1 = 0
            for j in range(1, q + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(q + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    if transposed:
        out = np.full(q, -1, dtype=np.int64)
        for j in range(1, q + 1):
            if match[j]:
                out[j - 1] = match[j] - 1
        return out
    out = np.full(p, -1, dtype=np.int64)
    for j in range(1, q + 1):
        if match[j]:
            out[match[j] - 1] = j - 1
    return out


def hamming_matrix(a, b) -> np.ndarray:
    """Pairwise Hamming distances between rows of two packed-bit arrays."""
    a = np.ascontiguousarray(a, dtype=np.uint8)
    b = np.ascontiguousarray(b, dtype=np.uint8)
    return np.bitwise_count(a[:, None, :] ^ b[None, :, :]).sum(axis=-1, dtype=np.int64)


def bfs_vote(flags, nmap, indptr_x, indices_x) -> np.ndarray:
    """Paired-BFS voting counters.

    ``nmap[k, g, t]`` is the y-node matched to the t-th neighbour of x-node k
    under candidate (k, g), or -1.
    """
    flags = np.asarray(flags, dtype=bool)
    p, q = flags.shape
    counters = np.zeros((p, q), dtype=np.int64)
    indptr = np.asarray(indptr_x).tolist()
    indices = np.asarray(indices_x).tolist()
    nm = np.asarray(nmap)
    for i, j in zip(*np.nonzero(flags)):
        seen_x = {int(i)}
        seen_y = {int(j)}
        queue = deque([(int(i), int(j))])
        while queue:
            k, g = queue.popleft()
            counters[k, g] += 1
            row = nm[k, g]
            for t in range(indptr[k + 1] - indptr[k]):
                a = indices[indptr[k] + t]
                b = int(row[t])
                if b < 0 or a in seen_x or b in seen_y:
                    continue
                seen_x.add(a)
                seen_y.add(b)
                queue.append((a, b))
    return counters
