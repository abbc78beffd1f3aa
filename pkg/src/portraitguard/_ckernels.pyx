# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled matching kernels; mirrors ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY
from libc.stdint cimport uint8_t, int64_t, int32_t, uint64_t

cnp.import_array()

cdef extern from *:
    int __builtin_popcount(unsigned int) nogil


def hungarian_max(weights):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t p = w.shape[0], q = w.shape[1]
    if p == 0 or q == 0:
        return np.full(p, -1, dtype=np.int64)
    cdef bint transposed = p > q
    if transposed:
        w = np.ascontiguousarray(w.T)
        p, q = q, p
    cdef double[:, ::1] cw = w
    cdef double[::1] u = np.zeros(p + 1)
    cdef double[::1] v = np.zeros(q + 1)
    cdef double[::1] minv = np.empty(q + 1)
    cdef Py_ssize_t[::1] match = np.zeros(q + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(q + 1, dtype=np.intp)
    cdef uint8_t[::1] used = np.zeros(q + 1, dtype=np.uint8)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur
    for i in range(1, p + 1):
        match[0] = i
        j0 = 0
        for j in range(q + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = match[j0]
            delta = INFINITY
            j1 = 0
            for j in range(1, q + 1):
                if not used[j]:
                    cur = -cw[i0 - 1, j - 1] - u[i0] - v[j]
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
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out
    if transposed:
        out = np.full(q, -1, dtype=np.int64)
        for j in range(1, q + 1):
            if match[j]:
                out[j - 1] = match[j] - 1
    else:
        out = np.full(p, -1, dtype=np.int64)
        for j in range(1, q + 1):
            if match[j]:
                out[match[j] - 1] = j - 1
    return out


def hamming_matrix(a, b):
    cdef const uint8_t[:, ::1] ca = np.ascontiguousarray(a, dtype=np.uint8)
    cdef const uint8_t[:, ::1] cb = np.ascontiguousarray(b, dtype=np.uint8)
    cdef Py_ssize_t p = ca.shape[0], q = cb.shape[0], nb = ca.shape[1]
    if cb.shape[1] != nb:
        raise ValueError("code widths differ")
    out = np.zeros((p, q), dtype=np.int64)
    cdef int64_t[:, ::1] co = out
    cdef Py_ssize_t i, j, t
    cdef int64_t acc
    for i in range(p):
        for j in range(q):
            acc = 0
            for t in range(nb):
                acc += __builtin_popcount(ca[i, t] ^ cb[j, t])
            co[i, j] = acc
    return out


def bfs_vote(flags, nmap, indptr_x, indices_x):
    cdef const uint8_t[:, ::1] cf = np.ascontiguousarray(flags, dtype=np.uint8)
    cdef const int32_t[:, :, ::1] nm = np.ascontiguousarray(nmap, dtype=np.int32)
    cdef const int32_t[::1] ip = np.ascontiguousarray(indptr_x, dtype=np.int32)
    cdef const int32_t[::1] ix = np.ascontiguousarray(indices_x, dtype=np.int32)
    cdef Py_ssize_t p = cf.shape[0], q = cf.shape[1]
    counters = np.zeros((p, q), dtype=np.int64)
    cdef int64_t[:, ::1] cc = counters
    cdef uint8_t[::1] seen_x = np.zeros(p, dtype=np.uint8)
    cdef uint8_t[::1] seen_y = np.zeros(q, dtype=np.uint8)
    cdef Py_ssize_t[::1] qk = np.empty(max(p, 1), dtype=np.intp)
    cdef Py_ssize_t[::1] qg = np.empty(max(p, 1), dtype=np.intp)
    cdef Py_ssize_t i, j, head, tail, k, g, t, a, b, r
    for i in range(p):
        for j in range(q):
            if not cf[i, j]:
                continue
            for r in range(p):
                seen_x[r] = 0
            for r in range(q):
                seen_y[r] = 0
            seen_x[i] = 1
            seen_y[j] = 1
            qk[0] = i
            qg[0] = j
            head = 0
            tail = 1
            while head < tail:
                k = qk[head]
                g = qg[head]
                head += 1
                cc[k, g] += 1
                for t in range(ip[k + 1] - ip[k]):
                    a = ix[ip[k] + t]
                    b = nm[k, g, t]
                    if b < 0 or seen_x[a] or seen_y[b]:
                        continue
                    seen_x[a] = 1
                    seen_y[b] = 1
                    qk[tail] = a
                    qg[tail] = b
                    tail += 1
    return counters
