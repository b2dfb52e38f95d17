# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for finite matrix groups and integer Smith forms.

Group elements are block-diagonal matrices over Z/M, stored as an
``(order, blocks, n, n)`` int64 array sorted by :func:`encode` code.
"""

import numpy as np
cimport numpy as cnp

ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32

cnp.import_array()


cdef inline i64 _code(i64[:, :, ::1] m, i64 M):
    cdef Py_ssize_t b, i, j
    cdef i64 c = 0
    for b in range(m.shape[0]):
        for i in range(m.shape[1]):
            for j in range(m.shape[2]):
                c = c * M + m[b, i, j]
    return c


def encode(i64[:, :, :, ::1] elems, i64 M):
    cdef Py_ssize_t g, order = elems.shape[0]
    out = np.empty(order, dtype=np.int64)
    cdef i64[::1] o = out
    for g in range(order):
        o[g] = _code(elems[g], M)
    return out


cdef inline Py_ssize_t _search(i64[::1] codes, i64 key):
    cdef Py_ssize_t lo = 0, hi = codes.shape[0] - 1, mid
    while lo <= hi:
        mid = (lo + hi) >> 1
        if codes[mid] < key:
            lo = mid + 1
        elif codes[mid] > key:
            hi = mid - 1
        else:
            return mid
    return -1


def cayley_table(i64[:, :, :, ::1] elems, i64[::1] codes, i64 M):
    cdef Py_ssize_t order = elems.shape[0], nb = elems.shape[1], n = elems.shape[2]
    cdef Py_ssize_t a, b, blk, i, j, k, idx
    cdef i64 s, c
    table = np.empty((order, order), dtype=np.int32)
    cdef i32[:, ::1] t = table
    for a in range(order):
        for b in range(order):
            c = 0
            for blk in range(nb):
                for i in range(n):
                    for j in range(n):
                        s = 0
                        for k in range(n):
                            s += elems[a, blk, i, k] * elems[b, blk, k, j]
                        c = c * M + s % M
            idx = _search(codes, c)
            if idx < 0:
                raise ValueError("element list is not closed under multiplication")
            t[a, b] = <i32>idx
    return table


def inverses(i32[:, ::1] table, Py_ssize_t identity):
    cdef Py_ssize_t order = table.shape[0], a, b
    out = np.full(order, -1, dtype=np.int32)
    cdef i32[::1] o = out
    for a in range(order):
        for b in range(order):
            if table[a, b] == identity:
                o[a] = <i32>b
                break
    return out


def class_ids(i32[:, ::1] table, i32[::1] inv):
    """Label each element by the index of its conjugacy class (in order of
    first appearance)."""
    cdef Py_ssize_t order = table.shape[0], x, g, y
    cdef i32 nc = 0
    out = np.full(order, -1, dtype=np.int32)
    cdef i32[::1] o = out
    for x in range(order):
        if o[x] >= 0:
            continue
        for g in range(order):
            y = table[table[g, x], inv[g]]
            o[y] = nc
        nc += 1
    return out


def class_constants(i32[:, ::1] table, i32[::1] inv, i32[::1] cid, i32[::1] reps):
    """``a[i, j, k] = #{x in C_i : x^-1 z_k in C_j}`` for class reps ``z_k``."""
    cdef Py_ssize_t order = table.shape[0], nc = reps.shape[0], k, x
    out = np.zeros((nc, nc, nc), dtype=np.int64)
    cdef i64[:, :, ::1] a = out
    cdef i32 z
    for k in range(nc):
        z = reps[k]
        for x in range(order):
            a[cid[x], cid[table[inv[x], z]], k] += 1
    return out


cdef i64 _LIMIT = 1 << 31


def snf_diagonal(i64[:, ::1] A):
    """Invariant factors of an integer matrix (nonzero ones, in order).

    Raises OverflowError when an intermediate leaves the safe int64 range.
    """
    cdef Py_ssize_t r = A.shape[0], c = A.shape[1], t, i, j, pi, pj
    cdef i64 best, v, q, piv
    cdef bint done
    M = np.array(A, dtype=np.int64, copy=True)
    cdef i64[:, ::1] m = M
    diag = []
    for t in range(min(r, c)):
        while True:
            best = 0
            pi = -1
            pj = -1
            for i in range(t, r):
                for j in range(t, c):
                    v = m[i, j] if m[i, j] >= 0 else -m[i, j]
                    if v != 0 and (best == 0 or v < best):
                        best = v
                        pi = i
                        pj = j
            if pi < 0:
                return diag
            if pi != t:
                for j in range(t, c):
                    m[t, j], m[pi, j] = m[pi, j], m[t, j]
            if pj != t:
                for i in range(t, r):
                    m[i, t], m[i, pj] = m[i, pj], m[i, t]
            piv = m[t, t]
            done = True
            for i in range(t + 1, r):
                if m[i, t] != 0:
                    q = m[i, t] // piv
                    for j in range(t, c):
                        v = m[i, j] - q * m[t, j]
                        if v > _LIMIT or v < -_LIMIT:
                            raise OverflowError("snf intermediate exceeds int64 budget")
                        m[i, j] = v
                    if m[i, t] != 0:
                        done = False
            for j in range(t + 1, c):
                if m[t, j] != 0:
                    q = m[t, j] // piv
                    for i in range(t, r):
                        v = m[i, j] - q * m[i, t]
                        if v > _LIMIT or v < -_LIMIT:
                            raise OverflowError("snf intermediate exceeds int64 budget")
                        m[i, j] = v
                    if m[t, j] != 0:
                        done = False
            if not done:
                continue
            # divisibility: fold an offending row into row t and retry
            for i in range(t + 1, r):
                for j in range(t + 1, c):
                    if m[i, j] % piv != 0:
                        for pj in range(t, c):
                            m[t, pj] += m[i, pj]
                        done = False
                        break
                if not done:
                    break
            if done:
                diag.append(piv if piv > 0 else -piv)
                break
    return diag
