"""Pure-Python versions of the compiled kernels (same signatures)."""

import numpy as np


def encode(elems, M):
    flat = np.asarray(elems, dtype=np.int64).reshape(len(elems), -1)
    codes = np.zeros(len(flat), dtype=np.int64)
    for col in range(flat.shape[1]):
        codes = codes * M + flat[:, col]
    return codes


def cayley_table(elems, codes, M):
    elems = np.asarray(elems, dtype=np.int64)
    codes = np.asarray(codes, dtype=np.int64)
    order = len(elems)
    table = np.empty((order, order), dtype=np.int32)
    for a in range(order):
        prod = np.einsum("bik,gbkj->gbij", elems[a], elems) % M
        c = encode(prod, M)
        idx = np.searchsorted(codes, c)
        idx[idx >= order] = 0
        if not np.array_equal(codes[idx], c):
            raise ValueError("element list is not closed under multiplication")
        table[a] = idx
    return table


def inverses(table, identity):
    table = np.asarray(table)
    out = np.full(len(table), -1, dtype=np.int32)
    for a in range(len(table)):
        hits = np.nonzero(table[a] == identity)[0]
        if len(hits):
            out[a] = hits[0]
    return out


def class_ids(table, inv):
    table = np.asarray(table)
    order = len(table)
    out = np.full(order, -1, dtype=np.int32)
    nc = 0
    for x in range(order):
        if out[x] >= 0:
            continue
        for g in range(order):
            out[table[table[g, x], inv[g]]] = nc
        nc += 1
    return out


def class_constants(table, inv, cid, reps):
    table = np.asarray(table)
    nc = len(reps)
    a = np.zeros((nc, nc, nc), dtype=np.int64)
    for k, z in enumerate(reps):
        for x in range(len(table)):
            a[cid[x], cid[table[inv[x], z]], k] += 1
    return a


def snf_diagonal(A):
    """Invariant factors (nonzero, in order); Python integers never overflow."""
    m = [[int(x) for x in row] for row in np.asarray(A).tolist()]
    r = len(m)
    c = len(m[0]) if r else 0
    diag = []
    for t in range(min(r, c)):
        while True:
            cands = [(abs(m[i][j]), i, j) for i in range(t, r) for j in range(t, c) if m[i][j]]
            if not cands:
                return diag
            _, pi, pj = min(cands)
            m[t], m[pi] = m[pi], m[t]
            for row in m:
                row[t], row[pj] = row[pj], row[t]
            piv = m[t][t]
            done = True
            for i in range(t + 1, r):
                if m[i][t]:
                    q = m[i][t] // piv
                    for j in range(t, c):
                        m[i][j] -= q * m[t][j]
                    done = done and m[i][t] == 0
            for j in range(t + 1, c):
                if m[t][j]:
                    q = m[t][j] // piv
                    for i in range(t, r):
                        m[i][j] -= q * m[i][t]
                    done = done and m[t][j] == 0
            if not done:
                continue
            bad = next(
                (i for i in range(t + 1, r) for j in range(t + 1, c) if m[i][j] % piv), None
            )
            if bad is None:
                diag.append(abs(piv))
                break
            m[t] = [x + y for x, y in zip(m[t], m[bad])]
    return diag
