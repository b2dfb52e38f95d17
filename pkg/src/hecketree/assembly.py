"""The degree-zero Mayer-Vietoris computation for SL_2 at finite level.

At level m the chamber stabilizers are modelled by

    U_0 -> U_0/K_m,   U_1 -> U_1/hK_mh^-1,   I -> Q_m = I/N_m,

with N_m = K_m ∩ hK_mh^-1 the kernel common to both face maps.  A column
of the assembly matrix is an irreducible of Q_m that factors through both
targets; its entries are the decompositions of (ind^{U_1} chi, -ind^{U_0} chi).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from . import kernels
from .building import SL3_SPECS, coset_index, spec_indices
from .reptheory import (
    Hom,
    VirtualCharacter,
    finite_quotient,
    induce,
    induce_bruteforce,
    level_hom,
    restrict,
    standard_hom,
    trivial_on,
)

# ---------------------------------------------------------------------------
# Smith normal form over Z


def _identity(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def smith_normal_form(M):
    """Return (D, U, V) with U M V = D, U and V unimodular, and the diagonal
    of D nonnegative with d_1 | d_2 | ...  Exact over Python integers."""
    A = [[int(x) for x in row] for row in M]
    r = len(A)
    c = len(A[0]) if r else 0
    U = _identity(r)
    V = _identity(c)

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):  # row_dst -= q row_src
        A[dst] = [a - q * b for a, b in zip(A[dst], A[src])]
        U[dst] = [a - q * b for a, b in zip(U[dst], U[src])]

    def add_col(dst, src, q):  # col_dst -= q col_src
        for row in A:
            row[dst] -= q * row[src]
        for row in V:
            row[dst] -= q * row[src]

    for t in range(min(r, c)):
        while True:
            cands = [(abs(A[i][j]), i, j) for i in range(t, r) for j in range(t, c) if A[i][j]]
            if not cands:
                break
            _, pi, pj = min(cands)
            swap_rows(t, pi)
            swap_cols(t, pj)
            piv = A[t][t]
            clean = True
            for i in range(t + 1, r):
                if A[i][t]:
                    add_row(i, t, A[i][t] // piv)
                    clean = clean and A[i][t] == 0
            for j in range(t + 1, c):
                if A[t][j]:
                    add_col(j, t, A[t][j] // piv)
                    clean = clean and A[t][j] == 0
            if not clean:
                continue
            bad = next((i for i in range(t + 1, r) for j in range(t + 1, c) if A[i][j] % piv), None)
            if bad is None:
                break
            # row t += row bad, then the pivot no longer divides row t
            A[t] = [a + b for a, b in zip(A[t], A[bad])]
            U[t] = [a + b for a, b in zip(U[t], U[bad])]
        if t < r and t < c and A[t][t] < 0:
            A[t] = [-a for a in A[t]]
            U[t] = [-a for a in U[t]]
    return A, U, V


def mat_mul_int(A, B):
    if not A:
        return []
    cols = list(zip(*B)) if B else []
    return [[sum(a * b for a, b in zip(row, col)) for col in cols] for row in A]


def det_int(A):
    """Bareiss determinant."""
    n = len(A)
    if n == 0:
        return 1
    M = [list(map(int, row)) for row in A]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            piv = next((i for i in range(k + 1, n) if M[i][k]), None)
            if piv is None:
                return 0
            M[k], M[piv] = M[piv], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def snf_diagonal(M) -> list[int]:
    D, _, _ = smith_normal_form(M)
    return [D[i][i] for i in range(min(len(D), len(D[0]) if D else 0)) if D[i][i]]


def rank_int(M) -> int:
    """Rank over Q by fraction-free elimination (independent of the SNF)."""
    A = [list(map(int, row)) for row in M]
    rank = 0
    cols = len(A[0]) if A else 0
    for j in range(cols):
        piv = next((i for i in range(rank, len(A)) if A[i][j]), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        for i in range(len(A)):
            if i != rank and A[i][j]:
                A[i] = [A[rank][j] * a - A[i][j] * b for a, b in zip(A[i], A[rank])]
        rank += 1
    return rank


def in_image(M, x) -> bool:
    """Is x in the Z-span of the columns of M?"""
    D, U, V = smith_normal_form(M)
    y = [sum(u * b for u, b in zip(row, x)) for row in U]
    k = min(len(D), len(D[0]) if D else 0)
    for i, yi in enumerate(y):
        d = D[i][i] if i < k else 0
        if d == 0:
            if yi:
                return False
        elif yi % d:
            return False
    return True


def integer_kernel(M) -> list[list[int]]:
    """A Z-basis of {y : M y = 0}."""
    D, U, V = smith_normal_form(M)
    c = len(V)
    k = min(len(D), len(D[0]) if D else 0)
    rank = sum(1 for i in range(k) if D[i][i])
    return [[V[r][j] for r in range(c)] for j in range(rank, c)]


# ---------------------------------------------------------------------------
# cokernels


@dataclass
class CokernelReport:
    diagonal: list[int]
    free_rank: int
    torsion: list[int]
    rows: int
    rank: int
    meta: dict = field(default_factory=dict)

    def describe(self) -> str:
        parts = [f"Z^{self.free_rank}"] if self.free_rank else []
        parts += [f"Z/{d}" for d in self.torsion]
        return " + ".join(parts) if parts else "0"

    def to_json(self) -> dict:
        return {"snf_diagonal": self.diagonal, "coker": {"free_rank": self.free_rank, "torsion": self.torsion}}


def cokernel_report(A, meta: dict | None = None) -> CokernelReport:
    matrix = A.matrix if isinstance(A, AssemblyMatrix) else [list(map(int, r)) for r in A]
    rows = len(matrix)
    diag = snf_diagonal(matrix) if matrix and matrix[0] else []
    rank = len(diag)
    return CokernelReport(
        diagonal=diag,
        free_rank=rows - rank,
        torsion=[d for d in diag if d > 1],
        rows=rows,
        rank=rank,
        meta=dict(meta or (A.meta() if isinstance(A, AssemblyMatrix) else {})),
    )


# ---------------------------------------------------------------------------
# the assembly matrix


@dataclass
class AssemblyMatrix:
    p: int
    level: int
    matrix: list[list[int]]
    sign: int
    source: Hom  # Q_m -> U_0 (block 0)
    columns: list[int]  # irreducibles of Q_m used as columns
    deep: list[int]  # irreducibles of Q_m not factoring through both targets
    u1_size: int
    u0_size: int
    full: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.matrix), len(self.columns))

    def blocks(self):
        return self.matrix[: self.u1_size], self.matrix[self.u1_size :]

    def meta(self) -> dict:
        return {
            "p": self.p,
            "levels": {"source": self.level, "U0": self.level, "U1": self.level},
            "source_group": f"I/N{self.level}",
            "source_irreducibles": len(set(self.columns) | set(self.deep)),
            "columns": len(self.columns),
            "excluded_deep": 0 if self.full else len(self.deep),
            "deep_columns": [self.columns.index(i) for i in self.deep] if self.full else [],
            "sign": "(+ind U1, -ind U0)" if self.sign == 1 else "(-ind U1, +ind U0)",
        }

    def to_json(self) -> dict:
        out = {"p": self.p, "levels": self.meta()["levels"], "matrix": self.matrix}
        rep = cokernel_report(self)
        out.update(rep.to_json())
        out["meta"] = self.meta()
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.matrix:
            w.writerow(row)
        return buf.getvalue()

    def degree_balance(self) -> list[bool]:
        Q = self.source.H
        T1 = finite_quotient("U1", self.level, self.p).character_table
        T0 = finite_quotient("U0", self.level, self.p).character_table
        top, bottom = self.blocks()
        out = []
        for j, col in enumerate(self.columns):
            d = Q.character_table.degrees[col]
            s1 = sum(T1.degrees[i] * top[i][j] for i in range(self.u1_size))
            s0 = sum(T0.degrees[i] * bottom[i][j] for i in range(self.u0_size))
            out.append(s1 == -s0 == self.sign * (self.p + 1) * d)
        return out


def factoring_characters(p: int, m: int) -> tuple[list[int], list[int]]:
    """Irreducibles of Q_m trivial on both face-map kernels, and the rest."""
    f0 = standard_hom("IN", "U0", m, p)
    f1 = standard_hom("IN", "U1", m, p)
    Q = f0.H
    both = sorted(set(f0.kernel) | set(f1.kernel))
    good, deep = [], []
    for i in range(Q.character_table.size):
        (good if trivial_on(i, Q, both) else deep).append(i)
    return good, deep


def assembly_matrix(p: int, m: int, sign: int = 1, oracle: bool = False, full: bool = False) -> AssemblyMatrix:
    """Columns: the MV map chi -> (ind^{U_1} chi, -ind^{U_0} chi) (times ``sign``).

    With ``oracle=True`` every induction is recomputed element by element and
    compared before the column is accepted.  ``full=True`` keeps a column for
    every irreducible of I/N_m; the deep ones push forward to zero and are not
    degree-balanced (see :meth:`AssemblyMatrix.degree_balance`).
    """
    f0 = standard_hom("IN", "U0", m, p)
    f1 = standard_hom("IN", "U1", m, p)
    Q = f0.H
    cols, deep = factoring_characters(p, m)
    if full:
        cols = sorted(cols + deep)
    top, bottom = [], []
    for i in cols:
        chi = VirtualCharacter.irreducible(Q, i)
        a1 = induce(chi, f1)
        a0 = induce(chi, f0)
        if oracle:
            for f, a in ((f1, a1), (f0, a0)):
                brute = VirtualCharacter.from_class_function(f.G, induce_bruteforce(chi.values(), f))
                if brute.coeffs != a.coeffs:
                    raise ArithmeticError(f"induction oracle disagrees on column {i}")
        top.append([sign * c for c in a1.coeffs])
        bottom.append([-sign * c for c in a0.coeffs])
    n1 = f1.G.character_table.size
    n0 = f0.G.character_table.size
    matrix = [[top[j][i] for j in range(len(cols))] for i in range(n1)]
    matrix += [[bottom[j][i] for j in range(len(cols))] for i in range(n0)]
    return AssemblyMatrix(p, m, matrix, sign, f0, cols, deep, n1, n0, full)


# ---------------------------------------------------------------------------
# depth compatibility


def _inflation_matrix(spec: str, m: int, m2: int, p: int, restrict_to=None, target_subset=None):
    """Matrix of inflation from level m to m2 in the irreducible bases
    (columns: irreducibles at level m)."""
    f = level_hom(spec, m2, m, p)
    src = f.G  # level m
    dst = f.H  # level m2
    src_idx = restrict_to if restrict_to is not None else list(range(src.character_table.size))
    dst_idx = target_subset if target_subset is not None else list(range(dst.character_table.size))
    out = [[0] * len(src_idx) for _ in dst_idx]
    pos = {k: r for r, k in enumerate(dst_idx)}
    for c, i in enumerate(src_idx):
        inf = restrict(VirtualCharacter.irreducible(src, i), f)
        for k, coeff in enumerate(inf.coeffs):
            if coeff:
                if k not in pos:
                    raise ArithmeticError("inflation leaves the column basis")
                out[pos[k]][c] = coeff
    return out


def depth_compatibility(p: int, m: int, m2: int) -> dict:
    """Check assemble∘inflate = inflate∘assemble from level m to m2 and
    describe the induced map on cokernels."""
    if m2 < m:
        raise ValueError("levels must increase")
    A = assembly_matrix(p, m)
    if m2 == m:
        n = len(A.matrix)
        ident = _identity(n)
        return {
            "commutes": True,
            "residual": 0,
            "target_inflation": ident,
            "coker_map_injective": True,
            "coker": [cokernel_report(A).to_json()] * 2,
        }
    B = assembly_matrix(p, m2)
    inf_src = _inflation_matrix("IN", m, m2, p, restrict_to=A.columns, target_subset=B.columns)
    inf_u1 = _inflation_matrix("U1", m, m2, p)
    inf_u0 = _inflation_matrix("U0", m, m2, p)
    # block-diagonal target inflation
    r1, c1 = len(inf_u1), len(inf_u1[0])
    r0, c0 = len(inf_u0), len(inf_u0[0])
    inf_tgt = [row + [0] * c0 for row in inf_u1] + [[0] * c1 + row for row in inf_u0]
    lhs = mat_mul_int(B.matrix, inf_src)
    rhs = mat_mul_int(inf_tgt, A.matrix)
    residual = sum(abs(a - b) for ra, rb in zip(lhs, rhs) for a, b in zip(ra, rb))
    injective = coker_map_injective(A.matrix, B.matrix, inf_tgt)
    return {
        "commutes": residual == 0,
        "residual": residual,
        "target_inflation": inf_tgt,
        "coker_map_injective": injective,
        "coker": [cokernel_report(A).to_json(), cokernel_report(B).to_json()],
    }


def coker_map_injective(A, B, F) -> bool:
    """Is coker A -> coker B, x -> F x, injective?  Equivalently: F x in im B
    forces x in im A.  The preimage lattice is the projection of
    ker [F | -B]."""
    rows = len(F)
    nA = len(F[0])
    nB = len(B[0]) if B and B[0] else 0
    stacked = [list(F[i]) + [-b for b in B[i]] for i in range(rows)] if nB else [list(r) for r in F]
    gens = [y[:nA] for y in integer_kernel(stacked)]
    return all(in_image(A, x) for x in gens) if A and A[0] else all(not any(x) for x in gens)


# ---------------------------------------------------------------------------
# SL_3 stabilizer indices


def sl3_cube_report(p: int, m: int, cap: int = 10_000) -> dict:
    """Indices [U_i : U_ij] and [U_ij : I] of the chamber stabilizers of the
    SL_3 building, by coset enumeration at level m."""
    if p not in (2, 3) or m > 2:
        raise ValueError("sl3 report supports p in {2, 3} and m <= 2")
    vertex_edge = {}
    edge_chamber = {}
    for spec in ("U01", "U02", "U12"):
        for i in spec_indices(spec, 3):
            vertex_edge[f"U{i}:{spec}"] = coset_index(spec, f"U{i}", m, p, 3, cap)
        edge_chamber[f"{spec}:I"] = coset_index("I", spec, m, p, 3, cap)
    vertex_chamber = {f"U{i}:I": coset_index("I", f"U{i}", m, p, 3, cap) for i in range(3)}
    # h maps U_i -> U_{i+1}; check the index table is invariant under the cycle
    def shift(spec):
        if spec == "I":
            return "I"
        return "U" + "".join(sorted(str((int(c) + 1) % 3) for c in spec[1:]))

    symmetric = all(
        vertex_edge[f"{shift(a)}:{shift(b)}"] == v
        for key, v in vertex_edge.items()
        for a, b in [key.split(":")]
    )
    return {
        "p": p,
        "level": m,
        "vertices": list(SL3_SPECS) + ["SL3"],
        "index_vertex_edge": vertex_edge,
        "index_edge_chamber": edge_chamber,
        "index_vertex_chamber": vertex_chamber,
        "h_cycle_symmetric": symmetric,
        "consistent": all(
            vertex_edge[f"U{i}:{e}"] * edge_chamber[f"{e}:I"] == vertex_chamber[f"U{i}:I"]
            for e in ("U01", "U02", "U12")
            for i in spec_indices(e, 3)
        ),
    }


def kernel_snf_diagonal(M) -> list[int]:
    """Invariant factors through the compiled kernel (the fast path used for
    large boundary matrices)."""
    return kernels.snf_diagonal(M)
