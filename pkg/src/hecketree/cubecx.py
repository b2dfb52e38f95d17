"""The chain complexes C_*([0,n]) on the category Int.

C_*([0,n]) is free on pairs (I, J) with {0, n} ⊆ J ⊆ I ⊆ {0, ..., n}, in
degree |I \\ J|.  Each interior point 1..n-1 is either outside I, in J, or
in I \\ J, so C_* is the cellular chain complex of an (n-1)-cube.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from itertools import combinations, product
from math import comb

import numpy as np

from . import kernels


@dataclass(frozen=True, order=True)
class CubePair:
    n: int
    I: frozenset
    J: frozenset

    def __post_init__(self):
        full = set(range(self.n + 1))
        if not ({0, self.n} <= self.J <= self.I <= full):
            raise ValueError(f"need {{0,{self.n}}} ⊆ J ⊆ I ⊆ [0,{self.n}]")

    @classmethod
    def of(cls, n: int, I, J) -> "CubePair":
        return cls(n, frozenset(I), frozenset(J))

    @property
    def degree(self) -> int:
        return len(self.I - self.J)

    def sort_key(self):
        return (self.n, tuple(sorted(self.I)), tuple(sorted(self.J)))

    def __str__(self) -> str:
        return f"({sorted(self.I)},{sorted(self.J)})"


Chain = dict  # CubePair -> int


def _add(out: Chain, x: CubePair, c: int):
    v = out.get(x, 0) + c
    if v:
        out[x] = v
    else:
        out.pop(x, None)


def generators(n: int, k: int | None = None) -> list[CubePair]:
    if n < 1:
        raise ValueError("n must be at least 1")
    out = []
    for states in product(range(3), repeat=n - 1):
        I = {0, n} | {i + 1 for i, s in enumerate(states) if s >= 1}
        J = {0, n} | {i + 1 for i, s in enumerate(states) if s == 1}
        x = CubePair.of(n, I, J)
        if k is None or x.degree == k:
            out.append(x)
    return sorted(out, key=CubePair.sort_key)


def generator_count(n: int, k: int) -> int:
    if k < 0 or k > n - 1:
        return 0
    return comb(n - 1, k) * 2 ** (n - 1 - k)


def boundary(x: CubePair) -> Chain:
    """Sum over I \\ J = {i_1 < ... < i_l} of (-1)^j ((I - i_j, J) - (I, J + i_j))."""
    out: Chain = {}
    for j, i in enumerate(sorted(x.I - x.J), start=1):
        s = -1 if j % 2 else 1
        _add(out, CubePair(x.n, x.I - {i}, x.J), s)
        _add(out, CubePair(x.n, x.I, x.J | {i}), -s)
    return out


def d_chain(c: Chain) -> Chain:
    out: Chain = {}
    for x, a in c.items():
        for y, b in boundary(x).items():
            _add(out, y, a * b)
    return out


@dataclass(frozen=True)
class IntMorphism:
    """Strictly increasing σ: [0,n] -> [0,m] with σ(0) = 0 and σ(n) = m."""

    n: int
    m: int
    values: tuple

    def __post_init__(self):
        v = self.values
        if len(v) != self.n + 1:
            raise ValueError("σ needs n+1 values")
        if v[0] != 0 or v[-1] != self.m:
            raise ValueError("σ must fix the endpoints")
        if any(a >= b for a, b in zip(v, v[1:])):
            raise ValueError("σ must be strictly increasing")

    def __call__(self, i: int) -> int:
        return self.values[i]

    def compose(self, other: "IntMorphism") -> "IntMorphism":
        """self ∘ other."""
        if other.m != self.n:
            raise ValueError("not composable")
        return IntMorphism(other.n, self.m, tuple(self.values[i] for i in other.values))

    @classmethod
    def identity(cls, n: int) -> "IntMorphism":
        return cls(n, n, tuple(range(n + 1)))


def int_morphisms(n: int, m: int) -> list[IntMorphism]:
    return [IntMorphism(n, m, (0,) + mid + (m,)) for mid in combinations(range(1, m), n - 1)] if n >= 1 else []


def induced_map(s: IntMorphism, x: CubePair) -> CubePair | None:
    if x.n != s.n:
        raise ValueError("σ and pair live over different intervals")
    I = frozenset(s(i) for i in x.I)
    J = frozenset(s(j) for j in x.J)
    if len(I - J) != x.degree:
        return None
    return CubePair(s.m, I, J)


def induced_chain(s: IntMorphism, c: Chain) -> Chain:
    out: Chain = {}
    for x, a in c.items():
        y = induced_map(s, x)
        if y is not None:
            _add(out, y, a)
    return out


def concatenate(x: CubePair, y: CubePair) -> CubePair:
    n = x.n
    return CubePair(n + y.n, x.I | {n + i for i in y.I}, x.J | {n + j for j in y.J})


def concatenate_chains(a: Chain, b: Chain) -> Chain:
    out: Chain = {}
    for x, s in a.items():
        for y, t in b.items():
            _add(out, concatenate(x, y), s * t)
    return out


def augmentation(c: Chain) -> int:
    return sum(a for x, a in c.items() if x.degree == 0)


def boundary_matrix(n: int, k: int) -> np.ndarray:
    """Matrix of d: C_k -> C_{k-1}, rows indexed by generators(n, k-1)."""
    rows = generators(n, k - 1) if k >= 1 else []
    cols = generators(n, k)
    idx = {x: i for i, x in enumerate(rows)}
    M = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for j, x in enumerate(cols):
        for y, a in boundary(x).items():
            M[idx[y], j] = a
    return M


def boundary_csv(n: int, k: int) -> str:
    M = boundary_matrix(n, k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + [str(x) for x in generators(n, k)])
    for y, row in zip(generators(n, k - 1), M):
        w.writerow([str(y)] + [int(v) for v in row])
    return buf.getvalue()


def homology(n: int) -> list[tuple[int, list[int]]]:
    """(rank, torsion) of H_k for k = 0..n-1."""
    if n > 8:
        raise ValueError("homology is only computed for n <= 8")
    top = n - 1
    diag = {}
    for k in range(1, top + 1):
        diag[k] = kernels.snf_diagonal(boundary_matrix(n, k))
    out = []
    for k in range(top + 1):
        r_out = len(diag.get(k, []))
        r_in = len(diag.get(k + 1, []))
        rank = generator_count(n, k) - r_out - r_in
        torsion = [abs(d) for d in diag.get(k + 1, []) if abs(d) > 1]
        out.append((rank, torsion))
    return out


def augmentation_kernel_is_boundary(n: int) -> bool:
    """ker ε = im d_1 in C_0, as subgroups of Z^{C_0}."""
    c0 = generator_count(n, 0)
    if n == 1:
        return c0 == 1
    d1 = boundary_matrix(n, 1)
    if any(int(s) != 0 for s in d1.sum(axis=0)):
        return False  # im d_1 ⊄ ker ε
    diag = kernels.snf_diagonal(d1)
    return len(diag) == c0 - 1 and all(abs(d) == 1 for d in diag)


def homology_report(n: int) -> dict:
    degrees = []
    for k, (rank, tors) in enumerate(homology(n)):
        degrees.append({"degree": k, "rank_C": generator_count(n, k), "H_rank": rank, "torsion": tors})
    return {"n": n, "degrees": degrees}


def is_point_homology(n: int) -> bool:
    H = homology(n)
    return H[0] == (1, []) and all(h == (0, []) for h in H[1:])
