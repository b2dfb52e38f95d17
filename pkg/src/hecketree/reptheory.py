"""Characters of finite quotients of compact open subgroups.

Groups are generated by block-diagonal integer matrices modulo ``M``; the
Cayley table, conjugacy classes and class structure constants come from
:mod:`hecketree.kernels`.  Character tables use the class-sum eigenvector
method at 128-bit precision and snap to integers only where the result is
certifiably integral.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import mpmath
import numpy as np

from . import kernels
from .building import QuotientTooLarge

SNAP_TOL = 1e-6
ORTHO_TOL = 1e-8
TABLE_CAP = 4096
GROUP_CAP = 10_000


class SnapError(ArithmeticError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


def _ctx():
    ctx = mpmath.MPContext()
    ctx.prec = 128
    return ctx


def _mul_blocks(a, b, M):
    out = []
    for x, y in zip(a, b):
        n = len(x)
        out.append(
            tuple(tuple(sum(x[i][k] * y[k][j] for k in range(n)) % M for j in range(n)) for i in range(n))
        )
    return tuple(out)


class FiniteGroup:
    """A finite group of block-diagonal matrices modulo ``M``.

    Elements are tuples of blocks (each an n x n tuple of residues), stored
    sorted by their integer code so that index lookups are binary searches.
    """

    def __init__(self, name: str, M: int, elements: Sequence, gens: Sequence = ()):
        self.name = name
        self.M = M
        arr = np.array(elements, dtype=np.int64)
        codes = kernels.encode(arr, M)
        order = np.argsort(codes, kind="stable")
        self._arr = np.ascontiguousarray(arr[order])
        self.codes = codes[order]
        self.elements = [elements[i] for i in order]
        self.gens = tuple(gens)

    @classmethod
    def from_generators(cls, name: str, gens: Sequence, M: int, cap: int = GROUP_CAP) -> "FiniteGroup":
        gens = [tuple(tuple(tuple(int(v) % M for v in row) for row in blk) for blk in g) for g in gens]
        ident = tuple(
            tuple(tuple(int(i == j) for j in range(len(blk))) for i in range(len(blk))) for blk in gens[0]
        )
        seen = {ident}
        queue = deque([ident])
        while queue:
            x = queue.popleft()
            for s in gens:
                y = _mul_blocks(s, x, M)
                if y not in seen:
                    seen.add(y)
                    if len(seen) > cap:
                        raise QuotientTooLarge(f"{name}: order exceeds cap {cap}")
                    queue.append(y)
        return cls(name, M, list(seen), gens)

    @property
    def order(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return self.order

    def __repr__(self) -> str:
        return f"FiniteGroup({self.name}, order={self.order})"

    def index(self, element) -> int:
        code = int(kernels.encode(np.array([element], dtype=np.int64), self.M)[0])
        i = int(np.searchsorted(self.codes, code))
        if i >= len(self.codes) or self.codes[i] != code:
            raise KeyError(f"{element} is not in {self.name}")
        return i

    def mul(self, a, b):
        return _mul_blocks(a, b, self.M)

    @cached_property
    def table(self) -> np.ndarray:
        if self.order > TABLE_CAP:
            raise QuotientTooLarge(f"{self.name}: Cayley table needs order <= {TABLE_CAP}")
        return kernels.cayley_table(self._arr, self.codes, self.M)

    @cached_property
    def identity(self) -> int:
        blk = self.elements[0]
        ident = tuple(tuple(tuple(int(i == j) for j in range(len(b))) for i in range(len(b))) for b in blk)
        return self.index(ident)

    @cached_property
    def inv(self) -> np.ndarray:
        return kernels.inverses(self.table, self.identity)

    def check_axioms(self, samples: int = 200, seed: int = 0) -> bool:
        """Closure (full, via the table), identity, inverses, and sampled
        associativity."""
        t = self.table
        if (self.inv < 0).any():
            return False
        e = self.identity
        if not (np.array_equal(t[e], np.arange(self.order)) and np.array_equal(t[:, e], np.arange(self.order))):
            return False
        rng = random.Random(seed)
        for _ in range(samples):
            a, b, c = (rng.randrange(self.order) for _ in range(3))
            if t[t[a, b], c] != t[a, t[b, c]]:
                return False
        return True

    # conjugacy ---------------------------------------------------------------

    @cached_property
    def class_of(self) -> np.ndarray:
        return kernels.class_ids(self.table, self.inv)

    @cached_property
    def classes(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(int(self.class_of.max()) + 1)]
        for g, c in enumerate(self.class_of):
            out[c].append(g)
        return out

    @property
    def class_sizes(self) -> list[int]:
        return [len(c) for c in self.classes]

    @property
    def class_reps(self) -> list[int]:
        return [c[0] for c in self.classes]

    @cached_property
    def class_constants(self) -> np.ndarray:
        reps = np.array(self.class_reps, dtype=np.int32)
        return kernels.class_constants(self.table, self.inv, self.class_of, reps)

    @cached_property
    def character_table(self) -> "CharacterTable":
        return compute_character_table(self)


def conjugacy_classes(G: FiniteGroup) -> list[list[int]]:
    return G.classes


# ---------------------------------------------------------------------------
# character tables


def _snap_complex(z, tol=SNAP_TOL):
    re, im = float(z.real), float(z.imag)
    r = round(re)
    if abs(im) < tol and abs(re - r) < tol:
        return r
    return complex(re, im)


def _fmt(z) -> str:
    if isinstance(z, int):
        return str(z)
    re = f"{z.real:.12g}"
    im = f"{abs(z.imag):.12g}"
    sign = "-" if z.imag < 0 else "+"
    return f"{re}{sign}{im}i"


@dataclass
class CharacterTable:
    group: FiniteGroup
    values: list  # list of rows of mpc, one per irreducible, indexed by class
    degrees: list[int]
    residual: float

    @property
    def size(self) -> int:
        return len(self.degrees)

    def snapped(self) -> list[list]:
        return [[_snap_complex(z) for z in row] for row in self.values]

    def inner(self, f, g) -> complex:
        """<f, g> = 1/|G| sum_classes |C| f conj(g)."""
        G = self.group
        s = sum(n * a * b.conjugate() for n, a, b in zip(G.class_sizes, f, g))
        return complex(s / G.order)

    def decompose(self, f) -> tuple[int, ...]:
        coeffs = []
        worst = 0.0
        for chi in self.values:
            z = self.inner(f, chi)
            r = round(z.real)
            worst = max(worst, abs(z - r))
            coeffs.append(r)
        if worst > SNAP_TOL:
            raise SnapError(f"non-integral decomposition over {self.group.name}", worst)
        return tuple(coeffs)

    def check(self) -> dict:
        """Both orthogonality relations and the degree sum, before and after
        snapping."""
        G = self.group
        n = self.size
        row = 0.0
        for i in range(n):
            for j in range(n):
                z = self.inner(self.values[i], self.values[j])
                row = max(row, abs(z - (1 if i == j else 0)))
        col = 0.0
        cent = [G.order // s for s in G.class_sizes]
        for k in range(n):
            for l in range(n):
                z = complex(sum(chi[k] * chi[l].conjugate() for chi in self.values))
                col = max(col, abs(z - (cent[k] if k == l else 0)))
        return {
            "row_residual": row,
            "col_residual": col,
            "snap_residual": self.residual,
            "degree_sum": sum(d * d for d in self.degrees),
            "order": G.order,
            "ok": row < ORTHO_TOL and col < ORTHO_TOL * G.order and self.residual < SNAP_TOL
            and sum(d * d for d in self.degrees) == G.order,
        }

    def to_json(self) -> dict:
        G = self.group
        return {
            "group": G.name,
            "order": G.order,
            "classes": [{"rep": _rep_json(G.elements[r]), "size": s} for r, s in zip(G.class_reps, G.class_sizes)],
            "chars": [[_fmt(z) for z in row] for row in self.snapped()],
        }


def _rep_json(elem):
    return [[list(r) for r in blk] for blk in elem]


def compute_character_table(G: FiniteGroup, seed: int = 0) -> CharacterTable:
    ctx = _ctx()
    nc = len(G.classes)
    sizes = G.class_sizes
    a = G.class_constants  # a[i, j, k]: C_i C_j = sum_k a[i,j,k] C_k
    mats = [ctx.matrix([[int(a[j, k, l]) for l in range(nc)] for k in range(nc)]) for j in range(nc)]
    rng = random.Random(seed)
    for attempt in range(20):
        coeffs = [rng.randint(1, 97) for _ in range(nc)]
        comb = ctx.matrix(nc, nc)
        for c, m in zip(coeffs, mats):
            comb += c * m
        evals, evecs = ctx.eig(comb)
        gaps = [abs(evals[i] - evals[j]) for i in range(nc) for j in range(i)]
        if not gaps or min(gaps) > ctx.mpf(10) ** -20:
            break
    else:  # pragma: no cover - astronomically unlikely
        raise SnapError("no separating class-sum combination found", 1.0)
    e = G.class_of[G.identity]
    rows = []
    degrees = []
    worst = 0.0
    for col in range(nc):
        w = [evecs[r, col] for r in range(nc)]
        w = [x / w[e] for x in w]
        # common eigenvector check: M_j w = w_j w
        for j in range(nc):
            mw = mats[j] * ctx.matrix(w)
            res = max(abs(mw[k] - w[j] * w[k]) for k in range(nc))
            worst = max(worst, float(res))
        norm = ctx.fsum(abs(w[l]) ** 2 / sizes[l] for l in range(nc))
        d = ctx.sqrt(G.order / norm)
        deg = int(ctx.nint(d))
        worst = max(worst, float(abs(d - deg)))
        degrees.append(deg)
        rows.append([deg * w[l] / sizes[l] for l in range(nc)])
    if worst > SNAP_TOL:
        raise SnapError(f"character table of {G.name} failed to snap", worst)

    def key(i):
        return (degrees[i], [(round(float(z.real), 9), round(float(z.imag), 9)) for z in rows[i]])

    perm = sorted(range(nc), key=key)
    # the trivial character comes first among degree-1 rows only if sorting
    # puts it there; force it for stable bookkeeping
    triv = next(i for i in perm if all(abs(z - 1) < SNAP_TOL for z in rows[i]))
    perm.remove(triv)
    perm.insert(0, triv)
    return CharacterTable(G, [rows[i] for i in perm], [degrees[i] for i in perm], worst)


def character_table(G: FiniteGroup) -> CharacterTable:
    return G.character_table


# ---------------------------------------------------------------------------
# virtual characters and maps between groups


@dataclass(frozen=True)
class VirtualCharacter:
    group: FiniteGroup = field(compare=False)
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.group.character_table.size:
            raise ValueError("coefficient vector does not match the irreducible basis")

    @classmethod
    def irreducible(cls, G: FiniteGroup, i: int) -> "VirtualCharacter":
        n = G.character_table.size
        return cls(G, tuple(int(j == i) for j in range(n)))

    @classmethod
    def trivial(cls, G: FiniteGroup) -> "VirtualCharacter":
        return cls.irreducible(G, 0)

    @classmethod
    def regular(cls, G: FiniteGroup) -> "VirtualCharacter":
        return cls(G, tuple(G.character_table.degrees))

    @classmethod
    def from_class_function(cls, G: FiniteGroup, f) -> "VirtualCharacter":
        return cls(G, G.character_table.decompose(f))

    def values(self) -> list:
        T = self.group.character_table
        nc = len(self.group.classes)
        return [sum(c * T.values[i][k] for i, c in enumerate(self.coeffs)) for k in range(nc)]

    def degree(self) -> int:
        return sum(c * d for c, d in zip(self.coeffs, self.group.character_table.degrees))

    def inner(self, other: "VirtualCharacter") -> int:
        if other.group is not self.group:
            raise ValueError("characters of different groups")
        return sum(a * b for a, b in zip(self.coeffs, other.coeffs))

    def __add__(self, other: "VirtualCharacter") -> "VirtualCharacter":
        return VirtualCharacter(self.group, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "VirtualCharacter":
        return VirtualCharacter(self.group, tuple(-a for a in self.coeffs))

    def __sub__(self, other: "VirtualCharacter") -> "VirtualCharacter":
        return self + (-other)

    def scale(self, k: int) -> "VirtualCharacter":
        return VirtualCharacter(self.group, tuple(k * a for a in self.coeffs))


class Hom:
    """A group homomorphism H -> G given on elements; all maps used here are
    inclusions or reductions, so ``func`` is a plain tuple transformation."""

    def __init__(self, H: FiniteGroup, G: FiniteGroup, func: Callable):
        self.H = H
        self.G = G
        self.func = func

    @cached_property
    def on_elements(self) -> np.ndarray:
        return np.array([self.G.index(self.func(x)) for x in self.H.elements], dtype=np.int64)

    def is_homomorphism(self, samples: int = 200, seed: int = 0) -> bool:
        rng = random.Random(seed)
        f = self.on_elements
        tH, tG = self.H.table, self.G.table
        for _ in range(samples):
            a, b = rng.randrange(self.H.order), rng.randrange(self.H.order)
            if f[tH[a, b]] != tG[f[a], f[b]]:
                return False
        return True

    @cached_property
    def on_classes(self) -> list[int]:
        """G-class of the image of each H-class."""
        f = self.on_elements
        return [int(self.G.class_of[f[r]]) for r in self.H.class_reps]

    @cached_property
    def kernel(self) -> list[int]:
        f = self.on_elements
        return [i for i in range(self.H.order) if f[i] == self.G.identity]

    def image_order(self) -> int:
        return len(set(self.on_elements.tolist()))


def restrict(chi: VirtualCharacter, f: Hom) -> VirtualCharacter:
    if chi.group is not f.G:
        raise ValueError("character lives on the wrong group")
    vals = chi.values()
    return VirtualCharacter.from_class_function(f.H, [vals[c] for c in f.on_classes])


def induce_values(vals, f: Hom) -> list:
    """Class values of ind_f(chi) from class values on H (formula over classes)."""
    G, H = f.G, f.H
    out = [0] * len(G.classes)
    for c, gc in enumerate(f.on_classes):
        out[gc] = out[gc] + H.class_sizes[c] * vals[c]
    return [out[k] * G.order / (H.order * G.class_sizes[k]) for k in range(len(G.classes))]


def induce(chi: VirtualCharacter, f: Hom) -> VirtualCharacter:
    if chi.group is not f.H:
        raise ValueError("character lives on the wrong group")
    return VirtualCharacter.from_class_function(f.G, induce_values(chi.values(), f))


def induce_bruteforce(vals, f: Hom) -> list:
    """Oracle: ind chi(g) = 1/|H| sum_{x in G} sum_{h : f(h) = x^-1 g x} chi(h),
    evaluated element by element."""
    G, H = f.G, f.H
    fe = f.on_elements
    t, inv = G.table, G.inv
    fibers: dict[int, list[int]] = {}
    for hidx, gidx in enumerate(fe):
        fibers.setdefault(int(gidx), []).append(hidx)
    hvals = [vals[H.class_of[i]] for i in range(H.order)]
    out = []
    for rep in G.class_reps:
        s = 0
        for x in range(G.order):
            y = int(t[t[inv[x], rep], x])
            for hidx in fibers.get(y, ()):
                s = s + hvals[hidx]
        out.append(s / H.order)
    return out


def inflate(chi: VirtualCharacter, f: Hom) -> VirtualCharacter:
    """Pull back along a surjection f: G' -> G (``chi`` lives on ``f.G``)."""
    if f.image_order() != f.G.order:
        raise ValueError("inflation needs a surjection")
    return restrict(chi, f)


def trivial_on(chi_index: int, G: FiniteGroup, subset: Sequence[int]) -> bool:
    """Is the irreducible ``chi_index`` trivial on the given elements?"""
    T = G.character_table
    row = T.values[chi_index]
    d = T.degrees[chi_index]
    return all(abs(row[G.class_of[g]] - d) < SNAP_TOL for g in subset)


# ---------------------------------------------------------------------------
# the quotients of U_0, U_1, I


def _e12(x, n=2):
    m = [[int(i == j) for j in range(n)] for i in range(n)]
    m[0][1] = x
    return tuple(tuple(r) for r in m)


def _e21(x, n=2):
    m = [[int(i == j) for j in range(n)] for i in range(n)]
    m[1][0] = x
    return tuple(tuple(r) for r in m)


def _diag(t, M):
    return ((t % M, 0), (0, pow(t, -1, M)))


def _units(M):
    from math import gcd

    return [t for t in range(1, M) if gcd(t, M) == 1]


def _conj_h_inv(g, p, M):
    """h^-1 g h = [[d, c/p], [p b, a]] for g = [[a, b], [c, d]] with p | c."""
    (a, b), (c, d) = g
    if c % p:
        raise ValueError("not in the Iwahori subgroup")
    return ((d % M, (c // p) % M), (p * b % M, a % M))


_CACHE: dict = {}


def finite_quotient(spec: str, m: int, p: int, cap: int = GROUP_CAP) -> FiniteGroup:
    """Finite quotient of a chamber stabilizer at level m.

    ``U0`` -> U_0/K_m and ``U1`` -> U_1/hK_mh^-1, both realized as
    SL_2(Z/p^m) (the latter in the coordinates x = h^-1 g h); ``I`` -> I/K_m
    inside SL_2(Z/p^m); ``IN`` -> I/N_m with N_m = K_m ∩ hK_mh^-1, encoded as
    pairs (g mod p^m, h^-1 g h mod p^m).
    """
    key = (spec, m, p, cap)
    if key in _CACHE:
        return _CACHE[key]
    if m < 1:
        raise ValueError("level must be at least 1")
    M = p**m
    units = _units(M)
    if spec in ("U0", "U1"):
        G = FiniteGroup.from_generators(f"{spec}/K{m}(p={p})", [(_e12(1),), (_e21(1),)], M, cap)
    elif spec == "I":
        gens = [(_e12(1),), (_e21(p % M),)] + [(_diag(t, M),) for t in units]
        G = FiniteGroup.from_generators(f"I/K{m}(p={p})", gens, M, cap)
    elif spec == "IN":
        # integer lifts: the second coordinate divides the (2,1) entry by p
        base = [_e12(1), _e21(p)] + [_diag(t, M) for t in units]
        gens = [(g, _conj_h_inv(g, p, M)) for g in base]
        G = FiniteGroup.from_generators(f"I/N{m}(p={p})", gens, M, cap)
    else:
        raise ValueError(f"no finite quotient for spec {spec!r}")
    _CACHE[key] = G
    return G


def block(i: int):
    return lambda x: (x[i],)


def reduce_level(m_from: int, m_to: int, p: int):
    M = p**m_to

    def f(x):
        return tuple(tuple(tuple(v % M for v in row) for row in blk) for blk in x)

    return f


def standard_hom(sub: str, amb: str, m: int, p: int) -> Hom:
    """The structure maps between the chamber quotients at level m."""
    S = finite_quotient(sub, m, p)
    A = finite_quotient(amb, m, p)
    if (sub, amb) == ("I", "U0"):
        return Hom(S, A, lambda x: x)
    if (sub, amb) == ("IN", "U0"):
        return Hom(S, A, block(0))
    if (sub, amb) == ("IN", "U1"):
        return Hom(S, A, block(1))
    if (sub, amb) == ("IN", "I"):
        return Hom(S, A, block(0))
    raise ValueError(f"no structure map {sub} -> {amb}")


def level_hom(spec: str, m_from: int, m_to: int, p: int) -> Hom:
    """Reduction G(level m_from) -> G(level m_to) for m_to <= m_from."""
    return Hom(finite_quotient(spec, m_from, p), finite_quotient(spec, m_to, p), reduce_level(m_from, m_to, p))


# ---------------------------------------------------------------------------
# Mackey formula (brute force, on element subsets of an ambient group)


def mackey_check(f: Hom) -> dict:
    """For an injective f: H -> G compare Res_H Ind_H^G chi with the
    double-coset sum of Ind_{H ∩ sHs^-1}^H (chi^s) for every irreducible chi."""
    G, H = f.G, f.H
    if len(f.kernel) != 1:
        raise ValueError("Mackey check needs an embedding")
    t, inv = G.table, G.inv
    img = [int(i) for i in f.on_elements]
    back = {g: h for h, g in enumerate(img)}
    Hset = set(img)
    # double coset representatives H s H
    seen: set[int] = set()
    reps = []
    for s in range(G.order):
        if s in seen:
            continue
        reps.append(s)
        for a in img:
            for b in img:
                seen.add(int(t[t[a, s], b]))
    T = H.character_table
    results = []
    for i in range(T.size):
        chi = VirtualCharacter.irreducible(H, i)
        lhs = restrict(induce(chi, f), f)
        hvals = [T.values[i][H.class_of[k]] for k in range(H.order)]
        total = [0] * len(H.classes)
        for s in reps:
            sinv = int(inv[s])
            # H_s = H ∩ s H s^-1, as G-indices
            Hs = [x for x in img if int(t[t[sinv, x], s]) in Hset]
            # chi^s(x) = chi(s^-1 x s)
            chis = {x: hvals[back[int(t[t[sinv, x], s])]] for x in Hs}
            Hs_set = set(Hs)
            for c, rep in enumerate(H.class_reps):
                g = img[rep]
                acc = 0
                for y in img:
                    z = int(t[t[inv[y], g], y])
                    if z in Hs_set:
                        acc = acc + chis[z]
                total[c] = total[c] + acc / len(Hs)
        rhs = VirtualCharacter.from_class_function(H, total)
        results.append((lhs.coeffs, rhs.coeffs))
    return {
        "double_cosets": len(reps),
        "pairs": results,
        "ok": all(a == b for a, b in results),
    }
