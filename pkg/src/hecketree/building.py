"""The Bruhat-Tits tree of SL_2(Q_p).

A vertex is the homothety class of the lattice spanned by the columns of a
2x2 matrix.  Every class has a unique representative

    [[p^k, x],
     [0,   1]]     with x in Z[1/p], 0 <= x < p^k,

which is what :class:`Vertex` stores.  Points in the interior of an edge are
:class:`TreePoint` objects carrying both endpoints (in canonical order) and the
offset from the first one.

Group elements are accepted as :class:`PadicMatrix` or as nested sequences of
rationals.  Inexact p-adic entries are used only when their precision provably
does not change the lattice.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering

from .padic import PadicMatrix, PrecisionError, vp_fraction

# ---------------------------------------------------------------------------
# exact 2x2 / 3x3 rational matrices (tuples of tuples of Fractions)


def as_fractions(g) -> tuple[tuple[Fraction, ...], ...]:
    """Exact rational matrix of ``g``; inexact p-adic input must be certified
    by the caller (see :func:`_certified`)."""
    if isinstance(g, PadicMatrix):
        return g.to_fractions()
    return tuple(tuple(Fraction(x) for x in row) for row in g)


def mat_mul(a, b):
    n = len(a)
    return tuple(
        tuple(sum((a[i][k] * b[k][j] for k in range(n)), Fraction(0)) for j in range(n))
        for i in range(n)
    )


def mat_det(a) -> Fraction:
    if len(a) == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    return (
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    )


def mat_inv(a):
    d = mat_det(a)
    if d == 0:
        raise ZeroDivisionError("singular matrix")
    n = len(a)
    if n == 2:
        return ((a[1][1] / d, -a[0][1] / d), (-a[1][0] / d, a[0][0] / d))
    cof = []
    for i in range(n):
        row = []
        for j in range(n):
            m = [[a[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
            row.append((m[0][0] * m[1][1] - m[0][1] * m[1][0]) * (-1) ** (i + j) / d)
        cof.append(tuple(row))
    return tuple(cof)


def identity(n: int = 2):
    return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))


def h_matrix(p: int, n: int = 2):
    rows = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n - 1):
        rows[i][i + 1] = Fraction(1)
    rows[n - 1][0] = Fraction(p)
    return tuple(tuple(r) for r in rows)


def min_val(a, p: int) -> float:
    return min(vp_fraction(x, p) for row in a for x in row)


def _certified(g, p: int):
    """Exact lift of ``g``, checking that its truncation error cannot move any
    lattice: the error E must satisfy g^-1 E integral."""
    a = as_fractions(g)
    if isinstance(g, PadicMatrix) and not g.is_exact():
        absprec = min(x.absprec for row in g.rows for x in row)
        need = -min_val(mat_inv(a), p)
        if absprec < need:
            raise PrecisionError(f"entries known to O(p^{absprec}), need O(p^{need})", absprec)
    return a


def _reduce_mod_pk(x: Fraction, p: int, k: int) -> Fraction:
    """Representative of x + p^k Z_p in Z[1/p] ∩ [0, p^k)."""
    s = int(vp_fraction(Fraction(x.denominator), p))
    den_unit = x.denominator // p**s
    if k + s <= 0:
        return Fraction(0)
    mod = p ** (k + s)
    r = x.numerator * pow(den_unit, -1, mod) % mod
    return Fraction(r, p**s)


# ---------------------------------------------------------------------------
# vertices


@total_ordering
@dataclass(frozen=True)
class Vertex:
    p: int
    k: int
    x: Fraction

    def matrix(self):
        return ((Fraction(self.p) ** self.k, self.x), (Fraction(0), Fraction(1)))

    def __lt__(self, other: "Vertex") -> bool:
        return (self.k, self.x) < (other.k, other.x)

    def canon(self) -> str:
        return f"[[{self.p}^{self.k},{self.x}],[0,1]]"

    def __repr__(self) -> str:
        return f"Vertex({self.canon()})"


def base_vertex(p: int) -> Vertex:
    return Vertex(p, 0, Fraction(0))


def _vertex_of(a, p: int) -> Vertex:
    (a11, a12), (a21, a22) = a
    d = a11 * a22 - a12 * a21
    if d == 0:
        raise ZeroDivisionError("singular matrix has no lattice")
    vd = vp_fraction(d, p)
    if a21 != 0 and vp_fraction(a21, p) <= vp_fraction(a22, p):
        k = int(vd - 2 * vp_fraction(a21, p))
        x = a11 / a21
    else:
        k = int(vd - 2 * vp_fraction(a22, p))
        x = a12 / a22
    return Vertex(p, k, _reduce_mod_pk(x, p, k))


def canonical_vertex(g, p: int | None = None) -> Vertex:
    """Vertex of the lattice spanned by the columns of ``g``."""
    if p is None:
        p = g.p
    return _vertex_of(_certified(g, p), p)


def vertex_distance(v: Vertex, w: Vertex) -> int:
    """Join of the balls B(x, p^-k): d = k + k' - 2 min(k, k', v(x - x'))."""
    m = min(v.k, w.k)
    if v.x != w.x:
        m = min(m, int(vp_fraction(v.x - w.x, v.p)))
    return v.k + w.k - 2 * m


def vertex_distance_matrix(v: Vertex, w: Vertex) -> int:
    """d(v, w) = v(det q) - 2 min v(q_ij) for q = v^-1 w."""
    q = mat_mul(mat_inv(v.matrix()), w.matrix())
    return int(vp_fraction(mat_det(q), v.p) - 2 * min_val(q, v.p))


def neighbors(v: Vertex) -> list[Vertex]:
    p = v.p
    m = v.matrix()
    out = [_vertex_of(mat_mul(m, ((Fraction(p), Fraction(j)), (Fraction(0), Fraction(1)))), p) for j in range(p)]
    out.append(_vertex_of(mat_mul(m, ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(p)))), p))
    return out


def act_vertex(g, v: Vertex) -> Vertex:
    return _vertex_of(mat_mul(_certified(g, v.p), v.matrix()), v.p)


def vertex_path(v: Vertex, w: Vertex) -> list[Vertex]:
    """The vertices of the geodesic from v to w, by greedy descent."""
    path = [v]
    d = vertex_distance(v, w)
    while d > 0:
        cur = path[-1]
        for u in neighbors(cur):
            if vertex_distance(u, w) == d - 1:
                path.append(u)
                break
        else:  # pragma: no cover - impossible in a tree
            raise RuntimeError("greedy geodesic walk got stuck")
        d -= 1
    return path


def displacement(g, p: int) -> int:
    """d(x0, g x0) = v(det g) - 2 min_ij v(g_ij)."""
    a = as_fractions(g)
    return int(vp_fraction(mat_det(a), p) - 2 * min_val(a, p))


# ---------------------------------------------------------------------------
# points of the geometric realization


@dataclass(frozen=True)
class TreePoint:
    """A vertex (``other is None``) or the point at offset ``t`` from
    ``vertex`` towards the adjacent ``other``, with ``vertex < other``."""

    vertex: Vertex
    other: Vertex | None = None
    t: Fraction = Fraction(0)

    @classmethod
    def at(cls, v: Vertex) -> "TreePoint":
        return cls(v)

    @classmethod
    def on_edge(cls, u: Vertex, w: Vertex, t) -> "TreePoint":
        """Point at distance ``t`` from ``u`` on the edge ``[u, w]``."""
        t = Fraction(t)
        if vertex_distance(u, w) != 1:
            raise ValueError("endpoints are not adjacent")
        if not 0 <= t <= 1:
            raise ValueError("offset must lie in [0, 1]")
        if t == 0:
            return cls(u)
        if t == 1:
            return cls(w)
        if w < u:
            u, w, t = w, u, 1 - t
        return cls(u, w, t)

    @property
    def p(self) -> int:
        return self.vertex.p

    def is_vertex(self) -> bool:
        return self.other is None

    def __repr__(self) -> str:
        if self.other is None:
            return f"TreePoint({self.vertex.canon()})"
        return f"TreePoint({self.vertex.canon()} -{self.t}-> {self.other.canon()})"


def base_point(p: int) -> TreePoint:
    return TreePoint(base_vertex(p))


def _to_point(x) -> TreePoint:
    return x if isinstance(x, TreePoint) else TreePoint(x)


def _ends(x: TreePoint):
    """(endpoint, distance from x) pairs through which geodesics leave x."""
    if x.other is None:
        return [(x.vertex, Fraction(0))]
    return [(x.vertex, x.t), (x.other, 1 - x.t)]


def tree_distance(x, y) -> Fraction:
    x, y = _to_point(x), _to_point(y)
    if x.other is not None and y.other is not None and (x.vertex, x.other) == (y.vertex, y.other):
        return abs(x.t - y.t)
    if x.other is not None and y.is_vertex() and y.vertex in (x.vertex, x.other):
        return x.t if y.vertex == x.vertex else 1 - x.t
    if y.other is not None and x.is_vertex():
        return tree_distance(y, x)
    return min(a + b + vertex_distance(u, w) for u, a in _ends(x) for w, b in _ends(y))


def act(g, x) -> TreePoint:
    x = _to_point(x)
    a = _certified(g, x.p)
    u = _vertex_of(mat_mul(a, x.vertex.matrix()), x.p)
    if x.other is None:
        return TreePoint(u)
    w = _vertex_of(mat_mul(a, x.other.matrix()), x.p)
    return TreePoint.on_edge(u, w, x.t)


def geodesic_segment(x, y) -> list[TreePoint]:
    """x, the vertices strictly between, and y."""
    x, y = _to_point(x), _to_point(y)
    if x == y:
        return [x]
    if x.other is not None and y.other is not None and (x.vertex, x.other) == (y.vertex, y.other):
        return [x, y]
    d = tree_distance(x, y)
    # exit vertices: the endpoint realizing the distance
    ex = next(u for u, a in _ends(x) if a + tree_distance(TreePoint(u), y) == d)
    ey = next(w for w, b in _ends(y) if b + tree_distance(x, TreePoint(w)) == d)
    verts = [TreePoint(v) for v in vertex_path(ex, ey)]
    out = [x] + verts + [y]
    dedup = [out[0]]
    for pt in out[1:]:
        if pt != dedup[-1]:
            dedup.append(pt)
    return dedup


def path_length(path: list[TreePoint]) -> Fraction:
    return sum((tree_distance(a, b) for a, b in zip(path, path[1:])), Fraction(0))


def point_along(path: list[TreePoint], s) -> TreePoint:
    """The point at arc length ``s`` along a geodesic path."""
    s = Fraction(s)
    if s <= 0:
        return path[0]
    for a, b in zip(path, path[1:]):
        step = tree_distance(a, b)
        if s < step:
            return _interpolate(a, b, s)
        s -= step
    return path[-1]


def _interpolate(a: TreePoint, b: TreePoint, s: Fraction) -> TreePoint:
    """Point at distance s from a towards b, where [a, b] lies in one edge."""
    if s == 0:
        return a
    if a.is_vertex() and b.is_vertex():
        return TreePoint.on_edge(a.vertex, b.vertex, s)
    edge_pt = a if not a.is_vertex() else b
    u, w = edge_pt.vertex, edge_pt.other
    pos_a = _offset_in(a, u, w)
    pos_b = _offset_in(b, u, w)
    pos = pos_a + s if pos_b > pos_a else pos_a - s
    return TreePoint.on_edge(u, w, pos)


def _offset_in(x: TreePoint, u: Vertex, w: Vertex) -> Fraction:
    if x.is_vertex():
        return Fraction(0) if x.vertex == u else Fraction(1)
    return x.t


def radial_projection(x, R, base: TreePoint | None = None) -> TreePoint:
    x = _to_point(x)
    R = Fraction(R)
    if R < 0:
        raise ValueError("radius must be nonnegative")
    x0 = base if base is not None else base_point(x.p)
    if tree_distance(x0, x) <= R:
        return x
    return point_along(geodesic_segment(x0, x), R)


def radial_homotopy(x, tau, R, base: TreePoint | None = None) -> TreePoint:
    x = _to_point(x)
    tau = Fraction(tau)
    if not 0 <= tau <= 1:
        raise ValueError("tau must lie in [0, 1]")
    x0 = base if base is not None else base_point(x.p)
    return radial_projection(x, tau * tree_distance(x, x0) + (1 - tau) * Fraction(R), x0)


# ---------------------------------------------------------------------------
# balls


@dataclass(frozen=True)
class Ball:
    p: int
    radius: int
    vertices: tuple[Vertex, ...]
    dist: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "radius": self.radius,
            "vertices": [
                {"id": i, "canon": v.canon(), "dist": d}
                for i, (v, d) in enumerate(zip(self.vertices, self.dist))
            ],
            "edges": [list(e) for e in self.edges],
        }

    def to_dot(self) -> str:
        lines = ["graph tree {"]
        for i, v in enumerate(self.vertices):
            lines.append(f'  {i} [label="{v.canon()}"];')
        for a, b in self.edges:
            lines.append(f"  {a} -- {b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def ball(p: int, radius: int) -> Ball:
    """Vertices within ``radius`` of x0 and the edges among them, found by BFS
    over :func:`neighbors` (no tree structure is assumed)."""
    start = base_vertex(p)
    index = {start: 0}
    order = [start]
    dist = [0]
    edges = set()
    queue = deque([start])
    while queue:
        v = queue.popleft()
        i = index[v]
        for w in neighbors(v):
            if w not in index:
                if dist[i] == radius:
                    continue
                index[w] = len(order)
                order.append(w)
                dist.append(dist[i] + 1)
                queue.append(w)
            j = index[w]
            edges.add((min(i, j), max(i, j)))
    return Ball(p, radius, tuple(order), tuple(dist), tuple(sorted(edges)))


def check_tree_axioms(b: Ball) -> dict:
    """Connectivity, acyclicity and (p+1)-regularity of the interior."""
    n = len(b.vertices)
    adj = [[] for _ in range(n)]
    for a, c in b.edges:
        adj[a].append(c)
        adj[c].append(a)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    connected = len(seen) == n
    acyclic = connected and len(b.edges) == n - 1
    regular = all(len(adj[i]) == b.p + 1 for i in range(n) if b.dist[i] < b.radius)
    leaves = all(len(adj[i]) == 1 for i in range(n) if b.dist[i] == b.radius and b.radius > 0)
    expected = 1 + sum((b.p + 1) * b.p ** (r - 1) for r in range(1, b.radius + 1))
    return {
        "connected": connected,
        "acyclic": acyclic,
        "regular": regular and leaves,
        "count": n,
        "expected_count": expected,
        "ok": connected and acyclic and regular and leaves and n == expected,
    }


# ---------------------------------------------------------------------------
# stabilizers of the standard chamber

SL2_SPECS = ("U0", "U1", "I")
SL3_SPECS = ("U0", "U1", "U2", "U01", "U02", "U12", "I")


def spec_indices(spec: str, n: int) -> tuple[int, ...]:
    """Which U_i a specifier intersects: 'U01' -> (0, 1); 'I' -> all."""
    if spec == "I":
        return tuple(range(n))
    if spec.startswith("U") and spec[1:].isdigit():
        idx = tuple(int(c) for c in spec[1:])
        if all(i < n for i in idx):
            return idx
    raise ValueError(f"unknown stabilizer spec {spec!r} for n={n}")


def conj_h(a, p: int, i: int):
    """h^-i a h^i."""
    n = len(a)
    h = h_matrix(p, n)
    hi = mat_inv(h)
    out = a
    for _ in range(i % n):
        out = mat_mul(mat_mul(hi, out), h)
    # h^n = p Id is central, so exponents only matter mod n
    return out


def _in_u0(a, p: int) -> bool:
    return min_val(a, p) >= 0 and mat_det(a) == 1


def stabilizes(g, spec: str, m: int = 1, p: int | None = None) -> bool:
    """Certified membership of ``g`` in U_i, U_ij or I via h-conjugation.

    ``m`` is the level at which the caller will use the answer; inexact input
    needs ``m + 2`` digits beyond the conjugation spread.
    """
    if p is None:
        p = g.p
    a = as_fractions(g)
    if isinstance(g, PadicMatrix) and not g.is_exact():
        absprec = min(x.absprec for row in g.rows for x in row)
        if absprec < m + 2:
            raise PrecisionError(f"precision {absprec} too low for level {m}", absprec)
    n = len(a)
    return all(_in_u0(conj_h(a, p, i), p) for i in spec_indices(spec, n))


# finite-level predicates on integer matrices mod p^m in U_0-coordinates

def _divisibility_conditions(p: int, n: int, shift: int) -> list[tuple[int, int, int]]:
    """Entries (k, l, e) such that h^shift x h^-shift is integral iff
    p^e divides x_kl, for integral x.  Conjugation by h permutes matrix units
    up to powers of p, so the conditions are read off the units."""
    h = h_matrix(p, n)
    hi = mat_inv(h)
    out = []
    for k in range(n):
        for l in range(n):
            unit = tuple(tuple(Fraction(int((r, c) == (k, l))) for c in range(n)) for r in range(n))
            img = unit
            for _ in range(shift % n):
                img = mat_mul(mat_mul(h, img), hi)
            v = min_val(img, p)
            if v < 0:
                out.append((k, l, int(-v)))
    return out


def quotient_predicate(sub: str, amb_index: int, n: int, p: int):
    """Predicate on x in SL_n(Z/p^m) (coordinates x = h^-a g h^a with a the
    chosen index of ``amb``) deciding g in ``sub``."""
    conds = []
    for j in spec_indices(sub, n):
        conds.extend(_divisibility_conditions(p, n, amb_index - j))

    def pred(x) -> bool:
        return all(x[k][l] % p**e == 0 for k, l, e in conds)

    return pred


def _mat_mod_mul(a, b, M):
    n = len(a)
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(n)) % M for j in range(n)) for i in range(n))


def _mat_mod_inv(a, M):
    """Inverse of a determinant-one integer matrix modulo M (the adjugate)."""
    n = len(a)
    if n == 2:
        return ((a[1][1] % M, -a[0][1] % M), (-a[1][0] % M, a[0][0] % M))
    adj = []
    for i in range(n):
        row = []
        for j in range(n):
            m = [[a[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
            row.append((m[0][0] * m[1][1] - m[0][1] * m[1][0]) * (-1) ** (i + j) % M)
        adj.append(tuple(row))
    return tuple(adj)


def elementary_generators(n: int, M: int):
    gens = []
    for i in range(n):
        for j in range(n):
            if i != j:
                e = [[int(r == c) for c in range(n)] for r in range(n)]
                e[i][j] = 1
                gens.append(tuple(tuple(r) for r in e))
    return gens


class QuotientTooLarge(RuntimeError):
    pass


def coset_index(sub: str, amb: str, m: int, p: int, n: int = 2, cap: int = 10_000) -> int:
    """[amb : sub] by breadth-first enumeration of the left cosets of the image
    of ``sub`` in the image of ``amb`` at level m.

    ``amb`` must be a single vertex group U_a (or equal to ``sub``); in
    U_0-coordinates its image is SL_n(Z/p^m), generated by elementary
    matrices.
    """
    if m < 1:
        raise ValueError("level must be at least 1")
    if sub == amb:
        return 1
    amb_idx = spec_indices(amb, n)
    sub_idx = spec_indices(sub, n)
    if not set(amb_idx) <= set(sub_idx):
        raise ValueError(f"{sub} is not contained in {amb}")
    if len(amb_idx) != 1:
        # [U_ab : I] = [U_a : I] / [U_a : U_ab]
        a = amb_idx[0]
        return coset_index(sub, f"U{a}", m, p, n, cap) // coset_index(amb, f"U{a}", m, p, n, cap)
    a = amb_idx[0]
    M = p**m
    pred = quotient_predicate(sub, a, n, p)
    ident = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
    reps = [ident]
    rep_invs = [ident]
    queue = deque([ident])
    gens = elementary_generators(n, M)
    while queue:
        r = queue.popleft()
        for s in gens:
            g = _mat_mod_mul(s, r, M)
            if not any(pred(_mat_mod_mul(ri, g, M)) for ri in rep_invs):
                reps.append(g)
                rep_invs.append(_mat_mod_inv(g, M))
                queue.append(g)
                if len(reps) > cap:
                    raise QuotientTooLarge(f"more than {cap} cosets")
    return len(reps)


# ---------------------------------------------------------------------------
# the category of simplices of the standard chamber


@dataclass(frozen=True)
class ChamberCategory:
    """Simplices v0 = x0, v1 = h x0 and the edge e between them.

    A morphism g G_s : s -> t exists when g s ⊆ t; two representatives give
    the same morphism when they agree modulo the stabilizer G_s.
    """

    p: int

    objects = ("v0", "v1", "e")
    stabilizer = {"v0": "U0", "v1": "U1", "e": "I"}

    def simplex(self, name: str) -> frozenset:
        x0 = base_vertex(self.p)
        x1 = act_vertex(h_matrix(self.p), x0)
        return {"v0": frozenset([x0]), "v1": frozenset([x1]), "e": frozenset([x0, x1])}[name]

    def translate(self, g, name: str) -> frozenset:
        return frozenset(act_vertex(g, v) for v in self.simplex(name))

    def is_morphism(self, g, source: str, target: str) -> bool:
        return self.translate(g, source) <= self.simplex(target)

    def same_morphism(self, g, g2, source: str) -> bool:
        a = mat_mul(mat_inv(as_fractions(g)), as_fractions(g2))
        return stabilizes(a, self.stabilizer[source], p=self.p)

    def compose(self, g_next, g_first):
        """(hG_t) ∘ (gG_s) = hgG_s."""
        return mat_mul(as_fractions(g_next), as_fractions(g_first))

    def face_inclusions(self) -> list[tuple[str, str]]:
        return [("v0", "e"), ("v1", "e")]

    def hom_count(self, source: str, target: str) -> int:
        """Number of morphisms; the chamber is a strict fundamental domain so
        this is the face poset (0 or 1)."""
        if source == target:
            return 1
        return int((source, target) in self.face_inclusions())


def chamber_category(p: int) -> ChamberCategory:
    return ChamberCategory(p)
