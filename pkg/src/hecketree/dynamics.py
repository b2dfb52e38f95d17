"""Flow space of the tree and foliated distances.

The group metric is d_G(g, g') = rho(g^-1 g') with

    rho(u) = max(d_X(u x0, x0), 2^-n(u)),   n(u) = sup{m : u in K_m},

where n(u) = 0 when u is not in K_1 (so the second term is 1 there) and
rho(e) = 0.  rho is symmetric and subadditive, so the chain metric it
generates is rho itself and d_G is exact.

Every predicate is exact except ``fold_FS``, which integrates against e^-|t|
and therefore answers True / False / None (None = inside the certified
margin).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import mpmath

from . import hecke as hk
from .building import (
    TreePoint,
    Vertex,
    _certified,
    _vertex_of,
    base_vertex,
    mat_inv,
    mat_mul,
    neighbors,
    vertex_distance,
    vertex_path,
)
from .padic import INF, PadicMatrix, vp, vp_fraction

Q = Fraction


# ---------------------------------------------------------------------------
# group elements


def as_matrix(g, p: int):
    """Exact fraction matrix from a PadicMatrix, rows, or hecke integer form."""
    if isinstance(g, PadicMatrix):
        return _certified(g, p)
    if isinstance(g, tuple) and len(g) == 5 and all(isinstance(x, int) for x in g):
        return hk.im_rows(g)
    return tuple(tuple(Fraction(x) for x in row) for row in g)


def identity2():
    return ((Q(1), Q(0)), (Q(0), Q(1)))


def diag(a, b):
    return ((Q(a), Q(0)), (Q(0), Q(b)))


@lru_cache(maxsize=1 << 18)
def vdist(v: Vertex, w: Vertex) -> int:
    if v == w:
        return 0
    return vertex_distance(v, w)


def act_v(a, v: Vertex) -> Vertex:
    return _vertex_of(mat_mul(a, v.matrix()), v.p)


def displacement0(a, p: int) -> int:
    (a11, a12), (a21, a22) = a
    d = a11 * a22 - a12 * a21
    return int(vp_fraction(d, p) - 2 * min(vp_fraction(x, p) for x in (a11, a12, a21, a22)))


def congruence_depth(a, p: int) -> float:
    """sup{m : a in K_m}: INF for the identity, 0 outside K_1."""
    (a11, a12), (a21, a22) = a
    if a11 * a22 - a12 * a21 != 1:
        return 0
    if any(vp_fraction(x, p) < 0 for x in (a11, a12, a21, a22)):
        return 0
    n = min(vp_fraction(a11 - 1, p), vp_fraction(a12, p), vp_fraction(a21, p), vp_fraction(a22 - 1, p))
    return n


def rho(u, p: int) -> Fraction:
    a = as_matrix(u, p)
    n = congruence_depth(a, p)
    small = Q(0) if n == INF else Q(1, 2 ** int(n)) if n >= 1 else Q(1)
    return max(Q(displacement0(a, p)), small)


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __float__(self):
        return float(self.hi)

    @property
    def exact(self) -> bool:
        return self.lo == self.hi


def d_G(g, g2, p: int) -> Interval:
    """Certified bounds for d_G; they coincide because rho is subadditive."""
    a = mat_mul(mat_inv(as_matrix(g, p)), as_matrix(g2, p))
    r = rho(a, p)
    return Interval(r, r)


# ---------------------------------------------------------------------------
# subgroup specs for foliated distance


VSPECS = ("U0", "U1", "I", "K1", "K2", "K3", "Vc")


def _level(spec: str) -> int:
    return int(spec[1:]) if spec.startswith("K") else 0


def in_subgroup(a, spec: str, p: int) -> bool:
    if spec == "Vc":
        return a[0][1] == 0 and a[1][0] == 0 and a[0][0] * a[1][1] == 1
    return hk.subgroup(spec, p).member(hk.im(a))


def _ball_level(eta: Fraction, strict: bool):
    """Describe {x : rho(x) < eta} (strict) or {x : rho(x) <= eta}.

    Returns ("e",), ("K", m) or ("R", eta): the identity, K_m, or the set of
    x with d(x x0, x0) below/at eta.
    """
    eta = Q(eta)
    if strict:
        if eta <= 0:
            raise ValueError("strict foliated distance needs eta > 0")
        if eta > 1:
            return ("R", eta)
        m = 1
        while Q(1, 2**m) >= eta:
            m += 1
        return ("K", m)
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if eta == 0:
        return ("e",)
    if eta >= 1:
        return ("R", eta)
    m = 1
    while Q(1, 2**m) > eta:
        m += 1
    return ("K", m)


def _in_VK(w, spec: str, m: int, p: int) -> bool:
    """w in V K_m (m >= 1)."""
    if spec in ("U0", "U1", "I"):
        return in_subgroup(w, spec, p)
    if spec.startswith("K"):
        return in_subgroup(w, f"K{min(_level(spec), m)}", p)
    # Vc: w = t r with t = diag(p^k, p^-k) moving x0 to w x0 and
    # r in SL_2(Z_p) diagonal modulo p^m
    j, _ = _apartment_position(act_v(w, base_vertex(p)))
    if j is None or j % 2:
        return False
    t = diag(Q(p) ** (j // 2), Q(p) ** (-(j // 2)))
    r = mat_mul(mat_inv(t), w)
    return _integral_sl2(r, p) and vp_fraction(r[0][1], p) >= m and vp_fraction(r[1][0], p) >= m


def _integral_sl2(a, p: int) -> bool:
    (a11, a12), (a21, a22) = a
    return a11 * a22 - a12 * a21 == 1 and all(vp_fraction(x, p) >= 0 for x in (a11, a12, a21, a22))


def _apartment_position(v: Vertex):
    """j if v is the apartment vertex [[p^j, 0], [0, 1]], else (None, None)."""
    if v.x == 0:
        return v.k, 0
    return None, None


def orbit_points(spec: str, beta, p: int) -> list[Vertex]:
    """{v x0 : v in V, rho(v) <= beta}; v = e realises x0 with rho = 0."""
    beta = Q(beta)
    x0 = base_vertex(p)
    pts = [x0]
    if spec == "U1" and beta >= 2:
        x1 = Vertex(p, -1, Q(0))
        pts += [y for y in neighbors(x1) if y != x0]
    elif spec == "Vc":
        k = 1
        while 2 * k <= beta:
            pts += [Vertex(p, 2 * k, Q(0)), Vertex(p, -2 * k, Q(0))]
            k += 1
    return pts


def fold_V(g, g2, spec: str, beta, eta, p: int, strict: bool = False) -> bool:
    """Is there v in V with rho(v) <= beta and rho(v^-1 g^-1 g') below eta?"""
    beta = Q(beta)
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    w = mat_mul(mat_inv(as_matrix(g, p)), as_matrix(g2, p))
    ball = _ball_level(eta, strict)
    if ball[0] == "e":
        return in_subgroup(w, spec, p) and rho(w, p) <= beta
    if ball[0] == "K":
        m = ball[1]
        if not _in_VK(w, spec, m, p):
            return False
        return congruence_depth(w, p) >= m or rho(w, p) <= beta
    r = ball[1]
    y = act_v(w, base_vertex(p))
    for pt in orbit_points(spec, beta, p):
        d = vdist(pt, y)
        if (d < r) if strict else (d <= r):
            return True
    return False


def _net(spec: str, beta, M: int, p: int) -> list:
    """Exact representatives of V/K_M meeting the rho <= beta ball (as
    matrices), with the identity coset represented by e."""
    if spec == "Vc":
        out = []
        beta = Q(beta)
        units = [u for u in range(1, p**M) if u % p]
        k = 0
        while 2 * k <= beta:
            for s in ([k, -k] if k else [0]):
                for u in units:
                    out.append(diag(Q(p) ** s * u, Q(1, u) * Q(p) ** (-s)))
            k += 1
        return out
    U = hk.subgroup(spec, p)
    return [hk.im_rows(hk.coset_rep(key, p, M)) for key in hk.subgroup_cosets(U, M)]


def fold_V_net(g, g2, spec: str, beta, eta, p: int, strict: bool = False) -> bool:
    """Oracle for ``fold_V``: exhaustive search over a finite net of V."""
    beta = Q(beta)
    w = mat_mul(mat_inv(as_matrix(g, p)), as_matrix(g2, p))
    ball = _ball_level(eta, strict)
    if ball[0] == "e":
        return in_subgroup(w, spec, p) and rho(w, p) <= beta
    M = max(1, ball[1] if ball[0] == "K" else 1, _level(spec))
    for v in _net(spec, beta, M, p):
        if rho(v, p) > beta:
            continue
        r = rho(mat_mul(mat_inv(v), w), p)
        if (r < Q(eta)) if strict else (r <= Q(eta)):
            return True
    return False


def fold_P(gs: Sequence, g2s: Sequence, P: Sequence[str], beta, eta, p: int, strict: bool = False) -> bool:
    if not (len(gs) == len(g2s) == len(P)):
        raise ValueError("tuple lengths differ")
    return all(fold_V(a, b, V, beta, eta, p, strict) for a, b, V in zip(gs, g2s, P))


# ---------------------------------------------------------------------------
# generalized geodesics


@dataclass(frozen=True)
class GeneralizedGeodesic:
    """c(t) = point at arc position t + offset along the vertex line w_j,
    for t in [a, b], constant outside.

    ``verts`` holds w_j for j = j0, j0+1, ...; with ``period = (gamma, L)``
    the line continues by w_{j+L} = gamma w_j in both directions.
    """

    p: int
    verts: tuple
    j0: int = 0
    a: object = -math.inf
    b: object = math.inf
    offset: Fraction = Q(0)
    period: tuple | None = None

    def __post_init__(self):
        if not (0 <= self.offset < 1):
            raise ValueError("offset must lie in [0, 1)")
        if self.a > self.b:
            raise ValueError("empty parameter interval")
        if self.period is None:
            lo, hi = self._needed()
            if lo < self.j0 or hi > self.j0 + len(self.verts) - 1:
                raise ValueError("vertex list does not cover the isometric interval")
        else:
            if len(self.verts) != self.period[1]:
                raise ValueError("periodic geodesics list one fundamental domain")
        n = len(self.verts) + (1 if self.period is not None else -1)
        for j in range(self.j0, self.j0 + n):
            if vdist(self.vertex(j), self.vertex(j + 1)) != 1:
                raise ValueError("consecutive vertices must be adjacent")
            if j > self.j0 or self.period is not None:
                if self.vertex(j - 1) == self.vertex(j + 1):
                    raise ValueError("itinerary backtracks")

    def _needed(self):
        lo = math.floor(self.a + self.offset) if self.a != -math.inf else None
        hi = math.ceil(self.b + self.offset) if self.b != math.inf else None
        if lo is None or hi is None:
            raise ValueError("infinite geodesics need a period")
        return lo, hi

    def _has(self, j: int) -> bool:
        return self.period is not None or self.j0 <= j < self.j0 + len(self.verts)

    def vertex(self, j: int) -> Vertex:
        if self.period is None:
            return self.verts[j - self.j0]
        cache = self.__dict__.setdefault("_vcache", {})
        v = cache.get(j)
        if v is None:
            gamma, L = self.period
            q, r = divmod(j - self.j0, L)
            v = self.verts[r]
            if q:
                step = gamma if q > 0 else mat_inv(gamma)
                prev = cache.get(j - L if q > 0 else j + L)
                v = act_v(step, prev) if prev is not None else _periodic_vertex(self.verts[r], gamma, q)
            cache[j] = v
        return v

    def at(self, t) -> TreePoint:
        if t < self.a:
            t = self.a
        if t > self.b:
            t = self.b
        s = Q(t) + self.offset
        j = math.floor(s)
        f = s - j
        if f == 0:
            return TreePoint(self.vertex(j))
        u, w = self.vertex(j), self.vertex(j + 1)
        if w < u:
            return TreePoint(w, u, 1 - f)
        return TreePoint(u, w, f)

    def act(self, g) -> "GeneralizedGeodesic":
        a = as_matrix(g, self.p)
        verts = tuple(act_v(a, v) for v in self.verts)
        per = None
        if self.period is not None:
            gamma, L = self.period
            per = (mat_mul(mat_mul(a, gamma), mat_inv(a)), L)
        return GeneralizedGeodesic(self.p, verts, self.j0, self.a, self.b, self.offset, per)

    def flow(self, tau) -> "GeneralizedGeodesic":
        tau = Q(tau)
        o = self.offset + tau
        shift = math.floor(o)
        o -= shift
        return GeneralizedGeodesic(self.p, self.verts, self.j0 - shift, _shift(self.a, -tau), _shift(self.b, -tau), o, self.period)

    def is_bi_infinite(self) -> bool:
        return self.a == -math.inf and self.b == math.inf

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "interval": [str(self.a), str(self.b)],
            "offset": str(self.offset),
            "j0": self.j0,
            "vertices": [v.canon() for v in self.verts],
            "period": None if self.period is None else {"gamma": [[str(x) for x in r] for r in self.period[0]], "L": self.period[1]},
        }


def _shift(x, d):
    return x if x in (math.inf, -math.inf) else Q(x) + d


@lru_cache(maxsize=1 << 16)
def _periodic_vertex_cached(v: Vertex, gamma, q: int) -> Vertex:
    if q == 0:
        return v
    step = gamma if q > 0 else mat_inv(gamma)
    prev = _periodic_vertex_cached(v, gamma, q - 1 if q > 0 else q + 1)
    return act_v(step, prev)


def _periodic_vertex(v: Vertex, gamma, q: int) -> Vertex:
    return _periodic_vertex_cached(v, gamma, q)


def eval_geodesic(c: GeneralizedGeodesic, t) -> TreePoint:
    return c.at(t)


def flow(c: GeneralizedGeodesic, tau) -> GeneralizedGeodesic:
    return c.flow(tau)


def constant_geodesic(x) -> GeneralizedGeodesic:
    x = x if isinstance(x, TreePoint) else TreePoint(x)
    if x.is_vertex():
        return GeneralizedGeodesic(x.p, (x.vertex,), 0, Q(0), Q(0))
    return GeneralizedGeodesic(x.p, (x.vertex, x.other), 0, Q(0), Q(0), x.t)


def segment_geodesic(path: Sequence[Vertex], a=0) -> GeneralizedGeodesic:
    """Isometric on [a, a + len(path) - 1] with c(a) = path[0]."""
    a = Q(a)
    j0 = math.ceil(a)
    return GeneralizedGeodesic(path[0].p, tuple(path), j0, a, a + len(path) - 1, j0 - a)


def standard_line(p: int) -> GeneralizedGeodesic:
    """The apartment j -> [[p^j, 0], [0, 1]], periodic under diag(p, 1/p)."""
    verts = (Vertex(p, 0, Q(0)), Vertex(p, 1, Q(0)))
    return GeneralizedGeodesic(p, verts, 0, -math.inf, math.inf, Q(0), (diag(p, Q(1, p)), 2))


# ---------------------------------------------------------------------------
# d_FS


TAIL_TOL = 1e-12
_MP = mpmath.MPContext()
_MP.dps = 40


def _pd(x: TreePoint, y: TreePoint) -> Fraction:
    if x.other is not None and y.other is not None and (x.vertex, x.other) == (y.vertex, y.other):
        return abs(x.t - y.t)
    ex = [(x.vertex, Q(0))] if x.other is None else [(x.vertex, x.t), (x.other, 1 - x.t)]
    ey = [(y.vertex, Q(0))] if y.other is None else [(y.vertex, y.t), (y.other, 1 - y.t)]
    return min(a + b + vdist(u, w) for u, a in ex for w, b in ey)


def _weighted(A: Fraction, B: Fraction, l: Fraction, r: Fraction):
    """∫_l^r (A + B t) e^-|t| / 2 dt for a cell on one side of 0."""
    mp = _MP
    A, B, l, r = mp.mpf(A.numerator) / A.denominator, mp.mpf(B.numerator) / B.denominator, mp.mpf(l.numerator) / l.denominator, mp.mpf(r.numerator) / r.denominator
    if l >= 0:
        F = lambda t: -(A + B + B * t) * mp.exp(-t) / 2  # noqa: E731
    else:
        F = lambda t: (A + B * t - B) * mp.exp(t) / 2  # noqa: E731
    return F(r) - F(l)


_EPS = 2.0 ** -52


def _weighted_f(fa: float, fb: float, l: float, r: float):
    """Float version of _weighted on the chord from (l, fa) to (r, fb), with
    a bound on its rounding error."""
    B = (fb - fa) / (r - l)
    A = fa - B * l
    if l >= 0:
        el, er = math.exp(-l), math.exp(-r)
        v = ((A + B + B * l) * el - (A + B + B * r) * er) / 2
        w = el
    else:
        el, er = math.exp(l), math.exp(r)
        v = ((A + B * r - B) * er - (A + B * l - B) * el) / 2
        w = er
    scale = (abs(A) + abs(B) * (abs(l) + abs(r) + 1)) * w
    return v, 32 * _EPS * scale


def _tail_T(D0: float) -> int:
    T = 1
    while (D0 + 2 * T + 2) * math.exp(-T) / 2 >= TAIL_TOL / 2:
        T += 1
    return T


def _breaks(c: GeneralizedGeodesic, L: Fraction, R: Fraction) -> set:
    out = set()
    for e in (c.a, c.b):
        if e not in (math.inf, -math.inf) and L < e < R:
            out.add(Q(e))
    k = math.ceil(L + c.offset)
    while k - c.offset < R:
        t = k - c.offset
        if L < t < R:
            out.add(Q(t))
        k += 1
    return out


def _span(x: TreePoint, y: TreePoint):
    """The closed edge containing the segment [x, y] inside one cell, or
    None when the segment is a single vertex."""
    vs = {x.vertex, y.vertex}
    if x.other is not None:
        vs.add(x.other)
    if y.other is not None:
        vs.add(y.other)
    return frozenset(vs) if len(vs) == 2 else None


@dataclass(frozen=True)
class Certified:
    value: float
    error: float

    def __float__(self):
        return self.value


def d_FS_certified(c: GeneralizedGeodesic, c2: GeneralizedGeodesic) -> Certified:
    if c.p != c2.p:
        raise ValueError("geodesics live on different trees")
    D0 = float(_pd(c.at(0), c2.at(0)))
    T = _tail_T(D0)
    finite = [Q(x) for x in (c.a, c.b, c2.a, c2.b) if abs(x) != math.inf]
    exact_r = c.b != math.inf and c2.b != math.inf
    exact_l = c.a != -math.inf and c2.a != -math.inf
    R = max([Q(1)] + finite) if exact_r else max([Q(T)] + finite)
    Lb = min([Q(-1)] + finite) if exact_l else min([Q(-T)] + finite)
    pts = sorted({Lb, R, Q(0)} | _breaks(c, Lb, R) | _breaks(c2, Lb, R))
    P1 = [c.at(t) for t in pts]
    P2 = [c2.at(t) for t in pts]
    f = [_pd(x, y) for x, y in zip(P1, P2)]
    mp = _MP
    total = mp.mpf(0)
    err = 0.0
    for i in range(len(pts) - 1):
        l, r, fl, fr = pts[i], pts[i + 1], f[i], f[i + 1]
        pieces = [(l, fl, r, fr)]
        e1 = _span(P1[i], P1[i + 1])
        if e1 is not None and e1 == _span(P2[i], P2[i + 1]):
            # both on one edge: d = |pos_x - pos_y| may have a kink
            u = TreePoint(min(e1))
            dl = _pd(P1[i], u) - _pd(P2[i], u)
            dr = _pd(P1[i + 1], u) - _pd(P2[i + 1], u)
            if dl * dr < 0:
                ts = l + (r - l) * dl / (dl - dr)
                pieces = [(l, fl, ts, Q(0)), (ts, Q(0), r, fr)]
        for a_, fa, b_, fb in pieces:
            v, e = _weighted_f(float(fa), float(fb), float(a_), float(b_))
            total += v
            err += e
    # tails
    if exact_r:
        D = _pd(c.at(R), c2.at(R))
        total += mp.mpf(D.numerator) / D.denominator * mp.exp(-mp.mpf(R.numerator) / R.denominator) / 2
    else:
        err += (D0 + 2 * float(R) + 2) * math.exp(-float(R)) / 2
    if exact_l:
        D = _pd(c.at(Lb), c2.at(Lb))
        total += mp.mpf(D.numerator) / D.denominator * mp.exp(mp.mpf(Lb.numerator) / Lb.denominator) / 2
    else:
        err += (D0 + 2 * float(-Lb) + 2) * math.exp(float(Lb)) / 2
    return Certified(float(total), err + 1e-30)


def d_FS(c: GeneralizedGeodesic, c2: GeneralizedGeodesic) -> float:
    return d_FS_certified(c, c2).value


def fold_FS(c: GeneralizedGeodesic, c2: GeneralizedGeodesic, alpha, delta) -> bool | None:
    """Is there t in [-alpha, alpha] with d_FS(Phi_t c, c') < delta?

    t -> d_FS(Phi_t c, c') is 1-Lipschitz, so sampling on a grid of pitch
    delta/4 (plus the alignment times where the two vertex lattices match)
    decides the question outside a band of width delta/8.
    """
    alpha = Q(alpha)
    delta = float(delta)
    if alpha < 0 or delta <= 0:
        raise ValueError("need alpha >= 0 and delta > 0")
    pitch = Q(delta) / 4
    ts = {-alpha, alpha, Q(0)}
    k = math.ceil(-alpha / pitch)
    while k * pitch <= alpha:
        ts.add(k * pitch)
        k += 1
    shift = (c2.offset - c.offset) % 1
    j = math.ceil(-alpha - shift)
    while j + shift <= alpha:
        ts.add(Q(j) + shift)
        j += 1
    best_hi = math.inf
    best_lo = math.inf
    for t in sorted(ts):
        d = d_FS_certified(c.flow(t), c2)
        if d.value + d.error < delta:
            return True
        best_hi = min(best_hi, d.value + d.error)
        best_lo = min(best_lo, d.value - d.error)
    if best_lo - float(pitch) / 2 >= delta:
        return False
    return None


# ---------------------------------------------------------------------------
# periodic geodesics


@dataclass
class PeriodicData:
    g: tuple
    axis: GeneralizedGeodesic
    translation_length: int
    t_g: int
    tau_c: int
    t_samples: dict = field(default_factory=dict)

    def t(self, v) -> int | None:
        return axis_translation(self.axis, as_matrix(v, self.axis.p))

    def in_K(self, v, window: int = 3) -> bool:
        return fixes_axis(self.axis, as_matrix(v, self.axis.p), window)

    def in_V(self, v, window: int = 3) -> bool:
        return self.t(v) is not None


def translation_length(a, p: int) -> int:
    (a11, a12), (a21, a22) = a
    d = a11 * a22 - a12 * a21
    tr = a11 + a22
    if tr == 0:
        return 0
    return max(0, int(vp_fraction(d, p) - 2 * vp_fraction(tr, p)))


def axis_of(a, p: int) -> GeneralizedGeodesic:
    ell = translation_length(a, p)
    if ell == 0:
        raise ValueError("elliptic element has no axis")
    x0 = base_vertex(p)
    gx0 = act_v(a, x0)
    d0 = vdist(x0, gx0)
    k = (d0 - ell) // 2
    a0 = vertex_path(x0, gx0)[k]
    ga0 = act_v(a, a0)
    path = vertex_path(a0, ga0)
    if len(path) - 1 != ell:
        raise ArithmeticError("axis construction failed")
    return GeneralizedGeodesic(p, tuple(path[:-1]), 0, -math.inf, math.inf, Q(0), (a, ell))


def axis_translation(axis: GeneralizedGeodesic, v, window: int = 3) -> int | None:
    """t with v c = Phi_t c (checked on a window of vertices), else None."""
    L = axis.period[1]
    w0 = act_v(v, axis.vertex(0))
    t = None
    for j in range(-(window + 1) * L, (window + 1) * L + 1):
        if axis.vertex(j) == w0:
            t = j
            break
    if t is None:
        return None
    for j in range(-window * L, window * L + 1):
        if act_v(v, axis.vertex(j)) != axis.vertex(j + t):
            return None
    return t


def fixes_axis(axis: GeneralizedGeodesic, v, window: int = 3) -> bool:
    return axis_translation(axis, v, window) == 0


def periodic_invariants(g, p: int | None = None, generators: Iterable | None = None) -> PeriodicData:
    if p is None:
        p = g.p
    a = as_matrix(g, p)
    ax = axis_of(a, p)
    ell = ax.period[1]
    tg = axis_translation(ax, a)
    gens = [a] if generators is None else [as_matrix(x, p) for x in generators]
    shifts = [abs(axis_translation(ax, x)) for x in gens if axis_translation(ax, x)]
    tau = min(shifts) if shifts else math.inf
    samples = {}
    for k in (-2, -1, 1, 2):
        ak = identity2()
        step = a if k > 0 else mat_inv(a)
        for _ in range(abs(k)):
            ak = mat_mul(ak, step)
        samples[k] = axis_translation(ax, ak)
    return PeriodicData(a, ax, ell, tg, tau, samples)


def random_geodesic(rng: random.Random, p: int, kind: str | None = None) -> GeneralizedGeodesic:
    """A random constant, finite segment, ray-free line, or flowed line."""
    kind = kind or rng.choice(["const", "segment", "line"])
    g = random_group_element(rng, p, 3)
    if kind == "const":
        x0 = act_v(g, base_vertex(p))
        return constant_geodesic(x0)
    if kind == "segment":
        v = act_v(g, base_vertex(p))
        path = [v]
        for _ in range(rng.randrange(1, 5)):
            nb = [w for w in neighbors(path[-1]) if len(path) < 2 or w != path[-2]]
            path.append(rng.choice(nb))
        return segment_geodesic(path, Q(rng.randrange(-8, 9), 4))
    c = standard_line(p).act(g)
    return c.flow(Q(rng.randrange(-8, 9), 4))


# ---------------------------------------------------------------------------
# join points


@dataclass(frozen=True)
class JPoint:
    """[t_0 (g_0, V_0), ..., t_N (g_N, V_N)] with zero-weight slots normalized."""

    p: int
    coords: tuple  # ((t, g, V), ...)

    @classmethod
    def make(cls, p: int, coords) -> "JPoint":
        out = []
        for t, g, V in coords:
            t = Q(t)
            if not 0 <= t <= 1:
                raise ValueError("weights lie in [0, 1]")
            if t == 0:
                out.append((Q(0), identity2(), None))
            else:
                out.append((t, as_matrix(g, p), V))
        if sum(c[0] for c in out) != 1:
            raise ValueError("weights must sum to 1")
        return cls(p, tuple(out))

    @property
    def N(self) -> int:
        return len(self.coords) - 1

    def bary(self) -> dict:
        """Barycentric coordinates of p_Sigma(z) on the vertices (n, V)."""
        return {(n, V): t for n, (t, g, V) in enumerate(self.coords) if t > 0}


def fold_J_join(z: JPoint, z2: JPoint, beta, eta, eps, strict: bool = True) -> bool:
    eps = Q(eps)
    if z.N != z2.N:
        raise ValueError("different N")
    for (t, g, V), (t2, g2, V2) in zip(z.coords, z2.coords):
        if abs(t - t2) >= eps:
            return False
    for (t, g, V), (t2, g2, V2) in zip(z.coords, z2.coords):
        if max(t, t2) >= eps:
            if V != V2:
                return False
            if not fold_V(g, g2, V, beta, eta, z.p, strict):
                return False
    return True


def d_inf(x: dict, y: dict) -> Fraction:
    keys = set(x) | set(y)
    return max((abs(x.get(k, Q(0)) - y.get(k, Q(0))) for k in keys), default=Q(0))


def simplices(vertices: Iterable) -> list[tuple]:
    """Simplices of Sigma^N spanned by the given vertices (n, V): subsets with
    pairwise distinct n."""
    vs = sorted(set(vertices), key=lambda v: (v[0], str(v[1])))
    out = []
    for k in range(1, len(vs) + 1):
        for s in combinations(vs, k):
            if len({v[0] for v in s}) == k:
                out.append(s)
    return out


def in_K_sigma(x: dict, sigma, eps) -> bool:
    return all(x.get(v, Q(0)) >= eps for v in sigma)


def lam(z: JPoint, sigma) -> tuple:
    """lambda_sigma(z): the group coordinates of the vertices of sigma."""
    out = []
    for n, V in sigma:
        t, g, W = z.coords[n]
        if not (t > 0 and W == V):
            raise ValueError("z is not in the open star of sigma")
        out.append(g)
    return tuple(out)


def fold_J_general(z: JPoint, z2: JPoint, beta, eta, eps, strict: bool = True) -> bool:
    eps = Q(eps)
    x, y = z.bary(), z2.bary()
    if not d_inf(x, y) < eps:
        return False
    for sigma in simplices(list(x) + list(y)):
        if in_K_sigma(x, sigma, eps) or in_K_sigma(y, sigma, eps):
            P = tuple(V for n, V in sigma)
            if not fold_P(lam(z, sigma), lam(z2, sigma), P, beta, eta, z.p, strict):
                return False
    return True


# ---------------------------------------------------------------------------
# random samples


def random_group_element(rng: random.Random, p: int, length: int = 3):
    return hk.im_rows(hk.random_element(rng, p, length))


def random_in_V(rng: random.Random, spec: str, p: int, beta=1):
    """A random element of V with rho <= beta (beta >= 0)."""
    if spec == "Vc":
        k = rng.randrange(0, int(Q(beta) // 2) + 1)
        k = k if rng.random() < 0.5 else -k
        u = rng.choice([u for u in range(1, p * p * p) if u % p])
        return diag(Q(p) ** k * u, Q(1, u) * Q(p) ** (-k))
    U = hk.subgroup(spec, p)
    M = max(1, _level(spec)) + 1
    keys = sorted(hk.subgroup_cosets(U, M))
    for _ in range(50):
        v = hk.im_rows(hk.coset_rep(rng.choice(keys), p, M))
        if rho(v, p) <= Q(beta):
            return v
    return identity2()


def random_near(rng: random.Random, p: int, m: int):
    """A random element of K_m."""
    q = p**m
    x = rng.randrange(p * p) * q
    y = rng.randrange(p * p) * q
    z = rng.randrange(p * p) * q
    a = 1 + z
    return ((Q(a), Q(x)), (Q(y), Q(1 + x * y, a)))


def random_jpoint(rng: random.Random, p: int, N: int, specs: Sequence[str], denom: int = 8) -> JPoint:
    cuts = sorted(rng.randrange(denom + 1) for _ in range(N))
    ws = [b - a for a, b in zip([0] + cuts, cuts + [denom])]
    coords = []
    for w in ws:
        coords.append((Q(w, denom), random_group_element(rng, p, 2), rng.choice(list(specs))))
    return JPoint.make(p, coords)


def perturb_jpoint(rng: random.Random, z: JPoint, specs: Sequence[str], denom: int = 8, m: int = 2) -> JPoint:
    """A nearby point: weights moved by ±1/denom, group parts moved inside V
    and by K_m, sometimes a subgroup swapped."""
    ts = [c[0] for c in z.coords]
    if len(ts) > 1 and rng.random() < 0.7:
        i, j = rng.sample(range(len(ts)), 2)
        step = Q(1, denom)
        if ts[i] >= step:
            ts[i] -= step
            ts[j] += step
    coords = []
    for (t, g, V), t2 in zip(z.coords, ts):
        V2 = V if V is not None else rng.choice(list(specs))
        if rng.random() < 0.1:
            V2 = rng.choice(list(specs))
        g2 = g
        if rng.random() < 0.8 and V2 is not None:
            g2 = mat_mul(mat_mul(g, random_in_V(rng, V2, z.p, 1)), random_near(rng, z.p, rng.choice([1, m, m + 1])))
        else:
            g2 = random_group_element(rng, z.p, 2)
        coords.append((t2, g2, V2))
    return JPoint.make(z.p, coords)


# ---------------------------------------------------------------------------
# harnesses


def _triangle_triples(rng: random.Random, p: int, alpha, delta, n: int, specs: Sequence[str]):
    """Triples (P, g, g', g'') built to meet the hypothesis at (alpha, delta) often."""
    m = _ball_level(delta, False)
    m = m[1] if m[0] == "K" else 1
    out = []
    for _ in range(n):
        P = tuple(rng.choice(list(specs)) for _ in range(rng.randrange(1, 3)))
        gs, g1s, g2s = [], [], []
        for V in P:
            g = random_group_element(rng, p, 2)
            mm = m if rng.random() < 0.9 else max(1, m - 1)
            g1 = mat_mul(mat_mul(g, random_in_V(rng, V, p, alpha)), random_near(rng, p, mm))
            g2 = mat_mul(mat_mul(g1, random_in_V(rng, V, p, alpha)), random_near(rng, p, mm))
            gs.append(g)
            g1s.append(g1)
            g2s.append(g2)
        out.append((P, gs, g1s, g2s))
    return out


def triangle_counterexamples(p: int, alpha, eps, delta, samples: int, seed: int, specs=VSPECS) -> tuple[int, list]:
    """(#triples meeting the hypothesis, counterexamples) at (alpha, delta)."""
    rng = random.Random(seed)
    hits = 0
    bad = []
    for P, g, g1, g2 in _triangle_triples(rng, p, alpha, delta, samples, specs):
        if fold_P(g, g1, P, alpha, delta, p) and fold_P(g1, g2, P, alpha, delta, p):
            hits += 1
            if not fold_P(g, g2, P, 2 * Q(alpha), eps, p):
                bad.append({"P": list(P), "g": _js(g), "g1": _js(g1), "g2": _js(g2)})
    return hits, bad


def _js(gs):
    return [[[str(x) for x in r] for r in g] for g in gs]


def triangle_delta_search(p: int, eps, alpha=1, samples: int = 1000, seed: int = 0, steps: int = 6, specs=VSPECS) -> dict:
    """Find delta > 0 with no counterexamples: halve from 2 eps until clean,
    then bisect towards the last failing value.  The final delta is checked
    again on a fresh sample."""
    eps = Q(eps)
    alpha = Q(alpha)
    delta = 2 * eps
    trail = []
    fail = None
    for _ in range(40):
        hits, bad = triangle_counterexamples(p, alpha, eps, delta, samples, seed, specs)
        trail.append({"delta": str(delta), "hits": hits, "counterexamples": len(bad)})
        if not bad:
            break
        fail = delta
        delta /= 2
    else:
        raise RuntimeError("no delta found")
    if fail is not None:
        lo, hi = delta, fail
        for _ in range(steps):
            mid = (lo + hi) / 2
            hits, bad = triangle_counterexamples(p, alpha, eps, mid, samples, seed, specs)
            trail.append({"delta": str(mid), "hits": hits, "counterexamples": len(bad)})
            if bad:
                hi = mid
            else:
                lo = mid
        delta = lo
    hits, bad = triangle_counterexamples(p, alpha, eps, delta, samples, seed + 1, specs)
    return {"p": p, "alpha": str(alpha), "eps": str(eps), "delta": str(delta), "hits": hits, "counterexamples": bad, "trail": trail}


def two_stage_triangle(p: int, beta, eta, eps, rho_: Fraction, samples: int, seed: int, N: int = 2, specs=("U0", "I", "K1", "Vc")) -> tuple[int, list]:
    """Sampled check of fold(z,z'), fold(z',z'') < (beta, rho, eps) implying
    fold(z, z'') < (2 beta, eta, 2 eps)."""
    rng = random.Random(seed)
    hits, bad = 0, []
    for _ in range(samples):
        z = random_jpoint(rng, p, N, specs)
        z1 = perturb_jpoint(rng, z, specs)
        z2 = perturb_jpoint(rng, z1, specs)
        if fold_J_general(z, z1, beta, rho_, eps) and fold_J_general(z1, z2, beta, rho_, eps):
            hits += 1
            if not fold_J_general(z, z2, 2 * Q(beta), eta, 2 * Q(eps)):
                bad.append(_jjs(z, z1, z2))
    return hits, bad


def _jjs(*zs):
    return [[[str(t), [[str(x) for x in r] for r in g], V] for t, g, V in z.coords] for z in zs]


def flow_equivariant(c: GeneralizedGeodesic, g, tau, span: int = 6, step=Q(1, 4)) -> bool:
    """Phi_tau(g c) = g Phi_tau(c), compared pointwise on a grid."""
    a = as_matrix(g, c.p)
    lhs = c.act(a).flow(tau)
    rhs = c.flow(tau).act(a)
    t = Q(-span)
    while t <= span:
        if lhs.at(t) != rhs.at(t):
            return False
        t += step
    return True


J_TOLERANCES = ((1, Q(1, 2), Q(1, 4)), (2, Q(1, 4), Q(1, 8)), (4, 2, Q(1, 2)))


def suite(p: int, samples: int, seed: int = 0, search_samples: int | None = None) -> dict:
    """Flow-space metric checks, periodic data, fold_J agreement and the
    delta search for the foliated triangle inequality.  The first failure
    is kept as a counterexample."""
    rng = random.Random(seed)
    rep: dict = {"p": p, "samples": samples, "seed": seed, "counterexample": None}

    def fail(obj):
        if rep["counterexample"] is None:
            rep["counterexample"] = obj

    line = standard_line(p)
    iso = {}
    for tau in (Q(1, 2), Q(1), Q(2)):
        v = d_FS(line, line.flow(tau))
        iso[str(tau)] = v
        if abs(v - float(tau)) > 1e-9:
            fail({"check": "flow_isometry", "tau": str(tau), "value": v})
    rep["flow_isometry"] = iso
    worst = -math.inf
    sym = True
    equiv = True
    for _ in range(samples):
        a, b, c = (random_geodesic(rng, p) for _ in range(3))
        ab, bc, ac, ba = d_FS(a, b), d_FS(b, c), d_FS(a, c), d_FS(b, a)
        worst = max(worst, ac - ab - bc)
        if ac > ab + bc + 1e-9:
            fail({"check": "triangle", "c": [a.to_json(), b.to_json(), c.to_json()]})
        if ab != ba:
            sym = False
            fail({"check": "symmetry", "c": [a.to_json(), b.to_json()]})
        g = random_group_element(rng, p, 2)
        tau = Q(rng.randrange(-8, 9), 4)
        if not flow_equivariant(a, g, tau):
            equiv = False
            fail({"check": "flow_equivariance", "c": a.to_json(), "tau": str(tau)})
    rep["triangle_worst_excess"] = worst
    rep["symmetric"] = sym
    rep["flow_equivariant"] = equiv
    per = periodic_invariants(diag(p, Q(1, p)), p)
    through = any(per.axis.vertex(j) == base_vertex(p) for j in range(per.translation_length))
    rep["periodic"] = {"translation_length": per.translation_length, "t_g": per.t_g, "axis_through_x0": through}
    if (per.translation_length, per.t_g, through) != (2, 2, True):
        fail({"check": "periodic", "data": rep["periodic"]})
    specs = ("U0", "U1", "I", "K1", "Vc")
    dis = 0
    for _ in range(samples):
        z = random_jpoint(rng, p, 2, specs)
        z2 = perturb_jpoint(rng, z, specs) if rng.random() < 0.8 else random_jpoint(rng, p, 2, specs)
        for beta, eta, eps in J_TOLERANCES:
            if fold_J_join(z, z2, beta, eta, eps) != fold_J_general(z, z2, beta, eta, eps):
                dis += 1
                fail({"check": "fold_J", "z": _jjs(z, z2), "tol": [str(beta), str(eta), str(eps)]})
    rep["fold_J_disagreements"] = dis
    found = {}
    for eps in (Q(1), Q(1, 2), Q(1, 4)):
        r = triangle_delta_search(p, eps, 1, search_samples or samples, seed)
        found[str(eps)] = {"delta": r["delta"], "hits": r["hits"], "counterexamples": len(r["counterexamples"])}
        if r["counterexamples"]:
            fail({"check": "triangle_delta", "eps": str(eps), "example": r["counterexamples"][0]})
    rep["triangle_delta"] = found
    rep["ok"] = rep["counterexample"] is None
    return rep
