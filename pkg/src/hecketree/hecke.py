"""Hecke algebra of SL_2(Q_p) at finite congruence level.

Functions are right K_n-invariant with finite support, stored as coefficients
on left cosets gK_n.  Group elements are exact rational 2x2 matrices in

    G~ = {g in GL_2(Q_p) : det g in (-p)^Z},

which contains SL_2(Q_p) as an open subgroup of countable index and also the
element h = [[0, 1], [p, 0]], so that translation by h is available.  Haar
measure is normalized by mu(SL_2(Z_p)) = 1.

Convolution uses the exact identity

    chi_{aK} * chi_{bK} = mu(K ∩ bKb^-1) * sum_{c in K.bK} chi_{ac}

where K.bK is the orbit of the coset bK under left multiplication by K.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable

from .building import _certified, h_matrix
from .padic import PadicMatrix, vp

# Group elements are kept as integer tuples (a, b, c, d, D) meaning
# [[a, b], [c, d]] / D with D > 0 and gcd(a, b, c, d, D) = 1.
IMat = tuple


def _norm(a: int, b: int, c: int, d: int, D: int) -> IMat:
    if D < 0:
        a, b, c, d, D = -a, -b, -c, -d, -D
    g = math.gcd(a, b, c, d, D)
    if g != 1:
        a, b, c, d, D = a // g, b // g, c // g, d // g, D // g
    return (a, b, c, d, D)


def im(rows) -> IMat:
    """Integer form of an exact 2x2 matrix."""
    if isinstance(rows, tuple) and len(rows) == 5 and all(isinstance(x, int) for x in rows):
        return rows
    (a, b), (c, d) = [[Fraction(x) for x in r] for r in rows]
    D = math.lcm(a.denominator, b.denominator, c.denominator, d.denominator)
    return _norm(int(a * D), int(b * D), int(c * D), int(d * D), D)


def im_mul(x: IMat, y: IMat) -> IMat:
    a, b, c, d, D = x
    e, f, g, h, E = y
    return _norm(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h, D * E)


def im_inv(x: IMat) -> IMat:
    a, b, c, d, D = x
    det = a * d - b * c
    if det == 0:
        raise ZeroDivisionError("singular matrix")
    return _norm(d * D, -b * D, -c * D, a * D, det)


def im_det(x: IMat) -> Fraction:
    a, b, c, d, D = x
    return Fraction(a * d - b * c, D * D)


def im_rows(x: IMat):
    a, b, c, d, D = x
    return ((Fraction(a, D), Fraction(b, D)), (Fraction(c, D), Fraction(d, D)))


def im_minval(x: IMat, p: int) -> float:
    return min(vp(e, p) for e in x[:4]) - vp(x[4], p)


IDENT: IMat = (1, 0, 0, 1, 1)


def sl2_order(p: int, n: int) -> int:
    """|SL_2(Z/p^n)| = [SL_2(Z_p) : K_n]."""
    if n == 0:
        return 1
    return p ** (3 * n - 2) * (p * p - 1)


def mu_K(p: int, n: int) -> Fraction:
    return Fraction(1, sl2_order(p, n))


def as_group_element(g, p: int) -> IMat:
    """Exact element of G~ (raises ValueError if det is not a power of -p)."""
    if isinstance(g, PadicMatrix):
        g = _certified(g, p)
    x = im(g)
    d = im_det(x)
    if d == 0:
        raise ZeroDivisionError("singular matrix")
    k = vp(d.numerator, p) - vp(d.denominator, p)
    if d != Fraction(-p) ** int(k):
        raise ValueError(f"det {d} is not a power of -{p}")
    return x


# ---------------------------------------------------------------------------
# coset keys


def _pow_strip(n: int, p: int) -> tuple[int, int]:
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k, n


def coset_key(x: IMat, p: int, n: int) -> tuple:
    """Complete invariant of the left coset x K_n.

    Writes x = H k0 with H = [[p^a, X/p^s], [0, p^b]] in column Hermite form
    (X/p^s reduced modulo p^a) and k0 in GL_2(Z_p); the key is (a, b, X, s)
    together with k0 modulo p^n.  The determinant of k0 is forced by a + b
    on G~, so it does not need to be recorded.
    """
    G11, G12, G21, G22, D = x
    dl, Du = _pow_strip(D, p)
    if G21 != 0 and (G22 == 0 or vp(G21, p) < vp(G22, p)):
        t, w = _pow_strip(G21, p)
        X0 = G11
    else:
        t, w = _pow_strip(G22, p)
        X0 = G12
    b = t - dl
    vdet = vp(G11 * G22 - G12 * G21, p) - 2 * dl
    a = vdet - b
    e = a + dl
    if e <= 0:
        X = 0
    else:
        Me = p**e
        X = X0 * pow(w, -1, Me) % Me
    # normalized x = X / p^dl
    xs, xn = dl, X
    if xn == 0:
        xs = 0
    else:
        while xs > 0 and xn % p == 0:
            xn //= p
            xs -= 1
    M = p**n
    dinv = pow(Du, -1, M)
    pt = p**t

    def res(num: int, ex: int) -> int:
        E = ex + dl
        if E >= 0:
            q = p**E
            num, r = divmod(num, q)
            if r:
                raise ArithmeticError("coset decomposition is not integral")
        else:
            num *= p ** (-E)
        return num * dinv % M

    return (
        a,
        b,
        xn,
        xs,
        res(G11 * pt - X * G21, t + a),
        res(G12 * pt - X * G22, t + a),
        res(G21, b),
        res(G22, b),
    )


def coset_rep(key: tuple, p: int, n: int) -> IMat:
    """Canonical element of the coset: H times the reduced lift of k0, with the
    second column of the lift rescaled by a unit = 1 mod p^n to reach the
    determinant (-1)^(a+b)."""
    a, b, xn, xs, r11, r12, r21, r22 = key
    dl = r11 * r22 - r12 * r21
    sigma = -1 if (a + b) % 2 else 1
    L = _norm(r11 * dl, r12 * sigma, r21 * dl, r22 * sigma, dl)
    den = p ** max(0, -a, -b, xs)
    H = _norm(
        p**a * den if a >= 0 else den // p ** (-a),
        xn * den // p**xs,
        0,
        p**b * den if b >= 0 else den // p ** (-b),
        den,
    )
    return im_mul(H, L)


# ---------------------------------------------------------------------------
# compact open subgroups


def _unit_generators(p: int, m: int) -> list[int]:
    """Topological generators of 1 + p^m Z_p (m >= 1) or of Z_p^* (m = 0)."""
    if m == 0:
        if p == 2:
            return [-1, 3]
        g = next(g for g in range(2, p * p) if all(pow(g, (p * (p - 1)) // q, p * p) != 1 for q in _prime_factors(p * (p - 1))))
        return [g]
    if p == 2 and m == 1:
        return [-1, 3]
    return [1 + p**m]


def _prime_factors(n: int) -> list[int]:
    out, q = [], 2
    while q * q <= n:
        if n % q == 0:
            out.append(q)
            while n % q == 0:
                n //= q
        q += 1
    if n > 1:
        out.append(n)
    return out


def _e12(x) -> IMat:
    return im([[1, x], [0, 1]])


def _e21(x) -> IMat:
    return im([[1, 0], [x, 1]])


def _dg(t) -> IMat:
    t = Fraction(t)
    return im([[t, 0], [0, 1 / t]])


@dataclass(frozen=True)
class OpenSubgroup:
    """A compact open subgroup given by topological generators and an exact
    membership predicate."""

    name: str
    p: int
    gens: tuple
    member: Callable[[IMat], bool]
    min_level: int  # smallest n with K_n ⊆ U

    def conjugate(self, g: IMat, name: str | None = None) -> "OpenSubgroup":
        gi = im_inv(g)
        gens = tuple(im_mul(im_mul(g, s), gi) for s in self.gens)
        inner = self.member
        sub = OpenSubgroup(
            name or f"{self.name}^g",
            self.p,
            gens,
            lambda x: inner(im_mul(im_mul(gi, x), g)),
            self.min_level,
        )
        return sub

    def contains_level(self, n: int) -> bool:
        return all(self.member(s) for s in K(self.p, n).gens)

    def __hash__(self):
        return hash((self.name, self.p))

    def __eq__(self, other):
        return isinstance(other, OpenSubgroup) and (self.name, self.p) == (other.name, other.p)


def _integral_det1(a: IMat, p: int) -> bool:
    return vp(a[4], p) == 0 and im_det(a) == 1


def U0(p: int) -> OpenSubgroup:
    gens = (_e12(1), _e21(1))
    return OpenSubgroup("U0", p, gens, lambda a: _integral_det1(a, p), 0)


def U1(p: int) -> OpenSubgroup:
    return U0(p).conjugate(im(h_matrix(p)), "U1")


def Iwahori(p: int) -> OpenSubgroup:
    gens = (_e12(1), _e21(p)) + tuple(_dg(t) for t in _unit_generators(p, 0))
    h = im(h_matrix(p))
    hi = im_inv(h)

    def member(a):
        return _integral_det1(a, p) and _integral_det1(im_mul(im_mul(hi, a), h), p)

    return OpenSubgroup("I", p, gens, member, 1)


def K(p: int, m: int) -> OpenSubgroup:
    if m == 0:
        return U0(p)
    q = p**m
    gens = (_e12(q), _e21(q)) + tuple(_dg(t) for t in _unit_generators(p, m))

    def member(a):
        if not _integral_det1(a, p):
            return False
        q = p**m
        A, B, C, Dd, D = a
        return all((x * pow(D, -1, q)) % q == y for x, y in ((A, 1), (B, 0), (C, 0), (Dd, 1)))

    return OpenSubgroup(f"K{m}", p, gens, member, m)


def subgroup(spec, p: int) -> OpenSubgroup:
    if isinstance(spec, OpenSubgroup):
        return spec
    if spec == "U0":
        return U0(p)
    if spec == "U1":
        return U1(p)
    if spec == "I":
        return Iwahori(p)
    if isinstance(spec, str) and spec.startswith("K") and spec[1:].isdigit():
        return K(p, int(spec[1:]))
    raise ValueError(f"unknown compact open subgroup {spec!r}")


def orbit(keys: Iterable[tuple], gens: Iterable[IMat], p: int, n: int, cap: int = 200_000) -> set:
    """Closure of a set of cosets under left multiplication by ``gens``."""
    gens = list(gens)
    seen = set(keys)
    queue = deque(seen)
    while queue:
        k = queue.popleft()
        rep = coset_rep(k, p, n)
        for s in gens:
            k2 = coset_key(im_mul(s, rep), p, n)
            if k2 not in seen:
                seen.add(k2)
                if len(seen) > cap:
                    raise RuntimeError("coset orbit exceeds cap")
                queue.append(k2)
    return seen


@lru_cache(maxsize=None)
def _subgroup_cosets_cached(name: str, p: int, n: int, gens: tuple) -> frozenset:
    ident = coset_key(IDENT, p, n)
    return frozenset(orbit([ident], gens, p, n))


def subgroup_cosets(U: OpenSubgroup, n: int) -> frozenset:
    """U/K_n as a set of coset keys (requires K_n ⊆ U)."""
    if not U.contains_level(n):
        raise ValueError(f"{U.name} is not a union of K_{n}-cosets")
    return _subgroup_cosets_cached(U.name, U.p, n, U.gens)


def coset_index_hecke(U: OpenSubgroup, n: int) -> int:
    return len(subgroup_cosets(U, n))


# ---------------------------------------------------------------------------
# Hecke elements


class HeckeElement:
    """Finite rational combination of indicators of cosets gK_n."""

    __slots__ = ("p", "n", "terms")

    def __init__(self, p: int, n: int, terms: dict | None = None):
        self.p = p
        self.n = n
        self.terms = {k: Fraction(v) for k, v in (terms or {}).items() if v != 0}

    # construction ----------------------------------------------------------

    @classmethod
    def zero(cls, p: int, n: int) -> "HeckeElement":
        return cls(p, n, {})

    @classmethod
    def indicator(cls, cosets: Iterable[tuple], p: int, n: int, coeff=1) -> "HeckeElement":
        return cls(p, n, {k: Fraction(coeff) for k in cosets})

    @classmethod
    def coset(cls, g, p: int, n: int, coeff=1) -> "HeckeElement":
        return cls(p, n, {coset_key(as_group_element(g, p), p, n): Fraction(coeff)})

    # evaluation ---------------------------------------------------------------

    def __call__(self, g) -> Fraction:
        return self.terms.get(coset_key(as_group_element(g, self.p), self.p, self.n), Fraction(0))

    def coeff(self, key: tuple) -> Fraction:
        return self.terms.get(key, Fraction(0))

    def support(self) -> frozenset:
        return frozenset(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def reps(self):
        for k in sorted(self.terms, key=_sort_key):
            yield coset_rep(k, self.p, self.n), self.terms[k]

    # algebra -------------------------------------------------------------------

    def relevel(self, n2: int) -> "HeckeElement":
        if n2 < self.n:
            raise ValueError("re-leveling only goes up")
        if n2 == self.n:
            return self
        ks = kernel_reps(self.p, self.n, n2)
        out = {}
        for key, c in self.terms.items():
            rep = coset_rep(key, self.p, self.n)
            for k in ks:
                out[coset_key(im_mul(rep, k), self.p, n2)] = c
        return HeckeElement(self.p, n2, out)

    def _common(self, other: "HeckeElement"):
        if other.p != self.p:
            raise ValueError("different primes")
        n = max(self.n, other.n)
        return self.relevel(n), other.relevel(n)

    def __add__(self, other: "HeckeElement") -> "HeckeElement":
        a, b = self._common(other)
        out = dict(a.terms)
        for k, v in b.terms.items():
            out[k] = out.get(k, 0) + v
        return HeckeElement(a.p, a.n, out)

    def __neg__(self) -> "HeckeElement":
        return HeckeElement(self.p, self.n, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "HeckeElement") -> "HeckeElement":
        return self + (-other)

    def scale(self, c) -> "HeckeElement":
        c = Fraction(c)
        return HeckeElement(self.p, self.n, {k: c * v for k, v in self.terms.items()})

    def translate(self, g) -> "HeckeElement":
        """(lambda_g f)(x) = f(g^-1 x): moves the coset cK to gcK."""
        a = as_group_element(g, self.p)
        return HeckeElement(
            self.p, self.n, {coset_key(im_mul(a, coset_rep(k, self.p, self.n)), self.p, self.n): v for k, v in self.terms.items()}
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, HeckeElement):
            return NotImplemented
        a, b = self._common(other)
        return a.terms == b.terms

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"HeckeElement(p={self.p}, n={self.n}, terms={len(self.terms)})"

    def to_json(self) -> dict:
        terms = []
        for rep, c in self.reps():
            terms.append({"coset_rep": [[str(x) for x in row] for row in im_rows(rep)], "coeff": str(c)})
        return {"p": self.p, "n": self.n, "terms": terms}


def _sort_key(k):
    return tuple(k)


@lru_cache(maxsize=None)
def kernel_reps(p: int, n: int, n2: int) -> tuple:
    """Exact elements of K_n representing K_n/K_{n2}."""
    q = p**n
    span = p ** (n2 - n)
    out = []
    for a in range(span):
        for b in range(span):
            for c in range(span):
                x11 = 1 + q * a
                x12 = q * b
                x21 = q * c
                # x22 = (1 + x12 x21) / x11 makes det exactly 1
                out.append(_norm(x11 * x11, x12 * x11, x21 * x11, 1 + x12 * x21, x11))
    return tuple(out)


def haar_measure(cosets: Iterable[tuple], p: int, n: int) -> Fraction:
    return len(set(cosets)) * mu_K(p, n)


def _left_K_orbit(key: tuple, p: int, n: int) -> frozenset:
    return _orbit_cached(key, p, n)


@lru_cache(maxsize=200_000)
def _orbit_cached(key: tuple, p: int, n: int) -> frozenset:
    return frozenset(orbit([key], K(p, n).gens, p, n))


def convolve(f: HeckeElement, g: HeckeElement) -> HeckeElement:
    """(f * g)(x) = ∫ f(y) g(y^-1 x) dy, exact."""
    f, g = f._common(g)
    p, n = f.p, f.n
    muk = mu_K(p, n)
    # A = chi_K * g
    A: dict = {}
    for key, c in g.terms.items():
        orb = _left_K_orbit(key, p, n)
        w = c * muk / len(orb)
        for o in orb:
            A[o] = A.get(o, 0) + w
    A_reps = [(coset_rep(k, p, n), v) for k, v in A.items() if v != 0]
    out: dict = {}
    for key, c in f.terms.items():
        a = coset_rep(key, p, n)
        for rep, v in A_reps:
            k2 = coset_key(im_mul(a, rep), p, n)
            out[k2] = out.get(k2, 0) + c * v
    return HeckeElement(p, n, out)


def product_support(f: HeckeElement, g: HeckeElement) -> frozenset:
    """supp f · supp g as a union of K_n-cosets (no cancellation)."""
    f, g = f._common(g)
    p, n = f.p, f.n
    right = set()
    for key in g.terms:
        right |= _left_K_orbit(key, p, n)
    right_reps = [coset_rep(k, p, n) for k in right]
    out = set()
    for key in f.terms:
        a = coset_rep(key, p, n)
        for r in right_reps:
            out.add(coset_key(im_mul(a, r), p, n))
    return frozenset(out)


def convolve_riemann(f: HeckeElement, g: HeckeElement, points: Iterable[IMat]) -> dict:
    """Oracle: evaluate (f*g)(x) = mu(K_N) sum_{y in G/K_N} f(x y) g(y^-1) at the
    given points, summing over a level N where g is left K_N-invariant."""
    f, g = f._common(g)
    p, n = f.p, f.n
    spread = 0
    for rep, _ in g.reps():
        spread = max(spread, int(-im_minval(rep, p) - im_minval(im_inv(rep), p)))
    N = n + spread
    # y^-1 ranges over supp g, so y ranges over the K_n-orbits of c^-1 K_N
    seeds = [coset_key(im_inv(rep), p, N) for rep, _ in g.reps()]
    ys = orbit(seeds, K(p, n).gens, p, N)
    out = {}
    muN = mu_K(p, N)
    fN = f.relevel(N)
    gN = g.relevel(N)
    for x in points:
        x = as_group_element(x, p)
        total = Fraction(0)
        for yk in ys:
            y = coset_rep(yk, p, N)
            total += fN(im_mul(x, y)) * gN(im_inv(y))
        out[coset_key(x, p, n)] = total * muN
    return out


# ---------------------------------------------------------------------------
# idempotents and the category of compact open subgroups


def e_U(U, n: int | None = None, p: int | None = None) -> HeckeElement:
    """chi_U / mu(U) at level n (default: the smallest level with K_n ⊆ U,
    but at least 1)."""
    if not isinstance(U, OpenSubgroup):
        U = subgroup(U, p)
    if n is None:
        n = max(1, U.min_level)
    cos = subgroup_cosets(U, n)
    mu = haar_measure(cos, U.p, n)
    return HeckeElement.indicator(cos, U.p, n, 1 / mu)


def support(f: HeckeElement) -> frozenset:
    return f.support()


@dataclass
class BMorphism:
    """A morphism U -> U' of the category of compact open subgroups: an element
    of H(G) that is left U'- and right U-invariant."""

    source: OpenSubgroup
    target: OpenSubgroup
    f: HeckeElement

    def __post_init__(self):
        if not self.source.contains_level(self.f.n) or not self.target.contains_level(self.f.n):
            self.f = self.f.relevel(max(self.f.n, self.source.min_level, self.target.min_level))

    def check_invariance(self) -> dict:
        f = self.f
        p, n = f.p, f.n
        left = True
        for key, c in f.terms.items():
            rep = coset_rep(key, p, n)
            for s in self.target.gens:
                if f.coeff(coset_key(im_mul(s, rep), p, n)) != c:
                    left = False
                    break
            if not left:
                break
        right = True
        ureps = [coset_rep(k, p, n) for k in subgroup_cosets(self.source, n)]
        for key, c in f.terms.items():
            rep = coset_rep(key, p, n)
            for u in ureps:
                if f.coeff(coset_key(im_mul(rep, u), p, n)) != c:
                    right = False
                    break
            if not right:
                break
        return {"left": left, "right": right, "ok": left and right}

    def cosets_mod_source(self) -> list[frozenset]:
        """supp φ / U as an explicit partition of the K_n-cosets."""
        p, n = self.f.p, self.f.n
        ureps = [coset_rep(k, p, n) for k in subgroup_cosets(self.source, n)]
        remaining = set(self.f.terms)
        blocks = []
        while remaining:
            k = min(remaining, key=_sort_key)
            rep = coset_rep(k, p, n)
            blk = frozenset(coset_key(im_mul(rep, u), p, n) for u in ureps)
            if not blk <= remaining:
                raise ArithmeticError("support is not right-invariant")
            remaining -= blk
            blocks.append(blk)
        return blocks

    def count_target_cosets(self) -> Fraction:
        """|U' \\ supp φ| = mu(supp φ)/mu(U') (G~ is unimodular)."""
        p, n = self.f.p, self.f.n
        return haar_measure(self.f.terms, p, n) / haar_measure(subgroup_cosets(self.target, n), p, n)


def compose_bmorphism(psi: BMorphism, phi: BMorphism, route: str = "blocks") -> BMorphism:
    """psi ∘ phi = psi * phi.

    The default route uses right U'-invariance of psi and left U'-invariance
    of phi (U' the middle object): psi * phi = mu(U') sum_y psi(y) lambda_y phi
    over one y per block of supp psi / U'.  ``route="orbits"`` runs the generic
    convolution instead.
    """
    if psi.source != phi.target:
        raise ValueError(f"cannot compose {psi.source.name} <- ... with ... -> {phi.target.name}")
    if route == "orbits":
        return BMorphism(phi.source, psi.target, convolve(psi.f, phi.f))
    a, b = psi.f._common(phi.f)
    psi2 = BMorphism(psi.source, psi.target, a)
    p, n = a.p, a.n
    mid = haar_measure(subgroup_cosets(psi.source, n), p, n)
    b_reps = [(coset_rep(k, p, n), v) for k, v in b.terms.items()]
    out: dict = {}
    for blk in psi2.cosets_mod_source():
        k0 = min(blk, key=_sort_key)
        y = coset_rep(k0, p, n)
        c = a.terms[k0] * mid
        for rep, v in b_reps:
            k2 = coset_key(im_mul(y, rep), p, n)
            out[k2] = out.get(k2, 0) + c * v
    return BMorphism(phi.source, psi.target, HeckeElement(p, n, out))


def identity_morphism(U: OpenSubgroup, n: int | None = None) -> BMorphism:
    return BMorphism(U, U, e_U(U, n))


def translation_iso(g, U, n: int | None = None, p: int | None = None) -> tuple[BMorphism, BMorphism]:
    """chi_{gU}/mu(gU) : U -> gUg^-1 and its inverse chi_{Ug^-1}/mu(Ug^-1)."""
    if not isinstance(U, OpenSubgroup):
        U = subgroup(U, p if p is not None else g.p)
    p = U.p
    a = as_group_element(g, p)
    V = U.conjugate(a, f"{U.name}^({_mat_name(a)})")
    if n is None:
        n = max(1, U.min_level)
        while not V.contains_level(n):
            n += 1
    if not (U.contains_level(n) and V.contains_level(n)):
        raise ValueError("conjugate subgroup not expressible at this level")
    cu = subgroup_cosets(U, n)
    mu = haar_measure(cu, p, n)
    fwd = HeckeElement.indicator(cu, p, n, 1 / mu).translate(a)
    cv = orbit([coset_key(IDENT, p, n)], V.gens, p, n)
    V = identify(V, cv, n)
    back = HeckeElement.indicator(cv, p, n, 1 / mu).translate(im_inv(a))
    return BMorphism(U, V, fwd), BMorphism(V, U, back)


def identify(V: OpenSubgroup, cosets: frozenset, n: int) -> OpenSubgroup:
    """Replace V by a standard subgroup with the same cosets, when there is one."""
    names = ["U0", "U1", "I"] + [f"K{m}" for m in range(1, n + 1)]
    for name in names:
        W = subgroup(name, V.p)
        if W.contains_level(n) and subgroup_cosets(W, n) == frozenset(cosets):
            return W
    return V


def _mat_name(a: IMat) -> str:
    return ",".join(str(x) for row in im_rows(a) for x in row)


def double_coset_cosets(Utarget: OpenSubgroup, g: IMat, Usource: OpenSubgroup, n: int) -> frozenset:
    """U' g U as a set of K_n-cosets."""
    p = Usource.p
    seeds = [coset_key(im_mul(g, coset_rep(k, p, n)), p, n) for k in subgroup_cosets(Usource, n)]
    return frozenset(orbit(seeds, Utarget.gens, p, n))


def split_bmorphism(phi: BMorphism) -> list[BMorphism]:
    """Split φ along its double cosets U' g U (a U'-U-biinvariant partition)."""
    p, n = phi.f.p, phi.f.n
    remaining = set(phi.f.terms)
    parts = []
    while remaining:
        k = min(remaining, key=_sort_key)
        blk = double_coset_cosets(phi.target, coset_rep(k, p, n), phi.source, n)
        parts.append(BMorphism(phi.source, phi.target, HeckeElement(p, n, {c: phi.f.coeff(c) for c in blk})))
        remaining -= blk
    return parts


def is_subgroup_support(cosets: frozenset, p: int, n: int) -> bool:
    """Closure of a coset union under products and inverses."""
    f = HeckeElement.indicator(cosets, p, n)
    if not product_support(f, f) <= cosets:
        return False
    for k in cosets:
        if coset_key(im_inv(coset_rep(k, p, n)), p, n) not in cosets:
            return False
    return True


def random_element(rng, p: int, length: int = 3, spread: int = 1) -> IMat:
    """Random word in elementary matrices, diagonal elements and h."""
    g = IDENT
    h = im(h_matrix(p))
    for _ in range(length):
        kind = rng.randrange(4)
        if kind == 0:
            s = _e12(Fraction(rng.randrange(p * p), p ** rng.randrange(spread + 1)))
        elif kind == 1:
            s = _e21(Fraction(rng.randrange(p * p)) * p ** rng.randrange(spread + 1))
        elif kind == 2:
            s = _dg(Fraction(p) ** rng.randrange(-spread, spread + 1))
        else:
            s = h
        g = im_mul(g, s)
    return g


def random_bmorphism(rng, source, target, p: int, n: int = 1, pieces: int = 2, length: int = 2) -> BMorphism:
    """Random rational combination of double coset indicators target·g·source."""
    U = subgroup(source, p)
    V = subgroup(target, p)
    n = max(n, U.min_level, V.min_level)
    f = HeckeElement.zero(p, n)
    for _ in range(pieces):
        g = random_element(rng, p, length)
        c = Fraction(rng.randrange(-4, 5), rng.randrange(1, 4))
        f = f + HeckeElement.indicator(double_coset_cosets(V, g, U, n), p, n, c)
    return BMorphism(U, V, f)


def random_hecke_element(rng, p: int, n: int, pieces: int = 2, length: int = 2) -> HeckeElement:
    """A few K_n-cosets of random words with small rational coefficients."""
    f = HeckeElement.zero(p, n)
    for _ in range(pieces):
        c = Fraction(rng.randrange(-3, 4), rng.randrange(1, 3))
        f = f + HeckeElement.coset(random_element(rng, p, length), p, n, c)
    return f


def support_axioms(phi: BMorphism, phi2: BMorphism, psi: BMorphism) -> dict:
    """The support axioms on phi, phi2: U -> U' and psi: U' -> U''."""
    p, n = phi.f.p, phi.f.n
    out = {}
    out["empty_iff_zero"] = all((not x.f.support()) == x.f.is_zero() for x in (phi, phi2, psi)) and not (phi.f - phi.f).support()
    comp = compose_bmorphism(psi, phi)
    out["submultiplicative"] = comp.f.support() <= product_support(psi.f, phi.f)
    s = BMorphism(phi.source, phi.target, phi.f + phi2.f)
    out["subadditive"] = s.f.support() <= phi.f._common(phi2.f)[0].support() | phi.f._common(phi2.f)[1].support()
    U = phi.source
    idU = identity_morphism(U, max(n, U.min_level))
    out["subgroup_support"] = idU.f.support() == subgroup_cosets(U, idU.f.n) and is_subgroup_support(idU.f.support(), p, idU.f.n)
    blocks = phi.cosets_mod_source()
    mu_U = haar_measure(subgroup_cosets(U, n), p, n)
    left = phi.count_target_cosets()
    out["finite_quotients"] = (
        len(blocks) * mu_U == haar_measure(phi.f.terms, p, n)
        and left.denominator == 1
        and phi.check_invariance()["ok"]
    )
    out["ok"] = all(out.values())
    return out


def check_suite(p: int, level: int, samples: int, seed: int = 0) -> dict:
    """Idempotents, associativity and support axioms; the first failure is
    returned as a counterexample."""
    import random

    rng = random.Random(seed)
    report = {"p": p, "level": level, "samples": samples, "idempotents": {}, "counterexample": None}
    names = ["U0", "U1", "I"] + [f"K{m}" for m in range(1, level + 1)]
    for name in names:
        e = e_U(name, max(level, subgroup(name, p).min_level), p)
        ok = convolve(e, e) == e
        report["idempotents"][name] = ok
        if not ok and report["counterexample"] is None:
            report["counterexample"] = {"check": "idempotent", "U": name}
    assoc = 0
    for _ in range(samples):
        a, b, c = (random_hecke_element(rng, p, level) for _ in range(3))
        if convolve(convolve(a, b), c) == convolve(a, convolve(b, c)):
            assoc += 1
        elif report["counterexample"] is None:
            report["counterexample"] = {"check": "associativity", "f": a.to_json(), "g": b.to_json(), "h": c.to_json()}
    report["associative"] = assoc
    axioms = 0
    specs = ["U0", "U1", "I"]
    for _ in range(samples):
        s, t, u = (rng.choice(specs) for _ in range(3))
        phi = random_bmorphism(rng, s, t, p, level, length=1)
        phi2 = random_bmorphism(rng, s, t, p, level, length=1)
        psi = random_bmorphism(rng, t, u, p, level, length=1)
        r = support_axioms(phi, phi2, psi)
        if r["ok"]:
            axioms += 1
        elif report["counterexample"] is None:
            report["counterexample"] = {"check": "support_axioms", "failed": [k for k, v in r.items() if not v], "phi": phi.f.to_json()}
    report["support_axioms"] = axioms
    report["ok"] = report["counterexample"] is None
    return report
