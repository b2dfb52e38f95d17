"""Arithmetic in Q_p and small matrix groups over it.

Rationals are carried exactly.  Truncated values are stored in capped-relative
form ``u * p**v`` with ``u`` a unit known modulo ``p**prec``.  A truncated result
whose significant digits cancel completely does not silently become ``0``: it
becomes an *inexact zero* ``O(p**k)`` that remembers the lower bound ``k`` on its
valuation.  Anything that needs more information than an inexact zero carries
(its valuation, its inverse, a congruence beyond ``k``) raises
:class:`PrecisionError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Iterable, Sequence, Union

INF = math.inf
DEFAULT_PRECISION = 12

Number = Union[int, Fraction]


class PrecisionError(ArithmeticError):
    """Raised when a quantity cannot be certified at the working precision."""

    def __init__(self, message: str, valuation_lower_bound: float | None = None):
        super().__init__(message)
        self.valuation_lower_bound = valuation_lower_bound


class SingularMatrixError(ZeroDivisionError):
    pass


def vp(n: int, p: int) -> float:
    """Valuation of an integer; ``INF`` for zero."""
    if n == 0:
        return INF
    n = abs(n)
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def vp_fraction(x: Fraction, p: int) -> float:
    if x == 0:
        return INF
    return vp(x.numerator, p) - vp(x.denominator, p)


def residue(x: Number, p: int, m: int) -> int:
    """Residue of a p-integral rational modulo ``p**m``."""
    x = Fraction(x)
    if vp(x.denominator, p) > 0:
        raise ValueError(f"{x} is not {p}-integral")
    mod = p**m
    return x.numerator * pow(x.denominator, -1, mod) % mod


class PadicScalar:
    """An element of Q_p.

    Scalars built from rationals are *exact* and stay exact under ring
    operations (``exact`` holds the rational value).  Truncated scalars carry
    ``prec`` significant digits, capped at ``N``; mixing the two demotes the
    exact operand to ``N`` digits.  ``v`` is the valuation (for zeros: the
    certified lower bound, ``INF`` for an exact zero) and ``u`` the unit part
    modulo ``p**prec``.
    """

    __slots__ = ("p", "N", "v", "u", "prec", "exact")

    def __init__(self, p: int, N: int, v: float, u: int, prec: float, exact: Fraction | None = None):
        self.p = p
        self.N = N
        self.v = v
        self.u = u
        self.prec = prec
        self.exact = exact

    # construction -----------------------------------------------------------

    @classmethod
    def from_rational(cls, x: Number, p: int, N: int = DEFAULT_PRECISION) -> "PadicScalar":
        x = Fraction(x)
        if x == 0:
            return cls(p, N, INF, 0, INF, x)
        v = vp(x.numerator, p) - vp(x.denominator, p)
        unit = x / Fraction(p) ** int(v)
        return cls(p, N, v, residue(unit, p, N), INF, x)

    @classmethod
    def truncated(cls, x: Number, p: int, N: int = DEFAULT_PRECISION) -> "PadicScalar":
        """``x`` known only to ``N`` significant digits."""
        x = Fraction(x)
        if x == 0:
            raise ValueError("a truncated zero needs an explicit bound; use big_oh")
        v = vp(x.numerator, p) - vp(x.denominator, p)
        unit = x / Fraction(p) ** int(v)
        return cls(p, N, v, residue(unit, p, N), N)

    @classmethod
    def zero(cls, p: int, N: int = DEFAULT_PRECISION) -> "PadicScalar":
        return cls(p, N, INF, 0, INF, Fraction(0))

    @classmethod
    def big_oh(cls, p: int, k: int, N: int = DEFAULT_PRECISION) -> "PadicScalar":
        return cls(p, N, k, 0, 0)

    def _coerce(self, other) -> "PadicScalar":
        if isinstance(other, PadicScalar):
            if other.p != self.p:
                raise ValueError("operands live over different primes")
            return other
        if isinstance(other, (int, Fraction)):
            return PadicScalar.from_rational(other, self.p, self.N)
        return NotImplemented

    def _capped(self) -> "PadicScalar":
        """Demote an exact scalar to ``N`` digits (zeros stay exact)."""
        if self.exact is None or self.exact == 0:
            return self
        return PadicScalar(self.p, self.N, self.v, self.u, self.N)

    # predicates -------------------------------------------------------------

    def is_exact(self) -> bool:
        return self.exact is not None

    def is_zero(self) -> bool:
        """True for exact zeros and for zeros at working precision."""
        return self.prec == 0 or self.exact == 0

    def is_exact_zero(self) -> bool:
        return self.exact is not None and self.exact == 0

    @property
    def absprec(self) -> float:
        if self.exact is not None:
            return INF
        return self.v if self.prec == 0 else self.v + self.prec

    def valuation(self) -> float:
        if self.prec == 0:
            raise PrecisionError(
                f"valuation undecidable: value is O({self.p}^{self.v})", self.v
            )
        return self.v

    def valuation_at_least(self, k: int) -> bool:
        """Decide ``v(self) >= k``; raise if the precision does not say."""
        if self.prec == 0:
            if self.v >= k:
                return True
            raise PrecisionError(f"cannot decide v >= {k} for O({self.p}^{self.v})", self.v)
        return self.v >= k

    # arithmetic -------------------------------------------------------------

    def __neg__(self) -> "PadicScalar":
        if self.exact is not None:
            return PadicScalar.from_rational(-self.exact, self.p, self.N)
        if self.prec == 0:
            return self
        mod = self.p**self.prec
        return PadicScalar(self.p, self.N, self.v, (-self.u) % mod, self.prec)

    def __add__(self, other) -> "PadicScalar":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.exact is not None and other.exact is not None:
            return PadicScalar.from_rational(self.exact + other.exact, self.p, min(self.N, other.N))
        if self.is_exact_zero():
            return other
        if other.is_exact_zero():
            return self
        a, b = self._capped(), other._capped()
        p = self.p
        N = min(a.N, b.N)
        absp = min(a.absprec, b.absprec)
        terms = [t for t in (a, b) if t.prec > 0]
        if not terms:
            return PadicScalar(p, N, absp, 0, 0)
        vmin = min(t.v for t in terms)
        if vmin >= absp:
            return PadicScalar(p, N, absp, 0, 0)
        width = int(absp - vmin)
        mod = p**width
        s = sum(t.u * p ** int(t.v - vmin) for t in terms) % mod
        if s == 0:
            return PadicScalar(p, N, absp, 0, 0)
        t = int(vp(s, p))
        v = vmin + t
        prec = min(int(absp - v), N)
        return PadicScalar(p, N, v, (s // p**t) % p**prec, prec)

    __radd__ = __add__

    def __sub__(self, other) -> "PadicScalar":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "PadicScalar":
        return (-self) + other

    def __mul__(self, other) -> "PadicScalar":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        p = self.p
        N = min(self.N, other.N)
        if self.exact is not None and other.exact is not None:
            return PadicScalar.from_rational(self.exact * other.exact, p, N)
        if self.is_exact_zero() or other.is_exact_zero():
            return PadicScalar.zero(p, N)
        a, b = self._capped(), other._capped()
        if a.prec == 0 or b.prec == 0:
            return PadicScalar(p, N, a.v + b.v, 0, 0)
        prec = min(a.prec, b.prec)
        return PadicScalar(p, N, a.v + b.v, a.u * b.u % p**prec, prec)

    __rmul__ = __mul__

    def inverse(self) -> "PadicScalar":
        if self.is_exact_zero():
            raise ZeroDivisionError("inverse of zero")
        if self.exact is not None:
            return PadicScalar.from_rational(1 / self.exact, self.p, self.N)
        if self.prec == 0:
            raise PrecisionError("inverse of a value indistinguishable from zero", self.v)
        mod = self.p**self.prec
        return PadicScalar(self.p, self.N, -self.v, pow(self.u, -1, mod), self.prec)

    def __truediv__(self, other) -> "PadicScalar":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other) -> "PadicScalar":
        return self._coerce(other) * self.inverse()

    def __pow__(self, k: int) -> "PadicScalar":
        if k < 0:
            return self.inverse() ** (-k)
        out = PadicScalar.from_rational(1, self.p, self.N)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None  # type: ignore[assignment]

    # conversion -------------------------------------------------------------

    def to_fraction(self) -> Fraction:
        """The exact value, or the rational lift ``u * p**v`` of a truncated one."""
        if self.exact is not None:
            return self.exact
        if self.prec == 0:
            return Fraction(0)
        return Fraction(self.u) * Fraction(self.p) ** int(self.v)

    def residue(self, m: int) -> int:
        """Residue modulo ``p**m`` of an integral scalar."""
        if m <= 0:
            return 0
        if self.exact is not None:
            return residue(self.exact, self.p, m)
        if self.prec == 0:
            if self.v >= m:
                return 0
            raise PrecisionError(f"residue mod {self.p}^{m} of O({self.p}^{self.v})", self.v)
        if self.v < 0:
            raise ValueError("non-integral entry")
        if self.v + self.prec < m:
            raise PrecisionError(f"only {self.v + self.prec} digits known, {m} requested")
        return self.u * self.p ** int(self.v) % self.p**m

    def __repr__(self) -> str:
        if self.exact is not None:
            return str(self.exact)
        if self.prec == 0:
            return f"O({self.p}^{self.v})"
        return f"{self.u}*{self.p}^{self.v} + O({self.p}^{self.v + self.prec})"


def scalar_ops(a: PadicScalar, b: PadicScalar | None, op: str) -> PadicScalar:
    """Dispatch for the four field operations used by the CLI and the tests."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "neg":
        return -a
    if op == "inv":
        return a.inverse()
    raise ValueError(f"unknown scalar op {op!r}")


def valuation(a: PadicScalar) -> float:
    return a.valuation()


@dataclass(frozen=True)
class PadicContext:
    """Fixes the prime and the working precision of a computation."""

    p: int
    N: int = DEFAULT_PRECISION

    def __post_init__(self):
        if self.p < 2 or any(self.p % q == 0 for q in range(2, int(self.p**0.5) + 1)):
            raise ValueError(f"{self.p} is not prime")
        if self.N < 1:
            raise ValueError("precision must be positive")

    def scalar(self, x: Number) -> PadicScalar:
        return PadicScalar.from_rational(x, self.p, self.N)

    def matrix(self, rows: Iterable[Iterable[Number | PadicScalar]]) -> "PadicMatrix":
        return PadicMatrix.from_rows(rows, self.p, self.N)

    def identity(self, n: int = 2) -> "PadicMatrix":
        return PadicMatrix.identity(n, self.p, self.N)

    def h(self, n: int = 2) -> "PadicMatrix":
        """The element with ones on the superdiagonal and ``p`` in the corner."""
        rows = [[0] * n for _ in range(n)]
        for i in range(n - 1):
            rows[i][i + 1] = 1
        rows[n - 1][0] = self.p
        return self.matrix(rows)

    def diag(self, *entries: Number) -> "PadicMatrix":
        n = len(entries)
        return self.matrix([[entries[i] if i == j else 0 for j in range(n)] for i in range(n)])


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


class PadicMatrix:
    """Square matrix (n = 2 or 3) with :class:`PadicScalar` entries."""

    __slots__ = ("rows", "p", "N")

    def __init__(self, rows: tuple[tuple[PadicScalar, ...], ...], p: int, N: int):
        self.rows = rows
        self.p = p
        self.N = N

    @classmethod
    def from_rows(cls, rows, p: int, N: int = DEFAULT_PRECISION) -> "PadicMatrix":
        out = []
        for row in rows:
            out.append(
                tuple(
                    x if isinstance(x, PadicScalar) else PadicScalar.from_rational(x, p, N)
                    for x in row
                )
            )
        n = len(out)
        if n not in (2, 3) or any(len(r) != n for r in out):
            raise ValueError("only 2x2 and 3x3 matrices are supported")
        return cls(tuple(out), p, N)

    @classmethod
    def identity(cls, n: int, p: int, N: int = DEFAULT_PRECISION) -> "PadicMatrix":
        return cls.from_rows([[1 if i == j else 0 for j in range(n)] for i in range(n)], p, N)

    @property
    def n(self) -> int:
        return len(self.rows)

    def __getitem__(self, ij: tuple[int, int]) -> PadicScalar:
        i, j = ij
        return self.rows[i][j]

    def __matmul__(self, other: "PadicMatrix") -> "PadicMatrix":
        n = self.n
        if other.n != n or other.p != self.p:
            raise ValueError("incompatible matrices")
        cols = list(zip(*other.rows))
        out = []
        for row in self.rows:
            new_row = []
            for col in cols:
                acc = row[0] * col[0]
                for k in range(1, n):
                    acc = acc + row[k] * col[k]
                new_row.append(acc)
            out.append(tuple(new_row))
        return PadicMatrix(tuple(out), self.p, min(self.N, other.N))

    __mul__ = __matmul__

    def scale(self, c: PadicScalar | Number) -> "PadicMatrix":
        return PadicMatrix(tuple(tuple(x * c for x in row) for row in self.rows), self.p, self.N)

    def det(self) -> PadicScalar:
        n = self.n
        total = PadicScalar.zero(self.p, self.N)
        for perm in permutations(range(n)):
            term = PadicScalar.from_rational(_perm_sign(perm), self.p, self.N)
            for i in range(n):
                term = term * self.rows[i][perm[i]]
            total = total + term
        return total

    def _minor(self, i: int, j: int) -> PadicScalar:
        rows = [r[:j] + r[j + 1 :] for k, r in enumerate(self.rows) if k != i]
        if len(rows) == 1:
            return rows[0][0]
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]

    def inverse(self) -> "PadicMatrix":
        d = self.det()
        if d.is_exact_zero():
            raise SingularMatrixError("singular matrix")
        if d.is_zero():
            raise PrecisionError("determinant indistinguishable from zero", d.v)
        dinv = d.inverse()
        n = self.n
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                c = self._minor(j, i)
                if (i + j) % 2:
                    c = -c
                row.append(c * dinv)
            out.append(tuple(row))
        return PadicMatrix(tuple(out), self.p, self.N)

    def min_valuation(self) -> float:
        """Smallest entry valuation; zeros at precision count by their bound.

        Raises if an inexact zero might be the minimum.
        """
        known = [x.v for row in self.rows for x in row if x.prec > 0]
        m = min(known) if known else INF
        for row in self.rows:
            for x in row:
                if x.prec == 0 and x.v < m:
                    raise PrecisionError("minimal entry valuation undecidable", x.v)
        return m

    def to_fractions(self) -> tuple[tuple[Fraction, ...], ...]:
        return tuple(tuple(x.to_fraction() for x in row) for row in self.rows)

    def is_exact(self) -> bool:
        return all(x.exact is not None for row in self.rows for x in row)

    def reduce_mod(self, m: int) -> tuple[tuple[int, ...], ...]:
        """Entrywise residue modulo ``p**m``."""
        for row in self.rows:
            for x in row:
                if x.prec > 0 and x.v < 0:
                    raise ValueError("non-integral entry")
        return tuple(tuple(x.residue(m) for x in row) for row in self.rows)

    def equals(self, other: "PadicMatrix") -> bool:
        return all(a == b for ra, rb in zip(self.rows, other.rows) for a, b in zip(ra, rb))

    __eq__ = equals
    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return "PadicMatrix(" + repr([list(r) for r in self.to_fractions()]) + f", p={self.p})"


def matrix_ops(A: PadicMatrix, B: PadicMatrix | None, op: str):
    if op == "mul":
        return A @ B
    if op == "inv":
        return A.inverse()
    if op == "det":
        return A.det()
    raise ValueError(f"unknown matrix op {op!r}")


def congruence_level(A: PadicMatrix) -> float:
    """Largest ``m`` with ``A`` in ``K_m``: ``INF`` for the identity, 0 for
    elements of ``SL_n(O)`` outside ``K_1``, -1 outside ``SL_n(O)``."""
    if not in_integral_group(A, "SL"):
        return -1
    n = A.n
    level = INF
    for i in range(n):
        for j in range(n):
            x = A.rows[i][j] - 1 if i == j else A.rows[i][j]
            if x.is_exact_zero():
                continue
            level = min(level, x.valuation())
    return level


def in_integral_group(A: PadicMatrix, spec) -> bool:
    """Membership in ``SL_n(O)`` (``spec="SL"``) or in the congruence kernel
    ``K_m`` (``spec=("K", m)``)."""
    if spec == "SL":
        m = 0
    elif isinstance(spec, tuple) and spec[0] == "K":
        m = int(spec[1])
        if m > A.N and not A.is_exact():
            raise PrecisionError(f"precision {A.N} too low to decide level {m}")
    else:
        raise ValueError(f"unknown group spec {spec!r}")
    for row in A.rows:
        for x in row:
            if x.prec > 0 and x.v < 0:
                return False
    d = A.det() - 1
    if not d.is_zero():
        return False
    if m == 0:
        return True
    n = A.n
    for i in range(n):
        for j in range(n):
            x = A.rows[i][j] - 1 if i == j else A.rows[i][j]
            if not x.valuation_at_least(m):
                return False
    return True


def reduce_mod(A: PadicMatrix, m: int) -> tuple[tuple[int, ...], ...]:
    return A.reduce_mod(m)
