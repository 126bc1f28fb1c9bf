"""Exact scalars (F_p, F_p[y], F_p(y)) and exact linear algebra over them.

Scalars of F_p are plain ints in [0, p).  Scalars of F_p(y) are RatFunc
values.  A field object (PrimeField or FunctionField) supplies the
arithmetic, so matrix and polynomial code can be written once for both.
"""

from __future__ import annotations

import math
import random
from itertools import product
from typing import Iterable, Sequence

from .errors import DimensionMismatch, SingularMatrix

DEFAULT_PRIME = (1 << 61) - 1

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class PrimeFieldElement:
    """A residue modulo p with the usual operators."""

    __slots__ = ("value", "p")

    def __init__(self, value: int, p: int = DEFAULT_PRIME):
        self.value = int(value) % p
        self.p = p

    def _coerce(self, other):
        if isinstance(other, PrimeFieldElement):
            if other.p != self.p:
                raise DimensionMismatch("elements of different prime fields")
            return other.value
        if isinstance(other, int):
            return other % self.p
        return NotImplemented

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"PrimeFieldElement({self.value}, p={self.p})"

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.value == o

    def __hash__(self) -> int:
        return hash((self.value, self.p))

    def __bool__(self) -> bool:
        return self.value != 0

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PrimeFieldElement(self.value + o, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PrimeFieldElement(self.value - o, self.p)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PrimeFieldElement(o - self.value, self.p)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PrimeFieldElement(self.value * o, self.p)

    __rmul__ = __mul__

    def __neg__(self):
        return PrimeFieldElement(-self.value, self.p)

    def inverse(self) -> PrimeFieldElement:
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse")
        return PrimeFieldElement(pow(self.value, -1, self.p), self.p)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if o == 0:
            raise ZeroDivisionError("division by zero in F_p")
        return PrimeFieldElement(self.value * pow(o, -1, self.p), self.p)

    def __pow__(self, e: int):
        return PrimeFieldElement(pow(self.value, e, self.p), self.p)


# --- univariate polynomials -------------------------------------------------

_SCHOOLBOOK_CUTOFF = 48


def _strip(c: list[int]) -> tuple[int, ...]:
    n = len(c)
    while n and c[n - 1] == 0:
        n -= 1
    return tuple(c[:n])


def _pmul(a: Sequence[int], b: Sequence[int], p: int) -> tuple[int, ...]:
    if not a or not b:
        return ()
    if len(a) < _SCHOOLBOOK_CUTOFF or len(b) < _SCHOOLBOOK_CUTOFF:
        res = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    res[i + j] += x * y
        return _strip([c % p for c in res])
    # Kronecker packing: one big-integer product replaces the double loop.
    bits = 2 * p.bit_length() + min(len(a), len(b)).bit_length() + 1
    width = (bits + 7) // 8
    A = int.from_bytes(b"".join(x.to_bytes(width, "little") for x in a), "little")
    B = int.from_bytes(b"".join(x.to_bytes(width, "little") for x in b), "little")
    raw = (A * B).to_bytes(width * (len(a) + len(b)), "little")
    out = [
        int.from_bytes(raw[i * width:(i + 1) * width], "little") % p
        for i in range(len(a) + len(b) - 1)
    ]
    return _strip(out)


class UniPoly:
    """Element of F_p[y]; coefficients lowest degree first, no trailing zeros."""

    __slots__ = ("coeffs", "p")

    def __init__(self, coeffs: Iterable[int], p: int = DEFAULT_PRIME):
        self.coeffs = _strip([int(c) % p for c in coeffs])
        self.p = p

    @classmethod
    def _raw(cls, coeffs: tuple[int, ...], p: int) -> UniPoly:
        out = object.__new__(cls)
        out.coeffs = coeffs
        out.p = p
        return out

    @classmethod
    def zero(cls, p: int = DEFAULT_PRIME) -> UniPoly:
        return cls._raw((), p)

    @classmethod
    def one(cls, p: int = DEFAULT_PRIME) -> UniPoly:
        return cls._raw((1,), p)

    @classmethod
    def constant(cls, c: int, p: int = DEFAULT_PRIME) -> UniPoly:
        return cls((c,), p)

    @classmethod
    def monomial(cls, deg: int, p: int = DEFAULT_PRIME, c: int = 1) -> UniPoly:
        c %= p
        if c == 0:
            return cls.zero(p)
        return cls._raw((0,) * deg + (c,), p)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def lc(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def __repr__(self) -> str:
        return f"UniPoly({list(self.coeffs)}, p={self.p})"

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = UniPoly.constant(other, self.p)
        if not isinstance(other, UniPoly):
            return NotImplemented
        return self.p == other.p and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((self.coeffs, self.p))

    def _lift(self, other) -> UniPoly:
        if isinstance(other, UniPoly):
            return other
        if isinstance(other, (int, PrimeFieldElement)):
            return UniPoly.constant(int(other), self.p)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        a, b, p = self.coeffs, other.coeffs, self.p
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, y in enumerate(b):
            out[i] = (out[i] + y) % p
        return UniPoly._raw(_strip(out), p)

    __radd__ = __add__

    def __neg__(self) -> UniPoly:
        p = self.p
        return UniPoly._raw(tuple((-c) % p for c in self.coeffs), p)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, PrimeFieldElement)):
            return self.scale(int(other))
        if not isinstance(other, UniPoly):
            return NotImplemented
        return UniPoly._raw(_pmul(self.coeffs, other.coeffs, self.p), self.p)

    __rmul__ = __mul__

    def scale(self, c: int) -> UniPoly:
        p = self.p
        c %= p
        if c == 0:
            return UniPoly.zero(p)
        if c == 1:
            return self
        return UniPoly._raw(tuple(x * c % p for x in self.coeffs), p)

    def shift_degree(self, k: int) -> UniPoly:
        """Multiply by y^k."""
        if not self.coeffs or k == 0:
            return self
        return UniPoly._raw((0,) * k + self.coeffs, self.p)

    def __pow__(self, e: int) -> UniPoly:
        out, base = UniPoly.one(self.p), self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def __divmod__(self, other: UniPoly) -> tuple[UniPoly, UniPoly]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        p = self.p
        r = list(self.coeffs)
        db = other.degree
        if len(r) <= db:
            return UniPoly.zero(p), self
        inv = pow(other.lc, -1, p)
        b = other.coeffs
        q = [0] * (len(r) - db)
        for k in range(len(r) - 1, db - 1, -1):
            c = r[k] % p
            if c == 0:
                continue
            c = c * inv % p
            q[k - db] = c
            off = k - db
            for i in range(db + 1):
                r[off + i] -= c * b[i]
        return UniPoly._raw(_strip(q), p), UniPoly._raw(_strip([x % p for x in r[:db]]), p)

    def __floordiv__(self, other: UniPoly) -> UniPoly:
        return divmod(self, other)[0]

    def __mod__(self, other: UniPoly) -> UniPoly:
        return divmod(self, other)[1]

    def exquo(self, other: UniPoly) -> UniPoly:
        """Exact quotient; raises ArithmeticError if the division leaves a remainder."""
        if other.degree == 0:
            return self.scale(pow(other.lc, -1, self.p))
        q, r = divmod(self, other)
        if not r.is_zero():
            raise ArithmeticError("inexact polynomial division")
        return q

    def monic(self) -> UniPoly:
        if self.is_zero() or self.lc == 1:
            return self
        return self.scale(pow(self.lc, -1, self.p))

    def __call__(self, y0: int) -> int:
        p, acc = self.p, 0
        for c in reversed(self.coeffs):
            acc = (acc * y0 + c) % p
        return acc

    def low_order(self) -> int:
        """Largest k with y^k dividing self (0 for the zero polynomial)."""
        for i, c in enumerate(self.coeffs):
            if c:
                return i
        return 0


def poly_gcd(a: UniPoly, b: UniPoly) -> UniPoly:
    while not b.is_zero():
        a, b = b, a % b
    return a.monic()


# --- rational functions -----------------------------------------------------


class RatFunc:
    """Element of F_p(y) kept as num/den with den monic and gcd(num, den) = 1."""

    __slots__ = ("num", "den")

    def __init__(self, num: UniPoly | int, den: UniPoly | int | None = None, p: int | None = None):
        if isinstance(num, int):
            num = UniPoly.constant(num, p if p is not None else _pof(den))
        if den is None:
            den = UniPoly.one(num.p)
        elif isinstance(den, int):
            den = UniPoly.constant(den, num.p)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        if num.is_zero():
            self.num, self.den = num, UniPoly.one(num.p)
            return
        if den.degree > 0:
            g = poly_gcd(num, den)
            if g.degree > 0:
                num, den = num.exquo(g), den.exquo(g)
        if den.lc != 1:
            inv = pow(den.lc, -1, num.p)
            num, den = num.scale(inv), den.scale(inv)
        self.num, self.den = num, den

    @classmethod
    def _raw(cls, num: UniPoly, den: UniPoly) -> RatFunc:
        out = object.__new__(cls)
        out.num = num
        out.den = den
        return out

    @classmethod
    def from_int(cls, c: int, p: int = DEFAULT_PRIME) -> RatFunc:
        return cls._raw(UniPoly.constant(c, p), UniPoly.one(p))

    @classmethod
    def y_power(cls, e: int, p: int = DEFAULT_PRIME) -> RatFunc:
        """y^e for any integer e."""
        if e >= 0:
            return cls._raw(UniPoly.monomial(e, p), UniPoly.one(p))
        return cls._raw(UniPoly.one(p), UniPoly.monomial(-e, p))

    @property
    def p(self) -> int:
        return self.num.p

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def __repr__(self) -> str:
        if self.is_polynomial():
            return f"RatFunc({list(self.num.coeffs)})"
        return f"RatFunc({list(self.num.coeffs)} / {list(self.den.coeffs)})"

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, UniPoly)):
            other = RatFunc(other, p=self.p)
        if not isinstance(other, RatFunc):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def _lift(self, other):
        if isinstance(other, RatFunc):
            return other
        if isinstance(other, (int, PrimeFieldElement)):
            return RatFunc.from_int(int(other), self.p)
        if isinstance(other, UniPoly):
            return RatFunc._raw(other, UniPoly.one(other.p))
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        if self.num.is_zero():
            return other
        if other.num.is_zero():
            return self
        if self.den == other.den:
            if self.den.degree == 0:
                return RatFunc._raw(self.num + other.num, self.den)
            return RatFunc(self.num + other.num, self.den)
        return RatFunc(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self) -> RatFunc:
        return RatFunc._raw(-self.num, self.den)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, PrimeFieldElement)):
            c = int(other) % self.p
            if c == 0:
                return RatFunc.from_int(0, self.p)
            return RatFunc._raw(self.num.scale(c), self.den)
        other = self._lift(other)
        if other is NotImplemented:
            return other
        if self.den.degree == 0 and other.den.degree == 0:
            return RatFunc._raw(self.num * other.num, self.den)
        # cross-cancel before multiplying to keep degrees small
        g1 = poly_gcd(self.num, other.den) if other.den.degree > 0 else None
        g2 = poly_gcd(other.num, self.den) if self.den.degree > 0 else None
        n1, d2 = (self.num, other.den) if g1 is None or g1.degree <= 0 else (self.num.exquo(g1), other.den.exquo(g1))
        n2, d1 = (other.num, self.den) if g2 is None or g2.degree <= 0 else (other.num.exquo(g2), self.den.exquo(g2))
        num, den = n1 * n2, d1 * d2
        if num.is_zero():
            return RatFunc.from_int(0, self.p)
        if den.lc != 1:
            inv = pow(den.lc, -1, self.p)
            num, den = num.scale(inv), den.scale(inv)
        return RatFunc._raw(num, den)

    __rmul__ = __mul__

    def inverse(self) -> RatFunc:
        if self.num.is_zero():
            raise ZeroDivisionError("0 has no inverse in F_p(y)")
        return RatFunc(self.den, self.num)

    def __truediv__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, e: int) -> RatFunc:
        if e < 0:
            return self.inverse() ** (-e)
        return RatFunc._raw(self.num ** e, self.den ** e)

    def __call__(self, y0: int) -> int:
        d = self.den(y0)
        if d == 0:
            raise ZeroDivisionError("denominator vanishes at the evaluation point")
        return self.num(y0) * pow(d, -1, self.p) % self.p

    def valuation_at_infinity(self) -> int:
        """deg(num) - deg(den); the exponent of the leading y-power."""
        return self.num.degree - self.den.degree

    def leading_coefficient(self) -> int:
        return self.num.lc


def _pof(den) -> int:
    return den.p if isinstance(den, UniPoly) else DEFAULT_PRIME


# --- field objects ----------------------------------------------------------


class PrimeField:
    """F_p with int elements."""

    symbolic = False

    def __init__(self, p: int = DEFAULT_PRIME):
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        self.p = p
        self.zero = 0
        self.one = 1

    def __repr__(self) -> str:
        return f"PrimeField({self.p})"

    def __eq__(self, other) -> bool:
        return isinstance(other, PrimeField) and other.p == self.p

    def __hash__(self) -> int:
        return hash(("F", self.p))

    def __call__(self, x) -> int:
        if isinstance(x, (RatFunc, UniPoly)):
            raise TypeError("cannot coerce a function-field element into F_p")
        return int(x) % self.p

    def add(self, a, b):
        return (a + b) % self.p

    def sub(self, a, b):
        return (a - b) % self.p

    def mul(self, a, b):
        return a * b % self.p

    def neg(self, a):
        return -a % self.p

    def inv(self, a):
        if a % self.p == 0:
            raise ZeroDivisionError("0 has no inverse")
        return pow(a, -1, self.p)

    def div(self, a, b):
        return a * self.inv(b) % self.p

    def is_zero(self, a) -> bool:
        return a % self.p == 0

    def evaluate(self, a, y0: int) -> int:
        return a


class FunctionField:
    """F_p(y) with RatFunc elements."""

    symbolic = True

    def __init__(self, p: int = DEFAULT_PRIME):
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        self.p = p
        self.zero = RatFunc.from_int(0, p)
        self.one = RatFunc.from_int(1, p)

    def __repr__(self) -> str:
        return f"FunctionField({self.p})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FunctionField) and other.p == self.p

    def __hash__(self) -> int:
        return hash(("F(y)", self.p))

    def __call__(self, x) -> RatFunc:
        if isinstance(x, RatFunc):
            return x
        if isinstance(x, UniPoly):
            return RatFunc._raw(x, UniPoly.one(self.p))
        return RatFunc.from_int(int(x), self.p)

    def y(self, e: int = 1) -> RatFunc:
        return RatFunc.y_power(e, self.p)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def neg(self, a):
        return -a

    def inv(self, a):
        return a.inverse()

    def div(self, a, b):
        return a / b

    def is_zero(self, a) -> bool:
        return a.is_zero()

    def evaluate(self, a, y0: int) -> int:
        return a(y0)


Field = PrimeField | FunctionField


def base_field(field: Field) -> PrimeField:
    return field if isinstance(field, PrimeField) else PrimeField(field.p)


# --- matrices ---------------------------------------------------------------


class ExactMatrix:
    """Matrix with explicit row and column index lists.

    Indices are arbitrary hashable labels (exponent vectors, tuples of
    them, ints).  Entries are field elements of `field`.
    """

    __slots__ = ("field", "rows", "cols", "data", "_rpos", "_cpos")

    def __init__(self, field: Field, data, rows: Sequence | None = None, cols: Sequence | None = None):
        data = [list(r) for r in data]
        m = len(data) if rows is None else len(rows)
        n = (len(data[0]) if data else 0) if cols is None else len(cols)
        self.rows = tuple(range(m)) if rows is None else tuple(rows)
        self.cols = tuple(range(n)) if cols is None else tuple(cols)
        if len(data) != len(self.rows) or any(len(r) != len(self.cols) for r in data):
            raise DimensionMismatch("entry table does not match the index sets")
        self.field = field
        self.data = tuple(tuple(field(x) for x in r) for r in data)
        self._rpos = None
        self._cpos = None

    @classmethod
    def _raw(cls, field: Field, data: tuple, rows: tuple, cols: tuple) -> ExactMatrix:
        out = object.__new__(cls)
        out.field, out.data, out.rows, out.cols = field, data, rows, cols
        out._rpos = None
        out._cpos = None
        return out

    @classmethod
    def identity(cls, field: Field, index: Sequence) -> ExactMatrix:
        index = tuple(index)
        n = len(index)
        data = tuple(tuple(field.one if i == j else field.zero for j in range(n)) for i in range(n))
        return cls._raw(field, data, index, index)

    @classmethod
    def diagonal(cls, field: Field, index: Sequence, entries: Sequence) -> ExactMatrix:
        index = tuple(index)
        n = len(index)
        data = tuple(
            tuple(field(entries[i]) if i == j else field.zero for j in range(n)) for i in range(n)
        )
        return cls._raw(field, data, index, index)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    def row_position(self, r) -> int:
        if self._rpos is None:
            self._rpos = {x: i for i, x in enumerate(self.rows)}
        return self._rpos[r]

    def col_position(self, c) -> int:
        if self._cpos is None:
            self._cpos = {x: i for i, x in enumerate(self.cols)}
        return self._cpos[c]

    def entry(self, r, c):
        return self.data[self.row_position(r)][self.col_position(c)]

    def column(self, c) -> tuple:
        j = self.col_position(c)
        return tuple(r[j] for r in self.data)

    def submatrix(self, rows: Sequence, cols: Sequence) -> ExactMatrix:
        ri = [self.row_position(r) for r in rows]
        ci = [self.col_position(c) for c in cols]
        data = tuple(tuple(self.data[i][j] for j in ci) for i in ri)
        return ExactMatrix._raw(self.field, data, tuple(rows), tuple(cols))

    def transpose(self) -> ExactMatrix:
        return ExactMatrix._raw(self.field, tuple(zip(*self.data)) if self.data else (), self.cols, self.rows)

    def relabel(self, rows: Sequence | None = None, cols: Sequence | None = None) -> ExactMatrix:
        return ExactMatrix._raw(
            self.field, self.data,
            self.rows if rows is None else tuple(rows),
            self.cols if cols is None else tuple(cols),
        )

    def promote(self, field: Field) -> ExactMatrix:
        if field == self.field:
            return self
        return ExactMatrix(field, self.data, self.rows, self.cols)

    def evaluate(self, y0: int) -> ExactMatrix:
        """Substitute y = y0 in every entry, giving a matrix over F_p."""
        f = self.field
        F = base_field(f)
        data = tuple(tuple(f.evaluate(x, y0) for x in r) for r in self.data)
        return ExactMatrix._raw(F, data, self.rows, self.cols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        if self.rows != other.rows or self.cols != other.cols:
            return False
        if self.field.symbolic or other.field.symbolic:
            F = FunctionField(self.field.p)
            return all(F(a) == F(b) for ra, rb in zip(self.data, other.data) for a, b in zip(ra, rb))
        p = self.field.p
        return all((a - b) % p == 0 for ra, rb in zip(self.data, other.data) for a, b in zip(ra, rb))

    __hash__ = None

    def __add__(self, other: ExactMatrix) -> ExactMatrix:
        if self.shape != other.shape:
            raise DimensionMismatch("shapes differ")
        f = _join(self.field, other.field)
        a, b = self.promote(f), other.promote(f)
        data = tuple(tuple(f.add(x, y) for x, y in zip(ra, rb)) for ra, rb in zip(a.data, b.data))
        return ExactMatrix._raw(f, data, self.rows, self.cols)

    def __sub__(self, other: ExactMatrix) -> ExactMatrix:
        if self.shape != other.shape:
            raise DimensionMismatch("shapes differ")
        f = _join(self.field, other.field)
        a, b = self.promote(f), other.promote(f)
        data = tuple(tuple(f.sub(x, y) for x, y in zip(ra, rb)) for ra, rb in zip(a.data, b.data))
        return ExactMatrix._raw(f, data, self.rows, self.cols)

    def __matmul__(self, other: ExactMatrix) -> ExactMatrix:
        if len(self.cols) != len(other.rows):
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        f = _join(self.field, other.field)
        a, b = self.promote(f), other.promote(f)
        bt = list(zip(*b.data)) if b.data else [() for _ in b.cols]
        if isinstance(f, PrimeField):
            p = f.p
            data = tuple(
                tuple(sum(x * y for x, y in zip(ra, cb)) % p for cb in bt) for ra in a.data
            )
        else:
            data = tuple(tuple(_dot(f, ra, cb) for cb in bt) for ra in a.data)
        return ExactMatrix._raw(f, data, self.rows, other.cols)

    def scale_rows(self, v: Sequence) -> ExactMatrix:
        """v * M: multiply row i by v[i]."""
        if len(v) != len(self.rows):
            raise DimensionMismatch("scaling vector has the wrong length")
        f = self.field
        if any(isinstance(x, (RatFunc, UniPoly)) for x in v) and not f.symbolic:
            f = FunctionField(f.p)
        a = self.promote(f)
        data = tuple(tuple(f.mul(f(c), x) for x in r) for c, r in zip(v, a.data))
        return ExactMatrix._raw(f, data, self.rows, self.cols)

    def __repr__(self) -> str:
        return f"ExactMatrix({self.shape[0]}x{self.shape[1]} over {self.field})"

    def to_lists(self) -> list[list]:
        return [list(r) for r in self.data]


def _join(f1: Field, f2: Field) -> Field:
    if f1.p != f2.p:
        raise DimensionMismatch("matrices over different primes")
    if f1.symbolic:
        return f1
    return f2


def _dot(f: Field, a: Sequence, b: Sequence):
    acc = f.zero
    for x, y in zip(a, b):
        if not f.is_zero(x) and not f.is_zero(y):
            acc = f.add(acc, f.mul(x, y))
    return acc


# --- linear algebra over F_p ----------------------------------------------


def _rref_mod(rows: list[list[int]], p: int) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form over F_p; returns (rows, pivot columns)."""
    A = [[x % p for x in r] for r in rows]
    m = len(A)
    n = len(A[0]) if m else 0
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        piv = next((i for i in range(r, m) if A[i][c]), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = pow(A[r][c], -1, p)
        pr = [x * inv % p for x in A[r]]
        A[r] = pr
        for i in range(m):
            if i != r:
                f = A[i][c]
                if f:
                    A[i] = [(x - f * y) % p for x, y in zip(A[i], pr)]
        pivots.append(c)
        r += 1
    return A, pivots


def rank_mod(rows: Sequence[Sequence[int]], p: int) -> int:
    """Rank over F_p of a list of rows (row echelon, no back substitution)."""
    A = [[x % p for x in r] for r in rows]
    m = len(A)
    if m == 0:
        return 0
    n = len(A[0])
    if n < m:
        A = [list(c) for c in zip(*A)]
        m, n = n, m
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if A[i][c]), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = pow(A[r][c], -1, p)
        pr = A[r]
        for i in range(r + 1, m):
            f = A[i][c]
            if f:
                f = f * inv % p
                A[i] = [(x - f * y) % p for x, y in zip(A[i], pr)]
        r += 1
        if r == m:
            break
    return r


def _det_mod(rows: list[list[int]], p: int) -> int:
    A = [[x % p for x in r] for r in rows]
    n = len(A)
    det = 1
    for c in range(n):
        piv = next((i for i in range(c, n) if A[i][c]), None)
        if piv is None:
            return 0
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det = det * A[c][c] % p
        inv = pow(A[c][c], -1, p)
        pr = A[c]
        for i in range(c + 1, n):
            f = A[i][c]
            if f:
                f = f * inv % p
                A[i] = [(x - f * y) % p for x, y in zip(A[i], pr)]
    return det % p


# --- linear algebra over F_p(y) ---------------------------------------------


def _clear_row(row: Sequence[RatFunc], p: int) -> tuple[list[UniPoly], UniPoly]:
    """Multiply a row of rational functions by the lcm of its denominators."""
    L = UniPoly.one(p)
    for x in row:
        if x.den.degree > 0:
            g = poly_gcd(L, x.den)
            L = L * x.den.exquo(g)
    out = []
    for x in row:
        if x.num.is_zero():
            out.append(UniPoly.zero(p))
        elif x.den.degree == 0:
            out.append(x.num * L)
        else:
            out.append(x.num * L.exquo(x.den))
    return out, L


def _bareiss(A: list[list[UniPoly]], p: int, square: bool = False) -> tuple[int, UniPoly]:
    """Fraction-free elimination in place.

    Returns (rank, last pivot with sign); for a square input the second
    value is the determinant.
    """
    m = len(A)
    n = len(A[0]) if m else 0
    zero = UniPoly.zero(p)
    prev = UniPoly.one(p)
    sign = 1
    r = 0
    for c in range(n):
        if r == m:
            break
        piv = None
        best = None
        for i in range(r, m):
            d = A[i][c].degree
            if d >= 0 and (best is None or d < best):
                piv, best = i, d
        if piv is None:
            if square:
                return r, zero
            continue
        if piv != r:
            A[r], A[piv] = A[piv], A[r]
            sign = -sign
        pr = A[r][c]
        prow = A[r]
        for i in range(r + 1, m):
            row = A[i]
            a = row[c]
            for j in range(c + 1, n):
                x = pr * row[j]
                if not a.is_zero() and not prow[j].is_zero():
                    x = x - a * prow[j]
                row[j] = x.exquo(prev) if prev.degree > 0 or prev.lc != 1 else x
            row[c] = zero
        prev = pr
        r += 1
    return r, prev if sign == 1 else -prev


_EVAL_SEED = 0x5E7D


def _evaluation_points(p: int, count: int) -> list[int]:
    rng = random.Random(_EVAL_SEED ^ p)
    return [rng.randrange(2, p - 1) for _ in range(count)]


def evaluated_rank(M: ExactMatrix, y0: int) -> int | None:
    """Rank of M(y0) over F_p, or None if a denominator vanishes at y0.

    Never exceeds the exact rank of M over F_p(y).
    """
    try:
        E = M.evaluate(y0)
    except ZeroDivisionError:
        return None
    return rank_mod(E.data, M.field.p)


def rank(M: ExactMatrix) -> int:
    """Exact rank over the matrix's field.

    Over F_p(y) an evaluation that already attains min(rows, cols) is a
    certificate (specialization never raises rank); otherwise the
    fraction-free elimination decides.
    """
    m, n = M.shape
    if m == 0 or n == 0:
        return 0
    f = M.field
    if isinstance(f, PrimeField):
        return rank_mod(M.data, f.p)
    full = min(m, n)
    for y0 in _evaluation_points(f.p, 2):
        r = evaluated_rank(M, y0)
        if r == full:
            return r
    data = M.data if m <= n else tuple(zip(*M.data))
    A = [_clear_row(row, f.p)[0] for row in data]
    return _bareiss(A, f.p)[0]


def det(M: ExactMatrix):
    m, n = M.shape
    if m != n:
        raise DimensionMismatch("determinant of a non-square matrix")
    f = M.field
    if m == 0:
        return f.one
    if isinstance(f, PrimeField):
        return _det_mod([list(r) for r in M.data], f.p)
    cleared = [_clear_row(row, f.p) for row in M.data]
    A = [c[0] for c in cleared]
    scale = UniPoly.one(f.p)
    for _, L in cleared:
        scale = scale * L
    _, d = _bareiss(A, f.p, square=True)
    return RatFunc(d, scale)


def _rref_generic(f: Field, rows: list[list]) -> tuple[list[list], list[int]]:
    A = [list(r) for r in rows]
    m = len(A)
    n = len(A[0]) if m else 0
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        piv = next((i for i in range(r, m) if not f.is_zero(A[i][c])), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = f.inv(A[r][c])
        A[r] = [f.mul(x, inv) for x in A[r]]
        pr = A[r]
        for i in range(m):
            if i != r and not f.is_zero(A[i][c]):
                a = A[i][c]
                A[i] = [x if f.is_zero(y) else f.sub(x, f.mul(a, y)) for x, y in zip(A[i], pr)]
        pivots.append(c)
        r += 1
    return A, pivots


def rref(M: ExactMatrix) -> tuple[list[list], list[int]]:
    f = M.field
    if isinstance(f, PrimeField):
        return _rref_mod([list(r) for r in M.data], f.p)
    return _rref_generic(f, [list(r) for r in M.data])


def inverse(M: ExactMatrix) -> ExactMatrix:
    """Inverse; rows of the result are indexed by M's columns and vice versa."""
    m, n = M.shape
    if m != n:
        raise DimensionMismatch("inverse of a non-square matrix")
    f = M.field
    aug = [list(r) + [f.one if i == j else f.zero for j in range(n)] for i, r in enumerate(M.data)]
    if isinstance(f, PrimeField):
        R, piv = _rref_mod(aug, f.p)
    else:
        R, piv = _rref_generic(f, aug)
    if piv[:n] != list(range(n)):
        raise SingularMatrix("matrix is not invertible")
    data = tuple(tuple(r[n:]) for r in R)
    return ExactMatrix._raw(f, data, M.cols, M.rows)


def nullspace_basis(M: ExactMatrix) -> list[tuple]:
    """Basis of {v : M v = 0}, each vector indexed like M's columns."""
    f = M.field
    n = len(M.cols)
    R, piv = rref(M)
    free = [c for c in range(n) if c not in set(piv)]
    basis = []
    for fc in free:
        v = [f.zero] * n
        v[fc] = f.one
        for i, pc in enumerate(piv):
            v[pc] = f.neg(R[i][fc])
        basis.append(tuple(v))
    return basis


def solve(M: ExactMatrix, b: Sequence):
    """Some x with M x = b, or None if the system is inconsistent."""
    f = M.field
    aug = [list(r) + [f(bi)] for r, bi in zip(M.data, b)]
    if isinstance(f, PrimeField):
        R, piv = _rref_mod(aug, f.p)
    else:
        R, piv = _rref_generic(f, aug)
    n = len(M.cols)
    if n in piv:
        return None
    x = [f.zero] * n
    for i, pc in enumerate(piv):
        x[pc] = R[i][n]
    return tuple(x)


# --- tensor constructions ---------------------------------------------------


def kron(M1: ExactMatrix, M2: ExactMatrix) -> ExactMatrix:
    """Kronecker product; rows/cols are labelled by pairs (i1, i2)."""
    f = _join(M1.field, M2.field)
    A, B = M1.promote(f), M2.promote(f)
    rows = tuple((r1, r2) for r1 in A.rows for r2 in B.rows)
    cols = tuple((c1, c2) for c1 in A.cols for c2 in B.cols)
    data = tuple(
        tuple(f.mul(a, b) for a in ra for b in rb)
        for ra in A.data for rb in B.data
    )
    return ExactMatrix._raw(f, data, rows, cols)


def kron_all(mats: Sequence[ExactMatrix]) -> ExactMatrix:
    """Kronecker product of several matrices, labelled by flat tuples."""
    if not mats:
        raise DimensionMismatch("empty Kronecker product")
    f = mats[0].field
    for M in mats[1:]:
        f = _join(f, M.field)
    mats = [M.promote(f) for M in mats]
    rows = tuple(product(*(M.rows for M in mats)))
    cols = tuple(product(*(M.cols for M in mats)))
    rpos = [range(len(M.rows)) for M in mats]
    cpos = [range(len(M.cols)) for M in mats]
    data = []
    for ri in product(*rpos):
        row = []
        for ci in product(*cpos):
            acc = f.one
            for M, i, j in zip(mats, ri, ci):
                acc = f.mul(acc, M.data[i][j])
            row.append(acc)
        data.append(tuple(row))
    return ExactMatrix._raw(f, tuple(data), rows, cols)


def had_tensor(M1: ExactMatrix, M2: ExactMatrix) -> ExactMatrix:
    """Hadamard-tensor: column (j1, j2) is the coordinatewise product of M1[:, j1] and M2[:, j2]."""
    if len(M1.rows) != len(M2.rows):
        raise DimensionMismatch("Hadamard-tensor needs equal row counts")
    f = _join(M1.field, M2.field)
    A, B = M1.promote(f), M2.promote(f)
    cols = tuple((c1, c2) for c1 in A.cols for c2 in B.cols)
    data = tuple(
        tuple(f.mul(a, b) for a in ra for b in rb)
        for ra, rb in zip(A.data, B.data)
    )
    return ExactMatrix._raw(f, data, A.rows, cols)


def is_strongly_full(M: ExactMatrix) -> bool:
    """|rows| = |cols| - 1 and deleting any one column leaves an invertible matrix.

    Equivalent test: rank |rows| and a kernel vector with no zero entry.
    """
    m, n = M.shape
    if n != m + 1:
        return False
    if rank(M) != m:
        return False
    (v,) = nullspace_basis(M)
    f = M.field
    return all(not f.is_zero(x) for x in v)


def binom_int(v: Sequence[int], u: Sequence[int]) -> int:
    """prod_i C(v_i, u_i) as an integer (0 when some u_i > v_i)."""
    out = 1
    for a, b in zip(v, u):
        if b > a or b < 0:
            return 0
        out *= math.comb(a, b)
    return out


def binomial_vec(v: Sequence[int], u: Sequence[int], p: int = DEFAULT_PRIME) -> PrimeFieldElement:
    if len(v) != len(u):
        raise DimensionMismatch("exponent vectors of different length")
    return PrimeFieldElement(binom_int(v, u), p)
