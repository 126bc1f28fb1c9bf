"""Hadamard algebras H_k(R) and sparse polynomials with coefficients in them.

A HadamardVec is a length-k tuple of scalars multiplied coordinatewise.
A HadamardPoly maps exponent vectors to nonzero HadamardVecs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping, Sequence

from .algebra import (
    DEFAULT_PRIME,
    ExactMatrix,
    Field,
    FunctionField,
    PrimeField,
    RatFunc,
    UniPoly,
    binom_int,
    rank,
)
from .errors import DimensionMismatch, EmptyPolynomial, IndexOutsidePartition, NotAUnit

Exp = tuple[int, ...]


def grlex_key(e: Exp) -> tuple:
    return (sum(e), e)


@dataclass(frozen=True)
class HadamardVec:
    coords: tuple
    field: Field

    @property
    def kappa(self) -> int:
        return len(self.coords)

    @classmethod
    def ones(cls, kappa: int, field: Field) -> HadamardVec:
        return cls((field.one,) * kappa, field)

    @classmethod
    def zeros(cls, kappa: int, field: Field) -> HadamardVec:
        return cls((field.zero,) * kappa, field)

    @classmethod
    def of(cls, values: Iterable, field: Field) -> HadamardVec:
        return cls(tuple(field(v) for v in values), field)

    def is_zero(self) -> bool:
        return all(self.field.is_zero(x) for x in self.coords)

    def zero_coords(self) -> list[int]:
        return [i for i, x in enumerate(self.coords) if self.field.is_zero(x)]

    def is_unit(self) -> bool:
        return not self.zero_coords()

    def __add__(self, other: HadamardVec) -> HadamardVec:
        _check_kappa(self, other)
        f = self.field
        return HadamardVec(tuple(f.add(a, b) for a, b in zip(self.coords, other.coords)), f)

    def __sub__(self, other: HadamardVec) -> HadamardVec:
        _check_kappa(self, other)
        f = self.field
        return HadamardVec(tuple(f.sub(a, b) for a, b in zip(self.coords, other.coords)), f)

    def __mul__(self, other: HadamardVec) -> HadamardVec:
        return had_mul(self, other)

    def scale(self, c) -> HadamardVec:
        f = self.field
        return HadamardVec(tuple(f.mul(f(c), a) for a in self.coords), f)

    def project(self, drop: Iterable[int]) -> HadamardVec:
        drop = set(drop)
        return HadamardVec(tuple(x for i, x in enumerate(self.coords) if i not in drop), self.field)

    def evaluate(self, y0: int) -> HadamardVec:
        f = self.field
        F = PrimeField(f.p) if f.symbolic else f
        return HadamardVec(tuple(f.evaluate(x, y0) for x in self.coords), F)

    def to_ints(self) -> list[int]:
        if self.field.symbolic:
            raise TypeError("symbolic coordinates")
        return list(self.coords)


def _check_kappa(u: HadamardVec, v: HadamardVec) -> None:
    if len(u.coords) != len(v.coords):
        raise DimensionMismatch(f"Hadamard vectors of length {len(u.coords)} and {len(v.coords)}")


def _join(f1: Field, f2: Field) -> Field:
    if f1.p != f2.p:
        raise DimensionMismatch("different primes")
    return f1 if f1.symbolic else f2


def had_mul(u: HadamardVec, v: HadamardVec) -> HadamardVec:
    _check_kappa(u, v)
    f = _join(u.field, v.field)
    return HadamardVec(tuple(f.mul(f(a), f(b)) for a, b in zip(u.coords, v.coords)), f)


def had_inverse(v: HadamardVec) -> HadamardVec:
    f = v.field
    for i, x in enumerate(v.coords):
        if f.is_zero(x):
            raise NotAUnit(i)
    return HadamardVec(tuple(f.inv(x) for x in v.coords), f)


class HadamardPoly:
    """Sparse polynomial in n variables over H_kappa(field)."""

    __slots__ = ("n", "kappa", "field", "terms")

    def __init__(self, n: int, kappa: int, field: Field, terms: Mapping[Exp, Sequence] | None = None):
        self.n = n
        self.kappa = kappa
        self.field = field
        clean: dict[Exp, tuple] = {}
        for e, c in (terms or {}).items():
            e = tuple(int(x) for x in e)
            if len(e) != n or any(x < 0 for x in e):
                raise DimensionMismatch(f"exponent {e} is not a vector in N^{n}")
            if isinstance(c, HadamardVec):
                c = c.coords
            c = tuple(field(x) for x in c)
            if len(c) != kappa:
                raise DimensionMismatch(f"coefficient of length {len(c)}, expected {kappa}")
            if e in clean:
                c = tuple(field.add(a, b) for a, b in zip(clean[e], c))
            clean[e] = c
        self.terms = {
            e: clean[e]
            for e in sorted(clean, key=grlex_key)
            if not all(field.is_zero(x) for x in clean[e])
        }

    @classmethod
    def _raw(cls, n: int, kappa: int, field: Field, terms: dict[Exp, tuple]) -> HadamardPoly:
        out = object.__new__(cls)
        out.n, out.kappa, out.field = n, kappa, field
        out.terms = {e: terms[e] for e in sorted(terms, key=grlex_key)}
        return out

    @classmethod
    def constant(cls, n: int, value: HadamardVec) -> HadamardPoly:
        return cls(n, value.kappa, value.field, {(0,) * n: value.coords})

    @classmethod
    def scalar_poly(cls, n: int, field: Field, terms: Mapping[Exp, int]) -> HadamardPoly:
        """A polynomial over H_1, i.e. an ordinary polynomial."""
        return cls(n, 1, field, {e: (c,) for e, c in terms.items()})

    @classmethod
    def stack(cls, polys: Sequence[HadamardPoly]) -> HadamardPoly:
        """Coordinates of the result are the concatenated coordinates of the inputs."""
        n = polys[0].n
        field = polys[0].field
        for q in polys[1:]:
            field = _join(field, q.field)
        kappa = sum(q.kappa for q in polys)
        terms: dict[Exp, list] = {}
        offset = 0
        for q in polys:
            for e, c in q.terms.items():
                row = terms.setdefault(e, [field.zero] * kappa)
                row[offset:offset + q.kappa] = [field(x) for x in c]
            offset += q.kappa
        return cls(n, kappa, field, terms)

    def __repr__(self) -> str:
        return f"HadamardPoly(n={self.n}, kappa={self.kappa}, terms={len(self.terms)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, HadamardPoly):
            return NotImplemented
        if (self.n, self.kappa) != (other.n, other.kappa) or self.terms.keys() != other.terms.keys():
            return False
        f = _join(self.field, other.field)
        return all(
            f(a) == f(b) if f.symbolic else (a - b) % f.p == 0
            for e in self.terms
            for a, b in zip(self.terms[e], other.terms[e])
        )

    __hash__ = None

    def is_zero(self) -> bool:
        return not self.terms

    def coordinate(self, i: int) -> HadamardPoly:
        return HadamardPoly(self.n, 1, self.field, {e: (c[i],) for e, c in self.terms.items()})

    def promote(self, field: Field) -> HadamardPoly:
        if field == self.field:
            return self
        return HadamardPoly(self.n, self.kappa, field, self.terms)

    def _binary(self, other: HadamardPoly, op) -> HadamardPoly:
        if (self.n, self.kappa) != (other.n, other.kappa):
            raise DimensionMismatch("polynomials over different rings")
        f = _join(self.field, other.field)
        zero = (f.zero,) * self.kappa
        terms = {}
        for e in set(self.terms) | set(other.terms):
            a = self.terms.get(e, zero)
            b = other.terms.get(e, zero)
            terms[e] = tuple(op(f, f(x), f(y)) for x, y in zip(a, b))
        return HadamardPoly(self.n, self.kappa, f, terms)

    def __add__(self, other: HadamardPoly) -> HadamardPoly:
        return self._binary(other, lambda f, a, b: f.add(a, b))

    def __sub__(self, other: HadamardPoly) -> HadamardPoly:
        return self._binary(other, lambda f, a, b: f.sub(a, b))

    def __mul__(self, other: HadamardPoly) -> HadamardPoly:
        if (self.n, self.kappa) != (other.n, other.kappa):
            raise DimensionMismatch("polynomials over different rings")
        f = _join(self.field, other.field)
        acc: dict[Exp, list] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                prod_ = [f.mul(f(a), f(b)) for a, b in zip(c1, c2)]
                if e in acc:
                    acc[e] = [f.add(a, b) for a, b in zip(acc[e], prod_)]
                else:
                    acc[e] = prod_
        return HadamardPoly(self.n, self.kappa, f, acc)

    def had_scale(self, v: HadamardVec) -> HadamardPoly:
        """v * f, multiplying every coefficient coordinatewise by v."""
        if v.kappa != self.kappa:
            raise DimensionMismatch("scaling vector has the wrong length")
        f = _join(self.field, v.field)
        terms = {e: tuple(f.mul(f(a), f(b)) for a, b in zip(v.coords, c)) for e, c in self.terms.items()}
        return HadamardPoly(self.n, self.kappa, f, terms)

    def project(self, drop: Iterable[int]) -> HadamardPoly:
        """Forget the listed coordinates, landing in H_{kappa - |drop|}."""
        drop = set(drop)
        keep = [i for i in range(self.kappa) if i not in drop]
        terms = {e: tuple(c[i] for i in keep) for e, c in self.terms.items()}
        return HadamardPoly(self.n, len(keep), self.field, terms)

    def evaluate(self, point: Sequence) -> HadamardVec:
        """Value at a point whose entries are field elements (or coercible)."""
        if len(point) != self.n:
            raise DimensionMismatch("point has the wrong length")
        f = self.field
        if any(isinstance(a, (RatFunc, UniPoly)) for a in point) and not f.symbolic:
            f = FunctionField(f.p)
        pt = [f(a) for a in point]
        acc = [f.zero] * self.kappa
        powers: dict[tuple[int, int], object] = {}
        for e, c in self.terms.items():
            m = f.one
            for i, k in enumerate(e):
                if k:
                    key = (i, k)
                    if key not in powers:
                        powers[key] = _fpow(f, pt[i], k)
                    m = f.mul(m, powers[key])
            acc = [f.add(a, f.mul(m, f(b))) for a, b in zip(acc, c)]
        return HadamardVec(tuple(acc), f)

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degrees(self) -> tuple[int, ...]:
        """Per-variable degree."""
        out = [0] * self.n
        for e in self.terms:
            for i, k in enumerate(e):
                if k > out[i]:
                    out[i] = k
        return tuple(out)

    def variables(self) -> set[int]:
        """0-based indices of variables that occur."""
        return {i for e in self.terms for i, k in enumerate(e) if k}

    def to_json(self) -> dict:
        if self.field.symbolic:
            raise TypeError("symbolic coefficients have no JSON form")
        return {
            "n": self.n,
            "kappa": self.kappa,
            "terms": [{"exp": list(e), "coeffs": list(c)} for e, c in self.terms.items()],
        }

    @classmethod
    def from_json(cls, doc: Mapping, p: int = DEFAULT_PRIME) -> HadamardPoly:
        field = PrimeField(p)
        return cls(
            doc["n"], doc["kappa"], field,
            {tuple(t["exp"]): tuple(t["coeffs"]) for t in doc["terms"]},
        )


def _fpow(f: Field, a, k: int):
    if isinstance(f, PrimeField):
        return pow(a, k, f.p)
    return a ** k


def coeff(e: Sequence[int], f: HadamardPoly) -> HadamardVec:
    e = tuple(e)
    if len(e) != f.n:
        raise DimensionMismatch("exponent vector has the wrong length")
    c = f.terms.get(e)
    if c is None:
        return HadamardVec.zeros(f.kappa, f.field)
    return HadamardVec(c, f.field)


def support(e: Sequence[int]) -> frozenset[int]:
    return frozenset(i for i, k in enumerate(e) if k)


def support_weight(e: Sequence[int]) -> int:
    return sum(1 for k in e if k)


def support_stats(f: HadamardPoly) -> tuple[list[Exp], int, int]:
    """(S(f), s(f), mu(f)); mu is the largest support size of a monomial."""
    if f.is_zero():
        raise EmptyPolynomial("the zero polynomial has no monomial weight")
    S = list(f.terms)
    return S, len(S), max(support_weight(e) for e in S)


def cone(f_or_support: HadamardPoly | Iterable[Exp]) -> list[Exp]:
    """Downward closure of the support, in graded-lex order."""
    S = f_or_support.terms if isinstance(f_or_support, HadamardPoly) else list(f_or_support)
    out: set[Exp] = set()
    for e in S:
        if e in out:
            continue
        out.update(product(*(range(k + 1) for k in e)))
    return sorted(out, key=grlex_key)


def cone_size(f: HadamardPoly) -> int:
    size = len(cone(f))
    if not f.is_zero():
        _, _, mu = support_stats(f)
        d = f.total_degree()
        bound = math.comb(f.n + 1, mu) * math.comb(d + mu, mu)
        assert size <= bound, f"cone size {size} exceeds the bound {bound}"
    return size


def shift(f: HadamardPoly, a: Sequence) -> HadamardPoly:
    """f(x + a).  Entries of a may be F_p scalars or elements of F_p(y)."""
    if len(a) != f.n:
        raise DimensionMismatch("translation vector has the wrong length")
    field = f.field
    if any(isinstance(x, (RatFunc, UniPoly)) for x in a) and not field.symbolic:
        field = FunctionField(field.p)
    a = [field(x) for x in a]
    acc: dict[Exp, list] = {}
    pows: dict[tuple[int, int], object] = {}

    def apow(i, k):
        key = (i, k)
        if key not in pows:
            pows[key] = _fpow(field, a[i], k)
        return pows[key]

    for v, c in f.terms.items():
        c = [field(x) for x in c]
        for u in product(*(range(k + 1) for k in v)):
            b = binom_int(v, u)
            m = field(b)
            for i, (vi, ui) in enumerate(zip(v, u)):
                if vi > ui:
                    m = field.mul(m, apow(i, vi - ui))
            if field.is_zero(m):
                continue
            row = acc.get(u)
            contrib = [field.mul(m, x) for x in c]
            acc[u] = contrib if row is None else [field.add(x, y) for x, y in zip(row, contrib)]
    return HadamardPoly(f.n, f.kappa, field, acc)


@dataclass(frozen=True)
class Partition:
    blocks: tuple[frozenset[int], ...]

    @classmethod
    def of(cls, blocks: Iterable[Iterable[int]]) -> Partition:
        bl = tuple(frozenset(b) for b in blocks)
        seen: set[int] = set()
        for b in bl:
            if seen & b:
                raise ValueError("partition blocks overlap")
            seen |= b
        return cls(bl)

    def block_of(self, i: int) -> int:
        for j, b in enumerate(self.blocks):
            if i in b:
                return j
        raise IndexOutsidePartition(f"variable index {i} lies in no block")


def block_support(e: Sequence[int], P: Partition, base: int = 1) -> frozenset[int]:
    """Indices of the blocks touched by e.  Blocks hold `base`-based variable indices."""
    return frozenset(P.block_of(i + base) for i, k in enumerate(e) if k)


def block_weight(e: Sequence[int], P: Partition, base: int = 1) -> int:
    return len(block_support(e, P, base))


def coefficient_matrix(f: HadamardPoly, exps: Sequence[Exp]) -> ExactMatrix:
    """The [kappa] x exps matrix whose columns are the coefficients."""
    zero = (f.field.zero,) * f.kappa
    cols = [f.terms.get(e, zero) for e in exps]
    data = [[c[i] for c in cols] for i in range(f.kappa)]
    return ExactMatrix._raw(f.field, tuple(tuple(r) for r in data), tuple(range(f.kappa)), tuple(exps))


def is_l_concentrated(
    f: HadamardPoly, ell: int, mode: str = "support", partition: Partition | None = None
) -> tuple[bool, int, int]:
    """(concentrated, rank_low, rank_full) for the span of coefficients of weight < ell."""
    if mode == "support":
        weight = support_weight
    elif mode == "block":
        if partition is None:
            raise ValueError("block mode needs a partition")
        weight = lambda e: block_weight(e, partition)  # noqa: E731
    else:
        raise ValueError(f"unknown mode {mode!r}")
    exps = list(f.terms)
    low = [e for e in exps if weight(e) < ell]
    r_full = rank(coefficient_matrix(f, exps)) if exps else 0
    r_low = rank(coefficient_matrix(f, low)) if low else 0
    return r_low == r_full, r_low, r_full
