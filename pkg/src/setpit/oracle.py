"""Brute-force ground truth built on sympy, independent of the engine's own arithmetic."""

from __future__ import annotations

import csv
import io
import itertools
import random
from typing import Callable, Mapping, Sequence

import sympy
from sympy.polys.domains import GF
from sympy.polys.matrices import DomainMatrix

from .algebra import DEFAULT_PRIME, RatFunc, UniPoly
from .errors import TooLarge
from .formula import (
    Blackbox,
    DiagonalCircuit,
    DualRepresentation,
    HadamardFormula,
    Leaf,
    Node,
    SetDepthFormula,
    Sum,
    to_hadamard_product,
)
from .hadamard import HadamardPoly, Partition

MAX_TERMS = 10**6

SparsePoly = dict  # exponent tuple -> int mod p


def xs(n: int) -> list[sympy.Symbol]:
    return list(sympy.symbols(f"x1:{n + 1}")) if n else []


def _node_expr(node: Node, X) -> sympy.Expr:
    if isinstance(node, Leaf):
        acc = sympy.Integer(0)
        for mono, c in node.terms:
            t = sympy.Integer(c)
            for v, k in mono:
                t *= X[v - 1] ** k
            acc += t
        return acc
    acc = sympy.Integer(0)
    for w, prod in node.terms:
        t = sympy.Integer(w)
        for f in prod.factors:
            t *= _node_expr(f, X)
        acc += t
    return acc


def to_sympy(c, n: int | None = None) -> sympy.Expr:
    if isinstance(c, SetDepthFormula):
        return _node_expr(c.root, xs(c.n))
    if isinstance(c, DiagonalCircuit):
        X = xs(c.n)
        return sum((w * _node_expr(f, X) ** c.power for w, f in c.forms), sympy.Integer(0))
    if isinstance(c, DualRepresentation):
        X = xs(c.n)
        acc = sympy.Integer(0)
        for w, gs in c.products:
            t = sympy.Integer(w)
            for v, coeffs in gs:
                t *= sum(a * X[v - 1] ** i for i, a in enumerate(coeffs))
            acc += t
        return acc
    if isinstance(c, (Leaf, Sum)):
        if n is None:
            raise ValueError("a bare node needs n")
        return _node_expr(c, xs(n))
    raise TypeError(f"cannot expand {type(c).__name__}")


def _expr_to_sparse(expr: sympy.Expr, n: int, p: int) -> SparsePoly:
    X = xs(n)
    if n == 0:
        v = int(sympy.Integer(sympy.expand(expr))) % p
        return {(): v} if v else {}
    poly = sympy.Poly(sympy.expand(expr), *X, domain=GF(p))
    if len(poly.terms()) > MAX_TERMS:
        raise TooLarge(f"{len(poly.terms())} monomials")
    return {tuple(e): int(c) % p for e, c in poly.terms() if int(c) % p}


def _arity(c) -> int:
    return c.n


def expand(c, p: int = DEFAULT_PRIME, degree: int | None = None):
    """Exact expansion.

    Circuits give a sparse dict exponent -> coefficient, a HadamardFormula gives a
    HadamardPoly, and a Blackbox (with `degree` the per-variable bound) is
    interpolated on the tensor grid {0..degree}^n.
    """
    if isinstance(c, Blackbox):
        if degree is None:
            raise ValueError("blackbox expansion needs a per-variable degree bound")
        return interpolate(c, c.n, degree, p)
    if isinstance(c, HadamardFormula):
        X = xs(c.n)
        coords = [_expr_to_sparse(_node_expr(node, X), c.n, p) for node in c.coords]
        terms: dict = {}
        for i, d in enumerate(coords):
            for e, v in d.items():
                terms.setdefault(e, [0] * len(coords))[i] = v
        from .algebra import PrimeField

        return HadamardPoly(c.n, len(coords), PrimeField(p), terms)
    return _expr_to_sparse(to_sympy(c), _arity(c), p)


def is_zero_bruteforce(c, p: int = DEFAULT_PRIME) -> bool:
    return not expand(c, p)


def evaluate_sparse(f: SparsePoly, pt: Sequence[int], p: int = DEFAULT_PRIME) -> int:
    acc = 0
    for e, c in f.items():
        t = c
        for x, k in zip(pt, e):
            if k:
                t = t * pow(x, k, p) % p
        acc += t
    return acc % p


# --- dense interpolation ---------------------------------------------------------------


def interpolate(fn: Callable[[Sequence[int]], int], n: int, degree: int, p: int = DEFAULT_PRIME) -> SparsePoly:
    """Coefficients of a polynomial of per-variable degree <= `degree` from its values on {0..degree}^n."""
    if (degree + 1) ** n > MAX_TERMS:
        raise TooLarge(f"grid of {(degree + 1) ** n} points")
    if degree + 1 > p:
        raise TooLarge("grid does not fit in the field")
    nodes = list(range(degree + 1))
    # inverse Vandermonde on the nodes, reused along every axis
    V = sympy.Matrix([[pow(a, j, p) for j in nodes] for a in nodes])
    Vinv = [[int(x) % p for x in row] for row in (V.inv_mod(p)).tolist()]
    vals = {pt: fn(pt) % p for pt in itertools.product(nodes, repeat=n)}
    for axis in range(n):
        new = {}
        for pt in vals:
            if pt[axis] != 0:
                continue
            line = [vals[pt[:axis] + (a,) + pt[axis + 1 :]] for a in nodes]
            coeffs = [sum(Vinv[j][i] * line[i] for i in range(len(nodes))) % p for j in nodes]
            for j, c in enumerate(coeffs):
                new[pt[:axis] + (j,) + pt[axis + 1 :]] = c
        vals = new
    return {e: c for e, c in vals.items() if c}


# --- concentration ------------------------------------------------------------------------


def _weight(e, mode: str, partition: Partition | None) -> int:
    if mode == "support":
        return sum(1 for k in e if k)
    if mode == "block":
        if partition is None:
            raise ValueError("block mode needs a partition")
        return len({partition.block_of(i + 1) for i, k in enumerate(e) if k})
    raise ValueError(f"unknown mode {mode!r}")


def _to_domain(x, K, y):
    if isinstance(x, RatFunc):
        num = sum(c * y**i for i, c in enumerate(x.num.coeffs))
        den = sum(c * y**i for i, c in enumerate(x.den.coeffs))
        return K.from_sympy(num) / K.from_sympy(den)
    if isinstance(x, UniPoly):
        return K.from_sympy(sum(c * y**i for i, c in enumerate(x.coeffs)))
    if isinstance(x, sympy.Basic):
        return K.from_sympy(x)
    return K(int(x))


def _columns(f, p: int, shift=None):
    """Coefficient columns {exp: [coords]} as sympy objects, expanding from scratch."""
    y = sympy.Symbol("y")
    if isinstance(f, HadamardPoly):
        kappa, n = f.kappa, f.n
        coords = []
        for i in range(kappa):
            coords.append({e: c[i] for e, c in f.terms.items()})
    elif isinstance(f, dict):
        n = len(next(iter(f))) if f else 0
        kappa, coords = 1, [dict(f)]
    else:
        hp = expand(f, p)
        return _columns(hp if isinstance(hp, HadamardPoly) else hp, p, shift)
    if shift is None:
        return n, kappa, coords
    X = xs(n)
    out = []
    for d in coords:
        expr = sympy.Integer(0)
        for e, c in d.items():
            c = _as_expr(c, y)
            t = c
            for v, k in enumerate(e):
                t *= (X[v] + shift[v]) ** k
            expr += t
        expr = sympy.expand(expr)
        poly = sympy.Poly(expr, *X) if X else None
        out.append({tuple(m): sympy.cancel(c) for m, c in poly.terms()} if poly is not None else {(): expr})
    return n, kappa, out


def _as_expr(c, y):
    if isinstance(c, RatFunc):
        return sum(a * y**i for i, a in enumerate(c.num.coeffs)) / sum(a * y**i for i, a in enumerate(c.den.coeffs))
    if isinstance(c, UniPoly):
        return sum(a * y**i for i, a in enumerate(c.coeffs))
    return sympy.Integer(int(c))


def concentration_ranks(
    f, ell: int, mode: str = "support", partition: Partition | None = None, p: int = DEFAULT_PRIME, shift=None
) -> tuple[int, int]:
    """(rank_low, rank_full) over F_p(y), from a full expansion.

    `shift` optionally translates x_i by shift[i] (integers or sympy expressions in y)
    before the coefficients are read off.
    """
    y = sympy.Symbol("y")
    K = GF(p).frac_field(y)
    n, kappa, coords = _columns(f, p, shift)
    exps = sorted(set().union(*[set(d) for d in coords])) if coords else []
    exps = [e for e in exps if any(_nonzero(d.get(e, 0), p) for d in coords)]
    low = [e for e in exps if _weight(e, mode, partition) < ell]

    def rk(cols):
        if not cols:
            return 0
        rows = [[_to_domain(d.get(e, 0), K, y) for e in cols] for d in coords]
        return DomainMatrix(rows, (kappa, len(cols)), K).rank()

    return rk(low), rk(exps)


def _nonzero(c, p: int) -> bool:
    if isinstance(c, (RatFunc, UniPoly)):
        return not c.is_zero()
    if isinstance(c, sympy.Basic):
        num, _ = sympy.fraction(sympy.together(c))
        poly = sympy.Poly(num, sympy.Symbol("y"), modulus=p) if num.free_symbols else None
        return (not poly.is_zero) if poly is not None else int(num) % p != 0
    return int(c) % p != 0


def concentration_oracle(
    f, ell: int, mode: str = "support", partition: Partition | None = None, p: int = DEFAULT_PRIME, shift=None
) -> bool:
    r_low, r_full = concentration_ranks(f, ell, mode, partition, p, shift)
    return r_low == r_full


# --- conjecture probe ----------------------------------------------------------------------


CSV_FIELDS = ("trial", "shape", "ell", "rank_low", "rank_full", "pass")


def _hadamard_product_poly(f: SetDepthFormula, p: int) -> tuple[HadamardPoly, int]:
    from .formula import normalize_fanin

    g = normalize_fanin(f)
    _, factors = to_hadamard_product(g, p)
    D = None
    for hf in factors:
        poly = expand(hf, p)
        D = poly if D is None else D * poly
    return D, D.kappa


def conjecture_probe(
    depth: int, n: int, k: int, d: int, lam: int, trials: int, seed: int = 0, p: int = DEFAULT_PRIME, shifted: bool = True
) -> list[dict]:
    """EXPERIMENTAL: is D(x + a) l-concentrated for l = floor(log2 |D|) + 1 on random set-depth formulas?

    D is the top-layer Hadamard product of the formula and a is a random point.
    The outcome is reported, never relied on.
    """
    from .corpus import random_set_depth

    rng = random.Random(seed)
    rows = []
    for trial in range(trials):
        f = random_set_depth(n, depth, k, d, lam, rng, full=True)
        D, kappa = _hadamard_product_poly(f, p)
        ell = kappa.bit_length()
        shift = [rng.randrange(p) for _ in range(n)] if shifted else None
        r_low, r_full = concentration_ranks(D, ell, "support", None, p, shift)
        rows.append(
            {
                "trial": trial,
                "shape": f"depth={depth};n={n};k={k};d={d};lambda={lam}",
                "ell": ell,
                "rank_low": r_low,
                "rank_full": r_full,
                "pass": r_low == r_full,
            }
        )
    return rows


def probe_csv(rows: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in CSV_FIELDS})
    return buf.getvalue()
