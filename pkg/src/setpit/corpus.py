"""Random circuit families, including identities that are zero by construction."""

from __future__ import annotations

import random
from typing import Sequence

from .formula import (
    DiagonalCircuit,
    DualRepresentation,
    Leaf,
    Node,
    Product,
    SetDepthFormula,
    Sum,
)
from .hadamard import Partition

COEF_RANGE = 5


def _coef(rng: random.Random, nonzero: bool = True) -> int:
    c = rng.randint(-COEF_RANGE, COEF_RANGE)
    while nonzero and c == 0:
        c = rng.randint(-COEF_RANGE, COEF_RANGE)
    return c


def _split(items: Sequence[int], parts: int, rng: random.Random) -> list[list[int]]:
    """Split items into min(parts, len(items)) nonempty groups."""
    items = list(items)
    rng.shuffle(items)
    parts = max(1, min(parts, len(items)))
    cuts = sorted(rng.sample(range(1, len(items)), parts - 1)) if parts > 1 else []
    groups, prev = [], 0
    for c in cuts + [len(items)]:
        groups.append(sorted(items[prev:c]))
        prev = c
    return groups


def random_partition(vars_: Sequence[int], parts: int, rng: random.Random) -> Partition:
    return Partition.of(_split(vars_, parts, rng))


def random_partitions(n: int, layers: int, d: int, rng: random.Random, exact: bool = False) -> tuple[Partition, ...]:
    """Layer partitions where each deeper layer refines every block of the previous one into <= d pieces."""
    out = []
    blocks = [list(range(1, n + 1))]
    for _ in range(layers):
        nxt = []
        for b in blocks:
            nxt.extend(_split(b, d if exact else rng.randint(1, d), rng))
        out.append(Partition.of(nxt))
        blocks = nxt
    return tuple(out)


def random_linear(vars_: Sequence[int], rng: random.Random, terms: int | None = None, constant: bool = True) -> Leaf:
    pool = list(vars_) + ([0] if constant else [])
    if not pool:
        return Leaf.const(_coef(rng))
    t = len(pool) if terms is None else max(1, min(terms, len(pool)))
    return Leaf.linear({v: _coef(rng) for v in rng.sample(pool, t)})


def random_sparse(vars_: Sequence[int], lam: int, deg: int, rng: random.Random) -> Leaf:
    vars_ = list(vars_)
    terms = []
    for _ in range(rng.randint(1, lam)):
        m: dict[int, int] = {}
        for _ in range(rng.randint(0, deg) if vars_ else 0):
            v = rng.choice(vars_)
            m[v] = m.get(v, 0) + 1
        terms.append((m, _coef(rng)))
    leaf = Leaf.sparse(terms)
    return leaf if leaf.terms else Leaf.const(1)


def _random_node(partitions, allowed, k, d, lam, odd, rng, full) -> Node:
    if not partitions:
        if odd:
            return random_linear(sorted(allowed), rng, terms=None if full else rng.randint(1, lam))
        return random_sparse(sorted(allowed), lam, d, rng)
    blocks = [b & allowed for b in partitions[0].blocks if b & allowed]
    terms = []
    for _ in range(k if full else rng.randint(1, k)):
        chosen = blocks if full else rng.sample(blocks, rng.randint(1, min(d, len(blocks))))
        factors = tuple(_random_node(partitions[1:], b, k, d, lam, odd, rng, full) for b in chosen)
        terms.append((_coef(rng), Product(factors)))
    return Sum(tuple(terms))


def random_set_depth(
    n: int, depth: int, k: int, d: int, lam: int, rng: random.Random, full: bool = False
) -> SetDepthFormula:
    """Random set-depth formula; `full` makes every gate use all blocks and exactly k terms."""
    H = depth // 2
    layers = H if depth % 2 else H - 1
    partitions = random_partitions(n, layers, d, rng, exact=full)
    root = _random_node(partitions, frozenset(range(1, n + 1)), k, d, lam, depth % 2 == 1, rng, full)
    if layers == 0:
        root = random_sparse(range(1, n + 1), lam, d, rng)
    return SetDepthFormula(n, depth, root, partitions)


def random_setml3(n: int, k: int, d: int, rng: random.Random) -> SetDepthFormula:
    """Set-multilinear depth-3: every product multiplies one linear form per block."""
    partitions = (random_partition(range(1, n + 1), d, rng),)
    blocks = partitions[0].blocks
    terms = tuple(
        (_coef(rng), Product(tuple(random_linear(sorted(b), rng) for b in blocks))) for _ in range(rng.randint(1, k))
    )
    return SetDepthFormula(n, 3, Sum(terms), partitions)


# --- zero constructions ----------------------------------------------------------


def scale_node(node: Node, c: int) -> Node:
    if isinstance(node, Leaf):
        return Leaf(tuple((m, a * c) for m, a in node.terms))
    return Sum(tuple((w * c, prod) for w, prod in node.terms))


def _replace(prod: Product, j: int, node: Node) -> Product:
    fs = list(prod.factors)
    fs[j] = node
    return Product(tuple(fs))


def _rescaled_pair(prod: Product, rng: random.Random) -> list[tuple[int, Product]]:
    """c * (lam a) * G and -(c lam) * a * G."""
    c, lam = _coef(rng), _coef(rng)
    j = rng.randrange(len(prod.factors))
    return [(c, _replace(prod, j, scale_node(prod.factors[j], lam))), (-c * lam, prod)]


def zero_variant(f: SetDepthFormula, rng: random.Random, k: int) -> SetDepthFormula:
    """A formula of the same shape and partitions that is identically zero, with top fanin <= k."""
    if not isinstance(f.root, Sum):
        return SetDepthFormula(f.n, f.depth, Leaf.const(0), f.partitions)
    prods = [p for _, p in f.root.terms]
    blocks = f.partitions[0].blocks
    terms: list[tuple[int, Product]] = []
    if k == 1:
        terms = [(0, prods[0])]
    while len(terms) + 2 <= k:
        prod = rng.choice(prods)
        if k - len(terms) >= 4 and len(prods) >= 2 and rng.random() < 0.3:
            terms += telescoping(rng.sample(prods, 2), rng).terms
            continue
        if f.depth % 2 and k - len(terms) >= 3 and rng.random() < 0.5:
            split = _bilinear_split(prod, blocks, rng)
            if split:
                terms += split
                continue
        terms += _rescaled_pair(prod, rng)
        if rng.random() < 0.4:
            break
    rng.shuffle(terms)
    return SetDepthFormula(f.n, f.depth, Sum(tuple(terms)), f.partitions)


def _bilinear_split(prod: Product, blocks, rng: random.Random):
    """(a + b) G - a G - b G for a linear leaf a and a fresh linear b on a's block."""
    j = rng.randrange(len(prod.factors))
    a = prod.factors[j]
    if not isinstance(a, Leaf) or not a.is_linear() or not a.variables:
        return None
    block = next(bl for bl in blocks if a.variables <= bl)
    b = random_linear(sorted(block), rng)
    ab = Leaf.sparse([*a.terms, *b.terms])
    c = _coef(rng)
    return [(c, _replace(prod, j, ab)), (-c, prod), (-c, _replace(prod, j, b))]


def telescoping(prods: Sequence[Product], rng: random.Random) -> Sum:
    """sum_i c (G_i - G_{i+1}) + c (G_m - G_1) written out as 2m terms."""
    c = _coef(rng)
    m = len(prods)
    terms = []
    for i in range(m):
        terms += [(c, prods[i]), (-c, prods[(i + 1) % m])]
    return Sum(tuple(terms))


def random_diagonal(n: int, k: int, d: int, rng: random.Random) -> DiagonalCircuit:
    forms = tuple((_coef(rng), random_linear(range(1, n + 1), rng)) for _ in range(rng.randint(1, k)))
    return DiagonalCircuit(n, d, forms)


def zero_diagonal(n: int, k: int, d: int, rng: random.Random) -> DiagonalCircuit:
    """w (lam f)^d - (w lam^d) f^d, repeated; weight 0 when k = 1."""
    if k == 1:
        return DiagonalCircuit(n, d, ((0, random_linear(range(1, n + 1), rng)),))
    forms = []
    for _ in range(rng.randint(1, k // 2)):
        f = random_linear(range(1, n + 1), rng)
        w, lam = _coef(rng), _coef(rng)
        forms += [(w, Leaf(tuple((m, a * lam) for m, a in f.terms))), (-w * lam**d, f)]
    rng.shuffle(forms)
    return DiagonalCircuit(n, d, tuple(forms))


def random_dual(n: int, k: int, deg: int, rng: random.Random) -> DualRepresentation:
    prods = []
    for _ in range(rng.randint(1, k)):
        vs = sorted(rng.sample(range(1, n + 1), rng.randint(1, n)))
        gs = tuple((v, tuple(_coef(rng, nonzero=False) for _ in range(deg)) + (_coef(rng),)) for v in vs)
        prods.append((_coef(rng), gs))
    return DualRepresentation(n, tuple(prods))


# --- named instances ----------------------------------------------------------------


def zero_identity() -> SetDepthFormula:
    """x1 x3 - x1 x3."""
    g = Product((Leaf.linear({1: 1}), Leaf.linear({3: 1})))
    return SetDepthFormula(4, 3, Sum(((1, g), (-1, g))), (Partition.of([[1, 2], [3, 4]]),))


def monomial_x1x2x3() -> SetDepthFormula:
    g = Product((Leaf.linear({1: 1}), Leaf.linear({2: 1}), Leaf.linear({3: 1})))
    return SetDepthFormula(3, 3, Sum(((1, g),)), (Partition.of([[1], [2], [3]]),))


def family(name: str, rng: random.Random, zero: bool = False, **kw):
    """One instance of a named family: setml3, setdepth4 or diagonal."""
    if name == "setml3":
        n, k, d = kw.get("n", rng.randint(2, 8)), kw.get("k", rng.randint(1, 4)), kw.get("d", 0)
        d = d or rng.randint(1, min(4, n))
        f = random_setml3(n, k, d, rng)
        return zero_variant(f, rng, k) if zero else f
    if name == "setdepth4":
        n, k, d, lam = kw.get("n", rng.randint(2, 6)), kw.get("k", rng.randint(1, 2)), kw.get("d", 2), kw.get("lam", 3)
        f = random_set_depth(n, 4, k, d, lam, rng)
        return zero_variant(f, rng, k) if zero else f
    if name == "diagonal":
        n, k, d = kw.get("n", rng.randint(1, 6)), kw.get("k", rng.randint(1, 8)), kw.get("d", rng.randint(1, 6))
        return zero_diagonal(n, k, d, rng) if zero else random_diagonal(n, k, d, rng)
    raise ValueError(f"unknown family {name!r}")
