"""Circuit IR: set-depth formulas, diagonal circuits and dual (sum of products of
univariates) representations.

Coefficients are stored as plain integers and reduced modulo the prime only at
evaluation time, so documents are independent of the field.  Variables are
1-based throughout the IR and the JSON format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable, Iterable, Mapping, Sequence, Union

import jsonschema
import numpy as np

from .algebra import DEFAULT_PRIME, PrimeField, PrimeFieldElement
from .errors import DimensionMismatch, NotNormalized, PartitionViolation, SchemaError
from .hadamard import HadamardPoly, HadamardVec, Partition

FORMAT_VERSION = 1

Monomial = tuple[tuple[int, int], ...]  # ((var, power), ...) sorted by var


def _mono_key(m: Monomial) -> tuple:
    return (sum(k for _, k in m), tuple((-v, k) for v, k in m))


def _monomial(spec: Mapping[int, int] | Iterable[tuple[int, int]]) -> Monomial:
    items = spec.items() if isinstance(spec, Mapping) else spec
    acc: dict[int, int] = {}
    for v, k in items:
        v, k = int(v), int(k)
        if v < 1 or k < 0:
            raise ValueError(f"bad monomial entry x{v}^{k}")
        if k:
            acc[v] = acc.get(v, 0) + k
    return tuple(sorted(acc.items()))


# --- nodes -------------------------------------------------------------------


@dataclass(frozen=True)
class Leaf:
    """A sparse polynomial sum c_m * m over monomials m; linear when every m has degree <= 1."""

    terms: tuple[tuple[Monomial, int], ...]

    @classmethod
    def sparse(cls, terms: Iterable[tuple[Mapping[int, int] | Monomial, int]]) -> Leaf:
        acc: dict[Monomial, int] = {}
        for m, c in terms:
            m = _monomial(m)
            acc[m] = acc.get(m, 0) + int(c)
        return cls(tuple((m, acc[m]) for m in sorted(acc, key=_mono_key) if acc[m]))

    @classmethod
    def linear(cls, coeffs: Mapping[int, int]) -> Leaf:
        """coeffs maps a variable to its coefficient; key 0 is the constant term."""
        return cls.sparse(((() if int(v) == 0 else ((int(v), 1),)), c) for v, c in coeffs.items())

    @classmethod
    def const(cls, c: int) -> Leaf:
        return cls.sparse([((), c)])

    @property
    def variables(self) -> frozenset[int]:
        return frozenset(v for m, _ in self.terms for v, _ in m)

    @property
    def sparsity(self) -> int:
        return len(self.terms)

    @property
    def degree(self) -> int:
        return max((sum(k for _, k in m) for m, _ in self.terms), default=0)

    def is_linear(self) -> bool:
        return self.degree <= 1


@dataclass(frozen=True)
class Product:
    factors: tuple[Node, ...]


@dataclass(frozen=True)
class Sum:
    terms: tuple[tuple[int, Product], ...]


Node = Union[Sum, Leaf]


@lru_cache(maxsize=None)
def node_variables(node: Node) -> frozenset[int]:
    if isinstance(node, Leaf):
        return node.variables
    out: frozenset[int] = frozenset()
    for _, prod in node.terms:
        for f in prod.factors:
            out |= node_variables(f)
    return out


def _product_layers(node: Node) -> int:
    """Number of product layers along the first root-to-leaf path."""
    h = 0
    while isinstance(node, Sum):
        if not node.terms or not node.terms[0][1].factors:
            break
        node = node.terms[0][1].factors[0]
        h += 1
    return h


def _check_height(node: Node, height: int, path: str) -> None:
    if height == 0:
        if not isinstance(node, Leaf):
            raise SchemaError(path, "expected a leaf at the bottom layer")
        return
    if not isinstance(node, Sum):
        raise SchemaError(path, f"expected a sum gate with {height} product layers below")
    for i, (_, prod) in enumerate(node.terms):
        if not prod.factors:
            raise SchemaError(f"{path}/sum/{i}", "empty product")
        for j, f in enumerate(prod.factors):
            _check_height(f, height - 1, f"{path}/sum/{i}/product/{j}")


def _relevant_blocks(P: Partition, allowed: frozenset[int] | None) -> list[frozenset[int]]:
    """Nonempty blocks of P restricted to `allowed`, in partition order."""
    out = []
    for b in P.blocks:
        r = b if allowed is None else b & allowed
        if r:
            out.append(r)
    return out


def _check_node(node: Node, partitions: Sequence[Partition], allowed: frozenset[int] | None, path: str) -> None:
    if allowed is not None and not node_variables(node) <= allowed:
        extra = sorted(node_variables(node) - allowed)
        raise PartitionViolation(f"{path}: variables {extra} lie outside the block {sorted(allowed)}")
    if isinstance(node, Leaf):
        return
    if not partitions:
        raise PartitionViolation(f"{path}: no partition declared for this product layer")
    blocks = _relevant_blocks(partitions[0], allowed)
    for i, (_, prod) in enumerate(node.terms):
        used: dict[int, int] = {}
        for j, f in enumerate(prod.factors):
            here = f"{path}/sum/{i}/product/{j}"
            vs = node_variables(f)
            if not vs:
                _check_node(f, partitions[1:], frozenset(), here)
                continue
            owners = {b for b, blk in enumerate(blocks) if blk & vs}
            if len(owners) != 1 or not vs <= blocks[next(iter(owners))]:
                raise PartitionViolation(
                    f"{here}: factor on variables {sorted(vs)} is not inside one block of the layer partition"
                )
            b = owners.pop()
            if b in used:
                raise PartitionViolation(
                    f"{here}: factors {used[b]} and {j} of the same product share block {sorted(blocks[b])}"
                )
            used[b] = j
            _check_node(f, partitions[1:], blocks[b], here)


# --- circuits ----------------------------------------------------------------


@dataclass(frozen=True)
class ClassParams:
    n: int
    k: int
    d: int
    lam: int
    H: int
    Delta: int
    s: int

    def __post_init__(self):
        if self.Delta not in (2 * self.H, 2 * self.H + 1):
            raise ValueError(f"depth {self.Delta} does not match height {self.H}")
        if min(self.n, self.k, self.d, self.lam, self.H) < 1:
            raise ValueError("class parameters must be positive")
        if max(self.k, self.d, self.lam) > self.s:
            raise ValueError("size bound smaller than a fanin")

    @property
    def var_degree(self) -> int:
        """Per-variable degree bound of every formula in the class."""
        return 1 if self.Delta % 2 else self.d

    @property
    def total_degree(self) -> int:
        return self.d ** self.H

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "d": self.d, "lambda": self.lam, "H": self.H, "depth": self.Delta, "s": self.s}

    @classmethod
    def from_json(cls, doc: Mapping) -> ClassParams:
        try:
            H = int(doc["H"]) if "H" in doc else int(doc["depth"]) // 2
            Delta = int(doc.get("depth", 2 * H + 1))
            k, d, lam = int(doc["k"]), int(doc["d"]), int(doc.get("lambda", 1))
            s = int(doc.get("s", max(k, d, lam)))
            return cls(int(doc["n"]), k, d, lam, H, Delta, s)
        except KeyError as exc:
            raise SchemaError(f"/{exc.args[0]}", "missing class parameter") from None
        except (TypeError, ValueError) as exc:
            raise SchemaError("/", str(exc)) from None


@dataclass(frozen=True)
class SetDepthFormula:
    n: int
    depth: int
    root: Node
    partitions: tuple[Partition, ...]

    def __post_init__(self):
        if self.depth < 2:
            raise SchemaError("/depth", "depth must be at least 2")
        if len(self.partitions) != self.product_layers:
            raise SchemaError(
                "/partitions", f"depth {self.depth} needs {self.product_layers} partitions, got {len(self.partitions)}"
            )
        _check_height(self.root, self.product_layers, "/root")
        if self.depth % 2:
            for leaf in _leaves(self.root):
                if not leaf.is_linear():
                    raise SchemaError("/root", "odd depth requires linear leaves")
        if node_variables(self.root) and max(node_variables(self.root)) > self.n:
            raise SchemaError("/n", f"variable x{max(node_variables(self.root))} exceeds n = {self.n}")

    @property
    def H(self) -> int:
        return self.depth // 2

    @property
    def product_layers(self) -> int:
        return self.H if self.depth % 2 else self.H - 1

    @property
    def params(self) -> ClassParams:
        return class_params(self)


@dataclass(frozen=True)
class DiagonalCircuit:
    """sum_i w_i * f_i^power for affine forms f_i."""

    n: int
    power: int
    forms: tuple[tuple[int, Leaf], ...]

    def __post_init__(self):
        for i, (_, f) in enumerate(self.forms):
            if not f.is_linear():
                raise SchemaError(f"/forms/{i}", "diagonal forms must be affine")
            if f.variables and max(f.variables) > self.n:
                raise SchemaError(f"/forms/{i}", "variable index exceeds n")

    @property
    def k(self) -> int:
        return len(self.forms)


@dataclass(frozen=True)
class DualRepresentation:
    """sum_i w_i * prod_j g_ij(x_j) with univariate g_ij given by coefficient lists."""

    n: int
    products: tuple[tuple[int, tuple[tuple[int, tuple[int, ...]], ...]], ...]

    def __post_init__(self):
        for i, (_, gs) in enumerate(self.products):
            seen = set()
            for v, _ in gs:
                if v in seen or not 1 <= v <= self.n:
                    raise SchemaError(f"/products/{i}", f"bad or repeated variable {v}")
                seen.add(v)

    @property
    def k(self) -> int:
        return len(self.products)

    @property
    def degree(self) -> int:
        return max((len(c) - 1 for _, gs in self.products for _, c in gs), default=0)


Circuit = Union[SetDepthFormula, DiagonalCircuit, DualRepresentation]


def _leaves(node: Node):
    if isinstance(node, Leaf):
        yield node
        return
    for _, prod in node.terms:
        for f in prod.factors:
            yield from _leaves(f)


def _walk(node: Node):
    yield node
    if isinstance(node, Sum):
        for _, prod in node.terms:
            for f in prod.factors:
                yield from _walk(f)


def _positions_needed(node: Node, partitions: Sequence[Partition], allowed: frozenset[int] | None) -> int:
    """Largest number of factor slots any gate needs once factors are aligned to blocks."""
    if isinstance(node, Leaf):
        return 0
    blocks = _relevant_blocks(partitions[0], allowed)
    need = 0
    for _, prod in node.terms:
        nconst = sum(1 for f in prod.factors if not node_variables(f))
        free = len(blocks) - (len(prod.factors) - nconst)
        need = max(need, len(blocks) + max(0, nconst - free), len(prod.factors))
        for f in prod.factors:
            vs = node_variables(f)
            sub = next((b for b in blocks if vs and vs <= b), frozenset())
            need = max(need, _positions_needed(f, partitions[1:], sub))
    return need


def class_params(f: SetDepthFormula) -> ClassParams:
    sums = [g for g in _walk(f.root) if isinstance(g, Sum)]
    prods = [p for g in sums for _, p in g.terms]
    leaves = list(_leaves(f.root))
    k = max((len(g.terms) for g in sums), default=1)
    d = max((len(p.factors) for p in prods), default=1)
    d = max(d, _positions_needed(f.root, f.partitions, None))
    if f.depth % 2 == 0:
        d = max([d] + [lf.degree for lf in leaves])
    lam = max([1] + [lf.sparsity for lf in leaves])
    s = len(sums) + len(prods) + sum(1 + sum(1 + sum(p for _, p in m) for m, _ in lf.terms) for lf in leaves)
    return ClassParams(f.n, max(k, 1), max(d, 1), lam, f.H, f.depth, max(s, k, d, lam))


def validate_partitions(f: SetDepthFormula | HadamardFormula) -> None:
    """Raise PartitionViolation unless every product gate multiplies factors living
    in pairwise distinct blocks of its layer partition."""
    if isinstance(f, SetDepthFormula):
        _check_node(f.root, f.partitions, None, "/root")
        return
    for i, c in enumerate(f.coords):
        _check_node(c, f.partitions, f.variables, f"/coords/{i}")


# --- evaluation ----------------------------------------------------------------


def _eval_leaf(leaf: Leaf, pt: Sequence[int], p: int) -> int:
    acc = 0
    for m, c in leaf.terms:
        t = c
        for v, k in m:
            t = t * (pt[v - 1] if k == 1 else pow(pt[v - 1], k, p)) % p
        acc += t
    return acc % p


def _eval_node(node: Node, pt: Sequence[int], p: int) -> int:
    if isinstance(node, Leaf):
        return _eval_leaf(node, pt, p)
    acc = 0
    for w, prod in node.terms:
        if not w:
            continue
        t = w
        for f in prod.factors:
            t = t * _eval_node(f, pt, p) % p
            if not t:
                break
        acc += t
    return acc % p


def _point(point: Sequence, n: int, p: int) -> list[int]:
    if len(point) != n:
        raise DimensionMismatch(f"point of length {len(point)} for {n} variables")
    return [int(a) % p for a in point]


def evaluate_int(c: Circuit | Node, point: Sequence, p: int = DEFAULT_PRIME) -> int:
    if isinstance(c, SetDepthFormula):
        return _eval_node(c.root, _point(point, c.n, p), p)
    if isinstance(c, DiagonalCircuit):
        pt = _point(point, c.n, p)
        return sum(w * pow(_eval_leaf(f, pt, p), c.power, p) for w, f in c.forms) % p
    if isinstance(c, DualRepresentation):
        pt = _point(point, c.n, p)
        acc = 0
        for w, gs in c.products:
            t = w % p
            for v, coeffs in gs:
                x, g = pt[v - 1], 0
                for a in reversed(coeffs):
                    g = (g * x + a) % p
                t = t * g % p
            acc += t
        return acc % p
    if isinstance(c, (Sum, Leaf)):
        return _eval_node(c, [int(a) % p for a in point], p)
    raise TypeError(f"cannot evaluate {type(c).__name__}")


def evaluate(c: Circuit | Node, point: Sequence, p: int = DEFAULT_PRIME) -> PrimeFieldElement:
    return PrimeFieldElement(evaluate_int(c, point, p), p)


class _ObjectOps:
    """Batched arithmetic on numpy object arrays of Python ints (any prime)."""

    def __init__(self, p: int):
        self.p = p

    def array(self, values):
        out = np.empty(len(values), dtype=object)
        out[:] = [int(v) % self.p for v in values]
        return out

    def full(self, size: int, c: int):
        return np.full(size, c % self.p, dtype=object)

    def add(self, a, b):
        return (a + b) % self.p

    def mul(self, a, b):
        return a * b % self.p

    def to_list(self, a) -> list[int]:
        return [int(v) for v in a]


class _Mersenne61Ops:
    """uint64 arithmetic mod 2^61 - 1 without overflow: 31-bit limbs and folding 2^61 = 1."""

    M = (1 << 61) - 1

    def __init__(self, p: int):
        self.p = p

    def array(self, values):
        return np.array([int(v) % self.M for v in values], dtype=np.uint64)

    def full(self, size: int, c: int):
        return np.full(size, c % self.M, dtype=np.uint64)

    def _fold(self, x):
        M = np.uint64(self.M)
        x = (x & M) + (x >> np.uint64(61))
        x = (x & M) + (x >> np.uint64(61))
        return np.where(x >= M, x - M, x)

    def add(self, a, b):
        return self._fold(a + b)

    def mul(self, a, b):
        s31, m31 = np.uint64(31), np.uint64((1 << 31) - 1)
        ah, al = a >> s31, a & m31
        bh, bl = b >> s31, b & m31
        hh = ah * bh  # < 2^60, weight 2^62 = 2
        mid = ah * bl + al * bh  # < 2^62, weight 2^31
        ll = al * bl  # < 2^62
        mid_hi, mid_lo = mid >> np.uint64(30), mid & np.uint64((1 << 30) - 1)
        x = (hh << np.uint64(1)) + mid_hi + (mid_lo << s31)
        return self._fold(self._fold(x) + ll)

    def to_list(self, a) -> list[int]:
        return [int(v) for v in a]


def _ops(p: int):
    return _Mersenne61Ops(p) if p == _Mersenne61Ops.M else _ObjectOps(p)


def _bpow(ops, col, k: int):
    out = col
    for _ in range(k - 1):
        out = ops.mul(out, col)
    return out


def _beval_leaf(ops, leaf: Leaf, cols, size: int):
    acc = ops.full(size, 0)
    for m, c in leaf.terms:
        t = ops.full(size, c)
        for v, k in m:
            t = ops.mul(t, _bpow(ops, cols[v - 1], k))
        acc = ops.add(acc, t)
    return acc


def _beval_node(ops, node: Node, cols, size: int):
    if isinstance(node, Leaf):
        return _beval_leaf(ops, node, cols, size)
    acc = ops.full(size, 0)
    for w, prod in node.terms:
        if not w % ops.p:
            continue
        t = ops.full(size, w)
        for f in prod.factors:
            t = ops.mul(t, _beval_node(ops, f, cols, size))
        acc = ops.add(acc, t)
    return acc


def evaluate_batch(c: Circuit, points: Sequence[Sequence[int]], p: int = DEFAULT_PRIME) -> list[int]:
    """Values at many points at once; agrees with evaluate_int pointwise."""
    size = len(points)
    if not size:
        return []
    ops = _ops(p)
    for pt in points:
        if len(pt) != c.n:
            raise DimensionMismatch(f"point of length {len(pt)} for {c.n} variables")
    cols = [ops.array([pt[j] for pt in points]) for j in range(c.n)]
    if isinstance(c, SetDepthFormula):
        out = _beval_node(ops, c.root, cols, size)
    elif isinstance(c, DiagonalCircuit):
        out = ops.full(size, 0)
        for w, f in c.forms:
            out = ops.add(out, ops.mul(ops.full(size, w), _bpow(ops, _beval_leaf(ops, f, cols, size), c.power)))
    elif isinstance(c, DualRepresentation):
        out = ops.full(size, 0)
        for w, gs in c.products:
            t = ops.full(size, w)
            for v, coeffs in gs:
                g = ops.full(size, 0)
                for a in reversed(coeffs):
                    g = ops.add(ops.mul(g, cols[v - 1]), ops.full(size, a))
                t = ops.mul(t, g)
            out = ops.add(out, t)
    else:
        raise TypeError(f"cannot evaluate {type(c).__name__}")
    return ops.to_list(out)


class Blackbox:
    """Evaluation access only, plus declared class parameters.

    `batch`, when present, evaluates a list of points in one call.
    """

    def __init__(self, n: int, fn: Callable[[Sequence[int]], int], p: int = DEFAULT_PRIME, params=None, batch=None):
        self.n = n
        self.p = p
        self.params = params
        self._fn = fn
        self.batch = batch

    @classmethod
    def of(cls, c: Circuit, p: int = DEFAULT_PRIME) -> Blackbox:
        params = c.params if isinstance(c, SetDepthFormula) else None
        return cls(c.n, lambda pt: evaluate_int(c, pt, p), p, params, lambda pts: evaluate_batch(c, pts, p))

    def __call__(self, point: Sequence) -> int:
        if len(point) != self.n:
            raise DimensionMismatch(f"point of length {len(point)} for a blackbox on {self.n} variables")
        return self._fn(point) % self.p


# --- fanin normalization -------------------------------------------------------


def _dummy_one(rem: int, k: int, d: int) -> Node:
    if rem == 0:
        return Leaf.const(1)
    child = _dummy_one(rem - 1, k, d)
    prod = Product((child,) * d)
    return Sum(((1, prod),) + ((0, prod),) * (k - 1))


def _normalize(node: Node, partitions, allowed, k: int, d: int) -> Node:
    if isinstance(node, Leaf):
        return node
    rem = len(partitions) - 1  # product layers below each factor
    blocks = _relevant_blocks(partitions[0], allowed)
    dummy = _dummy_one(rem, k, d)
    terms = []
    for w, prod in node.terms:
        slots: list[Node | None] = [None] * len(blocks)
        spare: list[Node] = []
        for f in prod.factors:
            vs = node_variables(f)
            j = next((j for j, b in enumerate(blocks) if vs and vs <= b), None)
            if j is None:
                spare.append(f)
            else:
                slots[j] = f
        for j in range(len(slots)):
            if slots[j] is None and spare:
                slots[j] = spare.pop(0)
        slots.extend(spare)
        slots.extend([None] * (d - len(slots)))
        if len(slots) > d:
            raise ValueError(f"product needs {len(slots)} slots but d = {d}")
        factors = []
        for j, f in enumerate(slots):
            sub = blocks[j] if j < len(blocks) else frozenset()
            factors.append(dummy if f is None else _normalize(f, partitions[1:], sub, k, d))
        terms.append((w, Product(tuple(factors))))
    pad = Product((dummy,) * d)
    terms.extend([(0, pad)] * (k - len(terms)))
    return Sum(tuple(terms))


def normalize_fanin(f: SetDepthFormula, k: int | None = None, d: int | None = None) -> SetDepthFormula:
    """Pad every sum gate above the leaves to fanin k and every product gate to fanin d.

    Factors are reordered so that slot j of every product in a gate uses the j-th
    block of the layer partition (restricted to the parent's block).
    """
    validate_partitions(f)
    prm = class_params(f)
    k = prm.k if k is None else k
    d = prm.d if d is None else d
    if k < prm.k or d < prm.d:
        raise ValueError(f"targets k={k}, d={d} are below the formula's fanins ({prm.k}, {prm.d})")
    if f.product_layers == 0:
        return f
    return SetDepthFormula(f.n, f.depth, _normalize(f.root, f.partitions, None, k, d), f.partitions)


# --- Hadamard product form --------------------------------------------------------


@dataclass(frozen=True)
class HadamardFormula:
    """kappa scalar formulas of one shape, read as a single formula over H_kappa.

    `partitions` are the partitions of the remaining product layers and
    `variables` is the block the coordinates live on (None for all of [n]).
    """

    n: int
    coords: tuple[Node, ...]
    partitions: tuple[Partition, ...]
    variables: frozenset[int] | None = None

    @classmethod
    def of(cls, f: SetDepthFormula) -> HadamardFormula:
        return cls(f.n, (f.root,), f.partitions, None)

    @property
    def kappa(self) -> int:
        return len(self.coords)


def evaluate_hadamard(f: HadamardFormula, point: Sequence, p: int = DEFAULT_PRIME) -> HadamardVec:
    pt = _point(point, f.n, p)
    return HadamardVec(tuple(_eval_node(c, pt, p) for c in f.coords), PrimeField(p))


def contract(c: HadamardVec, D: HadamardVec, kappa: int) -> HadamardVec:
    """c^T . D for c, D in H_k(R_h) with R_h = H_kappa: sum over the outer index."""
    prod = (c * D).coords
    f = c.field
    out = [f.zero] * kappa
    for idx, x in enumerate(prod):
        out[idx % kappa] = f.add(out[idx % kappa], x)
    return HadamardVec(tuple(out), f)


def to_hadamard_product(
    f: SetDepthFormula | HadamardFormula, p: int = DEFAULT_PRIME
) -> tuple[HadamardVec, list[HadamardFormula]]:
    """Split a fanin-normalized formula over R_h as c^T (f_1 * ... * f_d) over R_{h+1}.

    Coordinate p*kappa + i of the result holds term p of coordinate i.
    """
    hf = HadamardFormula.of(f) if isinstance(f, SetDepthFormula) else f
    if not hf.partitions:
        raise NotNormalized("no product layer left to split")
    if not all(isinstance(c, Sum) for c in hf.coords):
        raise NotNormalized("coordinates must be sum gates")
    k = len(hf.coords[0].terms)
    d = len(hf.coords[0].terms[0][1].factors) if k else 0
    for c in hf.coords:
        if len(c.terms) != k or any(len(prod.factors) != d for _, prod in c.terms):
            raise NotNormalized("sum and product fanins are not uniform")
    kappa = hf.kappa
    field = PrimeField(p)
    weights = HadamardVec(tuple(c.terms[t][0] % p for t in range(k) for c in hf.coords), field)
    blocks = _relevant_blocks(hf.partitions[0], hf.variables)
    factors = []
    for j in range(d):
        coords = tuple(c.terms[t][1].factors[j] for t in range(k) for c in hf.coords)
        X = blocks[j] if j < len(blocks) else frozenset()
        factors.append(HadamardFormula(hf.n, coords, hf.partitions[1:], X))
    assert len(weights.coords) == kappa * k
    return weights, factors


def diagonal_to_hadamard(c: DiagonalCircuit, p: int = DEFAULT_PRIME) -> tuple[HadamardVec, HadamardPoly, int]:
    """(w, F, d) with F the linear polynomial over H_k whose i-th coordinate is f_i."""
    field = PrimeField(p)
    k = c.k
    terms: dict[tuple, list] = {}
    for i, (_, leaf) in enumerate(c.forms):
        for m, coef in leaf.terms:
            e = [0] * c.n
            for v, kk in m:
                e[v - 1] = kk
            terms.setdefault(tuple(e), [0] * k)[i] = coef % p
    F = HadamardPoly(c.n, k, field, terms)
    w = HadamardVec(tuple(wi % p for wi, _ in c.forms), field)
    return w, F, c.power


def leaf_poly(leaf: Leaf, n: int, p: int = DEFAULT_PRIME) -> HadamardPoly:
    terms = {}
    for m, coef in leaf.terms:
        e = [0] * n
        for v, k in m:
            e[v - 1] = k
        terms[tuple(e)] = (coef % p,)
    return HadamardPoly(n, 1, PrimeField(p), terms)


# --- JSON --------------------------------------------------------------------------


@lru_cache(maxsize=1)
def load_schema() -> dict:
    text = resources.files("setpit").joinpath("formula.schema.json").read_text()
    return json.loads(text)


def _validate(doc, definition: str) -> None:
    schema = load_schema()
    sub = {"$defs": schema["$defs"], "$ref": f"#/$defs/{definition}"}
    validator = jsonschema.Draft202012Validator(sub)
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        path = "/" + "/".join(str(x) for x in err.absolute_path)
        raise SchemaError(path, err.message)


def _parse_node(doc: Mapping, path: str) -> Node:
    if "sum" in doc:
        terms = []
        for i, t in enumerate(doc["sum"]):
            facs = t.get("product", t.get("factors"))
            factors = tuple(_parse_node(x, f"{path}/sum/{i}/product/{j}") for j, x in enumerate(facs))
            terms.append((int(t.get("weight", 1)), Product(factors)))
        return Sum(tuple(terms))
    if "linear" in doc:
        return Leaf.linear({int(v): c for v, c in doc["linear"].items()})
    if "sparse" in doc:
        return Leaf.sparse(({int(v): k for v, k in t["exp"].items()}, t["coef"]) for t in doc["sparse"])
    raise SchemaError(path, "unknown node")


def _max_var(blocks_list, root: Node) -> int:
    vs = set(node_variables(root))
    for blocks in blocks_list:
        for b in blocks:
            vs.update(b)
    return max(vs, default=1)


def parse(doc: Mapping | str) -> Circuit:
    """Build a circuit from its JSON document (a dict or a JSON string)."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SchemaError("/", f"not JSON: {exc}") from None
    if not isinstance(doc, Mapping):
        raise SchemaError("/", "document must be an object")
    kind = doc.get("type")
    if kind is None and "terms" in doc:
        kind = "compact"
    if kind not in ("set-depth", "compact", "diagonal", "dual"):
        raise SchemaError("/type", f"unknown circuit type {kind!r}")
    _validate(doc, {"set-depth": "setDepth", "compact": "compact", "diagonal": "diagonal", "dual": "dual"}[kind])
    if kind == "diagonal":
        forms = tuple(
            (int(t.get("weight", 1)), Leaf.linear({int(v): c for v, c in t["linear"].items()})) for t in doc["forms"]
        )
        return DiagonalCircuit(int(doc["n"]), int(doc["power"]), forms)
    if kind == "dual":
        prods = []
        for t in doc["products"]:
            gs = tuple(sorted((int(v), tuple(int(a) for a in cs)) for v, cs in t["univariates"].items()))
            prods.append((int(t.get("weight", 1)), gs))
        return DualRepresentation(int(doc["n"]), tuple(prods))
    if kind == "compact":
        root = _parse_node({"sum": doc["terms"]}, "/terms")
        blocks_list = [doc["partition"]] if "partition" in doc else doc.get("partitions", [])
        layers = _product_layers(root)
        leaves_linear = all(lf.is_linear() for lf in _leaves(root))
        depth = int(doc.get("depth", 2 * layers + 1 if leaves_linear else 2 * layers + 2))
        if "k" in doc and any(len(g.terms) > int(doc["k"]) for g in _walk(root) if isinstance(g, Sum)):
            raise SchemaError("/k", "a sum gate has fanin above the declared k")
    else:
        root = _parse_node(doc["root"], "/root")
        blocks_list = doc.get("partitions", [])
        depth = int(doc["depth"])
    n = int(doc.get("n", _max_var(blocks_list, root)))
    try:
        partitions = tuple(Partition.of(blocks) for blocks in blocks_list)
    except ValueError as exc:
        raise SchemaError("/partitions", str(exc)) from None
    f = SetDepthFormula(n, depth, root, partitions)
    validate_partitions(f)
    return f


def _leaf_json(leaf: Leaf) -> dict:
    if leaf.is_linear():
        lin = {}
        for m, c in leaf.terms:
            lin[str(m[0][0]) if m else "0"] = c
        return {"linear": dict(sorted(lin.items(), key=lambda kv: int(kv[0])))}
    return {"sparse": [{"coef": c, "exp": {str(v): k for v, k in m}} for m, c in leaf.terms]}


def _node_json(node: Node) -> dict:
    if isinstance(node, Leaf):
        return _leaf_json(node)
    return {"sum": [{"weight": w, "product": [_node_json(f) for f in prod.factors]} for w, prod in node.terms]}


def serialize(c: Circuit) -> dict:
    if isinstance(c, SetDepthFormula):
        return {
            "version": FORMAT_VERSION,
            "type": "set-depth",
            "n": c.n,
            "depth": c.depth,
            "partitions": [[sorted(b) for b in P.blocks] for P in c.partitions],
            "root": _node_json(c.root),
        }
    if isinstance(c, DiagonalCircuit):
        return {
            "version": FORMAT_VERSION,
            "type": "diagonal",
            "n": c.n,
            "power": c.power,
            "forms": [{"weight": w, **_leaf_json(f)} for w, f in c.forms],
        }
    if isinstance(c, DualRepresentation):
        return {
            "version": FORMAT_VERSION,
            "type": "dual",
            "n": c.n,
            "products": [{"weight": w, "univariates": {str(v): list(cs) for v, cs in gs}} for w, gs in c.products],
        }
    raise TypeError(f"cannot serialize {type(c).__name__}")


def canonical(doc: Mapping | str) -> dict:
    return serialize(parse(doc))


def dumps(c: Circuit) -> str:
    return json.dumps(serialize(c), separators=(",", ":"))
