"""Shifts that make set-height formulas low-support concentrated.

Layer h of a shift map sends x_i to x_i + alpha_{h,i} t_h^(a_{h,i}); deeper layers
carry larger h.  Concentration over F_p(t) is certified by comparing the rank of
the unshifted coefficients (the full span is shift invariant) with the low-support
rank at random points for the t's.  With a single t the check falls back to
exact symbolic elimination when the certificate does not close.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .algebra import (
    DEFAULT_PRIME,
    ExactMatrix,
    FunctionField,
    PrimeField,
    RatFunc,
    UniPoly,
    det,
    rank_mod,
    solve,
)
from .errors import BasisMismatch, FieldTooSmall, NoCoordinateWitness, SearchExhausted
from .formula import ClassParams, HadamardFormula, Leaf, Node, SetDepthFormula, leaf_poly, normalize_fanin, to_hadamard_product
from .hadamard import (
    Exp,
    HadamardPoly,
    Partition,
    block_weight,
    grlex_key,
    is_l_concentrated,
    shift,
    support_stats,
    support_weight,
)
from .sparsepit import SparseHittingSpec, hitting_points
from .transfer import build_weight_vector, ceil_log2

# --- the l_h schedule ------------------------------------------------------------------


def ceil_log2_power(base: int, e: int) -> int:
    """ceil(e * log2(base)) exactly."""
    return ceil_log2(base**e)


@dataclass(frozen=True)
class EllSchedule:
    H: int
    k: int
    lam: int
    Delta: int
    values: tuple[int, ...]  # values[h] = l_h

    @property
    def ell(self) -> int:
        return 2 * ceil_log2_power(self.k, self.H) + 1

    def __getitem__(self, h: int) -> int:
        return self.values[h]

    def recurrence_holds(self) -> bool:
        top = self.H - 1 if self.Delta % 2 else self.H - 2
        return all(self.values[h] == (self.values[h + 1] - 1) * self.H * (self.ell - 1) + 1 for h in range(top + 1))


def ell_schedule(params: ClassParams | None = None, *, H: int | None = None, k: int | None = None,
                 lam: int | None = None, Delta: int | None = None) -> EllSchedule:
    """l_h for 0 <= h < H, plus l_H = 2 when the depth is odd."""
    if params is not None:
        H, k, lam, Delta = params.H, params.k, params.lam, params.Delta
    if min(H, k, lam) < 1:
        raise ValueError("H, k and lambda must be positive")
    L = ceil_log2_power(k, H)
    if Delta % 2:
        vals = [(2 * H * L) ** (H - h) + 1 for h in range(H)] + [2]
    else:
        top = 2 * ceil_log2_power(k * lam, H)
        vals = [(2 * H * L) ** (H - h - 1) * top + 1 for h in range(H)]
    sched = EllSchedule(H, k, lam, Delta, tuple(vals))
    assert sched.recurrence_holds()
    return sched


# --- shift maps ------------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftMap:
    """x_i -> x_i + sum_h alpha_{h,i} t_h^(a_{h,i}); layers listed from the deepest h down."""

    n: int
    layers: tuple[tuple[int, tuple[int, ...], tuple[int, ...]], ...] = ()
    projections: tuple[tuple[int, int], ...] = ()  # (h, projected Hadamard coordinate)

    @classmethod
    def identity(cls, n: int) -> ShiftMap:
        return cls(n)

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(h for h, _, _ in self.layers)

    def extend(self, h: int, alphas: Sequence[int], exps: Sequence[int]) -> ShiftMap:
        if self.layers and h >= min(self.levels):
            raise ValueError(f"layer {h} must lie below the existing layers {self.levels}")
        if len(alphas) != self.n or len(exps) != self.n or any(a < 1 for a in exps):
            raise ValueError("a layer needs n coefficients and n positive exponents")
        return ShiftMap(self.n, self.layers + ((h, tuple(alphas), tuple(exps)),), self.projections)

    def restrict(self, h: int) -> ShiftMap:
        """The layers strictly above h."""
        return ShiftMap(self.n, tuple(l for l in self.layers if l[0] > h), tuple(q for q in self.projections if q[0] > h))

    def project(self, h: int, coord: int) -> ShiftMap:
        return ShiftMap(self.n, self.layers, self.projections + ((h, coord),))

    def layer(self, h: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        for hh, a, e in self.layers:
            if hh == h:
                return a, e
        raise KeyError(h)

    def translation(self, tvals: Mapping[int, int], p: int = DEFAULT_PRIME) -> list[int]:
        out = [0] * self.n
        for h, alphas, exps in self.layers:
            t = tvals[h] % p
            for i in range(self.n):
                out[i] = (out[i] + alphas[i] * pow(t, exps[i], p)) % p
        return out

    def apply(self, x: Sequence[int], tvals: Mapping[int, int], p: int = DEFAULT_PRIME) -> tuple[int, ...]:
        return tuple((a + b) % p for a, b in zip(x, self.translation(tvals, p)))

    def symbolic_translation(self, p: int = DEFAULT_PRIME) -> list[RatFunc]:
        """Translation in F_p(y) for a map with one layer (t = y)."""
        if len(self.layers) != 1:
            raise ValueError("only single-layer maps have a univariate symbolic form")
        _, alphas, exps = self.layers[0]
        return [RatFunc(UniPoly.monomial(e, p, a % p)) for a, e in zip(alphas, exps)]

    def t_degree(self, h: int, var_degree: int) -> int:
        """Largest power of t_h in tau(f) for f of per-variable degree var_degree."""
        _, exps = self.layer(h)
        return var_degree * sum(exps)

    def to_json(self) -> dict:
        entries = [[i + 1, h, alphas[i], exps[i]] for h, alphas, exps in self.layers for i in range(self.n)]
        return {"n": self.n, "entries": entries, "projections": [list(q) for q in self.projections]}

    @classmethod
    def from_json(cls, doc: Mapping) -> ShiftMap:
        n = int(doc["n"])
        by_h: dict[int, tuple[list[int], list[int]]] = {}
        order: list[int] = []
        for i, h, a, e in doc["entries"]:
            if h not in by_h:
                by_h[h] = ([0] * n, [1] * n)
                order.append(h)
            by_h[h][0][i - 1] = a
            by_h[h][1][i - 1] = e
        layers = tuple((h, tuple(by_h[h][0]), tuple(by_h[h][1])) for h in order)
        return cls(n, layers, tuple(tuple(q) for q in doc.get("projections", ())))


# --- certified concentration ------------------------------------------------------------


@dataclass(frozen=True)
class Concentration:
    concentrated: bool
    rank_low: int
    rank_full: int
    method: str


def _weight_fn(mode: str, partition: Partition | None):
    if mode == "support":
        return support_weight
    if mode == "block":
        if partition is None:
            raise ValueError("block mode needs a partition")
        return lambda e: block_weight(e, partition)
    raise ValueError(f"unknown mode {mode!r}")


def _columns_int(f: HadamardPoly, exps) -> list[list[int]]:
    return [[int(x) for x in f.terms[e]] for e in exps]


def shifted_concentration(
    f: HadamardPoly,
    tau: ShiftMap,
    ell: int,
    mode: str = "support",
    partition: Partition | None = None,
    tries: int = 4,
    seed: int = 0,
) -> Concentration:
    """Is tau(f) ell-concentrated over H_kappa(F_p(t))?  f must have F_p coefficients."""
    p = f.field.p
    weight = _weight_fn(mode, partition)
    exps = list(f.terms)
    r_full = rank_mod(_columns_int(f, exps), p) if exps else 0
    rng = random.Random(seed)
    best = 0
    for _ in range(tries):
        tvals = {h: rng.randrange(2, p - 1) for h in tau.levels}
        g = shift(f, tau.translation(tvals, p))
        low = [e for e in g.terms if weight(e) < ell]
        r = rank_mod(_columns_int(g, low), p) if low else 0
        best = max(best, r)
        if r == r_full:
            return Concentration(True, r, r_full, "certificate")
    if len(tau.levels) == 1:
        ok, r_low, rf = is_l_concentrated(shift(f, tau.symbolic_translation(p)), ell, mode, partition)
        return Concentration(ok, r_low, rf, "symbolic")
    # several t's: a point where the low span reaches full rank never appeared
    return Concentration(False, best, r_full, "evaluation")


# --- Lemma: sparse shift ---------------------------------------------------------------------


def sparse_ell(f: HadamardPoly) -> int:
    _, s, mu = support_stats(f)
    return 1 + min(2 * ceil_log2(f.kappa * s), mu)


def univariate_cones(degrees: Sequence[int]) -> list[list[Exp]]:
    n = len(degrees)
    return [[tuple(k if j == i else 0 for j in range(n)) for k in range(d + 1)] for i, d in enumerate(degrees)]


def universal_weights(n: int, delta: int | Sequence[int], support: int | None = None,
                      max_weight: int | None = None) -> tuple[int, ...]:
    """Weights injective on {e : e_i <= delta_i, s(e) <= support}."""
    degs = [delta] * n if isinstance(delta, int) else list(delta)
    if support is not None and support >= n:
        support = None
    return build_weight_vector(univariate_cones(degs), n, subset_size=support, max_weight=max_weight)


def sparse_shift(f: HadamardPoly, delta: int | Sequence[int] | None = None, h: int = 0) -> tuple[ShiftMap, int]:
    """sigma: x_i -> x_i + t^(b_i) with sigma(f) l'-concentrated, l' = 1 + min(2 ceil(log2(kappa s)), mu).

    f is read as a product of univariates over H_{s(f)}(H_kappa); the exponents b
    keep every sum of at most l' univariate cone exponents distinct, which is what
    the product theorem needs on each l'-subset of the variables.
    """
    ellp = sparse_ell(f)
    degs = f.degrees() if delta is None else ([delta] * f.n if isinstance(delta, int) else list(delta))
    b = universal_weights(f.n, degs, ellp)
    return ShiftMap(f.n).extend(h, (1,) * f.n, b), ellp


# --- Lemma: preserve invertibility -------------------------------------------------------------


def _low_support_points(n: int, delta: int, ell: int, p: int) -> list[tuple[int, ...]]:
    """Points of the sparse grids on every X with |X| <= ell, other variables 0."""
    seen: set[tuple[int, ...]] = set()
    out = []
    for size in range(0, min(ell, n) + 1):
        for X in itertools.combinations(range(n), size):
            spec = SparseHittingSpec((delta,) * size)
            for q in hitting_points(spec, p):
                pt = [0] * n
                for v, x in zip(X, q):
                    pt[v] = x
                pt = tuple(pt)
                if pt not in seen:
                    seen.add(pt)
                    out.append(pt)
    return out


def preserve_invertibility_alpha(
    f: HadamardPoly, delta: int | None = None, ell: int | None = None, combine: bool = False
) -> tuple[int, ...]:
    """alpha in F_p^n with no zero coordinate in f(alpha).

    The low-support hitting points are tried first.  The combined map
    sigma = v * sum g_ij(u) sigma_ij then covers every coordinate at once, and a
    bivariate grid in (u, v) produces the point.  `combine` skips the first phase.
    """
    p = f.field.p
    zero = [i for i in range(f.kappa) if all(int(c[i]) % p == 0 for c in f.terms.values())]
    if zero:
        raise NoCoordinateWitness(f"coordinate {zero[0]} is the zero polynomial")
    delta = max(f.degrees(), default=0) if delta is None else delta
    ell = max((support_weight(e) for e in f.terms), default=0) + 1 if ell is None else ell  # f is (mu+1)-concentrated
    maps = _low_support_points(f.n, delta, ell, p)

    def good(pt):
        return all(int(x) % p for x in f.evaluate(list(pt)).coords)

    if not combine:
        for pt in maps:
            if good(pt):
                return pt
    r = len(maps)
    m = f.kappa * r
    if m + 1 > p:
        raise FieldTooSmall(f"{m} distinct interpolation nodes needed but p = {p}")
    # the same point list serves every coordinate, so beta_{i,j} = i*r + j
    betas = list(range(1, m + 1))

    def g_at(idx, u):
        acc = 1
        for jdx, b in enumerate(betas):
            if jdx != idx:
                acc = acc * (u - b) % p
        return acc

    # the product of all coordinates is a nonzero bivariate; hit it
    spec = SparseHittingSpec((f.kappa * delta * (m - 1), f.kappa * delta))
    for u, v in hitting_points(spec, p):
        weights = [g_at(idx, u) for idx in range(m)]
        alpha = [0] * f.n
        for idx, w in enumerate(weights):
            pt = maps[idx % r]
            for i in range(f.n):
                alpha[i] = (alpha[i] + w * pt[i]) % p
        alpha = tuple(v * a % p for a in alpha)
        if good(alpha):
            return alpha
    raise SearchExhausted("the (u, v) grid produced no point")


# --- the class-level shift ------------------------------------------------------------------


def layer_support_bounds(params: ClassParams) -> dict[int, int | None]:
    """Support bound for the weights of each layer h; None means the full box."""
    sched = ell_schedule(params)
    ell = sched.ell
    H = params.H
    out: dict[int, int | None] = {}
    if params.Delta % 2 == 0:
        out[H - 1] = sched[H - 1]
        first = H - 2
    else:
        first = H - 1
    for h in range(first, -1, -1):
        out[h] = ell * (sched[h + 1] - 1)
    return {h: (None if b >= params.n else b) for h, b in out.items()}


def build_tau(params: ClassParams) -> ShiftMap:
    """tau_0 for the whole class, by reverse induction on h.

    The formula is unknown, so each layer uses weights that are injective on every
    exponent the layer's products can reach (per-variable degree at most the
    class bound, support at most the layer's bound) and alpha = 1.
    """
    tau = ShiftMap(params.n)
    for h, support in sorted(layer_support_bounds(params).items(), reverse=True):
        a = universal_weights(params.n, params.var_degree, support)
        tau = tau.extend(h, (1,) * params.n, a)
    return tau


# --- Hadamard product polynomial of a formula ------------------------------------------------


def _node_poly(node: Node, n: int, p: int) -> HadamardPoly:
    if isinstance(node, Leaf):
        return leaf_poly(node, n, p)
    acc = HadamardPoly(n, 1, PrimeField(p), {})
    for w, prod in node.terms:
        term = HadamardPoly(n, 1, PrimeField(p), {(0,) * n: (w % p,)})
        for fac in prod.factors:
            term = term * _node_poly(fac, n, p)
        acc = acc + term
    return acc


def hadamard_formula_poly(hf: HadamardFormula, p: int = DEFAULT_PRIME) -> HadamardPoly:
    return HadamardPoly.stack([_node_poly(c, hf.n, p) for c in hf.coords])


def top_product(f: SetDepthFormula, p: int = DEFAULT_PRIME) -> tuple[list[HadamardPoly], int]:
    """The factors f_1..f_d of D_0 = f_1 * ... * f_d over H_k (fanin normalized first)."""
    g = normalize_fanin(f)
    _, factors = to_hadamard_product(g, p)
    return [hadamard_formula_poly(hf, p) for hf in factors], factors[0].kappa if factors else 1


def verify_tau(f: SetDepthFormula, tau: ShiftMap, ell0: int, p: int = DEFAULT_PRIME) -> Concentration:
    factors, _ = top_product(f, p)
    D = factors[0]
    for g in factors[1:]:
        D = D * g
    return shifted_concentration(D, tau, ell0)


# --- basis change -----------------------------------------------------------------------------


def low_support_basis(f: HadamardPoly) -> list[Exp]:
    """Coefficient basis picked greedily from the lowest support, ties by graded lex."""
    p = f.field.p
    order = sorted(f.terms, key=lambda e: (support_weight(e), grlex_key(e)))
    picked: list[Exp] = []
    cols: list[list[int]] = []
    for e in order:
        trial = cols + [[int(x) for x in f.terms[e]]]
        if rank_mod(trial, p) == len(trial):
            picked.append(e)
            cols = trial
    return picked


def truncate(f: HadamardPoly, ell: int) -> HadamardPoly:
    return HadamardPoly(f.n, f.kappa, f.field, {e: c for e, c in f.terms.items() if support_weight(e) < ell})


@dataclass(frozen=True)
class BasisChange:
    basis: tuple[Exp, ...]
    M_hat: ExactMatrix
    M_tilde: ExactMatrix
    det_hat: RatFunc
    det_tilde: RatFunc


def _change_matrix(f: HadamardPoly, B: Sequence[Exp], t: Sequence[RatFunc]) -> ExactMatrix:
    p = f.field.p
    F = FunctionField(p)
    fs = shift(f, t)
    Zb = ExactMatrix(F, [[F(int(f.terms[u][i])) for u in B] for i in range(f.kappa)], list(range(f.kappa)), list(B))
    cols = []
    for v in B:
        z = fs.terms.get(v, (F.zero,) * f.kappa)
        x = solve(Zb, [F(c) for c in z])
        if x is None:
            raise BasisMismatch(f"shifted coefficient {v} leaves the span of the basis")
        cols.append(x)
    data = [[cols[j][i] for j in range(len(B))] for i in range(len(B))]
    return ExactMatrix(F, data, list(B), list(B))


def basis_change(f_hat: HadamardPoly, ell_next: int, alpha: Sequence[int], a: Sequence[int]) -> BasisChange:
    """M' matrices of the shift x -> x + alpha t^a for f_hat and its truncation."""
    p = f_hat.field.p
    g_hat = truncate(f_hat, ell_next)
    B = low_support_basis(f_hat)
    Bt = low_support_basis(g_hat)
    if B != Bt:
        raise BasisMismatch(f"basis {B} of the polynomial differs from basis {Bt} of its truncation")
    t = [RatFunc(UniPoly.monomial(e, p, al % p)) for al, e in zip(alpha, a)]
    Mh = _change_matrix(f_hat, B, t)
    Mt = _change_matrix(g_hat, B, t)
    return BasisChange(tuple(B), Mh, Mt, det(Mh), det(Mt))


def _is_one_mod_t(x: RatFunc) -> bool:
    p = x.p
    if x.den(0) % p == 0:
        return False
    return x.num(0) * pow(x.den(0), -1, p) % p == 1


def verify_basis_change(f_hat: HadamardPoly, ell_next: int, alpha: Sequence[int], a: Sequence[int]) -> bool:
    bc = basis_change(f_hat, ell_next, alpha, a)
    polys = all(x.is_polynomial() for M in (bc.M_hat, bc.M_tilde) for r in M.data for x in r)
    return polys and _is_one_mod_t(bc.det_hat) and _is_one_mod_t(bc.det_tilde)
