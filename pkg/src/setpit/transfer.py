"""Transfer matrices for products of polynomials on disjoint variables.

Conventions: a factor is a HadamardPoly over all n variables whose support uses
its own block of variables.  The shift is realized through a single variable y:
t_i = alpha_i * y^(w_i).  Product columns are labelled by tuples (u_1, ..., u_l)
of per-factor exponents; the exponent they stand for is the sum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from itertools import combinations, product
from typing import Callable, Iterable, Sequence

from .algebra import (
    ExactMatrix,
    FunctionField,
    PrimeField,
    RatFunc,
    UniPoly,
    _det_mod,
    _evaluation_points,
    binom_int,
    det,
    inverse,
    is_strongly_full,
    kron_all,
    rank,
    rank_mod,
    solve,
)
from .errors import (
    BasisMismatch,
    NotAUnit,
    PreconditionViolated,
    SearchExhausted,
    TooLarge,
)
from .hadamard import Exp, HadamardPoly, HadamardVec, coefficient_matrix, cone, had_inverse, shift

Label = tuple  # tuple of per-factor exponents

EXACT_LIMIT = 400  # largest product cone handled by the fully symbolic route


def ceil_log2(x: int) -> int:
    return (x - 1).bit_length() if x > 1 else 0


def weight_of(w: Sequence[int], e: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(w, e))


def add_exps(exps: Iterable[Exp]) -> Exp:
    exps = list(exps)
    return tuple(sum(c) for c in zip(*exps))


def punctured(S: Sequence[Exp]) -> list[Exp]:
    return [e for e in S if any(e)]


# --- weight vectors ---------------------------------------------------------------


def _sum_set(cones: Sequence[Sequence[Exp]], subset_size: int | None) -> set[Exp]:
    n = len(cones[0][0])
    zero = (0,) * n
    # layers[c] = sums using exactly c nonzero cone members
    layers: list[set[Exp]] = [{zero}]
    for S in cones:
        star = punctured(S)
        new = [set(l) for l in layers] + [set()]
        for c, layer in enumerate(layers):
            if subset_size is not None and c + 1 > subset_size:
                continue
            for a in layer:
                for e in star:
                    new[c + 1].add(tuple(x + y for x, y in zip(a, e)))
        layers = new if new[-1] else new[:-1]
    out: set[Exp] = set()
    for layer in layers:
        out |= layer
    return out


def separates(w: Sequence[int], cones: Sequence[Sequence[Exp]], subset_size: int | None = None) -> bool:
    """True when distinct exponents of the (restricted) sum set get distinct weights."""
    P = _sum_set(cones, subset_size)
    return len({weight_of(w, e) for e in P}) == len(P)


def _greedy(P: Sequence[Exp], n: int, max_weight: int | None) -> list[int]:
    w = [1] * n
    base = [0] * len(P)
    for j in range(n):
        pairs = set(zip(base, (e[j] for e in P)))
        if all(x == 0 for _, x in pairs):
            continue
        cand = 1
        while len({a + cand * x for a, x in pairs}) != len(pairs):
            cand += 1
            if max_weight is not None and cand > max_weight:
                raise SearchExhausted(f"no weight <= {max_weight} separates variable {j + 1}")
        w[j] = cand
        base = [a + cand * e[j] for a, e in zip(base, P)]
    return w


def build_weight_vector(
    cones: Sequence[Sequence[Exp]],
    n: int | None = None,
    subset_size: int | None = None,
    max_weight: int | None = None,
) -> tuple[int, ...]:
    """Positive weights keeping the product monomials prod_i t^(e_i), e_i in cone i, distinct.

    With `subset_size` only sums in which at most that many cones contribute a
    nonzero exponent need distinct weights.  Each variable gets the least weight
    that keeps the projection onto the variables seen so far injective; for a full
    product of cones on disjoint variables the blocks are stacked in mixed radix
    on top of per-cone greedy weights.
    """
    cones = [list(S) for S in cones if S]
    if not cones:
        return tuple([1] * (n or 0))
    n = len(cones[0][0]) if n is None else n
    live = [S for S in cones if punctured(S)]
    if not live:
        return (1,) * n
    blocks = [frozenset(i for e in S for i, x in enumerate(e) if x) for S in live]
    disjoint = sum(len(b) for b in blocks) == len(frozenset().union(*blocks))
    if disjoint and (subset_size is None or subset_size >= len(live)):
        w = [1] * n
        radix = 1
        for S, b in zip(live, blocks):
            local = _greedy(S, n, max_weight)
            top = max(weight_of(local, e) for e in S)
            for i in b:
                w[i] = local[i] * radix
                if max_weight is not None and w[i] > max_weight:
                    raise SearchExhausted(f"weight {w[i]} exceeds {max_weight}")
            radix *= top + 1
        return tuple(w)
    P = sorted(_sum_set(live, subset_size))
    return tuple(_greedy(P, n, max_weight))


# --- single-factor transfer ---------------------------------------------------------


def transfer_matrix(S: Sequence[Exp], p: int) -> ExactMatrix:
    """T with (v, u) entry C(v, u) over the cone S."""
    data = [[binom_int(v, u) % p for u in S] for v in S]
    return ExactMatrix(PrimeField(p), data, list(S), list(S))


def transfer_inverse(S: Sequence[Exp], p: int) -> ExactMatrix:
    """T' = T^{-1} (rows and columns both indexed by S)."""
    T = transfer_matrix(S, p)
    return inverse(T).relabel(list(S), list(S))


def punctured_transfer(S: Sequence[Exp], p: int) -> ExactMatrix:
    """T'_{S*, S}."""
    Tp = transfer_inverse(S, p)
    return Tp.submatrix(punctured(S), list(S))


def monomial_diag(index: Sequence[Exp], w: Sequence[int], p: int, inverse_: bool = False) -> ExactMatrix:
    F = FunctionField(p)
    sgn = -1 if inverse_ else 1
    return ExactMatrix.diagonal(F, list(index), [F.y(sgn * weight_of(w, u)) for u in index])


def shift_point(w: Sequence[int], p: int, alpha: Sequence[int] | None = None) -> list[RatFunc]:
    F = FunctionField(p)
    alpha = alpha or [1] * len(w)
    return [RatFunc(UniPoly.monomial(wi, p, a % p)) for wi, a in zip(w, alpha)]


def shift_normalize(f: HadamardPoly, w: Sequence[int], alpha: Sequence[int] | None = None) -> tuple[HadamardPoly, HadamardVec]:
    """(f', f(t)) with f' = f(t)^{-1} * f(x + t) over H_kappa(F_p(y))."""
    t = shift_point(w, f.field.p, alpha)
    at = f.evaluate(t)
    zs = at.zero_coords()
    if zs:
        raise NotAUnit(zs[0], f"f(t) vanishes at coordinate {zs[0]}")
    shifted = shift(f, t)
    return shifted.had_scale(had_inverse(at)), at


def _coeff_mat(f: HadamardPoly, S: Sequence[Exp]) -> ExactMatrix:
    return coefficient_matrix(f, list(S)).relabel(None, list(S))


def verify_transfer_primal(f: HadamardPoly, w: Sequence[int]) -> bool:
    """Z' == f(t)^{-1} * Z N T N^{-1}, exactly over F_p(y)."""
    p = f.field.p
    F = FunctionField(p)
    S = cone(f)
    fp, at = shift_normalize(f, w)
    Zp = _coeff_mat(fp, S).promote(F)
    Z = _coeff_mat(f, S).promote(F)
    rhs = Z @ monomial_diag(S, w, p) @ transfer_matrix(S, p).promote(F) @ monomial_diag(S, w, p, inverse_=True)
    rhs = rhs.scale_rows(had_inverse(at).coords)
    const_one = all(F.is_zero(F.sub(x, F.one)) for x in Zp.column(S[0]))
    return const_one and Zp == rhs


def verify_transfer_mod(f: HadamardPoly, w: Sequence[int]) -> bool:
    """f(t)^{-1} * Z == Z'_{S*} N_{S*} T'_{S*,S} N_S^{-1} modulo the span of 1, and T'_{S*,S} strongly full."""
    p = f.field.p
    F = FunctionField(p)
    S = cone(f)
    star = punctured(S)
    if not star:
        return True  # a constant unit factor is dropped before any product is formed
    fp, at = shift_normalize(f, w)
    Tp = punctured_transfer(S, p)
    lhs = _coeff_mat(f, S).promote(F).scale_rows(had_inverse(at).coords)
    rhs = _coeff_mat(fp, star).promote(F) @ monomial_diag(star, w, p) @ Tp.promote(F) @ monomial_diag(S, w, p, inverse_=True)
    diff = lhs - rhs
    for u in S:
        col = diff.column(u)
        if any(not F.is_zero(F.sub(x, col[0])) for x in col):
            return False
    return is_strongly_full(Tp)


# --- products ---------------------------------------------------------------------


@dataclass
class FactorData:
    """Per-factor data; `alpha` scales the shift t_i = alpha_i y^(w_i)."""

    f: HadamardPoly
    w: tuple[int, ...]
    alpha: tuple[int, ...]
    cone: list[Exp] = dc_field(init=False)
    star: list[Exp] = dc_field(init=False)
    shifted: dict[Exp, tuple[UniPoly, ...]] = dc_field(init=False)

    def __post_init__(self):
        self.cone = cone(self.f)
        self.star = punctured(self.cone)
        self.shifted = shifted_coefficients(self.f, self.cone, self.w, self.alpha)

    @property
    def p(self) -> int:
        return self.f.field.p

    @property
    def kappa(self) -> int:
        return self.f.kappa

    def z(self, u: Exp) -> tuple[int, ...]:
        return tuple(int(c) for c in self.f.terms.get(u, (0,) * self.kappa))

    def at_t(self) -> tuple[UniPoly, ...]:
        return self.shifted[self.cone[0]]


def shifted_coefficients(
    f: HadamardPoly, S: Sequence[Exp], w: Sequence[int], alpha: Sequence[int] | None = None
) -> dict[Exp, tuple[UniPoly, ...]]:
    """Coef(v)(f(x + t)) for v in S as kappa polynomials in y, straight from the binomial expansion."""
    p = f.field.p
    alpha = tuple(alpha) if alpha is not None else (1,) * f.n
    out = {}
    for v in S:
        coords: list[dict[int, int]] = [dict() for _ in range(f.kappa)]
        for vp, c in f.terms.items():
            if any(a < b for a, b in zip(vp, v)):
                continue
            diff = [a - b for a, b in zip(vp, v)]
            scal = binom_int(vp, v) % p
            for a, k in zip(alpha, diff):
                if k:
                    scal = scal * pow(a, k, p) % p
            if not scal:
                continue
            deg = weight_of(w, diff)
            for i, x in enumerate(c):
                if x:
                    coords[i][deg] = (coords[i].get(deg, 0) + scal * int(x)) % p
        polys = []
        for d in coords:
            top = max(d, default=-1)
            cs = [0] * (top + 1)
            for k, x in d.items():
                cs[k] = x
            polys.append(UniPoly(cs, p))
        out[v] = tuple(polys)
    return out


def product_labels(cones: Sequence[Sequence[Exp]]) -> list[Label]:
    return list(product(*cones))


def block_weight_of(label: Label) -> int:
    return sum(1 for e in label if any(e))


def product_Z_rows(factors: Sequence[FactorData], labels: Sequence[Label] | None = None) -> list[list[int]]:
    """kappa x |labels| integer matrix of Z = Z_1 (*) ... (*) Z_l."""
    p = factors[0].p
    kappa = factors[0].kappa
    labels = labels if labels is not None else product_labels([fd.cone for fd in factors])
    rows = [[0] * len(labels) for _ in range(kappa)]
    for j, lab in enumerate(labels):
        vec = [1] * kappa
        for fd, u in zip(factors, lab):
            z = fd.z(u)
            vec = [a * b % p for a, b in zip(vec, z)]
        for i in range(kappa):
            rows[i][j] = vec[i]
    return rows


def product_Z(factors: Sequence[FactorData]) -> ExactMatrix:
    labels = product_labels([fd.cone for fd in factors])
    return ExactMatrix(PrimeField(factors[0].p), product_Z_rows(factors, labels), list(range(factors[0].kappa)), labels)


def _eval_vecs(vecs: dict, y0: int) -> dict:
    return {k: tuple(q(y0) for q in v) for k, v in vecs.items()}


def _hadamard_eval(parts: Sequence[dict], lab: Label, p: int) -> list[int]:
    vec = None
    for part, u in zip(parts, lab):
        x = part[u]
        vec = list(x) if vec is None else [a * b % p for a, b in zip(vec, x)]
    return vec


def _low_labels(factors: Sequence[FactorData], ell: int, mode: str) -> tuple[list[Label], list[Label]]:
    labels = product_labels([fd.cone for fd in factors])
    if mode == "block":
        wt = block_weight_of
    elif mode == "support":
        wt = lambda lab: sum(1 for x in add_exps(lab) if x)  # noqa: E731
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return labels, [lab for lab in labels if wt(lab) < ell]


@dataclass(frozen=True)
class ConcentrationResult:
    concentrated: bool
    rank_low: int
    rank_full: int
    method: str  # "certificate" or "symbolic"


def product_concentration(
    factors: Sequence[FactorData], ell: int, mode: str = "block", tries: int = 3
) -> ConcentrationResult:
    """Is D(x + t) = prod_i f_i(x + t) ell-concentrated over H_kappa(F_p(y))?

    rank_full equals rank_Fp(Z) because the shift acts on the coefficient span
    by an invertible matrix.  rank_low is bounded below by its value at a point;
    when the two meet the answer is exact.  Otherwise the low-weight span is
    ranked symbolically.
    """
    p = factors[0].p
    labels, low = _low_labels(factors, ell, mode)
    r_full = rank_mod(product_Z_rows(factors, labels), p)
    for y0 in _evaluation_points(p, tries):
        parts = [_eval_vecs(fd.shifted, y0) for fd in factors]
        cols = [_hadamard_eval(parts, lab, p) for lab in low]
        r = rank_mod(cols, p) if cols else 0
        if r == r_full:
            return ConcentrationResult(True, r, r_full, "certificate")
    F = FunctionField(p)
    kappa = factors[0].kappa
    data = [[None] * len(low) for _ in range(kappa)]
    for j, lab in enumerate(low):
        vec = None
        for fd, u in zip(factors, lab):
            q = fd.shifted[u]
            vec = list(q) if vec is None else [a * b for a, b in zip(vec, q)]
        for i in range(kappa):
            data[i][j] = RatFunc(vec[i])
    r_low = rank(ExactMatrix(F, data)) if low else 0
    return ConcentrationResult(r_low == r_full, r_low, r_full, "symbolic")


def _factor_blocks(factors: Sequence[HadamardPoly]) -> None:
    seen: set[int] = set()
    for f in factors:
        vs = set(f.variables())
        if vs & seen:
            raise PreconditionViolated("factors must use pairwise disjoint variables")
        seen |= vs


def prepare_factors(
    factors: Sequence[HadamardPoly], w: Sequence[int] | None = None, alpha: Sequence[int] | None = None
) -> list[FactorData]:
    _factor_blocks(factors)
    if w is None:
        w = build_weight_vector([cone(f) for f in factors], factors[0].n)
    w = tuple(w)
    alpha = tuple(alpha) if alpha is not None else (1,) * len(w)
    return [FactorData(f, w, alpha) for f in factors]


def verify_transfer_depth3(
    factors: Sequence[HadamardPoly], w: Sequence[int] | None = None, exact: bool | None = None
) -> bool:
    """D(t)^{-1} * Z == Z' N_{S'} T' N_S^{-1} modulo V_l(D'), l = number of factors.

    Every factor must be a unit at t and have a nonconstant cone.  With
    exact=True (the default for small products) all matrices are formed
    symbolically and membership is decided by exact ranks.  Otherwise the
    columns are assembled factor by factor after clearing D(t) and N_S, and
    membership is certified through rank_Fp(Z) as in product_concentration.
    """
    fds = prepare_factors(factors, w)
    p = fds[0].p
    for fd in fds:
        zs = [i for i, q in enumerate(fd.at_t()) if q.is_zero()]
        if zs:
            raise NotAUnit(zs[0], f"a factor vanishes at t in coordinate {zs[0]}")
        if not fd.star:
            raise PreconditionViolated("constant factors must be dropped first")
        if not is_strongly_full(punctured_transfer(fd.cone, p)):
            return False
    size = math.prod(len(fd.cone) for fd in fds)
    if exact is None:
        exact = size <= EXACT_LIMIT
    if exact:
        if size > EXACT_LIMIT:
            raise TooLarge(f"product cone of size {size} is beyond the symbolic route")
        return _depth3_symbolic(fds)
    return _depth3_certificate(fds)


def _depth3_parts(fd: FactorData):
    """Per-factor polynomial columns, all multiplied by f(t) and y^<w,u>."""
    p = fd.p
    w = fd.w
    Tp = punctured_transfer(fd.cone, p)
    lhs, rhs = {}, {}
    for u in fd.cone:
        mono = UniPoly.monomial(weight_of(w, u), p)
        lhs[u] = tuple(mono.scale(z) for z in fd.z(u))
        acc = [UniPoly.zero(p)] * fd.kappa
        for v in fd.star:
            c = Tp.entry(v, u)
            if c:
                acc = [a + q.scale(c) for a, q in zip(acc, fd.shifted[v])]
        rhs[u] = tuple(acc)
    return lhs, rhs


def _depth3_certificate(fds: Sequence[FactorData]) -> bool:
    p = fds[0].p
    ell = len(fds)
    labels, low = _low_labels(fds, ell, "block")
    r_full = rank_mod(product_Z_rows(fds, labels), p)
    parts = [_depth3_parts(fd) for fd in fds]
    for y0 in _evaluation_points(p, 3):
        L = [_eval_vecs(lp, y0) for lp, _ in parts]
        R = [_eval_vecs(rp, y0) for _, rp in parts]
        Q = [_eval_vecs(fd.shifted, y0) for fd in fds]
        V = [_hadamard_eval(Q, lab, p) for lab in low]
        diff = []
        for lab in labels:
            a = _hadamard_eval(L, lab, p)
            b = _hadamard_eval(R, lab, p)
            diff.append([(x - y) % p for x, y in zip(a, b)])
        rV = rank_mod(V, p) if V else 0
        if rank_mod(V + diff, p) > r_full:
            return False
        if rV == r_full:
            return True
    return _depth3_symbolic(fds)


def _depth3_symbolic(fds: Sequence[FactorData]) -> bool:
    p = fds[0].p
    F = FunctionField(p)
    ell = len(fds)
    w = fds[0].w
    normalized = [shift_normalize(fd.f, w, fd.alpha) for fd in fds]
    cones = [fd.cone for fd in fds]
    stars = [fd.star for fd in fds]
    S = product_labels(cones)
    Sp = product_labels(stars)
    kappa = fds[0].kappa
    Dt = [F.one] * kappa
    for _, at in normalized:
        Dt = [F.mul(a, b) for a, b in zip(Dt, at.coords)]
    Dinv = [F.inv(x) for x in Dt]
    Z = product_Z(fds).promote(F).scale_rows(Dinv)

    def had_cols(mats_cols, labs):
        data = [[None] * len(labs) for _ in range(kappa)]
        for j, lab in enumerate(labs):
            vec = [F.one] * kappa
            for cols, u in zip(mats_cols, lab):
                vec = [F.mul(a, b) for a, b in zip(vec, cols[u])]
            for i in range(kappa):
                data[i][j] = vec[i]
        return data

    fcols = [{u: tuple(F(c) for c in fp.terms.get(u, (0,) * kappa)) for u in fd.cone} for fd, (fp, _) in zip(fds, normalized)]
    Zp = ExactMatrix(F, had_cols(fcols, Sp), list(range(kappa)), Sp)
    Tp = kron_all([punctured_transfer(c, p) for c in cones]).promote(F)
    N_Sp = ExactMatrix.diagonal(F, Sp, [F.y(weight_of(w, add_exps(v))) for v in Sp])
    N_S_inv = ExactMatrix.diagonal(F, S, [F.y(-weight_of(w, add_exps(u))) for u in S])
    rhs = Zp @ N_Sp @ Tp.relabel(Sp, S) @ N_S_inv
    diff = Z - rhs.relabel(None, S)
    low = [lab for lab in S if block_weight_of(lab) < ell]
    V = ExactMatrix(F, had_cols(fcols, low), list(range(kappa)), low) if low else None
    rV = rank(V) if V is not None else 0
    both = [list(r) + list(d) for r, d in zip(V.data, diff.data)] if V is not None else [list(d) for d in diff.data]
    return rank(ExactMatrix(F, both)) == rV


# --- greedy basis and the nullspace matrix ------------------------------------------


def greedy_basis_from_largest(Z: ExactMatrix, key: Callable[[object], object] | None = None) -> list:
    """Columns of Z taken from the largest (by key) down, kept when independent of those kept so far."""
    p = Z.field.p
    key = key or (lambda c: Z.col_position(c))
    order = sorted(Z.cols, key=key, reverse=True)
    keys = [key(c) for c in order]
    if len(set(keys)) != len(keys):
        raise ValueError("the column order has ties")
    basis: list[tuple[int, list[int]]] = []  # (pivot, reduced vector)
    marked = []
    for c in order:
        v = [x % p for x in Z.column(c)]
        for piv, b in basis:
            if v[piv]:
                f = v[piv]
                v = [(x - f * y) % p for x, y in zip(v, b)]
        nz = next((i for i, x in enumerate(v) if x), None)
        if nz is None:
            continue
        inv = pow(v[nz], -1, p)
        v = [x * inv % p for x in v]
        basis = [(piv, [(x - b[nz] * y) % p for x, y in zip(b, v)]) for piv, b in basis]
        basis.append((nz, v))
        marked.append(c)
    return marked


@dataclass(frozen=True)
class NullspaceCols:
    """Sparse columns of A: column v is e_v minus a combination of larger marked columns."""

    columns: tuple[tuple[object, tuple[tuple[object, int], ...]], ...]
    marked: tuple

    @property
    def order(self) -> list:
        return [v for v, _ in self.columns]

    def column(self, v) -> dict:
        return dict(dict(self.columns)[v])

    def to_matrix(self, rows: Sequence, p: int) -> ExactMatrix:
        pos = {r: i for i, r in enumerate(rows)}
        data = [[0] * len(self.columns) for _ in rows]
        for j, (_, entries) in enumerate(self.columns):
            for r, c in entries:
                data[pos[r]][j] = c % p
        return ExactMatrix(PrimeField(p), data, list(rows), self.order)


def build_nullspace_A(Z: ExactMatrix, marked: Sequence, C: Sequence, key: Callable) -> NullspaceCols:
    p = Z.field.p
    mset = set(marked)
    cols = []
    for v in C:
        if v in mset:
            raise BasisMismatch(f"column {v} is marked")
        larger = [m for m in marked if key(m) > key(v)]
        sub = Z.submatrix(Z.rows, larger) if larger else None
        zv = Z.column(v)
        if sub is None:
            if any(x % p for x in zv):
                raise BasisMismatch(f"column {v} is not spanned by larger marked columns")
            coeffs = ()
        else:
            coeffs = solve(sub, zv)
            if coeffs is None:
                raise BasisMismatch(f"column {v} is not spanned by larger marked columns")
        entries = [(v, 1)] + [(m, (-c) % p) for m, c in zip(larger, coeffs) if c % p]
        # Z a = 0
        for i in range(len(Z.rows)):
            acc = sum(Z.entry(Z.rows[i], r) * c for r, c in entries) % p
            if acc:
                raise BasisMismatch(f"column {v} of A is not in the nullspace of Z")
        cols.append((v, tuple(entries)))
    return NullspaceCols(tuple(cols), tuple(marked))


# --- the invertible minor --------------------------------------------------------------


@dataclass(frozen=True)
class MinorSelection:
    columns: tuple  # labels of C, identity columns first, then the picked ones
    det: int  # det(T'_{S',C}) mod p with rows in S' order and columns in `columns` order
    identity: tuple
    picked: tuple
    row_order: tuple  # the marked identity columns after the frequency sort


def _reduce_factor(Tp: ExactMatrix) -> tuple[ExactMatrix, object, int]:
    """(E T', zero label, det E^{-1}) with E T' the identity on S* and a zero-free column at 0."""
    p = Tp.field.p
    star = list(Tp.rows)
    zero = [c for c in Tp.cols if c not in set(star)]
    if len(zero) != 1:
        raise PreconditionViolated("T' must have exactly one column outside its row labels")
    sq = Tp.submatrix(star, star)
    detsq = _det_mod([list(r) for r in sq.data], p)
    if not detsq:
        raise PreconditionViolated("T' is not strongly full")
    E = inverse(sq).relabel(star, star)
    R = E @ Tp
    for i, r in enumerate(star):
        for j, c in enumerate(star):
            if R.entry(r, c) % p != (1 if i == j else 0):
                raise PreconditionViolated("row reduction did not produce an identity block")
    if any(R.entry(r, zero[0]) % p == 0 for r in star):
        raise PreconditionViolated("the zero column of the reduced T' has a zero entry")
    return R, zero[0], detsq % p


def frequency_sort(rows: Sequence[tuple]) -> list[tuple]:
    """Group rows by each coordinate in turn, larger groups first, ties by value."""

    def rec(rs, depth):
        if len(rs) <= 1 or depth == len(rs[0]):
            return list(rs)
        groups: dict = {}
        for r in rs:
            groups.setdefault(r[depth], []).append(r)
        out = []
        for v in sorted(groups, key=lambda v: (-len(groups[v]), v)):
            out += rec(groups[v], depth + 1)
        return out

    return rec(list(rows), 0)


def distinguishing_positions(L: Sequence[tuple], i: int) -> list[int]:
    """Positions I on which L[i] differs from every earlier row, found by halving."""
    lo, start, I = 0, 0, []
    ell = len(L[i])
    while i - lo + 1 > 1:
        seg = L[lo : i + 1]
        j = next(j for j in range(start, ell) if len({r[j] for r in seg}) > 1)
        I.append(j)
        mu = sum(1 for r in seg if r[j] == L[i][j])
        lo = i - mu + 1
        start = j + 1
    return I


def _eps(u: tuple, w: tuple) -> bool:
    return all(b == 0 or a == b for a, b in zip(u, w))


def select_invertible_minor(Tprimes: Sequence[ExactMatrix], marked: Sequence[Label], kappa: int) -> MinorSelection:
    """Unmarked columns C of T' = (x) T'_i with |C| = |S'| and det T'_{S',C} != 0."""
    ell = len(Tprimes)
    p = Tprimes[0].field.p
    if len(marked) > max(kappa, 0):
        raise PreconditionViolated(f"{len(marked)} marked columns exceed kappa = {kappa}")
    kap = max(kappa, 1)
    if (1 << max(ell - ceil_log2(kap), 0)) - kap <= 0:
        raise PreconditionViolated(f"{ell} factors are too few for kappa = {kappa}")
    reduced = [_reduce_factor(T) for T in Tprimes]
    # positions: 0 is the zero column, 1..n_i the S_i* labels in row order
    to_pos = []
    from_pos = []
    for T, (R, zero, _) in zip(Tprimes, reduced):
        labels = [zero] + list(T.rows)
        from_pos.append(labels)
        to_pos.append({lab: k for k, lab in enumerate(labels)})
    ns = [len(T.rows) for T in Tprimes]
    U = list(product(*(range(1, n + 1) for n in ns)))
    mpos = []
    for m in marked:
        if len(m) != ell:
            raise PreconditionViolated(f"marked label {m} has the wrong arity")
        mpos.append(tuple(to_pos[i][x] for i, x in enumerate(m)))
    M1 = [m for m in mpos if all(m)]
    M2 = set(m for m in mpos if not all(m))
    M1set = set(M1)
    identity = [u for u in U if u not in M1set]
    rows = frequency_sort(M1)
    picked: list[tuple] = []
    pset: set[tuple] = set()
    full = set(range(ell))
    for i, u in enumerate(rows):
        I = distinguishing_positions(rows, i)
        rest = sorted(full - set(I))
        choice = None
        for size in range(ell - 1, len(I) - 1, -1):
            for extra in combinations(rest, size - len(I)):
                Sw = set(I) | set(extra)
                if Sw == full:
                    continue
                w = tuple(u[j] if j in Sw else 0 for j in range(ell))
                if w in M2 or w in pset:
                    continue
                choice = w
                break
            if choice is not None:
                break
        if choice is None:
            raise SearchExhausted(f"no unmarked column left for row {u}")
        if not _eps(u, choice) or any(_eps(rows[j], choice) for j in range(i)):
            raise SearchExhausted(f"column {choice} breaks the triangular shape at row {u}")
        picked.append(choice)
        pset.add(choice)
    # det(T'_{S',C}) = det(E)^{-1} det(R_{U,C}); Laplace on the identity columns
    N = len(U)
    upos = {u: k for k, u in enumerate(U)}
    cols = identity + picked
    assign = [upos[u] for u in identity] + [upos[u] for u in rows]
    sign = _perm_sign(assign)
    m1_sorted = sorted(range(len(rows)), key=lambda k: upos[rows[k]])
    sub = [[_entry(reduced, rows[a], picked[b]) for b in m1_sorted] for a in m1_sorted]
    d = _det_mod(sub, p) if sub else 1
    dE_inv = 1
    for (_, _, dsq), n in zip(reduced, ns):
        dE_inv = dE_inv * pow(dsq, N // n, p) % p
    value = sign * d * dE_inv % p
    to_label = lambda w: tuple(from_pos[i][x] for i, x in enumerate(w))  # noqa: E731
    return MinorSelection(
        tuple(to_label(c) for c in cols),
        value,
        tuple(to_label(c) for c in identity),
        tuple(to_label(c) for c in picked),
        tuple(to_label(c) for c in rows),
    )


def _entry(reduced, u: tuple, w: tuple) -> int:
    acc = 1
    for (R, zero, _), a, b in zip(reduced, u, w):
        rl = R.rows[a - 1]
        cl = zero if b == 0 else R.rows[b - 1]
        acc = acc * R.entry(rl, cl)
    return acc


def _perm_sign(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    sign = 1
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def minor_det_direct(Tprimes: Sequence[ExactMatrix], C: Sequence[Label]) -> int:
    """det(T'_{S',C}) by elimination on the full Kronecker product (small cases only)."""
    Tp = kron_all(list(Tprimes))
    if len(Tp.rows) > EXACT_LIMIT:
        raise TooLarge(f"{len(Tp.rows)} rows is beyond the direct route")
    sub = Tp.submatrix(Tp.rows, list(C))
    return _det_mod([list(r) for r in sub.data], Tp.field.p)


def verify_tna_det(Tprime: ExactMatrix, w: Sequence[int], A: NullspaceCols, expected: int | None = None) -> bool:
    """det(T' N_S^{-1} A) != 0 with leading inverse monomial y^(-sum <w,v>) carrying det(T'_{S',C}).

    Written in z = 1/y the determinant is a polynomial whose lowest term must be
    z^(sum <w,v>) times det(T'_{S',C}).
    """
    p = Tprime.field.p
    F = FunctionField(p)
    C = A.order
    key = lambda lab: weight_of(w, add_exps(lab))  # noqa: E731
    data = []
    for r in Tprime.rows:
        row = []
        for v in C:
            coeffs: dict[int, int] = {}
            for s, a in A.column(v).items():
                t = Tprime.entry(r, s) * a % p
                if t:
                    k = key(s)
                    coeffs[k] = (coeffs.get(k, 0) + t) % p
            top = max(coeffs, default=-1)
            cs = [0] * (top + 1)
            for k, x in coeffs.items():
                cs[k] = x
            row.append(RatFunc(UniPoly(cs, p)))
        data.append(row)
    d = det(ExactMatrix(F, data))
    if d.is_zero() or not d.is_polynomial():
        return False
    direct = _det_mod([list(r) for r in Tprime.submatrix(Tprime.rows, C).data], p)
    if expected is not None and expected % p != direct:
        return False
    num = d.num
    low = num.low_order()
    return low == sum(key(v) for v in C) and num.coeffs[low] * pow(d.den.lc, -1, p) % p == direct and direct != 0


# --- forensics -----------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, ExactMatrix):
        return {"rows": [_jsonable(r) for r in x.rows], "cols": [_jsonable(c) for c in x.cols],
                "data": [[_jsonable(v) for v in r] for r in x.data]}
    if isinstance(x, (RatFunc, UniPoly)):
        return repr(x)
    if isinstance(x, (tuple, list)):
        return [_jsonable(v) for v in x]
    if isinstance(x, NullspaceCols):
        return [{"column": _jsonable(v), "entries": [[_jsonable(r), c] for r, c in e]} for v, e in x.columns]
    if isinstance(x, MinorSelection):
        return {"columns": _jsonable(x.columns), "det": x.det, "picked": _jsonable(x.picked)}
    return x


def debug_dump(path: str | None = None, **items) -> str:
    """JSON snapshot of the matrices of a run (Z, Z', T, T', M, C, A, ...)."""
    text = json.dumps({k: _jsonable(v) for k, v in items.items()}, indent=1, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
