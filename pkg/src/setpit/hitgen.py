"""Hitting sets read off from concentration: shift, zero all but a few variables, sparse grid."""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .algebra import DEFAULT_PRIME
from .concentrate import ShiftMap, build_tau, ell_schedule, universal_weights
from .errors import FieldTooSmall, NoAlphaFound, NotADualForm
from .formula import Blackbox, ClassParams, DiagonalCircuit, DualRepresentation, _eval_leaf
from .sparsepit import SparseHittingSpec, hitting_points
from .transfer import ceil_log2

Point = tuple[int, ...]

CHUNK = 4096


@dataclass
class HittingSet:
    n: int
    points: list[Point]
    bound: int
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)

    def header(self) -> dict:
        return {"type": "header", "n": self.n, "size": len(self.points), "bound": self.bound, "provenance": self.provenance}

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines += [json.dumps({"point": list(pt)}) for pt in self.points]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> HittingSet:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        head = rows[0]
        return cls(head["n"], [tuple(r["point"]) for r in rows[1:]], head["bound"], head["provenance"])


@dataclass(frozen=True)
class Verdict:
    zero: bool
    witness: Point | None = None

    def to_json(self) -> dict:
        if self.zero:
            return {"verdict": "zero"}
        return {"verdict": "nonzero", "witness": list(self.witness)}


def test_blackbox(bb, hs: Iterable[Point], p: int | None = None, threads: int = 1) -> Verdict:
    """Nonzero with the first point where bb does not vanish, else zero.

    Blackboxes with a `batch` method are queried a chunk at a time, and with
    threads > 1 a window of chunks is evaluated concurrently.  The witness is
    always the first nonzero point in hitting-set order.
    """
    if p is None:
        p = getattr(bb, "p", DEFAULT_PRIME)
    batch = getattr(bb, "batch", None)
    pts = hs.points if isinstance(hs, HittingSet) else list(hs)
    if batch is None:
        for pt in pts:
            if bb(pt) % p:
                return Verdict(False, tuple(pt))
        return Verdict(True)
    chunks = [pts[lo : lo + CHUNK] for lo in range(0, len(pts), CHUNK)]
    if threads <= 1:
        results = map(batch, chunks)
        for chunk, vals in zip(chunks, results):
            for pt, v in zip(chunk, vals):
                if v % p:
                    return Verdict(False, tuple(pt))
        return Verdict(True)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for lo in range(0, len(chunks), threads):
            window = chunks[lo : lo + threads]
            for chunk, vals in zip(window, pool.map(batch, window)):
                for pt, v in zip(chunk, vals):
                    if v % p:
                        return Verdict(False, tuple(pt))
    return Verdict(True)


test_blackbox.__test__ = False  # not a pytest test despite the name


def _dedup(points: Iterable[Point]) -> list[Point]:
    seen: set[Point] = set()
    out = []
    for pt in points:
        if pt not in seen:
            seen.add(pt)
            out.append(pt)
    return out


def _t_degrees(tau: ShiftMap, var_degree: int, total_degree: int) -> list[int]:
    """Degree in t_h of C(x + tau(t)): the heaviest monomial with total degree <= D, per-variable <= delta."""
    out = []
    for _, _, exps in tau.layers:
        heavy = sorted((a for a in exps for _ in range(var_degree)), reverse=True)
        out.append(sum(heavy[:total_degree]))
    return out


def _projected_points(subsets, n: int, m: int, x_degree: int, tau: ShiftMap, tdeg: Sequence[int], p: int) -> list[Point]:
    """Grid points of x_X + tau(t) for every X; the tau part depends only on the grid value."""
    spec = SparseHittingSpec(tuple([x_degree] * m) + tuple(tdeg))
    ws = spec.weights
    base = []
    for y in range(spec.grid_size):
        row = [0] * n
        for (_, alphas, exps), W in zip(tau.layers, ws[m:]):
            t = pow(y, W, p)
            for i in range(n):
                if alphas[i]:
                    row[i] = (row[i] + alphas[i] * pow(t, exps[i], p)) % p
        base.append(row)
    xw = ws[:m]
    pts = []
    for X in subsets:
        for y, row in enumerate(base):
            pt = list(row)
            for v, w in zip(X, xw):
                pt[v] = (pt[v] + pow(y, w, p)) % p
            pts.append(tuple(pt))
    return _dedup(pts)


@lru_cache(maxsize=32)
def _projected_points_cached(n: int, m: int, x_degree: int, tau: ShiftMap, tdeg: tuple[int, ...], p: int) -> list[Point]:
    # classes differing only in fanins the shift ignores share one point list
    return _projected_points(list(itertools.combinations(range(n), m)), n, m, x_degree, tau, tdeg, p)


def projected_hitting_set(
    n: int, x_degree: int, support: int, tau: ShiftMap, total_degree: int, p: int, provenance: dict
) -> HittingSet:
    """Union over maximal X (|X| = min(support, n)) of the grids for C(x_X + tau(t)).

    Smaller X are covered: zeroing more variables of a polynomial that vanishes
    on the larger projection keeps it zero.
    """
    m = min(support, n)
    tdeg = _t_degrees(tau, x_degree, total_degree)
    g = (x_degree + 1) ** m * math.prod(d + 1 for d in tdeg)
    if g > p:
        raise FieldTooSmall(f"grid of {g} values needs a larger prime than {p}")
    subsets = list(itertools.combinations(range(n), m))
    pts = _projected_points_cached(n, m, x_degree, tau, tuple(tdeg), p)
    prov = dict(provenance)
    prov.update({"subset_size": m, "subsets": len(subsets), "grid": g, "t_degrees": tdeg, "tau": tau.to_json(), "prime": p})
    return HittingSet(n, pts, len(subsets) * g, prov)


def _kronecker_set(n: int, delta: int, p: int, provenance: dict) -> HittingSet:
    spec = SparseHittingSpec((delta,) * n)
    pts = _dedup(hitting_points(spec, p, offset=(1,) * n))
    prov = dict(provenance)
    prov.update({"grid": spec.grid_size, "prime": p})
    return HittingSet(n, pts, spec.grid_size, prov)


def hitting_set(params: ClassParams, p: int = DEFAULT_PRIME) -> HittingSet:
    """A hitting set for the class, built from the class parameters alone.

    Point lists are cached and shared; callers must not mutate them.
    """
    ell0 = ell_schedule(params)[0]
    n, delta = params.n, params.var_degree
    prov = {"ell0": ell0, "params": params.to_json()}
    if ell0 >= n + 1:
        return _kronecker_set(n, delta, p, {"route": "kronecker", **prov})
    tau = build_tau(params)
    return projected_hitting_set(n, delta, ell0 - 1, tau, params.total_degree, p, {"route": "projection", **prov})


def size_bound(params: ClassParams) -> int:
    """Closed form sum_X G(X) recorded by hitting_set, without building the points."""
    ell0 = ell_schedule(params)[0]
    n, delta = params.n, params.var_degree
    if ell0 >= n + 1:
        return (delta + 1) ** n
    m = min(ell0 - 1, n)
    tdeg = _t_degrees(build_tau(params), delta, params.total_degree)
    return math.comb(n, m) * (delta + 1) ** m * math.prod(d + 1 for d in tdeg)


def check(bb: Blackbox, params: ClassParams, p: int | None = None, threads: int = 1) -> Verdict:
    p = p if p is not None else bb.p
    return test_blackbox(bb, hitting_set(params, p), p, threads)


# --- diagonal circuits ----------------------------------------------------------------------


def diagonal_ell(k: int) -> int:
    """Concentration after the shift: supports up to floor(log2 k) suffice."""
    return k.bit_length()


def diagonal_alpha(forms: Sequence, n: int, k: int, p: int = DEFAULT_PRIME) -> int:
    """First alpha in 1..kn+1 with f_i(alpha, ..., alpha^n) != 0 for every form."""
    for a in range(1, k * n + 2):
        pt = [pow(a, j, p) for j in range(1, n + 1)]
        if all(_eval_leaf(f, pt, p) for _, f in forms):
            return a
    raise NoAlphaFound(f"none of 1..{k * n + 1} avoids every root")


def hitting_set_diagonal(
    k: int, n: int, d: int, p: int = DEFAULT_PRIME, circuit: DiagonalCircuit | None = None
) -> HittingSet:
    """Shift x_j -> x_j + alpha^j, then grids on every X with |X| = min(floor(log2 k), n).

    With `circuit` given, alpha is searched by evaluating its forms; otherwise
    every candidate 1..kn+1 contributes its shifted grids.
    """
    if p <= k * n + 1 or p <= d:
        raise FieldTooSmall(f"p = {p} must exceed kn + 1 = {k * n + 1} and d = {d}")
    m = min(diagonal_ell(k) - 1, n)
    alphas = [diagonal_alpha(circuit.forms, n, k, p)] if circuit is not None else list(range(1, k * n + 2))
    spec = SparseHittingSpec((d,) * m)
    if spec.grid_size > p:
        raise FieldTooSmall(f"grid of {spec.grid_size} values needs a larger prime than {p}")
    subsets = list(itertools.combinations(range(n), m))
    grid = hitting_points(spec, p)
    pts = []
    for a in alphas:
        shift = [pow(a, j, p) for j in range(1, n + 1)]
        for X in subsets:
            for q in grid:
                pt = list(shift)
                for v, x in zip(X, q):
                    pt[v] = (pt[v] + x) % p
                pts.append(tuple(pt))
    prov = {"route": "diagonal", "ell": diagonal_ell(k), "alphas": alphas, "subset_size": m, "grid": spec.grid_size, "prime": p,
            "params": {"k": k, "n": n, "d": d}}
    return HittingSet(n, _dedup(pts), len(alphas) * len(subsets) * spec.grid_size, prov)


# --- dual representations -------------------------------------------------------------------------


def dual_ell(k: int) -> int:
    """Base bound 2 for factors of monomial weight <= 1, lifted over a product of k' coordinates."""
    return 2 * ceil_log2(max(k, 1)) + 1


def hitting_set_dual(rep: DualRepresentation, p: int = DEFAULT_PRIME) -> HittingSet:
    """Products of univariates over H_k'.  Only k', n and the degree are read.

    The weights separate sums of up to l univariate cones, so after x -> x + t^w
    every coefficient is spanned by those of support < l.
    """
    if not isinstance(rep, DualRepresentation):
        raise NotADualForm(f"expected a dual representation, got {type(rep).__name__}")
    n, k, delta = rep.n, max(rep.k, 1), max(rep.degree, 1)
    ell = dual_ell(k)
    prov = {"route": "dual", "ell": ell, "params": {"k": k, "n": n, "degree": delta}}
    if ell >= n + 1:
        return _kronecker_set(n, delta, p, prov)
    w = universal_weights(n, delta, ell)
    tau = ShiftMap(n).extend(0, (1,) * n, w)
    return projected_hitting_set(n, delta, ell - 1, tau, n * delta, p, prov)
