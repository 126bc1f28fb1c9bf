"""The ten acceptance criteria, each at its stated scale and tolerance.

Every criterion records one PASS/FAIL line, printed in the terminal summary.
"""

from __future__ import annotations

import itertools
import math
import random
import time

import pytest

from setpit.algebra import DEFAULT_PRIME, ExactMatrix, PrimeField, is_strongly_full
from setpit.concentrate import ell_schedule, shifted_concentration, sparse_shift
from setpit.corpus import random_diagonal, random_set_depth, random_setml3, zero_diagonal, zero_variant
from setpit.formula import Blackbox, ClassParams, diagonal_to_hadamard, evaluate_int
from setpit.hadamard import HadamardPoly, Partition, cone, is_l_concentrated, shift, support_stats
from setpit.hitgen import diagonal_alpha, hitting_set, hitting_set_diagonal, size_bound, test_blackbox
from setpit.oracle import concentration_ranks, expand, is_zero_bruteforce
from setpit.sparsepit import low_variate_hitting
from setpit.transfer import (
    EXACT_LIMIT,
    ceil_log2,
    build_weight_vector,
    minor_det_direct,
    prepare_factors,
    product_concentration,
    punctured_transfer,
    select_invertible_minor,
    shift_point,
    verify_transfer_depth3,
    verify_transfer_mod,
    verify_transfer_primal,
)

P = DEFAULT_PRIME
Fp = PrimeField(P)

# every hitting set built below, as (label, size, bound), for the size accounting
SIZE_LOG: list[tuple[str, int, int]] = []


def _coeff_vector(rng, kappa):
    return tuple(0 if rng.random() < 0.2 else rng.randrange(1, P) for _ in range(kappa))


def random_factor(rng, n, block, kappa, max_cone=6, max_deg=2):
    """A sparse polynomial on `block` with a nonconstant cone of size <= max_cone and no zero coordinate."""
    while True:
        terms = {}
        for _ in range(rng.randint(1, 3)):
            e = [0] * n
            for v in block:
                e[v] = rng.randint(0, max_deg)
            terms[tuple(e)] = _coeff_vector(rng, kappa)
        if rng.random() < 0.5:
            terms[(0,) * n] = _coeff_vector(rng, kappa)
        terms = {e: c for e, c in terms.items() if any(c)}
        if not terms or any(all(c[i] == 0 for c in terms.values()) for i in range(kappa)):
            continue
        f = HadamardPoly(n, kappa, Fp, terms)
        if 2 <= len(cone(f)) <= max_cone:
            return f


SYMBOLIC_PRODUCT_CONE = 128  # symbolic cost grows steeply past this; see the ledger


def random_product(rng, kappa, ell, limit=EXACT_LIMIT):
    """ell factors on disjoint blocks of one or two variables, product cone <= limit."""
    while True:
        sizes = [rng.randint(1, 2) for _ in range(ell)]
        n = sum(sizes)
        blocks, start = [], 0
        for s in sizes:
            blocks.append(list(range(start, start + s)))
            start += s
        fs = [random_factor(rng, n, b, kappa) for b in blocks]
        if math.prod(len(cone(f)) for f in fs) <= limit:
            return fs, blocks


# --- 1: transfer lemmas -----------------------------------------------------------------------


def test_criterion_1_transfer_lemmas(acceptance_log):
    rng = random.Random(101)
    t0 = time.perf_counter()
    fails = {"primal": 0, "mod": 0, "depth3": 0}
    for _ in range(100):
        kappa = rng.randint(1, 4)
        n = rng.randint(1, 2)
        f = random_factor(rng, n, range(n), kappa)
        w = build_weight_vector([cone(f)], n)
        fails["primal"] += not verify_transfer_primal(f, w)
        fails["mod"] += not verify_transfer_mod(f, w)
        fails["mod"] += not is_strongly_full(punctured_transfer(cone(f), P))
    for _ in range(100):
        kappa = rng.randint(1, 4)
        ell = 2 * ceil_log2(kappa) + 1
        fs, _ = random_product(rng, kappa, ell, SYMBOLIC_PRODUCT_CONE)
        fails["depth3"] += not verify_transfer_depth3(fs, exact=True)
    secs = time.perf_counter() - t0
    ok = not any(fails.values()) and secs < 120
    acceptance_log.record("1", ok, f"100 instances per lemma, failures {fails}, {secs:.1f}s (limit 120s)")
    assert ok


# --- 2: invertible minor --------------------------------------------------------------------


def random_strongly_full(rng, m):
    """An m x (m+1) matrix over F_p, rows labelled 1..m and columns 0..m, every maximal minor nonzero."""
    while True:
        data = [[rng.randrange(P) for _ in range(m + 1)] for _ in range(m)]
        T = ExactMatrix(Fp, data, [(i,) for i in range(1, m + 1)], [(j,) for j in range(m + 1)])
        if is_strongly_full(T):
            return T


def random_tprime(rng):
    if rng.random() < 0.5:
        return random_strongly_full(rng, rng.randint(1, 2))
    n = rng.randint(1, 2)
    f = random_factor(rng, n, range(n), 1, max_cone=4)
    return punctured_transfer(cone(f), P)


def test_criterion_2_invertible_minor(acceptance_log):
    rng = random.Random(202)
    fails = 0
    for _ in range(120):
        kappa = rng.randint(1, 4)
        ell = rng.randint(max(2 * ceil_log2(kappa) + 1, 1), 5)
        while True:
            Tps = [random_tprime(rng) for _ in range(ell)]
            if math.prod(len(T.rows) for T in Tps) <= 64:
                break
        assert all(is_strongly_full(T) for T in Tps)
        labels = list(itertools.product(*(T.cols for T in Tps)))
        marked = rng.sample(labels, rng.randint(0, min(kappa, len(labels))))
        sel = select_invertible_minor(Tps, marked, kappa)
        n_rows = math.prod(len(T.rows) for T in Tps)
        good = (
            not set(sel.columns) & set(marked)
            and len(set(sel.columns)) == len(sel.columns) == n_rows
            and sel.det != 0
            and minor_det_direct(Tps, sel.columns) == sel.det
        )
        fails += not good
    acceptance_log.record("2", fails == 0, f"120 families (kappa <= 4, ell <= 5), {fails} failures, det recomputed directly")
    assert fails == 0


# --- 3: product concentration -------------------------------------------------------------------


def test_criterion_3_rank_concentration(acceptance_log):
    rng = random.Random(303)
    fails = cross = 0
    for i in range(60):
        kappa = rng.randint(1, 4)
        ell = 2 * ceil_log2(kappa) + 1
        fs, blocks = random_product(rng, kappa, ell)
        fds = prepare_factors(fs)
        res = product_concentration(fds, ell, "block")
        ok = res.concentrated and res.rank_low == res.rank_full
        if math.prod(len(cone(f)) for f in fs) <= 48:
            # second route: shift the expanded product symbolically and rank both spans
            D = fs[0]
            for g in fs[1:]:
                D = D * g
            part = Partition.of([[v + 1 for v in b] for b in blocks])
            sym = is_l_concentrated(shift(D, shift_point(fds[0].w, P)), ell, "block", part)
            ok = ok and sym == (True, res.rank_full, res.rank_full)
            cross += 1
        fails += not ok
    acceptance_log.record("3", fails == 0, f"60 products, {fails} failures, {cross} also ranked symbolically")
    assert fails == 0


# --- 4: sparse shift ------------------------------------------------------------------------------


def random_sparse(rng, n, kappa, s, delta):
    terms = {}
    s = min(s, (delta + 1) ** n)
    while len(terms) < s:
        terms[tuple(rng.randint(0, delta) for _ in range(n))] = tuple(rng.randrange(1, P) for _ in range(kappa))
    return HadamardPoly(n, kappa, Fp, terms)


def test_criterion_4_sparse_shift(acceptance_log):
    import sympy

    y = sympy.Symbol("y")
    rng = random.Random(404)
    fails = 0
    for _ in range(50):
        n, kappa, s = rng.randint(1, 4), rng.randint(1, 2), rng.randint(1, 6)
        f = random_sparse(rng, n, kappa, s, rng.randint(1, 2))
        sigma, ellp = sparse_shift(f)
        _, s_f, mu = support_stats(f)
        expected = 1 + min(2 * ceil_log2(kappa * s_f), mu)
        res = shifted_concentration(f, sigma, ellp)
        _, _, exps = sigma.layers[0]
        oracle = concentration_ranks(f, ellp, shift=[y**b for b in exps])
        fails += not (ellp == expected and res.concentrated and (res.rank_low, res.rank_full) == oracle)
    acceptance_log.record("4", fails == 0, f"50 sparse polynomials, {fails} failures, engine and sympy oracle agree")
    assert fails == 0


# --- 5: diagonal circuits ---------------------------------------------------------------------------


def diagonal_corpus():
    """56 circuits, seven for each k = 1..8, with exactly k forms."""
    from setpit.corpus import random_linear
    from setpit.formula import DiagonalCircuit

    rng = random.Random(505)
    out = []
    for i in range(56):
        k = i % 8 + 1
        n, d = rng.randint(1, 6), rng.randint(1, 6)
        forms = tuple((rng.choice([-3, -2, -1, 1, 2, 3]), random_linear(range(1, n + 1), rng)) for _ in range(k))
        out.append(DiagonalCircuit(n, d, forms))
    return out


def shifted_diagonal(c):
    """D(x + a) with a_j = alpha^j and D = (f_1^d, ..., f_k^d)."""
    _, F, d = diagonal_to_hadamard(c, P)
    D = F
    for _ in range(d - 1):
        D = D * F
    alpha = diagonal_alpha(c.forms, c.n, c.k, P)
    return D, shift(D, tuple(pow(alpha, j, P) for j in range(1, c.n + 1)))


def test_criterion_5_stated_ceil_log2_bound():
    """The stated ceil(log2 k) concentration; fails at powers of two (k = 1 already has no low span)."""
    for c in diagonal_corpus():
        _, Ds = shifted_diagonal(c)
        ok, _, _ = is_l_concentrated(Ds, ceil_log2(c.k), "support")
        assert ok, f"k = {c.k} is not ceil(log2 k)-concentrated"


test_criterion_5_stated_ceil_log2_bound = pytest.mark.xfail(
    strict=True, reason="off by one at powers of two; floor(log2 k) + 1 is what the basis argument gives"
)(test_criterion_5_stated_ceil_log2_bound)


def test_criterion_5_corrected_bound(acceptance_log):
    fails = cross = 0
    for i, c in enumerate(diagonal_corpus()):
        D, Ds = shifted_diagonal(c)
        ell = c.k.bit_length()  # floor(log2 k) + 1
        ok, r_low, r_full = is_l_concentrated(Ds, ell, "support")
        if i < 12 and len(D.terms) <= 84:
            alpha = diagonal_alpha(c.forms, c.n, c.k, P)
            a = [pow(alpha, j, P) for j in range(1, c.n + 1)]
            ok = ok and concentration_ranks(D, ell, shift=a) == (r_low, r_full)
            cross += 1
        fails += not ok
    acceptance_log.record("5", fails == 0, f"56 circuits floor(log2 k)+1-concentrated, {fails} failures, {cross} oracle-checked")
    assert fails == 0


def test_criterion_5_end_to_end(acceptance_log):
    rng = random.Random(515)
    circuits = diagonal_corpus()
    for _ in range(25):
        n, k, d = rng.randint(1, 6), rng.randint(2, 8), rng.randint(1, 6)
        circuits.append(zero_diagonal(n, k, d, rng))
    for _ in range(19):
        circuits.append(random_diagonal(rng.randint(1, 6), rng.randint(1, 8), rng.randint(1, 6), rng))
    agree = zeros = 0
    for i, c in enumerate(circuits):
        truth = is_zero_bruteforce(c)
        zeros += truth
        routes = [hitting_set_diagonal(c.k, c.n, c.power, circuit=c)]
        if i % 10 == 0:
            routes.append(hitting_set_diagonal(c.k, c.n, c.power))  # every candidate alpha, no circuit access
        good = True
        for hs in routes:
            SIZE_LOG.append(("diagonal", len(hs), hs.bound))
            v = test_blackbox(Blackbox.of(c), hs)
            good = good and v.zero == truth and (v.zero or evaluate_int(c, v.witness) != 0)
        agree += good
    ok = agree == len(circuits)
    acceptance_log.record("5", ok, f"end to end {agree}/{len(circuits)} agree with the oracle ({zeros} zero)")
    assert ok


# --- 6, 7: end-to-end PIT ---------------------------------------------------------------------------


def _end_to_end(circuits):
    agree = bad_witness = 0
    for c, truth in circuits:
        hs = hitting_set(c.params)
        SIZE_LOG.append((f"n={c.n} k={c.params.k} d={c.params.d} H={c.params.H}", len(hs), hs.bound))
        v = test_blackbox(Blackbox.of(c), hs)
        agree += v.zero == truth
        if not v.zero and evaluate_int(c, v.witness) == 0:
            bad_witness += 1
    return agree, bad_witness


def test_criterion_6_setml3(acceptance_log):
    rng = random.Random(606)
    t0 = time.perf_counter()
    nonzero, zero = [], []
    while len(nonzero) < 200 or len(zero) < 50:
        n = rng.randint(2, 8)
        k, d = rng.randint(1, 4), rng.randint(1, min(4, n))
        f = random_setml3(n, k, d, rng)
        if len(nonzero) < 200:
            if not is_zero_bruteforce(f):
                nonzero.append((f, False))
        if len(zero) < 50 and k >= 2:
            z = zero_variant(f, rng, k)
            assert is_zero_bruteforce(z)
            zero.append((z, True))
    agree, bad = _end_to_end(nonzero + zero)
    secs = time.perf_counter() - t0
    ok = agree == 250 and bad == 0 and secs < 600
    acceptance_log.record("6", ok, f"{agree}/250 agree (200 nonzero, 50 zero), {bad} bad witnesses, {secs:.0f}s (limit 600s)")
    assert ok


def test_criterion_7_setdepth4(acceptance_log):
    rng = random.Random(707)
    circuits = []
    for i in range(80):
        n, k, d, lam = rng.randint(2, 6), rng.randint(1, 2), rng.randint(1, 2), rng.randint(1, 3)
        f = random_set_depth(n, 4, k, d, lam, rng)
        if i % 4 == 3:
            f = zero_variant(f, rng, k)
        circuits.append((f, is_zero_bruteforce(f)))
    agree, bad = _end_to_end(circuits)
    fast = sum(1 for f, _ in circuits if ell_schedule(f.params)[0] >= f.n + 1)
    zeros = sum(t for _, t in circuits)
    ok = agree == len(circuits) and bad == 0
    acceptance_log.record("7", ok, f"{agree}/{len(circuits)} agree ({zeros} zero), {fast} took the l0 >= n+1 grid")
    assert ok


# --- 8: schedule -------------------------------------------------------------------------------------


def test_criterion_8_schedule(acceptance_log):
    import sympy

    checked = bad = 0
    for H in range(1, 5):
        for k in range(1, 17):
            for lam in range(1, 17):
                for Delta in (2 * H, 2 * H + 1):
                    s = ell_schedule(H=H, k=k, lam=lam, Delta=Delta)
                    ell = 2 * int(sympy.ceiling(H * sympy.log(k, 2))) + 1
                    top = H - 1 if Delta % 2 else H - 2
                    ok = all(s[h] == (s[h + 1] - 1) * H * (ell - 1) + 1 for h in range(top + 1))
                    if Delta % 2:
                        ok = ok and s[H] == 2
                    else:
                        ok = ok and s[H - 1] == 2 * int(sympy.ceiling(H * sympy.log(k * lam, 2))) + 1
                    checked += 1
                    bad += not ok
    worked = ell_schedule(H=2, k=2, lam=4, Delta=4)
    ok = bad == 0 and (worked[1], worked[0]) == (13, 97)
    acceptance_log.record("8", ok, f"{checked} schedules, {bad} violations, worked instance (l1, l0) = ({worked[1]}, {worked[0]})")
    assert ok


# --- 9: size accounting ---------------------------------------------------------------------------


def test_criterion_9_size_accounting(acceptance_log, tmp_path):
    from setpit.report import SWEEP_FIELDS, size_sweep, write_report

    sweeps = [[ClassParams(8, k, d, 1, 1, 3, max(k, d)) for k in range(1, 9)] for d in (2, 3)]
    rows_all = []
    monotone = within = True
    for params_list in sweeps:
        rows = size_sweep(params_list)
        rows_all += rows
        xs = [r["ell0"] * r["H"] * (r["log2_grid"] + math.log2(r["n"])) for r in rows]
        ys = [r["log2_bound"] for r in rows]
        monotone &= all(a <= b for a, b in zip(xs, xs[1:])) and all(a <= b for a, b in zip(ys, ys[1:]))
        within &= all(y <= x + 1e-9 for x, y in zip(xs, ys))
        for prm, r in zip(params_list, rows):
            within &= r["size"] <= r["bound"] == size_bound(prm)
            SIZE_LOG.append((f"sweep n={prm.n} k={prm.k} d={prm.d}", r["size"], r["bound"]))
    csv_path, png = write_report(rows_all, tmp_path / "size_sweep.csv", SWEEP_FIELDS)
    over = [entry for entry in SIZE_LOG if entry[1] > entry[2]]
    for label, size, bound in SIZE_LOG[-len(rows_all):]:
        print(f"  {label}: size {size} <= bound {bound}")
    ok = monotone and within and not over and png.stat().st_size > 0
    acceptance_log.record(
        "9", ok, f"{len(SIZE_LOG)} hitting sets logged, {len(over)} over the bound, sweep monotone={monotone}, log bound <= l0*H*log(grid*n): {within}"
    )
    assert ok


# --- 10: sparse PIT primitive ----------------------------------------------------------------------


def _poly_fn(terms):
    def f(pt):
        acc = 0
        for e, c in terms.items():
            t = c
            for x, k in zip(pt, e):
                t = t * pow(x, k, P) % P
            acc += t
        return acc % P

    return f


def test_criterion_10_sparse_pit(acceptance_log):
    rng = random.Random(1010)
    misses = patterns = 0
    for m in (1, 2):
        for delta in (0, 1, 2):
            monos = list(itertools.product(range(delta + 1), repeat=m))
            for r in range(1, len(monos) + 1):
                for support in itertools.combinations(monos, r):
                    for _ in range(2):
                        terms = {e: rng.randrange(1, P) for e in support}
                        hit, wit = low_variate_hitting(_poly_fn(terms), m, delta)
                        misses += not (hit and _poly_fn(terms)(wit) != 0)
                    patterns += 1
    trials = 0
    for _ in range(500):
        delta = rng.randint(0, 4)
        monos = list(itertools.product(range(delta + 1), repeat=3))
        support = rng.sample(monos, rng.randint(1, min(len(monos), 12)))
        terms = {e: rng.randrange(1, P) for e in support}
        hit, wit = low_variate_hitting(_poly_fn(terms), 3, delta)
        misses += not (hit and _poly_fn(terms)(wit) != 0)
        trials += 1
    acceptance_log.record("10", misses == 0, f"{patterns} exhaustive support patterns (m <= 2, delta <= 2), {trials} random m = 3 trials, {misses} misses")
    assert misses == 0
