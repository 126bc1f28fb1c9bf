from __future__ import annotations

import json
import random
from functools import reduce

import pytest
from hypothesis import given, settings, strategies as st

from setpit.algebra import DEFAULT_PRIME, PrimeField
from setpit.corpus import family, random_set_depth, random_setml3, zero_variant
from setpit.errors import DimensionMismatch, NotNormalized, PartitionViolation, SchemaError
from setpit.formula import (
    Blackbox,
    ClassParams,
    DiagonalCircuit,
    HadamardFormula,
    Leaf,
    Product,
    SetDepthFormula,
    Sum,
    canonical,
    class_params,
    contract,
    diagonal_to_hadamard,
    dumps,
    evaluate,
    evaluate_hadamard,
    evaluate_int,
    normalize_fanin,
    parse,
    serialize,
    to_hadamard_product,
    validate_partitions,
)
from setpit.hadamard import HadamardVec, Partition

P = DEFAULT_PRIME
MINIMAL = {"k": 1, "terms": [{"factors": [{"linear": {"1": 1}}, {"linear": {"3": 1}}]}], "partition": [[1, 2], [3, 4]]}


def rand_point(rng, n):
    return [rng.randrange(P) for _ in range(n)]


def test_minimal_compact_document():
    f = parse(MINIMAL)
    assert (f.n, f.depth) == (4, 3)
    for pt in ([2, 3, 5, 7], [1, 0, 0, 1], [9, 9, 4, 4]):
        assert evaluate_int(f, pt) == pt[0] * pt[2]


def test_partition_violation_names_gate():
    doc = {"terms": [{"factors": [{"linear": {"1": 1, "3": 1}}]}], "partition": [[1, 2], [3, 4]]}
    with pytest.raises(PartitionViolation, match="/root/sum/0/product/0"):
        parse(doc)


def test_two_factors_in_one_block_rejected():
    doc = {"terms": [{"factors": [{"linear": {"1": 1}}, {"linear": {"2": 1}}]}], "partition": [[1, 2], [3, 4]]}
    with pytest.raises(PartitionViolation):
        parse(doc)


@pytest.mark.parametrize(
    "doc, path",
    [
        ({"type": "set-depth", "n": 2, "depth": 3, "partitions": [], "root": {"sum": "x"}}, "/root/sum"),
        ({"terms": [{"factors": [{"linear": {"1": "a"}}]}]}, "/terms/0/factors/0/linear/1"),
        ({"type": "diagonal", "n": 2, "power": -1, "forms": [{"linear": {"1": 1}}]}, "/power"),
        ({"type": "nope"}, "/type"),
    ],
)
def test_schema_errors_carry_path(doc, path):
    with pytest.raises(SchemaError) as exc:
        parse(doc)
    assert exc.value.path == path


def test_declared_k_is_an_upper_bound():
    doc = dict(MINIMAL, terms=MINIMAL["terms"] * 2)
    with pytest.raises(SchemaError, match="/k"):
        parse(doc)


def test_not_json():
    with pytest.raises(SchemaError):
        parse("{oops")


def test_round_trip_random_size_20():
    rng = random.Random(20)
    f = random_set_depth(6, 5, 2, 2, 2, rng, full=True)
    assert class_params(f).s >= 20
    doc = serialize(f)
    again = parse(json.loads(json.dumps(doc)))
    assert serialize(again) == doc == canonical(doc)
    assert dumps(again) == dumps(f)


def test_canonical_compact_matches_full():
    f = parse(MINIMAL)
    doc = serialize(f)
    assert doc["version"] == 1 and doc["type"] == "set-depth"
    assert canonical(MINIMAL) == doc


def test_evaluate_examples():
    doc = {
        "terms": [
            {"factors": [{"linear": {"1": 1}}, {"linear": {"3": 1}}]},
            {"factors": [{"linear": {"2": 1}}, {"linear": {"4": 1}}]},
        ],
        "partition": [[1, 2], [3, 4]],
    }
    assert evaluate(parse(doc), [1, 1, 1, 1]).value == 2
    rng = random.Random(3)
    zero = parse(
        {
            "terms": [
                {"weight": 1, "factors": [{"linear": {"1": 1}}, {"linear": {"3": 1}}]},
                {"weight": -1, "factors": [{"linear": {"1": 1}}, {"linear": {"3": 1}}]},
            ],
            "partition": [[1, 2], [3, 4]],
        }
    )
    for _ in range(5):
        assert evaluate_int(zero, rand_point(rng, 4)) == 0


def test_evaluate_wrong_length():
    with pytest.raises(DimensionMismatch):
        evaluate(parse(MINIMAL), [1, 2])


def test_class_params_minimal():
    prm = parse(MINIMAL).params
    assert (prm.k, prm.d, prm.H, prm.Delta) == (1, 2, 1, 3)
    assert ClassParams.from_json(prm.to_json()) == prm


def test_class_params_invariants():
    with pytest.raises(ValueError):
        ClassParams(4, 2, 2, 1, 2, 3, 10)
    with pytest.raises(ValueError):
        ClassParams(4, 5, 2, 1, 1, 3, 4)


def test_normalize_pads_sum_fanin():
    rng = random.Random(5)
    f = random_setml3(6, 2, 3, rng)
    g = normalize_fanin(f, k=3)
    assert len(g.root.terms) == 3 and g.root.terms[-1][0] == 0
    for _ in range(10):
        pt = rand_point(rng, 6)
        assert evaluate_int(f, pt) == evaluate_int(g, pt)


def test_normalize_uniform_unchanged():
    rng = random.Random(6)
    f = random_set_depth(6, 5, 2, 2, 3, rng, full=True)
    f = normalize_fanin(f)
    assert normalize_fanin(f) == f


def test_normalize_pads_product_fanin():
    f = parse({"terms": [{"factors": [{"linear": {"1": 2, "2": 1}}]}], "partition": [[1, 2], [3]]})
    assert f.params.d == 2
    g = normalize_fanin(f, d=2)
    (w, prod), = g.root.terms
    assert len(prod.factors) == 2 and prod.factors[1] == Leaf.const(1)
    assert evaluate_int(g, [3, 4, 5]) == evaluate_int(f, [3, 4, 5]) == 10


def test_normalize_rejects_small_targets():
    rng = random.Random(1)
    f = random_setml3(6, 3, 3, rng)
    with pytest.raises(ValueError):
        normalize_fanin(f, k=f.params.k - 1 or 0, d=1)


def _check_hadamard_split(hf: HadamardFormula, rng):
    field = PrimeField(P)
    c, factors = to_hadamard_product(hf)
    kappa = hf.kappa
    for _ in range(4):
        pt = rand_point(rng, hf.n)
        prod = reduce(lambda a, b: a * b, (evaluate_hadamard(g, pt) for g in factors))
        assert contract(c, prod, kappa) == evaluate_hadamard(hf, pt)
    for g in factors:
        validate_partitions(g)
        assert g.kappa == kappa * len(hf.coords[0].terms)
    assert c.field == field
    return factors


def test_to_hadamard_k2_d2():
    f = parse(
        {
            "terms": [
                {"factors": [{"linear": {"1": 1}}, {"linear": {"3": 1}}]},
                {"factors": [{"linear": {"2": 1}}, {"linear": {"4": 1}}]},
            ],
            "partition": [[1, 2], [3, 4]],
        }
    )
    c, (f1, f2) = to_hadamard_product(f)
    assert c.coords == (1, 1)
    assert f1.coords == (Leaf.linear({1: 1}), Leaf.linear({2: 1}))
    assert f2.coords == (Leaf.linear({3: 1}), Leaf.linear({4: 1}))
    _check_hadamard_split(HadamardFormula.of(f), random.Random(0))


def test_to_hadamard_k1():
    f = parse(MINIMAL)
    c, factors = to_hadamard_product(f)
    assert c.coords == (1,)
    assert [g.coords for g in factors] == [(Leaf.linear({1: 1}),), (Leaf.linear({3: 1}),)]


def test_to_hadamard_requires_normalized():
    f = parse(
        {
            "terms": [
                {"factors": [{"linear": {"1": 1}}, {"linear": {"3": 1}}]},
                {"factors": [{"linear": {"2": 1}}]},
            ],
            "partition": [[1, 2], [3, 4]],
        }
    )
    with pytest.raises(NotNormalized):
        to_hadamard_product(f)
    to_hadamard_product(normalize_fanin(f))


def test_to_hadamard_height_two_respects_partitions():
    rng = random.Random(11)
    for _ in range(5):
        f = normalize_fanin(random_set_depth(8, 5, 2, 3, 2, rng))
        for g in _check_hadamard_split(HadamardFormula.of(f), rng):
            _check_hadamard_split(g, rng)


def test_diagonal_to_hadamard():
    c = DiagonalCircuit(2, 2, ((1, Leaf.linear({1: 1, 2: 1})), (-1, Leaf.linear({1: 1, 2: -1}))))
    w, F, d = diagonal_to_hadamard(c)
    assert d == 2 and F.kappa == 2 and w.coords == (1, P - 1)
    rng = random.Random(2)
    for _ in range(5):
        pt = rand_point(rng, 2)
        Fv = F.evaluate(pt)
        power = Fv * Fv
        assert sum(power.coords[i] * w.coords[i] for i in range(2)) % P == evaluate_int(c, pt)
        assert evaluate_int(c, pt) == 4 * pt[0] * pt[1] % P


def test_diagonal_single_and_zero_weights():
    c = DiagonalCircuit(3, 3, ((2, Leaf.linear({0: 1, 3: 1})),))
    w, F, _ = diagonal_to_hadamard(c)
    assert F.kappa == 1 and w.coords == (2,)
    z = DiagonalCircuit(3, 3, ((0, Leaf.linear({1: 1})), (0, Leaf.linear({2: 5}))))
    rng = random.Random(4)
    assert all(evaluate_int(z, rand_point(rng, 3)) == 0 for _ in range(5))


def test_dual_round_trip_and_eval():
    doc = {"type": "dual", "n": 2, "products": [{"weight": 3, "univariates": {"1": [1, 2], "2": [0, 0, 1]}}]}
    f = parse(doc)
    assert evaluate_int(f, [5, 7]) == 3 * 11 * 49
    assert canonical(doc) == serialize(f)


def test_blackbox_wraps_circuit():
    f = parse(MINIMAL)
    bb = Blackbox.of(f)
    assert bb([2, 0, 3, 0]) == 6 and bb.params == f.params
    with pytest.raises(DimensionMismatch):
        bb([1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["setml3", "setdepth4"]))
def test_generated_formulas_validate_and_round_trip(seed, fam):
    rng = random.Random(seed)
    f = family(fam, rng)
    validate_partitions(f)
    assert parse(dumps(f)) == f


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_injected_violation_is_caught(seed):
    rng = random.Random(seed)
    f = random_setml3(rng.randint(2, 6), 2, rng.randint(2, 4), rng)
    blocks = f.partitions[0].blocks
    # merge the factor on block 0 with a variable of block 1
    w, prod = f.root.terms[0]
    bad = Leaf.sparse([*prod.factors[0].terms, (((min(blocks[1]), 1),), 1)])
    root = Sum(((w, Product((bad,) + prod.factors[1:])),) + f.root.terms[1:])
    with pytest.raises(PartitionViolation):
        validate_partitions(SetDepthFormula(f.n, f.depth, root, f.partitions))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_normalize_preserves_semantics_and_params(seed):
    rng = random.Random(seed)
    f = random_set_depth(rng.randint(2, 7), rng.choice([3, 4, 5]), 3, 3, 3, rng)
    g = normalize_fanin(f)
    pf, pg = f.params, g.params
    assert (pg.k, pg.d, pg.lam) == (pf.k, pf.d, pf.lam)
    for _ in range(5):
        pt = rand_point(rng, f.n)
        assert evaluate_int(f, pt) == evaluate_int(g, pt)
    if f.product_layers:
        _check_hadamard_split(HadamardFormula.of(g), rng)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["setml3", "setdepth4", "diagonal"]))
def test_zero_constructions_vanish(seed, fam):
    rng = random.Random(seed)
    f = family(fam, rng, zero=True)
    assert all(evaluate_int(f, rand_point(rng, f.n)) == 0 for _ in range(4))


def test_zero_variant_keeps_fanin():
    rng = random.Random(8)
    f = random_setml3(6, 4, 3, rng)
    z = zero_variant(f, rng, 4)
    assert len(z.root.terms) <= 4
    validate_partitions(z)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["setml3", "setdepth4", "diagonal"]), st.sampled_from([DEFAULT_PRIME, 1_000_003]))
def test_batch_evaluation_matches_pointwise(seed, fam, p):
    from setpit.formula import evaluate_batch

    rng = random.Random(seed)
    c = family(fam, rng, zero=rng.random() < 0.3)
    pts = [tuple(rng.randrange(p) for _ in range(c.n)) for _ in range(20)] + [(p - 1,) * c.n, (0,) * c.n]
    assert evaluate_batch(c, pts, p) == [evaluate_int(c, q, p) for q in pts]
