import itertools
import json
from fractions import Fraction

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings
from scipy.optimize import linprog

from halfspace_lab.funcspec import BallSpec, LabelTable, NoSpec, TruthTableOracle, enumerate_satisfying
from halfspace_lab.hypercube import Params, Point, SignVector, hamming
from halfspace_lab.ltf import (GoodTuple, LabeledSet, LtfWitness, block_family, certify, enumerate_ltfs,
                               greedy_disjoint_pack, is_ltf, is_pairwise_disjoint, is_violating, make_good_tuple,
                               random_pool, reldist_exact_small, reldist_lower_cert, truth_table, tuple_labels,
                               violating_family)
from halfspace_lab.rational_lp import solve_farkas

# threshold-function counts on n = 1..4 inputs (a classical sequence, independent of this code)
KNOWN_LTF_COUNTS = {1: 4, 2: 14, 3: 104, 4: 1882}


def labeled(n, table):
    return LabeledSet.from_truth_table(n, table)


def brute_force_ltfs(n):
    """Tables of 1[w.x >= theta] over w in {-8..8}^n, theta in {-16..16}."""
    pts = np.array([[(k >> j) & 1 for j in range(n)] for k in range(1 << n)])
    ws = np.array(list(itertools.product(range(-8, 9), repeat=n)))
    dots = ws @ pts.T
    out = set()
    for theta in range(-16, 17):
        bits = (dots >= theta).astype(np.int64)
        out.update((bits << np.arange(1 << n)).sum(axis=1).tolist())
    return out


def test_and_xor():
    and2 = labeled(2, 0b1000)
    w = is_ltf(and2)
    assert w.feasible and w.check(and2)
    assert not is_ltf(labeled(2, 0b0110)).feasible
    assert not is_ltf(labeled(2, 0b1001)).feasible
    ok = LtfWitness(True, (Fraction(2), Fraction(2)), Fraction(3))
    assert ok.check(and2)
    assert not LtfWitness(True, (Fraction(1), Fraction(0)), Fraction(1)).check(and2)


def test_is_ltf_edge_cases():
    assert is_ltf(LabeledSet(3, ())).feasible
    assert is_ltf(labeled(3, 0)).feasible and is_ltf(labeled(3, 255)).feasible
    with pytest.raises(ValueError):
        LabeledSet(2, ((Point.zeros(2), 1), (Point.zeros(2), 0)))
    dup = LabeledSet(2, ((Point.zeros(2), 1), (Point.zeros(2), 1)))
    assert len(dup) == 1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_is_ltf_matches_integer_search(n):
    brute = brute_force_ltfs(n)
    for table in range(1 << (1 << n)):
        w = is_ltf(labeled(n, table))
        assert w.feasible == (table in brute)
        assert w.check(labeled(n, table))
    assert enumerate_ltfs(n) == frozenset(brute)


def test_enumerate_counts():
    for n, c in KNOWN_LTF_COUNTS.items():
        assert len(enumerate_ltfs(n)) == c
    assert 0b0110 not in enumerate_ltfs(2) and 0b1001 not in enumerate_ltfs(2)
    with pytest.raises(ValueError):
        enumerate_ltfs(5)


def test_enumerate_n4_spot_checks():
    rng = np.random.default_rng(0)
    ltfs = enumerate_ltfs(4)
    for table in rng.integers(0, 1 << 16, size=60).tolist():
        assert is_ltf(labeled(4, table)).feasible == (table in ltfs)


def test_reldist_exact_small():
    assert reldist_exact_small(2, 0b0110) == Fraction(1, 2)
    assert reldist_exact_small(2, 0b1000) == 0
    with pytest.raises(ValueError):
        reldist_exact_small(2, 0)


def test_reldist_xor_by_hand():
    # brute force straight from the definition over the 14 two-input LTFs
    f = 0b0110
    best = min(Fraction(bin(f ^ h).count("1"), 2) for h in brute_force_ltfs(2))
    assert best == reldist_exact_small(2, f)


@given(st.data())
@settings(max_examples=60)
def test_farkas_certificates(data):
    m = data.draw(st.integers(1, 9))
    d = data.draw(st.integers(1, 4))
    A = [[data.draw(st.integers(-3, 3)) for _ in range(d)] for _ in range(m)]
    res = solve_farkas(A)
    # batch=1 forces constraint generation even on tiny systems
    for r in (res, solve_farkas(A, batch=1)):
        if r.feasible:
            v = r.point
            assert all(sum(a * x for a, x in zip(row, v)) <= -1 for row in A)
        else:
            y = r.multipliers
            assert all(v >= 0 for v in y) and sum(y) == 1
            assert all(sum(y[i] * A[i][k] for i in range(m)) == 0 for k in range(d))
        assert r.feasible == res.feasible
    lp = linprog(np.zeros(d), A_ub=np.array(A, float), b_ub=-np.ones(m), bounds=[(None, None)] * d,
                 method="highs")
    assert res.feasible == (lp.status == 0)


def test_good_tuple_example():
    t = make_good_tuple(Point.zeros(4), 2, blocks=[[0], [1], [2], [3]])
    assert [x.to_str() for x in t.points] == ["1010", "1001", "0110", "0101"]
    with pytest.raises(ValueError):
        make_good_tuple(Point.zeros(6), 4, np.random.default_rng(0))
    with pytest.raises(ValueError):
        make_good_tuple(Point.zeros(8), 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        GoodTuple(Point.zeros(8), ((0,), (0,), (1,), (2,)))


@given(st.data())
def test_good_tuple_bullets_and_midpoint(data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32)))
    r = 2 * data.draw(st.integers(1, 10))
    n = data.draw(st.integers(2 * r, 3 * r + 40))
    z = Point.random(n, rng)
    t = make_good_tuple(z, r, rng)
    J1, J2, J3, J4 = (set(b) for b in t.blocks)
    us = [(x ^ z).to_array() for x in t.points]
    for x in t.points:
        assert hamming(x, z) == r
    u1, u2, u3, u4 = us
    assert all(u1[j] == u2[j] == 1 and u3[j] == u4[j] == 0 for j in J1)
    assert all(u1[j] == u2[j] == 0 and u3[j] == u4[j] == 1 for j in J2)
    assert all(u1[j] == u3[j] == 1 and u2[j] == u4[j] == 0 for j in J3)
    assert all(u1[j] == u3[j] == 0 and u2[j] == u4[j] == 1 for j in J4)
    outside = sorted(set(range(n)) - (J1 | J2 | J3 | J4))
    assert all(not u[outside].any() for u in us)
    x1, x2, x3, x4 = (x.to_array().astype(int) for x in t.points)
    assert (x1 + x4 == x2 + x3).all()


@given(st.data())
@settings(max_examples=25)
def test_violating_pattern_is_not_ltf(data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32)))
    r = 2 * data.draw(st.integers(1, 4))
    n = data.draw(st.integers(2 * r, 2 * r + 6))
    t = make_good_tuple(Point.random(n, rng), r, rng)
    a = data.draw(st.integers(0, 1))
    pairs = tuple(zip(t.points, (a, 1 - a, 1 - a, a)))
    w = is_ltf(LabeledSet(n, pairs))
    assert not w.feasible and w.check(LabeledSet(n, pairs))
    viol = LtfWitness(False, violating=t)
    assert viol.check(LabeledSet(n, pairs))


def test_is_violating_examples():
    t = make_good_tuple(Point.zeros(4), 2, blocks=[[0], [1], [2], [3]])
    codes = [x.bits for x in t.points]

    def table_for(labels):
        return TruthTableOracle(4, sum(1 << c for c, b in zip(codes, labels) if b))

    assert is_violating(t, table_for((1, 0, 0, 1))) == 1
    assert is_violating(t, table_for((0, 1, 1, 0))) == 1
    assert is_violating(t, table_for((1, 1, 1, 1))) == 0
    assert is_violating(t, table_for((1, 0, 1, 0))) == 0


def test_greedy_pack_examples():
    z = Point.zeros(8)
    a = make_good_tuple(z, 2, blocks=[[0], [1], [2], [3]])
    b = make_good_tuple(z, 2, blocks=[[4], [5], [6], [7]])
    assert greedy_disjoint_pack([a]) == [a]
    assert greedy_disjoint_pack([a, b]) == [a, b]
    assert greedy_disjoint_pack([a, a]) == [a]
    with pytest.raises(ValueError):
        greedy_disjoint_pack([a, make_good_tuple(Point.ones(8), 2, blocks=[[0], [1], [2], [3]])])


@given(st.data())
@settings(max_examples=30)
def test_greedy_pack_disjoint_and_deterministic(data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32)))
    z = Point.random(10, rng)
    pool = random_pool(z, 2, data.draw(st.integers(1, 60)), rng)
    out = greedy_disjoint_pack(pool)
    assert is_pairwise_disjoint(out)
    assert out == greedy_disjoint_pack(list(pool))
    used = {x.bits for t in out for x in t.points}
    for t in pool:
        if t not in out:
            assert not used.isdisjoint(x.bits for x in t.points)


def test_block_family_counts():
    assert len(block_family(Point.zeros(8), 2)) == 2
    assert len(block_family(Point.zeros(4096), 28)) == 73
    assert len(block_family(Point.zeros(12), 6)) == 1
    fam = block_family(Point.random(4096, np.random.default_rng(0)), 28)
    assert greedy_disjoint_pack(fam) == fam
    with pytest.raises(ValueError):
        block_family(Point.zeros(10), 6)


def _no(n, r, t, rng, labels=None):
    z = Point.random(n, rng)
    zetas = tuple(SignVector.random(n, rng) for _ in range(t))
    table = LabelTable.random(t, rng) if labels is None else LabelTable.from_labels(labels)
    return NoSpec(n, z, r, zetas, table)


def test_certificate_basics():
    rng = np.random.default_rng(3)
    g = _no(16, 2, 3, rng, [1] * 8)
    fam = greedy_disjoint_pack(random_pool(g.z, 2, 300, rng))
    assert reldist_lower_cert(g, fam) == 0
    # ball indicators have no violating tuple
    assert all(not is_violating(t, BallSpec(16, g.z, 2)) for t in fam)
    g = _no(16, 2, 3, rng)
    assert reldist_lower_cert(g, []) == 0
    with pytest.raises(ValueError):
        certify(g, [fam[0], fam[0]])
    cert = certify(g, violating_family(g, random_pool(g.z, 2, 500, rng)))
    assert cert.denominator == len(enumerate_satisfying(g))
    assert cert.value == Fraction(cert.violating, cert.denominator)
    bound = certify(g, cert.family, "upper_bound")
    assert bound.denominator == 1 + 16 + 120 and bound.value <= cert.value
    d = json.loads(json.dumps(cert.to_json()))
    assert Fraction(d["value"]) == cert.value and len(d["tuples"]) == cert.family_size
    assert all(tuple(t["labels"]) == tuple_labels(ft, g) for t, ft in zip(d["tuples"], cert.family))


def test_certificate_sound_on_n4():
    rng = np.random.default_rng(4)
    p = Params.manual(4, 2, s=3)
    from halfspace_lab.funcspec import draw_no

    for _ in range(20):
        g = draw_no(p, rng)
        fam = violating_family(g, random_pool(g.z, 2, 30, rng))
        assert reldist_lower_cert(g, fam) <= reldist_exact_small(4, truth_table(g))
