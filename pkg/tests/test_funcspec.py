import json
import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from halfspace_lab.funcspec import (BallSpec, ConstantOracle, LabelTable, NoSpec, SamplerExhausted,
                                    TruthTableOracle, draw_no, draw_yes, enumerate_satisfying, eval_no, eval_yes,
                                    piece_bits, piece_index, samp_no, samp_yes, spec_from_json, spec_to_json)
from halfspace_lab.hypercube import Params, Point, SignVector, ball_size, hamming, row_codes, sample_sphere
from halfspace_lab.stats import chisquare_pvalue


def no_spec(n, r, t, rng, labels=None, z=None):
    z = Point.random(n, rng) if z is None else z
    zetas = tuple(SignVector.random(n, rng) for _ in range(t))
    table = LabelTable.random(t, rng) if labels is None else LabelTable.from_labels(labels)
    return NoSpec(n, z, r, zetas, table)


def test_eval_yes_examples():
    spec = BallSpec(4, Point.zeros(4), 2)
    assert eval_yes(spec, Point.from_str("0011")) == 1
    assert eval_yes(spec, Point.from_str("0111")) == 0
    assert eval_yes(spec, spec.z) == 1


def test_piece_index_examples():
    z = Point.zeros(4)
    plus, minus = SignVector.from_signs([1] * 4), SignVector.from_signs([-1] * 4)
    x = Point.from_str("0110")
    s1 = NoSpec(4, z, 2, (plus,), LabelTable.constant(1, 1))
    s0 = NoSpec(4, z, 2, (minus,), LabelTable.constant(1, 1))
    assert piece_bits(piece_index(s1, x), 1) == "1"
    assert piece_bits(piece_index(s0, x), 1) == "0"
    alt = SignVector.from_signs([1, -1, 1, -1])
    s2 = NoSpec(4, z, 2, (alt, plus), LabelTable.constant(2, 0))
    assert piece_bits(piece_index(s2, Point.from_str("1100")), 2) == "11"
    # the first hyperplane is character 0
    assert piece_bits(piece_index(s2, Point.from_str("0101")), 2) == "01"
    with pytest.raises(ValueError):
        piece_index(s2, Point.from_str("1110"))


def test_eval_no_cases():
    rng = np.random.default_rng(0)
    labels = [0, 1] * 8
    spec = no_spec(20, 4, 4, rng, labels)
    z = spec.z
    assert eval_no(spec, z.flip(range(3))) == 1
    assert eval_no(spec, z.flip(range(5))) == 0
    for _ in range(50):
        x = sample_sphere(z, 4, rng)
        assert eval_no(spec, x) == labels[piece_index(spec, x)]
    assert any(eval_no(spec, sample_sphere(z, 4, rng)) == 0 for _ in range(50))


@given(st.data())
@settings(max_examples=40)
def test_yes_and_no_agree_off_sphere(data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32)))
    n = data.draw(st.integers(8, 200))
    r = 2 * data.draw(st.integers(1, n // 4))
    spec = no_spec(n, r, data.draw(st.integers(1, 8)), rng)
    yes = BallSpec(n, spec.z, r)
    for d in (r - 1, r + 1):
        x = sample_sphere(spec.z, d, rng)
        assert eval_no(spec, x) == eval_yes(yes, x)


@given(st.data())
@settings(max_examples=40)
def test_piece_index_matches_sign_tests(data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32)))
    n = data.draw(st.integers(4, 64))
    r = 2 * data.draw(st.integers(1, n // 4))
    spec = no_spec(n, r, data.draw(st.integers(1, 12)), rng)
    x, y = sample_sphere(spec.z, r, rng), sample_sphere(spec.z, r, rng)
    signs = lambda p: [int(zeta.to_array() @ (p ^ spec.z).to_array().astype(int) >= 0) for zeta in spec.zetas]
    assert (piece_index(spec, x) == piece_index(spec, y)) == (signs(x) == signs(y))
    flips = np.stack([(p ^ spec.z).to_array() for p in (x, y)])
    assert spec.piece_indices(flips).tolist() == [piece_index(spec, x), piece_index(spec, y)]


def test_label_table_keyed_and_explicit():
    rng = np.random.default_rng(1)
    keyed = LabelTable.random(40, rng)
    assert keyed.mode == "keyed"
    again = LabelTable.from_json(40, json.loads(json.dumps(keyed.to_json())))
    idx = [0, 1, 2**39, 2**40 - 1, 123456789]
    assert [keyed.lookup(i) for i in idx] == [again.lookup(i) for i in idx]
    assert keyed.lookup_many(np.array(idx)).tolist() == [keyed.lookup(i) for i in idx]
    # frozen vector: blake2b of the 8-byte index under a fixed key
    fixed = LabelTable(3, "keyed", seed=bytes(range(16)))
    assert [fixed.lookup(i) for i in range(8)] == FROZEN_KEYED_LABELS
    ones = sum(keyed.lookup(i) for i in range(4000))
    assert abs(ones - 2000) < 4 * math.sqrt(1000)
    ex = LabelTable.random(24, rng)
    assert ex.mode == "explicit" and len(ex.bits) == 2**21
    tiny = LabelTable.random(2, rng)
    assert tiny.bits[0] < 16
    assert LabelTable.from_labels([0, 1, 1, 0]).lookup_many(np.arange(4)).tolist() == [0, 1, 1, 0]
    with pytest.raises(ValueError):
        ex.lookup(2**24)
    with pytest.raises(ValueError):
        LabelTable(27, "explicit", bits=b"")


FROZEN_KEYED_LABELS = [1, 0, 1, 0, 0, 0, 0, 1]  # hashlib.blake2b computed outside the package


def test_enumerate_examples():
    ball = BallSpec(3, Point.zeros(3), 1)
    assert [x.to_str() for x in enumerate_satisfying(ball)] == ["000", "001", "010", "100"]
    dead = NoSpec(3, Point.zeros(3), 2, (SignVector.random(3, np.random.default_rng(0)),), LabelTable.constant(1, 0))
    assert sorted(x.to_str() for x in enumerate_satisfying(dead)) == ["000", "001", "010", "100"]
    for n, r in [(5, 2), (8, 3), (10, 2)]:
        assert len(enumerate_satisfying(BallSpec(n, Point.from_indices(n, [0]), r))) == sum(
            math.comb(n, k) for k in range(r + 1))
    with pytest.raises(ValueError):
        enumerate_satisfying(BallSpec(21, Point.zeros(21), 2))


def test_samp_yes_tiny():
    rng = np.random.default_rng(2)
    spec = BallSpec(3, Point.zeros(3), 1)
    counts = {}
    for _ in range(8000):
        x = samp_yes(spec, rng)
        assert spec.eval(x)
        counts[x.to_str()] = counts.get(x.to_str(), 0) + 1
    assert set(counts) == {"000", "001", "010", "100"}
    assert chisquare_pvalue(list(counts.values()), [1] * 4) > 0.01


def _chi_vs_enumeration(spec, mat):
    support = [x.bits for x in enumerate_satisfying(spec)]
    counts = np.bincount(row_codes(mat), minlength=1 << spec.n)
    assert counts.sum() == counts[support].sum(), "draw outside the support"
    return chisquare_pvalue(counts[support], [1] * len(support))


def test_samp_yes_n10_matches_enumeration():
    rng = np.random.default_rng(3)
    spec = BallSpec(10, Point.random(10, rng), 2)
    assert spec.count_satisfying() == 56
    pts = spec.samp_many(200_000, rng)
    assert _chi_vs_enumeration(spec, np.stack([p.to_array() for p in pts[:20000]])) > 0.01
    mat = np.stack([p.to_array() for p in pts])
    assert _chi_vs_enumeration(spec, mat) > 0.01


def test_samp_no_n12_t4_matches_enumeration():
    rng = np.random.default_rng(4)
    spec = no_spec(12, 2, 4, rng)
    mat = spec.samp_flips(100_000, rng) ^ spec.z.to_array()
    assert _chi_vs_enumeration(spec, mat) > 0.01
    scal = np.stack([samp_no(spec, rng).to_array() for _ in range(10_000)])
    assert _chi_vs_enumeration(spec, scal) > 0.01


def test_samp_no_label_extremes():
    rng = np.random.default_rng(5)
    z = Point.random(10, rng)
    allone = no_spec(10, 2, 3, rng, [1] * 8, z)
    assert enumerate_satisfying(allone) == enumerate_satisfying(BallSpec(10, z, 2))
    mat = allone.samp_flips(40_000, rng) ^ z.to_array()
    assert _chi_vs_enumeration(BallSpec(10, z, 2), mat) > 0.01
    allzero = no_spec(10, 2, 3, rng, [0] * 8, z)
    mat = allzero.samp_flips(4000, rng, max_tries=10**4) ^ z.to_array()
    assert _chi_vs_enumeration(BallSpec(10, z, 1), mat) > 0.01
    # the default budget assumes half the sphere accepts; an all-0 sphere with tiny interior exhausts it
    big = no_spec(4096, 28, 2, rng, [0] * 4, Point.random(4096, rng))
    with pytest.raises(SamplerExhausted):
        big.samp(rng)


def test_samp_no_sphere_share_matches_count():
    rng = np.random.default_rng(6)
    spec = no_spec(12, 4, 5, rng)
    total = spec.count_satisfying()
    assert total == len(enumerate_satisfying(spec))
    on = total - ball_size(12, 3)
    draws = spec.samp_many(40_000, rng)
    k = sum(hamming(x, spec.z) == 4 for x in draws)
    p = on / total
    assert abs(k / 40_000 - p) < 4 * math.sqrt(p * (1 - p) / 40_000)


def test_draw_determinism_and_sizes():
    p = Params.manual(4096, 28, s=5)
    a = draw_no(p, np.random.default_rng(9))
    b = draw_no(p, np.random.default_rng(9))
    assert a == b and spec_to_json(a) == spec_to_json(b)
    assert a.t == 24 and a.labels.mode == "explicit" and len(a.labels.bits) * 8 == 2**24
    assert draw_yes(p, np.random.default_rng(3)) == draw_yes(p, np.random.default_rng(3))
    k = draw_no(p, np.random.default_rng(9), label_mode="keyed")
    assert k.labels.mode == "keyed"
    z = Point.random(4096, np.random.default_rng(1))
    assert draw_no(p, np.random.default_rng(2), z=z).z == z


def test_center_marginal():
    rng = np.random.default_rng(7)
    p = Params.manual(16, 2)
    m = 100_000
    freq = np.stack([draw_yes(p, rng).z.to_array() for _ in range(m)]).mean(axis=0)
    assert np.all(np.abs(freq - 0.5) <= 3 * math.sqrt(0.25 / m))


def test_json_round_trip_and_schema():
    rng = np.random.default_rng(8)
    for t, mode in [(3, None), (30, None), (5, "keyed")]:
        spec = no_spec(40, 6, t, rng) if mode is None else NoSpec(
            40, Point.random(40, rng), 6, tuple(SignVector.random(40, rng) for _ in range(t)),
            LabelTable.random(t, rng, mode))
        d = json.loads(spec_to_json(spec))
        assert set(d) == {"type", "n", "r", "z", "zetas", "labels"} and d["type"] == "no"
        assert set(d["labels"]) == ({"mode", "bits"} if d["labels"]["mode"] == "explicit" else {"mode", "seed"})
        back = spec_from_json(spec_to_json(spec))
        assert back == spec and spec_to_json(back) == spec_to_json(spec)
    ball = BallSpec(40, Point.random(40, rng), 6)
    assert json.loads(spec_to_json(ball)) == {"type": "ball", "n": 40, "r": 6, "z": ball.z.to_hex()}
    assert spec_from_json(spec_to_json(ball)) == ball
    with pytest.raises(ValueError):
        spec_from_json({"type": "cube", "n": 4, "r": 2, "z": "00"})


def test_other_oracles():
    rng = np.random.default_rng(10)
    spec = BallSpec(5, Point.random(5, rng), 2)
    tt = TruthTableOracle.from_oracle(spec)
    assert all(tt.eval(Point(5, k)) == spec.eval(Point(5, k)) for k in range(32))
    assert all(spec.eval(tt.samp(rng)) for _ in range(100))
    assert ConstantOracle(5).eval(Point.zeros(5)) == 1
    with pytest.raises(ValueError):
        ConstantOracle(5, 0).samp(rng)
