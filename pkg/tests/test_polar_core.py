import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dascl.polar_core import (
    PolarCodeSpec,
    bit_reversal_permutation,
    build_code,
    butterfly,
    construct_reliability,
    encode,
    plan_code,
    polar_transform,
    read_reliability_file,
    write_reliability_file,
)

from conftest import make_code


def dense_generator(N):
    """G_N = B_N F^{(x)n} built from np.kron and an explicit permutation matrix."""
    n = int(math.log2(N))
    F = np.array([[1, 0], [1, 1]], dtype=np.int64)
    Fn = np.ones((1, 1), dtype=np.int64)
    for _ in range(n):
        Fn = np.kron(F, Fn)
    B = np.zeros((N, N), dtype=np.int64)
    for i in range(N):
        rev = int(format(i, f"0{n}b")[::-1], 2) if n else 0
        B[i, rev] = 1
    return (B @ Fn) % 2


# --------------------------------------------------------------------------- bit reversal


def test_bit_reversal_small():
    assert bit_reversal_permutation(0).tolist() == [0]
    assert bit_reversal_permutation(1).tolist() == [0, 1]
    assert bit_reversal_permutation(2).tolist() == [0, 2, 1, 3]
    assert bit_reversal_permutation(3)[3] == 6


@given(st.integers(0, 12))
def test_bit_reversal_is_involution(n):
    p = bit_reversal_permutation(n)
    assert np.array_equal(p[p], np.arange(1 << n))


def test_bit_reversal_rejects_negative():
    with pytest.raises(ValueError):
        bit_reversal_permutation(-1)


# --------------------------------------------------------------------------- transform


def test_transform_examples():
    assert polar_transform(np.zeros(16, dtype=np.uint8)).tolist() == [0] * 16
    assert polar_transform(np.array([0, 1])).tolist() == [1, 1]
    assert polar_transform(np.array([0, 0, 0, 1])).tolist() == [1, 1, 1, 1]


@pytest.mark.parametrize("N", [1, 2, 4, 8, 16, 32])
def test_transform_matches_dense_generator(N):
    G = dense_generator(N)
    rng = np.random.default_rng(N)
    u = rng.integers(0, 2, (300, N))
    assert np.array_equal(polar_transform(u), (u @ G) % 2)


@given(st.integers(0, 8).flatmap(lambda n: st.lists(st.integers(0, 1), min_size=1 << n, max_size=1 << n)))
def test_butterfly_is_self_inverse(bits):
    u = np.array(bits, dtype=np.uint8)
    assert np.array_equal(butterfly(butterfly(u)), u)


def test_transform_rejects_bad_length():
    with pytest.raises(ValueError):
        polar_transform(np.zeros(6, dtype=np.uint8))


# --------------------------------------------------------------------------- encode


def test_encode_zero_payload():
    code = build_code(32, 16)
    assert not encode(np.zeros(16, dtype=np.uint8), code).any()


def test_encode_rate_one_is_transform():
    code = build_code(16, 16)
    u = np.random.default_rng(0).integers(0, 2, 16).astype(np.uint8)
    assert np.array_equal(encode(u, code), polar_transform(u))


def test_encode_n8_matches_generator_rows():
    code = make_code(8, [3, 5, 6, 7])
    G = dense_generator(8)
    x = encode(np.array([1, 0, 0, 0]), code)
    assert np.array_equal(x, G[3])
    assert x.tolist() == [1, 0, 1, 0, 1, 0, 1, 0]


@pytest.mark.parametrize("N", [2, 4, 8, 16, 32])
def test_encode_matches_dense_for_random_codes(N):
    rng = np.random.default_rng(100 + N)
    G = dense_generator(N)
    for _ in range(20):
        K = int(rng.integers(1, N + 1))
        info = np.sort(rng.choice(N, K, replace=False))
        code = make_code(N, info.tolist())
        payload = rng.integers(0, 2, K)
        u = np.zeros(N, dtype=np.int64)
        u[info] = payload
        assert np.array_equal(encode(payload, code), (u @ G) % 2)


def test_encode_length_mismatch():
    with pytest.raises(ValueError):
        encode(np.zeros(5, dtype=np.uint8), build_code(16, 8))


# --------------------------------------------------------------------------- construction


def test_bhattacharyya_n2():
    prof = construct_reliability("bhattacharyya", 2, 0.5)
    assert np.allclose(-prof.scores, [0.75, 0.25])
    assert prof.order().tolist() == [1, 0]


def test_bhattacharyya_noiseless_ties_by_index():
    prof = construct_reliability("bhatta", 8, 0.0)
    assert not prof.scores.any()
    assert prof.order().tolist() == list(range(8))


def bhatta_oracle(N, z0):
    n = int(math.log2(N))
    out = []
    for i in range(N):
        z = z0
        for b in format(i, f"0{n}b"):  # MSB first
            z = z * z if b == "1" else 2 * z - z * z
        out.append(z)
    return np.array(out)


@pytest.mark.parametrize("N", [8, 64, 512])
def test_bhattacharyya_matches_recursion_oracle(N):
    prof = construct_reliability("bhattacharyya", N, 0.5)
    assert np.allclose(-prof.scores, bhatta_oracle(N, 0.5))


def test_bhattacharyya_n8_top4():
    prof = construct_reliability("bhattacharyya", 8, 0.5)
    assert set(prof.order()[:4].tolist()) == {7, 6, 5, 3}


@pytest.mark.parametrize("method", ["bhattacharyya", "gaussian-approx"])
def test_bitwise_dominance_partial_order(method):
    # if the ones of i are a subset of the ones of j, channel j is at least as good
    N = 256
    s = construct_reliability(method, N, None).scores
    for i in range(N):
        for b in range(8):
            j = i | (1 << b)
            assert s[j] >= s[i] - 1e-9


def test_ga_plus_branch_doubles_mean():
    sigma2 = 1.0 / (2 * 0.5 * 10 ** 0.2)
    prof = construct_reliability("ga", 2, 2.0, rate=0.5)
    assert prof.scores[1] == pytest.approx(2 * 2 / sigma2)
    assert 0 < prof.scores[0] < 2 / sigma2


def test_ga_is_deterministic_and_finite():
    a = construct_reliability("ga", 1024, 2.0).scores
    b = construct_reliability("ga", 1024, 2.0).scores
    assert np.array_equal(a, b)
    assert np.all(np.isfinite(a))


def test_imported_roundtrip(tmp_path):
    order = construct_reliability("ga", 64, 1.0).order()
    path = tmp_path / "rel.txt"
    write_reliability_file(path, order, header="test sequence")
    prof = construct_reliability("imported", 64, path=path)
    assert np.array_equal(prof.order(), order)


def test_imported_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0\n1\nx\n3\n")
    with pytest.raises(ValueError):
        construct_reliability("file", 4, path=bad)
    dup = tmp_path / "dup.txt"
    dup.write_text("# comment\n0\n1\n1\n3\n")
    with pytest.raises(ValueError):
        read_reliability_file(dup)
    short = tmp_path / "short.txt"
    short.write_text("0\n1\n")
    with pytest.raises(ValueError):
        construct_reliability("imported", 4, path=short)


def test_unknown_method():
    with pytest.raises(ValueError):
        construct_reliability("magic", 8, 0.0)


# --------------------------------------------------------------------------- plan_code


def test_plan_good_counts_2048():
    prof = construct_reliability("ga", 2048, 2.0)
    assert plan_code(prof, 2048, 1040, 0.75).n_good == 780
    assert plan_code(prof, 2048, 1040, 0.80).n_good == 832
    assert plan_code(prof, 2048, 1040, 0.0).n_good == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.data())
def test_plan_invariants(n, data):
    N = 1 << n
    K = data.draw(st.integers(0, N))
    frac = data.draw(st.floats(0, 1))
    code = build_code(N, K, frac, "bhattacharyya", 0.5)
    info = set(code.info_indices.tolist())
    good = set(code.good_indices.tolist())
    assert len(info) == K
    assert good <= info
    assert len(good) == math.ceil(round(frac * K, 9))
    assert set(code.reliability_order[:K].tolist()) == info
    assert good == set(code.reliability_order[: len(good)].tolist())
    assert len(good) + int(code.bad_mask.sum()) == K


def test_plan_errors():
    prof = construct_reliability("bhatta", 16, 0.5)
    with pytest.raises(ValueError):
        plan_code(prof, 16, 17)
    with pytest.raises(ValueError):
        plan_code(prof, 16, 8, 1.5)
    with pytest.raises(ValueError):
        plan_code(prof, 32, 8)


def test_code_spec_rejects_inconsistent_masks():
    with pytest.raises(ValueError):
        PolarCodeSpec(4, 2, np.array([1, 1, 0, 0], bool), np.array([3, 2, 1, 0]), np.array([1, 0, 0, 0], bool))
    with pytest.raises(ValueError):
        PolarCodeSpec(4, 2, np.array([1, 1, 0, 0], bool), np.array([0, 1, 2, 3]), np.zeros(4, bool))
