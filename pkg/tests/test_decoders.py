import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dascl.channel import ChannelParams, frame_rng, transmit
from dascl.crc import CrcSpec, crc_attach
from dascl.decoders import (
    CandidateSet,
    DecoderConfig,
    DecoderPath,
    PathList,
    adaptive_decode,
    adaptive_schedule,
    decode,
    extend_decision_aided,
    extend_full,
    group_candidate_metrics,
    penalty,
    prune_top_L,
    sc_decode,
    select_output_path,
    serial_scl_decode,
)
from dascl.polar_core import build_code, butterfly, encode, natural_order_llrs

from conftest import make_code


# --------------------------------------------------------------------------- oracles


def pen(a, b):
    return math.log1p(math.exp(-(1 - 2 * b) * a)) if (1 - 2 * b) * a > -30 else -(1 - 2 * b) * a


def chain_rule_metric(alpha, v):
    """Bit-by-bit SC metric of pattern ``v`` on a size-m node with soft inputs ``alpha``."""

    def leaf(lam, prefix, i):
        while len(lam) > 1:
            h = len(lam) // 2
            if i < h:
                lam = [2 * math.atanh(math.tanh(a / 2) * math.tanh(b / 2)) for a, b in zip(lam[:h], lam[h:])]
            else:
                bits = butterfly(np.array(prefix[:h], dtype=np.uint8)) if h else []
                lam = [b + (1 - 2 * int(s)) * a for a, b, s in zip(lam[:h], lam[h:], bits)]
                prefix = prefix[h:]
                i -= h
        return lam[0]

    return sum(pen(leaf(list(alpha), list(v[:i]), i), v[i]) for i in range(len(v)))


def group_oracle(alpha, v):
    beta = butterfly(np.array(v, dtype=np.uint8))
    return sum(pen(a, int(b)) for a, b in zip(alpha, beta))


def node_paths(alpha, m):
    return PathList(np.asarray(alpha, dtype=float), m)


# --------------------------------------------------------------------------- group metrics


def test_uninformative_alphas():
    code = make_code(4, range(4))
    cands = group_candidate_metrics(node_paths(np.zeros(4), 4), 0, code, DecoderConfig(m=4))
    assert len(cands) == 16
    assert np.allclose(cands.delta, 4 * math.log(2))


def test_confident_zero_pattern():
    code = make_code(4, range(4))
    cands = group_candidate_metrics(node_paths(np.full(4, 5.0), 4), 0, code, DecoderConfig(m=4))
    zero = np.flatnonzero(cands.value == 0)[0]
    assert cands.delta[zero] == pytest.approx(4 * math.log1p(math.exp(-5)))
    assert cands.delta[zero] == pytest.approx(0.0269, abs=5e-5)


@pytest.mark.parametrize("m", [2, 4])
def test_group_metric_equals_chain_rule(m):
    rng = np.random.default_rng(m)
    code = make_code(m, range(m))
    for _ in range(50):
        alpha = rng.normal(0, 3, m)
        cands = group_candidate_metrics(node_paths(alpha, m), 0, code, DecoderConfig(m=m))
        chain = np.array([chain_rule_metric(alpha, p.tolist()) for p in cands.pattern])
        assert np.allclose(cands.delta, chain, atol=1e-9)
        assert np.array_equal(np.argsort(cands.delta, kind="stable"), np.argsort(chain, kind="stable"))


def test_min_approx_penalty():
    assert penalty(np.array([-2.0, 3.0, 0.0]), np.array([0, 0, 1]), "min-approx").tolist() == [2.0, 0.0, 0.0]
    assert penalty(np.array([0.0]), np.array([0]))[0] == pytest.approx(math.log(2))


@given(st.lists(st.floats(-50, 50), min_size=8, max_size=8))
def test_deltas_non_negative(alpha):
    code = make_code(8, range(8))
    cands = group_candidate_metrics(node_paths(alpha, 8), 0, code, DecoderConfig(m=8))
    assert np.all(cands.delta >= 0)


def test_group_index_out_of_range():
    code = make_code(4, range(4))
    with pytest.raises(ValueError):
        group_candidate_metrics(node_paths(np.zeros(4), 4), 1, code, DecoderConfig(m=4))


# --------------------------------------------------------------------------- extension


def test_all_frozen_group_single_candidate():
    code = make_code(8, [4, 5, 6, 7])
    cands = extend_full(PathList(np.ones(8), 4), 0, code, DecoderConfig(m=4))
    assert len(cands) == 1
    assert not cands.pattern.any()


def test_full_extension_of_32_paths():
    N = 64
    code = make_code(N, range(N))
    rng = np.random.default_rng(0)
    paths = PathList(rng.normal(2, 1, N), 4)
    prune_top_L(paths, extend_full(paths, 0, code, DecoderConfig(m=4)), 16)
    prune_top_L(paths, extend_full(paths, 1, code, DecoderConfig(m=4)), 32)
    assert len(paths) == 32
    assert len(extend_full(paths, 2, code, DecoderConfig(m=4))) == 512


def test_single_info_bit_group_doubles():
    code = make_code(4, [3])
    cands = extend_full(node_paths(np.ones(4), 4), 0, code, DecoderConfig(m=4))
    assert len(cands) == 2
    assert set(cands.value.tolist()) == {0, 1}


def test_decision_splits_only_bad_bits():
    code = make_code(4, [0, 1, 2, 3], good=[1, 2, 3])
    cands = extend_decision_aided(node_paths(np.ones(4), 4), 0, code, DecoderConfig(m=4))
    assert len(cands) == 2
    code = make_code(4, [0, 1, 2, 3], good=[0, 1, 2, 3])
    cands = extend_decision_aided(node_paths(np.ones(4), 4), 0, code, DecoderConfig(m=4))
    assert len(cands) == 1


def test_decision_without_good_bits_is_full():
    code = make_code(4, [1, 2, 3])
    alpha = np.random.default_rng(4).normal(0, 2, 4)
    a = extend_full(node_paths(alpha, 4), 0, code, DecoderConfig(m=4))
    b = extend_decision_aided(node_paths(alpha, 4), 0, code, DecoderConfig(m=4))
    for f in ("parent", "pattern", "value", "codeword", "delta"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def check_decision_optimal(alpha, info, good):
    m = len(alpha)
    code = make_code(m, info, good)
    cands = extend_decision_aided(node_paths(alpha, m), 0, code, DecoderConfig(m=m))
    bad = [i for i in info if i not in set(good)]
    assert len(cands) == 2 ** len(bad)
    seen = set()
    for pattern, delta in zip(cands.pattern, cands.delta):
        assert not pattern[[i for i in range(m) if i not in set(info)]].any()
        key = tuple(int(pattern[i]) for i in bad)
        seen.add(key)
        best = math.inf
        for g in itertools.product((0, 1), repeat=len(good)):
            v = [0] * m
            for i, b in zip(bad, key):
                v[i] = b
            for i, b in zip(good, g):
                v[i] = b
            best = min(best, group_oracle(alpha, v))
        assert delta == pytest.approx(best, abs=1e-9)
    assert len(seen) == len(cands)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([2, 4, 8]), st.data())
def test_decision_optimality(m, data):
    alpha = data.draw(st.lists(st.floats(-20, 20), min_size=m, max_size=m))
    roles = data.draw(st.lists(st.sampled_from("fgb"), min_size=m, max_size=m))
    info = [i for i, r in enumerate(roles) if r != "f"]
    good = [i for i, r in enumerate(roles) if r == "g"]
    check_decision_optimal(alpha, info, good)


# --------------------------------------------------------------------------- pruning


def manual_candidates(parents, values, deltas, m=2):
    patterns = np.array([[(v >> (m - 1 - j)) & 1 for j in range(m)] for v in values], dtype=np.uint8)
    return CandidateSet(np.array(parents), patterns, np.array(values), butterfly(patterns), np.array(deltas, float))


def test_prune_keeps_all_when_short():
    paths = PathList(np.ones(2), 2)
    prune_top_L(paths, manual_candidates([0, 0, 0], [0, 1, 2], [0.1, 0.2, 0.3]), 8)
    assert len(paths) == 3


def test_prune_keeps_smallest():
    paths = PathList(np.ones(2), 2)
    prune_top_L(paths, manual_candidates([0, 0, 0], [0, 1, 2], [0.5, 1.2, 0.9]), 2)
    assert paths.metric.tolist() == [0.5, 0.9]
    assert paths.u[:, :2].tolist() == [[0, 0], [1, 0]]


def test_prune_tie_goes_to_lower_parent():
    paths = PathList(np.ones(4), 2)
    prune_top_L(paths, manual_candidates([0, 0], [0, 1], [0.2, 0.7]), 2)
    # equal totals of 1.0 from both parents; only one survives
    cands = manual_candidates([1, 0], [0, 3], [0.3, 0.8])
    prune_top_L(paths, cands, 1)
    assert paths.metric.tolist() == [1.0]
    assert paths.u[0].tolist() == [0, 0, 1, 1]


# --------------------------------------------------------------------------- full decode


def noisy_frame(code, ebn0, rng, crc=None):
    payload = rng.integers(0, 2, code.K - (crc.width if crc else 0), dtype=np.uint8)
    info = crc_attach(payload, crc) if crc else payload
    return payload, transmit(encode(info, code), ChannelParams(ebn0, code.K / code.N), rng)


@pytest.mark.parametrize("cfg", [
    DecoderConfig(),
    DecoderConfig(L=4, m=2),
    DecoderConfig(L=8, m=8, decision_enabled=True),
    DecoderConfig(L=2, m=4, metric_mode="min-approx"),
])
def test_noiseless_zero_codeword(cfg):
    code = build_code(256, 128, 0.5)
    llr = transmit(np.zeros(256, dtype=np.uint8), ChannelParams(40.0, 0.5, seed=1))
    assert not decode(llr, code, cfg).best_path_bits.any()


def ml_decode(llr, code):
    best, arg = -math.inf, None
    for payload in itertools.product((0, 1), repeat=code.K):
        x = encode(np.array(payload), code)
        corr = float(np.dot(1 - 2.0 * x, llr))
        if corr > best:
            best, arg = corr, np.array(payload)
    return arg


@pytest.mark.parametrize("m", [1, 2, 4, 8])
def test_ml_equivalence_small(m):
    code = build_code(8, 4)
    rng = frame_rng(10, m)
    for _ in range(100):
        _, llr = noisy_frame(code, 1.0, rng)
        assert np.array_equal(decode(llr, code, DecoderConfig(L=16, m=m)).best_path_bits, ml_decode(llr, code))


def test_serial_ml_small():
    code = build_code(8, 4)
    rng = frame_rng(11)
    for _ in range(50):
        _, llr = noisy_frame(code, 0.0, rng)
        assert np.array_equal(serial_scl_decode(llr, code, 16).best_path_bits, ml_decode(llr, code))


@pytest.mark.parametrize("mode", ["exact", "min-approx"])
def test_m1_matches_serial(mode):
    code = build_code(64, 32)
    rng = frame_rng(12)
    for _ in range(60):
        _, llr = noisy_frame(code, 1.0, rng)
        a = decode(llr, code, DecoderConfig(L=4, m=1, metric_mode=mode))
        b = serial_scl_decode(llr, code, 4, mode)
        assert len(a.final_list) == len(b.final_list)
        for p, q in zip(a.final_list, b.final_list):
            assert np.array_equal(p.history, q.history)
            assert p.metric == pytest.approx(q.metric, abs=1e-9)


def test_sc_is_list_of_one():
    code = build_code(128, 64)
    _, llr = noisy_frame(code, 2.0, frame_rng(13))
    a = sc_decode(llr, code)
    b = decode(llr, code, DecoderConfig(L=1, m=1))
    assert np.array_equal(a.best_u, b.best_u)


def test_decision_with_empty_good_set_is_plain():
    code = build_code(256, 128, 0.0)
    rng = frame_rng(14)
    plain = DecoderConfig(L=8, m=4)
    aided = DecoderConfig(L=8, m=4, decision_enabled=True, good_fraction=0.0)
    for _ in range(20):
        _, llr = noisy_frame(code, 1.5, rng)
        a, b = decode(llr, code, plain), decode(llr, code, aided)
        assert [p.history.tolist() for p in a.final_list] == [p.history.tolist() for p in b.final_list]
        assert [p.metric for p in a.final_list] == [p.metric for p in b.final_list]


def test_metrics_non_decreasing_through_decode():
    code = build_code(64, 32, 0.5)
    _, llr = noisy_frame(code, 1.0, frame_rng(15))
    cfg = DecoderConfig(L=4, m=4, decision_enabled=True)
    paths = PathList(natural_order_llrs(llr), 4)
    for k in range(16):
        before = paths.metric.copy()
        cands = extend_decision_aided(paths, k, code, cfg)
        assert np.all(before[cands.parent] + cands.delta >= before[cands.parent])
        prune_top_L(paths, cands, 4)


def test_final_list_sorted_and_stats():
    code = build_code(64, 32, 0.5)
    _, llr = noisy_frame(code, 1.0, frame_rng(16))
    res = decode(llr, code, DecoderConfig(L=8, m=4, decision_enabled=True))
    metrics = [p.metric for p in res.final_list]
    assert metrics == sorted(metrics)
    assert res.stats.candidates.size == 16
    assert np.all(res.stats.candidates % res.stats.paths_in == 0)


def test_config_errors():
    with pytest.raises(ValueError):
        DecoderConfig(L=0)
    with pytest.raises(ValueError):
        DecoderConfig(m=3)
    with pytest.raises(ValueError):
        DecoderConfig(metric_mode="fast")
    with pytest.raises(ValueError):
        DecoderConfig(L=8, adaptive=True, L_max=4)
    with pytest.raises(ValueError):
        DecoderConfig(good_fraction=1.5)
    with pytest.raises(ValueError):
        decode(np.zeros(8), build_code(8, 4), DecoderConfig(m=16))
    with pytest.raises(ValueError):
        decode(np.zeros(7), build_code(8, 4), DecoderConfig())


# --------------------------------------------------------------------------- CRC selection and adaptive


CRC = CrcSpec()


def path_with(code, info, metric):
    u = np.zeros(code.N, dtype=np.uint8)
    u[code.info_indices] = info
    return DecoderPath(u, metric)


@pytest.fixture
def sel_code():
    return build_code(64, 32)


def test_select_single_passing(sel_code):
    payload = np.arange(16, dtype=np.uint8) % 2
    good = crc_attach(payload, CRC)
    bad = good.copy()
    bad[0] ^= 1
    sel = select_output_path([path_with(sel_code, bad, 1.0), path_with(sel_code, good, 2.0)], sel_code, CRC)
    assert sel.passed and sel.index == 1
    assert np.array_equal(sel.payload, payload)


def test_select_none_passing(sel_code):
    good = crc_attach(np.ones(16, dtype=np.uint8), CRC)
    a, b = good.copy(), good.copy()
    a[3] ^= 1
    b[5] ^= 1
    sel = select_output_path([path_with(sel_code, a, 2.0), path_with(sel_code, b, 1.0)], sel_code, CRC)
    assert not sel.passed and sel.index == 1
    assert np.array_equal(sel.payload, b[:16])


def test_select_best_of_two_passing(sel_code):
    p1 = crc_attach(np.zeros(16, dtype=np.uint8), CRC)
    p2 = crc_attach(np.ones(16, dtype=np.uint8), CRC)
    sel = select_output_path([path_with(sel_code, p2, 4.1), path_with(sel_code, p1, 3.0)], sel_code, CRC)
    assert sel.index == 1 and not sel.payload.any()


def test_select_empty(sel_code):
    with pytest.raises(ValueError):
        select_output_path([], sel_code, CRC)


def test_adaptive_clean_frame():
    code = build_code(128, 64)
    payload, llr = noisy_frame(code, 40.0, frame_rng(17), CRC)
    res = adaptive_decode(llr, code, DecoderConfig(m=4, adaptive=True, L_max=32), CRC)
    assert res.trace == [1] and res.passed
    assert np.array_equal(res.payload, payload)


def test_adaptive_needs_l4():
    # seeded frame that SC and L=2 get wrong but L=4 corrects
    code = build_code(64, 48)
    rng = frame_rng(2)
    payload = rng.integers(0, 2, 32, dtype=np.uint8)
    llr = transmit(encode(crc_attach(payload, CRC), code), ChannelParams(2.0, 0.5), rng)
    res = adaptive_decode(llr, code, DecoderConfig(m=1, adaptive=True, L_max=32), CRC)
    assert res.trace == [1, 2, 4]
    assert res.passed
    assert np.array_equal(res.payload, payload)


def test_adaptive_schedule_bound():
    assert adaptive_schedule(32) == [1, 2, 4, 8, 16, 32]
    assert adaptive_schedule(1) == [1]
    assert adaptive_schedule(12) == [1, 2, 4, 8, 12]
    code = build_code(64, 32)
    llr = frame_rng(18).normal(0, 1, 64)
    res = adaptive_decode(llr, code, DecoderConfig(m=4, adaptive=True, L_max=32), CRC)
    assert len(res.trace) <= 6
    assert not res.passed and res.trace == [1, 2, 4, 8, 16, 32]


def test_adaptive_without_crc():
    with pytest.raises(ValueError):
        adaptive_decode(np.zeros(8), build_code(8, 4), DecoderConfig(adaptive=True), None)
