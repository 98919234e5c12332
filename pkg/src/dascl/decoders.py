"""
Successive-cancellation list decoders working on groups of ``m`` bits.

A single engine covers the whole family:

* ``m = 1, L = 1``: plain SC
* ``m = 1``: serial SC-List
* ``m > 1``: parallel SC-List, each survivor extended by all admissible
  patterns of the ``m``-bit group, then one top-``L`` prune per group
* ``decision_enabled``: decision-aided parallel SC-List; good bits of a
  group are hard-decided per bad-bit pattern, so a survivor only splits
  on its bad bits

Path metrics are negative log-probabilities (lower is better).  The list is
held as a :class:`PathList`, one row per survivor.  :func:`serial_scl_decode`
is an independent, bit-by-bit implementation kept as a reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .crc import CrcSpec, crc_check
from .polar_core import PolarCodeSpec, butterfly, natural_order_llrs

__all__ = [
    "EXACT",
    "MIN_APPROX",
    "DecoderConfig",
    "DecoderPath",
    "CandidateSet",
    "PathList",
    "DecodeStats",
    "DecodeResult",
    "Selection",
    "AdaptiveResult",
    "check_node",
    "bit_node",
    "penalty",
    "candidate_deltas",
    "group_candidate_metrics",
    "extend_full",
    "extend_decision_aided",
    "prune_top_L",
    "decode",
    "sc_decode",
    "serial_scl_decode",
    "select_output_path",
    "adaptive_decode",
    "adaptive_schedule",
]

EXACT = "exact"
MIN_APPROX = "min-approx"
METRIC_MODES = (EXACT, MIN_APPROX)


# --------------------------------------------------------------------------- kernels


def check_node(a: np.ndarray, b: np.ndarray, mode: str = EXACT) -> np.ndarray:
    """Upper-branch LLR: exact box-plus, or min-sum in ``min-approx`` mode."""
    if mode == EXACT:
        return np.logaddexp(0.0, a + b) - np.logaddexp(a, b)
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def bit_node(a: np.ndarray, b: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Lower-branch LLR given the upper branch's partial sums."""
    return b + (1.0 - 2.0 * bits) * a


def penalty(alpha: np.ndarray, bits: np.ndarray, mode: str = EXACT) -> np.ndarray:
    """Log-domain penalty of deciding ``bits`` against soft values ``alpha``.

    Exact mode: ``ln(1 + exp(-(1 - 2b) alpha))``.  Min-approx mode: ``|alpha|``
    when the bit disagrees with the hard decision (alpha < 0 means 1), else 0.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    bits = np.asarray(bits)
    if mode == EXACT:
        return np.logaddexp(0.0, -(1.0 - 2.0 * bits) * alpha)
    return np.abs(alpha) * ((alpha < 0) != bits.astype(bool))


# --------------------------------------------------------------------------- configuration


@dataclass(frozen=True)
class DecoderConfig:
    """Decoder knobs.

    ``good_fraction`` overrides the good set stored in the code when set;
    when ``None`` the code's own ``good_mask`` is used.  The good set only
    matters with ``decision_enabled``.
    """

    L: int = 1
    m: int = 1
    good_fraction: float | None = None
    decision_enabled: bool = False
    adaptive: bool = False
    L_max: int = 32
    metric_mode: str = EXACT

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"list size must be >= 1, got {self.L}")
        if self.m < 1 or self.m & (self.m - 1):
            raise ValueError(f"group width m must be a power of two, got {self.m}")
        if self.metric_mode not in METRIC_MODES:
            raise ValueError(f"metric_mode must be one of {METRIC_MODES}, got {self.metric_mode!r}")
        if self.adaptive and self.L_max < self.L:
            raise ValueError("L_max must be at least L for adaptive decoding")
        if self.good_fraction is not None and not 0.0 <= self.good_fraction <= 1.0:
            raise ValueError("good_fraction must lie in [0, 1]")

    def check_code(self, code: PolarCodeSpec) -> None:
        if code.N % self.m:
            raise ValueError(f"group width m={self.m} does not divide N={code.N}")

    def good_mask(self, code: PolarCodeSpec) -> np.ndarray:
        if not self.decision_enabled:
            return np.zeros(code.N, dtype=bool)
        if self.good_fraction is None:
            return code.good_mask
        return code.with_good_fraction(self.good_fraction).good_mask


# --------------------------------------------------------------------------- group tables


@dataclass(frozen=True)
class _GroupTable:
    """Admissible patterns of one group, ordered by (bad value, good value)."""

    patterns: np.ndarray  # (C, m) uint8
    values: np.ndarray  # (C,) integer value, first bit = MSB
    signs: np.ndarray  # (C, m) 1 - 2*beta
    codewords: np.ndarray  # (C, m) butterfly of each pattern
    n_bad: int
    n_good: int


@lru_cache(maxsize=4096)
def _group_table(m: int, info_bits: int, good_bits: int) -> _GroupTable:
    """Pattern table for a group; bit ``j`` of the masks is group position ``j``."""
    info_pos = [j for j in range(m) if info_bits >> j & 1]
    good_pos = [j for j in info_pos if good_bits >> j & 1]
    bad_pos = [j for j in info_pos if not good_bits >> j & 1]
    nb, ng = len(bad_pos), len(good_pos)
    pats = np.zeros((1 << (nb + ng), m), dtype=np.uint8)
    for bi in range(1 << nb):
        for gi in range(1 << ng):
            row = pats[(bi << ng) | gi]
            # earliest position takes the most significant bit of the sub-value
            for t, j in enumerate(bad_pos):
                row[j] = bi >> (nb - 1 - t) & 1
            for t, j in enumerate(good_pos):
                row[j] = gi >> (ng - 1 - t) & 1
    values = pats.astype(np.int64) @ (1 << np.arange(m - 1, -1, -1, dtype=np.int64))
    cw = butterfly(pats)
    for a in (pats, values, cw):
        a.setflags(write=False)
    signs = 1.0 - 2.0 * cw
    signs.setflags(write=False)
    return _GroupTable(pats, values, signs, cw, nb, ng)


def _mask_bits(mask: np.ndarray) -> int:
    return int(np.dot(mask.astype(np.int64), 1 << np.arange(mask.size, dtype=np.int64)))


@lru_cache(maxsize=64)
def _code_tables(frozen: bytes, good: bytes, m: int) -> tuple[_GroupTable, ...]:
    info = ~np.frombuffer(frozen, dtype=bool)
    good_arr = np.frombuffer(good, dtype=bool)
    return tuple(
        _group_table(m, _mask_bits(info[s : s + m]), _mask_bits(good_arr[s : s + m]))
        for s in range(0, info.size, m)
    )


def _group_table_for(code: PolarCodeSpec, good: np.ndarray, m: int, k: int) -> _GroupTable:
    return _code_tables(code.frozen_mask.tobytes(), np.asarray(good, dtype=bool).tobytes(), m)[k]


# --------------------------------------------------------------------------- paths and candidates


@dataclass
class DecoderPath:
    """One survivor as seen from outside the decoder."""

    history: np.ndarray  # decided u bits so far, natural index order
    metric: float

    def info_bits(self, code: PolarCodeSpec) -> np.ndarray:
        return self.history[code.info_indices]


@dataclass
class CandidateSet:
    """Split paths of one group, one entry per (parent, pattern)."""

    parent: np.ndarray  # (C,) survivor row
    pattern: np.ndarray  # (C, m) group bits
    value: np.ndarray  # (C,) pattern as integer, first bit = MSB
    codeword: np.ndarray  # (C, m) size-m transform of pattern
    delta: np.ndarray  # (C,) metric increment

    def __len__(self) -> int:
        return self.parent.size


class PathList:
    """The survivors of a list decoder and their SC state.

    Rows are paths.  ``llr`` and ``psum`` pack the per-depth soft values and
    partial sums of the SC tree: depth ``d`` (node size ``N >> d``, ``d >= 1``)
    lives at columns ``[N - 2*(N>>d), N - (N>>d))``.  Depth 0 is the channel,
    shared by all rows.
    """

    def __init__(self, llrs_natural: np.ndarray, m: int, mode: str = EXACT):
        self.channel = np.asarray(llrs_natural, dtype=np.float64)
        self.N = N = self.channel.size
        self.m = m
        self.mode = mode
        self.depth = (N.bit_length() - 1) - (m.bit_length() - 1)
        self.metric = np.zeros(1)
        self.u = np.zeros((1, N), dtype=np.uint8)
        self.llr = np.zeros((1, N))
        self.psum = np.zeros((1, N), dtype=np.uint8)
        self.next_group = 0

    def __len__(self) -> int:
        return self.metric.size

    def _level(self, buf: np.ndarray, d: int) -> np.ndarray:
        lo = self.N - 2 * (self.N >> d)
        return buf[:, lo : lo + (self.N >> d)]

    def _llr_level(self, d: int) -> np.ndarray:
        if d == 0:
            return self.channel[None, :]
        return self._level(self.llr, d)

    def alphas(self, k: int) -> np.ndarray:
        """Soft inputs ``(P, m)`` of the size-``m`` node holding group ``k``."""
        if k != self.next_group:
            raise ValueError(f"path state is at group {self.next_group}, not {k}")
        D = self.depth
        if D == 0:
            return np.broadcast_to(self.channel, (len(self), self.N))
        if k == 0:
            start = 1
        else:
            # first depth whose node changed is a right child: lower-branch update
            start = D - ((k & -k).bit_length() - 1)
            parent = self._llr_level(start - 1)
            h = parent.shape[1] // 2
            self._level(self.llr, start)[:] = bit_node(
                parent[:, :h], parent[:, h:], self._level(self.psum, start)
            )
            start += 1
        for d in range(start, D + 1):
            parent = self._llr_level(d - 1)
            h = parent.shape[1] // 2
            self._level(self.llr, d)[:] = check_node(parent[:, :h], parent[:, h:], self.mode)
        return self._level(self.llr, D)

    def path(self, i: int) -> DecoderPath:
        return DecoderPath(self.u[i].copy(), float(self.metric[i]))

    def advance(self, parents: np.ndarray, patterns: np.ndarray, codewords: np.ndarray,
                metrics: np.ndarray) -> None:
        """Replace the list by ``parents`` extended with ``patterns`` for the current group."""
        k, m = self.next_group, self.m
        if len(parents) != len(self) or np.any(parents != np.arange(len(self))):
            self.u = self.u[parents]
            self.llr = self.llr[parents]
            self.psum = self.psum[parents]
        self.metric = np.asarray(metrics, dtype=np.float64)
        self.u[:, k * m : (k + 1) * m] = patterns

        # fold completed right children into their parents
        cur, d, j = codewords, self.depth, k
        while d > 0 and j & 1:
            left = self._level(self.psum, d)
            cur = np.concatenate([left ^ cur, cur], axis=1)
            d -= 1
            j >>= 1
        if d > 0:
            self._level(self.psum, d)[:] = cur
        self.next_group += 1


def candidate_deltas(alpha: np.ndarray, table: _GroupTable, mode: str = EXACT) -> np.ndarray:
    """Metric increments ``(P, C)`` of every pattern in ``table`` for each row of ``alpha``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if mode == EXACT:
        pen = np.logaddexp(0.0, -alpha[:, None, :] * table.signs[None, :, :])
    else:
        pen = np.abs(alpha)[:, None, :] * ((alpha[:, None, :] < 0) != table.codewords[None, :, :].astype(bool))
    return pen.sum(axis=-1)


def _extend(paths: PathList, k: int, table: _GroupTable, mode: str) -> CandidateSet:
    delta = candidate_deltas(paths.alphas(k), table, mode)
    P, C = delta.shape
    if table.n_good:
        nb, ng = 1 << table.n_bad, 1 << table.n_good
        # first minimum on ties: smallest good sub-pattern
        best = np.argmin(delta.reshape(P, nb, ng), axis=-1)
        idx = (np.arange(nb)[None, :] * ng + best).reshape(-1)
        parent = np.repeat(np.arange(P), nb)
        delta = np.take_along_axis(delta, idx.reshape(P, nb), axis=1).reshape(-1)
    else:
        idx = np.tile(np.arange(C), P)
        parent = np.repeat(np.arange(P), C)
        delta = delta.reshape(-1)
    return CandidateSet(parent, table.patterns[idx], table.values[idx], table.codewords[idx], delta)


def _candidates(paths: PathList, k: int, code: PolarCodeSpec, config: DecoderConfig,
                good: np.ndarray, decide: bool) -> CandidateSet:
    m = config.m
    config.check_code(code)
    if not 0 <= k < code.N // m:
        raise ValueError(f"group index {k} out of range for N={code.N}, m={m}")
    table = _group_table_for(code, good if decide else np.zeros(code.N, dtype=bool), m, k)
    return _extend(paths, k, table, config.metric_mode)


def group_candidate_metrics(paths: PathList, group_index: int, code: PolarCodeSpec,
                            config: DecoderConfig) -> CandidateSet:
    """Every admissible pattern of group ``group_index`` for every survivor."""
    return _candidates(paths, group_index, code, config, code.good_mask, decide=False)


def extend_full(paths: PathList, group_index: int, code: PolarCodeSpec,
                config: DecoderConfig) -> CandidateSet:
    """Full parallel extension: ``2**(#info bits in group)`` candidates per survivor."""
    return group_candidate_metrics(paths, group_index, code, config)


def extend_decision_aided(paths: PathList, group_index: int, code: PolarCodeSpec,
                          config: DecoderConfig, good_mask: np.ndarray | None = None) -> CandidateSet:
    """Split only on bad bits; each bad pattern keeps its best good completion."""
    good = code.good_mask if good_mask is None else good_mask
    return _candidates(paths, group_index, code, config, good, decide=True)


def prune_top_L(paths: PathList, candidates: CandidateSet, L: int) -> PathList:
    """Keep the ``L`` candidates of smallest total metric and advance ``paths`` in place.

    Ties go to the lower parent row, then the lower pattern value.  Survivors
    are stored in that same order.
    """
    total = paths.metric[candidates.parent] + candidates.delta
    order = np.lexsort((candidates.value, candidates.parent, total))[:L]
    paths.advance(candidates.parent[order], candidates.pattern[order],
                  candidates.codeword[order], total[order])
    return paths


# --------------------------------------------------------------------------- full decode


@dataclass
class DecodeStats:
    """Per-group list sizes before extension and candidate counts."""

    paths_in: np.ndarray
    candidates: np.ndarray

    @property
    def splits_per_path(self) -> np.ndarray:
        return self.candidates // self.paths_in

    @property
    def total_candidates(self) -> int:
        return int(self.candidates.sum())


@dataclass
class DecodeResult:
    final_list: list[DecoderPath]
    stats: DecodeStats
    code: PolarCodeSpec = field(repr=False)

    @property
    def best_path_bits(self) -> np.ndarray:
        """Information bits (K) of the lowest-metric path."""
        return self.final_list[0].info_bits(self.code)

    @property
    def best_u(self) -> np.ndarray:
        return self.final_list[0].history


def decode(llrs: np.ndarray, code: PolarCodeSpec, config: DecoderConfig) -> DecodeResult:
    """Run the group-wise list decoder on channel LLRs (codeword order)."""
    config.check_code(code)
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.shape != (code.N,):
        raise ValueError(f"expected {code.N} LLRs, got shape {llrs.shape}")
    m = config.m
    n_groups = code.N // m
    paths = PathList(natural_order_llrs(llrs), m, config.metric_mode)
    good = config.good_mask(code)
    tables = _code_tables(code.frozen_mask.tobytes(), good.tobytes(), m)
    paths_in = np.zeros(n_groups, dtype=np.int64)
    n_cand = np.zeros(n_groups, dtype=np.int64)
    for k in range(n_groups):
        paths_in[k] = len(paths)
        cands = _extend(paths, k, tables[k], config.metric_mode)
        n_cand[k] = len(cands)
        prune_top_L(paths, cands, config.L)
    final = [paths.path(i) for i in range(len(paths))]
    return DecodeResult(final, DecodeStats(paths_in, n_cand), code)


def sc_decode(llrs: np.ndarray, code: PolarCodeSpec, metric_mode: str = EXACT) -> DecodeResult:
    """Plain successive cancellation."""
    return decode(llrs, code, DecoderConfig(L=1, m=1, metric_mode=metric_mode))


# --------------------------------------------------------------------------- serial reference


def _leaf_llr(lam: np.ndarray, u_prefix: np.ndarray, i: int, mode: str) -> float:
    """LLR of natural-order bit ``i`` given the decided bits before it."""
    while lam.size > 1:
        h = lam.size // 2
        if i < h:
            lam = check_node(lam[:h], lam[h:], mode)
        else:
            lam = bit_node(lam[:h], lam[h:], butterfly(u_prefix[:h]))
            u_prefix = u_prefix[h:]
            i -= h
    return float(lam[0])


def serial_scl_decode(llrs: np.ndarray, code: PolarCodeSpec, L: int,
                      metric_mode: str = EXACT) -> DecodeResult:
    """Bit-by-bit SC-List, recomputing every leaf LLR from the channel.

    Slow (``O(N^2)`` per path) and deliberately independent of :class:`PathList`;
    used to cross-check :func:`decode`.
    """
    lam = natural_order_llrs(llrs)
    N = code.N
    survivors: list[tuple[float, np.ndarray]] = [(0.0, np.zeros(0, dtype=np.uint8))]
    for i in range(N):
        options = (0,) if code.frozen_mask[i] else (0, 1)
        cands = []
        for pid, (metric, u) in enumerate(survivors):
            a = _leaf_llr(lam, u, i, metric_mode)
            for b in options:
                cands.append((metric + float(penalty(a, b, metric_mode)), pid, b))
        cands.sort()
        survivors = [
            (metric, np.append(survivors[pid][1], np.uint8(b))) for metric, pid, b in cands[:L]
        ]
    final = [DecoderPath(u, metric) for metric, u in survivors]
    stats = DecodeStats(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    return DecodeResult(final, stats, code)


# --------------------------------------------------------------------------- CRC-aided selection


@dataclass
class Selection:
    payload: np.ndarray  # information bits with the CRC stripped
    passed: bool
    index: int  # position in the final list


def select_output_path(final_list: list[DecoderPath], code: PolarCodeSpec,
                       crc_spec: CrcSpec) -> Selection:
    """Lowest-metric path whose information bits pass the CRC.

    Falls back to the lowest-metric path with ``passed=False``.
    """
    if not final_list:
        raise ValueError("empty path list")
    order = sorted(range(len(final_list)), key=lambda i: final_list[i].metric)
    info = np.stack([final_list[i].info_bits(code) for i in order])
    ok = np.atleast_1d(crc_check(info, crc_spec))
    hits = np.flatnonzero(ok)
    j = int(hits[0]) if hits.size else 0
    return Selection(info[j, : code.K - crc_spec.width].copy(), bool(hits.size), order[j])


def adaptive_schedule(L_max: int) -> list[int]:
    """List sizes 1, 2, 4, ... up to ``L_max``."""
    sizes, L = [], 1
    while L < L_max:
        sizes.append(L)
        L *= 2
    sizes.append(L_max)
    return sizes


@dataclass
class AdaptiveResult:
    payload: np.ndarray
    passed: bool
    trace: list[int]
    last: DecodeResult
    candidates_sorted: int  # over all attempts


def adaptive_decode(llrs: np.ndarray, code: PolarCodeSpec, config: DecoderConfig,
                    crc_spec: CrcSpec) -> AdaptiveResult:
    """Retry with doubling list size until the selected path passes the CRC."""
    if crc_spec is None:
        raise ValueError("adaptive decoding needs a CRC")
    trace: list[int] = []
    total = 0
    for L in adaptive_schedule(config.L_max):
        trace.append(L)
        result = decode(llrs, code, _with_list_size(config, L))
        total += result.stats.total_candidates
        sel = select_output_path(result.final_list, code, crc_spec)
        if sel.passed:
            break
    return AdaptiveResult(sel.payload, sel.passed, trace, result, total)


def _with_list_size(config: DecoderConfig, L: int) -> DecoderConfig:
    return replace(config, L=L, adaptive=False)
