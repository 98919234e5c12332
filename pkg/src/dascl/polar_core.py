"""
Polar transform, encoder and reliability-based code construction.

Conventions
-----------
* ``butterfly(u)`` computes ``u F^{(x)n}`` in natural order (no bit reversal).
* ``polar_transform(u)`` computes ``u B_N F^{(x)n}``, i.e. the butterfly output
  read through the bit-reversal permutation.  This is what goes on the channel.
* Decoders work on the natural-order butterfly and undo ``B_N`` once, at the
  channel LLR input (see :func:`natural_order_llrs`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PolarCodeSpec",
    "ReliabilityProfile",
    "bit_reversal_permutation",
    "butterfly",
    "polar_transform",
    "natural_order_llrs",
    "encode",
    "construct_reliability",
    "read_reliability_file",
    "write_reliability_file",
    "plan_code",
    "build_code",
]

CONSTRUCTION_METHODS = ("gaussian-approx", "bhattacharyya", "imported")
_METHOD_ALIASES = {
    "ga": "gaussian-approx",
    "gaussian-approx": "gaussian-approx",
    "bhatta": "bhattacharyya",
    "bhattacharyya": "bhattacharyya",
    "file": "imported",
    "imported": "imported",
}


def _log2_exact(N: int) -> int:
    if N < 1 or N & (N - 1):
        raise ValueError(f"length must be a power of two, got {N}")
    return N.bit_length() - 1


def bit_reversal_permutation(n: int) -> np.ndarray:
    """Return ``perm`` with ``perm[i]`` = ``i`` with its ``n`` bits reversed."""
    if n < 0:
        raise ValueError("n must be non-negative")
    perm = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        # bit b of i moves to bit n-1-b
        perm |= ((np.arange(1 << n) >> b) & 1) << (n - 1 - b)
    return perm


def butterfly(u: np.ndarray) -> np.ndarray:
    """Natural-order transform ``u F^{(x)n}`` over GF(2).

    Works on the last axis, so a batch ``(..., N)`` is transformed row-wise.
    """
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    _log2_exact(N)
    lead = x.shape[:-1]
    half = 1
    while half < N:
        # blocks of 2*half: first half ^= second half
        v = x.reshape(*lead, N // (2 * half), 2, half)
        v[..., 0, :] ^= v[..., 1, :]
        half *= 2
    return x


def polar_transform(u: np.ndarray) -> np.ndarray:
    """Compute ``x = u B_N F^{(x)n}`` over GF(2) in O(N log N)."""
    u = np.asarray(u)
    n = _log2_exact(u.shape[-1])
    return butterfly(u)[..., bit_reversal_permutation(n)]


def natural_order_llrs(llrs: np.ndarray) -> np.ndarray:
    """Map channel LLRs (codeword order) onto the natural-order butterfly outputs."""
    llrs = np.asarray(llrs, dtype=np.float64)
    n = _log2_exact(llrs.shape[-1])
    return llrs[..., bit_reversal_permutation(n)]


@dataclass(frozen=True)
class ReliabilityProfile:
    """Per-index reliability scores (larger is more reliable)."""

    scores: np.ndarray
    method: str
    design_param: float | None = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if not np.all(np.isfinite(scores)):
            raise ValueError("reliability scores must be finite")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @property
    def N(self) -> int:
        return self.scores.size

    def order(self) -> np.ndarray:
        """Indices sorted most reliable first; ties go to the smaller index."""
        idx = np.arange(self.N)
        return np.lexsort((idx, -self.scores))


@dataclass(frozen=True, eq=False)
class PolarCodeSpec:
    """Static definition of an (N, K) polar code with its good/bad split."""

    N: int
    K: int
    frozen_mask: np.ndarray
    reliability_order: np.ndarray
    good_mask: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        n = _log2_exact(self.N)
        object.__setattr__(self, "n", n)
        frozen = np.asarray(self.frozen_mask, dtype=bool).copy()
        good = np.asarray(self.good_mask, dtype=bool).copy()
        order = np.asarray(self.reliability_order, dtype=np.int64).copy()
        if frozen.shape != (self.N,) or good.shape != (self.N,) or order.shape != (self.N,):
            raise ValueError("masks and reliability order must have length N")
        if not np.array_equal(np.sort(order), np.arange(self.N)):
            raise ValueError("reliability_order is not a permutation")
        if int((~frozen).sum()) != self.K:
            raise ValueError("frozen mask does not leave exactly K information bits")
        if np.any(good & frozen):
            raise ValueError("good bits must be information bits")
        if np.any(frozen[order[: self.K]]):
            raise ValueError("information set must be the K most reliable indices")
        if np.any(~good[order[: int(good.sum())]]):
            raise ValueError("good set must be the most reliable information indices")
        for a in (frozen, good, order):
            a.setflags(write=False)
        object.__setattr__(self, "frozen_mask", frozen)
        object.__setattr__(self, "good_mask", good)
        object.__setattr__(self, "reliability_order", order)

    @property
    def info_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.frozen_mask)

    @property
    def good_indices(self) -> np.ndarray:
        return np.flatnonzero(self.good_mask)

    @property
    def bad_mask(self) -> np.ndarray:
        return ~self.frozen_mask & ~self.good_mask

    @property
    def n_good(self) -> int:
        return int(self.good_mask.sum())

    def with_good_fraction(self, good_fraction: float) -> "PolarCodeSpec":
        """Same frozen set, good set re-drawn for ``good_fraction``."""
        return PolarCodeSpec(
            N=self.N,
            K=self.K,
            frozen_mask=self.frozen_mask,
            reliability_order=self.reliability_order,
            good_mask=_good_mask(self.reliability_order, self.N, self.K, good_fraction),
        )


def encode(payload_bits: np.ndarray, code: PolarCodeSpec) -> np.ndarray:
    """Place ``payload_bits`` on the information set (ascending index) and transform."""
    payload = np.asarray(payload_bits, dtype=np.uint8)
    if payload.shape[-1] != code.K:
        raise ValueError(f"payload has {payload.shape[-1]} bits, code expects K={code.K}")
    u = np.zeros(payload.shape[:-1] + (code.N,), dtype=np.uint8)
    u[..., code.info_indices] = payload & 1
    return polar_transform(u)


# --------------------------------------------------------------------------- construction


def _bhattacharyya_scores(N: int, z0: float) -> np.ndarray:
    # index bits are consumed MSB first: 0 -> degraded, 1 -> upgraded
    z = np.array([z0], dtype=np.float64)
    while z.size < N:
        z = np.stack([2 * z - z * z, z * z], axis=-1).reshape(-1)
    return -z


# Chung's approximation of the GA phi-function, handled in the log domain so
# that very reliable channels do not underflow.
_PHI_A, _PHI_B, _PHI_C = -0.4527, 0.86, 0.0218


def _log_phi(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    small = (x > 0) & (x < 10)
    big = x >= 10
    out[small] = _PHI_A * x[small] ** _PHI_B + _PHI_C
    xb = x[big]
    out[big] = 0.5 * np.log(np.pi / xb) - xb / 4 + np.log1p(-10.0 / (7.0 * xb))
    return np.minimum(out, 0.0)


def _inv_log_phi(target: np.ndarray) -> np.ndarray:
    """Solve ``log_phi(x) = target`` by bisection (log_phi is decreasing)."""
    target = np.asarray(target, dtype=np.float64)
    lo = np.zeros_like(target)
    hi = np.full_like(target, 10.0)
    while True:
        grow = _log_phi(hi) > target
        if not grow.any():
            break
        hi[grow] *= 2
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        above = _log_phi(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


def _ga_scores(N: int, ebn0_db: float, rate: float) -> np.ndarray:
    sigma2 = 1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))
    mean = np.array([2.0 / sigma2])
    while mean.size < N:
        lp = _log_phi(mean)
        # 1 - (1 - phi)^2 = phi * (2 - phi)
        minus = _inv_log_phi(lp + np.log(2.0 - np.exp(lp)))
        mean = np.stack([minus, 2 * mean], axis=-1).reshape(-1)
    return mean


def read_reliability_file(path: str | Path, N: int | None = None) -> np.ndarray:
    """Read a reliability sequence: one index per line, most reliable first, ``#`` comments."""
    order = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            order.append(int(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not an integer index: {line!r}") from None
    order = np.asarray(order, dtype=np.int64)
    if N is not None and order.size != N:
        raise ValueError(f"{path}: expected {N} indices, found {order.size}")
    if not np.array_equal(np.sort(order), np.arange(order.size)):
        raise ValueError(f"{path}: indices are not a permutation of 0..{order.size - 1}")
    _log2_exact(order.size)
    return order


def write_reliability_file(path: str | Path, order: np.ndarray, header: str | None = None) -> None:
    lines = [f"# {h}" for h in (header.splitlines() if header else [])]
    lines += [str(int(i)) for i in order]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def construct_reliability(
    method: str,
    N: int,
    design_param: float | None = None,
    *,
    rate: float = 0.5,
    path: str | Path | None = None,
) -> ReliabilityProfile:
    """Compute per-index reliabilities for a length-``N`` code.

    Parameters
    ----------
    method : str
        ``"gaussian-approx"`` (alias ``"ga"``), ``"bhattacharyya"`` (``"bhatta"``)
        or ``"imported"`` (``"file"``).
    N : int
        Block length, a power of two.
    design_param : float, optional
        Design Eb/N0 in dB for GA (default 2.0), channel Bhattacharyya
        parameter Z for Bhattacharyya (default 0.5).  Ignored for imports.
    rate : float
        Code rate used to turn the design Eb/N0 into a noise variance (GA only).
    path : path-like, optional
        Reliability file for ``"imported"``.
    """
    _log2_exact(N)
    try:
        method = _METHOD_ALIASES[method]
    except KeyError:
        raise ValueError(f"unknown construction method {method!r}") from None

    if method == "bhattacharyya":
        z0 = 0.5 if design_param is None else float(design_param)
        if not 0.0 <= z0 <= 1.0:
            raise ValueError("Bhattacharyya parameter must lie in [0, 1]")
        return ReliabilityProfile(_bhattacharyya_scores(N, z0), method, z0)
    if method == "gaussian-approx":
        ebn0 = 2.0 if design_param is None else float(design_param)
        if not 0.0 < rate <= 1.0:
            raise ValueError("rate must lie in (0, 1]")
        return ReliabilityProfile(_ga_scores(N, ebn0, rate), method, ebn0)

    if path is None:
        raise ValueError("imported construction needs a reliability file path")
    order = read_reliability_file(path, N)
    scores = np.empty(N)
    scores[order] = np.arange(N, 0, -1, dtype=np.float64)
    return ReliabilityProfile(scores, method, None)


def _n_good(K: int, good_fraction: float) -> int:
    if not 0.0 <= good_fraction <= 1.0:
        raise ValueError(f"good_fraction must lie in [0, 1], got {good_fraction}")
    # guard against 0.8 * 1040 = 832.0000000000001
    return min(K, math.ceil(round(good_fraction * K, 9)))


def _good_mask(order: np.ndarray, N: int, K: int, good_fraction: float) -> np.ndarray:
    good = np.zeros(N, dtype=bool)
    good[order[: _n_good(K, good_fraction)]] = True
    return good


def plan_code(profile: ReliabilityProfile, N: int, K: int, good_fraction: float = 0.0) -> PolarCodeSpec:
    """Freeze the ``N-K`` least reliable indices and mark the most reliable
    ``ceil(good_fraction * K)`` information indices as good."""
    if profile.N != N:
        raise ValueError(f"profile has length {profile.N}, expected N={N}")
    if not 0 <= K <= N:
        raise ValueError(f"K must lie in [0, {N}], got {K}")
    order = profile.order()
    frozen = np.ones(N, dtype=bool)
    frozen[order[:K]] = False
    return PolarCodeSpec(
        N=N,
        K=K,
        frozen_mask=frozen,
        reliability_order=order,
        good_mask=_good_mask(order, N, K, good_fraction),
    )


def build_code(
    N: int,
    K: int,
    good_fraction: float = 0.0,
    construction: str = "gaussian-approx",
    design_param: float | None = None,
    *,
    rate: float | None = None,
    path: str | Path | None = None,
) -> PolarCodeSpec:
    """Construct reliabilities and plan the code in one go.

    The GA design rate defaults to ``K/N``.
    """
    if rate is None:
        rate = K / N if K else 0.5
    profile = construct_reliability(construction, N, design_param, rate=rate, path=path)
    return plan_code(profile, N, K, good_fraction)
