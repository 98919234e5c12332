"""
Static group-pattern accounting and sorting-cost models.

For a code and group width ``m`` every group is summarised by its
information pattern (``"1"`` = information bit, first character = first
bit of the group) and its good pattern.  Per survivor, a group splits into
``M1 = 2**#info`` paths without decision and ``M2 = 2**#bad`` with decision.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .polar_core import PolarCodeSpec

__all__ = [
    "GroupPatternStats",
    "SplitHistogram",
    "enumerate_group_patterns",
    "split_histogram",
    "sorting_cost",
    "runtime_split_stats",
    "read_pattern_csv",
    "write_pattern_csv",
    "fixture_path",
    "REFERENCE_HISTOGRAM",
    "REFERENCE_TOTALS",
    "histogram_reconciliation",
    "format_reconciliation_note",
    "format_pattern_table",
    "format_histograms",
]

SplitHistogram = dict  # split count s (power of two >= 2) -> number of group occurrences

COST_MODELS = ("square", "loglinear")


@dataclass(frozen=True)
class GroupPatternStats:
    bit_pattern: str
    good_pattern: str
    N1: int

    def __post_init__(self):
        if len(self.bit_pattern) != len(self.good_pattern):
            raise ValueError("bit and good patterns differ in width")
        if set(self.bit_pattern + self.good_pattern) - {"0", "1"}:
            raise ValueError(f"patterns must be 0/1 strings: {self.bit_pattern!r}, {self.good_pattern!r}")
        if any(g == "1" and b == "0" for b, g in zip(self.bit_pattern, self.good_pattern)):
            raise ValueError(f"good pattern {self.good_pattern} is not inside bit pattern {self.bit_pattern}")
        if self.N1 < 0:
            raise ValueError("N1 must be non-negative")

    @property
    def n_info(self) -> int:
        return self.bit_pattern.count("1")

    @property
    def n_good(self) -> int:
        return self.good_pattern.count("1")

    @property
    def M1(self) -> int:
        return 2**self.n_info

    @property
    def M2(self) -> int:
        return 2 ** (self.n_info - self.n_good)


def _pattern(mask: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in mask)


def enumerate_group_patterns(code: PolarCodeSpec, m: int, good_mask: np.ndarray | None = None) -> list[GroupPatternStats]:
    """Count each (bit pattern, good pattern) pair over the ``N/m`` groups of ``code``."""
    if m < 1 or code.N % m:
        raise ValueError(f"group width {m} does not divide N={code.N}")
    good = code.good_mask if good_mask is None else np.asarray(good_mask, dtype=bool)
    info = ~code.frozen_mask
    counts = Counter(
        (_pattern(info[s : s + m]), _pattern(good[s : s + m])) for s in range(0, code.N, m)
    )
    return [GroupPatternStats(b, g, n) for (b, g), n in sorted(counts.items())]


def split_histogram(stats: Iterable[GroupPatternStats], mode: str = "without") -> SplitHistogram:
    """Bucket occurrences by split count (``M1`` for ``"without"``, ``M2`` for ``"with"``), dropping 1."""
    if mode not in ("with", "without"):
        raise ValueError(f"mode must be 'with' or 'without', got {mode!r}")
    hist: Counter = Counter()
    for row in stats:
        s = row.M2 if mode == "with" else row.M1
        if s > 1 and row.N1:
            hist[s] += row.N1
    return dict(sorted(hist.items()))


def sorting_cost(hist: Mapping[int, int], L: int = 1, model: str = "square") -> int:
    """Sorting workload: ``sum count*s**2`` (square) or ``sum count*s*log2(s)`` (loglinear), times ``L``."""
    if model not in COST_MODELS:
        raise ValueError(f"unknown cost model {model!r}; expected one of {COST_MODELS}")
    total = 0
    for s, count in hist.items():
        s, count = int(s), int(count)
        if s < 1 or s & (s - 1):
            raise ValueError(f"split count {s} is not a power of two")
        total += count * (s * s if model == "square" else s * (s.bit_length() - 1))
    return L * total


def runtime_split_stats(stats) -> SplitHistogram:
    """Histogram of observed splits per survivor from one or more :class:`DecodeStats`.

    Each group contributes ``candidates / paths_in``; groups that do not split are dropped.
    """
    if hasattr(stats, "candidates"):
        stats = [stats]
    hist: Counter = Counter()
    for st in stats:
        if np.any(st.candidates % st.paths_in):
            raise ValueError("candidate count is not a multiple of the list size")
        splits = st.candidates // st.paths_in
        for s, c in zip(*np.unique(splits, return_counts=True)):
            if s > 1:
                hist[int(s)] += int(c)
    return dict(sorted(hist.items()))


# --------------------------------------------------------------------------- fixtures / CSV


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture (``tableI.csv``, ``tableIII.csv``)."""
    return Path(str(resources.files("dascl") / "fixtures" / name))


def read_pattern_csv(path: str | Path) -> list[GroupPatternStats]:
    """Read ``bit_pattern,good_pattern,N1`` rows; extra columns (M1, M2) are ignored."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"bit_pattern", "good_pattern", "N1"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s) {sorted(missing)}")
        rows = []
        for r in reader:
            rows.append(GroupPatternStats(r["bit_pattern"].strip(), r["good_pattern"].strip(), int(r["N1"])))
    return rows


def write_pattern_csv(stats: Iterable[GroupPatternStats], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bit_pattern", "good_pattern", "N1", "M1", "M2"])
    for r in stats:
        w.writerow([r.bit_pattern, r.good_pattern, r.N1, r.M1, r.M2])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# --------------------------------------------------------------------------- reference histogram

# Reference split histogram published for the tableI.csv code (780 good bits);
# its s=4 "with" entry disagrees with the rows it summarises.
REFERENCE_HISTOGRAM = {
    "without": {2: 38, 4: 9, 8: 44, 16: 213},
    "with": {2: 94, 4: 28, 8: 24},
}
# Reference cost totals for the same code.
REFERENCE_TOTALS = {
    "without": {"square": 57640, "loglinear": 14836},
    "with": {"square": 2664, "loglinear": 1140},
}


def histogram_reconciliation(stats: Iterable[GroupPatternStats] | None = None) -> dict:
    """Compare the reference histogram against the one derived from the rows.

    Returns a dict with the derived and reference histograms, every bucket that
    differs, and the costs each version implies.
    """
    if stats is None:
        stats = read_pattern_csv(fixture_path("tableI.csv"))
    stats = list(stats)
    out = {"mismatches": []}
    for mode in ("without", "with"):
        derived = split_histogram(stats, mode)
        reference = REFERENCE_HISTOGRAM[mode]
        totals = REFERENCE_TOTALS[mode]
        out[mode] = {
            "derived": derived,
            "reference": reference,
            "cost_derived": {m: sorting_cost(derived, model=m) for m in COST_MODELS},
            "cost_reference": {m: sorting_cost(reference, model=m) for m in COST_MODELS},
            "totals": totals,
        }
        out[mode]["derived_matches_totals"] = out[mode]["cost_derived"] == totals
        out[mode]["reference_matches_totals"] = out[mode]["cost_reference"] == totals
        for s in sorted(set(derived) | set(reference)):
            if derived.get(s, 0) != reference.get(s, 0):
                out["mismatches"].append(
                    {"mode": mode, "splits": s, "derived": derived.get(s, 0), "reference": reference.get(s, 0)}
                )
    return out


def format_reconciliation_note(rec: dict) -> str:
    lines = []
    for mm in rec["mismatches"]:
        mode = rec[mm["mode"]]
        lines.append(
            f"split histogram discrepancy ({mm['mode']} decision, s={mm['splits']}): "
            f"derived {mm['derived']}, reference {mm['reference']}"
        )
        lines.append(
            "  square cost: derived {} vs reference {}; loglinear cost: derived {} vs reference {}".format(
                mode["cost_derived"]["square"], mode["cost_reference"]["square"],
                mode["cost_derived"]["loglinear"], mode["cost_reference"]["loglinear"],
            )
        )
        totals = mode["totals"]
        if mode["derived_matches_totals"] and not mode["reference_matches_totals"]:
            verdict = f"only the derived value {mm['derived']} reproduces"
        elif mode["reference_matches_totals"]:
            verdict = f"the reference value {mm['reference']} reproduces"
        else:
            verdict = "neither value reproduces"
        lines.append(
            f"  {verdict} the reference totals {totals['square']} and {totals['loglinear']}; derived value used"
        )
    return "\n".join(lines)


def format_pattern_table(stats: Iterable[GroupPatternStats]) -> str:
    stats = list(stats)
    lines = [f"{'bit':>8} {'good':>8} {'N1':>6} {'M1':>5} {'M2':>5}"]
    for r in stats:
        lines.append(f"{r.bit_pattern:>8} {r.good_pattern:>8} {r.N1:>6} {r.M1:>5} {r.M2:>5}")
    lines.append(
        f"sum N1 = {sum(r.N1 for r in stats)}, "
        f"sum N1*#info = {sum(r.N1 * r.n_info for r in stats)}, "
        f"sum N1*#good = {sum(r.N1 * r.n_good for r in stats)}"
    )
    return "\n".join(lines)


def format_histograms(stats: Iterable[GroupPatternStats], L: int = 1) -> str:
    stats = list(stats)
    wo, wi = split_histogram(stats, "without"), split_histogram(stats, "with")
    lines = [f"{'splits':>7} {'without':>8} {'with':>6}"]
    for s in sorted(set(wo) | set(wi)):
        lines.append(f"{s:>7} {wo.get(s, 0):>8} {wi.get(s, 0):>6}")
    for model in COST_MODELS:
        a, b = sorting_cost(wo, L, model), sorting_cost(wi, L, model)
        ratio = f"{100.0 * b / a:.1f}%" if a else "n/a"
        lines.append(f"{model} cost: without {a}, with {b} ({ratio})")
    return "\n".join(lines)
