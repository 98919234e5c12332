"""Command-line front end: ``dascl <subcommand> [options]``.

Exit status: 0 on success, 1 on usage errors (bad flags, missing files,
invalid configuration), 2 on failures while running.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .crc import CrcSpec, crc_attach, parse_crc
from .decoders import DecoderConfig, adaptive_decode, decode, select_output_path
from .polar_core import build_code, write_reliability_file, encode
from .sim import SimConfig, run_sweep

__all__ = ["run", "main", "RunManifest"]

log = logging.getLogger("dascl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunManifest:
    subcommand: str
    options: dict
    config: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)


# --------------------------------------------------------------------------- parser


def _code_flags(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--N", type=int, default=d(1024), help="block length (power of two)")
    p.add_argument("--K", type=int, default=d(528), help="information length including CRC bits")
    p.add_argument("--good-fraction", type=float, default=d(0.0), help="share of information bits marked good")
    p.add_argument("--construction", choices=["ga", "bhatta", "file"], default=d("ga"))
    p.add_argument("--design-param", type=float, default=None,
                   help="design Eb/N0 in dB (ga) or channel Bhattacharyya parameter (bhatta)")
    p.add_argument("--reliability-file", type=Path, default=None, help="reliability sequence for --construction file")


def _decoder_flags(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--m", type=int, default=d(4), help="group width")
    p.add_argument("--list-size", type=int, default=d(8), help="list size L (maximum list size when adaptive)")
    p.add_argument("--adaptive", action=argparse.BooleanOptionalAction, default=d(False),
                   help="CRC-gated retries with L = 1, 2, 4, ..., --list-size")
    p.add_argument("--decision", action=argparse.BooleanOptionalAction, default=None,
                   help="decision-aided extension (default: on when --good-fraction > 0)")
    p.add_argument("--metric", choices=["exact", "min-approx"], default=d("exact"))
    p.add_argument("--crc", default=d("16:0x1021:0xFFFF"), help="width:poly[:init[:xorout]] or 'none'")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dascl", description="Decision-aided parallel SC-List polar decoding toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("construct", help="emit reliability order and frozen mask")
    _code_flags(p)
    p.add_argument("--out", type=Path, help="output prefix; writes PREFIX.reliability.txt and PREFIX.frozen.txt")

    p = sub.add_parser("encode", help="encode a payload bit file")
    _code_flags(p)
    p.add_argument("--crc", default="16:0x1021:0xFFFF", help="width:poly[:init[:xorout]] or 'none'")
    p.add_argument("--input", type=Path, required=True, help="payload bits as 0/1 text")
    p.add_argument("--out", type=Path, help="codeword bits (0/1 text); stdout if omitted")

    p = sub.add_parser("decode", help="decode one block of channel LLRs")
    _code_flags(p)
    _decoder_flags(p)
    p.add_argument("--input", type=Path, required=True, help="N whitespace-separated LLRs (positive favours 0)")
    p.add_argument("--out", type=Path, help="decoded payload bits; stdout if omitted")

    p = sub.add_parser("analyze", help="group-pattern table, split histograms and sorting costs")
    _code_flags(p)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--fixture", type=str, help="pattern CSV (bit_pattern,good_pattern,N1) instead of a code")
    p.add_argument("--list-size", type=int, default=1, help="cost multiplier")
    p.add_argument("--out", type=Path, help="write the pattern table as CSV")

    p = sub.add_parser("cost", help="sorting cost of a fixture or code")
    _code_flags(p)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--fixture", type=str)
    p.add_argument("--mode", choices=["with", "without"], default="with")
    p.add_argument("--model", choices=list(analysis.COST_MODELS), default="square")
    p.add_argument("--list-size", type=int, default=1, help="cost multiplier")

    p = sub.add_parser("simulate", help="Monte-Carlo FER/BER sweep")
    p.add_argument("--config", type=Path, help="JSON SimConfig; flags override its values")
    _code_flags(p, defaults=False)
    _decoder_flags(p, defaults=False)
    p.add_argument("--list-max", type=int, default=None, help="alias for --list-size with --adaptive")
    p.add_argument("--ebn0", type=str, help="comma-separated Eb/N0 values in dB")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-frames", type=int)
    p.add_argument("--target-errors", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", type=Path, help="output prefix; writes PREFIX.csv and PREFIX.json")
    return parser


# --------------------------------------------------------------------------- helpers


def _require_file(path: Path | None, what: str) -> None:
    if path is not None and not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")


def _require_outdir(path: Path | None) -> None:
    if path is not None and not Path(path).resolve().parent.is_dir():
        raise UsageError(f"output directory does not exist: {Path(path).parent}")


def _resolve_fixture(name: str) -> Path:
    p = Path(name)
    if p.is_file():
        return p
    bundled = analysis.fixture_path(p.name)
    if bundled.is_file():
        return bundled
    raise UsageError(f"fixture not found: {name}")


_CONSTRUCTIONS = {"ga": "gaussian-approx", "bhatta": "bhattacharyya", "file": "imported"}


def _code_from_args(a):
    if a.construction == "file" and a.reliability_file is None:
        raise UsageError("--construction file needs --reliability-file")
    _require_file(a.reliability_file, "reliability file")
    try:
        return build_code(a.N, a.K, a.good_fraction, _CONSTRUCTIONS[a.construction], a.design_param,
                          path=a.reliability_file)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _crc_from_args(text: str | None) -> CrcSpec | None:
    if text is None:
        return None
    try:
        return parse_crc(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_bits(path: Path) -> np.ndarray:
    text = "".join(path.read_text(encoding="utf-8").split())
    if set(text) - {"0", "1"}:
        raise UsageError(f"{path}: expected only 0/1 characters")
    return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")


def _bits_text(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in bits) + "\n"


def _emit(text: str, path: Path | None, manifest: RunManifest) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
        manifest.outputs.append(str(path))


# --------------------------------------------------------------------------- subcommands


def _cmd_construct(a, manifest: RunManifest) -> None:
    _require_outdir(a.out)
    code = _code_from_args(a)
    header = f"N={code.N} K={code.K} construction={a.construction} design_param={a.design_param}"
    frozen = _bits_text(code.frozen_mask)
    if a.out is None:
        sys.stdout.write("\n".join(str(i) for i in code.reliability_order) + "\n")
        sys.stdout.write(frozen)
        return
    rel = Path(f"{a.out}.reliability.txt")
    write_reliability_file(rel, code.reliability_order, header)
    manifest.outputs.append(str(rel))
    _emit(frozen, Path(f"{a.out}.frozen.txt"), manifest)


def _cmd_encode(a, manifest: RunManifest) -> None:
    _require_file(a.input, "input file")
    _require_outdir(a.out)
    crc = _crc_from_args(a.crc)
    code = _code_from_args(a)
    payload = _read_bits(a.input)
    expected = code.K - (crc.width if crc else 0)
    if payload.size != expected:
        raise UsageError(f"payload has {payload.size} bits, expected {expected}")
    info = crc_attach(payload, crc) if crc else payload
    _emit(_bits_text(encode(info, code)), a.out, manifest)


def _cmd_decode(a, manifest: RunManifest) -> None:
    _require_file(a.input, "input file")
    _require_outdir(a.out)
    crc = _crc_from_args(a.crc)
    code = _code_from_args(a)
    try:
        llrs = np.array(a.input.read_text(encoding="utf-8").split(), dtype=np.float64)
    except ValueError:
        raise UsageError(f"{a.input}: expected whitespace-separated numbers") from None
    if llrs.size != code.N:
        raise UsageError(f"{a.input}: expected {code.N} LLRs, found {llrs.size}")
    decision = a.good_fraction > 0 if a.decision is None else a.decision
    try:
        cfg = DecoderConfig(L=1 if a.adaptive else a.list_size, m=a.m, decision_enabled=decision,
                            adaptive=a.adaptive, L_max=a.list_size, metric_mode=a.metric)
        cfg.check_code(code)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if a.adaptive:
        if crc is None:
            raise UsageError("--adaptive needs a CRC")
        res = adaptive_decode(llrs, code, cfg, crc)
        payload, ok = res.payload, res.passed
        log.info("list sizes tried: %s", res.trace)
    else:
        out = decode(llrs, code, cfg)
        if crc:
            sel = select_output_path(out.final_list, code, crc)
            payload, ok = sel.payload, sel.passed
        else:
            payload, ok = out.best_path_bits, True
    if not ok:
        print("warning: no path passed the CRC", file=sys.stderr)
    _emit(_bits_text(payload), a.out, manifest)


def _pattern_rows(a):
    if a.fixture:
        return analysis.read_pattern_csv(_resolve_fixture(a.fixture)), True
    code = _code_from_args(a)
    if a.m < 1 or code.N % a.m:
        raise UsageError(f"--m {a.m} does not divide N={code.N}")
    return analysis.enumerate_group_patterns(code, a.m), False


def _cmd_analyze(a, manifest: RunManifest) -> None:
    _require_outdir(a.out)
    rows, from_fixture = _pattern_rows(a)
    print(analysis.format_pattern_table(rows))
    print()
    print(analysis.format_histograms(rows, a.list_size))
    if from_fixture:
        note = analysis.format_reconciliation_note(analysis.histogram_reconciliation(rows))
        if note and rows == analysis.read_pattern_csv(analysis.fixture_path("tableI.csv")):
            print()
            print(note)
    if a.out is not None:
        analysis.write_pattern_csv(rows, a.out)
        manifest.outputs.append(str(a.out))


def _cmd_cost(a, manifest: RunManifest) -> None:
    rows, _ = _pattern_rows(a)
    hist = analysis.split_histogram(rows, a.mode)
    print(analysis.sorting_cost(hist, a.list_size, a.model))


def _sim_config(a) -> SimConfig:
    base: dict = {}
    if a.config is not None:
        _require_file(a.config, "config file")
        try:
            base = json.loads(a.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{a.config}: invalid JSON ({exc})") from None
        base = base.get("config", base)  # accept a previous result document
    try:
        cfg = SimConfig.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None

    over: dict = {}
    for flag, key in [("N", "N"), ("K", "K"), ("good_fraction", "good_fraction"), ("design_param", "design_param"),
                      ("seed", "seed"), ("max_frames", "max_frames"), ("target_errors", "target_frame_errors"),
                      ("workers", "workers")]:
        if getattr(a, flag) is not None:
            over[key] = getattr(a, flag)
    if a.construction is not None:
        over["construction"] = _CONSTRUCTIONS[a.construction]
    if a.reliability_file is not None:
        _require_file(a.reliability_file, "reliability file")
        over["reliability_file"] = str(a.reliability_file)
    if a.crc is not None:
        over["crc"] = _crc_from_args(a.crc)
    if a.ebn0 is not None:
        try:
            over["ebn0_db"] = tuple(float(x) for x in a.ebn0.split(",") if x.strip())
        except ValueError:
            raise UsageError(f"bad --ebn0 list {a.ebn0!r}") from None

    dec: dict = {}
    for flag, key in [("m", "m"), ("metric", "metric_mode"), ("adaptive", "adaptive")]:
        if getattr(a, flag) is not None:
            dec[key] = getattr(a, flag)
    L = a.list_max if a.list_max is not None else a.list_size
    adaptive = dec.get("adaptive", cfg.decoder.adaptive)
    if L is not None:
        dec.update({"L_max": L, "L": 1} if adaptive else {"L": L})
    if a.decision is not None:
        dec["decision_enabled"] = a.decision
    elif "good_fraction" in over:
        dec["decision_enabled"] = over["good_fraction"] > 0
    try:
        if dec:
            over["decoder"] = dataclasses.replace(cfg.decoder, **dec)
        return dataclasses.replace(cfg, **over)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None


def _cmd_simulate(a, manifest: RunManifest) -> None:
    _require_outdir(a.out)
    cfg = _sim_config(a)
    manifest.config = cfg.to_dict()
    result = run_sweep(cfg, progress=True)
    csv_text = result.to_csv()
    sys.stdout.write(csv_text)
    if a.out is not None:
        for suffix, text in ((".csv", csv_text), (".json", result.to_json())):
            path = Path(f"{a.out}{suffix}")
            path.write_text(text, encoding="utf-8", newline="\n")
            manifest.outputs.append(str(path))


_COMMANDS = {
    "construct": _cmd_construct,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "analyze": _cmd_analyze,
    "cost": _cmd_cost,
    "simulate": _cmd_simulate,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(message)s")
    manifest = RunManifest(a.command, {k: str(v) for k, v in vars(a).items()})
    try:
        _COMMANDS[a.command](a, manifest)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 2
    log.debug("manifest: %s", manifest)
    return 0


def main() -> None:
    sys.exit(run())
