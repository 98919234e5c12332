"""
Monte-Carlo FER/BER sweeps over BPSK/AWGN.

Frame ``f`` at SNR point ``i`` draws its payload and noise from
``frame_rng(seed, i, f)``, and results are folded in frame order, so a
sweep gives the same numbers for any worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelParams, frame_rng, transmit
from .crc import CrcSpec, crc_attach
from .decoders import DecoderConfig, adaptive_decode, decode, select_output_path
from .polar_core import PolarCodeSpec, build_code, encode

__all__ = ["SimConfig", "SnrRecord", "SimResult", "confidence_interval", "run_sweep", "simulate_frame"]

log = logging.getLogger(__name__)

CSV_COLUMNS = ["ebn0_db", "frames", "frame_errors", "fer", "fer_lo", "fer_hi", "ber", "mean_list", "mean_candidates"]
BATCH = 32  # frames per work unit; fixed so results do not depend on worker count


def confidence_interval(errors: int, frames: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for an error proportion."""
    if frames < 1:
        raise ValueError("need at least one frame")
    if not 0 <= errors <= frames:
        raise ValueError("errors must lie in [0, frames]")
    p = errors / frames
    z2n = z * z / frames
    center = (p + z2n / 2) / (1 + z2n)
    half = z * math.sqrt(p * (1 - p) / frames + z2n / (4 * frames)) / (1 + z2n)
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == frames else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class SimConfig:
    N: int = 1024
    K: int = 528  # information length including CRC bits
    construction: str = "gaussian-approx"
    design_param: float | None = None
    reliability_file: str | None = None
    good_fraction: float = 0.0
    crc: CrcSpec | None = field(default_factory=CrcSpec)
    decoder: DecoderConfig = field(default_factory=lambda: DecoderConfig(L=1, m=4, adaptive=True, L_max=32))
    ebn0_db: tuple[float, ...] = (1.5,)
    max_frames: int = 10000
    target_frame_errors: int = 100
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ebn0_db", tuple(float(e) for e in self.ebn0_db))
        if not self.ebn0_db:
            raise ValueError("ebn0 list must not be empty")
        if self.max_frames < 1 or self.target_frame_errors < 1:
            raise ValueError("max_frames and target_frame_errors must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.crc is not None and self.K <= self.crc.width:
            raise ValueError("K must exceed the CRC width")
        if self.decoder.adaptive and self.crc is None:
            raise ValueError("adaptive decoding needs a CRC")
        if not 0 < self.K <= self.N:
            raise ValueError("K must lie in (0, N]")

    @property
    def payload_bits(self) -> int:
        return self.K - (self.crc.width if self.crc else 0)

    @property
    def code_rate(self) -> float:
        """Payload rate used for Eb/N0 scaling (CRC bits are overhead)."""
        return self.payload_bits / self.N

    def build_code(self) -> PolarCodeSpec:
        return build_code(
            self.N, self.K, self.good_fraction, self.construction, self.design_param,
            path=self.reliability_file,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ebn0_db"] = list(self.ebn0_db)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "crc" in d:
            d["crc"] = None if d["crc"] is None else CrcSpec(**d["crc"])
        if "decoder" in d:
            d["decoder"] = DecoderConfig(**d["decoder"])
        if "ebn0_db" in d:
            d["ebn0_db"] = tuple(d["ebn0_db"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class SnrRecord:
    ebn0_db: float
    frames: int
    frame_errors: int
    bit_errors: int
    fer: float
    fer_lo: float
    fer_hi: float
    ber: float
    mean_list: float
    mean_candidates: float


@dataclass
class SimResult:
    config: SimConfig
    records: list[SnrRecord]

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([
                f"{r.ebn0_db:g}", r.frames, r.frame_errors, f"{r.fer:.6e}", f"{r.fer_lo:.6e}",
                f"{r.fer_hi:.6e}", f"{r.ber:.6e}", f"{r.mean_list:.4f}", f"{r.mean_candidates:.4f}",
            ])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_json(self, path: str | Path | None = None) -> str:
        doc = {"config": self.config.to_dict(), "results": [asdict(r) for r in self.records]}
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


# --------------------------------------------------------------------------- frames


@dataclass
class _FrameOutcome:
    frame_error: bool
    bit_errors: int
    list_size: int
    candidates_per_group: float


def simulate_frame(config: SimConfig, code: PolarCodeSpec, snr_index: int, frame: int) -> _FrameOutcome:
    """Transmit and decode one frame; fully determined by its indices and the seed."""
    rng = frame_rng(config.seed, snr_index, frame)
    payload = rng.integers(0, 2, config.payload_bits, dtype=np.uint8)
    info = crc_attach(payload, config.crc) if config.crc else payload
    params = ChannelParams(config.ebn0_db[snr_index], config.code_rate, config.seed)
    llrs = transmit(encode(info, code), params, rng)

    dec = config.decoder
    n_groups = code.N // dec.m
    if dec.adaptive:
        res = adaptive_decode(llrs, code, dec, config.crc)
        decoded, list_size, cand = res.payload, res.trace[-1], res.candidates_sorted
    else:
        out = decode(llrs, code, dec)
        if config.crc:
            decoded = select_output_path(out.final_list, code, config.crc).payload
        else:
            decoded = out.best_path_bits
        list_size, cand = dec.L, out.stats.total_candidates
    bit_errors = int(np.count_nonzero(decoded != payload))
    return _FrameOutcome(bit_errors > 0, bit_errors, list_size, cand / n_groups)


def _run_batch(args) -> list[_FrameOutcome]:
    config, code, snr_index, start, stop = args
    return [simulate_frame(config, code, snr_index, f) for f in range(start, stop)]


def _batches(config: SimConfig, code: PolarCodeSpec, snr_index: int):
    for start in range(0, config.max_frames, BATCH):
        yield config, code, snr_index, start, min(start + BATCH, config.max_frames)


def run_sweep(config: SimConfig, progress: bool = False) -> SimResult:
    """Simulate every Eb/N0 point until ``target_frame_errors`` or ``max_frames``."""
    code = config.build_code()
    config.decoder.check_code(code)
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    records = []
    try:
        for si, ebn0 in enumerate(config.ebn0_db):
            if pool is None:
                outcomes = map(_run_batch, _batches(config, code, si))
            else:
                outcomes = pool.map(_run_batch, _batches(config, code, si), chunksize=1)
            frames = errors = bit_errors = 0
            list_sum = cand_sum = 0.0
            done = False
            for batch in outcomes:
                for o in batch:
                    frames += 1
                    errors += o.frame_error
                    bit_errors += o.bit_errors
                    list_sum += o.list_size
                    cand_sum += o.candidates_per_group
                    if errors >= config.target_frame_errors or frames >= config.max_frames:
                        done = True
                        break
                if progress:
                    log.info("Eb/N0 %.2f dB: %d frames, %d errors", ebn0, frames, errors)
                if done:
                    break
            if pool is not None and hasattr(outcomes, "close"):
                outcomes.close()
            lo, hi = confidence_interval(errors, frames)
            records.append(SnrRecord(
                ebn0_db=ebn0, frames=frames, frame_errors=errors, bit_errors=bit_errors,
                fer=errors / frames, fer_lo=lo, fer_hi=hi,
                ber=bit_errors / (frames * config.payload_bits),
                mean_list=list_sum / frames, mean_candidates=cand_sum / frames,
            ))
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return SimResult(config, records)
