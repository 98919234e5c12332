"""CRC attach/check on bit vectors.

Messages are 0/1 arrays, first element = first bit on the wire (MSB of the
first byte).  All functions accept a batch ``(..., n_bits)`` as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["CrcSpec", "CRC16_CCITT_FALSE", "crc_remainder", "crc_attach", "crc_check", "parse_crc"]


@dataclass(frozen=True)
class CrcSpec:
    width: int = 16
    polynomial: int = 0x1021
    init: int = 0xFFFF
    final_xor: int = 0x0000
    reflect_in: bool = False
    reflect_out: bool = False

    def __post_init__(self):
        if self.width not in (8, 16, 24, 32):
            raise ValueError(f"unsupported CRC width {self.width}")
        top = 1 << self.width
        for name in ("polynomial", "init", "final_xor"):
            value = getattr(self, name)
            if not 0 <= value < top:
                raise ValueError(f"CRC {name} 0x{value:X} does not fit in {self.width} bits")

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1

    def __str__(self) -> str:
        digits = self.width // 4
        return f"{self.width}:0x{self.polynomial:0{digits}X}:0x{self.init:0{digits}X}"


CRC16_CCITT_FALSE = CrcSpec()


def parse_crc(text: str) -> CrcSpec | None:
    """Parse ``width:poly[:init[:xorout]]`` (hex or decimal); ``none`` disables the CRC."""
    if text.strip().lower() in ("none", "0", ""):
        return None
    parts = text.split(":")
    if not 2 <= len(parts) <= 4:
        raise ValueError(f"bad CRC spec {text!r}, expected width:poly[:init[:xorout]]")
    vals = [int(p, 0) for p in parts]
    width, poly = vals[0], vals[1]
    init = vals[2] if len(vals) > 2 else 0
    xorout = vals[3] if len(vals) > 3 else 0
    return CrcSpec(width, poly, init, xorout)


@lru_cache(maxsize=None)
def _table(width: int, poly: int) -> np.ndarray:
    top = 1 << (width - 1)
    mask = (1 << width) - 1
    table = np.zeros(256, dtype=np.uint64)
    for byte in range(256):
        reg = byte << (width - 8)
        for _ in range(8):
            reg = ((reg << 1) ^ poly) if reg & top else (reg << 1)
        table[byte] = reg & mask
    return table


def _reflect(value: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros_like(value)
    for b in range(width):
        out |= ((value >> np.uint64(b)) & np.uint64(1)) << np.uint64(width - 1 - b)
    return out


def crc_remainder(bits: np.ndarray, spec: CrcSpec = CRC16_CCITT_FALSE) -> np.ndarray:
    """Checksum register of ``bits`` as unsigned integers, one per message row."""
    bits = np.asarray(bits, dtype=np.uint8)
    lead, n = bits.shape[:-1], bits.shape[-1]
    flat = bits.reshape(-1, n)
    w = spec.width
    mask = np.uint64(spec.mask)
    top_shift = np.uint64(w - 1)
    poly = np.uint64(spec.polynomial)
    reg = np.full(flat.shape[0], spec.init, dtype=np.uint64)

    if spec.reflect_in:
        if n % 8:
            raise ValueError("reflected CRC input needs a whole number of bytes")
        flat = flat.reshape(-1, n // 8, 8)[..., ::-1].reshape(-1, n)

    # leading bits that do not fill a byte, one at a time
    head = n % 8
    for j in range(head):
        fb = ((reg >> top_shift) & np.uint64(1)) ^ flat[:, j].astype(np.uint64)
        reg = ((reg << np.uint64(1)) & mask) ^ (fb * poly)

    if n > head:
        data = np.packbits(flat[:, head:], axis=1).astype(np.uint64)
        table = _table(w, spec.polynomial)
        shift = np.uint64(w - 8)
        for j in range(data.shape[1]):
            idx = ((reg >> shift) ^ data[:, j]) & np.uint64(0xFF)
            reg = ((reg << np.uint64(8)) & mask) ^ table[idx]

    if spec.reflect_out:
        reg = _reflect(reg, w)
    reg ^= np.uint64(spec.final_xor)
    return reg.reshape(lead)


def _to_bits(values: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((values[..., None] >> shifts) & np.uint64(1)).astype(np.uint8)


def crc_attach(message_bits: np.ndarray, spec: CrcSpec = CRC16_CCITT_FALSE) -> np.ndarray:
    """Append the ``spec.width`` checksum bits (MSB first) to the message."""
    msg = np.asarray(message_bits, dtype=np.uint8)
    if msg.shape[-1] == 0:
        raise ValueError("cannot attach a CRC to an empty message")
    checksum = _to_bits(crc_remainder(msg, spec), spec.width)
    return np.concatenate([msg, checksum], axis=-1)


def crc_check(bits: np.ndarray, spec: CrcSpec = CRC16_CCITT_FALSE) -> np.ndarray | bool:
    """True where the trailing ``spec.width`` bits match the checksum of the prefix."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] <= spec.width:
        raise ValueError(f"need more than {spec.width} bits to check a CRC-{spec.width}")
    expected = _to_bits(crc_remainder(bits[..., : -spec.width], spec), spec.width)
    ok = np.all(expected == bits[..., -spec.width :], axis=-1)
    return bool(ok) if ok.ndim == 0 else ok
