"""BPSK over AWGN with LLR output.

Noise comes from numpy's PCG64 bit generator.  Simulation frames draw from
``frame_rng(seed, ...)`` so each frame owns a stream keyed by its indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ChannelParams", "noise_variance", "frame_rng", "bpsk", "transmit", "llr_from_samples"]


def noise_variance(ebn0_db: float, code_rate: float) -> float:
    """Per-dimension noise variance for unit-energy BPSK at the given Eb/N0."""
    return 1.0 / (2.0 * code_rate * 10.0 ** (ebn0_db / 10.0))


@dataclass(frozen=True)
class ChannelParams:
    ebn0_db: float
    code_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.code_rate <= 1.0:
            raise ValueError(f"code rate must lie in (0, 1], got {self.code_rate}")

    @property
    def sigma2(self) -> float:
        return noise_variance(self.ebn0_db, self.code_rate)


def frame_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & (2**64 - 1), *keys])))


def bpsk(bits: np.ndarray) -> np.ndarray:
    """Map bit 0 to +1 and bit 1 to -1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def transmit(
    codeword: np.ndarray, params: ChannelParams, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Send ``codeword`` over BPSK/AWGN and return channel LLRs (positive favours 0).

    Without an explicit ``rng`` the noise is drawn from ``frame_rng(params.seed)``,
    so equal inputs give equal outputs.
    """
    x = bpsk(codeword)
    if x.size == 0:
        raise ValueError("empty codeword")
    if rng is None:
        rng = frame_rng(params.seed)
    sigma2 = params.sigma2
    y = x + rng.normal(0.0, np.sqrt(sigma2), size=x.shape)
    return llr_from_samples(y, sigma2)


def llr_from_samples(y: np.ndarray, sigma2: float) -> np.ndarray:
    """BPSK/AWGN LLR ``2 y / sigma^2``."""
    return 2.0 * np.asarray(y, dtype=np.float64) / sigma2
