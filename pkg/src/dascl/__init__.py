"""Polar codes with decision-aided parallel SC-List decoding."""

from .channel import ChannelParams, frame_rng, transmit
from .crc import CRC16_CCITT_FALSE, CrcSpec, crc_attach, crc_check
from .decoders import (
    DecoderConfig,
    adaptive_decode,
    decode,
    sc_decode,
    select_output_path,
    serial_scl_decode,
)
from .polar_core import (
    PolarCodeSpec,
    ReliabilityProfile,
    bit_reversal_permutation,
    build_code,
    construct_reliability,
    encode,
    plan_code,
    polar_transform,
)

__version__ = "0.1.0"
