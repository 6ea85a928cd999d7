"""Binary data blocks <-> quaternary base sequences.

Each byte becomes four bases, most-significant bit pair first, using the fixed
mapping A=00, C=01, G=10, T=11. Sequences are plain ``str`` objects over
``"ACGT"``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedSequenceError

BASES = "ACGT"
BITS_PER_BASE = 2
BASES_PER_BYTE = 4

_ALPHABET = np.frombuffer(BASES.encode("ascii"), dtype=np.uint8)
_LOOKUP = np.full(256, 255, dtype=np.uint8)
_LOOKUP[_ALPHABET] = np.arange(4, dtype=np.uint8)
_STRIP_BASES = str.maketrans("", "", BASES)
_SHIFTS = np.array([6, 4, 2, 0], dtype=np.uint8)


@dataclass(frozen=True)
class DataBlock:
    payload: bytes
    block_id: int = 0

    def __post_init__(self):
        if self.block_id < 0:
            raise ValueError("block_id must be unsigned")


def validate_sequence(seq: str) -> str:
    if seq.translate(_STRIP_BASES):
        bad = sorted(set(seq) - set(BASES))
        raise MalformedSequenceError(f"sequence contains non-ACGT symbols: {bad}")
    return seq


def sequence_to_codes(seq: str) -> np.ndarray:
    """Base string -> uint8 array of 2-bit symbol values."""
    validate_sequence(seq)
    return _LOOKUP[np.frombuffer(seq.encode("ascii"), dtype=np.uint8)]


def codes_to_sequence(codes) -> str:
    return _ALPHABET[np.asarray(codes, dtype=np.uint8)].tobytes().decode("ascii")


def encode_block(block: DataBlock | bytes) -> str:
    payload = block.payload if isinstance(block, DataBlock) else bytes(block)
    data = np.frombuffer(payload, dtype=np.uint8)
    codes = (data[:, None] >> _SHIFTS[None, :]) & 3
    return codes_to_sequence(codes.ravel())


def decode_block(seq: str, block_id: int = 0) -> DataBlock:
    if len(seq) % BASES_PER_BYTE:
        raise MalformedSequenceError(
            f"sequence length {len(seq)} is not a multiple of {BASES_PER_BYTE}"
        )
    codes = sequence_to_codes(seq).reshape(-1, BASES_PER_BYTE)
    data = np.bitwise_or.reduce(codes << _SHIFTS[None, :], axis=1).astype(np.uint8)
    return DataBlock(data.tobytes(), block_id)


def block_bit_capacity(base_count: int | float) -> int | float:
    """Information capacity in bits of a strand with ``base_count`` bases."""
    if base_count < 0:
        raise ValueError("base_count must be >= 0")
    return BITS_PER_BASE * base_count


def expand_runs(seq: str, run_length: int) -> str:
    """Repeat every base ``run_length`` times (homopolymer-segment encoding)."""
    if run_length < 1:
        raise ValueError("run_length must be >= 1")
    return "".join(b * run_length for b in seq)


def collapse_runs(seq: str, run_length: int) -> str:
    if len(seq) % run_length:
        raise MalformedSequenceError("segmented sequence length is not a multiple of run_length")
    return seq[::run_length]


def read_sequence_file(path: str | Path) -> str:
    return validate_sequence("".join(Path(path).read_text().split()))


def write_sequence_file(path: str | Path, seq: str) -> None:
    Path(path).write_text(seq + "\n")
