"""Writer for the FSDUMP01 interchange format.

This is a standalone implementation of the byte layout the scheduler
toolkit consumes; the format itself is the only coupling between the
two packages.

    header   magic "FSDUMP01", then u32 fields: format_version, B, D, V,
             num_steps, flags (bit 0: logits present)
    per step step_index u32, mask bitmap ceil(B/8) bytes LSB-first,
             hidden B*D float32 row-major, logits B*V float32 row-major
             when flagged
    trailer  crc32 of all preceding bytes, u32

All integers and floats little-endian.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

MAGIC = b"FSDUMP01"
FORMAT_VERSION = 1
FLAG_LOGITS = 1

_HEADER = struct.Struct("<8s6I")
_U32 = struct.Struct("<I")


class DumpWriter:
    """Collects per-step tensors and serializes them on ``finish``."""

    def __init__(self, block_len: int, hidden_dim: int, vocab_size: int,
                 with_logits: bool = True):
        if min(block_len, hidden_dim, vocab_size) < 1:
            raise ValueError(
                f"bad dump dims B={block_len}, D={hidden_dim}, V={vocab_size}"
            )
        self.block_len = block_len
        self.hidden_dim = hidden_dim
        self.vocab_size = vocab_size
        self.with_logits = with_logits
        self._records: list[bytes] = []

    def add_step(self, step_index: int, mask: np.ndarray,
                 hidden: np.ndarray, logits: np.ndarray | None) -> None:
        mask = np.asarray(mask, dtype=bool)
        hidden = np.ascontiguousarray(hidden, dtype="<f4")
        if mask.shape != (self.block_len,):
            raise ValueError(f"step {step_index}: mask shape {mask.shape}")
        if hidden.shape != (self.block_len, self.hidden_dim):
            raise ValueError(f"step {step_index}: hidden shape {hidden.shape}")
        parts = [
            _U32.pack(step_index),
            np.packbits(mask, bitorder="little").tobytes(),
            hidden.tobytes(),
        ]
        if self.with_logits:
            logits = np.ascontiguousarray(logits, dtype="<f4")
            if logits.shape != (self.block_len, self.vocab_size):
                raise ValueError(f"step {step_index}: logits shape {logits.shape}")
            parts.append(logits.tobytes())
        self._records.append(b"".join(parts))

    def to_bytes(self) -> bytes:
        flags = FLAG_LOGITS if self.with_logits else 0
        body = _HEADER.pack(
            MAGIC, FORMAT_VERSION, self.block_len, self.hidden_dim,
            self.vocab_size, len(self._records), flags,
        ) + b"".join(self._records)
        return body + _U32.pack(zlib.crc32(body))

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())
