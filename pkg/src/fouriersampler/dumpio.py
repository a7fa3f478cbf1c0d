"""Bit-exact binary interchange for recorded decode sessions.

Layout (all integers and floats little-endian):

    header   magic "FSDUMP01" (8 bytes)
             format_version u32, B u32, D u32, V u32, num_steps u32,
             flags u32 (bit 0: logits present)
    per step step_index u32
             mask bitmap, ceil(B/8) bytes, LSB-first
             hidden  B*D float32, row-major
             logits  B*V float32, row-major (only when flagged)
    trailer  crc32 of all preceding bytes, u32

The CRC is verified before any field parsing, so any single-byte
corruption surfaces as a :class:`ChecksumError`.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumError,
    SizeError,
    ValidationError,
    VersionError,
)

MAGIC = b"FSDUMP01"
FORMAT_VERSION = 1
FLAG_LOGITS = 1

_HEADER = struct.Struct("<8s6I")
_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class StepDump:
    """One recorded forward pass of the active block."""

    step_index: int
    mask: np.ndarray  # (B,) bool, mask state before this step's commits
    hidden: np.ndarray  # (B, D) float32
    logits: np.ndarray | None  # (B, V) float32 when recorded


@dataclass
class DumpFile:
    block_len: int
    hidden_dim: int
    vocab_size: int
    steps: list[StepDump] = field(default_factory=list)
    version: int = FORMAT_VERSION

    @property
    def num_steps(self) -> int:
        return len(self.steps)

    @property
    def has_logits(self) -> bool:
        return bool(self.steps) and self.steps[0].logits is not None

    def validate(self) -> None:
        b, d, v = self.block_len, self.hidden_dim, self.vocab_size
        if min(b, d, v) < 1:
            raise ValidationError(f"bad dump dims B={b}, D={d}, V={v}")
        with_logits = self.has_logits
        for s in self.steps:
            if s.mask.shape != (b,) or s.hidden.shape != (b, d):
                raise ValidationError(f"step {s.step_index}: shape mismatch with header")
            if (s.logits is None) == with_logits:
                raise ValidationError("steps disagree about logits presence")
            if with_logits and s.logits.shape != (b, v):
                raise ValidationError(f"step {s.step_index}: logits shape mismatch")


def expected_size(block_len: int, hidden_dim: int, vocab_size: int,
                  num_steps: int, with_logits: bool) -> int:
    """Total byte length implied by a header."""
    per_step = 4 + (block_len + 7) // 8 + 4 * block_len * hidden_dim
    if with_logits:
        per_step += 4 * block_len * vocab_size
    return _HEADER.size + num_steps * per_step + 4


def to_bytes(dump: DumpFile) -> bytes:
    dump.validate()
    flags = FLAG_LOGITS if dump.has_logits else 0
    parts = [
        _HEADER.pack(
            MAGIC, dump.version, dump.block_len, dump.hidden_dim,
            dump.vocab_size, dump.num_steps, flags,
        )
    ]
    for s in dump.steps:
        parts.append(_U32.pack(s.step_index))
        parts.append(np.packbits(s.mask, bitorder="little").tobytes())
        parts.append(np.ascontiguousarray(s.hidden, dtype="<f4").tobytes())
        if s.logits is not None:
            parts.append(np.ascontiguousarray(s.logits, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + _U32.pack(zlib.crc32(body))


def from_bytes(data: bytes) -> DumpFile:
    if len(data) < _HEADER.size + 4:
        raise SizeError(f"stream of {len(data)} bytes is shorter than any valid dump")
    body, trailer = data[:-4], data[-4:]
    if zlib.crc32(body) != _U32.unpack(trailer)[0]:
        raise ChecksumError("crc32 mismatch: dump is corrupted")
    magic, version, b, d, v, num_steps, flags = _HEADER.unpack_from(body)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported dump version {version}")
    with_logits = bool(flags & FLAG_LOGITS)
    if len(data) != expected_size(b, d, v, num_steps, with_logits):
        raise SizeError(
            f"stream has {len(data)} bytes but header implies "
            f"{expected_size(b, d, v, num_steps, with_logits)}"
        )
    mask_bytes = (b + 7) // 8
    steps = []
    off = _HEADER.size
    for _ in range(num_steps):
        (step_index,) = _U32.unpack_from(body, off)
        off += 4
        mask = np.unpackbits(
            np.frombuffer(body, np.uint8, count=mask_bytes, offset=off),
            count=b, bitorder="little",
        ).astype(bool)
        off += mask_bytes
        hidden = np.frombuffer(body, "<f4", count=b * d, offset=off).reshape(b, d)
        off += 4 * b * d
        logits = None
        if with_logits:
            logits = np.frombuffer(body, "<f4", count=b * v, offset=off).reshape(b, v)
            off += 4 * b * v
        steps.append(StepDump(step_index=step_index, mask=mask, hidden=hidden, logits=logits))
    return DumpFile(block_len=b, hidden_dim=d, vocab_size=v, steps=steps, version=version)


def write_dump(dump: DumpFile, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(dump))


def read_dump(path) -> DumpFile:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


class DumpRecorder:
    """Accumulates per-step arrays during a decode into a :class:`DumpFile`.

    Pass as ``recorder=`` to :func:`fouriersampler.decoder.decode`.
    Dimensions are fixed by the first recorded step; since the format
    fixes one block size per file, recording requires every block of the
    decode to have the same length (block_size must divide gen_len).
    """

    def __init__(self, with_logits: bool = True):
        self._with_logits = with_logits
        self._steps: list[StepDump] = []
        self._dims: tuple[int, int, int] | None = None

    def on_step(self, step_index: int, mask: np.ndarray,
                hidden32: np.ndarray, logits32: np.ndarray) -> None:
        b, d = hidden32.shape
        v = logits32.shape[1]
        if self._dims is None:
            self._dims = (b, d, v)
        elif self._dims != (b, d, v):
            raise ValidationError(
                f"step {step_index}: block dims (B={b}, D={d}, V={v}) differ from "
                f"earlier steps {self._dims}; recording requires block_size to "
                f"divide gen_len"
            )
        if mask.shape != (b,):
            raise ValidationError(f"step {step_index}: mask length {mask.shape} != block {b}")
        self._steps.append(
            StepDump(
                step_index=step_index,
                mask=np.array(mask, dtype=bool),
                hidden=np.array(hidden32, dtype="<f4"),
                logits=np.array(logits32, dtype="<f4") if self._with_logits else None,
            )
        )

    def finish(self) -> DumpFile:
        if self._dims is None:
            raise ValidationError("no steps were recorded")
        b, d, v = self._dims
        dump = DumpFile(block_len=b, hidden_dim=d, vocab_size=v, steps=self._steps)
        dump.validate()
        return dump
