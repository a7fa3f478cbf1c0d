"""Block-wise unmasking loop over a pluggable model backend.

The generation region is split into contiguous blocks that complete in
order. Each block runs a fixed number of steps; at every step the
backend is queried once over the full token buffer, the masked positions
of the active block are scored (band-pass energy, confidence, fused),
a budget of ``ceil(masked_remaining / steps_left)`` positions is
selected, and the argmax token of each selected logits row is committed.

Backends return hidden states and logits for the active block only.
Both arrays are narrowed to float32 on receipt and widened back for
scoring: recorded dumps store those exact float32 bits, so a replayed
decode sees bit-identical inputs and reproduces the live trace
field-for-field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .analysis import TraceRecord
from .errors import ValidationError
from .sampler import (
    CalibratorHistory,
    SamplerConfig,
    SamplerKind,
    StepScores,
    adaptive_beta,
    fuse_scores,
    masked_max_probs,
    row_max_probs,
    select_positions,
    translated_filtering_score,
    window_at_step,
)
from .spectral import HiddenBlock, num_bins

#: Distinguished token id marking a still-masked position.
MASK_ID = -1


@dataclass(frozen=True)
class ModelOutput:
    """One forward pass: hidden states and logits of the active block."""

    hidden: HiddenBlock
    logits: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits)
        if logits.ndim != 2:
            raise ValidationError(f"logits must be 2-D (B, V), got shape {logits.shape}")
        if logits.shape[0] != self.hidden.block_len:
            raise ValidationError(
                f"hidden block has {self.hidden.block_len} rows but logits have "
                f"{logits.shape[0]}"
            )
        object.__setattr__(self, "logits", logits)


@dataclass(frozen=True)
class DecodePlan:
    """Static shape of a decode, handed to backends before the first step."""

    gen_len: int
    block_size: int
    steps_per_block: int
    blocks: tuple[tuple[int, int], ...]  # (start within gen region, length)

    @property
    def total_steps(self) -> int:
        return sum(min(self.steps_per_block, blen) for _, blen in self.blocks)


@dataclass(frozen=True)
class StepContext:
    """Everything a backend may look at when asked for a forward pass."""

    tokens: np.ndarray  # full buffer (prompt + generation region), read-only
    gen_start: int
    block_index: int
    block_start: int  # absolute index into ``tokens``
    block_len: int
    step_in_block: int
    steps_in_block: int
    global_step: int

    @property
    def block_tokens(self) -> np.ndarray:
        return self.tokens[self.block_start : self.block_start + self.block_len]

    @property
    def block_mask(self) -> np.ndarray:
        return self.block_tokens == MASK_ID


class Backend(Protocol):
    def forward(self, ctx: StepContext) -> ModelOutput: ...


@dataclass
class DecodeState:
    """Mutable per-sequence state owned by one decode."""

    tokens: np.ndarray
    gen_start: int
    block_index: int = 0
    step_in_block: int = 0
    calibrator: CalibratorHistory = None  # set in decode()
    trace: list[TraceRecord] = field(default_factory=list)


@dataclass(frozen=True)
class DecodeResult:
    tokens: np.ndarray  # completed full buffer
    trace: list[TraceRecord]
    gen_start: int
    divergent_steps: tuple[int, ...] = ()

    @property
    def generated(self) -> np.ndarray:
        return self.tokens[self.gen_start :]

    @property
    def divergent(self) -> bool:
        return bool(self.divergent_steps)


def split_blocks(gen_len: int, block_size: int) -> tuple[tuple[int, int], ...]:
    """(start, length) pairs covering the generation region in order.

    The final block may be shorter when ``block_size`` does not divide
    ``gen_len``.
    """
    blocks = []
    start = 0
    while start < gen_len:
        blocks.append((start, min(block_size, gen_len - start)))
        start += block_size
    return tuple(blocks)


def unmask_budget(masked_remaining: int, steps_left: int) -> int:
    """Positions to commit this step: ``ceil(masked_remaining / steps_left)``."""
    return -(-masked_remaining // steps_left)


def decode(
    backend: Backend,
    prompt: Sequence[int],
    cfg: SamplerConfig,
    gen_len: int,
    block_size: int,
    steps_per_block: int,
    seed: int = 0,
    recorder=None,
) -> DecodeResult:
    """Run the full block-wise unmasking loop and return tokens plus trace.

    ``recorder``, when given, receives ``on_step(global_step, block_mask,
    hidden32, logits32)`` after every forward pass (see
    :class:`fouriersampler.dumpio.DumpRecorder`).
    """
    cfg.validate()
    if gen_len < 1:
        raise ValidationError(f"gen_len must be >= 1, got {gen_len}")
    if block_size < 1:
        raise ValidationError(f"block_size must be >= 1, got {block_size}")
    if not 1 <= steps_per_block <= block_size:
        raise ValidationError(
            f"steps_per_block must be in [1, block_size={block_size}], "
            f"got {steps_per_block}"
        )

    prompt = np.asarray(list(prompt), dtype=np.int64)
    if prompt.size and (prompt == MASK_ID).any():
        raise ValidationError("prompt must not contain masked positions")

    tokens = np.concatenate([prompt, np.full(gen_len, MASK_ID, dtype=np.int64)])
    gen_start = prompt.size
    plan = DecodePlan(
        gen_len=gen_len,
        block_size=block_size,
        steps_per_block=steps_per_block,
        blocks=split_blocks(gen_len, block_size),
    )
    prepare = getattr(backend, "prepare", None)
    if prepare is not None:
        prepare(plan)

    state = DecodeState(tokens=tokens, gen_start=gen_start)
    state.calibrator = CalibratorHistory(cfg.history_len)
    rng = np.random.default_rng(seed)
    global_step = 0

    for block_index, (rel_start, block_len) in enumerate(plan.blocks):
        block_start = gen_start + rel_start
        # A short final block cannot sustain more steps than positions.
        steps_in_block = min(steps_per_block, block_len)
        state.block_index = block_index
        for s in range(steps_in_block):
            state.step_in_block = s
            ctx = StepContext(
                tokens=tokens,
                gen_start=gen_start,
                block_index=block_index,
                block_start=block_start,
                block_len=block_len,
                step_in_block=s,
                steps_in_block=steps_in_block,
                global_step=global_step,
            )
            out = backend.forward(ctx)
            scores, selected, committed = _run_step(
                out, ctx, cfg, state.calibrator, rng, recorder
            )
            for t in selected:
                tokens[block_start + t] = committed[t]
            block_mask = ctx.block_mask  # recomputed after commits
            for t in range(block_len):
                state.trace.append(
                    TraceRecord(
                        step=global_step,
                        position=block_start + t - gen_start,
                        ell=float(scores.ell[t]),
                        conf=float(scores.conf[t]),
                        beta=scores.beta,
                        fused=float(scores.conf[t] + scores.beta * scores.ell[t]),
                        selected=t in committed,
                        committed_token=committed.get(t),
                    )
                )
            global_step += 1
        if (tokens[block_start : block_start + block_len] == MASK_ID).any():
            raise ValidationError(
                f"block {block_index} left masked positions after its schedule"
            )  # pragma: no cover - schedule guarantees clearance

    divergent = tuple(getattr(backend, "divergent_steps", ()))
    return DecodeResult(
        tokens=tokens, trace=state.trace, gen_start=gen_start, divergent_steps=divergent
    )


def _run_step(
    out: ModelOutput,
    ctx: StepContext,
    cfg: SamplerConfig,
    calibrator: CalibratorHistory,
    rng: np.random.Generator,
    recorder,
) -> tuple[StepScores, list[int], dict[int, int]]:
    """Score the active block, select positions, and pick their tokens."""
    # Narrow to the interchange precision, then widen for scoring; a
    # replayed recording of this step sees identical float64 inputs.
    hidden32 = np.ascontiguousarray(out.hidden.data, dtype=np.float32)
    logits32 = np.ascontiguousarray(out.logits, dtype=np.float32)
    if not np.all(np.isfinite(logits32)):
        raise ValidationError("backend produced non-finite logits")
    block_mask = ctx.block_mask
    if recorder is not None:
        recorder.on_step(ctx.global_step, block_mask, hidden32, logits32)

    hidden = HiddenBlock(hidden32.astype(np.float64))
    logits = logits32.astype(np.float64)

    win = window_at_step(
        ctx.step_in_block, ctx.steps_in_block, num_bins(ctx.block_len), cfg.rho
    )
    ell = translated_filtering_score(hidden, win, cfg.epsilon)
    conf = row_max_probs(logits)

    if cfg.sampler_kind is SamplerKind.FOURIER:
        beta = adaptive_beta(masked_max_probs(logits, block_mask), calibrator, cfg)
    else:
        beta = 0.0
    fused = fuse_scores(conf, ell, beta, block_mask)

    masked_remaining = int(block_mask.sum())
    steps_left = ctx.steps_in_block - ctx.step_in_block
    k = unmask_budget(masked_remaining, steps_left)

    if cfg.sampler_kind is SamplerKind.CONFIDENCE:
        key = fuse_scores(conf, np.zeros_like(ell), 0.0, block_mask)
    else:
        key = fused
    selected = select_positions(key, block_mask, k, cfg.sampler_kind, rng)
    committed = {t: int(np.argmax(logits[t])) for t in selected}
    return StepScores(ell=ell, conf=conf, beta=beta, fused=fused), selected, committed
