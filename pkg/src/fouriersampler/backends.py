"""Model backends for the decode loop.

* :class:`SinusoidBackend` — hidden states with closed-form spectra
  (per-channel cosine tables) and caller-planted logits; the analytic
  test oracle.
* :class:`TemplateLMBackend` — a synthetic template language model whose
  slots split into structural (fixed filler, near-deterministic logits)
  and detail (uniform filler choice, flat logits) roles, with hidden
  states constructed so the structural/detail split aligns with
  low/high-frequency signatures.
* :class:`ReplayBackend` — serves recorded hidden states and logits from
  a dump so a real session can be re-scheduled offline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decoder import MASK_ID, DecodePlan, ModelOutput, StepContext
from .dumpio import DumpFile
from .errors import ReplayError, ValidationError
from .spectral import HiddenBlock, num_bins

STRUCT = "struct"
DETAIL = "detail"


# --- analytic sinusoid backend ----------------------------------------------


@dataclass(frozen=True)
class Tone:
    """One cosine component: ``amp * cos(2*pi*freq*t/B + phase)``."""

    freq: float
    amp: float
    phase: float = 0.0


class SinusoidBackend:
    """Hidden states assembled from per-channel cosine tables.

    ``channels[d]`` lists the tones summed into channel ``d``; positions
    are block-local, so every block carries the same waveform. Logits
    are planted constants: a single row applied at every position.
    """

    def __init__(self, channels: Sequence[Sequence[Tone]], logits_row: Sequence[float]):
        if not channels:
            raise ValidationError("need at least one channel")
        self.channels = [list(ch) for ch in channels]
        row = np.asarray(logits_row, dtype=np.float64)
        if row.ndim != 1 or row.size < 2:
            raise ValidationError(f"planted logits must be a row of >= 2 values, got shape {row.shape}")
        self.logits_row = row

    def forward(self, ctx: StepContext) -> ModelOutput:
        b = ctx.block_len
        bins = num_bins(b)
        t = np.arange(b, dtype=np.float64)
        hidden = np.zeros((b, len(self.channels)))
        for d, tones in enumerate(self.channels):
            for tone in tones:
                if not 0.0 <= tone.freq < bins:
                    raise ValidationError(
                        f"channel {d}: frequency {tone.freq} outside [0, {bins}) "
                        f"for block length {b}"
                    )
                hidden[:, d] += tone.amp * np.cos(2.0 * np.pi * tone.freq * t / b + tone.phase)
        logits = np.tile(self.logits_row, (b, 1))
        return ModelOutput(hidden=HiddenBlock(hidden), logits=logits)


def two_token_sinusoid(block_len: int, low_pos: int, high_pos: int,
                       vocab_size: int = 8) -> SinusoidBackend:
    """Backend whose block has one low-band and one high-band landmark.

    Channel 0 is ``1 + cos(2*pi*(t - low_pos)/B)`` (bins {0, 1}, energy
    peaking at ``low_pos``); channel 1 is the same bump modulated by the
    alternating sign envelope (top two bins, peaking at ``high_pos``).
    Logits are flat, so selection is driven by the band score alone.
    """
    if block_len % 2 != 0 or block_len < 4:
        raise ValidationError("landmark construction needs an even block length >= 4")
    if not (0 <= low_pos < block_len and 0 <= high_pos < block_len):
        raise ValidationError("landmark positions must lie inside the block")
    b = block_len
    nyquist = b // 2
    low_channel = [Tone(0.0, 1.0), Tone(1.0, 1.0, -2.0 * np.pi * low_pos / b)]
    # (-1)^t * (1 + cos(2*pi*(t - high_pos)/B)) expressed as pure tones.
    high_channel = [
        Tone(float(nyquist), 1.0),
        Tone(float(nyquist - 1), 1.0, 2.0 * np.pi * high_pos / b),
    ]
    return SinusoidBackend([low_channel, high_channel], np.zeros(vocab_size))


# --- synthetic template language model --------------------------------------


@dataclass(frozen=True)
class Slot:
    """One template position: a structural or a detail vocabulary slot."""

    kind: str
    fillers: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in (STRUCT, DETAIL):
            raise ValidationError(f"slot kind must be '{STRUCT}' or '{DETAIL}', got {self.kind!r}")
        if self.kind == STRUCT and len(self.fillers) != 1:
            raise ValidationError("structural slots carry exactly one filler")
        if self.kind == DETAIL and len(self.fillers) < 2:
            raise ValidationError("detail slots need at least two fillers")


@dataclass(frozen=True)
class TemplateGrammar:
    slots: tuple[Slot, ...]
    vocab_size: int

    def __post_init__(self):
        if not self.slots:
            raise ValidationError("grammar must have at least one slot")
        for i, slot in enumerate(self.slots):
            for f in slot.fillers:
                if not 0 <= f < self.vocab_size:
                    raise ValidationError(f"slot {i}: filler {f} outside vocab of {self.vocab_size}")

    def __len__(self) -> int:
        return len(self.slots)

    def positions_of(self, kind: str) -> list[int]:
        return [i for i, s in enumerate(self.slots) if s.kind == kind]

    def is_valid(self, tokens: Sequence[int]) -> bool:
        """Whether a completed generation region satisfies every slot."""
        if len(tokens) != len(self.slots):
            return False
        return all(int(tok) in slot.fillers for tok, slot in zip(tokens, self.slots))


def make_template(length: int, seed: int, vocab_size: int = 32,
                  detail_fraction: float = 0.5, detail_choices: int = 4) -> TemplateGrammar:
    """Random template with a mix of structural and detail slots."""
    if length < 2:
        raise ValidationError(f"template length must be >= 2, got {length}")
    if detail_choices < 2 or detail_choices > vocab_size:
        raise ValidationError(f"detail_choices must be in [2, vocab_size], got {detail_choices}")
    rng = np.random.default_rng(seed)
    kinds = np.asarray(rng.random(length) < detail_fraction)
    # Guarantee both roles are represented.
    if kinds.all():
        kinds[rng.integers(length)] = False
    if not kinds.any():
        kinds[rng.integers(length)] = True
    slots = []
    for is_detail in kinds:
        if is_detail:
            fillers = rng.choice(vocab_size, size=detail_choices, replace=False)
            slots.append(Slot(DETAIL, tuple(int(f) for f in sorted(fillers))))
        else:
            slots.append(Slot(STRUCT, (int(rng.integers(vocab_size)),)))
    return TemplateGrammar(slots=tuple(slots), vocab_size=vocab_size)


class TemplateLMBackend:
    """Deterministic synthetic LM over a :class:`TemplateGrammar`.

    Logits: structural slots put all mass on their filler; detail slots
    are near-uniform over their fillers (a tiny seeded jitter keeps the
    argmax well-defined) until committed, after which the committed token
    dominates. Hidden states: seeded token embeddings, low-pass smoothed
    along the sequence at structural slots and modulated by an
    alternating-sign envelope at detail slots, so role and spectral
    signature align by construction.
    """

    STRUCT_LOGIT = 12.0
    DETAIL_LOGIT = 2.0
    FLOOR_LOGIT = -8.0
    JITTER = 1e-3

    _SMOOTH_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

    def __init__(self, grammar: TemplateGrammar, embed_dim: int = 16, seed: int = 0):
        if embed_dim < 1:
            raise ValidationError(f"embed_dim must be >= 1, got {embed_dim}")
        self.grammar = grammar
        self.embed_dim = embed_dim
        rng = np.random.default_rng(seed)
        # Row vocab_size is the mask-token embedding.
        self._embeddings = rng.normal(size=(grammar.vocab_size + 1, embed_dim))
        self._jitter = rng.random((len(grammar), grammar.vocab_size)) * self.JITTER

    def forward(self, ctx: StepContext) -> ModelOutput:
        gen = ctx.tokens[ctx.gen_start :]
        if gen.shape[0] != len(self.grammar):
            raise ValidationError(
                f"generation region of {gen.shape[0]} does not match template "
                f"of {len(self.grammar)} slots"
            )
        self._check_consistency(gen)
        hidden_full = self._hidden_states(gen)
        rel = ctx.block_start - ctx.gen_start
        hidden = hidden_full[rel : rel + ctx.block_len]
        logits = np.stack(
            [self._logits_row(rel + i, gen[rel + i]) for i in range(ctx.block_len)]
        )
        return ModelOutput(hidden=HiddenBlock(hidden), logits=logits)

    def _check_consistency(self, gen: np.ndarray) -> None:
        for i, tok in enumerate(gen):
            if tok != MASK_ID and int(tok) not in self.grammar.slots[i].fillers:
                raise ValidationError(
                    f"position {i}: committed token {int(tok)} is not a filler "
                    f"of its {self.grammar.slots[i].kind} slot"
                )

    def _logits_row(self, pos: int, tok: int) -> np.ndarray:
        row = np.full(self.grammar.vocab_size, self.FLOOR_LOGIT)
        slot = self.grammar.slots[pos]
        if tok != MASK_ID:
            row[int(tok)] = self.STRUCT_LOGIT
        elif slot.kind == STRUCT:
            row[slot.fillers[0]] = self.STRUCT_LOGIT
        else:
            for f in slot.fillers:
                row[f] = self.DETAIL_LOGIT + self._jitter[pos, f]
        return row

    def _hidden_states(self, gen: np.ndarray) -> np.ndarray:
        ids = np.where(gen == MASK_ID, self.grammar.vocab_size, gen)
        emb = self._embeddings[ids]  # (L, D)
        smoothed = self._smooth(emb)
        out = np.empty_like(emb)
        for i, slot in enumerate(self.grammar.slots):
            if slot.kind == STRUCT:
                out[i] = smoothed[i]
            else:
                out[i] = (-1.0) ** i * emb[i]
        return out

    def _smooth(self, emb: np.ndarray) -> np.ndarray:
        k = self._SMOOTH_KERNEL
        pad = len(k) // 2
        padded = np.pad(emb, ((pad, pad), (0, 0)), mode="wrap")
        out = np.zeros_like(emb)
        for j, w in enumerate(k):
            out += w * padded[j : j + emb.shape[0]]
        return out


# --- offline replay ----------------------------------------------------------


class ReplayBackend:
    """Serves the recorded hidden states and logits of a prior session.

    Steps are consumed in global order. When the live mask no longer
    matches the recorded one (the re-scheduled decode committed different
    positions), the step is flagged as divergent rather than failing:
    recorded activations then no longer condition on the live buffer.
    """

    def __init__(self, dump: DumpFile):
        dump.validate()
        if not dump.has_logits:
            raise ValidationError("replay requires a dump with logits recorded ('logits required')")
        self.dump = dump
        self.divergent_steps: list[int] = []

    def prepare(self, plan: DecodePlan) -> None:
        if plan.block_size != self.dump.block_len:
            raise ValidationError(
                f"dimension mismatch: dump was recorded with block size "
                f"{self.dump.block_len}, decode uses {plan.block_size}"
            )
        if plan.gen_len % plan.block_size != 0:
            raise ValidationError(
                f"replay requires block_size to divide gen_len, got "
                f"{plan.block_size} and {plan.gen_len}"
            )
        if plan.total_steps < self.dump.num_steps:
            raise ValidationError(
                f"step count mismatch: dump has {self.dump.num_steps} steps but "
                f"the schedule runs only {plan.total_steps}"
            )

    def forward(self, ctx: StepContext) -> ModelOutput:
        if ctx.global_step >= self.dump.num_steps:
            raise ReplayError(
                f"replay dump exhausted at step {ctx.global_step}: only "
                f"{self.dump.num_steps} steps recorded"
            )
        rec = self.dump.steps[ctx.global_step]
        if not np.array_equal(rec.mask, ctx.block_mask):
            self.divergent_steps.append(ctx.global_step)
        return ModelOutput(
            hidden=HiddenBlock(rec.hidden.astype(np.float64)),
            logits=rec.logits,
        )
