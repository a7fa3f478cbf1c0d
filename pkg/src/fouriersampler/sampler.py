"""Position scoring and selection for block-wise unmasking.

Three ingredients are combined per decoding step:

* a band-pass energy score: the block's hidden states are filtered with
  a fixed-width frequency window that slides from the low end to the
  high end of the spectrum over the block's steps, and each position is
  scored by its share of the retained energy;
* model confidence: the max softmax probability of each masked row;
* an adaptive weight ``beta`` blending the two, driven by where the
  current confidence variance sits inside a short history of recent
  steps (low percentile -> confidences are flat -> lean on the spectral
  score; high percentile -> the model already discriminates -> back off).

Selection then takes the top-k masked positions under the fused score
(or under plain confidence / position order / a seeded draw for the
baseline samplers), with ties broken by the lower position index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ValidationError
from .spectral import (
    FrequencyWindow,
    HiddenBlock,
    filter_block,
    token_energy,
    window_mask,
)

#: Sentinel assigned to unmasked positions so they can never win a top-k.
UNMASKED_SENTINEL = -np.inf


class SamplerKind(enum.Enum):
    FOURIER = "fourier"
    CONFIDENCE = "confidence"
    RANDOM = "random"
    LEFT_TO_RIGHT = "left_to_right"

    @classmethod
    def from_name(cls, name: str) -> "SamplerKind":
        aliases = {"l2r": cls.LEFT_TO_RIGHT}
        try:
            return aliases.get(name) or cls(name)
        except ValueError:
            raise ValidationError(
                f"unknown sampler {name!r}; expected one of "
                f"{[k.value for k in cls]} or 'l2r'"
            ) from None


@dataclass(frozen=True)
class SamplerConfig:
    """All sampler tunables. Defaults follow the standard operating point."""

    rho: float = 0.2
    beta_min: float = 0.4
    beta_max: float = 0.6
    epsilon: float = 1e-5
    history_len: int = 20
    z_scale: float = 3.0
    sampler_kind: SamplerKind = SamplerKind.FOURIER

    def validate(self) -> None:
        if not 0.0 < self.rho <= 1.0:
            raise ValidationError(f"rho must be in (0, 1], got {self.rho}")
        if not 0.0 <= self.beta_min <= self.beta_max:
            raise ValidationError(
                f"need 0 <= beta_min <= beta_max, got ({self.beta_min}, {self.beta_max})"
            )
        if not self.epsilon > 0.0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.history_len < 1:
            raise ValidationError(f"history_len must be >= 1, got {self.history_len}")
        if not self.z_scale > 0.0:
            raise ValidationError(f"z_scale must be > 0, got {self.z_scale}")
        if not isinstance(self.sampler_kind, SamplerKind):
            raise ValidationError(f"bad sampler_kind {self.sampler_kind!r}")


@dataclass
class CalibratorHistory:
    """FIFO of recent confidence variances, at most ``maxlen`` entries."""

    maxlen: int
    values: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.maxlen < 1:
            raise ValidationError(f"history maxlen must be >= 1, got {self.maxlen}")

    def push(self, value: float) -> None:
        """Append and evict the oldest entry once over capacity."""
        self.values.append(value)
        if len(self.values) > self.maxlen:
            self.values.pop(0)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class StepScores:
    """Everything computed for one decoding step of one block."""

    ell: np.ndarray
    conf: np.ndarray
    beta: float
    fused: np.ndarray


def window_at_step(s: int, steps: int, bins: int, rho: float) -> FrequencyWindow:
    """Window position for step ``s`` of a ``steps``-step block schedule.

    The offset moves from 0 at the first step to ``W - w`` at the last,
    ``o_s = floor(s * (W - w) / (steps - 1))``, evaluated in exact
    integer arithmetic. A single-step schedule degenerates to the pure
    low-frequency window (offset 0).
    """
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    if not 0 <= s < steps:
        raise ValidationError(f"step {s} outside schedule of {steps} steps")
    if bins < 1:
        raise ValidationError(f"need at least one bin, got {bins}")
    width = max(1, math.floor(rho * bins))
    if steps == 1:
        offset = 0
    else:
        offset = (s * (bins - width)) // (steps - 1)
    return FrequencyWindow(ratio=rho, width=width, offset=offset)


def translated_filtering_score(
    h: HiddenBlock, win: FrequencyWindow, epsilon: float
) -> np.ndarray:
    """Relative per-position energy inside the window's frequency band.

    ``ell[t] = E[t] / (max_t' E[t'] + epsilon)`` where ``E`` is the token
    energy of the band-pass-filtered block; values lie in ``[0, 1)``.
    """
    energy = token_energy(filter_block(h, window_mask(win, h.num_bins)))
    return energy / (energy.max() + epsilon)


def masked_max_probs(logits: np.ndarray, mask: np.ndarray) -> dict[int, float]:
    """Max softmax probability of each masked row of ``logits``.

    Returns ``{position: q}`` for masked positions only; ``q`` is in
    ``(0, 1]``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if logits.ndim != 2 or logits.shape[0] != mask.shape[0]:
        raise ValidationError(
            f"logits {logits.shape} do not align with mask of length {mask.shape}"
        )
    if not np.all(np.isfinite(logits[mask])):
        raise ValidationError("non-finite logits at masked positions")
    out: dict[int, float] = {}
    for t in np.flatnonzero(mask):
        row = logits[t]
        shifted = row - row.max()
        probs = np.exp(shifted)
        out[int(t)] = float(probs.max() / probs.sum())
    return out


def row_max_probs(logits: np.ndarray) -> np.ndarray:
    """Max softmax probability of every row (vectorized helper)."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    return probs.max(axis=1) / probs.sum(axis=1)


def adaptive_beta(
    q: Mapping[int, float], hist: CalibratorHistory, cfg: SamplerConfig
) -> float:
    """Adaptive blend weight from the percentile of the confidence variance.

    With an empty masked set, returns ``beta_min`` and leaves the history
    untouched. Otherwise the population variance of the ``q`` values is
    appended to the history, its strict-less percentile ``p`` within the
    (post-append) history is mapped through ``z = (p - 1/2) * z_scale``
    and the normal CDF to a weight ``w``, and
    ``beta = beta_min + (1 - w) * (beta_max - beta_min)``.
    """
    cfg.validate()
    if not q:
        return cfg.beta_min
    values = np.fromiter(q.values(), dtype=np.float64)
    sigma2 = float(np.var(values))
    hist.push(sigma2)
    below = sum(1 for v in hist.values if v < sigma2)
    p = below / len(hist.values)
    z = (p - 0.5) * cfg.z_scale
    w = 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
    return cfg.beta_min + (1.0 - w) * (cfg.beta_max - cfg.beta_min)


def fuse_scores(
    conf: np.ndarray, ell: np.ndarray, beta: float, mask: np.ndarray
) -> np.ndarray:
    """Confidence plus ``beta``-weighted band score at masked positions.

    Unmasked positions get ``-inf`` so they can never be selected.
    """
    conf = np.asarray(conf, dtype=np.float64)
    ell = np.asarray(ell, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not conf.shape == ell.shape == mask.shape:
        raise ValidationError(
            f"shape mismatch: conf {conf.shape}, ell {ell.shape}, mask {mask.shape}"
        )
    fused = np.full(conf.shape, UNMASKED_SENTINEL, dtype=np.float64)
    fused[mask] = conf[mask] + beta * ell[mask]
    return fused


def select_positions(
    scores: np.ndarray,
    mask: np.ndarray,
    k: int,
    kind: SamplerKind,
    rng: int | np.random.Generator,
) -> list[int]:
    """Pick ``k`` masked positions to unmask this step.

    ``fourier`` and ``confidence`` take the k largest scores with ties
    broken by the lower index; ``left_to_right`` takes the k lowest
    masked indices; ``random`` draws without replacement from the seeded
    generator. Deterministic for fixed inputs and seed. Returns sorted
    positions.
    """
    mask = np.asarray(mask, dtype=bool)
    masked_idx = np.flatnonzero(mask)
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > masked_idx.size:
        raise ValidationError(f"k={k} exceeds {masked_idx.size} masked positions")
    if kind in (SamplerKind.FOURIER, SamplerKind.CONFIDENCE):
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != mask.shape:
            raise ValidationError(
                f"scores {scores.shape} do not align with mask {mask.shape}"
            )
        # lexsort uses the last key as primary: descending score, then index.
        order = np.lexsort((masked_idx, -scores[masked_idx]))
        chosen = masked_idx[order[:k]]
    elif kind is SamplerKind.LEFT_TO_RIGHT:
        chosen = masked_idx[:k]
    elif kind is SamplerKind.RANDOM:
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        chosen = gen.choice(masked_idx, size=k, replace=False)
    else:  # pragma: no cover - enum is closed
        raise ValidationError(f"unhandled sampler kind {kind!r}")
    return sorted(int(t) for t in chosen)
