"""Session recording: drive a checkpoint through the block/step schedule
and write every forward pass into the interchange format.

The recording schedule is the scheduler toolkit's baseline: blocks
complete left to right, each block runs ``min(S, block_len)`` steps,
step ``s`` commits ``ceil(masked_remaining / steps_left)`` positions
chosen greedily by max softmax probability (ties to the lower index),
and each committed position takes the argmax token of its logits row.
Confidence is computed from the float32-narrowed logits that are also
written to the dump, so a replay of the recording under the same
baseline reproduces the recorded trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .dumpformat import DumpWriter
from .model import CAPTURE_LAYER_INDEX, load_checkpoint

ADAPTER_VERSION = "0.1.0"


@dataclass(frozen=True)
class AdapterConfig:
    """Everything one recording session needs."""

    checkpoint: str
    prompt: str = ""
    gen_len: int = 64
    block_size: int = 64
    steps_per_block: int = 64
    out_path: str = "session.fsd"
    device: str = "cpu"
    with_logits: bool = True

    def validate(self) -> None:
        if self.gen_len < 1:
            raise ValueError(f"gen_len must be >= 1, got {self.gen_len}")
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if self.gen_len % self.block_size != 0:
            raise ValueError(
                f"block_size must divide gen_len (the dump format fixes one "
                f"block size per file), got {self.block_size} and {self.gen_len}"
            )
        if not 1 <= self.steps_per_block <= self.block_size:
            raise ValueError(
                f"steps_per_block must be in [1, block_size={self.block_size}], "
                f"got {self.steps_per_block}"
            )


def encode_prompt(text: str, vocab_size: int) -> list[int]:
    """Deterministic text-to-token mapping for tokenizer-less toy models."""
    return [b % vocab_size for b in text.encode("utf-8")]


def _greedy_commit_budget(masked_remaining: int, steps_left: int) -> int:
    return -(-masked_remaining // steps_left)


def record_session(cfg: AdapterConfig) -> str:
    """Run one recording session; returns the dump path.

    A sidecar ``<out>.meta.txt`` records the model identifier, capture
    layer, schedule, and adapter version.
    """
    cfg.validate()
    model = load_checkpoint(cfg.checkpoint, device=cfg.device)
    mask_index = model.mask_index
    prompt_ids = encode_prompt(cfg.prompt, model.vocab_size)

    tokens = torch.full((len(prompt_ids) + cfg.gen_len,), mask_index, dtype=torch.long,
                        device=cfg.device)
    if prompt_ids:
        tokens[: len(prompt_ids)] = torch.tensor(prompt_ids, dtype=torch.long)
    gen_start = len(prompt_ids)

    writer = DumpWriter(
        block_len=cfg.block_size,
        hidden_dim=model.hidden_dim,
        vocab_size=model.vocab_size,
        with_logits=cfg.with_logits,
    )

    global_step = 0
    for block_start in range(gen_start, gen_start + cfg.gen_len, cfg.block_size):
        steps = min(cfg.steps_per_block, cfg.block_size)
        for s in range(steps):
            hidden, logits = model(tokens)
            block = slice(block_start, block_start + cfg.block_size)
            hidden32 = hidden[block].cpu().numpy().astype(np.float32)
            logits32 = logits[block].cpu().numpy().astype(np.float32)
            block_mask = (tokens[block] == mask_index).cpu().numpy()
            writer.add_step(global_step, block_mask, hidden32,
                            logits32 if cfg.with_logits else None)

            # Baseline confidence-greedy commits on the narrowed logits.
            row_logits = logits32.astype(np.float64)
            shifted = row_logits - row_logits.max(axis=1, keepdims=True)
            probs = np.exp(shifted)
            q = probs.max(axis=1) / probs.sum(axis=1)
            masked_idx = np.flatnonzero(block_mask)
            k = _greedy_commit_budget(masked_idx.size, steps - s)
            order = np.lexsort((masked_idx, -q[masked_idx]))
            for t in masked_idx[order[:k]]:
                tokens[block_start + t] = int(row_logits[t].argmax())
            global_step += 1

    writer.write(cfg.out_path)
    _write_sidecar(cfg, model)
    return cfg.out_path


def _write_sidecar(cfg: AdapterConfig, model) -> None:
    meta_path = f"{cfg.out_path}.meta.txt"
    lines = [
        f"model_id = {cfg.checkpoint}",
        f"capture_layer_index = {CAPTURE_LAYER_INDEX}",
        "capture_point = final hidden layer, before the LM head, no added normalization",
        "schedule = baseline confidence-greedy "
        f"(block_size={cfg.block_size}, steps_per_block={cfg.steps_per_block}, "
        f"gen_len={cfg.gen_len})",
        f"adapter_version = {ADAPTER_VERSION}",
        "note = replay under a different schedule is approximate once commits "
        "diverge from this recording",
    ]
    with open(meta_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
