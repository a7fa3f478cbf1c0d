"""Checkpoint handling and the toy masked-LM used for desk-scale runs.

A checkpoint is a ``torch.save`` file holding ``{"arch": ..., "config":
{...}, "state_dict": {...}}``. The toy architecture is a small
bidirectional mask predictor: token embeddings, two mixing layers (a
position-wise projection plus a global context average), and an LM head.
The capture point for recording is the output of the last mixing layer,
before the LM head.
"""

from __future__ import annotations

import torch
from torch import nn

TOY_ARCH = "toy-masked-lm-v1"

#: Index of the capture layer recorded into sidecar metadata: the final
#: hidden layer, counting embeddings as layer 0.
CAPTURE_LAYER_INDEX = 2


class ToyMaskedLM(nn.Module):
    """Two-layer bidirectional mask predictor over a small vocabulary.

    The mask token is embedded at index ``vocab_size``; logits cover the
    real vocabulary only.
    """

    def __init__(self, vocab_size: int, hidden_dim: int):
        super().__init__()
        if vocab_size < 2 or hidden_dim < 1:
            raise ValueError(f"bad toy dims vocab={vocab_size}, hidden={hidden_dim}")
        self.vocab_size = vocab_size
        self.hidden_dim = hidden_dim
        self.embed = nn.Embedding(vocab_size + 1, hidden_dim)
        self.mix1 = nn.Linear(hidden_dim, hidden_dim)
        self.mix2 = nn.Linear(hidden_dim, hidden_dim)
        self.lm_head = nn.Linear(hidden_dim, vocab_size)

    @property
    def mask_index(self) -> int:
        return self.vocab_size

    @torch.no_grad()
    def forward(self, tokens: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """tokens: (L,) int64 with masked positions set to ``mask_index``.

        Returns ``(hidden, logits)`` with shapes (L, D) and (L, V);
        ``hidden`` is the final-layer state feeding the LM head.
        """
        h = self.embed(tokens)
        context = h.mean(dim=0, keepdim=True)
        h = torch.tanh(self.mix1(h) + context)
        h = torch.tanh(self.mix2(h))
        return h, self.lm_head(h)


def make_toy_checkpoint(path, vocab_size: int = 32, hidden_dim: int = 16,
                        seed: int = 0) -> ToyMaskedLM:
    """Create a random-weight toy checkpoint and save it."""
    torch.manual_seed(seed)
    model = ToyMaskedLM(vocab_size, hidden_dim)
    torch.save(
        {
            "arch": TOY_ARCH,
            "config": {"vocab_size": vocab_size, "hidden_dim": hidden_dim},
            "state_dict": model.state_dict(),
        },
        path,
    )
    return model


def load_checkpoint(path, device: str = "cpu") -> ToyMaskedLM:
    try:
        payload = torch.load(path, map_location=device, weights_only=True)
    except Exception as e:
        raise RuntimeError(f"cannot load checkpoint {path}: {e}") from None
    if not isinstance(payload, dict) or payload.get("arch") != TOY_ARCH:
        raise RuntimeError(
            f"checkpoint {path} does not carry a supported architecture "
            f"(expected {TOY_ARCH!r})"
        )
    model = ToyMaskedLM(**payload["config"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model.to(device)
