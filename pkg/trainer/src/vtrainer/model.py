"""Tiny character-level causal transformer.

Decoder-only, learned positional embeddings, pre-norm blocks. Sized for
CPU experiments; the training entry point enforces a hard parameter cap.
"""

from __future__ import annotations

import torch
from torch import nn

MAX_PARAMETERS = 10_000_000


def causal_mask(length: int, device=None) -> torch.Tensor:
    """Boolean attention mask: True above the diagonal blocks lookahead."""
    return torch.triu(torch.ones(length, length, dtype=torch.bool, device=device), diagonal=1)


def param_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


class Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = nn.MultiheadAttention(d_model, n_heads, batch_first=True)
        self.ln2 = nn.LayerNorm(d_model)
        self.mlp = nn.Sequential(
            nn.Linear(d_model, 4 * d_model),
            nn.GELU(),
            nn.Linear(4 * d_model, d_model),
        )

    def forward(self, h: torch.Tensor, attn_mask: torch.Tensor) -> torch.Tensor:
        normed = self.ln1(h)
        attended, _ = self.attn(normed, normed, normed, attn_mask=attn_mask, need_weights=False)
        h = h + attended
        return h + self.mlp(self.ln2(h))


class CharLM(nn.Module):
    """Next-character model over [BOS] description [SEP] code [EOS] sequences."""

    def __init__(self, vocab_size: int, d_model: int = 64, n_heads: int = 4,
                 n_layers: int = 2, max_len: int = 2048):
        super().__init__()
        if vocab_size < 1 or d_model < 1 or n_heads < 1 or n_layers < 1 or max_len < 1:
            raise ValueError("model dimensions must be positive")
        if d_model % n_heads != 0:
            raise ValueError(f"d_model {d_model} not divisible by n_heads {n_heads}")
        self.max_len = max_len
        self.tok = nn.Embedding(vocab_size, d_model)
        self.pos = nn.Embedding(max_len, d_model)
        self.blocks = nn.ModuleList(Block(d_model, n_heads) for _ in range(n_layers))
        self.ln = nn.LayerNorm(d_model)
        self.head = nn.Linear(d_model, vocab_size)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        length = x.shape[1]
        if length > self.max_len:
            raise ValueError(f"sequence length {length} exceeds max_len {self.max_len}")
        positions = torch.arange(length, device=x.device)
        h = self.tok(x) + self.pos(positions)
        mask = causal_mask(length, device=x.device)
        for block in self.blocks:
            h = block(h, mask)
        return self.head(self.ln(h))
