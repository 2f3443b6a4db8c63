"""Toy causal transformer and its checkpoint format.

The extractor targets checkpoint files holding a config dict plus a state
dict for this architecture: byte-level vocabulary (256 byte values plus a
BOS token), learned positional embeddings, pre-norm attention/MLP blocks,
a final LayerNorm, and a bias-free linear lm_head. The tensor that the
extractor dumps as features is the final-LayerNorm output -- the exact
tensor the head multiplies, which is the only choice under which the
core-side risk recomputation can match the extraction-side loss.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

BOS_ID = 256
VOCAB_SIZE = 257  # 256 byte values + BOS


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 32
    n_layers: int = 2
    n_heads: int = 4
    max_seq: int = 256
    vocab_size: int = VOCAB_SIZE


class CausalSelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        self.n_heads = n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.proj = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        seq, d = x.shape
        head_dim = d // self.n_heads
        q, k, v = self.qkv(x).split(d, dim=-1)
        q = q.view(seq, self.n_heads, head_dim).transpose(0, 1)
        k = k.view(seq, self.n_heads, head_dim).transpose(0, 1)
        v = v.view(seq, self.n_heads, head_dim).transpose(0, 1)
        scores = q @ k.transpose(-2, -1) / math.sqrt(head_dim)
        mask = torch.triu(torch.ones(seq, seq, dtype=torch.bool), diagonal=1)
        scores = scores.masked_fill(mask, float("-inf"))
        out = torch.softmax(scores, dim=-1) @ v
        return self.proj(out.transpose(0, 1).reshape(seq, d))


class Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.attn = CausalSelfAttention(d_model, n_heads)
        self.norm2 = nn.LayerNorm(d_model)
        self.mlp = nn.Sequential(
            nn.Linear(d_model, 4 * d_model),
            nn.GELU(),
            nn.Linear(4 * d_model, d_model),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class ToyTransformer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.tok_emb = nn.Embedding(config.vocab_size, config.d_model)
        self.pos_emb = nn.Embedding(config.max_seq, config.d_model)
        self.blocks = nn.ModuleList(
            Block(config.d_model, config.n_heads) for _ in range(config.n_layers)
        )
        self.final_norm = nn.LayerNorm(config.d_model)
        self.lm_head = nn.Linear(config.d_model, config.vocab_size, bias=False)

    def hidden_states(self, ids: torch.Tensor) -> torch.Tensor:
        """Final-LayerNorm outputs, one row per position: the pre-head features."""
        seq = ids.shape[0]
        if seq > self.config.max_seq:
            raise ValueError(f"sequence length {seq} exceeds max_seq {self.config.max_seq}")
        x = self.tok_emb(ids) + self.pos_emb(torch.arange(seq))
        for block in self.blocks:
            x = block(x)
        return self.final_norm(x)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        return self.hidden_states(ids) @ self.lm_head.weight.T

    def head_matrix(self) -> torch.Tensor:
        """Output projection transposed to d x V."""
        return self.lm_head.weight.detach().T.contiguous()


def save_checkpoint(model: ToyTransformer, path) -> None:
    torch.save({"config": asdict(model.config), "state_dict": model.state_dict()}, path)


def load_checkpoint(path) -> ToyTransformer:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise RuntimeError(f"cannot load checkpoint {path}: {e}") from e
    if "config" not in payload or "state_dict" not in payload:
        raise RuntimeError(f"checkpoint {path} lacks config/state_dict")
    model = ToyTransformer(ModelConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def make_toy_checkpoint(path, seed: int = 0, d_model: int = 32,
                        n_layers: int = 2, n_heads: int = 4) -> ToyTransformer:
    """Randomly initialized toy model with a reproducible seed."""
    torch.manual_seed(seed)
    model = ToyTransformer(ModelConfig(d_model=d_model, n_layers=n_layers, n_heads=n_heads))
    model.eval()
    save_checkpoint(model, path)
    return model
