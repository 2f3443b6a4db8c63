"""Lipschitz constants of the cross-entropy loss.

With a linear head H (d x V, one column per vocabulary token) the loss is
Lipschitz in the feature vector with constant

    K_feat = max_{j,k} ||h_j - h_k||_2,

the pairwise diameter of the token-embedding columns: the feature gradient
is a convex combination of differences (h_j - h_y), so its norm never
exceeds the diameter. The naive spectral route sqrt(2) * sigma_max(H) is
always at least as large and grows with vocabulary size.

With respect to logits the constant is universal: the logit gradient is
softmax(v) - e_y, whose norm is at most sqrt(2) on the simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_matrix
from .errors import DegenerateInputError

# Exact-mode hard ceiling on vocabulary size. The blocked Gram computation is
# O(V^2); above this the caller must opt into spectral mode explicitly rather
# than having the semantics of the constant silently change.
EXACT_MODE_MAX_VOCAB = 65536

DEFAULT_BLOCK_SIZE = 1024

K_PRED = math.sqrt(2.0)


@dataclass(frozen=True)
class LipschitzConstants:
    k_feat: float
    k_feat_mode: str
    k_pred: float = field(default=K_PRED)

    def __post_init__(self):
        if self.k_feat_mode not in ("exact", "spectral"):
            raise ValueError(f"unknown k_feat_mode {self.k_feat_mode!r}")
        if self.k_feat < 0:
            raise ValueError("k_feat must be >= 0")
        if self.k_pred != K_PRED:
            raise ValueError("k_pred is the universal constant sqrt(2)")


def kfeat_exact(head, block_size: int = DEFAULT_BLOCK_SIZE) -> float:
    """Exact pairwise column diameter max_{j,k} ||h_j - h_k||_2.

    Uses the Gram expansion ||h_j - h_k||^2 = ||h_j||^2 + ||h_k||^2 - 2 h_j.h_k
    over column blocks, so memory stays O(block_size^2) regardless of V.
    """
    h = as_matrix(head, "H")
    vocab = h.shape[1]
    if vocab > EXACT_MODE_MAX_VOCAB:
        raise DegenerateInputError(
            f"exact-mode K_feat limited to V <= {EXACT_MODE_MAX_VOCAB}; "
            f"got V = {vocab}. Select spectral mode explicitly for larger heads."
        )
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    sq_norms = np.einsum("ij,ij->j", h, h)
    max_sq = 0.0
    for a in range(0, vocab, block_size):
        ha = h[:, a : a + block_size]
        na = sq_norms[a : a + block_size]
        # Upper-triangular block sweep; distances are symmetric.
        for b in range(a, vocab, block_size):
            hb = h[:, b : b + block_size]
            nb = sq_norms[b : b + block_size]
            cross = ha.T @ hb
            sq = na[:, None] + nb[None, :] - 2.0 * cross
            block_max = float(sq.max(initial=0.0))
            if block_max > max_sq:
                max_sq = block_max
    return math.sqrt(max(0.0, max_sq))


def kfeat_spectral(head) -> float:
    """Spectral-route constant sqrt(2) * sigma_max(H)."""
    h = as_matrix(head, "H")
    sigma_max = float(np.linalg.svd(h, compute_uv=False)[0]) if h.size else 0.0
    return K_PRED * sigma_max


def kpred() -> float:
    """Logit-space Lipschitz constant of cross-entropy: sqrt(2), universally."""
    return K_PRED


def kfeat(head, mode: str = "exact", block_size: int = DEFAULT_BLOCK_SIZE) -> LipschitzConstants:
    """Compute K_feat in the requested mode and bundle it with K_pred."""
    if mode == "exact":
        value = kfeat_exact(head, block_size=block_size)
    elif mode == "spectral":
        value = kfeat_spectral(head)
    else:
        raise ValueError(f"unknown k_feat_mode {mode!r}")
    return LipschitzConstants(k_feat=value, k_feat_mode=mode)
