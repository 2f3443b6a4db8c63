"""Head-side discrepancy.

The head error of a proxy is the covariance-weighted Frobenius distance
between the (aligned) target head and the proxy head,

    gamma = K_pred * ||Sigma_P^{1/2} (W H_T - H_P)||_F,

with Sigma_P = Z_P^T Z_P / n the uncentered covariance of the proxy
features. The weighting projects the head error onto the subspace the data
actually occupies: disagreement on null(Sigma_P) costs nothing.

Two algebraically equivalent evaluation paths are provided. The matmul path
uses ||Sigma_P^{1/2} D||_F^2 = Tr(D^T Sigma_P D) = ||Z_P D||_F^2 / n and
needs no eigendecomposition; it is the default. The eigen path forms
Sigma_P^{1/2} explicitly and is retained as a cross-checking oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_matrix
from .errors import ShapeMismatchError
from .geometry import OrthogonalAlignment, resolve_alignment
from .lipschitz import K_PRED

# Negative eigenvalues of the symmetrized covariance are clamped to zero when
# they are roundoff-sized (within CLAMP_RTOL of the top eigenvalue); anything
# more negative indicates corrupted input and raises.
CLAMP_RTOL = 1e-8


@dataclass(frozen=True)
class Covariance:
    """Uncentered feature covariance Z^T Z / n with its sample count."""

    values: np.ndarray
    n_source: int


def covariance(z_p) -> Covariance:
    """Uncentered covariance Z_P^T Z_P / n, symmetrized against roundoff."""
    z_p = as_matrix(z_p, "Z_P")
    n = z_p.shape[0]
    sigma = z_p.T @ z_p / n
    sigma = (sigma + sigma.T) / 2.0
    return Covariance(values=sigma, n_source=n)


def _covariance_sqrt(sigma: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(sigma)
    floor = -CLAMP_RTOL * max(float(eigvals[-1]), 0.0)
    if float(eigvals[0]) < floor:
        raise ValueError(
            f"covariance eigenvalue {eigvals[0]:.3e} is too negative to be roundoff "
            f"(threshold {floor:.3e})"
        )
    clamped = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(clamped)) @ eigvecs.T


def head_delta(h_t, h_p, alignment=None) -> np.ndarray:
    """Head misalignment matrix W @ H_T - H_P."""
    h_t = as_matrix(h_t, "H_T")
    h_p = as_matrix(h_p, "H_P")
    if h_t.shape != h_p.shape:
        raise ShapeMismatchError(f"head shapes differ: {h_t.shape} vs {h_p.shape}")
    align = alignment if isinstance(alignment, OrthogonalAlignment) else resolve_alignment(
        alignment if alignment is not None else "identity"
    )
    if align.kind == "identity":
        return h_t - h_p
    if align.matrix.shape[0] != h_t.shape[0]:
        raise ShapeMismatchError(
            f"alignment is {align.matrix.shape[0]}-dimensional, heads have d={h_t.shape[0]}"
        )
    return align.matrix @ h_t - h_p


def gamma(z_p, h_t, h_p, alignment=None, path: str = "matmul") -> float:
    """Covariance-weighted head discrepancy K_pred * ||Sigma_P^{1/2}(W H_T - H_P)||_F.

    path "matmul" evaluates ||Z_P (W H_T - H_P)||_F / sqrt(n) directly;
    path "eigen" routes through the explicit covariance square root. The two
    agree to ~1e-8 relative and the disagreement is itself a useful
    integrity check, so both stay available.
    """
    z_p = as_matrix(z_p, "Z_P")
    delta_h = head_delta(h_t, h_p, alignment)
    if z_p.shape[1] != delta_h.shape[0]:
        raise ShapeMismatchError(
            f"features have d={z_p.shape[1]} but heads have d={delta_h.shape[0]}"
        )
    if path == "matmul":
        n = z_p.shape[0]
        return K_PRED * float(np.linalg.norm(z_p @ delta_h)) / math.sqrt(n)
    if path == "eigen":
        sqrt_sigma = _covariance_sqrt(covariance(z_p).values)
        return K_PRED * float(np.linalg.norm(sqrt_sigma @ delta_h))
    raise ValueError(f"unknown gamma path {path!r}")
