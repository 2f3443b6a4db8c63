"""Feature-side geometry.

Everything here operates on feature matrices: n x d arrays with one row per
(sample, token-position) backbone feature. The central objects are the RMS
feature scale rho = ||Z||_F / sqrt(n), the trace similarity

    omega_W(Z_T, Z_P) = Tr(Z_T^T Z_P W) / (||Z_T||_F ||Z_P||_F)   in [-1, 1],

and the exact identity, valid for every orthogonal W,

    (1/n) ||Z_T - Z_P W||_F^2 = (rho_T - rho_P)^2 + 2 rho_T rho_P (1 - omega_W),

which splits the alignment residual into a scale term and a shape term.
The Procrustes-optimal alignment (W = V U^T from the SVD of Z_T^T Z_P)
minimizes the residual and turns omega into the nuclear-norm similarity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import as_matrix, check_same_shape
from .errors import DegenerateInputError, ShapeMismatchError

# Explicit alignment matrices must be orthogonal to this max-abs tolerance.
ORTHOGONALITY_TOL = 1e-8

# Relative tolerance at which the scale+shape identity is enforced when a
# decomposition is assembled. Violations indicate corrupted input or a bug,
# never legitimate data, so decompose() raises rather than returns.
IDENTITY_RTOL = 1e-9


@dataclass(frozen=True)
class OrthogonalAlignment:
    """An orthogonal map applied to proxy features as Z_P @ matrix.

    kind is one of "identity", "procrustes", "explicit". The matrix is
    absent for the identity alignment and required otherwise.
    """

    kind: str
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("identity", "procrustes", "explicit"):
            raise ValueError(f"unknown alignment kind {self.kind!r}")
        if self.kind == "identity":
            if self.matrix is not None:
                raise ValueError("identity alignment carries no matrix")
            return
        if self.matrix is None:
            raise ValueError(f"{self.kind} alignment requires a matrix")
        w = as_matrix(self.matrix, "alignment matrix")
        if w.shape[0] != w.shape[1]:
            raise ShapeMismatchError(f"alignment matrix must be square, got {w.shape}")
        gram_err = np.abs(w.T @ w - np.eye(w.shape[0])).max()
        if gram_err > ORTHOGONALITY_TOL:
            raise ValueError(
                f"alignment matrix is not orthogonal: max|W^T W - I| = {gram_err:.3e}"
            )
        object.__setattr__(self, "matrix", w)

    @staticmethod
    def identity() -> "OrthogonalAlignment":
        return OrthogonalAlignment(kind="identity")

    @staticmethod
    def explicit(matrix) -> "OrthogonalAlignment":
        return OrthogonalAlignment(kind="explicit", matrix=matrix)

    def apply(self, z: np.ndarray) -> np.ndarray:
        """Return Z @ W (Z unchanged for the identity alignment)."""
        if self.kind == "identity":
            return z
        if z.shape[1] != self.matrix.shape[0]:
            raise ShapeMismatchError(
                f"alignment is {self.matrix.shape[0]}-dimensional, features have d={z.shape[1]}"
            )
        return z @ self.matrix


@dataclass(frozen=True)
class ScaleShapeDecomposition:
    """Exact split of the per-sample alignment residual into scale and shape.

    residual = (1/n) ||Z_T - Z_P W||_F^2 is computed directly from the
    matrices; scale_term = (rho_T - rho_P)^2 and
    shape_term = 2 rho_T rho_P (1 - omega) are computed from the summary
    quantities. The constructor enforces that the identity between the two
    routes holds to IDENTITY_RTOL.
    """

    rho_t: float
    rho_p: float
    omega: float
    scale_term: float
    shape_term: float
    residual: float
    alignment: str

    def __post_init__(self):
        gap = abs(self.residual - (self.scale_term + self.shape_term))
        if gap > IDENTITY_RTOL * max(1.0, self.residual):
            raise ValueError(
                "scale+shape decomposition identity violated: "
                f"residual={self.residual!r}, scale+shape={self.scale_term + self.shape_term!r}"
            )

    @property
    def mismatch(self) -> float:
        """scale_term + shape_term, the quantity under the square root in delta."""
        return self.scale_term + self.shape_term


def rms_scale(z) -> float:
    """RMS feature scale ||Z||_F / sqrt(n), the mean row magnitude in the RMS sense."""
    z = as_matrix(z, "Z")
    return float(np.linalg.norm(z) / math.sqrt(z.shape[0]))


def _frobenius(z: np.ndarray) -> float:
    return float(np.linalg.norm(z))


def omega_trace(z_t, z_p) -> float:
    """Trace similarity Tr(Z_T^T Z_P) / (||Z_T||_F ||Z_P||_F), in [-1, 1].

    Zero-norm convention: if exactly one matrix is zero the similarity is 0
    (the shape term then vanishes through the 2*rho_T*rho_P factor); if both
    are zero it is 1. Either choice keeps the scale+shape identity exact.
    """
    z_t = as_matrix(z_t, "Z_T")
    z_p = as_matrix(z_p, "Z_P")
    check_same_shape(z_t, z_p, "Z_T", "Z_P")
    norm_t = _frobenius(z_t)
    norm_p = _frobenius(z_p)
    if norm_t == 0.0 and norm_p == 0.0:
        return 1.0
    if norm_t == 0.0 or norm_p == 0.0:
        return 0.0
    # Tr(Z_T^T Z_P) equals the elementwise product sum; no d x d product needed.
    value = float(np.sum(z_t * z_p) / (norm_t * norm_p))
    return min(1.0, max(-1.0, value))


def omega_nuclear(z_t, z_p) -> float:
    """Nuclear-form similarity ||Z_T^T Z_P||_* / (||Z_T||_F ||Z_P||_F).

    This is the maximum of the trace similarity over all orthogonal
    alignments, attained at the Procrustes solution.
    """
    z_t = as_matrix(z_t, "Z_T")
    z_p = as_matrix(z_p, "Z_P")
    check_same_shape(z_t, z_p, "Z_T", "Z_P")
    norm_t = _frobenius(z_t)
    norm_p = _frobenius(z_p)
    if norm_t == 0.0 or norm_p == 0.0:
        raise DegenerateInputError("omega_nuclear undefined for zero-norm input")
    singular_values = np.linalg.svd(z_t.T @ z_p, compute_uv=False)
    value = float(singular_values.sum() / (norm_t * norm_p))
    return min(1.0, value)


def omega_frobenius(z_t, z_p) -> float:
    """Frobenius-form similarity ||Z_T^T Z_P||_F / (||Z_T||_F ||Z_P||_F).

    Not an alignment residual at any W; kept as the comparison object that
    connects to CKA. Always <= the nuclear form, with equality iff the
    cross-moment has rank <= 1.
    """
    z_t = as_matrix(z_t, "Z_T")
    z_p = as_matrix(z_p, "Z_P")
    check_same_shape(z_t, z_p, "Z_T", "Z_P")
    norm_t = _frobenius(z_t)
    norm_p = _frobenius(z_p)
    if norm_t == 0.0 or norm_p == 0.0:
        raise DegenerateInputError("omega_frobenius undefined for zero-norm input")
    return float(np.linalg.norm(z_t.T @ z_p) / (norm_t * norm_p))


def cka(z_t, z_p) -> float:
    """Linear CKA: ||Z_T^T Z_P||_F^2 / (||Z_T^T Z_T||_F ||Z_P^T Z_P||_F).

    Comparison object only. Satisfies CKA >= omega_frobenius**2 because
    ||Z^T Z||_F <= ||Z||_F^2, so CKA can overstate alignment relative to the
    Frobenius form.
    """
    z_t = as_matrix(z_t, "Z_T")
    z_p = as_matrix(z_p, "Z_P")
    gram_t = float(np.linalg.norm(z_t.T @ z_t))
    gram_p = float(np.linalg.norm(z_p.T @ z_p))
    if gram_t == 0.0 or gram_p == 0.0:
        raise DegenerateInputError("cka undefined for zero-norm input")
    cross = float(np.linalg.norm(z_t.T @ z_p))
    return cross * cross / (gram_t * gram_p)


def procrustes_align(z_t, z_p) -> OrthogonalAlignment:
    """Residual-minimizing orthogonal alignment W = V U^T.

    U, V come from the SVD Z_T^T Z_P = U S V^T. Ties among singular values
    make the minimizer non-unique; any maximizer of the trace is returned,
    and callers should compare residuals rather than matrix entries.
    """
    z_t = as_matrix(z_t, "Z_T")
    z_p = as_matrix(z_p, "Z_P")
    check_same_shape(z_t, z_p, "Z_T", "Z_P")
    u, _, vh = np.linalg.svd(z_t.T @ z_p)
    return OrthogonalAlignment(kind="procrustes", matrix=vh.T @ u.T)


def resolve_alignment(alignment, z_t=None, z_p=None) -> OrthogonalAlignment:
    """Accept an OrthogonalAlignment or the strings "identity"/"procrustes".

    The string "procrustes" computes the alignment from (z_t, z_p), which
    must then be provided.
    """
    if isinstance(alignment, OrthogonalAlignment):
        return alignment
    if alignment == "identity":
        return OrthogonalAlignment.identity()
    if alignment == "procrustes":
        if z_t is None or z_p is None:
            raise ValueError("procrustes alignment needs both feature matrices")
        return procrustes_align(z_t, z_p)
    raise ValueError(f"unknown alignment {alignment!r}")


def decompose(z_t, z_p, alignment=None) -> ScaleShapeDecomposition:
    """Exact scale/shape decomposition of the alignment residual.

    The residual field is (1/n) ||Z_T - Z_P W||_F^2 computed directly; the
    scale and shape fields reproduce it exactly through the identity, which
    the returned dataclass re-checks at construction.
    """
    z_t = as_matrix(z_t, "Z_T")
    z_p = as_matrix(z_p, "Z_P")
    check_same_shape(z_t, z_p, "Z_T", "Z_P")
    align = resolve_alignment(alignment if alignment is not None else "identity", z_t, z_p)
    z_p_aligned = align.apply(z_p)

    n = z_t.shape[0]
    rho_t = float(np.linalg.norm(z_t) / math.sqrt(n))
    rho_p = float(np.linalg.norm(z_p) / math.sqrt(n))
    if np.array_equal(z_t, z_p_aligned):
        # identical (post-alignment) inputs decompose to exact zeros; the
        # general route would leave eps-sized shape residue behind
        return ScaleShapeDecomposition(
            rho_t=rho_t, rho_p=rho_p, omega=1.0,
            scale_term=0.0, shape_term=0.0, residual=0.0,
            alignment=align.kind,
        )
    omega = omega_trace(z_t, z_p_aligned)

    residual = float(np.linalg.norm(z_t - z_p_aligned) ** 2 / n)
    scale_term = (rho_t - rho_p) ** 2
    shape_term = 2.0 * rho_t * rho_p * (1.0 - omega)
    return ScaleShapeDecomposition(
        rho_t=rho_t,
        rho_p=rho_p,
        omega=omega,
        scale_term=scale_term,
        shape_term=shape_term,
        residual=residual,
        alignment=align.kind,
    )


def feature_delta(decomp: ScaleShapeDecomposition, k_feat: float) -> float:
    """Feature alignment error: K_feat * sqrt(scale_term + shape_term)."""
    if k_feat < 0:
        raise ValueError(f"k_feat must be >= 0, got {k_feat}")
    return k_feat * math.sqrt(max(0.0, decomp.mismatch))
