"""Estimator-style facade over the functional core.

The bound's workflow is naturally fit/score shaped: the target model is
anchored once (its features, head, and the head-derived Lipschitz constant
are per-target quantities), then any number of proxy variants are scored
against it. PrismDiagnostic packages that workflow behind the scikit-learn
estimator protocol so it composes with the wider ecosystem
(clone/get_params/set_params all work).
"""

from __future__ import annotations

from typing import Optional

from sklearn.base import BaseEstimator

from ._validation import as_matrix
from .bound import BoundReport, prism_bound
from .errors import ShapeMismatchError
from .geometry import ScaleShapeDecomposition, decompose, resolve_alignment
from .lipschitz import kfeat


class PrismDiagnostic(BaseEstimator):
    """Risk-gap diagnostic anchored to one target model.

    Parameters
    ----------
    alignment : "identity" or "procrustes"
        Orthogonal alignment applied to proxy features before comparison.
        "procrustes" recomputes the residual-minimizing alignment per proxy.
    k_feat_mode : "exact" or "spectral"
        How the feature-side Lipschitz constant is computed from the target
        head: exact pairwise column diameter, or the looser spectral route.

    Attributes (after fit)
    ----------
    target_features_ : (n, d) float64 array
    target_head_ : (d, V) float64 array
    k_feat_ : float
    k_pred_ : float
    """

    def __init__(self, alignment: str = "identity", k_feat_mode: str = "exact"):
        self.alignment = alignment
        self.k_feat_mode = k_feat_mode

    def fit(self, X, head):
        """Anchor the target: X is its feature matrix, head its d x V head."""
        if self.alignment not in ("identity", "procrustes"):
            raise ValueError(f"unknown alignment {self.alignment!r}")
        z_t = as_matrix(X, "target features")
        h_t = as_matrix(head, "target head")
        if z_t.shape[1] != h_t.shape[0]:
            raise ShapeMismatchError(
                f"features have d={z_t.shape[1]} but head has d={h_t.shape[0]}"
            )
        constants = kfeat(h_t, mode=self.k_feat_mode)
        self.target_features_ = z_t
        self.target_head_ = h_t
        self.k_feat_ = constants.k_feat
        self.k_pred_ = constants.k_pred
        return self

    def _check_fitted(self):
        if not hasattr(self, "target_features_"):
            raise RuntimeError("PrismDiagnostic must be fitted with target features and head")

    def report(
        self,
        X,
        head=None,
        variant_id: str = "",
        empirical_gap: Optional[float] = None,
    ) -> BoundReport:
        """Full bound report for one proxy variant.

        A missing head means the frozen-head regime (the proxy shares the
        target's head), under which the head discrepancy is exactly zero.
        """
        self._check_fitted()
        h_p = self.target_head_ if head is None else head
        return prism_bound(
            self.target_features_,
            X,
            self.target_head_,
            h_p,
            alignment=self.alignment,
            k_feat_mode=self.k_feat_mode,
            variant_id=variant_id,
            empirical_gap=empirical_gap,
        )

    def predict(self, X, head=None) -> float:
        """Certified upper bound on the empirical risk gap for one proxy."""
        return self.report(X, head).bound

    def decompose(self, X) -> ScaleShapeDecomposition:
        """Scale/shape decomposition of one proxy's alignment residual."""
        self._check_fitted()
        z_p = as_matrix(X, "proxy features")
        align = resolve_alignment(self.alignment, self.target_features_, z_p)
        return decompose(self.target_features_, z_p, align)

    def score(self, X, head=None) -> float:
        """Negated bound, so that larger is better as sklearn expects."""
        return -self.predict(X, head)
