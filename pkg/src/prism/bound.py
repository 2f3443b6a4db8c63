"""Assembly of the certified risk-gap bound B = delta + gamma.

delta is the Lipschitz-scaled feature alignment error, gamma the
covariance-weighted head discrepancy, both evaluated at the same orthogonal
alignment. The bound certifies the *empirical* cross-entropy risk gap on
the provided samples: every inequality in its derivation (triangle,
Lipschitz, Jensen) holds for the empirical measure, so on exact feature
matrices |R_T - R_P| <= B up to floating-point roundoff.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._validation import as_matrix
from .errors import ShapeMismatchError
from .geometry import (
    ScaleShapeDecomposition,
    decompose,
    feature_delta,
    resolve_alignment,
)
from .headterm import gamma as head_gamma
from .lipschitz import K_PRED, kfeat


@dataclass(frozen=True)
class BoundReport:
    """One variant's bound with everything needed to audit it."""

    k_feat: float
    k_feat_mode: str
    k_pred: float
    decomposition: ScaleShapeDecomposition
    delta: float
    gamma: float
    bound: float
    alignment: str
    variant_id: str = ""
    empirical_gap: Optional[float] = None

    def __post_init__(self):
        if abs(self.bound - (self.delta + self.gamma)) > 1e-12 * max(1.0, self.bound):
            raise ValueError("bound must equal delta + gamma")
        if self.empirical_gap is not None and self.empirical_gap < 0:
            raise ValueError("empirical_gap is an absolute gap and must be >= 0")


def prism_bound(
    z_t,
    z_p,
    h_t,
    h_p,
    alignment="identity",
    k_feat_mode: str = "exact",
    variant_id: str = "",
    empirical_gap: Optional[float] = None,
) -> BoundReport:
    """Full bound report for one (target, proxy) pair.

    K_feat is computed from the target head alone, so it is shared by every
    proxy of one target; gamma uses the same alignment as delta.
    """
    align = resolve_alignment(alignment, z_t, z_p)
    constants = kfeat(h_t, mode=k_feat_mode)
    decomp = decompose(z_t, z_p, align)
    delta = feature_delta(decomp, constants.k_feat)
    g = head_gamma(z_p, h_t, h_p, align)
    return BoundReport(
        k_feat=constants.k_feat,
        k_feat_mode=constants.k_feat_mode,
        k_pred=constants.k_pred,
        decomposition=decomp,
        delta=delta,
        gamma=g,
        bound=delta + g,
        alignment=align.kind,
        variant_id=variant_id,
        empirical_gap=empirical_gap,
    )


def ar_stack(sequences: Sequence) -> np.ndarray:
    """Stack per-sequence feature matrices into one token-level matrix.

    Teacher-forced generation yields one |y| x d block per sequence; the
    bound on the stacked pair equals the bound on the flat concatenation,
    so this is pure bookkeeping. Blocks must share d and at least one row
    must be present overall.
    """
    if not sequences:
        raise ValueError("ar_stack requires at least one sequence")
    blocks = [as_matrix(s, f"sequence[{i}]", allow_empty_rows=True) for i, s in enumerate(sequences)]
    d = blocks[0].shape[1]
    for i, b in enumerate(blocks):
        if b.shape[1] != d:
            raise ShapeMismatchError(
                f"sequence[{i}] has d={b.shape[1]}, expected d={d}"
            )
    stacked = np.vstack(blocks)
    if stacked.shape[0] < 1:
        raise ValueError("ar_stack requires at least one token row in total")
    return stacked


def sequence_mean_bounds(
    target_sequences: Sequence,
    proxy_sequences: Sequence,
    h_t,
    h_p,
    alignment="identity",
    k_feat_mode: str = "exact",
) -> list[BoundReport]:
    """Per-sequence bound reports (the sequence-mean aggregation).

    The default aggregation stacks all tokens uniformly (ar_stack followed
    by prism_bound); this variant instead bounds each sequence on its own,
    for callers who want the per-sequence average convention. Cross-sequence
    weighting when lengths differ is a reporting choice, not a theorem, so
    both are exposed.
    """
    if len(target_sequences) != len(proxy_sequences):
        raise ShapeMismatchError("target and proxy sequence lists differ in length")
    reports = []
    for i, (zt, zp) in enumerate(zip(target_sequences, proxy_sequences)):
        reports.append(
            prism_bound(
                zt, zp, h_t, h_p,
                alignment=alignment,
                k_feat_mode=k_feat_mode,
                variant_id=f"seq{i}",
            )
        )
    return reports


def lora_bound(z_0, z_t, k_feat: float, k_feat_mode: str = "exact") -> BoundReport:
    """Frozen-head specialization: gamma = 0, identity alignment.

    The risk gap between a base model and a fine-tuned checkpoint with a
    frozen head reduces to backbone drift alone:
    B = K_feat * sqrt((rho_0 - rho_t)^2 + 2 rho_0 rho_t (1 - omega)).
    k_feat is supplied by the caller (there is no head to derive it from);
    k_feat_mode records how it was obtained.
    """
    if k_feat < 0:
        raise ValueError("k_feat must be >= 0")
    decomp = decompose(z_0, z_t, "identity")
    delta = feature_delta(decomp, k_feat)
    return BoundReport(
        k_feat=k_feat,
        k_feat_mode=k_feat_mode,
        k_pred=K_PRED,
        decomposition=decomp,
        delta=delta,
        gamma=0.0,
        bound=delta,
        alignment="identity",
    )


# --- report emitters ---------------------------------------------------------
#
# Column order follows the per-variant decomposition layout:
# rho_T, rho_P, omega, delta, gamma, B, |delta R|.

_CSV_COLUMNS = (
    "variant_id", "rho_t", "rho_p", "omega", "delta", "gamma", "bound", "empirical_gap",
)


def _fmt_full(x: Optional[float]) -> str:
    if x is None:
        return ""
    return format(x, ".17g")


def reports_to_csv(reports: Sequence[BoundReport]) -> str:
    """CSV with 17-significant-digit floats (round-trip exact for float64)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for r in reports:
        writer.writerow([
            r.variant_id,
            _fmt_full(r.decomposition.rho_t),
            _fmt_full(r.decomposition.rho_p),
            _fmt_full(r.decomposition.omega),
            _fmt_full(r.delta),
            _fmt_full(r.gamma),
            _fmt_full(r.bound),
            _fmt_full(r.empirical_gap),
        ])
    return buf.getvalue()


def reports_to_table(reports: Sequence[BoundReport]) -> str:
    """Human-readable table, 4 decimals."""
    header = ("variant", "rho_T", "rho_P", "Omega", "delta", "gamma", "B", "|dR|")
    rows = [header]
    for r in reports:
        rows.append((
            r.variant_id or "-",
            f"{r.decomposition.rho_t:.4f}",
            f"{r.decomposition.rho_p:.4f}",
            f"{r.decomposition.omega:.4f}",
            f"{r.delta:.4f}",
            f"{r.gamma:.4f}",
            f"{r.bound:.4f}",
            "-" if r.empirical_gap is None else f"{r.empirical_gap:.4f}",
        ))
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows]
    return "\n".join(lines) + "\n"


def report_to_dict(r: BoundReport) -> dict:
    d = {
        "variant_id": r.variant_id,
        "alignment": r.alignment,
        "k_feat": r.k_feat,
        "k_feat_mode": r.k_feat_mode,
        "k_pred": r.k_pred,
        "rho_t": r.decomposition.rho_t,
        "rho_p": r.decomposition.rho_p,
        "omega": r.decomposition.omega,
        "scale_term": r.decomposition.scale_term,
        "shape_term": r.decomposition.shape_term,
        "delta": r.delta,
        "gamma": r.gamma,
        "bound": r.bound,
    }
    if r.empirical_gap is not None:
        d["empirical_gap"] = r.empirical_gap
    return d


def reports_to_json(reports: Sequence[BoundReport]) -> str:
    return json.dumps([report_to_dict(r) for r in reports], indent=2) + "\n"
