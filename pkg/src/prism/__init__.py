"""Certified cross-entropy risk-gap bounds for model variants.

Core objects: the exact scale/shape decomposition of the orthogonal
alignment residual between two feature matrices, the Lipschitz constants of
cross-entropy, the covariance-weighted head discrepancy, and their sum
B = delta + gamma, an upper bound on the empirical risk gap. A synthetic
oracle verifies the bound brute-force; a differentiable shape penalty makes
the geometry usable at training time; a binary interchange format and a CLI
wire it all together.
"""

from .bound import (
    BoundReport,
    ar_stack,
    lora_bound,
    prism_bound,
    reports_to_csv,
    reports_to_json,
    reports_to_table,
    sequence_mean_bounds,
)
from .errors import (
    DegenerateInputError,
    ManifestError,
    MatrixFormatError,
    NonFiniteError,
    PrismError,
    ShapeMismatchError,
)
from .estimator import PrismDiagnostic
from .geometry import (
    OrthogonalAlignment,
    ScaleShapeDecomposition,
    cka,
    decompose,
    feature_delta,
    omega_frobenius,
    omega_nuclear,
    omega_trace,
    procrustes_align,
    rms_scale,
)
from .headterm import Covariance, covariance, gamma
from .lipschitz import LipschitzConstants, kfeat, kfeat_exact, kfeat_spectral, kpred
from .matio import (
    MatrixHeader,
    VariantManifest,
    VariantRecord,
    read_labels,
    read_manifest,
    read_matrix,
    read_matrix_with_header,
    write_labels,
    write_matrix,
)
from .oracle import (
    SyntheticInstance,
    VerificationRecord,
    empirical_risk,
    gen_instance,
    rank_experiment,
    spearman,
    sweep,
    verify_bound,
)
from .regularizer import (
    DemoResult,
    PenaltyGradient,
    drift_demo,
    shape_penalty,
    shape_penalty_grad,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "Covariance",
    "DegenerateInputError",
    "DemoResult",
    "LipschitzConstants",
    "ManifestError",
    "MatrixFormatError",
    "MatrixHeader",
    "NonFiniteError",
    "OrthogonalAlignment",
    "PenaltyGradient",
    "PrismDiagnostic",
    "PrismError",
    "ScaleShapeDecomposition",
    "ShapeMismatchError",
    "SyntheticInstance",
    "VariantManifest",
    "VariantRecord",
    "VerificationRecord",
    "ar_stack",
    "cka",
    "covariance",
    "decompose",
    "drift_demo",
    "empirical_risk",
    "feature_delta",
    "gamma",
    "gen_instance",
    "kfeat",
    "kfeat_exact",
    "kfeat_spectral",
    "kpred",
    "lora_bound",
    "omega_frobenius",
    "omega_nuclear",
    "omega_trace",
    "prism_bound",
    "procrustes_align",
    "rank_experiment",
    "read_labels",
    "read_manifest",
    "read_matrix",
    "read_matrix_with_header",
    "reports_to_csv",
    "reports_to_json",
    "reports_to_table",
    "rms_scale",
    "sequence_mean_bounds",
    "shape_penalty",
    "shape_penalty_grad",
    "spearman",
    "sweep",
    "verify_bound",
    "write_labels",
    "write_matrix",
]
