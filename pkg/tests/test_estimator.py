import numpy as np
import pytest
from sklearn.base import clone

from prism.estimator import PrismDiagnostic
from prism.bound import prism_bound
from prism.errors import ShapeMismatchError


def _target(rng, n=12, d=4, v=7):
    return rng.standard_normal((n, d)), rng.standard_normal((d, v))


def test_get_set_params_round_trip():
    est = PrismDiagnostic(alignment="procrustes", k_feat_mode="spectral")
    params = est.get_params()
    assert params == {"alignment": "procrustes", "k_feat_mode": "spectral"}
    cloned = clone(est)
    assert cloned.get_params() == params


def test_fit_computes_target_constants(rng):
    z_t, h_t = _target(rng)
    est = PrismDiagnostic().fit(z_t, h_t)
    assert est.k_feat_ > 0
    assert est.k_pred_ == pytest.approx(np.sqrt(2.0), rel=1e-15)


def test_report_matches_functional_core(rng):
    z_t, h_t = _target(rng)
    z_p = z_t + 0.1 * rng.standard_normal(z_t.shape)
    h_p = h_t + 0.05 * rng.standard_normal(h_t.shape)
    est = PrismDiagnostic().fit(z_t, h_t)
    got = est.report(z_p, h_p, variant_id="v")
    want = prism_bound(z_t, z_p, h_t, h_p, variant_id="v")
    assert got == want


def test_frozen_head_default(rng):
    z_t, h_t = _target(rng)
    z_p = z_t + 0.1 * rng.standard_normal(z_t.shape)
    est = PrismDiagnostic().fit(z_t, h_t)
    report = est.report(z_p)
    assert report.gamma == 0.0


def test_predict_and_score_signs(rng):
    z_t, h_t = _target(rng)
    z_p = z_t + 0.2 * rng.standard_normal(z_t.shape)
    est = PrismDiagnostic().fit(z_t, h_t)
    assert est.predict(z_p) > 0
    assert est.score(z_p) == -est.predict(z_p)


def test_decompose_uses_configured_alignment(rng):
    z_t, h_t = _target(rng)
    z_p = rng.standard_normal(z_t.shape)
    ident = PrismDiagnostic(alignment="identity").fit(z_t, h_t).decompose(z_p)
    proc = PrismDiagnostic(alignment="procrustes").fit(z_t, h_t).decompose(z_p)
    assert proc.residual <= ident.residual + 1e-12
    assert ident.alignment == "identity"
    assert proc.alignment == "procrustes"


def test_unfitted_raises(rng):
    with pytest.raises(RuntimeError):
        PrismDiagnostic().predict(rng.standard_normal((4, 3)))


def test_fit_validates_shapes(rng):
    with pytest.raises(ShapeMismatchError):
        PrismDiagnostic().fit(rng.standard_normal((5, 3)), rng.standard_normal((4, 6)))
