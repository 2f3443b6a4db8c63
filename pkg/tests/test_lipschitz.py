import math

import numpy as np
import pytest

from prism.errors import DegenerateInputError
from prism.lipschitz import (
    EXACT_MODE_MAX_VOCAB,
    LipschitzConstants,
    kfeat,
    kfeat_exact,
    kfeat_spectral,
    kpred,
)


def _pairwise_diameter_naive(h):
    d, v = h.shape
    worst = 0.0
    for j in range(v):
        for k in range(v):
            worst = max(worst, float(np.linalg.norm(h[:, j] - h[:, k])))
    return worst


def test_kfeat_exact_identical_columns():
    h = np.tile(np.array([[1.0], [2.0]]), (1, 6))
    assert kfeat_exact(h) == 0.0


def test_kfeat_exact_antipodal_columns():
    h = np.array([[1.0, -1.0], [0.0, 0.0], [0.0, 0.0]])
    assert kfeat_exact(h) == pytest.approx(2.0, rel=1e-15)


def test_kfeat_exact_matches_double_loop(rng):
    h = rng.standard_normal((8, 50))
    assert kfeat_exact(h) == pytest.approx(_pairwise_diameter_naive(h), rel=1e-12)


def test_kfeat_exact_blocking_invariant(rng):
    h = rng.standard_normal((6, 37))
    full = kfeat_exact(h, block_size=1024)
    for block in (1, 2, 5, 7, 36, 37, 64):
        assert kfeat_exact(h, block_size=block) == pytest.approx(full, rel=1e-12)


def test_kfeat_exact_vocab_ceiling(rng):
    h = rng.standard_normal((2, 8))
    with pytest.raises(DegenerateInputError, match="spectral"):
        kfeat_exact(h[:, :8].repeat(EXACT_MODE_MAX_VOCAB // 8 + 1, axis=1))


def test_kfeat_spectral_identity_head():
    assert kfeat_spectral(np.eye(5)) == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_kfeat_spectral_zero_head():
    assert kfeat_spectral(np.zeros((4, 9))) == 0.0


def test_spectral_dominates_exact(rng):
    for _ in range(50):
        h = rng.standard_normal((5, 12))
        assert kfeat_exact(h) <= kfeat_spectral(h) + 1e-12


def test_shift_invariance(rng):
    h = rng.standard_normal((6, 20))
    base = kfeat_exact(h)
    for _ in range(10):
        shift = rng.standard_normal((6, 1))
        assert kfeat_exact(h + shift) == pytest.approx(base, abs=1e-10)


def test_kpred_value():
    assert kpred() == pytest.approx(1.4142135623730951, rel=1e-15)
    assert kpred() ** 2 == pytest.approx(2.0, abs=1e-15)


def test_kpred_uniform_two_class_gradient():
    # p uniform over V=2: ||p - e_y||_2 = sqrt(0.25 + 0.25) = 1/sqrt(2)
    p = np.array([0.5, 0.5])
    for y in (0, 1):
        e = np.zeros(2)
        e[y] = 1.0
        assert np.linalg.norm(p - e) <= kpred()
        assert np.linalg.norm(p - e) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-15)


def test_feature_gradient_norm_bounded_by_kfeat(rng):
    # ||grad_z CE(zH, y)||_2 <= K_feat for random (z, H, y)
    for _ in range(200):
        d, v = int(rng.integers(2, 6)), int(rng.integers(2, 10))
        h = rng.standard_normal((d, v))
        z = rng.standard_normal(d) * float(rng.uniform(0.1, 5.0))
        y = int(rng.integers(v))
        logits = z @ h
        p = np.exp(logits - logits.max())
        p /= p.sum()
        p[y] -= 1.0
        grad = h @ p
        assert np.linalg.norm(grad) <= kfeat_exact(h) + 1e-9


def test_logit_gradient_norm_bounded_by_sqrt2(rng):
    for _ in range(1000):
        v = int(rng.integers(2, 12))
        logits = rng.standard_normal(v) * float(rng.uniform(0.1, 20.0))
        y = int(rng.integers(v))
        p = np.exp(logits - logits.max())
        p /= p.sum()
        p[y] -= 1.0
        assert np.linalg.norm(p) <= math.sqrt(2.0)


def test_constants_bundle_modes(rng):
    h = rng.standard_normal((4, 9))
    exact = kfeat(h, mode="exact")
    spectral = kfeat(h, mode="spectral")
    assert exact.k_feat <= spectral.k_feat + 1e-12
    assert exact.k_pred == spectral.k_pred == kpred()
    with pytest.raises(ValueError):
        kfeat(h, mode="auto")


def test_constants_reject_wrong_kpred():
    with pytest.raises(ValueError):
        LipschitzConstants(k_feat=1.0, k_feat_mode="exact", k_pred=1.0)
