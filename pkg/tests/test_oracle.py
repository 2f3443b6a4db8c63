import math

import numpy as np
import pytest

from prism.errors import DegenerateInputError, ShapeMismatchError
from prism.oracle import (
    DEFAULT_RANK_GRID,
    PERTURBATION_KINDS,
    empirical_risk,
    gen_instance,
    rank_experiment,
    spearman,
    sweep,
    sweep_rows_to_csv,
    verify_bound,
)


# --- empirical_risk -------------------------------------------------------------


def test_uniform_logits_give_log_vocab():
    z = np.zeros((5, 3))
    h = np.zeros((3, 2))
    labels = [0, 1, 0, 1, 1]
    assert empirical_risk(z, h, labels) == pytest.approx(math.log(2.0), rel=1e-15)


def test_hand_logsumexp_value():
    # logits [10, 0, 0], y = 0: loss = -10 + log(e^10 + 2) = log1p(2 e^-10)
    z = np.array([[1.0]])
    h = np.array([[10.0, 0.0, 0.0]])
    expected = math.log1p(2.0 * math.exp(-10.0))
    assert expected == pytest.approx(9.08e-5, rel=1e-2)
    assert empirical_risk(z, h, [0]) == pytest.approx(expected, rel=1e-12)


def test_matches_unstabilized_oracle_at_small_scale(rng):
    z = 0.3 * rng.standard_normal((12, 4))
    h = rng.standard_normal((4, 6))
    labels = rng.integers(0, 6, size=12)
    logits = z @ h
    naive = float(np.mean([
        -logits[i, labels[i]] + math.log(sum(math.exp(v) for v in logits[i]))
        for i in range(12)
    ]))
    assert empirical_risk(z, h, labels) == pytest.approx(naive, abs=1e-10)


def test_stable_at_huge_logits():
    z = np.array([[1.0]])
    h = np.array([[1000.0, 0.0]])
    assert empirical_risk(z, h, [0]) == pytest.approx(0.0, abs=1e-12)
    assert empirical_risk(z, h, [1]) == pytest.approx(1000.0, rel=1e-12)


def test_logit_shift_invariance(rng):
    # adding w 1^T to the head shifts each sample's logits by a constant
    z = rng.standard_normal((10, 4))
    h = rng.standard_normal((4, 7))
    labels = rng.integers(0, 7, size=10)
    base = empirical_risk(z, h, labels)
    for _ in range(5):
        w = rng.standard_normal((4, 1))
        assert empirical_risk(z, h + w, labels) == pytest.approx(base, abs=1e-10)


def test_label_out_of_range_rejected(rng):
    z = rng.standard_normal((3, 2))
    h = rng.standard_normal((2, 4))
    with pytest.raises(ValueError):
        empirical_risk(z, h, [0, 1, 4])
    with pytest.raises(ShapeMismatchError):
        empirical_risk(z, h, [0, 1])


# --- gen_instance ----------------------------------------------------------------


def test_magnitude_zero_is_bitwise_copy():
    for kind in PERTURBATION_KINDS:
        inst = gen_instance(3, 8, 4, 6, kind, 0.0)
        assert inst.z_p.tobytes() == inst.z_t.tobytes()
        assert inst.h_p.tobytes() == inst.h_t.tobytes()


def test_scale_shrink_half():
    inst = gen_instance(11, 16, 6, 9, "scale_shrink", 0.5)
    from prism.geometry import omega_trace, rms_scale

    assert rms_scale(inst.z_p) == pytest.approx(0.5 * rms_scale(inst.z_t), rel=1e-12)
    assert omega_trace(inst.z_t, inst.z_p) == pytest.approx(1.0, abs=1e-12)


def test_same_seed_bitwise_identical():
    a = gen_instance(7, 10, 5, 8, "combined", 0.3)
    b = gen_instance(7, 10, 5, 8, "combined", 0.3)
    for x, y in ((a.z_t, b.z_t), (a.z_p, b.z_p), (a.h_t, b.h_t), (a.h_p, b.h_p)):
        assert x.tobytes() == y.tobytes()
    assert np.array_equal(a.labels, b.labels)


def test_base_matrices_shared_across_kinds_and_magnitudes():
    a = gen_instance(5, 8, 4, 6, "gaussian_noise", 0.1)
    b = gen_instance(5, 8, 4, 6, "head_noise", 0.9)
    assert a.z_t.tobytes() == b.z_t.tobytes()
    assert a.h_t.tobytes() == b.h_t.tobytes()


def test_labels_in_range():
    inst = gen_instance(0, 32, 8, 5, "gaussian_noise", 0.2)
    assert inst.labels.min() >= 0
    assert inst.labels.max() < 5


def test_invalid_sizes_rejected():
    with pytest.raises(ValueError):
        gen_instance(0, 0, 4, 5, "gaussian_noise", 0.1)
    with pytest.raises(ValueError):
        gen_instance(0, 4, 4, 5, "gaussian_noise", -0.1)
    with pytest.raises(ValueError):
        gen_instance(0, 4, 4, 5, "banana", 0.1)


# --- verify_bound ----------------------------------------------------------------


def test_zero_magnitude_record():
    rec = verify_bound(gen_instance(0, 8, 4, 6, "gaussian_noise", 0.0))
    assert rec.gap == 0.0
    assert rec.bound == 0.0
    assert rec.holds
    assert rec.slack_ratio == 0.0


def test_sweep_has_zero_violations_both_alignments():
    for alignment in ("identity", "procrustes"):
        result = sweep(seed=0, trials=200, alignment=alignment)
        assert result.violations == 0
        assert 0.0 <= result.max_slack_ratio <= 1.0


def test_head_noise_gap_bounded_by_gamma():
    from prism.headterm import gamma

    inst = gen_instance(4, 32, 8, 12, "head_noise", 0.5)
    rec = verify_bound(inst, alignment="identity")
    g = gamma(inst.z_p, inst.h_t, inst.h_p, "identity")
    assert rec.gap <= g + 1e-9


def test_verify_deterministic():
    inst = gen_instance(9, 16, 8, 10, "combined", 0.4)
    a = verify_bound(inst)
    b = verify_bound(inst)
    assert a == b


def test_gaussian_bound_nondecreasing_in_magnitude():
    bounds = [
        verify_bound(gen_instance(2, 32, 8, 12, "gaussian_noise", m)).bound
        for m in (0.05, 0.1, 0.2, 0.4, 0.8)
    ]
    for lo, hi in zip(bounds, bounds[1:]):
        assert hi >= lo - 1e-9


# --- spearman ----------------------------------------------------------------------


def test_spearman_monotone_families():
    assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == 1.0
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == -1.0


def test_spearman_with_ties_matches_rank_then_pearson():
    xs = [1.0, 2.0, 2.0, 4.0]
    ys = [1.0, 3.0, 2.0, 4.0]
    # average-rank vectors by hand: xs -> [1, 2.5, 2.5, 4], ys -> [1, 3, 2, 4]
    rx = np.array([1.0, 2.5, 2.5, 4.0])
    ry = np.array([1.0, 3.0, 2.0, 4.0])
    rx -= rx.mean()
    ry -= ry.mean()
    expected = float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))
    assert spearman(xs, ys) == pytest.approx(expected, rel=1e-12)


def test_spearman_matches_scipy(rng):
    scipy_stats = pytest.importorskip("scipy.stats")
    for _ in range(20):
        xs = rng.standard_normal(12)
        ys = rng.standard_normal(12)
        # inject ties
        xs[3] = xs[7]
        ys[1] = ys[5]
        expected = scipy_stats.spearmanr(xs, ys).statistic
        assert spearman(xs, ys) == pytest.approx(expected, rel=1e-12)


def test_spearman_rejects_degenerate():
    with pytest.raises(DegenerateInputError):
        spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateInputError):
        spearman([1.0], [2.0])
    with pytest.raises(ShapeMismatchError):
        spearman([1.0, 2.0], [1.0, 2.0, 3.0])


# --- rank_experiment -----------------------------------------------------------------


def test_rank_experiment_default_grid_all_axes_high():
    summary = rank_experiment(seed=0)
    assert set(summary.r_s) == set(PERTURBATION_KINDS)
    for kind, r_s in summary.r_s.items():
        assert r_s >= 0.9, f"{kind}: {r_s}"


def test_rank_experiment_eight_gaussian_magnitudes():
    grid = [0.125 * (i + 1) for i in range(8)]
    summary = rank_experiment(seed=1, grid=grid, kinds=("gaussian_noise",))
    assert summary.r_s["gaussian_noise"] >= 0.9


def test_rank_experiment_degenerate_grid_rejected():
    with pytest.raises(DegenerateInputError):
        rank_experiment(seed=0, grid=[0.3, 0.3, 0.3])
    with pytest.raises(DegenerateInputError):
        rank_experiment(seed=0, grid=[0.3, 0.4])


def test_scale_shrink_scale_term_strictly_increasing():
    from prism.geometry import decompose

    prev = -1.0
    for m in DEFAULT_RANK_GRID:
        inst = gen_instance(0, 32, 8, 12, "scale_shrink", m)
        d = decompose(inst.z_t, inst.z_p, "identity")
        assert d.scale_term > prev
        assert d.scale_term > d.shape_term or m == 0
        prev = d.scale_term


def test_sweep_csv_emitter():
    result = sweep(seed=0, trials=10)
    text = sweep_rows_to_csv(result.rows)
    lines = text.strip().split("\n")
    assert lines[0].split(",")[:4] == ["seed", "kind", "magnitude", "alignment"]
    assert len(lines) == 11
    cells = lines[1].split(",")
    assert cells[8] == "1"  # holds
