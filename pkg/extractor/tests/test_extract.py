import json
from pathlib import Path

import numpy as np
import pytest
import torch

from prism import matio
from prism.cli import main as prism_main
from prism.oracle import empirical_risk
from prism_extractor import (
    BOS_ID,
    ExtractionJob,
    extract,
    load_checkpoint,
    make_toy_checkpoint,
)


def _write_prompts(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")


@pytest.fixture(scope="module")
def toy_checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "toy.pt"
    make_toy_checkpoint(path, seed=0, d_model=32, n_layers=2, n_heads=4)
    return path


@pytest.fixture()
def prompts_3x2(tmp_path):
    path = tmp_path / "prompts.jsonl"
    _write_prompts(path, [
        {"context": "ab", "target": "cd"},
        {"context": "hello ", "target": "xy"},
        {"context": "", "target": "zw"},
    ])
    return path


def test_shapes_and_ordering(tmp_path, toy_checkpoint, prompts_3x2):
    summary = extract(ExtractionJob(
        model_ref=str(toy_checkpoint),
        prompts_path=str(prompts_3x2),
        output_dir=str(tmp_path / "out"),
    ))
    assert summary.n_prompts == 3
    assert summary.n_skipped == 0
    assert summary.n_rows == 6
    assert summary.d == 32

    features = matio.read_matrix(summary.feature_path)
    head = matio.read_matrix(summary.head_path)
    labels = matio.read_labels(summary.labels_path)
    assert features.shape == (6, 32)
    assert head.shape == (32, 257)
    assert labels.shape == (6,)
    # labels are the gold target bytes in prompt order
    assert labels.tolist() == [ord(c) for c in "cdxyzw"]


def test_feature_rows_are_prehead_states(tmp_path, toy_checkpoint):
    prompts = tmp_path / "p.jsonl"
    _write_prompts(prompts, [{"context": "ab", "target": "cd"}])
    summary = extract(ExtractionJob(
        model_ref=str(toy_checkpoint),
        prompts_path=str(prompts),
        output_dir=str(tmp_path / "out"),
        dtype="f64",
    ))
    features = matio.read_matrix(summary.feature_path)
    model = load_checkpoint(toy_checkpoint)
    ids = torch.tensor([BOS_ID, ord("a"), ord("b"), ord("c"), ord("d")])
    with torch.no_grad():
        hidden = model.hidden_states(ids).numpy()
    # predicting "c" uses the state at "b", predicting "d" the state at "c"
    assert np.array_equal(features, hidden.astype(np.float64)[2:4])


def test_re_extraction_bit_identical(tmp_path, toy_checkpoint, prompts_3x2):
    a = extract(ExtractionJob(str(toy_checkpoint), str(prompts_3x2), str(tmp_path / "a")))
    b = extract(ExtractionJob(str(toy_checkpoint), str(prompts_3x2), str(tmp_path / "b")))
    for first, second in (
        (a.feature_path, b.feature_path),
        (a.head_path, b.head_path),
        (a.labels_path, b.labels_path),
    ):
        assert Path(first).read_bytes() == Path(second).read_bytes()
    assert a.mean_ce == b.mean_ce


def test_cross_stack_risk_agreement_f32(tmp_path, toy_checkpoint, prompts_3x2):
    summary = extract(ExtractionJob(
        str(toy_checkpoint), str(prompts_3x2), str(tmp_path / "out"), dtype="f32",
    ))
    core_side = empirical_risk(
        matio.read_matrix(summary.feature_path),
        matio.read_matrix(summary.head_path),
        matio.read_labels(summary.labels_path),
    )
    assert core_side == pytest.approx(summary.mean_ce, abs=1e-4)


def test_cross_stack_risk_agreement_f64(tmp_path, toy_checkpoint, prompts_3x2):
    summary = extract(ExtractionJob(
        str(toy_checkpoint), str(prompts_3x2), str(tmp_path / "out64"), dtype="f64",
    ))
    header = matio.read_matrix_with_header(summary.feature_path)[1]
    assert header.dtype == "f64"
    core_side = empirical_risk(
        matio.read_matrix(summary.feature_path),
        matio.read_matrix(summary.head_path),
        matio.read_labels(summary.labels_path),
    )
    # f64 dumps remove the narrowing error; only torch-vs-numpy summation
    # order remains
    assert core_side == pytest.approx(summary.mean_ce, abs=1e-6)


def test_empty_target_skipped_and_counted(tmp_path, toy_checkpoint):
    prompts = tmp_path / "p.jsonl"
    _write_prompts(prompts, [
        {"context": "ab", "target": ""},
        {"context": "ab", "target": "c"},
    ])
    summary = extract(ExtractionJob(str(toy_checkpoint), str(prompts), str(tmp_path / "out")))
    assert summary.n_prompts == 2
    assert summary.n_skipped == 1
    assert summary.n_rows == 1


def test_max_samples_takes_first_records(tmp_path, toy_checkpoint):
    prompts = tmp_path / "p.jsonl"
    _write_prompts(prompts, [
        {"context": "a", "target": "x"},
        {"context": "b", "target": "y"},
        {"context": "c", "target": "z"},
    ])
    summary = extract(ExtractionJob(
        str(toy_checkpoint), str(prompts), str(tmp_path / "out"), max_samples=2,
    ))
    assert summary.n_prompts == 2
    labels = matio.read_labels(summary.labels_path)
    assert labels.tolist() == [ord("x"), ord("y")]


def test_bad_checkpoint_is_load_error(tmp_path, prompts_3x2):
    bogus = tmp_path / "bogus.pt"
    bogus.write_bytes(b"not a checkpoint")
    with pytest.raises(RuntimeError, match="checkpoint"):
        extract(ExtractionJob(str(bogus), str(prompts_3x2), str(tmp_path / "out")))


def test_all_targets_empty_is_error(tmp_path, toy_checkpoint):
    prompts = tmp_path / "p.jsonl"
    _write_prompts(prompts, [{"context": "ab", "target": ""}])
    with pytest.raises(ValueError, match="target span"):
        extract(ExtractionJob(str(toy_checkpoint), str(prompts), str(tmp_path / "out")))


def test_manifest_feeds_core_bound_cli(tmp_path, toy_checkpoint, prompts_3x2, capsys):
    # two checkpoints scored on the same prompts: the core-side bound on the
    # dumped artifacts must cover the observed teacher-forced risk gap
    other = tmp_path / "other.pt"
    make_toy_checkpoint(other, seed=1, d_model=32, n_layers=2, n_heads=4)
    target = extract(ExtractionJob(
        str(toy_checkpoint), str(prompts_3x2), str(tmp_path / "target"), dtype="f64",
    ))
    proxy = extract(ExtractionJob(
        str(other), str(prompts_3x2), str(tmp_path / "proxy"), dtype="f64",
    ))

    code = prism_main([
        "bound",
        "--manifest", proxy.manifest_path,
        "--target-features", target.feature_path,
        "--target-head", target.head_path,
        "--format", "json",
    ])
    out = capsys.readouterr().out
    assert code == 0
    report = json.loads(out)[0]
    gap = abs(target.mean_ce - proxy.mean_ce)
    assert report["bound"] >= gap - 1e-9
    assert report["gamma"] > 0.0
