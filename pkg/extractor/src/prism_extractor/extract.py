"""Teacher-forced extraction into the interchange format.

One forward pass per prompt scores the whole gold target span: for a
context of length c (after the BOS prefix) and target tokens t_1..t_k, the
feature row for t_j is the final-LayerNorm hidden state at the position
immediately preceding t_j. Rows are stacked in (sample, position) order
and labels follow the same order, so row i of the feature file always
pairs with entry i of the labels file.

Prompts are JSON lines with fields "context" and "target"; both are
byte-level tokenized (BOS is prepended, so an empty context is legal).
Records whose target encodes to zero tokens are skipped and counted.
Only the first max_samples records are read; the selection policy for
larger prompt sets is first-N by design.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from prism import matio

from .model import BOS_ID, ToyTransformer, load_checkpoint


@dataclass(frozen=True)
class ExtractionJob:
    model_ref: str
    prompts_path: str
    output_dir: str
    max_samples: Optional[int] = None
    dtype: str = "f32"
    variant_id: Optional[str] = None


@dataclass(frozen=True)
class ExtractionSummary:
    n_prompts: int
    n_skipped: int
    n_rows: int
    d: int
    vocab: int
    mean_ce: float
    feature_path: str
    head_path: str
    labels_path: str
    manifest_path: str


def encode(text: str) -> list[int]:
    return list(text.encode("utf-8"))


def read_prompts(path, max_samples: Optional[int] = None) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "context" not in rec or "target" not in rec:
                raise ValueError(f"{path}: prompt records need 'context' and 'target' fields")
            records.append(rec)
            if max_samples is not None and len(records) >= max_samples:
                break
    return records


@torch.no_grad()
def _score_prompt(model: ToyTransformer, context: str, target: str):
    """Features and labels for one prompt, or None for an empty target span."""
    target_ids = encode(target)
    if not target_ids:
        return None
    ids = [BOS_ID] + encode(context) + target_ids
    hidden = model.hidden_states(torch.tensor(ids, dtype=torch.long))
    start = len(ids) - len(target_ids) - 1
    features = hidden[start : start + len(target_ids)]
    return features, torch.tensor(target_ids, dtype=torch.long)


@torch.no_grad()
def extract(job: ExtractionJob) -> ExtractionSummary:
    """Run the job and write features, head, labels, and a manifest fragment.

    Inference runs single-threaded in float32 so repeated extraction of the
    same checkpoint is bit-identical.
    """
    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        model = load_checkpoint(job.model_ref)
        prompts = read_prompts(job.prompts_path, job.max_samples)

        feature_blocks = []
        label_blocks = []
        skipped = 0
        for rec in prompts:
            scored = _score_prompt(model, str(rec["context"]), str(rec["target"]))
            if scored is None:
                skipped += 1
                continue
            feature_blocks.append(scored[0])
            label_blocks.append(scored[1])
        if not feature_blocks:
            raise ValueError("no prompt produced a non-empty target span")

        features = torch.cat(feature_blocks, dim=0)
        labels = torch.cat(label_blocks, dim=0)
        head = model.head_matrix()
        logits = features @ head
        mean_ce = float(torch.nn.functional.cross_entropy(logits, labels).item())

        out = Path(job.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        feature_path = out / "features.prsm"
        head_path = out / "head.prsm"
        labels_path = out / "labels.prsm"
        manifest_path = out / "manifest.json"

        matio.write_matrix(features.numpy().astype(np.float64), feature_path, dtype=job.dtype)
        matio.write_matrix(head.numpy().astype(np.float64), head_path, dtype=job.dtype)
        matio.write_labels(labels.numpy().astype(np.int64), labels_path)

        variant_id = job.variant_id or Path(job.model_ref).stem
        matio.write_manifest(
            matio.VariantManifest(
                target_id=variant_id,
                benchmark_id=Path(job.prompts_path).stem,
                variants=[matio.VariantRecord(
                    variant_id=variant_id,
                    family="checkpoint",
                    method="teacher-forced",
                    feature_path=feature_path.name,
                    head_path=head_path.name,
                )],
            ),
            manifest_path,
        )
        return ExtractionSummary(
            n_prompts=len(prompts),
            n_skipped=skipped,
            n_rows=int(features.shape[0]),
            d=int(features.shape[1]),
            vocab=int(head.shape[1]),
            mean_ce=mean_ce,
            feature_path=str(feature_path),
            head_path=str(head_path),
            labels_path=str(labels_path),
            manifest_path=str(manifest_path),
        )
    finally:
        torch.set_num_threads(n_threads)
