from .extract import ExtractionJob, ExtractionSummary, extract, read_prompts
from .model import (
    BOS_ID,
    VOCAB_SIZE,
    ModelConfig,
    ToyTransformer,
    load_checkpoint,
    make_toy_checkpoint,
    save_checkpoint,
)

__all__ = [
    "BOS_ID",
    "VOCAB_SIZE",
    "ExtractionJob",
    "ExtractionSummary",
    "ModelConfig",
    "ToyTransformer",
    "extract",
    "load_checkpoint",
    "make_toy_checkpoint",
    "read_prompts",
    "save_checkpoint",
]
