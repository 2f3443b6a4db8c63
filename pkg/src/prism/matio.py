"""Bit-exact interchange format for matrices, label vectors, and manifests.

Matrix files carry a fixed 26-byte little-endian header

    offset  size  field
    0       4     magic, ASCII "PRSM"
    4       2     format version (currently 1), unsigned
    6       4     dtype code, unsigned: 1 = f32, 2 = f64
    10      8     rows, unsigned
    18      8     cols, unsigned

followed by rows*cols values, row-major, little-endian. The layout is
normative: any producer that emits these bytes interoperates, no tensor
library required. Zero-sized matrices are legal (header only). The payload
may contain NaN/Inf -- this layer is policy-free; geometry operations
reject non-finite input at their own boundary.

Variant manifests are JSON documents listing the proxy variants of one
target on one benchmark (see read_manifest for the schema). JSON keeps them
hand-editable for desk-scale experiments; record order is document order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ManifestError, MatrixFormatError

MAGIC = b"PRSM"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHIQQ")
_DTYPE_CODES = {"f32": 1, "f64": 2}
_CODE_DTYPES = {1: "f32", 2: "f64"}
_NUMPY_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}

# Largest integer exactly representable in f64; label round-trips through the
# matrix payload stay lossless below this.
_MAX_EXACT_INT = 2 ** 53


@dataclass(frozen=True)
class MatrixHeader:
    version: int
    dtype: str
    rows: int
    cols: int


def write_matrix(m, path, dtype: str = "f64") -> None:
    """Write a matrix file. Narrowing f64 data to an f32 file is allowed;
    the stored dtype is flagged in the header that read returns."""
    if dtype not in _DTYPE_CODES:
        raise ValueError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise MatrixFormatError(f"matrix files are 2-D, got ndim={arr.ndim}")
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, _DTYPE_CODES[dtype], arr.shape[0], arr.shape[1]
    )
    payload = np.ascontiguousarray(arr, dtype=_NUMPY_DTYPES[dtype]).tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def read_matrix_with_header(path) -> tuple[np.ndarray, MatrixHeader]:
    """Read a matrix file, widening f32 payloads to float64.

    The returned header carries the stored dtype, so callers can tell
    whether the file went through a narrowing write.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise MatrixFormatError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, dtype_code, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise MatrixFormatError(f"{path}: unsupported format version {version}")
    if dtype_code not in _CODE_DTYPES:
        raise MatrixFormatError(f"{path}: unknown dtype code {dtype_code}")
    dtype = _CODE_DTYPES[dtype_code]
    np_dtype = _NUMPY_DTYPES[dtype]
    expected = rows * cols * np_dtype.itemsize
    actual = len(raw) - _HEADER.size
    if actual != expected:
        raise MatrixFormatError(
            f"{path}: payload is {actual} bytes but header declares {rows}x{cols} "
            f"{dtype} = {expected} bytes"
        )
    flat = np.frombuffer(raw, dtype=np_dtype, offset=_HEADER.size)
    values = np.array(flat, dtype=np.float64).reshape(rows, cols)
    return values, MatrixHeader(version=version, dtype=dtype, rows=rows, cols=cols)


def read_matrix(path) -> np.ndarray:
    values, _ = read_matrix_with_header(path)
    return values


def write_labels(labels, path) -> None:
    """Store token-index labels as an n x 1 f64 matrix (exact below 2**53)."""
    idx = np.asarray(labels)
    if idx.ndim != 1:
        raise MatrixFormatError(f"labels must be 1-D, got ndim={idx.ndim}")
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        raise MatrixFormatError("labels must be integers")
    if idx.size and (idx.min() < 0 or idx.max() >= _MAX_EXACT_INT):
        raise MatrixFormatError("label indices must be in [0, 2**53)")
    write_matrix(idx.reshape(-1, 1).astype(np.float64), path, dtype="f64")


def read_labels(path) -> np.ndarray:
    values = read_matrix(path)
    if values.ndim != 2 or values.shape[1] != 1:
        raise MatrixFormatError(f"{path}: labels file must be n x 1, got {values.shape}")
    flat = values[:, 0]
    as_int = flat.astype(np.int64)
    if not np.array_equal(as_int.astype(np.float64), flat):
        raise MatrixFormatError(f"{path}: labels file contains non-integer values")
    return as_int


# --- variant manifests --------------------------------------------------------


@dataclass(frozen=True)
class VariantRecord:
    variant_id: str
    family: str
    method: str
    feature_path: str
    head_path: Optional[str] = None
    empirical_gap: Optional[float] = None


@dataclass(frozen=True)
class VariantManifest:
    target_id: str
    benchmark_id: str
    variants: list[VariantRecord] = field(default_factory=list)


def read_manifest(path) -> VariantManifest:
    """Parse and validate a variant manifest.

    Schema (JSON object):
      target_id:    string
      benchmark_id: string
      variants:     array of objects with keys
                    variant_id (string, unique), family (string),
                    method (string), feature_path (string),
                    head_path (string, optional),
                    empirical_gap (number >= 0, optional)

    Relative paths are interpreted relative to the manifest's directory by
    the CLI; this parser stores them verbatim.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ManifestError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    for key in ("target_id", "benchmark_id", "variants"):
        if key not in doc:
            raise ManifestError(f"{path}: missing required key {key!r}")
    if not isinstance(doc["variants"], list):
        raise ManifestError(f"{path}: 'variants' must be an array")

    records: list[VariantRecord] = []
    seen: set[str] = set()
    for i, entry in enumerate(doc["variants"]):
        if not isinstance(entry, dict):
            raise ManifestError(f"{path}: variants[{i}] must be an object")
        for key in ("variant_id", "family", "method"):
            if key not in entry:
                raise ManifestError(f"{path}: variants[{i}] missing {key!r}")
        vid = str(entry["variant_id"])
        if vid in seen:
            raise ManifestError(f"{path}: duplicate variant_id {vid!r}")
        seen.add(vid)
        if "feature_path" not in entry or not entry["feature_path"]:
            raise ManifestError(f"{path}: variants[{i}] ({vid}) missing feature_path")
        gap = entry.get("empirical_gap")
        if gap is not None:
            gap = float(gap)
            if gap < 0:
                raise ManifestError(
                    f"{path}: variants[{i}] ({vid}) empirical_gap must be >= 0, got {gap}"
                )
        records.append(VariantRecord(
            variant_id=vid,
            family=str(entry["family"]),
            method=str(entry["method"]),
            feature_path=str(entry["feature_path"]),
            head_path=str(entry["head_path"]) if entry.get("head_path") else None,
            empirical_gap=gap,
        ))
    return VariantManifest(
        target_id=str(doc["target_id"]),
        benchmark_id=str(doc["benchmark_id"]),
        variants=records,
    )


def write_manifest(manifest: VariantManifest, path) -> None:
    doc = {
        "target_id": manifest.target_id,
        "benchmark_id": manifest.benchmark_id,
        "variants": [],
    }
    for v in manifest.variants:
        entry: dict = {
            "variant_id": v.variant_id,
            "family": v.family,
            "method": v.method,
            "feature_path": v.feature_path,
        }
        if v.head_path is not None:
            entry["head_path"] = v.head_path
        if v.empirical_gap is not None:
            entry["empirical_gap"] = v.empirical_gap
        doc["variants"].append(entry)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
