"""Feature-matrix data model, CSV/binary I/O, scaling and standardization.

A FeatureMatrix is an n-subjects x d-features array with unique string
subject identifiers.  Subject alignment between two modalities is always by
identifier, never by row position, because the two modalities typically
arrive from separate files.
"""

from __future__ import annotations

import csv
import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

BIN_MAGIC = b"HDPR1\x00"


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-subject feature matrix (rows = subjects, columns = features).

    All entries must be finite and subject_ids must be unique with one id
    per row.  Instances are immutable (the array is marked read-only) and
    safe to share across threads.
    """

    data: np.ndarray
    subject_ids: tuple[str, ...]
    modality_tag: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {data.shape}")
        n, d = data.shape
        if n < 1 or d < 1:
            raise ValueError(f"feature matrix must be non-empty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            i, j = np.argwhere(~np.isfinite(data))[0]
            raise ValueError(
                f"non-finite entry at row {i} (subject index), column {j}"
            )
        ids = tuple(str(s) for s in self.subject_ids)
        if len(ids) != n:
            raise ValueError(f"{len(ids)} subject ids for {n} rows")
        if len(set(ids)) != len(ids):
            dup = sorted({s for s in ids if ids.count(s) > 1})
            raise ValueError(f"duplicate subject ids: {dup}")
        if any("\n" in s for s in ids):
            raise ValueError("subject ids must not contain newlines")
        object.__setattr__(self, "data", _as_readonly(data))
        object.__setattr__(self, "subject_ids", ids)

    @property
    def n_subjects(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PairedDataset:
    """Two feature matrices over the same subjects, row-aligned by id."""

    x: FeatureMatrix
    y: FeatureMatrix

    def __post_init__(self):
        if self.x.subject_ids != self.y.subject_ids:
            raise ValueError("paired matrices must have identical subject id order")

    @property
    def n_subjects(self) -> int:
        return self.x.n_subjects


def pair(x: FeatureMatrix, y: FeatureMatrix) -> PairedDataset:
    """Align y's rows to x's subject-id order and return the paired dataset.

    Raises if the two id sets differ; the error lists the symmetric
    difference so the offending subjects are identifiable.
    """
    if set(x.subject_ids) != set(y.subject_ids):
        diff = sorted(set(x.subject_ids) ^ set(y.subject_ids))
        raise ValueError(f"subject id sets differ; symmetric difference: {diff}")
    if x.subject_ids == y.subject_ids:
        return PairedDataset(x, y)
    pos = {s: i for i, s in enumerate(y.subject_ids)}
    order = [pos[s] for s in x.subject_ids]
    y_aligned = FeatureMatrix(y.data[order], x.subject_ids, y.modality_tag)
    return PairedDataset(x, y_aligned)


def scale_to_unit_variance(row: np.ndarray) -> np.ndarray:
    """Divide a feature vector by its population standard deviation.

    Uses the population convention (divide by d) so the entry variance of
    the output is exactly 1.  No centering is applied.
    """
    row = np.asarray(row, dtype=float)
    if row.ndim != 1 or row.size < 2:
        raise ValueError("input must be a vector with at least 2 entries")
    sd = float(np.std(row))
    if sd == 0.0:
        raise ValueError("zero-variance vector cannot be scaled to unit variance")
    return row / sd


def scale_rows_to_unit_variance(m: FeatureMatrix) -> FeatureMatrix:
    """Apply scale_to_unit_variance to every row independently."""
    sds = np.std(m.data, axis=1)
    bad = np.flatnonzero(sds == 0.0)
    if bad.size:
        raise ValueError(
            f"zero-variance rows cannot be scaled: subjects "
            f"{[m.subject_ids[i] for i in bad[:5]]}"
        )
    return FeatureMatrix(m.data / sds[:, None], m.subject_ids, m.modality_tag)


@dataclass(frozen=True)
class ColumnStandardizer:
    """Column means/sds fitted on one matrix, applicable to another.

    `kept` is the manifest of retained column indices; zero-variance columns
    are dropped rather than erroring because real fingerprint data contains
    dead features.
    """

    mean: np.ndarray
    sd: np.ndarray
    kept: np.ndarray
    n_columns: int

    @classmethod
    def fit(cls, data: np.ndarray) -> "ColumnStandardizer":
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 2:
            raise ValueError("standardization needs a 2-D matrix with >= 2 rows")
        mean = data.mean(axis=0)
        sd = data.std(axis=0, ddof=1)
        kept = np.flatnonzero(sd > 0.0)
        if kept.size == 0:
            raise ValueError("all columns have zero variance; nothing to standardize")
        if kept.size < data.shape[1]:
            dropped = np.setdiff1d(np.arange(data.shape[1]), kept)
            warnings.warn(
                f"dropping {dropped.size} zero-variance columns "
                f"(indices {dropped[:10].tolist()}{'...' if dropped.size > 10 else ''})",
                RuntimeWarning,
                stacklevel=3,
            )
        return cls(mean=mean[kept], sd=sd[kept], kept=kept, n_columns=data.shape[1])

    def apply(self, data: np.ndarray) -> np.ndarray:
        """Standardize new rows with the fitted means/sds (leakage-free)."""
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[1] != self.n_columns:
            raise ValueError(
                f"expected {self.n_columns} columns, got {data.shape[1] if data.ndim == 2 else data.shape}"
            )
        return (data[:, self.kept] - self.mean) / self.sd


def standardize_columns(m: FeatureMatrix) -> tuple[FeatureMatrix, ColumnStandardizer]:
    """Standardize columns to mean 0, sample sd 1 (divide by n-1).

    Returns the standardized matrix together with the fitted standardizer,
    whose `kept` field is the manifest of retained (positive-variance)
    columns.
    """
    std = ColumnStandardizer.fit(m.data)
    return FeatureMatrix(std.apply(m.data), m.subject_ids, m.modality_tag), std


# ---------------------------------------------------------------------------
# I/O: CSV (id column + numeric features) and the binary matrix format.
# ---------------------------------------------------------------------------


def _load_csv(path: str, modality_tag: str) -> FeatureMatrix:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0] != "id":
            raise ValueError(f"{path}: first header column must be 'id', got {header[:1]}")
        colnames = header[1:]
        if not colnames:
            raise ValueError(f"{path}: no feature columns")
        ids: list[str] = []
        rows: list[list[float]] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}"
                )
            ids.append(rec[0])
            vals = []
            for name, tok in zip(colnames, rec[1:]):
                try:
                    v = float(tok)
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: cannot parse value {tok!r} in column {name!r}"
                    ) from None
                if not math.isfinite(v):
                    raise ValueError(
                        f"{path}:{lineno}: non-finite value {tok!r} in column {name!r} "
                        f"for subject {rec[0]!r}"
                    )
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        dup = sorted({s for s in ids if ids.count(s) > 1})
        raise ValueError(f"{path}: duplicate subject ids {dup}")
    return FeatureMatrix(np.array(rows, dtype=float), tuple(ids), modality_tag)


def _load_bin(path: str, modality_tag: str) -> FeatureMatrix:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[: len(BIN_MAGIC)] != BIN_MAGIC:
        raise ValueError(f"{path}: bad magic bytes, not a binary matrix file")
    off = len(BIN_MAGIC)
    if len(blob) < off + 16:
        raise ValueError(f"{path}: truncated header")
    n, d = struct.unpack_from("<QQ", blob, off)
    off += 16
    payload = n * d * 8
    if len(blob) < off + payload + 8:
        raise ValueError(f"{path}: truncated payload ({n}x{d})")
    data = np.frombuffer(blob, dtype="<f8", count=n * d, offset=off).reshape(n, d)
    off += payload
    (id_len,) = struct.unpack_from("<Q", blob, off)
    off += 8
    if len(blob) < off + id_len:
        raise ValueError(f"{path}: truncated subject-id block")
    ids = tuple(blob[off : off + id_len].decode("utf-8").split("\n"))
    if len(ids) != n:
        raise ValueError(f"{path}: {len(ids)} subject ids for {n} rows")
    return FeatureMatrix(data, ids, modality_tag)


def load_matrix(path: str, format: str = "csv", modality_tag: str = "") -> FeatureMatrix:
    """Load a FeatureMatrix from `csv` or `bin` format.

    CSV: header row required, first column named "id", remaining columns
    numeric (UTF-8, '.' decimal separator).  Binary: see save_matrix.
    """
    if format == "csv":
        return _load_csv(path, modality_tag)
    if format == "bin":
        return _load_bin(path, modality_tag)
    raise ValueError(f"unknown format {format!r}; expected 'csv' or 'bin'")


def save_matrix(m: FeatureMatrix, path: str, format: str = "bin") -> None:
    """Write a FeatureMatrix.

    Binary layout: magic "HDPR1\\0", u64-LE row count, u64-LE column count,
    row-major IEEE-754 little-endian f64 payload, then a u64-LE byte-length
    prefix followed by the newline-separated UTF-8 subject-id block.
    Round-trips finite doubles bit-exactly.
    """
    if format == "bin":
        ids_block = "\n".join(m.subject_ids).encode("utf-8")
        with open(path, "wb") as f:
            f.write(BIN_MAGIC)
            f.write(struct.pack("<QQ", m.n_subjects, m.n_features))
            f.write(np.ascontiguousarray(m.data, dtype="<f8").tobytes())
            f.write(struct.pack("<Q", len(ids_block)))
            f.write(ids_block)
        return
    if format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write("id," + ",".join(f"f{j + 1}" for j in range(m.n_features)) + "\n")
            for sid, row in zip(m.subject_ids, m.data):
                f.write(sid + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return
    raise ValueError(f"unknown format {format!r}; expected 'csv' or 'bin'")


def load_matrix_auto(path: str, modality_tag: str = "") -> FeatureMatrix:
    """Dispatch on file extension: .csv -> csv, anything else -> bin."""
    fmt = "csv" if str(path).endswith(".csv") else "bin"
    return load_matrix(path, fmt, modality_tag)
