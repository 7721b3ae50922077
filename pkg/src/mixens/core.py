"""Domain types for per-sample class-probability data, plus their file formats.

The central currency is the prediction matrix: one predictor's per-sample
probability rows for one classification task.  Rows are keyed by sample id,
kept in strictly increasing lexicographic order so that cross-predictor joins
are positional once validated.  Loaders never renormalize: a row that does not
sum to one is an upstream bug and is reported, not hidden.

CSV contracts (UTF-8, LF line endings):
  predictions: header ``sample_id,c0,...,c{C-1}``, one row per sample,
               probabilities written with 9 significant digits;
  labels:      header ``sample_id,label`` with integer class indices.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    ConfigError,
    FormatError,
    MissingPredictorError,
    ValidationError,
)

ROW_SUM_TOL = 1e-6

PredictorId = str


def format_probability(value: float) -> str:
    """Serialize a probability with 9 significant digits (round-trip stable)."""
    return format(float(value), ".9g")


def _check_sorted_ids(sample_ids: Sequence[str]) -> None:
    for a, b in zip(sample_ids, sample_ids[1:]):
        if a == b:
            raise ValidationError(f"duplicate sample_id {a!r}")
        if a > b:
            raise ValidationError(
                f"sample_ids must be strictly increasing: {a!r} precedes {b!r}"
            )


@dataclass(frozen=True)
class TaskSpec:
    """One classification task: an identifier and its class count."""

    task_id: str
    class_count: int

    def __post_init__(self) -> None:
        if not self.task_id:
            raise ConfigError("task_id must be nonempty")
        if not isinstance(self.class_count, int) or self.class_count < 2:
            raise ConfigError(f"class_count must be an integer >= 2, got {self.class_count!r}")


@dataclass(frozen=True)
class PredictionMatrix:
    """One predictor's probability rows for one task, sorted by sample id."""

    predictor: PredictorId
    task: TaskSpec
    sample_ids: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[1] != self.task.class_count:
            raise ValidationError(
                f"probs must be (n, {self.task.class_count}), got shape {probs.shape}"
            )
        n = probs.shape[0]
        if n < 1:
            raise ValidationError("a prediction matrix needs at least one row")
        if len(self.sample_ids) != n:
            raise ValidationError("sample_ids length does not match probability rows")
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        _check_sorted_ids(self.sample_ids)
        if np.any(probs < 0.0):
            bad = int(np.argwhere(probs < 0.0)[0][0])
            raise ValidationError(
                f"negative probability for sample_id {self.sample_ids[bad]!r}"
            )
        sums = probs.sum(axis=1)
        off = np.abs(sums - 1.0) > ROW_SUM_TOL
        if np.any(off):
            bad = int(np.flatnonzero(off)[0])
            raise ValidationError(
                f"row for sample_id {self.sample_ids[bad]!r} sums to {sums[bad]!r}, "
                f"outside 1 +/- {ROW_SUM_TOL}"
            )
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_samples(self) -> int:
        return self.probs.shape[0]

    def with_predictor(self, predictor: PredictorId) -> "PredictionMatrix":
        return dataclasses.replace(self, predictor=predictor)

    def subset(self, sample_ids: Iterable[str]) -> "PredictionMatrix":
        """Restrict to the given sample ids (must all be present)."""
        rows = _locate_ids(self.sample_ids, sample_ids)
        return dataclasses.replace(
            self,
            sample_ids=tuple(self.sample_ids[i] for i in rows),
            probs=self.probs[rows],
        )


@dataclass(frozen=True)
class LabelVector:
    """Ground-truth (or predicted) class indices, sorted by sample id."""

    task: TaskSpec
    sample_ids: tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValidationError("labels must be one-dimensional")
        if len(self.sample_ids) != labels.shape[0]:
            raise ValidationError("sample_ids length does not match labels")
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        _check_sorted_ids(self.sample_ids)
        bad = (labels < 0) | (labels >= self.task.class_count)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ValidationError(
                f"label {labels[i]} for sample_id {self.sample_ids[i]!r} is outside "
                f"[0, {self.task.class_count})"
            )
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]

    def subset(self, sample_ids: Iterable[str]) -> "LabelVector":
        rows = _locate_ids(self.sample_ids, sample_ids)
        return dataclasses.replace(
            self,
            sample_ids=tuple(self.sample_ids[i] for i in rows),
            labels=self.labels[rows],
        )


@dataclass(frozen=True)
class FeatureMatrix:
    """Concatenated probability columns with per-column provenance."""

    sample_ids: tuple[str, ...]
    features: np.ndarray
    column_origin: tuple[tuple[PredictorId, int], ...]

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise ValidationError("features must be two-dimensional")
        if features.shape[0] != len(self.sample_ids):
            raise ValidationError("sample_ids length does not match feature rows")
        if features.shape[1] != len(self.column_origin):
            raise ValidationError("column_origin length does not match feature columns")
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(
            self, "column_origin", tuple((str(p), int(k)) for p, k in self.column_origin)
        )
        _check_sorted_ids(self.sample_ids)
        features.setflags(write=False)
        object.__setattr__(self, "features", features)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def _locate_ids(have: Sequence[str], wanted: Iterable[str]) -> np.ndarray:
    wanted = sorted(wanted)
    for a, b in zip(wanted, wanted[1:]):
        if a == b:
            raise AlignmentError(f"duplicate sample_id {a!r} in subset request")
    have_arr = np.asarray(have, dtype=object)
    pos = np.searchsorted(have_arr, wanted)
    bad = (pos >= len(have_arr)) | (have_arr[np.minimum(pos, len(have_arr) - 1)] != wanted)
    if np.any(bad):
        missing = np.asarray(wanted, dtype=object)[bad][0]
        raise AlignmentError(f"sample_id {missing!r} not present")
    return pos.astype(np.intp)


def ensure_aligned(matrices: Sequence[PredictionMatrix]) -> None:
    """Raise AlignmentError unless all matrices share task and sample ids."""
    if not matrices:
        return
    ref = matrices[0]
    for m in matrices[1:]:
        if m.task != ref.task:
            raise AlignmentError(
                f"task mismatch: {m.predictor!r} is for {m.task.task_id!r}, "
                f"expected {ref.task.task_id!r}"
            )
        if m.sample_ids != ref.sample_ids:
            raise AlignmentError(
                f"sample_id mismatch between predictors {ref.predictor!r} and {m.predictor!r}"
            )


def predictions_header(class_count: int) -> str:
    return "sample_id," + ",".join(f"c{k}" for k in range(class_count))


def load_predictions(path: str | Path, task: TaskSpec, predictor: PredictorId) -> PredictionMatrix:
    """Read and validate a predictions CSV; rows are re-sorted by sample id."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: empty file")
    expected = predictions_header(task.class_count)
    if lines[0] != expected:
        raise FormatError(f"{path}: line 1: expected header {expected!r}, got {lines[0]!r}")
    ids: list[str] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != task.class_count + 1:
            raise FormatError(
                f"{path}: line {lineno}: expected {task.class_count + 1} columns, "
                f"got {len(parts)}"
            )
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: non-numeric probability") from None
        ids.append(parts[0])
    if not rows:
        raise FormatError(f"{path}: no data rows")
    seen: set[str] = set()
    for sid in ids:
        if sid in seen:
            raise ValidationError(f"{path}: duplicate sample_id {sid!r}")
        seen.add(sid)
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    probs = np.asarray(rows, dtype=np.float64)[order]
    return PredictionMatrix(predictor, task, tuple(ids[i] for i in order), probs)


def save_predictions(matrix: PredictionMatrix, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [predictions_header(matrix.task.class_count)]
    for sid, row in zip(matrix.sample_ids, matrix.probs):
        lines.append(sid + "," + ",".join(format_probability(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(lines) + "\n")


def load_labels(path: str | Path, task: TaskSpec) -> LabelVector:
    """Read and validate a labels CSV; rows are re-sorted by sample id."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: empty file")
    if lines[0] != "sample_id,label":
        raise FormatError(f"{path}: line 1: expected header 'sample_id,label', got {lines[0]!r}")
    ids: list[str] = []
    labels: list[int] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise FormatError(f"{path}: line {lineno}: expected 2 columns, got {len(parts)}")
        try:
            labels.append(int(parts[1]))
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: non-integer label") from None
        ids.append(parts[0])
    if not labels:
        raise FormatError(f"{path}: no data rows")
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    return LabelVector(
        task,
        tuple(ids[i] for i in order),
        np.asarray(labels, dtype=np.int64)[order],
    )


def save_labels(labels: LabelVector, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["sample_id,label"]
    for sid, lab in zip(labels.sample_ids, labels.labels):
        lines.append(f"{sid},{int(lab)}")
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(lines) + "\n")


def concat_features(
    matrices: Sequence[PredictionMatrix], group: Sequence[PredictorId]
) -> FeatureMatrix:
    """Concatenate the group members' probability columns, in group order.

    Member i of the group occupies the contiguous column block
    ``[i*C, (i+1)*C)``; permuting the group permutes the blocks.
    """
    if not group:
        raise ConfigError("group must name at least one predictor")
    by_id: dict[str, PredictionMatrix] = {}
    for m in matrices:
        if m.predictor in by_id:
            raise ConfigError(f"predictor {m.predictor!r} supplied more than once")
        by_id[m.predictor] = m
    missing = [p for p in group if p not in by_id]
    if missing:
        raise MissingPredictorError(
            "missing predictor(s): " + ", ".join(repr(p) for p in missing)
        )
    picked = [by_id[p] for p in group]
    ensure_aligned(picked)
    c = picked[0].task.class_count
    features = np.concatenate([m.probs for m in picked], axis=1)
    origin = tuple((p, k) for p in group for k in range(c))
    return FeatureMatrix(picked[0].sample_ids, features, origin)


def argmax_labels(matrix: PredictionMatrix) -> LabelVector:
    """Top-1 class per row; ties resolve to the lowest class index."""
    return LabelVector(
        matrix.task,
        matrix.sample_ids,
        np.argmax(matrix.probs, axis=1).astype(np.int64),
    )
