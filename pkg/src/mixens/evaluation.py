"""Accuracy metrics and deterministic, stratified data-splitting protocols.

The headline metric is the unweighted mean of per-task Top-1 accuracies (task
sizes deliberately do not weight it).  All splits are pure functions of their
inputs and a seed; shuffling uses numpy's PCG64 generator (the default of
``numpy.random.default_rng``), a named 64-bit PRNG with published reference
outputs, so splits reproduce across machines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import LabelVector, format_probability
from .errors import AlignmentError, ConfigError, DegenerateInputError, ValidationError

BASIC_PRECISION_KEY = "__basic_precision__"


def _ensure_same_samples(a: LabelVector, b: LabelVector) -> None:
    if a.task != b.task:
        raise AlignmentError(
            f"task mismatch: {a.task.task_id!r} vs {b.task.task_id!r}"
        )
    if a.sample_ids != b.sample_ids:
        raise AlignmentError("label vectors do not cover the same sample ids")


def top1_accuracy(pred: LabelVector, truth: LabelVector) -> float:
    """Fraction of samples whose predicted label equals the true label."""
    _ensure_same_samples(pred, truth)
    return float(np.mean(pred.labels == truth.labels))


def basic_precision(per_task) -> float:
    """Unweighted arithmetic mean of per-task accuracies."""
    if isinstance(per_task, Mapping):
        values = [float(v) for _, v in sorted(per_task.items())]
    else:
        values = [float(v) for v in per_task]
    if not values:
        raise ConfigError("basic precision needs at least one task accuracy")
    return sum(values) / len(values)


def disagreement(a: LabelVector, b: LabelVector) -> float:
    """Fraction of samples on which the two label vectors differ."""
    _ensure_same_samples(a, b)
    return float(np.mean(a.labels != b.labels))


@dataclass(frozen=True)
class MetricsReport:
    """Per-task Top-1 accuracies plus their unweighted mean."""

    per_task_accuracy: dict

    def __post_init__(self) -> None:
        clean = {str(k): float(v) for k, v in self.per_task_accuracy.items()}
        if not clean:
            raise ConfigError("a metrics report needs at least one task")
        object.__setattr__(self, "per_task_accuracy", clean)

    @property
    def basic_precision(self) -> float:
        return basic_precision(self.per_task_accuracy)

    def to_csv(self) -> str:
        lines = ["task_id,accuracy"]
        for task_id in sorted(self.per_task_accuracy):
            lines.append(f"{task_id},{format_probability(self.per_task_accuracy[task_id])}")
        lines.append(f"{BASIC_PRECISION_KEY},{format_probability(self.basic_precision)}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "per_task_accuracy": dict(sorted(self.per_task_accuracy.items())),
            "basic_precision": self.basic_precision,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class FoldAssignment:
    """A k-fold partition: per-sample fold indices in [0, k)."""

    k: int
    fold_of: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        fold_of = np.array(self.fold_of, dtype=np.int64)
        if fold_of.ndim != 1 or fold_of.shape[0] == 0:
            raise ValidationError("fold_of must be a nonempty vector")
        if np.any(fold_of < 0) or np.any(fold_of >= self.k):
            raise ValidationError("fold indices must lie in [0, k)")
        counts = np.bincount(fold_of, minlength=self.k)
        if fold_of.shape[0] >= self.k and np.any(counts == 0):
            raise ValidationError("every fold must be nonempty when n >= k")
        if counts.max() - counts.min() > 1:
            raise ValidationError("fold sizes must differ by at most one")
        fold_of.setflags(write=False)
        object.__setattr__(self, "fold_of", fold_of)

    def members(self, fold: int) -> np.ndarray:
        """Positions assigned to the given fold."""
        return np.flatnonzero(self.fold_of == fold)

    def complement(self, fold: int) -> np.ndarray:
        """Positions outside the given fold."""
        return np.flatnonzero(self.fold_of != fold)


def _apportion_held(labels: np.ndarray, held_total: int) -> dict[int, int]:
    """Largest-remainder allocation of the held count across classes.

    Caps keep at least one training sample in every class that has two or
    more; if the caps bind harder than the quota, the held count shrinks.
    """
    classes, counts = np.unique(labels, return_counts=True)
    n = int(labels.shape[0])
    quotas = held_total * counts / n
    held = {int(c): int(math.floor(q)) for c, q in zip(classes, quotas)}
    remainders = sorted(
        ((float(q - math.floor(q)), int(c)) for c, q in zip(classes, quotas)),
        key=lambda t: (-t[0], t[1]),
    )
    short = held_total - sum(held.values())
    for _, c in remainders[: max(short, 0)]:
        held[c] += 1
    caps = {
        int(c): (int(cnt) - 1 if cnt >= 2 else int(cnt))
        for c, cnt in zip(classes, counts)
    }
    for c in held:
        if held[c] > caps[c]:
            held[c] = caps[c]
    deficit = held_total - sum(held.values())
    while deficit > 0:
        spare = [(caps[c] - held[c], c) for c in held if held[c] < caps[c]]
        if not spare:
            break
        _, c = max(spare, key=lambda t: (t[0], -t[1]))
        held[c] += 1
        deficit -= 1
    return held


def holdout_split(
    sample_ids: Sequence[str],
    labels,
    fraction: float,
    seed: int,
    stratified: bool = True,
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Split sample ids into (train, held); held count is round(fraction * n).

    Stratified by class by default.  Deterministic given the seed; both halves
    come back sorted.
    """
    ids = list(sample_ids)
    y = np.asarray(labels, dtype=np.int64)
    n = len(ids)
    if n == 0:
        raise DegenerateInputError("cannot split an empty sample set")
    if y.shape[0] != n:
        raise AlignmentError("labels length does not match sample_ids")
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"fraction must be in (0, 1), got {fraction!r}")
    if fraction * n < 1.0:
        raise ConfigError(f"fraction * n must be at least 1, got {fraction * n!r}")
    held_total = int(math.floor(fraction * n + 0.5))
    rng = np.random.default_rng(seed)
    held_positions: list[int] = []
    if stratified:
        per_class = _apportion_held(y, held_total)
        for c in sorted(per_class):
            pos = np.flatnonzero(y == c)
            perm = rng.permutation(pos.shape[0])
            held_positions.extend(int(p) for p in pos[perm[: per_class[c]]])
    else:
        perm = rng.permutation(n)
        chosen = list(perm[:held_total])
        held_by_class: dict[int, list[int]] = {}
        for p in chosen:
            held_by_class.setdefault(int(y[p]), []).append(int(p))
        counts = np.bincount(y, minlength=int(y.max()) + 1)
        for c, members in held_by_class.items():
            if counts[c] >= 2 and len(members) == counts[c]:
                members.pop()  # return the last-drawn one to training
        for members in held_by_class.values():
            held_positions.extend(members)
    held_set = set(held_positions)
    train_ids = tuple(sorted(ids[i] for i in range(n) if i not in held_set))
    held_ids = tuple(sorted(ids[i] for i in held_set))
    return train_ids, held_ids


def kfold_split(
    sample_ids: Sequence[str],
    labels,
    k: int,
    seed: int,
    stratified: bool = True,
) -> FoldAssignment:
    """Deal samples into k folds of near-equal size, optionally per class.

    Stratified dealing shuffles each class and assigns its members to
    consecutive folds, continuing the fold pointer across classes, which
    bounds both overall and per-class fold counts within one of each other.
    """
    ids = list(sample_ids)
    y = np.asarray(labels, dtype=np.int64)
    n = len(ids)
    if y.shape[0] != n:
        raise AlignmentError("labels length does not match sample_ids")
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    if k > n:
        raise ConfigError(f"k={k} exceeds the sample count {n}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    if stratified:
        offset = 0
        for c in np.unique(y):
            pos = np.flatnonzero(y == c)
            pos = pos[rng.permutation(pos.shape[0])]
            fold_of[pos] = (offset + np.arange(pos.shape[0])) % k
            offset = (offset + pos.shape[0]) % k
    else:
        perm = rng.permutation(n)
        fold_of[perm] = np.arange(n) % k
    return FoldAssignment(k, fold_of, seed)
