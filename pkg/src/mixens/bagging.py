"""Weighted soft voting over prediction matrices, with weight tuning.

Voting is over probability vectors, not hard labels: the bagged output is the
weight-normalized sum of per-predictor probability rows, so it is itself a
valid prediction matrix and can feed a second ensemble layer.  Accumulation
runs in lexicographic predictor-id order, which makes the result independent
of how the (matrix, weight) pairs were supplied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import LabelVector, PredictionMatrix, argmax_labels, ensure_aligned
from .errors import AlignmentError, ConfigError, DegenerateInputError

WEIGHT_SUM_TOL = 1e-9

EQUAL = "equal"
ACCURACY_PROPORTIONAL = "accuracy"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class WeightMode:
    """How voting weights are derived: equal, accuracy-proportional, or given."""

    kind: str
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in (EQUAL, ACCURACY_PROPORTIONAL, EXPLICIT):
            raise ConfigError(f"unknown weight mode {self.kind!r}")
        if self.kind == EXPLICIT:
            if not self.weights:
                raise ConfigError("explicit weight mode needs a weight list")
            ws = tuple(float(w) for w in self.weights)
            if any(w < 0.0 for w in ws):
                raise ConfigError("explicit weights must be nonnegative")
            if not any(w > 0.0 for w in ws):
                raise ConfigError("explicit weights must not be all zero")
            object.__setattr__(self, "weights", ws)
        elif self.weights is not None:
            raise ConfigError(f"weight mode {self.kind!r} takes no weight list")

    @classmethod
    def equal(cls) -> "WeightMode":
        return cls(EQUAL)

    @classmethod
    def accuracy_proportional(cls) -> "WeightMode":
        return cls(ACCURACY_PROPORTIONAL)

    @classmethod
    def explicit(cls, weights: Sequence[float]) -> "WeightMode":
        return cls(EXPLICIT, tuple(float(w) for w in weights))

    def to_obj(self) -> dict:
        obj: dict = {"mode": self.kind}
        if self.kind == EXPLICIT:
            obj["weights"] = list(self.weights or ())
        return obj

    @classmethod
    def from_obj(cls, obj) -> "WeightMode":
        if isinstance(obj, str):
            return cls(obj)
        if not isinstance(obj, dict) or "mode" not in obj:
            raise ConfigError(f"weight mode must be a string or an object with 'mode': {obj!r}")
        kind = obj["mode"]
        if kind == EXPLICIT:
            return cls.explicit(obj.get("weights") or ())
        return cls(kind)


@dataclass(frozen=True)
class VotingWeights:
    """Nonnegative weights over a predictor set, stored normalized to sum 1."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        entries = tuple((str(p), float(w)) for p, w in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise DegenerateInputError("voting weights over an empty predictor set")
        ids = [p for p, _ in entries]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate predictor id in voting weights")
        ws = np.asarray([w for _, w in entries], dtype=np.float64)
        if np.any(ws < 0.0):
            raise ConfigError("voting weights must be nonnegative")
        if not np.any(ws > 0.0):
            raise DegenerateInputError("voting weights must not be all zero")
        if abs(float(ws.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigError(
                f"voting weights must sum to 1 within {WEIGHT_SUM_TOL}, got {float(ws.sum())!r}"
            )

    @classmethod
    def from_raw(cls, pairs) -> "VotingWeights":
        """Normalize raw nonnegative weights so they sum to one."""
        pairs = [(str(p), float(w)) for p, w in pairs]
        if not pairs:
            raise DegenerateInputError("no predictors to weight")
        if any(w < 0.0 for _, w in pairs):
            raise ConfigError("raw weights must be nonnegative")
        total = sum(w for _, w in pairs)
        if total <= 0.0:
            raise DegenerateInputError("raw weights sum to zero")
        return cls(tuple((p, w / total) for p, w in pairs))

    @property
    def predictor_ids(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.entries)

    def weight_of(self, predictor: str) -> float:
        for p, w in self.entries:
            if p == predictor:
                return w
        raise KeyError(predictor)


def tune_weights(
    matrices: Sequence[PredictionMatrix],
    labels: LabelVector | None,
    mode: WeightMode,
) -> VotingWeights:
    """Derive voting weights for the given predictors.

    Equal gives 1/n each; accuracy-proportional weights each predictor by its
    Top-1 accuracy against ``labels``; explicit normalizes the supplied list.
    """
    if not matrices:
        raise DegenerateInputError("no matrices to tune weights for")
    ids = [m.predictor for m in matrices]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate predictor id among matrices")
    ensure_aligned(matrices)
    if mode.kind == EQUAL:
        raw = [1.0] * len(matrices)
    elif mode.kind == ACCURACY_PROPORTIONAL:
        if labels is None:
            raise ConfigError("accuracy-proportional weighting requires labels")
        if labels.sample_ids != matrices[0].sample_ids:
            raise AlignmentError("labels are not aligned with the matrices")
        raw = []
        for m in matrices:
            pred = argmax_labels(m)
            raw.append(float(np.mean(pred.labels == labels.labels)))
        if not any(a > 0.0 for a in raw):
            raise DegenerateInputError("all predictor accuracies are zero")
    else:
        ws = mode.weights or ()
        if len(ws) != len(matrices):
            raise ConfigError(
                f"explicit weight list has {len(ws)} entries for {len(matrices)} predictors"
            )
        raw = list(ws)
    return VotingWeights.from_raw(zip(ids, raw))


def bag_predict(
    matrices: Sequence[PredictionMatrix], weights: VotingWeights
) -> PredictionMatrix:
    """Weighted soft vote: output rows are the weighted sum of input rows."""
    if not matrices:
        raise DegenerateInputError("no matrices to bag")
    by_id: dict[str, PredictionMatrix] = {}
    for m in matrices:
        if m.predictor in by_id:
            raise ConfigError(f"predictor {m.predictor!r} supplied more than once")
        by_id[m.predictor] = m
    if set(by_id) != set(weights.predictor_ids):
        raise ConfigError(
            f"weights cover {sorted(weights.predictor_ids)} but matrices provide {sorted(by_id)}"
        )
    ensure_aligned(matrices)
    ref = matrices[0]
    acc = np.zeros_like(ref.probs)
    for pid, w in sorted(weights.entries):
        acc = acc + w * by_id[pid].probs
    name = "bag(" + ",".join(weights.predictor_ids) + ")"
    return PredictionMatrix(name, ref.task, ref.sample_ids, acc)
