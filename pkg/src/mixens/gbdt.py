"""Second-order gradient tree boosting for multiclass classification.

One regression tree per class per round, fit to the first and second
derivatives of softmax cross-entropy at the current logits.  Split search is
exact greedy: every feature, every midpoint between consecutive distinct
sorted values, scored by the L2-regularized gain

    gain = 1/2 * [GL^2/(HL+lambda) + GR^2/(HR+lambda) - (GL+GR)^2/(HL+HR+lambda)] - gamma

with ties broken by lowest feature index, then lowest threshold.  Leaves carry
w = -G/(H+lambda); the learning rate scales tree outputs at accumulation time.
There is no subsampling, so fitting is a pure function of its inputs and the
whole pipeline stays bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .core import FeatureMatrix, LabelVector, PredictionMatrix, TaskSpec
from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    ShapeError,
    ValidationError,
)

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GbdtParams:
    """Boosting hyperparameters.

    ``seed`` is reserved for future stochastic variants; the exact greedy
    builder draws no randomness.  ``rounds=0`` is permitted and yields the
    uniform base model, which keeps the degenerate case testable.
    """

    rounds: int = 50
    max_depth: int = 3
    learning_rate: float = 0.1
    l2_lambda: float = 1.0
    gain_gamma: float = 0.0
    min_hessian_sum: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")
        if self.l2_lambda < 0.0:
            raise ConfigError("l2_lambda must be >= 0")
        if self.gain_gamma < 0.0:
            raise ConfigError("gain_gamma must be >= 0")
        if self.min_hessian_sum < 0.0:
            raise ConfigError("min_hessian_sum must be >= 0")

    def to_obj(self) -> dict:
        return {
            "rounds": self.rounds,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "l2_lambda": self.l2_lambda,
            "gain_gamma": self.gain_gamma,
            "min_hessian_sum": self.min_hessian_sum,
            "seed": self.seed,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "GbdtParams":
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown booster parameter(s): {sorted(unknown)}")
        return cls(**known)


@dataclass(frozen=True)
class Leaf:
    weight: float


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


def softmax(logits, axis: int = -1) -> np.ndarray:
    """Max-shifted softmax; rows sum to one and large logits cannot overflow."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def grad_hess(probs, true_class: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class first/second derivatives of cross-entropy w.r.t. the logits."""
    p = np.asarray(probs, dtype=np.float64)
    c = p.shape[-1]
    if not 0 <= true_class < c:
        raise IndexError(f"true_class {true_class} out of range for {c} classes")
    g = p.copy()
    g[true_class] -= 1.0
    h = p * (1.0 - p)
    return g, h


def split_gain(gl: float, hl: float, gr: float, hr: float, params: GbdtParams) -> float:
    lam = params.l2_lambda
    return 0.5 * (
        gl * gl / (hl + lam)
        + gr * gr / (hr + lam)
        - (gl + gr) * (gl + gr) / (hl + hr + lam)
    ) - params.gain_gamma


def _leaf(g: np.ndarray, h: np.ndarray, lam: float) -> Leaf:
    return Leaf(float(-g.sum() / (h.sum() + lam)))


def _find_best_split(x, g, h, lam, gamma):
    """Best (gain, feature, threshold) over all candidates, or None.

    Vectorized over features: per column, prefix sums over the sorted order
    give every left/right statistic at once.  First-occurrence argmax yields
    the lowest threshold within a feature and then the lowest feature index.
    """
    n, d = x.shape
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    gl = np.cumsum(g[order], axis=0)
    hl = np.cumsum(h[order], axis=0)
    gt = gl[-1]
    ht = hl[-1]
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    gl = gl[:-1]
    hl = hl[:-1]
    gr = gt - gl
    hr = ht - hl
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = 0.5 * (
            gl * gl / (hl + lam) + gr * gr / (hr + lam) - gt * gt / (ht + lam)
        ) - gamma
    gains[~valid] = -np.inf
    gains[~np.isfinite(gains)] = -np.inf
    pos = np.argmax(gains, axis=0)
    per_feature = gains[pos, np.arange(d)]
    j = int(np.argmax(per_feature))
    gain = float(per_feature[j])
    if not np.isfinite(gain):
        return None
    i = int(pos[j])
    return gain, j, float((xs[i, j] + xs[i + 1, j]) / 2.0)


def _grow(x, g, h, depth, params: GbdtParams) -> TreeNode:
    if depth >= params.max_depth or x.shape[0] < 2:
        return _leaf(g, h, params.l2_lambda)
    found = _find_best_split(x, g, h, params.l2_lambda, params.gain_gamma)
    if found is None or found[0] <= 0.0:
        return _leaf(g, h, params.l2_lambda)
    _, j, t = found
    left = x[:, j] < t
    if (
        h[left].sum() < params.min_hessian_sum
        or h[~left].sum() < params.min_hessian_sum
    ):
        return _leaf(g, h, params.l2_lambda)
    return Split(
        j,
        t,
        _grow(x[left], g[left], h[left], depth + 1, params),
        _grow(x[~left], g[~left], h[~left], depth + 1, params),
    )


def build_tree(features, g, h, params: GbdtParams) -> TreeNode:
    """Fit one regression tree to per-sample gradients and hessians."""
    x = features.features if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("features must be a 2-d array")
    if x.shape[0] == 0:
        raise DegenerateInputError("cannot grow a tree on an empty sample set")
    if g.shape != (x.shape[0],) or h.shape != (x.shape[0],):
        raise ShapeError("g and h must be aligned with the feature rows")
    if np.any(h < 0.0):
        raise ValidationError("hessians must be nonnegative")
    return _grow(x, g, h, 0, params)


def tree_values(node: TreeNode, x) -> np.ndarray:
    """Evaluate a tree on every row; routing is strict: feature < threshold goes left."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.shape[0], dtype=np.float64)
    stack = [(node, np.arange(x.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if isinstance(nd, Leaf):
            out[idx] = nd.weight
        else:
            go_left = x[idx, nd.feature_index] < nd.threshold
            stack.append((nd.left, idx[go_left]))
            stack.append((nd.right, idx[~go_left]))
    return out


def _group_from_origin(origin, class_count: int) -> tuple[str, ...]:
    group: list[str] = []
    for p, _ in origin:
        if not group or group[-1] != p:
            group.append(p)
    if len(set(group)) != len(group):
        raise ConfigError("feature columns are not contiguous per-predictor blocks")
    expected = tuple((p, k) for p in group for k in range(class_count))
    if tuple(origin) != expected:
        raise ConfigError("feature columns are not per-predictor probability blocks")
    return tuple(group)


@dataclass(frozen=True)
class BoostedClassifier:
    """A fitted multiclass boosted-tree ensemble over probability features."""

    task: TaskSpec
    group: tuple[str, ...]
    params: GbdtParams
    trees: tuple[tuple[TreeNode, ...], ...]
    base_score: float = 0.0

    @property
    def feature_count(self) -> int:
        return len(self.group) * self.task.class_count

    def logits(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.full((x.shape[0], self.task.class_count), self.base_score)
        for round_trees in self.trees:
            for k, tree in enumerate(round_trees):
                out[:, k] += self.params.learning_rate * tree_values(tree, x)
        return out


def fit(features: FeatureMatrix, labels: LabelVector, params: GbdtParams) -> BoostedClassifier:
    """Train a boosted classifier on concatenated probability features.

    Each round recomputes class probabilities from the accumulated logits,
    then grows one tree per class on that round's gradients.  base_score is 0,
    so a 0-round model predicts the uniform distribution.
    """
    if features.sample_ids != labels.sample_ids:
        raise AlignmentError("features and labels do not cover the same sample ids")
    c = labels.task.class_count
    if c < 2:
        raise ConfigError("boosting needs at least two classes")
    group = _group_from_origin(features.column_origin, c)
    x = features.features
    y = labels.labels
    n = x.shape[0]
    logits = np.zeros((n, c), dtype=np.float64)
    onehot = np.zeros((n, c), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0
    all_trees: list[tuple[TreeNode, ...]] = []
    for _ in range(params.rounds):
        p = softmax(logits, axis=1)
        gm = p - onehot
        hm = p * (1.0 - p)
        round_trees: list[TreeNode] = []
        for k in range(c):
            tree = _grow(x, gm[:, k], hm[:, k], 0, params)
            round_trees.append(tree)
            logits[:, k] += params.learning_rate * tree_values(tree, x)
        all_trees.append(tuple(round_trees))
    return BoostedClassifier(labels.task, group, params, tuple(all_trees), 0.0)


def predict_proba(model: BoostedClassifier, features: FeatureMatrix) -> PredictionMatrix:
    """Softmax of accumulated logits, emitted as a prediction matrix."""
    if features.n_features != model.feature_count:
        raise ShapeError(
            f"model expects {model.feature_count} features, got {features.n_features}"
        )
    probs = softmax(model.logits(features.features), axis=1)
    name = "boost(" + ",".join(model.group) + ")"
    return PredictionMatrix(name, model.task, features.sample_ids, probs)


def mean_log_loss(probs, labels) -> float:
    """Mean negative log-probability of the true class (natural log)."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    picked = np.clip(p[np.arange(p.shape[0]), y], 1e-300, None)
    return float(-np.mean(np.log(picked)))


def _node_to_obj(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"kind": "leaf", "weight": node.weight}
    return {
        "kind": "split",
        "feature_index": node.feature_index,
        "threshold": node.threshold,
        "left": _node_to_obj(node.left),
        "right": _node_to_obj(node.right),
    }


def _node_from_obj(obj: dict) -> TreeNode:
    kind = obj.get("kind")
    if kind == "leaf":
        return Leaf(float(obj["weight"]))
    if kind == "split":
        return Split(
            int(obj["feature_index"]),
            float(obj["threshold"]),
            _node_from_obj(obj["left"]),
            _node_from_obj(obj["right"]),
        )
    raise FormatError(f"unknown tree node kind {kind!r}")


def model_to_json(model: BoostedClassifier) -> str:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "task": {"task_id": model.task.task_id, "class_count": model.task.class_count},
        "group": list(model.group),
        "params": model.params.to_obj(),
        "base_score": model.base_score,
        "trees": [[_node_to_obj(t) for t in round_trees] for round_trees in model.trees],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def model_from_json(text: str) -> BoostedClassifier:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid model JSON: {exc}") from None
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise FormatError(
            f"unsupported model format_version {payload.get('format_version')!r}"
        )
    task = TaskSpec(payload["task"]["task_id"], int(payload["task"]["class_count"]))
    trees = tuple(
        tuple(_node_from_obj(t) for t in round_trees) for round_trees in payload["trees"]
    )
    return BoostedClassifier(
        task,
        tuple(payload["group"]),
        GbdtParams.from_obj(payload["params"]),
        trees,
        float(payload["base_score"]),
    )


def save_model(model: BoostedClassifier, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model_to_json(model), encoding="utf-8")


def load_model(path: str | Path) -> BoostedClassifier:
    return model_from_json(Path(path).read_text(encoding="utf-8"))


def iter_leaves(node: TreeNode, x) -> list[tuple[Leaf, np.ndarray]]:
    """(leaf, row indices routed to it) pairs, for diagnostics and tests."""
    x = np.asarray(x, dtype=np.float64)
    out: list[tuple[Leaf, np.ndarray]] = []
    stack = [(node, np.arange(x.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if isinstance(nd, Leaf):
            out.append((nd, idx))
        else:
            go_left = x[idx, nd.feature_index] < nd.threshold
            stack.append((nd.left, idx[go_left]))
            stack.append((nd.right, idx[~go_left]))
    return out
