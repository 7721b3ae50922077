"""Synthetic base predictors with a controllable accuracy ladder and error correlation.

Stands in for a shelf of real image classifiers: each generated predictor hits
a target Top-1 accuracy, and predictors err together to a tunable degree.
Correlation works through a shared per-sample error pattern (a correctness
draw plus a wrong-label proposal): with probability ``correlation`` a
predictor reuses the shared pattern on a sample, otherwise it uses its own
independent draws.  Two predictors with the same target accuracy and
``correlation=1`` therefore emit identical label vectors.

Probability rows place ``sharpness`` units on the predicted class and one unit
on every other class, all divided by ``sharpness + C - 1``.  With probability
``hint_prob`` an *erroneous* row instead gives the true class two units (the
near-miss signature of real classifiers: the truth tends to sit high in the
ranking even when the top pick is wrong).  The hint is what gives ensembles
headroom over the best single predictor, and it needs at least three classes.

Seed derivation is fixed and documented: with suite seed ``s``, labels use
``SeedSequence([s, 0])``, the shared error pattern ``SeedSequence([s, 1])``,
predictor ``i`` (0-based) ``SeedSequence([s, 2, i])``, and task ``t`` of a
multi-task fixture reseeds the suite with ``SeedSequence([s, 3, t])``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import LabelVector, PredictionMatrix, TaskSpec
from .errors import ConfigError

DEFAULT_ACCURACY_HIGH = 0.92
DEFAULT_ACCURACY_LOW = 0.86
DEFAULT_PREDICTOR_COUNT = 15


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic task's predictor suite."""

    n_samples: int
    class_count: int
    predictor_accuracies: tuple[float, ...]
    correlation: float = 0.5
    sharpness: float = 6.0
    hint_prob: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.class_count < 2:
            raise ConfigError("class_count must be >= 2")
        accs = tuple(float(a) for a in self.predictor_accuracies)
        if not accs:
            raise ConfigError("at least one predictor accuracy is required")
        floor = 1.0 / self.class_count
        for a in accs:
            if not floor < a <= 1.0:
                raise ConfigError(
                    f"accuracies must lie in (1/{self.class_count}, 1], got {a!r}"
                )
        if any(a < b for a, b in zip(accs, accs[1:])):
            raise ConfigError("predictor accuracies must be sorted descending")
        object.__setattr__(self, "predictor_accuracies", accs)
        if not 0.0 <= self.correlation <= 1.0:
            raise ConfigError("correlation must be in [0, 1]")
        if self.sharpness <= 0.0:
            raise ConfigError("sharpness must be positive")
        if not 0.0 <= self.hint_prob <= 1.0:
            raise ConfigError("hint_prob must be in [0, 1]")
        if self.hint_prob > 0.0 and self.sharpness <= 2.0:
            raise ConfigError("hint_prob > 0 requires sharpness > 2")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")


def default_spec(seed: int, n_samples: int = 5000, class_count: int = 5) -> SynthSpec:
    """The standard 15-predictor ladder spanning 0.92 down to 0.86."""
    accs = np.linspace(DEFAULT_ACCURACY_HIGH, DEFAULT_ACCURACY_LOW, DEFAULT_PREDICTOR_COUNT)
    return SynthSpec(n_samples, class_count, tuple(float(a) for a in accs), seed=seed)


def predictor_ids(count: int) -> tuple[str, ...]:
    return tuple(f"M{i + 1}" for i in range(count))


def _child_seed(*keys: int) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0])


def _sample_ids(n: int) -> tuple[str, ...]:
    width = len(str(n - 1)) if n > 1 else 1
    return tuple(f"s{i:0{width}d}" for i in range(n))


@dataclass(frozen=True)
class SharedErrorPattern:
    """Per-sample correctness draws and wrong-label proposals shared by a suite."""

    u: np.ndarray
    wrong: np.ndarray


def gen_labels(spec: SynthSpec, task_id: str = "t0") -> LabelVector:
    """Uniform class labels, deterministic in the spec seed."""
    task = TaskSpec(task_id, spec.class_count)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    labels = rng.integers(0, spec.class_count, spec.n_samples, dtype=np.int64)
    return LabelVector(task, _sample_ids(spec.n_samples), labels)


def gen_shared_pattern(labels: LabelVector, seed: int) -> SharedErrorPattern:
    """Draw the suite-wide error pattern: u then wrong-label offsets."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    n = labels.n_samples
    c = labels.task.class_count
    u = rng.random(n)
    offsets = rng.integers(1, c, n)
    wrong = (labels.labels + offsets) % c
    return SharedErrorPattern(u, wrong)


def gen_predictor(
    labels: LabelVector,
    target_acc: float,
    correlation: float,
    sharpness: float,
    seed: int,
    shared: SharedErrorPattern,
    predictor_id: str = "M1",
    hint_prob: float = 0.0,
) -> PredictionMatrix:
    """Generate one predictor's probability matrix against the given labels.

    Draw order from the predictor rng is fixed: reuse decisions, own
    correctness draws, own wrong-label offsets, hint draws.
    """
    n = labels.n_samples
    c = labels.task.class_count
    y = labels.labels
    if not 1.0 / c < target_acc <= 1.0:
        raise ConfigError(f"target_acc must be in (1/{c}, 1], got {target_acc!r}")
    rng = np.random.default_rng(seed)
    reuse = rng.random(n) < correlation
    own_u = rng.random(n)
    own_wrong = (y + rng.integers(1, c, n)) % c
    hinted = rng.random(n) < hint_prob
    u = np.where(reuse, shared.u, own_u)
    wrong = np.where(reuse, shared.wrong, own_wrong)
    correct = u < target_acc
    pred = np.where(correct, y, wrong)

    unit = 1.0 / (sharpness + c - 1)
    probs = np.full((n, c), unit)
    probs[np.arange(n), pred] = sharpness * unit
    if c >= 3:
        rows = np.flatnonzero(~correct & hinted)
        if rows.size:
            other = (1.0 - (sharpness + 2.0) * unit) / (c - 2)
            probs[rows, :] = other
            probs[rows, pred[rows]] = sharpness * unit
            probs[rows, y[rows]] = 2.0 * unit
    return PredictionMatrix(predictor_id, labels.task, labels.sample_ids, probs)


def gen_suite(
    spec: SynthSpec, task_id: str = "t0"
) -> tuple[LabelVector, list[PredictionMatrix]]:
    """One task's labels plus its full predictor ladder, best predictor first."""
    labels = gen_labels(spec, task_id)
    shared = gen_shared_pattern(labels, spec.seed)
    ids = predictor_ids(len(spec.predictor_accuracies))
    matrices = [
        gen_predictor(
            labels,
            acc,
            spec.correlation,
            spec.sharpness,
            _child_seed(spec.seed, 2, i),
            shared,
            predictor_id=ids[i],
            hint_prob=spec.hint_prob,
        )
        for i, acc in enumerate(spec.predictor_accuracies)
    ]
    return labels, matrices


def gen_fixture(
    spec: SynthSpec, task_ids
) -> dict[str, tuple[LabelVector, list[PredictionMatrix]]]:
    """Independent suites for several tasks, each reseeded from the spec seed."""
    out: dict[str, tuple[LabelVector, list[PredictionMatrix]]] = {}
    for t, task_id in enumerate(task_ids):
        task_spec = dataclasses.replace(spec, seed=_child_seed(spec.seed, 3, t))
        out[str(task_id)] = gen_suite(task_spec, str(task_id))
    return out
