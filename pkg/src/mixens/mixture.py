"""Two-layer ensemble orchestration.

Layer 1 produces K boosted group predictors (each trained on the concatenated
probability columns of its members) plus one bagged predictor over the
strongest members.  Layer 2 is plain weighted voting over those K+1 outputs.
Group fits are independent: adding or removing a group never perturbs the
others, and a K=0 mixture degenerates exactly to first-layer bagging.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .bagging import VotingWeights, WeightMode, bag_predict, tune_weights
from .core import (
    LabelVector,
    PredictionMatrix,
    TaskSpec,
    argmax_labels,
    concat_features,
)
from .errors import ConfigError, FormatError, MissingPredictorError
from .evaluation import basic_precision, top1_accuracy
from .gbdt import (
    BoostedClassifier,
    GbdtParams,
    fit as gbdt_fit,
    load_model,
    predict_proba,
    save_model,
)

MIXTURE_FORMAT_VERSION = 1
FIRST_LAYER_BAG_ID = "bag"

_NAME_RE = re.compile(r"^[A-Za-z0-9_-]+$")

# Two booster presets stand in for using two distinct boosting systems:
# a deeper, slow-learning configuration and a shallow, fast-learning one.
PRESETS: dict[str, GbdtParams] = {
    "deep-slow": GbdtParams(rounds=100, max_depth=4, learning_rate=0.05),
    "shallow-fast": GbdtParams(rounds=60, max_depth=2, learning_rate=0.2),
}


@dataclass(frozen=True)
class GroupSpec:
    """A named predictor group and the booster settings used to learn from it."""

    name: str
    members: tuple[str, ...]
    booster_params: GbdtParams = GbdtParams()

    def __post_init__(self) -> None:
        if not _NAME_RE.match(self.name or ""):
            raise ConfigError(
                f"group name must match [A-Za-z0-9_-]+, got {self.name!r}"
            )
        if self.name == FIRST_LAYER_BAG_ID:
            raise ConfigError(f"group name {FIRST_LAYER_BAG_ID!r} is reserved")
        members = tuple(str(m) for m in self.members)
        if not members:
            raise ConfigError(f"group {self.name!r} has no members")
        if len(set(members)) != len(members):
            raise ConfigError(f"group {self.name!r} has duplicate members")
        object.__setattr__(self, "members", members)


@dataclass(frozen=True)
class MixtureConfig:
    """Wiring of the two layers: bag membership, groups, and weight modes."""

    bag_members: tuple[str, ...]
    bag_weight_mode: WeightMode = WeightMode.equal()
    groups: tuple[GroupSpec, ...] = ()
    second_layer_mode: WeightMode = WeightMode.equal()

    def __post_init__(self) -> None:
        members = tuple(str(m) for m in self.bag_members)
        if not members:
            raise ConfigError("bag_members must be nonempty")
        if len(set(members)) != len(members):
            raise ConfigError("bag_members has duplicates")
        object.__setattr__(self, "bag_members", members)
        groups = tuple(self.groups)
        names = [g.name for g in groups]
        if len(set(names)) != len(names):
            raise ConfigError("group names must be unique")
        object.__setattr__(self, "groups", groups)

    @property
    def k(self) -> int:
        return len(self.groups)


def default_mixture_config() -> MixtureConfig:
    """The stock layout: bag the top seven, boost three overlapping groups."""
    return MixtureConfig(
        bag_members=tuple(f"M{i}" for i in range(1, 8)),
        groups=(
            GroupSpec("boost_m1_m6", tuple(f"M{i}" for i in range(1, 7)), PRESETS["deep-slow"]),
            GroupSpec("boost_m1_m5", tuple(f"M{i}" for i in range(1, 6)), PRESETS["shallow-fast"]),
            GroupSpec("boost_m8_m12", tuple(f"M{i}" for i in range(8, 13)), PRESETS["deep-slow"]),
        ),
    )


@dataclass(frozen=True)
class MixtureModel:
    """Fitted two-layer ensemble for one task."""

    task: TaskSpec
    first_layer_bag: VotingWeights
    boosted: tuple[BoostedClassifier, ...]
    second_layer: VotingWeights

    def __post_init__(self) -> None:
        object.__setattr__(self, "boosted", tuple(self.boosted))
        entries = self.second_layer.entries
        if len(entries) != len(self.boosted) + 1:
            raise ConfigError(
                "second layer must weight the bag plus each boosted group exactly once"
            )
        if entries[0][0] != FIRST_LAYER_BAG_ID:
            raise ConfigError(
                f"first second-layer entry must be {FIRST_LAYER_BAG_ID!r}"
            )

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.second_layer.entries[1:])


def _index_matrices(
    matrices: Sequence[PredictionMatrix] | Mapping[str, PredictionMatrix],
) -> dict[str, PredictionMatrix]:
    if isinstance(matrices, Mapping):
        return {str(k): v for k, v in matrices.items()}
    out: dict[str, PredictionMatrix] = {}
    for m in matrices:
        if m.predictor in out:
            raise ConfigError(f"predictor {m.predictor!r} supplied more than once")
        out[m.predictor] = m
    return out


def _pick(
    by_id: dict[str, PredictionMatrix], wanted: Sequence[str]
) -> list[PredictionMatrix]:
    missing = [p for p in wanted if p not in by_id]
    if missing:
        raise MissingPredictorError(
            "missing predictor(s): " + ", ".join(repr(p) for p in missing)
        )
    return [by_id[p] for p in wanted]


def fit_mixture(
    train_matrices: Sequence[PredictionMatrix] | Mapping[str, PredictionMatrix],
    train_labels: LabelVector,
    config: MixtureConfig,
) -> MixtureModel:
    """Fit both layers on the ensemble-training split.

    The bag weights, every group's booster, and the second-layer weights are
    all derived from the same training matrices and labels.
    """
    by_id = _index_matrices(train_matrices)
    bag_mats = _pick(by_id, config.bag_members)
    first = tune_weights(bag_mats, train_labels, config.bag_weight_mode)
    layer1 = [bag_predict(bag_mats, first).with_predictor(FIRST_LAYER_BAG_ID)]
    boosted: list[BoostedClassifier] = []
    for grp in config.groups:
        fm = concat_features(_pick(by_id, grp.members), grp.members)
        model = gbdt_fit(fm, train_labels, grp.booster_params)
        boosted.append(model)
        layer1.append(predict_proba(model, fm).with_predictor(grp.name))
    second = tune_weights(layer1, train_labels, config.second_layer_mode)
    return MixtureModel(train_labels.task, first, tuple(boosted), second)


def predict_mixture(
    model: MixtureModel,
    matrices: Sequence[PredictionMatrix] | Mapping[str, PredictionMatrix],
) -> PredictionMatrix:
    """Run both layers on new samples and emit the final probability matrix."""
    by_id = _index_matrices(matrices)
    bag_mats = _pick(by_id, model.first_layer_bag.predictor_ids)
    layer1 = [bag_predict(bag_mats, model.first_layer_bag).with_predictor(FIRST_LAYER_BAG_ID)]
    for name, bm in zip(model.group_names, model.boosted):
        fm = concat_features(_pick(by_id, bm.group), bm.group)
        layer1.append(predict_proba(bm, fm).with_predictor(name))
    return bag_predict(layer1, model.second_layer)


def sweep_bagging(
    matrices: Sequence[PredictionMatrix],
    labels: LabelVector,
    n_max: int,
) -> list[tuple[int, float]]:
    """Equal-weight bag of the top N for N = 1..n_max; matrices come best-first."""
    if n_max < 1 or n_max > len(matrices):
        raise ConfigError(
            f"n_max must be in [1, {len(matrices)}], got {n_max}"
        )
    out: list[tuple[int, float]] = []
    for n in range(1, n_max + 1):
        sub = list(matrices[:n])
        weights = tune_weights(sub, None, WeightMode.equal())
        bagged = bag_predict(sub, weights)
        out.append((n, top1_accuracy(argmax_labels(bagged), labels)))
    return out


def sweep_bagging_tasks(
    per_task: Mapping[str, tuple[Sequence[PredictionMatrix], LabelVector]],
    n_max: int,
) -> list[tuple[int, float]]:
    """Cross-task sweep: per N, the unweighted mean of per-task accuracies."""
    if not per_task:
        raise ConfigError("at least one task is required")
    curves = {
        task_id: dict(sweep_bagging(mats, labels, n_max))
        for task_id, (mats, labels) in per_task.items()
    }
    return [
        (n, basic_precision({t: curve[n] for t, curve in curves.items()}))
        for n in range(1, n_max + 1)
    ]


def save_mixture(model: MixtureModel, directory: str | Path) -> None:
    """Persist as a directory: mixture.json plus one model file per group."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    groups = []
    for name, bm in zip(model.group_names, model.boosted):
        model_file = f"group_{name}.json"
        save_model(bm, directory / model_file)
        groups.append({"name": name, "model_file": model_file})
    payload = {
        "format_version": MIXTURE_FORMAT_VERSION,
        "task": {"task_id": model.task.task_id, "class_count": model.task.class_count},
        "first_layer_bag": [[p, w] for p, w in model.first_layer_bag.entries],
        "second_layer": [[p, w] for p, w in model.second_layer.entries],
        "groups": groups,
    }
    (directory / "mixture.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_mixture(directory: str | Path) -> MixtureModel:
    directory = Path(directory)
    try:
        payload = json.loads((directory / "mixture.json").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid mixture JSON: {exc}") from None
    if payload.get("format_version") != MIXTURE_FORMAT_VERSION:
        raise FormatError(
            f"unsupported mixture format_version {payload.get('format_version')!r}"
        )
    task = TaskSpec(payload["task"]["task_id"], int(payload["task"]["class_count"]))
    boosted = tuple(
        load_model(directory / g["model_file"]) for g in payload["groups"]
    )
    return MixtureModel(
        task,
        VotingWeights(tuple((p, float(w)) for p, w in payload["first_layer_bag"])),
        boosted,
        VotingWeights(tuple((p, float(w)) for p, w in payload["second_layer"])),
    )
