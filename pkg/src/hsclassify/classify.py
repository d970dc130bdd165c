"""Multinomial softmax classifiers over embedding-plus-numeric features.

One model class serves every level of the code hierarchy: a flat model over
all 6-digit codes (with the reserved OTHERS class), a chapter model over
2-digit prefixes, per-chapter heading models, and a joint heading model used
by the conditional composition mode.

Training minimizes one-hot cross-entropy with an L2 penalty by mini-batch
gradient descent.  Shuffling is seeded and all arithmetic is float64, so a
fixed (dataset, config) pair reproduces the weight matrix bit for bit.

Hierarchical prediction composes two levels.  ``per_branch`` scores the
heading model trained on the winning chapter's rows and uses its softmax
directly; ``conditional`` divides a joint heading distribution by the chapter
probability and renormalizes over the chapter's headings.  The two modes are
deliberately independent code paths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embed import DimensionMismatchError
from .errors import HsClassifyError
from .preprocess import OTHERS


class SingleClassError(HsClassifyError):
    code = "SingleClass"


class NonFiniteLossError(HsClassifyError):
    code = "NonFiniteLoss"


class ZeroParentProbabilityError(HsClassifyError):
    code = "ZeroParentProbability"


class NoChildrenError(HsClassifyError):
    code = "NoChildren"


class MissingBranchModelError(HsClassifyError):
    code = "MissingBranchModel"


class ModelFormatError(HsClassifyError):
    code = "ModelFormat"


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 0.3
    epochs: int = 150
    batch_size: int = 32
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "l2": self.l2,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class SoftmaxModel:
    """K x (n_features + 1) weight matrix; last column is the bias."""

    weights: np.ndarray
    classes: list[str]
    level: int
    parent: str | None = None
    final_loss: float = 0.0
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        k = len(self.classes)
        if k < 2:
            raise SingleClassError("a softmax model needs at least two classes")
        if len(set(self.classes)) != k:
            raise ValueError("duplicate class labels")
        if self.weights.shape[0] != k:
            raise DimensionMismatchError(
                f"{k} classes but weight matrix has {self.weights.shape[0]} rows"
            )
        for label in self.classes:
            if label != OTHERS and len(label) != self.level:
                raise ValueError(f"label {label!r} does not match level {self.level}")

    @property
    def n_features(self) -> int:
        return self.weights.shape[1] - 1


@dataclass
class ConstantModel:
    """Degenerate branch with a single observed class; always predicts it."""

    label: str
    level: int
    parent: str | None = None

    @property
    def classes(self) -> list[str]:
        return [self.label]


@dataclass
class ClassDistribution:
    probs: dict[str, float]

    def __post_init__(self):
        total = sum(self.probs.values())
        if not self.probs or abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")
        if any(p < 0 or p > 1 for p in self.probs.values()):
            raise ValueError("probability outside [0, 1]")

    def __getitem__(self, label: str) -> float:
        return self.probs[label]

    def top(self, k: int) -> list[tuple[str, float]]:
        return sorted(self.probs.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


def argmax_class(dist: ClassDistribution) -> tuple[str, float]:
    """Highest-probability label; ties go to the lexicographically smallest."""
    label = min(dist.probs, key=lambda c: (-dist.probs[c], c))
    return label, dist.probs[label]


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def _with_bias(features: np.ndarray) -> np.ndarray:
    return np.concatenate([features, np.ones((*features.shape[:-1], 1))], axis=-1)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis (identical result, no overflow)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def predict_proba(model, x: np.ndarray) -> ClassDistribution:
    if isinstance(model, ConstantModel):
        return ClassDistribution({model.label: 1.0})
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.n_features:
        raise DimensionMismatchError(
            f"model expects {model.n_features} features, got {x.shape}"
        )
    probs = softmax(model.weights @ _with_bias(x))
    return ClassDistribution(dict(zip(model.classes, probs.tolist())))


def predict_proba_matrix(model: SoftmaxModel, features: np.ndarray) -> np.ndarray:
    """Batched scores, rows in dataset order, columns in model.classes order."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"model expects {model.n_features} features, got {features.shape[1]}"
        )
    return softmax(_with_bias(features) @ model.weights.T)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def loss_and_gradient(
    weights: np.ndarray,
    features: np.ndarray,
    label_idx: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy plus L2 on non-bias weights, with its gradient.

    Exposed separately so tests can check the analytic gradient against
    central finite differences of the loss alone.
    """
    xb = _with_bias(features)  # N x (d+1)
    n = features.shape[0]
    rows = np.arange(n)
    penalty_mask = np.ones_like(weights)
    penalty_mask[:, -1] = 0.0  # bias is not penalized
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        logits = xb @ weights.T  # N x K
        shifted = logits - logits.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1))
        log_picked = shifted[rows, label_idx] - lse
        probs = np.exp(shifted - lse[:, None])
        loss = float(
            -np.mean(log_picked) + 0.5 * l2 * np.sum((weights * penalty_mask) ** 2)
        )
        grad_probs = probs
        grad_probs[rows, label_idx] -= 1.0
        grad = grad_probs.T @ xb / n + l2 * weights * penalty_mask
    return loss, grad


def train(
    features: np.ndarray,
    labels: list[str],
    config: TrainConfig | None = None,
    level: int = 6,
    parent: str | None = None,
) -> SoftmaxModel:
    """Fit a softmax model by seeded mini-batch gradient descent."""
    config = config or TrainConfig()
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != len(labels):
        raise DimensionMismatchError("features and labels disagree on row count")

    classes = sorted(set(labels))
    if len(classes) < 2:
        raise SingleClassError(f"dataset has {len(classes)} class(es); need at least 2")
    class_idx = {c: i for i, c in enumerate(classes)}
    y = np.array([class_idx[lbl] for lbl in labels], dtype=np.int64)

    n, d = features.shape
    k = len(classes)
    weights = np.zeros((k, d + 1), dtype=np.float64)
    rng = np.random.default_rng(config.seed)

    history: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grad = loss_and_gradient(weights, features[batch], y[batch], config.l2)
            weights -= config.learning_rate * grad
        epoch_loss, _ = loss_and_gradient(weights, features, y, config.l2)
        if not np.isfinite(epoch_loss):
            raise NonFiniteLossError(
                "training diverged; lower the learning rate or raise the batch size"
            )
        history.append(epoch_loss)

    return SoftmaxModel(
        weights=weights,
        classes=classes,
        level=level,
        parent=parent,
        final_loss=history[-1],
        loss_history=history,
    )


# ---------------------------------------------------------------------------
# Hierarchical composition
# ---------------------------------------------------------------------------


def conditional_proba(
    p4_joint: ClassDistribution,
    p2: ClassDistribution,
    l_star: str,
) -> ClassDistribution:
    """Condition a joint heading distribution on the chosen chapter.

    Each heading under the chapter gets joint probability divided by the
    chapter probability; the result is renormalized over those headings so
    it is a valid distribution even when chapter masses disagree.
    """
    parent_p = p2.probs.get(l_star, 0.0)
    if parent_p <= 0.0:
        raise ZeroParentProbabilityError(f"chapter {l_star} has zero probability")
    children = {m: p for m, p in p4_joint.probs.items() if m != OTHERS and m.startswith(l_star)}
    if not children:
        raise NoChildrenError(f"no headings under chapter {l_star}")
    ratios = {m: p / parent_p for m, p in children.items()}
    total = sum(ratios.values())
    if total <= 0.0:
        raise ZeroParentProbabilityError(
            f"headings under chapter {l_star} carry zero probability mass"
        )
    return ClassDistribution({m: r / total for m, r in ratios.items()})


@dataclass
class HierarchicalPrediction:
    chapter_dist: ClassDistribution
    heading_dist: ClassDistribution
    chapter: str
    heading: str


def hierarchical_predict(
    x: np.ndarray,
    hs2_model,
    hs4_models: dict[str, object],
    mode: str = "per_branch",
    hs4_joint: SoftmaxModel | None = None,
) -> HierarchicalPrediction:
    """Two-step chapter-then-heading prediction.

    ``per_branch`` uses the chapter's own heading model.  ``conditional``
    needs the joint heading model trained over every chapter's rows; passing
    the per-branch models alone cannot emulate it.
    """
    if mode not in ("per_branch", "conditional"):
        raise ValueError(f"unknown mode {mode!r}")
    p2 = predict_proba(hs2_model, x)
    l_star, _ = argmax_class(p2)

    if mode == "per_branch":
        branch = hs4_models.get(l_star)
        if branch is None:
            raise MissingBranchModelError(f"no heading model for chapter {l_star}")
        p4 = predict_proba(branch, x)
    else:
        if hs4_joint is None:
            raise MissingBranchModelError(
                "conditional mode needs the joint heading model"
            )
        p4 = conditional_proba(predict_proba(hs4_joint, x), p2, l_star)

    m_star, _ = argmax_class(p4)
    return HierarchicalPrediction(p2, p4, l_star, m_star)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_FORMAT_VERSION = 1


def model_to_parts(model, name: str) -> dict[str, bytes]:
    """Serialize to ``<name>.json`` (+ ``<name>.weights``) as byte blobs."""
    if isinstance(model, ConstantModel):
        meta = {
            "format_version": _FORMAT_VERSION,
            "type": "constant",
            "level": model.level,
            "parent": model.parent,
            "classes": model.classes,
        }
        blobs = {}
    else:
        meta = {
            "format_version": _FORMAT_VERSION,
            "type": "softmax",
            "level": model.level,
            "parent": model.parent,
            "classes": model.classes,
            "n_features": model.n_features,
            "final_loss": model.final_loss,
            "weights_file": f"{name}.weights",
        }
        blobs = {
            f"{name}.weights": np.ascontiguousarray(model.weights, dtype="<f8").tobytes()
        }
    meta_bytes = (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode("utf-8")
    return {f"{name}.json": meta_bytes, **blobs}


def model_from_parts(parts: dict[str, bytes], name: str):
    try:
        meta = json.loads(parts[f"{name}.json"].decode("utf-8"))
    except (KeyError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model {name!r}: {exc}") from None
    version = meta.get("format_version")
    if version != _FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    if meta["type"] == "constant":
        return ConstantModel(label=meta["classes"][0], level=meta["level"], parent=meta["parent"])
    blob = parts[meta["weights_file"]]
    k = len(meta["classes"])
    weights = np.frombuffer(blob, dtype="<f8").reshape(k, meta["n_features"] + 1).copy()
    return SoftmaxModel(
        weights=weights,
        classes=meta["classes"],
        level=meta["level"],
        parent=meta["parent"],
        final_loss=meta.get("final_loss", 0.0),
    )


def save_model(model, directory: Path, name: str) -> list[Path]:
    """Write ``<name>.json`` (+ ``<name>.weights`` for softmax models)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for filename, blob in model_to_parts(model, name).items():
        path = directory / filename
        path.write_bytes(blob)
        written.append(path)
    return written


def load_model(directory: Path, name: str):
    directory = Path(directory)
    parts = {f"{name}.json": (directory / f"{name}.json").read_bytes()}
    weights_path = directory / f"{name}.weights"
    if weights_path.exists():
        parts[weights_path.name] = weights_path.read_bytes()
    return model_from_parts(parts, name)
