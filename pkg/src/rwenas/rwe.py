"""Training-free scoring of candidate architectures.

A candidate's backbone is decoded, randomly initialized, and frozen.
Only an ensemble of linear softmax classifiers is trained on the frozen
features: the training split is divided into L folds and classifier i
trains on every fold except fold i.  Predicted class is the majority
vote over the ensemble; vote ties go to the label with the highest
summed softmax score, then the lowest class index.  The two reported
objectives are validation error rate and exact multiply-add count.

Every evaluation derives its own generator chain from (seed, genome
content), so results are reproducible per candidate regardless of
evaluation order or thread count.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .complexity import count_flops
from .errors import DegenerateInput, EmptyValidation, ShapeMismatch, TooFewSamples
from .nn_engine import (
    WeightBank,
    forward_features,
    init_weights,
    linear_forward,
    uniform_fan_in,
)
from .search_space import Genome, MacroConfig, decode, flatten

_F32 = np.float32


@dataclass(frozen=True)
class EvalConfig:
    macro: MacroConfig = MacroConfig()
    num_classifiers: int = 5
    epochs: int = 30
    batch_size: int = 512
    lr0: float = 0.25
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.num_classifiers < 1:
            raise DegenerateInput("num_classifiers must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise DegenerateInput("epochs and batch_size must be >= 1")
        if not 0 <= self.momentum < 1:
            raise DegenerateInput("momentum must be in [0, 1)")
        if self.lr0 <= 0:
            raise DegenerateInput("lr0 must be positive")
        if self.seed < 0:
            raise DegenerateInput("seed must be non-negative")


@dataclass(frozen=True)
class LinearClassifier:
    weight: np.ndarray  # (feature_dim, num_classes) float32
    bias: np.ndarray  # (num_classes,) float32


@dataclass(frozen=True)
class ClassifierEnsemble:
    classifiers: tuple[LinearClassifier, ...]

    def __post_init__(self):
        if not self.classifiers:
            raise DegenerateInput("ensemble must hold at least one classifier")
        shapes = {c.weight.shape for c in self.classifiers}
        if len(shapes) != 1:
            raise ShapeMismatch(f"ensemble members disagree on shape: {shapes}")


@dataclass(frozen=True)
class EvalResult:
    error: float
    flops: int
    wall_time_s: float


def split_folds(n_samples: int, num_folds: int, seed) -> list[np.ndarray]:
    """Random partition of range(n_samples) into num_folds disjoint folds.

    Fold sizes differ by at most one (larger folds first).  Raises
    TooFewSamples when a fold would be empty.
    """
    if num_folds < 1:
        raise DegenerateInput("num_folds must be >= 1")
    if n_samples < num_folds:
        raise TooFewSamples(
            f"cannot split {n_samples} samples into {num_folds} non-empty folds"
        )
    perm = np.random.default_rng(seed).permutation(n_samples)
    return np.array_split(perm, num_folds)


def _softmax_grad(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(probabilities, dLoss/dLogits averaged over the batch)."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    grad = probs.copy()
    grad[np.arange(len(labels)), labels] -= _F32(1)
    grad *= _F32(1.0 / len(labels))
    return probs, grad


def train_classifier(
    features: np.ndarray,
    labels: np.ndarray,
    config: EvalConfig,
    rng: np.random.Generator,
) -> LinearClassifier:
    """Minibatch softmax regression with momentum and cosine-annealed lr.

    lr at epoch t is lr0 * (1 + cos(pi * t / epochs)) / 2; samples are
    reshuffled every epoch; velocity update v = momentum * v + grad,
    parameter update p = p - lr * v.
    """
    if features.ndim != 2 or len(features) != len(labels):
        raise ShapeMismatch(
            f"features {features.shape} incompatible with labels {labels.shape}"
        )
    if len(features) == 0:
        raise TooFewSamples("cannot train a classifier on zero samples")
    num_classes = config.macro.num_classes
    if labels.min() < 0 or labels.max() >= num_classes:
        raise DegenerateInput(f"labels must lie in [0, {num_classes})")
    feature_dim = features.shape[1]
    weight = uniform_fan_in(rng, (feature_dim, num_classes), feature_dim)
    bias = np.zeros(num_classes, dtype=_F32)
    vel_w = np.zeros_like(weight)
    vel_b = np.zeros_like(bias)
    momentum = _F32(config.momentum)
    n = len(features)
    for epoch in range(config.epochs):
        lr = _F32(config.lr0 * 0.5 * (1.0 + np.cos(np.pi * epoch / config.epochs)))
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            x, y = features[idx], labels[idx]
            _, grad = _softmax_grad(linear_forward(x, weight, bias), y)
            vel_w = momentum * vel_w + x.T @ grad
            vel_b = momentum * vel_b + grad.sum(axis=0)
            weight = weight - lr * vel_w
            bias = bias - lr * vel_b
    return LinearClassifier(weight, bias)


def ensemble_predict(ensemble: ClassifierEnsemble, features: np.ndarray) -> np.ndarray:
    """Majority vote with softmax-sum then lowest-index tie-breaking."""
    if features.ndim != 2:
        raise ShapeMismatch(f"features must be 2-d, got {features.shape}")
    n = len(features)
    num_classes = ensemble.classifiers[0].weight.shape[1]
    votes = np.zeros((n, num_classes), dtype=np.int64)
    score = np.zeros((n, num_classes), dtype=_F32)
    rows = np.arange(n)
    for clf in ensemble.classifiers:
        logits = linear_forward(features, clf.weight, clf.bias)
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        probs = exp / exp.sum(axis=1, keepdims=True)
        votes[rows, logits.argmax(axis=1)] += 1
        score += probs
    top = votes.max(axis=1, keepdims=True)
    tie_break = np.where(votes == top, score, _F32(-1))
    return tie_break.argmax(axis=1)


def extract_features(
    plan, bank: WeightBank, images: np.ndarray, batch_size: int
) -> np.ndarray:
    """Frozen-backbone features, computed in batch_size chunks.

    Batch-stat normalization couples samples within a chunk, so the
    chunk size is part of the evaluation definition.
    """
    chunks = [
        forward_features(plan, bank, images[start : start + batch_size])
        for start in range(0, len(images), batch_size)
    ]
    return np.concatenate(chunks, axis=0)


def evaluate(
    genome: Genome,
    datasets,
    config: EvalConfig,
    bank_observer: Callable[[WeightBank], None] | None = None,
) -> EvalResult:
    """Score one candidate: (validation error, multiply-adds).

    `datasets` must expose `.train` and `.validation`, each with
    float32 `.images` shaped (n,) + macro.input_shape and integer
    `.labels`.  `bank_observer`, if given, receives the frozen
    WeightBank right after initialization (for freeze auditing).
    """
    t0 = time.perf_counter()
    train, val = datasets.train, datasets.validation
    if len(val.labels) == 0:
        raise EmptyValidation()
    plan = decode(genome, config.macro)

    master = np.random.default_rng(np.random.SeedSequence([config.seed, *flatten(genome)]))
    weight_seed = np.random.SeedSequence(int(master.integers(2**63)))
    fold_seed = int(master.integers(2**63))
    clf_seeds = [int(master.integers(2**63)) for _ in range(config.num_classifiers)]

    bank = init_weights(plan, weight_seed)
    if bank_observer is not None:
        bank_observer(bank)
    frozen_checksum = bank.checksum()

    train_feats = extract_features(plan, bank, train.images, config.batch_size)
    val_feats = extract_features(plan, bank, val.images, config.batch_size)

    folds = split_folds(len(train.labels), config.num_classifiers, fold_seed)
    classifiers = []
    for i in range(config.num_classifiers):
        if config.num_classifiers == 1:
            idx = np.arange(len(train.labels))
        else:
            idx = np.concatenate([folds[j] for j in range(len(folds)) if j != i])
            if np.intersect1d(idx, folds[i]).size:
                raise AssertionError("classifier training indices overlap its held-out fold")
        classifiers.append(
            train_classifier(
                train_feats[idx],
                train.labels[idx],
                config,
                np.random.default_rng(clf_seeds[i]),
            )
        )
    predictions = ensemble_predict(ClassifierEnsemble(tuple(classifiers)), val_feats)
    error = float(np.mean(predictions != val.labels))

    if bank.checksum() != frozen_checksum:
        raise AssertionError("backbone weights changed during evaluation")
    flops = count_flops(plan).flops
    return EvalResult(error=error, flops=flops, wall_time_s=time.perf_counter() - t0)
