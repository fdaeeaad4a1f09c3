"""Binary logistic regression trained with mini-batch SGD, written against numpy."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import phases as ph
from .errors import ContractError
from .ingest import Document, EmbedderConfig, LabeledExample, embed, preprocess
from .phases import ComputeModel, PhaseReport

__all__ = [
    "Dataset",
    "ModelParams",
    "Hyperparams",
    "GradientVector",
    "Metrics",
    "sigmoid",
    "forward",
    "predict_proba",
    "batch_loss",
    "batch_gradient",
    "sgd_step",
    "split",
    "epoch_order",
    "embed_documents",
    "train_single",
    "evaluate",
    "confusion_counts",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class Dataset:
    """Embedded examples as an ``(n, d)`` float64 matrix and a 0/1 label vector."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
            raise ContractError(f"bad dataset shapes X{X.shape} y{y.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_examples(cls, examples: Sequence[LabeledExample], dim: int | None = None) -> "Dataset":
        examples = list(examples)
        if not examples:
            return cls(np.zeros((0, dim or 0)), np.zeros(0))
        return cls(np.vstack([e.embedding for e in examples]), np.array([e.label for e in examples]))

    def examples(self) -> list[LabeledExample]:
        return [self[i] for i in range(len(self))]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return len(self.y)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return LabeledExample(self.X[idx].copy(), int(self.y[idx]))
        return Dataset(self.X[idx], self.y[idx])


@dataclass(frozen=True)
class ModelParams:
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @classmethod
    def zeros(cls, dim: int) -> "ModelParams":
        return cls(np.zeros(dim), 0.0)

    @property
    def dim(self) -> int:
        return len(self.weights)

    def as_vector(self) -> np.ndarray:
        """Bias followed by weights, the checkpoint order."""
        return np.concatenate([[self.bias], self.weights])

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.bias == other.bias and np.array_equal(self.weights, other.weights)

    __hash__ = None


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 10
    train_fraction: float = 0.7
    l2: float = 0.0
    shuffle_seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")
        if not 0 <= self.shuffle_seed < 2**64:
            raise ValueError("shuffle_seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class GradientVector:
    d_weights: np.ndarray
    d_bias: float
    example_count: int


@dataclass(frozen=True)
class Metrics:
    """Confusion rows are the true label, columns the prediction: ``[[TN, FP], [FN, TP]]``."""

    accuracy: float
    correct: int
    total: int
    confusion: tuple[tuple[int, int], tuple[int, int]]

    @classmethod
    def from_confusion(cls, confusion) -> "Metrics":
        c = tuple(tuple(int(v) for v in row) for row in confusion)
        total = sum(map(sum, c))
        if total == 0:
            raise ContractError("cannot build metrics from an empty evaluation set")
        correct = c[0][0] + c[1][1]
        return cls(correct / total, correct, total, c)


def sigmoid(z):
    """Logistic function that never overflows: exp is only taken of nonpositive values."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _check_dim(params: ModelParams, d: int) -> None:
    if params.dim != d:
        raise ContractError(f"dimension mismatch: params have {params.dim}, input has {d}")


def forward(params: ModelParams, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    _check_dim(params, x.shape[-1])
    return float(sigmoid(params.weights @ x + params.bias))


def predict_proba(params: ModelParams, X: np.ndarray) -> np.ndarray:
    _check_dim(params, X.shape[1])
    return sigmoid(X @ params.weights + params.bias)


def _check_batch(params: ModelParams, batch: Dataset) -> None:
    if len(batch) == 0:
        raise ContractError("empty batch")
    _check_dim(params, batch.dim)


def batch_loss(params: ModelParams, batch: Dataset, l2: float = 0.0) -> float:
    """Mean binary cross-entropy plus ``l2/2 * ||w||^2``.

    Uses ``log(1 + e^z) - y*z``, evaluated with ``logaddexp`` so large
    margins neither overflow nor lose the small tail.
    """
    _check_batch(params, batch)
    z = batch.X @ params.weights + params.bias
    loss = float(np.mean(np.logaddexp(0.0, z) - batch.y * z))
    return loss + 0.5 * l2 * float(params.weights @ params.weights)


def gradient_from_probs(
    params: ModelParams, batch: Dataset, probs: np.ndarray, l2: float = 0.0
) -> GradientVector:
    """Backward half of :func:`batch_gradient`, given the forward probabilities."""
    m = len(batch)
    r = probs - batch.y
    dw = batch.X.T @ r / m
    if l2:
        dw = dw + l2 * params.weights
    return GradientVector(dw, float(r.sum() / m), m)


def batch_gradient(params: ModelParams, batch: Dataset, l2: float = 0.0) -> GradientVector:
    _check_batch(params, batch)
    return gradient_from_probs(params, batch, predict_proba(params, batch.X), l2)


def sgd_step(params: ModelParams, grad: GradientVector, lr: float) -> ModelParams:
    _check_dim(params, len(grad.d_weights))
    return ModelParams(params.weights - lr * grad.d_weights, params.bias - lr * grad.d_bias)


def split(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first ``ceil(fraction * n)`` examples go to training."""
    n = len(dataset)
    if n == 0:
        raise ContractError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(n)
    # round first: 0.7 * 10 is 7.000000000000001 in binary floating point
    n_train = min(n, math.ceil(round(fraction * n, 9)))
    return dataset[perm[:n_train]], dataset[perm[n_train:]]


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Visiting order of the training set in a given epoch; shared by every trainer."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def confusion_counts(probs: np.ndarray, y: np.ndarray) -> np.ndarray:
    pred = (probs >= 0.5).astype(np.int64)
    truth = y.astype(np.int64)
    c = np.zeros((2, 2), dtype=np.int64)
    np.add.at(c, (truth, pred), 1)
    return c


def evaluate(params: ModelParams, dataset: Dataset) -> Metrics:
    """Predict 1 when the probability is at least 0.5 and tally the confusion matrix."""
    if len(dataset) == 0:
        raise ContractError("cannot evaluate on an empty dataset")
    return Metrics.from_confusion(confusion_counts(predict_proba(params, dataset.X), dataset.y))


def embed_documents(
    docs: Sequence[Document],
    embedder: EmbedderConfig,
    report: PhaseReport | None = None,
    compute: ComputeModel | None = None,
) -> Dataset:
    """Preprocess and embed documents, charging both phases to ``report`` if given."""
    t0 = time.perf_counter()
    tokens = [preprocess(doc.raw_text) for doc in docs]
    t1 = time.perf_counter()
    X = np.zeros((len(docs), embedder.dimension))
    for i, toks in enumerate(tokens):
        X[i] = embed(toks, embedder)
    t2 = time.perf_counter()
    if report is not None:
        compute = compute or ComputeModel()
        n = len(docs)
        report.documents += n
        report.add_wall(ph.PREPROCESS, t1 - t0)
        report.add_wall(ph.EMBEDDING, t2 - t1)
        report.add_sim(ph.PREPROCESS, n * compute.c_pre)
        report.add_sim(ph.EMBEDDING, n * embedder.dimension * compute.c_emb)
    return Dataset(X, np.array([int(doc.label) for doc in docs], dtype=np.float64))


def train_single(
    data: Dataset | Sequence[Document],
    hp: Hyperparams | None = None,
    embedder: EmbedderConfig | None = None,
    *,
    compute: ComputeModel | None = None,
    on_epoch_end: Callable[[int, ModelParams, Dataset], None] | None = None,
) -> tuple[ModelParams, Metrics, PhaseReport]:
    """Train on one node: embed (if given documents), split, SGD, evaluate.

    ``data`` is either an already embedded :class:`Dataset` or a sequence
    of :class:`Document`; in the latter case ``embedder`` is used and the
    preprocess/embedding phases are timed. Parameters start at zero.
    """
    hp = hp or Hyperparams()
    compute = compute or ComputeModel()
    report = PhaseReport(workers=1, peak_tasks=1)
    if isinstance(data, Dataset):
        dataset = data
    else:
        dataset = embed_documents(data, embedder or EmbedderConfig(), report, compute)
    if len(dataset) == 0:
        raise ContractError("cannot train on an empty dataset")
    train, val = split(dataset, hp.train_fraction, hp.shuffle_seed)
    d = dataset.dim
    report.train_examples = len(train)
    params = ModelParams.zeros(d)

    t_fwd = t_bwd = t_upd = 0.0
    passes = steps = 0
    clock = time.perf_counter
    for epoch in range(hp.epochs):
        order = epoch_order(len(train), hp.shuffle_seed, epoch)
        for start in range(0, len(train), hp.batch_size):
            batch = train[order[start : start + hp.batch_size]]
            t0 = clock()
            probs = predict_proba(params, batch.X)
            t1 = clock()
            grad = gradient_from_probs(params, batch, probs, hp.l2)
            t2 = clock()
            params = sgd_step(params, grad, hp.learning_rate)
            t3 = clock()
            t_fwd += t1 - t0
            t_bwd += t2 - t1
            t_upd += t3 - t2
            passes += len(batch)
            steps += 1
        if on_epoch_end is not None:
            on_epoch_end(epoch, params, train)

    report.steps = steps
    report.example_passes = passes
    report.add_wall(ph.FORWARD, t_fwd)
    report.add_wall(ph.BACKWARD, t_bwd)
    report.add_wall(ph.UPDATE, t_upd)
    report.add_sim(ph.FORWARD, passes * d * compute.c_fwd)
    report.add_sim(ph.BACKWARD, passes * d * compute.c_bwd)
    report.add_sim(ph.UPDATE, steps * d * compute.c_upd)

    t0 = clock()
    metrics = evaluate(params, val)
    report.add_wall(ph.EVALUATE, clock() - t0)
    report.eval_examples = len(val)
    report.add_sim(ph.EVALUATE, len(val) * d * compute.c_fwd)
    return params, metrics, report


def save_checkpoint(path: str | Path, params: ModelParams) -> None:
    """Write ``dim=<d>`` then the bias and each weight on its own line."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"dim={params.dim}\n")
        for v in params.as_vector():
            fh.write(f"{float(v)!r}\n")


def load_checkpoint(path: str | Path) -> ModelParams:
    with open(path, encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("dim="):
        raise ValueError(f"{path}: missing 'dim=<d>' header")
    d = int(lines[0][4:])
    values = [float(v) for v in lines[1:]]
    if len(values) != d + 1:
        raise ValueError(f"{path}: expected {d + 1} values after header, found {len(values)}")
    return ModelParams(np.array(values[1:]), values[0])
