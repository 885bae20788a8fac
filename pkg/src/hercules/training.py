"""Negative sampling, cross-entropy loss, Adam, and the epoch loop.

Training is deterministic for a fixed (config, data, seed): shuffling and
negative draws come from one seeded generator and gradient accumulation
is vectorized single-threaded, so repeated runs produce bit-identical
checkpoints.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .diff import loss_and_grads
from .evaluation import evaluate
from .params import CurvatureSpec, ModelParams, VocabSizes, init_params

DEFAULT_EPOCHS = 500
DEFAULT_BATCH_SIZE = 256
DEFAULT_NEGATIVES = 500
DEFAULT_LEARNING_RATE = 0.001


@dataclass(frozen=True)
class TrainConfig:
    dim: int
    spec: CurvatureSpec
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    negatives: int = DEFAULT_NEGATIVES
    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    valid_every: int = 20   # 0 disables validation-based selection
    eval_threads: int = 1

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 2 != 0:
            raise ValueError("dim must be a positive even integer")
        for name in ("epochs", "batch_size", "negatives"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.valid_every < 0:
            raise ValueError("valid_every must be non-negative")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "dim", "epochs", "batch_size", "negatives", "learning_rate",
            "beta1", "beta2", "adam_eps", "seed", "valid_every", "eval_threads")}
        d["curvature"] = self.spec.variant
        return d


def sample_negatives(rng: np.random.Generator, k: int, n_entities: int,
                     count: int = 1) -> np.ndarray:
    """`count` rows of k uniform object corruptions; duplicates allowed.

    The true object is deliberately not excluded: corruption is uniform
    over all entities and filtering only happens at evaluation time.
    """
    if k < 1:
        raise ValueError("need at least one negative sample")
    if n_entities < 1:
        raise ValueError("cannot sample negatives from an empty entity set")
    return rng.integers(0, n_entities, size=(count, k), dtype=np.int64)


def batch_loss(params: ModelParams, spec: CurvatureSpec, batch, negatives) -> float:
    """Mean over the batch of -log softmax(true | true + negatives)."""
    from .diff import batch_loss_value
    return batch_loss_value(params, spec, batch, negatives)


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    m: dict
    v: dict
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(arr) for name, arr in params.arrays().items()},
            v={name: np.zeros_like(arr) for name, arr in params.arrays().items()},
        )


def adam_step(params: ModelParams, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, in place.

    Parameters stay in Euclidean space; nothing is projected here (the
    ball mapping happens inside the model via the exponential map).
    """
    state.step += 1
    t = state.step
    for name, arr in params.arrays().items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        arr -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


@dataclass
class TrainResult:
    best_params: ModelParams
    best_epoch: int
    best_mrr: float | None
    final_params: ModelParams
    history: list = field(default_factory=list)  # one dict per epoch


def train(config: TrainConfig, dataset, log_fn=None, checkpoint_fn=None) -> TrainResult:
    """Run the epoch loop, keeping the checkpoint with the best valid MRR.

    With no validation rounds (valid_every = 0 or epochs < valid_every)
    the final parameters are the best ones. `log_fn` receives each epoch
    row; `checkpoint_fn(tag, params, epoch, mrr)` is called whenever the
    best or last checkpoint advances.
    """
    sizes = VocabSizes(dataset.vocab.n_entities, dataset.vocab.n_relations,
                       dataset.vocab.n_timestamps)
    params = init_params(sizes, config.dim, config.spec, config.seed)
    state = AdamState.for_params(params)
    rng = np.random.default_rng(config.seed)
    train_rows = dataset.train_aug
    n_entities = sizes.n_entities

    best_params = None
    best_mrr = None
    best_epoch = 0
    history = []
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(train_rows))
        losses = []
        for lo in range(0, len(order), config.batch_size):
            batch = train_rows[order[lo:lo + config.batch_size]]
            negatives = sample_negatives(rng, config.negatives, n_entities,
                                         count=len(batch))
            loss, grads = loss_and_grads(params, config.spec, batch, negatives)
            adam_step(params, grads, state, config.learning_rate,
                      config.beta1, config.beta2, config.adam_eps)
            losses.append(loss)
        row = {"epoch": epoch, "loss": float(np.mean(losses)),
               "seconds": round(time.perf_counter() - started, 3)}

        if config.valid_every and epoch % config.valid_every == 0:
            report = evaluate(params, config.spec, dataset.valid_aug,
                              dataset.filter_index, n_entities,
                              threads=config.eval_threads)
            row.update(mrr=report.mrr, h1=report.hits1, h3=report.hits3,
                       h10=report.hits10)
            if best_mrr is None or report.mrr > best_mrr:
                best_mrr = report.mrr
                best_epoch = epoch
                best_params = params.copy()
                if checkpoint_fn is not None:
                    checkpoint_fn("best", best_params, epoch, best_mrr)
        if checkpoint_fn is not None:
            checkpoint_fn("last", params, epoch, row.get("mrr"))
        history.append(row)
        if log_fn is not None:
            log_fn(row)

    if best_params is None:  # no validation round ever ran
        best_params = params.copy()
        best_epoch = config.epochs
    return TrainResult(best_params=best_params, best_epoch=best_epoch,
                       best_mrr=best_mrr, final_params=params, history=history)
