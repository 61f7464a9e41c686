"""Utterance-level training with Adam and dev-EER model selection."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .evaluation import eer
from .model import ModelConfig, SERes1D, predict_scores

logger = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "train_loss", "dev_loss", "dev_eer", "is_best", "learning_rate")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 2
    max_epochs: int = 100
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be at least 1")


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new arrays and state."""
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    new_params, m_new, v_new = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = b1 * state.m.get(name, np.zeros_like(p)) + (1 - b1) * g
        v = b2 * state.v.get(name, np.zeros_like(p)) + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_params[name] = p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        m_new[name], v_new[name] = m, v
    return new_params, AdamState(t, m_new, v_new)


def softmax_mse_loss(logits: Tensor, target: int) -> Tensor:
    """MSE between class posteriors and a one-hot target."""
    onehot = np.zeros(logits.shape)
    onehot[target] = 1.0
    return ad.mse_loss(ad.softmax(logits), onehot)


LossFn = Callable[[Tensor, int], Tensor]


@dataclass
class TrainResult:
    model: SERes1D
    log: list[dict]
    best_epoch: int
    best_dev_eer: float

    def log_csv(self) -> str:
        return format_log(self.log)


def format_log(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for r in rows:
        w.writerow(
            [
                r["epoch"],
                repr(r["train_loss"]),
                repr(r["dev_loss"]),
                repr(r["dev_eer"]),
                int(r["is_best"]),
                repr(r["learning_rate"]),
            ]
        )
    return buf.getvalue()


def _check_split(name: str, X, y) -> None:
    if len(X) == 0:
        raise ValueError(f"{name} split is empty")
    if len(X) != len(y):
        raise ValueError(f"{name} split: {len(X)} inputs but {len(y)} labels")
    if len(set(int(v) for v in y)) < 2:
        raise ValueError(f"{name} split contains a single class")


def evaluate(model: SERes1D, X, y, loss_fn: LossFn = softmax_mse_loss) -> tuple[float, float, np.ndarray]:
    """(mean loss, EER %, p_spoof per utterance) without touching gradients."""
    params = model.constant_params()
    losses, scores = [], []
    for feats, label in zip(X, y):
        logits = model.forward(feats, params).logits
        losses.append(float(loss_fn(logits, int(label)).values))
        scores.append(predict_scores(logits)[1])
    scores = np.asarray(scores)
    return float(np.mean(losses)), eer(scores, np.asarray(y) == 1)[0], scores


def train(
    train_X,
    train_y,
    dev_X,
    dev_y,
    config: TrainConfig = TrainConfig(),
    model_config: ModelConfig | None = None,
    loss_fn: LossFn = softmax_mse_loss,
) -> TrainResult:
    """Train and return the epoch with the lowest dev EER (dev loss breaks ties).

    Stops once ``patience`` epochs pass without improvement.
    """
    _check_split("train", train_X, train_y)
    _check_split("dev", dev_X, dev_y)
    rng = np.random.default_rng(config.seed)
    model = SERes1D.initialize(model_config, seed=int(rng.integers(2**31)))
    model.set_standardisation(train_X)
    state = AdamState()
    log: list[dict] = []
    best_key = (np.inf, np.inf)
    best_arrays, best_epoch, best_eer, best_step = model.arrays(), 0, np.inf, 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_X))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            model.zero_grad()
            for i in batch:
                loss = loss_fn(model.forward(train_X[i]).logits, int(train_y[i]))
                ad.backward(loss)
                epoch_losses.append(float(loss.values))
            grads = {k: t.grad / len(batch) for k, t in model.params.items()}
            new, state = adam_step(model.arrays(), grads, state, config)
            for k, t in model.params.items():
                t.values = new[k]
            model.step = state.step
        model.zero_grad()

        dev_loss, dev_eer, _ = evaluate(model, dev_X, dev_y, loss_fn)
        key = (dev_eer, dev_loss)
        improved = key < best_key
        if improved:
            best_key, best_arrays, best_epoch, best_eer = key, model.arrays(), epoch, dev_eer
            best_step = model.step
        log.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(epoch_losses)),
                "dev_loss": dev_loss,
                "dev_eer": dev_eer,
                "is_best": improved,
                "learning_rate": config.learning_rate,
            }
        )
        logger.info("epoch %d train_loss %.5f dev_loss %.5f dev_eer %.2f%s", epoch, log[-1]["train_loss"],
                    dev_loss, dev_eer, " *" if improved else "")
        if epoch - best_epoch >= config.patience:
            break

    best = SERes1D.from_arrays(
        model.config,
        best_arrays,
        step=best_step,
        frozen=True,
        feature_mean=model.feature_mean,
        feature_std=model.feature_std,
    )
    return TrainResult(best, log, best_epoch, float(best_eer))
