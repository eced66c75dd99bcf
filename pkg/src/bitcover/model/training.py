"""Adam optimization with plateau LR halving, early stopping and best-epoch
checkpointing."""

from __future__ import annotations

import math

import numpy as np

from .config import ModelConfig, TrainConfig
from .network import backward, forward, loss, predict
from .params import ModelParams, init_params
from ..errors import DivergedLoss, EmptyDataset


class Adam:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: ModelParams, grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m = self._m.get(name)
            if m is None:
                m = np.zeros_like(g)
                self._m[name] = m
                self._v[name] = np.zeros_like(g)
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            params.tensors[name] -= (lr * update).astype(params.tensors[name].dtype)


def evaluate_loss(params: ModelParams, windows: np.ndarray, labels: np.ndarray,
                  batch_size: int | None = None) -> tuple[float, float]:
    """Eval-mode loss and accuracy over a labeled tensor."""
    pred = predict(params, windows, batch_size=batch_size)
    val_loss = loss(pred.probs, labels)
    accuracy = float(np.mean(pred.predicted_class == np.argmax(labels, axis=1)))
    return val_loss, accuracy


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    train_windows: np.ndarray,
    train_labels: np.ndarray,
    val_windows: np.ndarray,
    val_labels: np.ndarray,
) -> tuple[ModelParams, list[dict]]:
    """Seeded minibatch training; returns the best-validation-loss parameters
    (not the last epoch's) and a per-epoch history.

    Each history row records the learning rate in effect during that epoch.
    Raises DivergedLoss as soon as a non-finite loss or parameter shows up.
    """
    if train_windows.shape[0] == 0:
        raise EmptyDataset("training set is empty")
    if val_windows.shape[0] == 0:
        raise EmptyDataset("validation set is empty")

    params = init_params(model_cfg)
    optimizer = Adam(train_cfg.adam_beta1, train_cfg.adam_beta2, train_cfg.adam_eps)
    rng = np.random.default_rng(train_cfg.seed)

    lr = train_cfg.initial_lr
    best_checkpoint = params.copy()
    best_checkpoint_loss = math.inf
    best_plateau_loss = math.inf
    stalled_lr = 0
    stalled_stop = 0
    history: list[dict] = []
    n = train_windows.shape[0]

    for epoch in range(1, train_cfg.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            xb = train_windows[idx]
            yb = train_labels[idx]
            pred, cache = forward(params, xb, training=True)
            batch_loss = loss(pred.probs, yb)
            if not math.isfinite(batch_loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}, batch offset {start}")
            epoch_loss += batch_loss * len(idx)
            grads = backward(params, cache, yb)
            optimizer.step(params, grads, lr)
        epoch_loss /= n
        if not params.all_finite():
            raise DivergedLoss(f"non-finite parameter after epoch {epoch}")

        val_loss, val_acc = evaluate_loss(params, val_windows, val_labels)
        history.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss,
                "val_loss": val_loss,
                "val_acc": val_acc,
                "lr": lr,
            }
        )

        if val_loss < best_checkpoint_loss:
            best_checkpoint_loss = val_loss
            best_checkpoint = params.copy()

        if val_loss < best_plateau_loss - train_cfg.improvement_threshold:
            best_plateau_loss = val_loss
            stalled_lr = 0
            stalled_stop = 0
        else:
            stalled_lr += 1
            stalled_stop += 1

        if stalled_stop >= train_cfg.early_stop_patience:
            break
        if stalled_lr >= train_cfg.lr_patience:
            lr = max(lr * train_cfg.lr_reduce_factor, train_cfg.min_lr)
            stalled_lr = 0

    return best_checkpoint, history
