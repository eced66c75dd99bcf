"""Forward and backward passes of the residual 1D classifier.

Every block applies three conv -> batchnorm stages (ReLU after the first
two) and adds a shortcut branch before the final ReLU; the shortcut is the
identity when channel counts match, otherwise a 1x1 conv plus batch norm.
A global average pool over time feeds a dense softmax head.

Convolutions run as one matmul per layer over im2col patches, so all math
inherits the dtype of the parameters (float32 in production, float64 in
numeric tests).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModelParams, block_channel_plan
from ..errors import ShapeMismatch

BN_EPS = 1e-5
BN_MOMENTUM = 0.9
LOG_CLAMP = 1e-12


@dataclass
class Prediction:
    probs: np.ndarray            # (N, K)
    predicted_class: np.ndarray  # (N,) int64


def _pad_time(x: np.ndarray, left: int, right: int, mode: str) -> np.ndarray:
    if mode == "circular":
        parts = []
        if left:
            parts.append(x[:, -left:, :])
        parts.append(x)
        if right:
            parts.append(x[:, :right, :])
        return np.concatenate(parts, axis=1)
    return np.pad(x, ((0, 0), (left, right), (0, 0)))


def _conv1d(x: np.ndarray, w: np.ndarray, b: np.ndarray, mode: str):
    """Same-padded 1D conv; x (N,T,Cin), w (Cout,Cin,K) -> (N,T,Cout)."""
    n, t, c_in = x.shape
    c_out, _, k = w.shape
    left, right = (k - 1) // 2, k // 2
    x_pad = _pad_time(x, left, right, mode)
    cols = np.lib.stride_tricks.sliding_window_view(x_pad, k, axis=1)
    flat = cols.reshape(n * t, c_in * k)
    y = flat @ w.reshape(c_out, c_in * k).T
    y += b
    return y.reshape(n, t, c_out), (x.shape, flat, k, left, right)


def _conv1d_backward(dy: np.ndarray, w: np.ndarray, cache, mode: str):
    (n, t, c_in), flat, k, left, right = cache
    c_out = w.shape[0]
    dyf = dy.reshape(n * t, c_out)
    dw = (dyf.T @ flat).reshape(c_out, c_in, k)
    db = dyf.sum(axis=0)
    dflat = dyf @ w.reshape(c_out, c_in * k)
    dcols = dflat.reshape(n, t, c_in, k)
    dx_pad = np.zeros((n, t + k - 1, c_in), dtype=dy.dtype)
    for shift in range(k):
        dx_pad[:, shift:shift + t, :] += dcols[:, :, :, shift]
    dx = dx_pad[:, left:left + t, :].copy()
    if mode == "circular":
        if left:
            dx[:, t - left:, :] += dx_pad[:, :left, :]
        if right:
            dx[:, :right, :] += dx_pad[:, left + t:, :]
    return dx, dw, db


def _batchnorm(x, gamma, beta, running_mean, running_var, training: bool):
    """Channel-wise batch norm over the (batch, time) axes.

    Training mode normalizes with batch statistics and returns updated
    running statistics; eval mode uses the running statistics unchanged.
    """
    if training:
        mean = x.mean(axis=(0, 1))
        var = x.var(axis=(0, 1))
        new_running = (
            BN_MOMENTUM * running_mean + (1.0 - BN_MOMENTUM) * mean,
            BN_MOMENTUM * running_var + (1.0 - BN_MOMENTUM) * var,
        )
    else:
        mean, var = running_mean, running_var
        new_running = None
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean) * inv_std
    y = gamma * xhat + beta
    return y, (xhat, inv_std, gamma), new_running


def _batchnorm_backward(dy, cache):
    xhat, inv_std, gamma = cache
    dgamma = (dy * xhat).sum(axis=(0, 1))
    dbeta = dy.sum(axis=(0, 1))
    dxhat = dy * gamma
    dx = inv_std * (
        dxhat - dxhat.mean(axis=(0, 1)) - xhat * (dxhat * xhat).mean(axis=(0, 1))
    )
    return dx, dgamma, dbeta


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(
    params: ModelParams,
    x: np.ndarray,
    training: bool = False,
    with_cache: bool = True,
):
    """Run the network; returns (Prediction, cache).

    Training mode mutates the running batch-norm statistics in place.  The
    cache carries per-block outputs and everything backward() needs; pass
    with_cache=False for memory-light inference.
    """
    cfg = params.config
    x = np.asarray(x)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.shape[1] != cfg.input_len or x.shape[2] != cfg.channels:
        raise ShapeMismatch(
            f"input shape {x.shape[1:]} does not match "
            f"(input_len={cfg.input_len}, channels={cfg.channels})"
        )
    x = x.astype(params.dtype, copy=False)
    ten = params.tensors
    mode = cfg.padding_mode

    cache = {"training": training, "blocks": [], "block_outputs": []} if with_cache else None
    h = x
    for b, (c_in, c_out) in enumerate(block_channel_plan(cfg)):
        block_in = h
        bcache = {"convs": [], "bns": [], "relu_masks": []}
        for j in range(3):
            z, conv_cache = _conv1d(
                h, ten[f"block{b}.conv{j}.weight"], ten[f"block{b}.conv{j}.bias"], mode
            )
            u, bn_cache, new_running = _batchnorm(
                z,
                ten[f"block{b}.bn{j}.gamma"],
                ten[f"block{b}.bn{j}.beta"],
                ten[f"block{b}.bn{j}.running_mean"],
                ten[f"block{b}.bn{j}.running_var"],
                training,
            )
            if new_running is not None:
                ten[f"block{b}.bn{j}.running_mean"] = new_running[0].astype(params.dtype)
                ten[f"block{b}.bn{j}.running_var"] = new_running[1].astype(params.dtype)
            if j < 2:
                h = np.maximum(u, 0.0)
                if with_cache:
                    bcache["relu_masks"].append(u > 0)
            else:
                h = u
            if with_cache:
                bcache["convs"].append(conv_cache)
                bcache["bns"].append(bn_cache)

        if c_in != c_out:
            s, sc_conv_cache = _conv1d(
                block_in, ten[f"block{b}.shortcut.weight"], ten[f"block{b}.shortcut.bias"], mode
            )
            s, sc_bn_cache, new_running = _batchnorm(
                s,
                ten[f"block{b}.shortcut_bn.gamma"],
                ten[f"block{b}.shortcut_bn.beta"],
                ten[f"block{b}.shortcut_bn.running_mean"],
                ten[f"block{b}.shortcut_bn.running_var"],
                training,
            )
            if new_running is not None:
                ten[f"block{b}.shortcut_bn.running_mean"] = new_running[0].astype(params.dtype)
                ten[f"block{b}.shortcut_bn.running_var"] = new_running[1].astype(params.dtype)
            if with_cache:
                bcache["shortcut"] = (sc_conv_cache, sc_bn_cache)
        else:
            s = block_in
            if with_cache:
                bcache["shortcut"] = None

        pre_out = s + h
        h = np.maximum(pre_out, 0.0)
        if with_cache:
            bcache["out_mask"] = pre_out > 0
            cache["blocks"].append(bcache)
            cache["block_outputs"].append(h)

    gap = h.mean(axis=1)
    logits = gap @ ten["head.weight"].T + ten["head.bias"]
    probs = _softmax(logits)
    if with_cache:
        cache["gap_input_len"] = h.shape[1]
        cache["gap"] = gap
        cache["probs"] = probs
    prediction = Prediction(probs=probs, predicted_class=np.argmax(probs, axis=1))
    return prediction, cache


def loss(probs: np.ndarray, labels_onehot: np.ndarray) -> float:
    """Mean categorical cross-entropy in nats, accumulated in float64."""
    p = np.clip(probs.astype(np.float64), LOG_CLAMP, None)
    y = labels_onehot.astype(np.float64)
    return float(-(y * np.log(p)).sum(axis=1).mean())


def backward(params: ModelParams, cache: dict, labels_onehot: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of the cross-entropy loss for every trainable tensor.

    Requires the cache of a training-mode forward pass (gradients flow
    through the batch statistics).
    """
    if not cache or not cache.get("training"):
        raise ValueError("backward needs the cache of a training-mode forward pass")
    cfg = params.config
    ten = params.tensors
    mode = cfg.padding_mode
    n = labels_onehot.shape[0]

    grads: dict[str, np.ndarray] = {}
    dlogits = (cache["probs"] - labels_onehot.astype(params.dtype)) / n
    grads["head.weight"] = dlogits.T @ cache["gap"]
    grads["head.bias"] = dlogits.sum(axis=0)
    dgap = dlogits @ ten["head.weight"]
    t_len = cache["gap_input_len"]
    dh = np.repeat(dgap[:, None, :], t_len, axis=1) / t_len

    for b in reversed(range(len(cfg.block_filters))):
        bcache = cache["blocks"][b]
        dpre = dh * bcache["out_mask"]

        # main branch: bn2 <- conv2 <- relu1 <- bn1 <- conv1 <- relu0 <- bn0 <- conv0
        d = dpre
        for j in (2, 1, 0):
            d, dgamma, dbeta = _batchnorm_backward(d, bcache["bns"][j])
            grads[f"block{b}.bn{j}.gamma"] = dgamma
            grads[f"block{b}.bn{j}.beta"] = dbeta
            d, dw, db = _conv1d_backward(
                d, ten[f"block{b}.conv{j}.weight"], bcache["convs"][j], mode
            )
            grads[f"block{b}.conv{j}.weight"] = dw
            grads[f"block{b}.conv{j}.bias"] = db
            if j > 0:
                d = d * bcache["relu_masks"][j - 1]
        dx_main = d

        if bcache["shortcut"] is not None:
            sc_conv_cache, sc_bn_cache = bcache["shortcut"]
            d, dgamma, dbeta = _batchnorm_backward(dpre, sc_bn_cache)
            grads[f"block{b}.shortcut_bn.gamma"] = dgamma
            grads[f"block{b}.shortcut_bn.beta"] = dbeta
            d, dw, db = _conv1d_backward(
                d, ten[f"block{b}.shortcut.weight"], sc_conv_cache, mode
            )
            grads[f"block{b}.shortcut.weight"] = dw
            grads[f"block{b}.shortcut.bias"] = db
            dx_shortcut = d
        else:
            dx_shortcut = dpre

        dh = dx_main + dx_shortcut

    return grads


def predict(
    params: ModelParams, windows: np.ndarray, batch_size: int | None = None
) -> Prediction:
    """Eval-mode inference over an (N, T, C) array, batched for memory.

    The default batch size scales inversely with window length so im2col
    buffers stay cache-resident regardless of T.
    """
    windows = np.asarray(windows)
    if windows.ndim == 2:
        windows = windows[:, :, None]
    if batch_size is None:
        batch_size = min(256, max(1, 32768 // max(1, windows.shape[1])))
    probs_parts = []
    for start in range(0, windows.shape[0], batch_size):
        pred, _ = forward(
            params, windows[start:start + batch_size], training=False, with_cache=False
        )
        probs_parts.append(pred.probs)
    probs = np.concatenate(probs_parts, axis=0)
    return Prediction(probs=probs, predicted_class=np.argmax(probs, axis=1))
