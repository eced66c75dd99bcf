"""Parameter storage and deterministic initialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig


def block_channel_plan(cfg: ModelConfig) -> list[tuple[int, int]]:
    """(in_channels, out_channels) for each of the three residual blocks."""
    ins = [cfg.channels, cfg.block_filters[0], cfg.block_filters[1]]
    return list(zip(ins, cfg.block_filters))


@dataclass
class ModelParams:
    """All weights, biases and batch-norm state, keyed by layer path.

    Names ending in running_mean / running_var are inference statistics,
    not trainable parameters.
    """

    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def trainable_names(self) -> list[str]:
        return [n for n in self.tensors if "running_" not in n]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {n: t.copy() for n, t in self.tensors.items()})

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.config, {n: t.astype(dtype) for n, t in self.tensors.items()})

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors.values())

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype


def _he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


def init_params(cfg: ModelConfig) -> ModelParams:
    """He-uniform conv/dense weights, identity batch norm; bit-reproducible
    for a given seed because tensors are drawn in a fixed order."""
    rng = np.random.default_rng(cfg.seed)
    tensors: dict[str, np.ndarray] = {}

    def add_conv(name: str, c_in: int, c_out: int, kernel: int) -> None:
        tensors[f"{name}.weight"] = _he_uniform(rng, (c_out, c_in, kernel), c_in * kernel)
        tensors[f"{name}.bias"] = np.zeros(c_out, dtype=np.float32)

    def add_bn(name: str, c: int) -> None:
        tensors[f"{name}.gamma"] = np.ones(c, dtype=np.float32)
        tensors[f"{name}.beta"] = np.zeros(c, dtype=np.float32)
        tensors[f"{name}.running_mean"] = np.zeros(c, dtype=np.float32)
        tensors[f"{name}.running_var"] = np.ones(c, dtype=np.float32)

    for b, (c_in, c_out) in enumerate(block_channel_plan(cfg)):
        layer_in = c_in
        for j, kernel in enumerate(cfg.kernel_sizes):
            add_conv(f"block{b}.conv{j}", layer_in, c_out, kernel)
            add_bn(f"block{b}.bn{j}", c_out)
            layer_in = c_out
        if c_in != c_out:
            add_conv(f"block{b}.shortcut", c_in, c_out, 1)
            add_bn(f"block{b}.shortcut_bn", c_out)

    last = cfg.block_filters[-1]
    tensors["head.weight"] = _he_uniform(rng, (cfg.num_classes, last), last)
    tensors["head.bias"] = np.zeros(cfg.num_classes, dtype=np.float32)
    return ModelParams(config=cfg, tensors=tensors)
