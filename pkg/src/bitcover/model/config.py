"""Model and training hyperparameter containers."""

from __future__ import annotations

from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class ModelConfig:
    """Three-residual-block 1D classifier layout.

    padding_mode "circular" exists for structural tests of pooling
    shift-invariance; production configs use "zeros".
    """

    input_len: int
    num_classes: int
    channels: int = 1
    block_filters: tuple[int, int, int] = (256, 512, 512)
    kernel_sizes: tuple[int, int, int] = (8, 5, 3)
    seed: int = 0
    padding_mode: str = "zeros"

    def __post_init__(self):
        object.__setattr__(self, "block_filters", tuple(int(f) for f in self.block_filters))
        object.__setattr__(self, "kernel_sizes", tuple(int(k) for k in self.kernel_sizes))
        if self.input_len < 1:
            raise ValueError("input_len must be >= 1")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if len(self.block_filters) != 3 or any(f < 1 for f in self.block_filters):
            raise ValueError("block_filters must be three positive integers")
        if len(self.kernel_sizes) != 3:
            raise ValueError("kernel_sizes must list three kernels")
        if any(k < 1 or k > self.input_len for k in self.kernel_sizes):
            raise ValueError("kernel sizes must lie in 1..input_len")
        if self.padding_mode not in ("zeros", "circular"):
            raise ValueError("padding_mode must be 'zeros' or 'circular'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["block_filters"] = list(self.block_filters)
        d["kernel_sizes"] = list(self.kernel_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            input_len=int(d["input_len"]),
            num_classes=int(d["num_classes"]),
            channels=int(d.get("channels", 1)),
            block_filters=tuple(d.get("block_filters", (256, 512, 512))),
            kernel_sizes=tuple(d.get("kernel_sizes", (8, 5, 3))),
            seed=int(d.get("seed", 0)),
            padding_mode=d.get("padding_mode", "zeros"),
        )


@dataclass(frozen=True)
class TrainConfig:
    """Adam with plateau-halving learning rate and early stopping.

    An epoch counts as stalled when validation loss fails to improve by more
    than improvement_threshold; lr_patience stalled epochs halve the rate
    (never below min_lr) and early_stop_patience stalled epochs end training.
    """

    initial_lr: float = 1e-3
    lr_reduce_factor: float = 0.5
    lr_patience: int = 40
    early_stop_patience: int = 80
    min_lr: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 500
    validation_fraction: float = 0.2
    improvement_threshold: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lr_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be >= 1")
        if not 0.0 < self.lr_reduce_factor < 1.0:
            raise ValueError("lr_reduce_factor must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)
