from .config import ModelConfig, TrainConfig
from .params import ModelParams, init_params
from .network import forward, backward, loss, predict, Prediction
from .training import train, Adam
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "ModelConfig",
    "TrainConfig",
    "ModelParams",
    "init_params",
    "forward",
    "backward",
    "loss",
    "predict",
    "Prediction",
    "train",
    "Adam",
    "save_checkpoint",
    "load_checkpoint",
]
