from .config import ModelConfig
from .params import ModelParams, load_checkpoint, save_checkpoint
from .model import (
    ComponentActivations,
    model_forward,
    model_backward,
    spectrogram_to_input,
)

__all__ = [
    "ModelConfig",
    "ModelParams",
    "ComponentActivations",
    "model_forward",
    "model_backward",
    "spectrogram_to_input",
    "load_checkpoint",
    "save_checkpoint",
]
