"""Desk-scale 3D convolutional classifier with taps, gates, and gradients."""

from .gradcheck import finite_diff_check
from .model import (
    AvgPool3d,
    Conv3d,
    Dense,
    ForwardTape,
    GateConfig,
    GlobalAvgPool,
    MaxPool3d,
    Model,
    ModelSpec,
    Relu,
    ResidualAdd,
    attach_gates,
    backward,
    forward,
    forward_from,
    gated_forward,
    grads_wrt_activations,
    load_model,
    reference_spec,
    replay,
    save_model,
)
from .synthetic import SyntheticVideoSet, gen_synthetic_videos, load_videos, save_videos
from .train import (
    Hyperparams,
    TrainResult,
    cross_entropy,
    evaluate_accuracy,
    learning_rate,
    predict,
    train,
)

__all__ = [
    "AvgPool3d",
    "Conv3d",
    "Dense",
    "ForwardTape",
    "GateConfig",
    "GlobalAvgPool",
    "Hyperparams",
    "MaxPool3d",
    "Model",
    "ModelSpec",
    "Relu",
    "ResidualAdd",
    "SyntheticVideoSet",
    "TrainResult",
    "attach_gates",
    "backward",
    "cross_entropy",
    "evaluate_accuracy",
    "finite_diff_check",
    "forward",
    "forward_from",
    "gated_forward",
    "gen_synthetic_videos",
    "grads_wrt_activations",
    "learning_rate",
    "load_model",
    "load_videos",
    "predict",
    "reference_spec",
    "replay",
    "save_model",
    "save_videos",
    "train",
]
