"""saliency3d: global-local CAM attribution for 3D CNNs.

Computes per-layer spatio-temporal attribution maps from activations and
gradients, aggregates them across network depth, and scores the result with
weakly-supervised localization metrics. Ships a desk-scale 3D convolutional
network with exact gradients for end-to-end verification.
"""

from . import cam_engine, interp, tensor_core, toy_net3d, viz_render, weakloc_eval
from .errors import (
    DimensionError,
    DomainError,
    FormatError,
    TrainingDivergedError,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionError",
    "DomainError",
    "FormatError",
    "TrainingDivergedError",
    "cam_engine",
    "interp",
    "tensor_core",
    "toy_net3d",
    "viz_render",
    "weakloc_eval",
]
