"""Layer-sequence model with taps, exact reverse-mode gradients, and gates.

A model is an ordered list of layer descriptors; named outputs can be tapped
(recorded on the forward tape) and referenced by residual-add layers. The
backward pass walks the sequence in reverse accumulating adjoints per layer
output, which is also how gradients with respect to tap activations fall out.

Gated classification heads attach to named taps: the tap activation is
rectified, pooled over channels and space entirely, pooled over time by a
factor, and fed through a small fully-connected head; final logits are the
arithmetic mean of the backbone's and every gate head's logits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import tensor_core
from ..errors import DimensionError
from . import layers as L


# ---------------------------------------------------------------------------
# layer descriptors


@dataclass(frozen=True)
class Conv3d:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1
    name: str | None = None


@dataclass(frozen=True)
class Relu:
    name: str | None = None


@dataclass(frozen=True)
class MaxPool3d:
    kernel: int = 2
    stride: int | None = None
    name: str | None = None


@dataclass(frozen=True)
class AvgPool3d:
    kernel: int = 2
    stride: int | None = None
    name: str | None = None


@dataclass(frozen=True)
class ResidualAdd:
    source: str
    name: str | None = None


@dataclass(frozen=True)
class GlobalAvgPool:
    name: str | None = None


@dataclass(frozen=True)
class Dense:
    out_features: int
    name: str | None = None


_DESCRIPTOR_TYPES = {
    "conv3d": Conv3d,
    "relu": Relu,
    "maxpool3d": MaxPool3d,
    "avgpool3d": AvgPool3d,
    "residual_add": ResidualAdd,
    "global_avgpool": GlobalAvgPool,
    "dense": Dense,
}
_TYPE_TAGS = {cls: tag for tag, cls in _DESCRIPTOR_TYPES.items()}


@dataclass
class ModelSpec:
    """Topology: ordered descriptors, class count, and tap names."""

    layers: list
    classes: int
    in_channels: int = 1
    taps: tuple[str, ...] = ()

    def __post_init__(self):
        names = [d.name for d in self.layers if d.name is not None]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate layer names: {names}")
        known = set(names)
        for tap in self.taps:
            if tap not in known:
                raise ValueError(f"tap {tap!r} names no layer")
        seen: set[str] = set()
        for d in self.layers:
            if isinstance(d, ResidualAdd) and d.source not in seen:
                raise ValueError(
                    f"residual source {d.source!r} must name an earlier layer"
                )
            if d.name is not None:
                seen.add(d.name)
        if not self.layers or not isinstance(self.layers[-1], Dense):
            raise ValueError("final layer must be dense")
        if self.layers[-1].out_features != self.classes:
            raise ValueError(
                f"final dense emits {self.layers[-1].out_features} logits, "
                f"expected {self.classes}"
            )


@dataclass(frozen=True)
class GateConfig:
    """Which taps get classification heads and how time is pooled.

    ``temporal_factor`` t pools T frames to ceil(T/t) groups (trailing group
    averages only the frames present). ``fusion`` currently supports "mean";
    ``include_backbone`` controls whether the backbone logits join the mean.
    """

    gate_layers: tuple[str, ...]
    temporal_factor: int = 2
    fusion: str = "mean"
    include_backbone: bool = True

    def __post_init__(self):
        if self.temporal_factor < 1:
            raise ValueError("temporal_factor must be >= 1")
        if self.fusion != "mean":
            raise ValueError(f"unknown fusion rule {self.fusion!r}")


@dataclass
class ForwardTape:
    """Everything the backward pass and the attribution exporter need."""

    clip: np.ndarray
    outputs: list
    caches: list
    activations: dict
    logits: np.ndarray


class Model:
    """ModelSpec plus parameters (and, once attached, gate heads)."""

    def __init__(self, spec: ModelSpec, seed: int = 0, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.params: list[dict[str, np.ndarray]] = []
        self.gate_heads: dict[str, dict[str, np.ndarray]] = {}
        rng = np.random.default_rng(seed)
        channels = spec.in_channels
        features = None
        for d in spec.layers:
            if isinstance(d, Conv3d):
                k = L._triple(d.kernel)
                fan_in = channels * k[0] * k[1] * k[2]
                w = rng.normal(0.0, math.sqrt(2.0 / fan_in),
                               (d.out_channels, channels, *k))
                self.params.append({
                    "w": w.astype(self.dtype),
                    "b": np.zeros(d.out_channels, dtype=self.dtype),
                })
                channels = d.out_channels
            elif isinstance(d, GlobalAvgPool):
                features = channels
                self.params.append({})
            elif isinstance(d, Dense):
                if features is None:
                    raise ValueError("dense layer needs global_avgpool or dense before it")
                w = rng.normal(0.0, math.sqrt(1.0 / features),
                               (d.out_features, features))
                self.params.append({
                    "w": w.astype(self.dtype),
                    "b": np.zeros(d.out_features, dtype=self.dtype),
                })
                features = d.out_features
            else:
                self.params.append({})

    # -- parameter plumbing -------------------------------------------------

    def param_items(self):
        """Yields (label, array) for every parameter, gate heads included."""
        for i, p in enumerate(self.params):
            for key, arr in p.items():
                yield f"layer{i}.{key}", arr
        for name in sorted(self.gate_heads):
            for key, arr in self.gate_heads[name].items():
                yield f"gate.{name}.{key}", arr

    def astype(self, dtype) -> "Model":
        """Copy of the model with parameters cast (used by gradient checks)."""
        clone = Model.__new__(Model)
        clone.spec = self.spec
        clone.dtype = np.dtype(dtype)
        clone.params = [
            {k: v.astype(dtype) for k, v in p.items()} for p in self.params
        ]
        clone.gate_heads = {
            n: {k: v.astype(dtype) for k, v in h.items()}
            for n, h in self.gate_heads.items()
        }
        return clone


# ---------------------------------------------------------------------------
# forward / backward


def _layer_forward(d, x, params, outputs, name_to_idx):
    if isinstance(d, Conv3d):
        return L.conv3d_forward(x, params["w"], params["b"], d.stride, d.padding)
    if isinstance(d, Relu):
        return L.relu_forward(x)
    if isinstance(d, MaxPool3d):
        return L.maxpool3d_forward(x, d.kernel, d.stride)
    if isinstance(d, AvgPool3d):
        return L.avgpool3d_forward(x, d.kernel, d.stride)
    if isinstance(d, ResidualAdd):
        src = outputs[name_to_idx[d.source]]
        if src.shape != x.shape:
            raise DimensionError(
                f"residual add: source {d.source!r} dims {src.shape} != {x.shape}"
            )
        return x + src, None
    if isinstance(d, GlobalAvgPool):
        return L.global_avgpool_forward(x)
    if isinstance(d, Dense):
        return L.dense_forward(x, params["w"], params["b"])
    raise TypeError(f"unknown descriptor {d!r}")


def _name_to_idx(spec: ModelSpec) -> dict[str, int]:
    return {d.name: i for i, d in enumerate(spec.layers) if d.name is not None}


def forward(model: Model, clip: np.ndarray) -> tuple[np.ndarray, ForwardTape]:
    """Run the backbone; returns logits (B, classes) and the tape."""
    if clip.ndim != 5:
        raise DimensionError(f"clip must be B x C x T x H x W, got rank {clip.ndim}")
    if clip.shape[1] != model.spec.in_channels:
        raise DimensionError(
            f"clip has {clip.shape[1]} channels, model expects {model.spec.in_channels}"
        )
    names = _name_to_idx(model.spec)
    outputs: list = []
    caches: list = []
    x = clip
    for d, params in zip(model.spec.layers, model.params):
        x, cache = _layer_forward(d, x, params, outputs, names)
        outputs.append(x)
        caches.append(cache)
    activations = {t: outputs[names[t]] for t in model.spec.taps}
    return x, ForwardTape(clip, outputs, caches, activations, x)


def replay(model: Model, tape: ForwardTape) -> np.ndarray:
    """Recompute logits from the taped clip (tape fidelity check)."""
    logits, _ = forward(model, tape.clip)
    return logits


def backward(model: Model, tape: ForwardTape, dlogits: np.ndarray,
             inject: dict[int, np.ndarray] | None = None):
    """Reverse pass from a logits adjoint.

    Returns (dclip, param_grads, out_adjoints) where out_adjoints[i] is the
    gradient with respect to layer i's output. ``inject`` adds extra adjoint
    at named layer indices (used by gate heads).
    """
    spec = model.spec
    names = _name_to_idx(spec)
    n = len(spec.layers)
    adj: list = [None] * n
    adj[n - 1] = dlogits.copy()
    if inject:
        for idx, extra in inject.items():
            adj[idx] = extra.copy() if adj[idx] is None else adj[idx] + extra
    param_grads: list[dict[str, np.ndarray]] = [{} for _ in range(n)]
    dclip = np.zeros_like(tape.clip)

    def _route(i: int, dx: np.ndarray):
        nonlocal dclip
        if i == 0:
            dclip = dclip + dx
        elif adj[i - 1] is None:
            adj[i - 1] = dx
        else:
            adj[i - 1] = adj[i - 1] + dx

    for i in reversed(range(n)):
        da = adj[i]
        if da is None:
            adj[i] = np.zeros_like(tape.outputs[i])
            continue
        d = spec.layers[i]
        cache = tape.caches[i]
        if isinstance(d, Conv3d):
            dx, dw, db = L.conv3d_backward(da, cache, model.params[i]["w"],
                                           d.stride, d.padding)
            param_grads[i] = {"w": dw, "b": db}
            _route(i, dx)
        elif isinstance(d, Relu):
            _route(i, L.relu_backward(da, cache))
        elif isinstance(d, MaxPool3d):
            _route(i, L.maxpool3d_backward(da, cache))
        elif isinstance(d, AvgPool3d):
            _route(i, L.avgpool3d_backward(da, cache))
        elif isinstance(d, ResidualAdd):
            _route(i, da)
            src = names[d.source]
            adj[src] = da.copy() if adj[src] is None else adj[src] + da
        elif isinstance(d, GlobalAvgPool):
            _route(i, L.global_avgpool_backward(da, cache))
        elif isinstance(d, Dense):
            dx, dw, db = L.dense_backward(da, cache, model.params[i]["w"])
            param_grads[i] = {"w": dw, "b": db}
            _route(i, dx)
    return dclip, param_grads, adj


def select_classes(logits: np.ndarray, cls=None) -> np.ndarray:
    """Per-row class index: argmax by default, or a fixed index."""
    if cls is None:
        return logits.argmax(axis=1)
    cls = int(cls)
    if not (0 <= cls < logits.shape[1]):
        raise ValueError(f"class index {cls} out of range [0, {logits.shape[1]})")
    return np.full(logits.shape[0], cls, dtype=np.intp)


def grads_wrt_activations(model: Model, tape: ForwardTape, cls=None) -> dict[str, np.ndarray]:
    """Gradient of the selected class score with respect to each tap activation."""
    classes = select_classes(tape.logits, cls)
    dlogits = np.zeros_like(tape.logits)
    dlogits[np.arange(len(classes)), classes] = 1
    _, _, adjoints = backward(model, tape, dlogits)
    names = _name_to_idx(model.spec)
    return {t: adjoints[names[t]] for t in model.spec.taps}


def forward_from(model: Model, tape: ForwardTape, start: int,
                 replaced: np.ndarray) -> np.ndarray:
    """Logits after substituting layer ``start``'s output and replaying the rest.

    Earlier outputs come from the tape, so residual sources below ``start``
    are untouched while references to ``start`` itself see the replacement.
    """
    names = _name_to_idx(model.spec)
    outputs = list(tape.outputs)
    outputs[start] = replaced
    x = replaced
    for i in range(start + 1, len(model.spec.layers)):
        d = model.spec.layers[i]
        x, _ = _layer_forward(d, x, model.params[i], outputs, names)
        outputs[i] = x
    return x


# ---------------------------------------------------------------------------
# gated attention heads


def _temporal_groups(T: int, factor: int) -> list[tuple[int, int]]:
    """Half-open frame ranges per pooled group; ceil split, last may be short."""
    return [(g * factor, min((g + 1) * factor, T))
            for g in range(math.ceil(T / factor))]


def gate_head_inputs(activation: np.ndarray, factor: int) -> np.ndarray:
    """ReLU, pool channels+space entirely, pool time by ``factor`` -> (B, T/t)."""
    if activation.ndim != 5:
        raise DimensionError(
            f"gate needs a B x C x T x H x W activation, got rank {activation.ndim}"
        )
    z = np.maximum(activation, 0).mean(axis=(1, 3, 4))  # (B, T)
    groups = _temporal_groups(z.shape[1], factor)
    pooled = np.stack([z[:, a:b].mean(axis=1) for a, b in groups], axis=1)
    return pooled


def attach_gates(model: Model, gates: GateConfig, clip_dims, seed: int = 0) -> None:
    """Create gate-head parameters sized from a dry forward on a dummy clip."""
    for name in gates.gate_layers:
        if name not in model.spec.taps:
            raise KeyError(f"gate layer {name!r} is not a tap of the model")
    dummy = np.zeros((1, model.spec.in_channels, *clip_dims), dtype=model.dtype)
    _, tape = forward(model, dummy)
    rng = np.random.default_rng(seed)
    for name in gates.gate_layers:
        pooled = gate_head_inputs(tape.activations[name], gates.temporal_factor)
        fan_in = pooled.shape[1]
        w = rng.normal(0.0, math.sqrt(1.0 / fan_in),
                       (model.spec.classes, fan_in))
        model.gate_heads[name] = {
            "w": w.astype(model.dtype),
            "b": np.zeros(model.spec.classes, dtype=model.dtype),
        }


def gated_forward(model: Model, clip: np.ndarray, gates: GateConfig) -> np.ndarray:
    """Mean-fused logits of the backbone head and every gate head."""
    logits, tape = _gated_forward_tape(model, clip, gates)
    return logits


def _gated_forward_tape(model: Model, clip: np.ndarray, gates: GateConfig):
    backbone_logits, tape = forward(model, clip)
    head_logits = []
    if gates.include_backbone:
        head_logits.append(backbone_logits)
    for name in gates.gate_layers:
        if name not in tape.activations:
            raise KeyError(f"gate layer {name!r} is not a tap of the model")
        if name not in model.gate_heads:
            raise KeyError(f"gate head for {name!r} not attached")
        pooled = gate_head_inputs(tape.activations[name], gates.temporal_factor)
        head = model.gate_heads[name]
        head_logits.append(pooled @ head["w"].T + head["b"])
    if not head_logits:
        raise ValueError("gate fusion set is empty")
    fused = sum(head_logits) / len(head_logits)
    return fused, tape


def gated_backward(model: Model, tape: ForwardTape, gates: GateConfig,
                   dfused: np.ndarray):
    """Parameter gradients (backbone list + per-gate dict) for fused logits."""
    names = _name_to_idx(model.spec)
    n_heads = len(gates.gate_layers) + (1 if gates.include_backbone else 0)
    dhead = dfused / n_heads
    inject: dict[int, np.ndarray] = {}
    gate_grads: dict[str, dict[str, np.ndarray]] = {}
    for name in gates.gate_layers:
        act = tape.activations[name]
        B, C, T, H, W = act.shape
        pooled = gate_head_inputs(act, gates.temporal_factor)
        head = model.gate_heads[name]
        gate_grads[name] = {
            "w": dhead.T @ pooled,
            "b": dhead.sum(axis=0),
        }
        dpooled = dhead @ head["w"]  # (B, G)
        groups = _temporal_groups(T, gates.temporal_factor)
        dz = np.zeros((B, T), dtype=act.dtype)
        for g, (a, b) in enumerate(groups):
            dz[:, a:b] = (dpooled[:, g] / (b - a))[:, None]
        dact = np.broadcast_to(
            dz[:, None, :, None, None] / (C * H * W), act.shape
        ) * (act > 0)
        idx = names[name]
        inject[idx] = inject.get(idx, 0) + dact.astype(act.dtype)
    dlogits = dhead if gates.include_backbone else np.zeros_like(tape.logits)
    dclip, param_grads, _ = backward(model, tape, dlogits, inject=inject)
    return dclip, param_grads, gate_grads


# ---------------------------------------------------------------------------
# serialization: topology JSON + one container per parameter


def save_model(model: Model, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    topo = {
        "classes": model.spec.classes,
        "in_channels": model.spec.in_channels,
        "taps": list(model.spec.taps),
        "layers": [],
    }
    for d in model.spec.layers:
        entry = {"type": _TYPE_TAGS[type(d)]}
        entry.update({k: v for k, v in d.__dict__.items() if v is not None})
        topo["layers"].append(entry)
    if model.gate_heads:
        topo["gate_heads"] = sorted(model.gate_heads)
    (out / "topology.json").write_text(json.dumps(topo, indent=2) + "\n")
    for i, p in enumerate(model.params):
        for key, arr in p.items():
            tensor_core.write_container(arr, out / f"layer{i}_{key}.atc")
    for name, head in model.gate_heads.items():
        for key, arr in head.items():
            tensor_core.write_container(arr, out / f"gate_{name}_{key}.atc")


def load_model(in_dir) -> Model:
    src = Path(in_dir)
    topo = json.loads((src / "topology.json").read_text())
    descriptors = []
    for entry in topo["layers"]:
        kind = entry.pop("type")
        descriptors.append(_DESCRIPTOR_TYPES[kind](**entry))
    spec = ModelSpec(
        layers=descriptors,
        classes=topo["classes"],
        in_channels=topo["in_channels"],
        taps=tuple(topo["taps"]),
    )
    model = Model(spec, seed=0)
    for i in range(len(model.params)):
        for key in model.params[i]:
            model.params[i][key] = tensor_core.read_container(
                src / f"layer{i}_{key}.atc"
            ).astype(model.dtype)
    for name in topo.get("gate_heads", []):
        model.gate_heads[name] = {
            key: tensor_core.read_container(src / f"gate_{name}_{key}.atc").astype(model.dtype)
            for key in ("w", "b")
        }
    return model


def reference_spec(classes: int = 4, in_channels: int = 1) -> ModelSpec:
    """The desk-scale topology used throughout the tests and demos.

    Tap dims shrink by 2x per stage like the backbone networks this stands
    in for; the residual add wraps the middle stage's rectification.
    """
    return ModelSpec(
        layers=[
            Conv3d(8, kernel=3, stride=1, padding=1),
            Relu(),
            MaxPool3d(2, name="conv"),
            Conv3d(16, kernel=3, stride=1, padding=1, name="layer1_conv"),
            Relu(),
            ResidualAdd(source="layer1_conv"),
            MaxPool3d(2, name="layer1"),
            Conv3d(32, kernel=3, stride=1, padding=1),
            Relu(),
            MaxPool3d(2, name="layer2"),
            GlobalAvgPool(),
            Dense(classes),
        ],
        classes=classes,
        in_channels=in_channels,
        taps=("conv", "layer1", "layer2"),
    )
