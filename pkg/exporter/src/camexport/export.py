"""Hook-based activation and gradient export from torch models.

Registers forward hooks on named submodules, runs one forward pass on a
single clip, backpropagates the selected class score, and writes per-layer
activation/gradient containers plus an attribution manifest. Gradients are
taken with respect to layer outputs (post-activation); pass tap="input" to
capture module inputs instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .containers import write_container
from .manifest import write_manifest


@dataclass
class ExportSpec:
    model: torch.nn.Module
    layers: tuple[str, ...]
    clip: torch.Tensor  # (1, C, T, H, W) for video or (1, C, H, W) for image
    out_dir: Path
    clip_id: str = "clip"
    class_index: int | None = None  # None selects the argmax
    tap: str = "output"  # "output" (post-activation) or "input"

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.layers = tuple(self.layers)
        if not self.layers:
            raise ValueError("need at least one layer to tap")
        if self.tap not in ("output", "input"):
            raise ValueError(f"tap must be 'output' or 'input', got {self.tap!r}")
        if self.clip.ndim not in (4, 5):
            raise ValueError(
                f"clip must be batched 4-D (image) or 5-D (video), got rank {self.clip.ndim}"
            )
        if self.clip.shape[0] != 1:
            raise ValueError("export works on a single clip (batch dim 1)")


def _resolve(model: torch.nn.Module, name: str) -> torch.nn.Module:
    try:
        return model.get_submodule(name)
    except AttributeError as exc:
        raise KeyError(f"layer {name!r} does not resolve on the model") from exc


def _capture(spec: ExportSpec) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    captured: dict[str, torch.Tensor] = {}
    handles = []

    def make_hook(name):
        def hook(module, inputs, output):
            tensor = inputs[0] if spec.tap == "input" else output
            if not isinstance(tensor, torch.Tensor):
                raise TypeError(f"layer {name!r} does not produce a single tensor")
            captured[name] = tensor
        return hook

    for name in spec.layers:
        handles.append(_resolve(spec.model, name).register_forward_hook(make_hook(name)))
    try:
        spec.model.eval()
        logits = spec.model(spec.clip)
    finally:
        for h in handles:
            h.remove()
    missing = [n for n in spec.layers if n not in captured]
    if missing:
        raise KeyError(f"layers never ran in the forward pass: {missing}")
    return logits, captured


def _export(spec: ExportSpec, negate: bool) -> Path:
    logits, captured = _capture(spec)
    if logits.ndim != 2:
        raise ValueError(f"model must emit (batch, classes) logits, got {tuple(logits.shape)}")
    if spec.class_index is None:
        cls = int(logits[0].argmax())
    else:
        cls = spec.class_index
        if not (0 <= cls < logits.shape[1]):
            raise ValueError(f"class index {cls} out of range")
    score = logits[0, cls]
    grads = torch.autograd.grad(score, [captured[n] for n in spec.layers])
    logits = logits.detach()

    spec.out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, grad in zip(spec.layers, grads):
        alpha = captured[name].detach()[0].cpu().numpy().astype(np.float32)
        g = grad.detach()[0].cpu().numpy().astype(np.float32)
        if negate:
            g = -g
        safe = name.replace(".", "_")
        alpha_file = f"{spec.clip_id}_{safe}_alpha.atc"
        grad_file = f"{spec.clip_id}_{safe}_grad.atc"
        write_container(alpha, spec.out_dir / alpha_file)
        write_container(g, spec.out_dir / grad_file)
        entries.append({"id": name, "alpha": alpha_file, "grad": grad_file})

    doc = {
        "clip_id": spec.clip_id,
        "pred_class": int(logits[0].argmax()),
        "pred_score": float(logits[0].max()),
        "target_dims": [int(d) for d in spec.clip.shape[2:]],
        "layers": entries,
    }
    if negate:
        doc["counterfactual"] = True
    name = "manifest_counterfactual.json" if negate else "manifest.json"
    manifest_path = spec.out_dir / name
    write_manifest(doc, manifest_path)
    return manifest_path


def export(spec: ExportSpec) -> Path:
    """One forward + backward; writes containers and the manifest JSON."""
    return _export(spec, negate=False)


def negate_and_export(spec: ExportSpec) -> Path:
    """Counterfactual export: gradients are negated before writing."""
    return _export(spec, negate=True)
