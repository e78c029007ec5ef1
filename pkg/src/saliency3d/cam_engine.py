"""Attribution core: per-layer gradient fields, layer CAMs, and aggregation.

For every tapped layer the channel-summed gradient field and channel-summed
activation field are upsampled to the clip resolution, max-normalized,
rectified, and multiplied. Aggregating the per-layer maps (plain sum of
nonnegative volumes) yields the global-local attribution. The aggregate is
deliberately not renormalized here; rendering and evaluation renormalize by
the aggregate's own max so score thresholds in [0, 1] stay meaningful.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import interp, tensor_core
from .errors import DimensionError


@dataclass
class LayerRecord:
    """One tapped layer: activation field and gradient of the class score.

    Both arrays are C x T x H x W for clips or C x H x W for images and must
    have identical dims.
    """

    layer_id: str
    alpha: np.ndarray
    grad: np.ndarray

    def __post_init__(self):
        if self.alpha.shape != self.grad.shape:
            raise DimensionError(
                f"layer {self.layer_id}: alpha dims {self.alpha.shape} != "
                f"grad dims {self.grad.shape}"
            )


@dataclass
class SaliencyVolume:
    """Nonnegative attribution map (T x H x W, or H x W for images)."""

    values: np.ndarray
    provenance: tuple[str, ...] = ()


@dataclass
class AttributionManifest:
    """Pointers to a clip's layer dumps plus the prediction they explain."""

    clip_id: str
    pred_class: int
    pred_score: float
    target_dims: tuple[int, ...]
    layers: list[dict] = field(default_factory=list)  # {"id", "alpha", "grad"} paths
    counterfactual: bool = False

    def layer_ids(self) -> list[str]:
        return [entry["id"] for entry in self.layers]


def beta_from_gradients(grad: np.ndarray) -> np.ndarray:
    """Channel-summed gradient field; signed, no rectification yet."""
    return tensor_core.channel_sum(grad)


def alpha_reduce(alpha: np.ndarray) -> np.ndarray:
    """Channel-summed activation field, mirroring the gradient reduction."""
    return tensor_core.channel_sum(alpha)


def negate_gradients(grad: np.ndarray) -> np.ndarray:
    """Counterfactual gradient field: elementwise negation."""
    return -grad


def normalize_relu(field_vals: np.ndarray, target, sigma: float = 0.0) -> SaliencyVolume:
    """Upsample a T x H x W field, divide by its max, rectify.

    If the upsampled field has max <= 0 the result is all zeros (dead layer
    guard). Optional Gaussian refinement is applied right after upsampling,
    before normalization. Output values lie in [0, 1].
    """
    u = interp.upsample_trilinear(field_vals, target)
    if sigma > 0:
        u = interp.gaussian_refine(u, sigma)
    m = tensor_core.max_all(u)
    if m <= 0:
        return SaliencyVolume(np.zeros(u.shape, dtype=np.float32))
    return SaliencyVolume(tensor_core.relu_map(u / np.float32(m)).astype(np.float32))


def _normalize_relu_2d(field_vals: np.ndarray, target, sigma: float = 0.0) -> SaliencyVolume:
    u = interp.upsample_bilinear(field_vals, target)
    if sigma > 0:
        u = interp.gaussian_refine(u, sigma)
    m = tensor_core.max_all(u)
    if m <= 0:
        return SaliencyVolume(np.zeros(u.shape, dtype=np.float32))
    return SaliencyVolume(tensor_core.relu_map(u / np.float32(m)).astype(np.float32))


def cam_layer(rec: LayerRecord, target, sigma: float = 0.0) -> SaliencyVolume:
    """Per-layer CAM: rectified-normalized gradient field times activation field."""
    if rec.grad.ndim != 4:
        raise DimensionError(
            f"layer {rec.layer_id}: expected rank-4 C x T x H x W fields, "
            f"got rank {rec.grad.ndim}"
        )
    g = normalize_relu(beta_from_gradients(rec.grad), target, sigma)
    a = normalize_relu(alpha_reduce(rec.alpha), target, sigma)
    return SaliencyVolume(g.values * a.values, provenance=(rec.layer_id,))


def cam_2d(rec: LayerRecord, target, sigma: float = 0.0) -> SaliencyVolume:
    """Image variant: same pipeline on C x H x W fields with bilinear upsampling."""
    if rec.grad.ndim != 3:
        raise DimensionError(
            f"layer {rec.layer_id}: expected rank-3 C x H x W fields, "
            f"got rank {rec.grad.ndim}"
        )
    g = _normalize_relu_2d(_channel_sum_2d(rec.grad), target, sigma)
    a = _normalize_relu_2d(_channel_sum_2d(rec.alpha), target, sigma)
    return SaliencyVolume(g.values * a.values, provenance=(rec.layer_id,))


def _channel_sum_2d(t: np.ndarray) -> np.ndarray:
    """C x H x W -> H x W, float64 accumulation in ascending channel order."""
    acc = np.zeros(t.shape[1:], dtype=np.float64)
    for c in range(t.shape[0]):
        acc += t[c]
    return acc.astype(np.float32)


def aggregate(cams: list[SaliencyVolume]) -> SaliencyVolume:
    """Rectified sum of per-layer CAMs; for nonnegative inputs, the plain sum.

    Summation runs in float64 in the given layer order.
    """
    if len(cams) == 0:
        raise ValueError("aggregate needs at least one saliency volume")
    dims = cams[0].values.shape
    for cam in cams[1:]:
        if cam.values.shape != dims:
            raise DimensionError(
                f"aggregate dims mismatch: {cam.values.shape} vs {dims}"
            )
    acc = np.zeros(dims, dtype=np.float64)
    provenance: tuple[str, ...] = ()
    for cam in cams:
        acc += cam.values
        provenance += cam.provenance
    return SaliencyVolume(
        tensor_core.relu_map(acc).astype(np.float32), provenance=provenance
    )


def load_manifest(path) -> AttributionManifest:
    """Parse an AttributionManifest JSON file."""
    raw = json.loads(Path(path).read_text())
    return AttributionManifest(
        clip_id=raw["clip_id"],
        pred_class=int(raw["pred_class"]),
        pred_score=float(raw["pred_score"]),
        target_dims=tuple(int(d) for d in raw["target_dims"]),
        layers=list(raw["layers"]),
        counterfactual=bool(raw.get("counterfactual", False)),
    )


def save_manifest(manifest: AttributionManifest, path) -> None:
    doc = {
        "clip_id": manifest.clip_id,
        "pred_class": manifest.pred_class,
        "pred_score": manifest.pred_score,
        "target_dims": list(manifest.target_dims),
        "layers": manifest.layers,
    }
    if manifest.counterfactual:
        doc["counterfactual"] = True
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _load_record(manifest_dir: Path, entry: dict) -> LayerRecord:
    alpha = tensor_core.read_container(manifest_dir / entry["alpha"])
    grad = tensor_core.read_container(manifest_dir / entry["grad"])
    return LayerRecord(layer_id=entry["id"], alpha=alpha, grad=grad)


def attribute_clip(
    manifest: AttributionManifest,
    selected_layers,
    manifest_dir=None,
    sigma: float = 0.0,
    records: dict[str, LayerRecord] | None = None,
) -> SaliencyVolume:
    """Aggregate the per-layer CAMs of the selected layers at the clip dims.

    Layer tensors are read from the container paths in the manifest (relative
    to manifest_dir) unless preloaded records are supplied. Image manifests
    (2-extent target_dims) route through the bilinear pipeline.
    """
    selected = list(selected_layers)
    if not selected:
        raise ValueError("attribute_clip needs a non-empty layer selection")
    by_id = {entry["id"]: entry for entry in manifest.layers}
    for layer_id in selected:
        if layer_id not in by_id:
            raise KeyError(f"layer {layer_id!r} not in manifest {manifest.clip_id}")
    base = Path(manifest_dir) if manifest_dir is not None else Path(".")
    cams = []
    for layer_id in selected:
        if records is not None and layer_id in records:
            rec = records[layer_id]
        else:
            rec = _load_record(base, by_id[layer_id])
        if len(manifest.target_dims) == 2:
            cams.append(cam_2d(rec, manifest.target_dims, sigma))
        else:
            cams.append(cam_layer(rec, manifest.target_dims, sigma))
    return aggregate(cams)
