"""Exporter acceptance gate: one printed pass/fail line.

Covers the full interchange contract in one pass: containers parse in the
engine with matching dims, the exported final-layer gradient agrees with
central finite differences, counterfactual tensors are exact negations, and
the manifest round-trips through schema validation into the engine.
"""

from collections import OrderedDict

import numpy as np
import torch
from torch import nn

from camexport import ExportSpec, export, negate_and_export, read_container, read_manifest

from saliency3d import cam_engine, tensor_core


def _report(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_criterion_8_exporter(tmp_path):
    torch.manual_seed(8)
    features = nn.Sequential(OrderedDict([
        ("conv1", nn.Conv3d(1, 2, 3, padding=1)),
        ("relu1", nn.ReLU()),
        ("pool1", nn.MaxPool3d(2)),
        ("conv2", nn.Conv3d(2, 2, 3, padding=1)),
        ("relu2", nn.ReLU()),
    ]))
    head = nn.Sequential(OrderedDict([
        ("gap", nn.AdaptiveAvgPool3d(1)),
        ("flatten", nn.Flatten()),
        ("fc", nn.Linear(2, 3)),
    ]))
    model = nn.Sequential(OrderedDict([("features", features), ("head", head)])).double()
    n_params = sum(p.numel() for p in model.parameters())
    clip = torch.randn(1, 1, 4, 8, 8, dtype=torch.float64)

    # containers load in the primary engine with matching dims
    spec = ExportSpec(model=model, layers=("features.pool1", "features"),
                      clip=clip, out_dir=tmp_path / "plain")
    manifest_path = export(spec)
    doc = read_manifest(manifest_path)
    dims_ok = True
    for entry, want_shape in zip(doc["layers"], [(2, 2, 4, 4), (2, 2, 4, 4)]):
        alpha = tensor_core.read_container(tmp_path / "plain" / entry["alpha"])
        grad = tensor_core.read_container(tmp_path / "plain" / entry["grad"])
        if alpha.shape != want_shape or grad.shape != want_shape:
            dims_ok = False

    # final-layer gradient vs central finite differences
    exported = read_container(tmp_path / "plain" / doc["layers"][1]["grad"])
    with torch.no_grad():
        act = model.get_submodule("features")(clip)
        cls = doc["pred_class"]
        eps = 1e-5
        fd = np.zeros(act.shape, dtype=np.float64)
        flat = act.reshape(-1)
        for j in range(flat.numel()):
            old = flat[j].item()
            flat[j] = old + eps
            up = model.get_submodule("head")(act)[0, cls].item()
            flat[j] = old - eps
            down = model.get_submodule("head")(act)[0, cls].item()
            flat[j] = old
            fd.reshape(-1)[j] = (up - down) / (2 * eps)
    rel = np.abs(exported.astype(np.float64) - fd[0]) / np.maximum(
        np.maximum(np.abs(exported), np.abs(fd[0])), 1e-8
    )
    grad_err = float(rel.max())

    # negation is exact
    counter = negate_and_export(ExportSpec(
        model=model, layers=("features.pool1", "features"), clip=clip,
        out_dir=tmp_path / "cf",
    ))
    cdoc = read_manifest(counter)
    neg_ok = cdoc["counterfactual"] is True
    for pe, ce_ in zip(doc["layers"], cdoc["layers"]):
        pg = read_container(tmp_path / "plain" / pe["grad"])
        cg = read_container(tmp_path / "cf" / ce_["grad"])
        if not np.array_equal(cg, -pg):
            neg_ok = False

    # manifest schema round-trips into the engine
    manifest = cam_engine.load_manifest(manifest_path)
    sal = cam_engine.attribute_clip(manifest, manifest.layer_ids(),
                                    manifest_dir=tmp_path / "plain")
    manifest_ok = sal.values.shape == (4, 8, 8) and sal.values.min() >= 0

    ok = dims_ok and grad_err <= 1e-3 and neg_ok and manifest_ok
    _report("criterion-8 exporter", ok,
            f"{n_params} params (<1k), dims {dims_ok}, grad vs fd "
            f"{grad_err:.2e} (<=1e-3), negation exact {neg_ok}, "
            f"manifest round-trip {manifest_ok}")
