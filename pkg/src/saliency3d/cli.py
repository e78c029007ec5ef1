"""Command-line pipeline: attribute, evaluate, overlay, train-demo, gradcheck.

Every run is reproducible: all randomness flows from --seed flags and the
same invocation produces byte-identical artifacts. --jobs (or the
SALIENCY3D_JOBS env var) parallelizes independent per-clip work without
changing any output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import cam_engine, tensor_core, toy_net3d, viz_render, weakloc_eval


def _jobs_default() -> int:
    try:
        return max(1, int(os.environ.get("SALIENCY3D_JOBS", "1")))
    except ValueError:
        return 1


def _run_tasks(tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        for t in tasks:
            t()
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for f in [pool.submit(t) for t in tasks]:
                f.result()


# ---------------------------------------------------------------------------
# subcommands


def _cmd_attribute(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    layers = [s for s in args.layers.split(",") if s] if args.layers else None

    def one(manifest_path: str):
        manifest = cam_engine.load_manifest(manifest_path)
        selected = layers if layers is not None else manifest.layer_ids()
        sal = cam_engine.attribute_clip(
            manifest, selected,
            manifest_dir=Path(manifest_path).parent,
            sigma=args.gaussian,
        )
        tensor_core.write_container(sal.values, out / f"{manifest.clip_id}.atc")

    _run_tasks([lambda p=p: one(p) for p in args.manifest], args.jobs)
    return 0


def _cmd_evaluate(args) -> int:
    sal_dir = Path(args.saliency)
    gt = weakloc_eval.load_gt_jsonl(args.gt)
    preds = json.loads(Path(args.pred).read_text()) if args.pred else {}
    mode = "best-iou-per-frame" if args.mode == "best-iou" else args.mode
    cfg = weakloc_eval.EvalConfig(mode=mode, pointing=args.pointing)

    frames, boxes, correct = [], [], []
    for path in sorted(sal_dir.glob("*.atc")):
        clip_id = path.stem
        if clip_id not in gt:
            continue
        volume = tensor_core.read_container(path)
        peak = tensor_core.max_all(volume)
        if peak > 0:
            volume = volume / peak  # clip-level renormalization
        clip_gt = gt[clip_id]["frames"]
        n = min(len(volume), len(clip_gt))
        is_correct = True
        if preds:
            is_correct = preds.get(clip_id) == gt[clip_id]["class"]
        for t in range(n):
            frames.append(volume[t])
            boxes.append(clip_gt[t])
            correct.append(is_correct)
    if not frames:
        print("evaluate: no clips shared between saliency dir and ground truth",
              file=sys.stderr)
        return 1
    report = weakloc_eval.max_box_acc(frames, boxes, cfg, correct=correct)
    report.write_json(args.out)
    if args.csv:
        report.write_csv(Path(args.out).with_suffix(".csv"))
    return 0


def _cmd_overlay(args) -> int:
    sal_dir = Path(args.saliency)
    frames_dir = Path(args.frames)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def one(path: Path):
        clip_id = path.stem
        volume = tensor_core.read_container(path)
        peak = tensor_core.max_all(volume)
        norm = volume / peak if peak > 0 else volume
        for t in range(len(volume)):
            frame_path = frames_dir / f"{clip_id}_f{t}.ppm"
            if not frame_path.exists():
                continue
            base = viz_render.read_ppm(frame_path)
            heat = viz_render.colorize(norm[t])
            blended = viz_render.overlay(base, heat, args.alpha)
            viz_render.write_ppm(blended, out / f"{clip_id}_f{t}_overlay.ppm")

    _run_tasks([lambda p=p: one(p) for p in sorted(sal_dir.glob("*.atc"))], args.jobs)
    return 0


def _cmd_train_demo(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_set = toy_net3d.gen_synthetic_videos(args.seed, args.n_per_class)
    test_set = toy_net3d.gen_synthetic_videos(args.seed + 1000, max(args.n_per_class // 4, 4))

    spec = toy_net3d.reference_spec()
    model = toy_net3d.Model(spec, seed=args.seed)
    gates = None
    if args.gated == "on":
        gates = toy_net3d.GateConfig(gate_layers=("conv", "layer1", "layer2"))
    hp = toy_net3d.Hyperparams(lr=args.lr, epochs=args.epochs,
                               batch_size=args.batch_size, seed=args.seed)
    result = toy_net3d.train(model, train_set, hp, gates=gates)
    train_acc = toy_net3d.evaluate_accuracy(model, train_set.clips, train_set.labels, gates)
    test_acc = toy_net3d.evaluate_accuracy(model, test_set.clips, test_set.labels, gates)

    toy_net3d.save_model(model, out / "model")
    (out / "accuracy.json").write_text(json.dumps({
        "seed": args.seed,
        "epochs": hp.epochs,
        "gated": args.gated == "on",
        "losses": result.losses,
        "lrs": result.lrs,
        "train_acc": train_acc,
        "test_acc": test_acc,
    }, indent=2) + "\n")

    # Dump attribution inputs for the first test clips of each class.
    dump_dir = out / "attribution"
    dump_dir.mkdir(exist_ok=True)
    gt_lines = []
    predictions = {}
    n_dump = min(args.export_clips, len(test_set.labels))
    for i in range(n_dump):
        clip_id = f"demo_{i:03d}"
        clip = test_set.clips[i : i + 1]
        logits, tape = toy_net3d.forward(model, clip)
        grads = toy_net3d.grads_wrt_activations(model, tape)
        pred = int(logits[0].argmax())
        predictions[clip_id] = pred
        entries = []
        for name in spec.taps:
            alpha = tape.activations[name][0].astype(np.float32)
            grad = grads[name][0].astype(np.float32)
            tensor_core.write_container(alpha, dump_dir / f"{clip_id}_{name}_alpha.atc")
            tensor_core.write_container(grad, dump_dir / f"{clip_id}_{name}_grad.atc")
            entries.append({
                "id": name,
                "alpha": f"{clip_id}_{name}_alpha.atc",
                "grad": f"{clip_id}_{name}_grad.atc",
            })
        manifest = cam_engine.AttributionManifest(
            clip_id=clip_id,
            pred_class=pred,
            pred_score=float(logits[0, pred]),
            target_dims=clip.shape[2:],
            layers=entries,
        )
        cam_engine.save_manifest(manifest, dump_dir / f"{clip_id}_manifest.json")
        for t, box in enumerate(test_set.boxes[i]):
            gt_lines.append(json.dumps({
                "clip_id": clip_id,
                "frame": t,
                "class": int(test_set.labels[i]),
                "boxes": [list(box)],
            }))
        for t in range(clip.shape[2]):
            viz_render.write_ppm(
                viz_render.gray_frame(clip[0, 0, t]),
                dump_dir / f"{clip_id}_f{t}.ppm",
            )
    (dump_dir / "boxes.jsonl").write_text("\n".join(gt_lines) + "\n")
    (dump_dir / "predictions.json").write_text(json.dumps(predictions, indent=2) + "\n")
    print(f"train acc {train_acc:.3f}  test acc {test_acc:.3f}")
    return 0


def _cmd_gradcheck(args) -> int:
    spec = toy_net3d.reference_spec()
    model = toy_net3d.Model(spec, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    clip = rng.normal(0.0, 1.0, size=(1, 1, 8, 16, 16)).astype(np.float64)
    err = toy_net3d.finite_diff_check(model, clip, eps=args.eps,
                                      n_coords=args.coords, seed=args.seed)
    print(f"max relative error {err:.3e}")
    return 0 if err <= 1e-4 else 1


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saliency3d",
        description="Global-local CAM attribution and localization scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attribute", help="compute aggregated saliency for manifests")
    p.add_argument("--manifest", nargs="+", required=True, help="manifest JSON path(s)")
    p.add_argument("--layers", default=None,
                   help="comma-separated layer ids (default: all in manifest)")
    p.add_argument("--gaussian", type=float, default=0.0, metavar="SIGMA",
                   help="Gaussian refinement sigma after upsampling")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=_jobs_default())
    p.set_defaults(func=_cmd_attribute)

    p = sub.add_parser("evaluate", help="score saliency against ground-truth boxes")
    p.add_argument("--saliency", required=True, help="directory of .atc volumes")
    p.add_argument("--gt", required=True, help="ground-truth boxes JSONL")
    p.add_argument("--mode", choices=["best-iou", "all-contours"], default="best-iou")
    p.add_argument("--pointing", choices=["peak", "any-overlap"], default="peak")
    p.add_argument("--pred", default=None,
                   help="predictions JSON {clip_id: class} for Acc2")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", action="store_true", help="also write per-theta CSV")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("overlay", help="blend heatmaps over frame pixmaps")
    p.add_argument("--saliency", required=True)
    p.add_argument("--frames", required=True, help="directory of <clip>_f<t>.ppm")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=_jobs_default())
    p.set_defaults(func=_cmd_overlay)

    p = sub.add_parser("train-demo", help="train the toy net on synthetic clips")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--gated", choices=["on", "off"], default="off")
    p.add_argument("--n-per-class", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--export-clips", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_demo)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--coords", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def dispatch(argv) -> int:
    """Exit code 0 on success, 1 on runtime failure, 2 on usage errors."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # runtime failure -> diagnostic + exit 1
        print(f"saliency3d: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
