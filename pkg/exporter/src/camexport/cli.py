"""camexport CLI: dump activations/gradients from a saved torch model.

The model file is loaded with torch.load (pickled modules), falling back to
torch.jit.load for TorchScript archives. The input clip is an ATC1
container: rank 4 (C x T x H x W) for video models, rank 3 (C x H x W) for
image models; a batch dimension is added automatically.
"""

from __future__ import annotations

import argparse
import sys

import torch

from .containers import read_container
from .export import ExportSpec, export, negate_and_export


def _load_model(path: str) -> torch.nn.Module:
    try:
        model = torch.load(path, map_location="cpu", weights_only=False)
    except Exception:
        model = torch.jit.load(path, map_location="cpu")
    if not isinstance(model, torch.nn.Module):
        raise TypeError(f"{path} did not contain a torch module")
    return model


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camexport",
        description="Export layer activations and class-score gradients.",
    )
    parser.add_argument("command", choices=["export"])
    parser.add_argument("--model", required=True, help="TorchScript or pickled module")
    parser.add_argument("--layers", required=True,
                        help="comma-separated submodule names to tap")
    parser.add_argument("--input", required=True, help="clip container (.atc)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--class", dest="class_rule", default="argmax",
                        help="class index or 'argmax'")
    parser.add_argument("--negate", action="store_true",
                        help="counterfactual export (negated gradients)")
    parser.add_argument("--clip-id", default="clip")
    parser.add_argument("--tap", choices=["output", "input"], default="output")
    return parser


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        model = _load_model(args.model)
        arr = read_container(args.input)
        if arr.ndim not in (3, 4):
            raise ValueError(
                f"input clip must be rank 3 (image) or 4 (video), got {arr.ndim}"
            )
        clip = torch.from_numpy(arr).float().unsqueeze(0)
        cls = None if args.class_rule == "argmax" else int(args.class_rule)
        spec = ExportSpec(
            model=model,
            layers=tuple(s for s in args.layers.split(",") if s),
            clip=clip,
            out_dir=args.out,
            clip_id=args.clip_id,
            class_index=cls,
            tap=args.tap,
        )
        run = negate_and_export if args.negate else export
        manifest_path = run(spec)
        print(manifest_path)
        return 0
    except Exception as exc:
        print(f"camexport: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
