"""Weakly-supervised localization scoring.

Saliency sequences are renormalized by their global max, binarized over a
grid of score thresholds tau, and the tightest boxes around connected
components are matched against ground truth by IoU. Box accuracy at an IoU
threshold theta is reported per theta and averaged; the pointing game counts
a frame as a Hit when the saliency peak lands inside a ground-truth box.

Two protocols are implemented: ``best-iou-per-frame`` takes each frame's
best IoU over the whole tau grid (the video protocol), ``all-contours``
picks, per theta, the single tau that maximizes dataset-level accuracy (the
image protocol). The mode used is always recorded in the report.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

VIDEO_THETAS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
IMAGE_THETAS = (0.3, 0.5, 0.7)


@dataclass(frozen=True)
class Box:
    """Axis-aligned pixel box; x0/y0 inclusive, x1/y1 exclusive."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {self}")

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def as_list(self) -> list[int]:
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass
class EvalConfig:
    taus: tuple = tuple(round(0.01 * i, 2) for i in range(101))
    thetas: tuple | None = None
    mode: str = "best-iou-per-frame"
    connectivity: int = 8
    pointing: str = "peak"  # or "any-overlap"

    def __post_init__(self):
        if self.mode not in ("best-iou-per-frame", "all-contours"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.pointing not in ("peak", "any-overlap"):
            raise ValueError(f"unknown pointing mode {self.pointing!r}")
        if self.thetas is None:
            self.thetas = (
                IMAGE_THETAS if self.mode == "all-contours" else VIDEO_THETAS
            )
        self.taus = tuple(sorted(float(t) for t in self.taus))
        if any(t < 0 or t > 1 for t in self.taus):
            raise ValueError("taus must lie in [0, 1]")
        if any(t <= 0 or t > 1 for t in self.thetas):
            raise ValueError("thetas must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "taus": list(self.taus),
            "thetas": list(self.thetas),
            "mode": self.mode,
            "connectivity": self.connectivity,
            "pointing": self.pointing,
        }


@dataclass
class EvalReport:
    hits: int
    misses: int
    acc: float
    acc2: float
    box_acc_per_theta: dict
    box_acc_mean: float
    best_iou_per_frame: list
    config: dict = field(default_factory=dict)
    n_frames: int = 0

    def to_dict(self) -> dict:
        return {
            "hits": self.hits,
            "misses": self.misses,
            "acc": self.acc,
            "acc2": self.acc2,
            "box_acc_per_theta": {f"{k:g}": v for k, v in self.box_acc_per_theta.items()},
            "box_acc_mean": self.box_acc_mean,
            "best_iou_per_frame": self.best_iou_per_frame,
            "n_frames": self.n_frames,
            "config": self.config,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta", "box_acc"])
            for theta, acc in self.box_acc_per_theta.items():
                writer.writerow([f"{theta:g}", f"{acc:.6f}"])


def boxes_at_threshold(frame: np.ndarray, tau: float,
                       connectivity: int = 8) -> list[Box]:
    """Tightest box per connected component of the mask ``frame >= tau``.

    The frame is expected renormalized to [0, 1] by its sequence's global
    max; an all-nonpositive frame yields no boxes.
    """
    if frame.ndim != 2:
        raise ValueError(f"frame must be H x W, got rank {frame.ndim}")
    if not np.any(frame > 0):
        return []
    mask = frame >= tau
    if not mask.any():
        return []
    structure = np.ones((3, 3), dtype=bool) if connectivity == 8 else None
    labeled, count = ndimage.label(mask, structure=structure)
    boxes = []
    for sl in ndimage.find_objects(labeled):
        if sl is None:
            continue
        ys, xs = sl
        boxes.append(Box(x0=xs.start, y0=ys.start, x1=xs.stop, y1=ys.stop))
    return boxes


def iou(a: Box, b: Box) -> float:
    """Intersection over union by integer pixel areas."""
    ix = max(0, min(a.x1, b.x1) - max(a.x0, b.x0))
    iy = max(0, min(a.y1, b.y1) - max(a.y0, b.y0))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


def pointing_hit(frame: np.ndarray, gt: list[Box], mode: str = "peak") -> bool:
    """Hit iff the saliency peak lies inside any GT box (ties row-major).

    mode "any-overlap": Hit iff any box extracted at tau = 0.5 intersects a
    GT box.
    """
    if not gt:
        raise ValueError("pointing_hit needs at least one ground-truth box")
    if mode == "peak":
        flat = int(frame.argmax())
        y, x = divmod(flat, frame.shape[1])
        return any(b.x0 <= x < b.x1 and b.y0 <= y < b.y1 for b in gt)
    if mode == "any-overlap":
        peak = frame.max()
        norm = frame / peak if peak > 0 else frame
        boxes = boxes_at_threshold(norm, 0.5)
        return any(iou(b, g) > 0 for b in boxes for g in gt)
    raise ValueError(f"unknown pointing mode {mode!r}")


def accuracy(hits: int, misses: int) -> float:
    """Hits / (Hits + Misses)."""
    total = hits + misses
    if total < 1:
        raise ValueError("accuracy needs at least one scored frame")
    return hits / total


def acc2(hit_flags, correct_flags) -> float:
    """Pointing accuracy counting a hit only when classification is correct."""
    hit_flags = list(hit_flags)
    correct_flags = list(correct_flags)
    if len(hit_flags) != len(correct_flags):
        raise ValueError("hit and correctness sequences must align")
    if not hit_flags:
        raise ValueError("acc2 needs at least one scored frame")
    gated = sum(1 for h, c in zip(hit_flags, correct_flags) if h and c)
    return gated / len(hit_flags)


def max_box_acc(frames, gt, cfg: EvalConfig | None = None,
                correct=None) -> EvalReport:
    """Score a saliency sequence against per-frame ground-truth boxes.

    ``frames`` is a sequence of H x W arrays (or a T x H x W array); ``gt``
    a sequence of per-frame Box lists. ``correct`` optionally flags frames
    whose clip was classified correctly (defaults to all-correct, making
    Acc2 equal Acc). Frames with empty ground truth are skipped.
    """
    cfg = cfg or EvalConfig()
    frames = [np.asarray(f) for f in frames]
    gt = [list(g) for g in gt]
    if len(frames) != len(gt):
        raise ValueError(f"{len(frames)} frames vs {len(gt)} ground-truth entries")
    if correct is None:
        correct = [True] * len(frames)
    elif len(correct) != len(frames):
        raise ValueError("correctness flags must align with frames")

    global_max = max((float(f.max()) for f in frames), default=0.0)
    scale = 1.0 / global_max if global_max > 0 else 0.0

    hit_flags = []
    correct_flags = []
    # iou_grid[f][ti] = best IoU of any tau-box of frame f against its GT
    iou_grid = []
    for frame, frame_gt, is_correct in zip(frames, gt, correct):
        if not frame_gt:
            continue
        norm = frame * scale
        hit_flags.append(pointing_hit(norm, frame_gt, cfg.pointing))
        correct_flags.append(bool(is_correct))
        per_tau = []
        for tau in cfg.taus:
            boxes = boxes_at_threshold(norm, tau, cfg.connectivity)
            best = 0.0
            for box in boxes:
                for g in frame_gt:
                    v = iou(box, g)
                    if v > best:
                        best = v
            per_tau.append(best)
        iou_grid.append(per_tau)

    if not iou_grid:
        raise ValueError("no frames with ground-truth boxes to score")

    grid = np.asarray(iou_grid)  # (frames, taus)
    best_per_frame = grid.max(axis=1)
    per_theta = {}
    for theta in cfg.thetas:
        if cfg.mode == "best-iou-per-frame":
            per_theta[theta] = float(np.mean(best_per_frame >= theta))
        else:
            # one tau* per theta, chosen to maximize dataset-level accuracy
            acc_per_tau = (grid >= theta).mean(axis=0)
            per_theta[theta] = float(acc_per_tau.max())

    hits = sum(hit_flags)
    misses = len(hit_flags) - hits
    return EvalReport(
        hits=hits,
        misses=misses,
        acc=accuracy(hits, misses),
        acc2=acc2(hit_flags, correct_flags),
        box_acc_per_theta=per_theta,
        box_acc_mean=float(np.mean(list(per_theta.values()))),
        best_iou_per_frame=[float(v) for v in best_per_frame],
        config=cfg.to_dict(),
        n_frames=len(hit_flags),
    )


def load_gt_jsonl(path) -> dict:
    """Ground-truth boxes keyed by clip_id: {"frames": [...], "class": int}.

    Input lines look like {"clip_id", "frame", "class", "boxes": [[x0,y0,x1,y1]]}.
    Frames are returned sorted by frame index.
    """
    per_clip: dict[str, dict] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        entry = per_clip.setdefault(rec["clip_id"], {"frames": {}, "class": rec.get("class")})
        entry["frames"][int(rec["frame"])] = [
            Box(*(int(v) for v in b)) for b in rec["boxes"]
        ]
    out = {}
    for clip_id, entry in per_clip.items():
        frames = [entry["frames"][k] for k in sorted(entry["frames"])]
        out[clip_id] = {"frames": frames, "class": entry["class"]}
    return out
