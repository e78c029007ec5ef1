"""Synthetic moving-square clips with per-frame ground-truth boxes.

Each clip shows one bright square (intensity 1.0, side 6-10 px) drifting in
one of four directions at 1-2 px/frame over a dark noisy background (uniform
in [0, 0.1], mean 0.05). The class label is the motion direction. Motion
clamps at the frame edge so every box stays inside the frame; fast squares
are started against the far edge so they keep moving for most of the clip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import tensor_core

# dx, dy per class, in pixels per frame per unit speed (x = column, y = row)
DIRECTIONS = {
    0: (0, -1),  # up
    1: (0, 1),   # down
    2: (-1, 0),  # left
    3: (1, 0),   # right
}
MIN_SIDE, MAX_SIDE = 6, 10


@dataclass
class SyntheticVideoSet:
    clips: np.ndarray          # (B, 1, T, H, W) float32
    labels: np.ndarray         # (B,) int64
    boxes: list                # per clip: list of per-frame (x0, y0, x1, y1)
    seed: int


def gen_synthetic_videos(seed: int, n_per_class: int, classes: int = 4,
                         dims=(16, 32, 32)) -> SyntheticVideoSet:
    """Deterministic dataset of n_per_class clips for each direction class."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if not (1 <= classes <= len(DIRECTIONS)):
        raise ValueError(f"classes must be in [1, {len(DIRECTIONS)}]")
    T, H, W = (int(d) for d in dims)
    if T < 1 or H < MAX_SIDE + 2 or W < MAX_SIDE + 2:
        raise ValueError(f"dims {dims} too small for a {MAX_SIDE} px square")

    rng = np.random.default_rng(seed)
    n = classes * n_per_class
    clips = np.empty((n, 1, T, H, W), dtype=np.float32)
    labels = np.empty(n, dtype=np.int64)
    boxes: list = []

    i = 0
    for cls in range(classes):
        for _ in range(n_per_class):
            side = int(rng.integers(MIN_SIDE, MAX_SIDE + 1))
            speed = int(rng.integers(1, 3))
            dx, dy = DIRECTIONS[cls]
            x, y = _start_position(rng, W, H, side, speed * dx, speed * dy, T)
            clip = rng.uniform(0.0, 0.1, size=(T, H, W)).astype(np.float32)
            frames = []
            for t in range(T):
                clip[t, y : y + side, x : x + side] = 1.0
                frames.append((x, y, x + side, y + side))
                x = int(np.clip(x + speed * dx, 0, W - side))
                y = int(np.clip(y + speed * dy, 0, H - side))
            clips[i, 0] = clip
            labels[i] = cls
            boxes.append(frames)
            i += 1
    return SyntheticVideoSet(clips=clips, labels=labels, boxes=boxes, seed=seed)


def _start_position(rng, W, H, side, vx, vy, T):
    """Uniform start giving the full trajectory room when possible.

    When the travel cannot fit (fast squares), start flush against the far
    edge so the square moves as long as it can before clamping.
    """
    travel = (T - 1)

    def axis_start(extent, v):
        room = extent - side
        if v == 0:
            return int(rng.integers(0, room + 1))
        dist = abs(v) * travel
        if dist <= room:
            lo, hi = (0, room - dist) if v > 0 else (dist, room)
            return int(rng.integers(lo, hi + 1))
        return 0 if v > 0 else room

    return axis_start(W, vx), axis_start(H, vy)


def save_videos(ds: SyntheticVideoSet, out_dir) -> None:
    """Per-clip containers + labels JSON + per-frame ground-truth JSONL."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"seed": ds.seed, "clips": []}
    gt_lines = []
    for i, (label, frames) in enumerate(zip(ds.labels, ds.boxes)):
        clip_id = f"clip_{i:04d}"
        tensor_core.write_container(ds.clips[i], out / f"{clip_id}.atc")
        meta["clips"].append({"clip_id": clip_id, "label": int(label)})
        for t, box in enumerate(frames):
            gt_lines.append(json.dumps({
                "clip_id": clip_id,
                "frame": t,
                "class": int(label),
                "boxes": [list(box)],
            }))
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    (out / "boxes.jsonl").write_text("\n".join(gt_lines) + "\n")


def load_videos(in_dir) -> SyntheticVideoSet:
    src = Path(in_dir)
    meta = json.loads((src / "meta.json").read_text())
    clips = []
    labels = []
    for entry in meta["clips"]:
        clips.append(tensor_core.read_container(src / f"{entry['clip_id']}.atc"))
        labels.append(entry["label"])
    boxes_per_clip: dict[str, list] = {e["clip_id"]: [] for e in meta["clips"]}
    for line in (src / "boxes.jsonl").read_text().splitlines():
        rec = json.loads(line)
        boxes_per_clip[rec["clip_id"]].append(tuple(rec["boxes"][0]))
    return SyntheticVideoSet(
        clips=np.stack(clips),
        labels=np.asarray(labels, dtype=np.int64),
        boxes=[boxes_per_clip[e["clip_id"]] for e in meta["clips"]],
        seed=meta["seed"],
    )
