"""Synthetic single-object dataset: one bright rectangle per canvas.

Images are grayscale (1, H, W) JSON tensors; annotations.json lists one
corner box and class 0 per image.  Rectangles are at least 10 pixels per
side and strictly brighter than the background, and the whole dataset is a
deterministic function of the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MIN_SIDE = 10


@dataclass(frozen=True)
class Sample:
    image: np.ndarray  # (1, H, W) in [0, 1]
    box: tuple[float, float, float, float]  # z0, z1, z2, z3 pixels
    class_id: int


def make_synthetic_dataset(n: int, seed: int, size: int = 16) -> list[Sample]:
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if size < MIN_SIDE + 2:
        raise ValueError(f"canvas size {size} cannot hold a {MIN_SIDE}px object")
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        background = float(rng.uniform(0.05, 0.30))
        brightness = float(rng.uniform(0.60, 0.95))
        w = int(rng.integers(MIN_SIDE, size - 1))
        h = int(rng.integers(MIN_SIDE, size - 1))
        x0 = int(rng.integers(0, size - w))
        y0 = int(rng.integers(0, size - h))
        img = np.full((1, size, size), background)
        img[0, y0:y0 + h, x0:x0 + w] = brightness
        samples.append(Sample(
            image=img,
            box=(float(x0), float(y0), float(x0 + w), float(y0 + h)),
            class_id=0,
        ))
    return samples


def write_dataset(samples: list[Sample], out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    annotations = []
    for i, s in enumerate(samples):
        name = f"image_{i:04d}.json"
        (out_dir / name).write_text(json.dumps({
            "shape": list(s.image.shape),
            "data": s.image.ravel().tolist(),
        }) + "\n")
        annotations.append({"file": name, "box": list(s.box), "class_id": s.class_id})
    ann_path = out_dir / "annotations.json"
    ann_path.write_text(json.dumps(annotations, indent=1) + "\n")
    return ann_path
