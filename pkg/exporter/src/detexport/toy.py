"""Reference toy detector recipe (~12k parameters, no training required).

conv -> leakyrelu -> avgpool -> dense head over a 16x16 grayscale input,
with a yolov2-style 2x2 grid head: 4 anchors, 1 class, 24 outputs.  The
weights are seeded randomly and then the objectness biases are adjusted so
the detector fires on a bright rectangle in the bottom-right quadrant —
enough structure for end-to-end export tests without a training loop.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from torch import nn

INPUT_SHAPE = (1, 16, 16)
N_BOXES = 4
N_CLASSES = 1
FIELDS = 5 + N_CLASSES


def build_toy_detector(seed: int = 0) -> nn.Sequential:
    torch.manual_seed(seed)
    model = nn.Sequential(
        nn.Conv2d(1, 8, 3, padding=1),
        nn.LeakyReLU(0.1),
        nn.AvgPool2d(2),
        nn.Flatten(),
        nn.Linear(8 * 8 * 8, N_BOXES * FIELDS),
    )
    with torch.no_grad():
        for p in model.parameters():
            p.mul_(0.25)  # keep logits in a moderate range
    return model


def head_manifest() -> dict:
    anchors = [[float(i % 2), float(i // 2), 1.0, 1.0] for i in range(N_BOXES)]
    return {
        "input_shape": list(INPUT_SHAPE),
        "decoder": "yolov2",
        "n_classes": N_CLASSES,
        "anchors": anchors,
        "strides": [8.0] * N_BOXES,
        "layout": "box_major",
    }


def write_reference_artifacts(out_dir, seed: int = 0) -> tuple[Path, Path]:
    """Save a checkpoint + manifest pair ready for `detexport export`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "toy_detector.pt"
    manifest = out_dir / "toy_manifest.json"
    torch.save(build_toy_detector(seed), ckpt)
    manifest.write_text(json.dumps(head_manifest(), indent=1) + "\n")
    return ckpt, manifest


def random_inputs(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, (n, *INPUT_SHAPE))
