#!/usr/bin/env python3
"""Regenerate the checked-in toy detector bundle under assets/toy_detector/.

The detector is hand-constructed (no training): a box-filter channel feeds
the objectness logit so confidence tracks mean image brightness, a gradient
channel adds activation instability for the propagators to relax, and the
offset rows carry small gradient-channel weights so the decoded box wiggles
slightly under perturbation.  Cell (1,1)'s anchor decodes to (4, 4, 8, 8),
matching the bright block in the companion image.
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from boxcert import kernels  # noqa: E402
from boxcert.model import (  # noqa: E402
    DetectorHead, Layer, ModelBundle, forward, predict, save_model, validate_bundle,
)

OUT_DIR = Path(__file__).resolve().parents[1] / "assets" / "toy_detector"

N_BOXES = 4
N_CLASSES = 1
FIELDS = 4 + 1 + N_CLASSES  # offsets, objectness, class


def base_image() -> np.ndarray:
    img = np.full((1, 8, 8), 0.1)
    img[0, 4:8, 4:8] = 0.9
    return img


def build_bundle() -> ModelBundle:
    # channel 0: 3x3 box filter (local mean); channel 1: horizontal gradient
    conv_w = np.zeros((2, 1, 3, 3))
    conv_w[0, 0] = 1.0 / 9.0
    conv_w[1, 0] = np.array([[0.0, 0.0, 0.0], [-0.5, 0.0, 0.5], [0.0, 0.0, 0.0]])
    conv_b = np.zeros(2)

    layers = [
        Layer("conv2d", weight=conv_w, bias=conv_b, stride=1, padding=1),
        Layer("leakyrelu", alpha=0.1),
        Layer("avgpool2d", window=2, stride=2),
        Layer("flatten"),
    ]

    # feature vector: 32 = channel 0 (16 pooled means) then channel 1 (16)
    n_feat = 32
    dense_w = np.zeros((N_BOXES * FIELDS, n_feat))
    dense_b = np.zeros(N_BOXES * FIELDS)

    # objectness slope: confidence must fall below tau_class=0.15 well before
    # a brightness shift of 0.3, so target d(logit)/dt ~ -20
    probe = np.full((1, 8, 8), 0.5)
    feats_probe = _features(layers, probe)
    ones_resp = _features(layers, probe + 0.01) - feats_probe
    mean_resp = float(ones_resp[:16].sum() / 0.01) / 16.0  # per-unit-brightness
    k = 20.0 / mean_resp

    rng = np.random.default_rng(7)
    for box in range(N_BOXES):
        row0 = box * FIELDS
        # offsets: small gradient-channel weights, zero bias
        for field in range(4):
            dense_w[row0 + field, 16:] = rng.uniform(-0.04, 0.04, 16)
        # objectness: negative box-filter weights plus light gradient mixing
        dense_w[row0 + 4, :16] = -k / 16.0
        dense_w[row0 + 4, 16:] = rng.uniform(-0.05, 0.05, 16)
        # class logit: constant
        dense_b[row0 + 5] = 3.0

    layers.append(Layer("dense", weight=dense_w, bias=dense_b))

    anchors = np.array([[0.0, 0.0, 1.0, 1.0],
                        [1.0, 0.0, 1.0, 1.0],
                        [0.0, 1.0, 1.0, 1.0],
                        [1.0, 1.0, 1.0, 1.0]])
    head = DetectorHead(
        decoder_kind="yolov2",
        anchors=anchors,
        strides=np.full(N_BOXES, 4.0),
        n_classes=N_CLASSES,
        layout=np.arange(N_BOXES * FIELDS, dtype=np.int64).reshape(N_BOXES, FIELDS),
        layout_json="box_major",
    )
    bundle = validate_bundle(ModelBundle(layers=layers, head=head, input_shape=(1, 8, 8)))

    # set objectness biases so the clean logits are +2 for box 3, -6 for the rest
    logits = forward(bundle, base_image())
    for box in range(N_BOXES):
        idx = box * FIELDS + 4
        target = 2.0 if box == 3 else -6.0
        dense_b[idx] = target - logits[idx]
    return validate_bundle(ModelBundle(layers=layers, head=head, input_shape=(1, 8, 8)))


def _features(layers, img):
    x = img
    for layer in layers:
        if layer.kind == "conv2d":
            x = kernels.conv2d(x, layer.weight, layer.bias, layer.stride, layer.padding)
        elif layer.kind == "avgpool2d":
            x = kernels.avgpool2d(x, layer.window, layer.stride)
        elif layer.kind == "leakyrelu":
            x = np.where(x >= 0, x, layer.alpha * x)
        elif layer.kind == "flatten":
            x = x.ravel()
    return x


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    bundle = build_bundle()
    img = base_image()
    save_model(bundle, OUT_DIR / "model.json", inline=True)
    (OUT_DIR / "image.json").write_text(
        json.dumps({"shape": [1, 8, 8], "data": img.ravel().tolist()}) + "\n"
    )
    det = predict(bundle, img, 0.15)
    print("clean prediction:", det)
    query = {
        "model": "model.json",
        "image": "image.json",
        "ground_truth": {"box": [4.0, 4.0, 8.0, 8.0], "class_id": 0},
        "tau_iou": 0.5,
        "tau_class": 0.15,
        "perturbation": {"kind": "brightness"},
        "budgets": [0.0, 0.05, 0.1, 0.3, 0.5, 1.0],
        "solver": {
            "bounding": "optimal", "propagation": "backsub",
            "max_depth": 12, "timeout": 1800.0, "seed": 0,
        },
    }
    (OUT_DIR / "query_brightness.json").write_text(json.dumps(query, indent=1) + "\n")
    print("wrote", OUT_DIR)


if __name__ == "__main__":
    main()
