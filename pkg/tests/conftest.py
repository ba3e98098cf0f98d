import sys
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
ASSETS = REPO_ROOT / "assets" / "toy_detector"

sys.path.insert(0, str(REPO_ROOT / "src"))

from boxcert.boxes import CornerBox, GroundTruth  # noqa: E402
from boxcert.model import (  # noqa: E402
    DetectorHead, Layer, ModelBundle, load_image, load_model, validate_bundle,
)


@pytest.fixture(scope="session")
def toy_bundle():
    return load_model(ASSETS / "model.json")


@pytest.fixture(scope="session")
def toy_image():
    return load_image(ASSETS / "image.json")


@pytest.fixture(scope="session")
def toy_gt():
    return GroundTruth(CornerBox(4.0, 4.0, 8.0, 8.0), 0)


def single_box_head(n_classes: int = 1, decoder: str = "yolov2") -> DetectorHead:
    n_out = 5 + n_classes
    return DetectorHead(
        decoder_kind=decoder,
        anchors=np.array([[1.0, 1.0, 1.0, 1.0]]),
        strides=np.array([4.0]),
        n_classes=n_classes,
        layout=np.arange(n_out, dtype=np.int64).reshape(1, n_out),
    )


def multi_box_head(n_boxes: int, n_classes: int = 1) -> DetectorHead:
    fields = 5 + n_classes
    anchors = np.array([[float(i % 2), float(i // 2 % 2), 1.0, 1.0] for i in range(n_boxes)])
    return DetectorHead(
        decoder_kind="yolov2",
        anchors=anchors,
        strides=np.full(n_boxes, 4.0),
        n_classes=n_classes,
        layout=np.arange(n_boxes * fields, dtype=np.int64).reshape(n_boxes, fields),
    )


def random_dense_net(rng: np.random.Generator, n_in: int, n_out: int, depth: int,
                     width: int, alpha: float = 0.1) -> ModelBundle:
    """Flatten + alternating dense / activation stack ending at n_out."""
    layers = [Layer("flatten")]
    prev = n_in
    for d in range(depth):
        nxt = n_out if d == depth - 1 else width
        layers.append(Layer(
            "dense",
            weight=rng.normal(0, 1.2 / np.sqrt(prev), (nxt, prev)),
            bias=rng.normal(0, 0.3, nxt),
        ))
        if d < depth - 1:
            layers.append(Layer("leakyrelu", alpha=alpha) if rng.random() < 0.5
                          else Layer("relu"))
        prev = nxt
    head = single_box_head(n_classes=max(1, n_out - 5))
    bundle = ModelBundle(layers=layers, head=head, input_shape=(1, 1, n_in))
    return validate_bundle(bundle)


def random_conv_net(rng: np.random.Generator, n_out: int = 6) -> ModelBundle:
    """conv / activation / avgpool / flatten / dense on a small image."""
    c, h, w = int(rng.integers(1, 3)), 6, 6
    oc = int(rng.integers(2, 5))
    layers = [
        Layer("conv2d", weight=rng.normal(0, 0.5, (oc, c, 3, 3)),
              bias=rng.normal(0, 0.2, oc), stride=1, padding=1),
        Layer("leakyrelu", alpha=float(rng.uniform(0.01, 0.5))),
        Layer("avgpool2d", window=2, stride=2),
        Layer("flatten"),
        Layer("dense", weight=rng.normal(0, 0.4, (n_out, oc * 3 * 3)),
              bias=rng.normal(0, 0.2, n_out)),
    ]
    head = single_box_head(n_classes=max(1, n_out - 5))
    bundle = ModelBundle(layers=layers, head=head, input_shape=(c, h, w))
    return validate_bundle(bundle)


@pytest.fixture
def dense_net_builder():
    return random_dense_net


@pytest.fixture
def conv_net_builder():
    return random_conv_net
