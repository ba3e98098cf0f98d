"""Network + detector-head representation, interchange format, inference.

A model bundle is an ordered list of layers (dense, conv2d, avgpool2d,
flatten, relu, leakyrelu) followed by detector-head metadata describing how
the flat output vector maps onto per-anchor offsets and logits.  MaxPool is
deliberately unsupported: pooling must be linear for the bound propagation
to represent it exactly, so exported models replace it with average
pooling.

On disk a bundle is a ``model.json`` manifest.  Weighted layers either
reference a sibling blob of little-endian float32 values in row-major order
(``<layer_idx>.bin``, kernel followed by bias) or inline their values as
JSON arrays when the manifest sets ``"inline": true``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from boxcert import kernels
from boxcert.boxes import CornerBox, DECODER_KINDS, decode, h_map
from boxcert.intervals import sigmoid

SUPPORTED_KINDS = ("dense", "conv2d", "avgpool2d", "flatten", "relu", "leakyrelu")
FIELDS_PER_BOX_BASE = 5  # o0, o1, o2, o3, objectness


class ParseError(Exception):
    """Raised when an interchange file cannot be read at all."""


class ValidationError(Exception):
    """Raised when a parsed bundle violates a structural invariant."""


@dataclass(eq=False)
class Layer:
    kind: str
    weight: Optional[np.ndarray] = None  # dense: (out, in); conv2d: (oc, ic, kh, kw)
    bias: Optional[np.ndarray] = None
    stride: int = 1
    padding: int = 0
    window: int = 0
    alpha: float = 0.0


@dataclass(eq=False)
class DetectorHead:
    decoder_kind: str
    anchors: np.ndarray  # (n_boxes, 4); ssd: center-format priors in pixels,
    #                      yolo: (cell_x, cell_y, anchor_w, anchor_h)
    strides: Optional[np.ndarray]  # (n_boxes,) pixels per cell; None for ssd
    n_classes: int
    layout: np.ndarray  # (n_boxes, 5 + n_classes) flat output indices
    var1: Optional[float] = None
    var2: Optional[float] = None
    layout_json: Union[str, list, None] = field(default=None, repr=False)

    @property
    def n_boxes(self) -> int:
        return int(self.anchors.shape[0])

    @property
    def output_size(self) -> int:
        return int(self.layout.size)

    def offset_indices(self, box: int) -> np.ndarray:
        return self.layout[box, 0:4]

    def obj_index(self, box: int) -> int:
        return int(self.layout[box, 4])

    def class_indices(self, box: int) -> np.ndarray:
        return self.layout[box, 5:]

    def decoder_args(self, box: int):
        """(anchor, scale, variances) triple for the box's decode call."""
        anchor = tuple(float(v) for v in self.anchors[box])
        if self.decoder_kind == "ssd":
            return anchor, None, (float(self.var1), float(self.var2))
        return anchor, float(self.strides[box]), None


@dataclass(eq=False)
class ModelBundle:
    layers: list[Layer]
    head: DetectorHead
    input_shape: tuple[int, int, int]
    layer_shapes: list[tuple[int, ...]] = field(default_factory=list, repr=False)

    @property
    def output_size(self) -> int:
        return int(np.prod(self.layer_shapes[-1]))


@dataclass(frozen=True)
class Detection:
    box: CornerBox
    class_id: int
    confidence: float


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _infer_shape(layer: Layer, shape: tuple[int, ...], idx: int) -> tuple[int, ...]:
    if layer.kind == "dense":
        if len(shape) != 1:
            raise ValidationError(f"layer {idx}: dense needs a flat input, got {shape}")
        out_f, in_f = layer.weight.shape
        if in_f != shape[0]:
            raise ValidationError(
                f"layer {idx}: dense expects {in_f} inputs, previous layer gives {shape[0]}"
            )
        return (out_f,)
    if layer.kind == "conv2d":
        if len(shape) != 3:
            raise ValidationError(f"layer {idx}: conv2d needs (C,H,W) input, got {shape}")
        oc, ic, kh, kw = layer.weight.shape
        c, h, w = shape
        if ic != c:
            raise ValidationError(f"layer {idx}: conv2d expects {ic} channels, got {c}")
        ho = (h + 2 * layer.padding - kh) // layer.stride + 1
        wo = (w + 2 * layer.padding - kw) // layer.stride + 1
        if ho < 1 or wo < 1:
            raise ValidationError(f"layer {idx}: conv2d output would be empty for input {shape}")
        return (oc, ho, wo)
    if layer.kind == "avgpool2d":
        if len(shape) != 3:
            raise ValidationError(f"layer {idx}: avgpool2d needs (C,H,W) input, got {shape}")
        c, h, w = shape
        if layer.window > h or layer.window > w:
            raise ValidationError(f"layer {idx}: pool window {layer.window} exceeds input {shape}")
        ho = (h - layer.window) // layer.stride + 1
        wo = (w - layer.window) // layer.stride + 1
        return (c, ho, wo)
    if layer.kind == "flatten":
        return (int(np.prod(shape)),)
    # relu / leakyrelu keep the shape
    return shape


def validate_bundle(bundle: ModelBundle) -> ModelBundle:
    """Check all structural invariants and fill in per-layer shapes."""
    head = bundle.head
    if head.decoder_kind not in DECODER_KINDS:
        raise ValidationError(f"unknown decoder kind {head.decoder_kind!r}")
    if head.anchors.ndim != 2 or head.anchors.shape[1] != 4 or head.anchors.shape[0] < 1:
        raise ValidationError(f"anchors must be (n, 4), got {head.anchors.shape}")
    if np.any(head.anchors[:, 2] <= 0) or np.any(head.anchors[:, 3] <= 0):
        raise ValidationError("anchor widths/heights must be positive")
    if head.decoder_kind == "ssd":
        if head.var1 is None or head.var2 is None or head.var1 <= 0 or head.var2 <= 0:
            raise ValidationError("ssd head needs positive var1 and var2")
    else:
        if head.strides is None or head.strides.shape != (head.n_boxes,):
            raise ValidationError("yolo head needs one stride per box")
        if np.any(head.strides <= 0):
            raise ValidationError("strides must be positive")
    if head.n_classes < 1:
        raise ValidationError(f"n_classes must be >= 1, got {head.n_classes}")
    fields = FIELDS_PER_BOX_BASE + head.n_classes
    if head.layout.shape != (head.n_boxes, fields):
        raise ValidationError(
            f"layout shape {head.layout.shape} != ({head.n_boxes}, {fields})"
        )
    flat = head.layout.ravel()
    if sorted(flat.tolist()) != list(range(flat.size)):
        raise ValidationError("layout must be a bijection onto 0..n_outputs-1")

    for idx, layer in enumerate(bundle.layers):
        if layer.kind not in SUPPORTED_KINDS:
            raise ValidationError(f"layer {idx}: unsupported kind {layer.kind!r}")
        if layer.kind == "leakyrelu" and not (0.0 <= layer.alpha <= 1.0):
            raise ValidationError(f"layer {idx}: leakyrelu alpha must be in [0,1], got {layer.alpha}")
        if layer.kind in ("dense", "conv2d"):
            if layer.weight is None or layer.bias is None:
                raise ValidationError(f"layer {idx}: {layer.kind} is missing weights")
            n_out = layer.weight.shape[0]
            if layer.bias.shape != (n_out,):
                raise ValidationError(f"layer {idx}: bias shape {layer.bias.shape} != ({n_out},)")
        if layer.kind in ("conv2d", "avgpool2d") and layer.stride < 1:
            raise ValidationError(f"layer {idx}: stride must be >= 1")
        if layer.kind == "avgpool2d" and layer.window < 1:
            raise ValidationError(f"layer {idx}: pool window must be >= 1")

    shape = tuple(int(s) for s in bundle.input_shape)
    if len(shape) != 3 or any(s < 1 for s in shape):
        raise ValidationError(f"input_shape must be (C,H,W) positive, got {shape}")
    shapes = []
    for idx, layer in enumerate(bundle.layers):
        shape = _infer_shape(layer, shape, idx)
        shapes.append(shape)
    out_size = int(np.prod(shape))
    if out_size != head.output_size:
        raise ValidationError(
            f"final layer produces {out_size} values but the head layout covers "
            f"{head.output_size}"
        )
    bundle.layer_shapes = shapes
    return bundle


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------


def forward(bundle: ModelBundle, image: np.ndarray) -> np.ndarray:
    """Deterministic reference forward pass; output in head-layout order."""
    x = np.asarray(image, dtype=np.float64)
    if x.shape != bundle.input_shape:
        raise ValidationError(f"image shape {x.shape} != model input {bundle.input_shape}")
    for layer in bundle.layers:
        if layer.kind == "dense":
            x = layer.weight @ x + layer.bias
        elif layer.kind == "conv2d":
            x = kernels.conv2d(x, layer.weight, layer.bias, layer.stride, layer.padding)
        elif layer.kind == "avgpool2d":
            x = kernels.avgpool2d(x, layer.window, layer.stride)
        elif layer.kind == "flatten":
            x = x.ravel()
        elif layer.kind == "relu":
            x = np.maximum(x, 0.0)
        elif layer.kind == "leakyrelu":
            x = np.where(x >= 0.0, x, layer.alpha * x)
    return x.ravel()


def decode_box(bundle: ModelBundle, box: int, offsets) -> CornerBox:
    anchor, scale, variances = bundle.head.decoder_args(box)
    return h_map(decode(bundle.head.decoder_kind, offsets, anchor, scale, variances))


def predict(bundle: ModelBundle, image: np.ndarray, tau_class: float) -> Optional[Detection]:
    """Highest-confidence box above threshold, or None.

    Confidence is the sigmoid of the objectness logit; the class is the
    argmax over the per-class sigmoid scores (first index wins ties).
    """
    logits = forward(bundle, image)
    head = bundle.head
    obj = np.array([logits[head.obj_index(i)] for i in range(head.n_boxes)])
    conf = sigmoid(obj)
    best = int(np.argmax(conf))
    if conf[best] < tau_class:
        return None
    offsets = logits[head.offset_indices(best)]
    box = decode_box(bundle, best, offsets)
    cls_logits = logits[head.class_indices(best)]
    class_id = int(np.argmax(sigmoid(cls_logits)))
    return Detection(box=box, class_id=class_id, confidence=float(conf[best]))


# ---------------------------------------------------------------------------
# interchange format
# ---------------------------------------------------------------------------


def _box_major_layout(n_boxes: int, n_classes: int) -> np.ndarray:
    fields = FIELDS_PER_BOX_BASE + n_classes
    return np.arange(n_boxes * fields, dtype=np.int64).reshape(n_boxes, fields)


def _layer_weight_sizes(desc: dict, idx: int) -> tuple[tuple[int, ...], int]:
    if desc["kind"] == "dense":
        shape = (int(desc["out_features"]), int(desc["in_features"]))
        return shape, shape[0]
    kh, kw = (int(v) for v in desc["kernel_size"])
    shape = (int(desc["out_channels"]), int(desc["in_channels"]), kh, kw)
    return shape, shape[0]


def _load_layer_weights(desc: dict, idx: int, base: Path) -> tuple[np.ndarray, np.ndarray]:
    shape, n_bias = _layer_weight_sizes(desc, idx)
    n_weight = int(np.prod(shape))
    if desc.get("inline"):
        try:
            w = np.asarray(desc["weight"], dtype=np.float64).ravel()
            b = np.asarray(desc["bias"], dtype=np.float64).ravel()
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"layer {idx}: bad inline weights: {exc}") from exc
    else:
        blob_name = desc.get("blob")
        if not isinstance(blob_name, str):
            raise ParseError(f"layer {idx}: weighted layer needs 'blob' or 'inline' weights")
        blob_path = base / blob_name
        if not blob_path.exists():
            raise ParseError(f"layer {idx}: weight blob {blob_path} not found")
        raw = np.fromfile(blob_path, dtype="<f4").astype(np.float64)
        if raw.size != n_weight + n_bias:
            raise ParseError(
                f"layer {idx}: blob {blob_name} holds {raw.size} floats, "
                f"expected {n_weight + n_bias}"
            )
        w, b = raw[:n_weight], raw[n_weight:]
    if w.size != n_weight or b.size != n_bias:
        raise ValidationError(
            f"layer {idx}: weight/bias sizes {w.size}/{b.size} do not match "
            f"declared shape {shape}"
        )
    return w.reshape(shape), b


def _parse_layer(desc: dict, idx: int, base: Path) -> Layer:
    kind = desc.get("kind")
    if kind not in SUPPORTED_KINDS:
        raise ValidationError(f"layer {idx}: unsupported kind {kind!r}")
    if kind == "dense":
        w, b = _load_layer_weights(desc, idx, base)
        return Layer(kind="dense", weight=w, bias=b)
    if kind == "conv2d":
        w, b = _load_layer_weights(desc, idx, base)
        return Layer(
            kind="conv2d", weight=w, bias=b,
            stride=int(desc.get("stride", 1)), padding=int(desc.get("padding", 0)),
        )
    if kind == "avgpool2d":
        return Layer(kind="avgpool2d", window=int(desc["window"]), stride=int(desc["stride"]))
    if kind == "leakyrelu":
        return Layer(kind="leakyrelu", alpha=float(desc["alpha"]))
    return Layer(kind=kind)


def _parse_head(desc: dict) -> DetectorHead:
    try:
        decoder = desc["decoder"]
        n_classes = int(desc["n_classes"])
        anchors = np.asarray(desc["anchors"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad head descriptor: {exc}") from exc
    strides = None
    if desc.get("strides") is not None:
        strides = np.asarray(desc["strides"], dtype=np.float64)
    layout_json = desc.get("layout", "box_major")
    if layout_json == "box_major":
        layout = _box_major_layout(anchors.shape[0] if anchors.ndim == 2 else 0, n_classes)
    else:
        layout = np.asarray(layout_json, dtype=np.int64)
        if layout.ndim != 2:
            raise ValidationError("explicit layout must be a per-box list of index lists")
    return DetectorHead(
        decoder_kind=decoder,
        anchors=anchors,
        strides=strides,
        n_classes=n_classes,
        layout=layout,
        var1=desc.get("var1"),
        var2=desc.get("var2"),
        layout_json=layout_json,
    )


def load_model(path) -> ModelBundle:
    """Read and validate a model.json bundle (plus any sibling blobs)."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(manifest, dict):
        raise ParseError(f"{path}: manifest must be a JSON object")
    try:
        input_shape = tuple(int(v) for v in manifest["input_shape"])
        layer_descs = manifest["layers"]
        head_desc = manifest["head"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: missing or malformed top-level field: {exc}") from exc
    layers = [_parse_layer(d, i, path.parent) for i, d in enumerate(layer_descs)]
    head = _parse_head(head_desc)
    bundle = ModelBundle(layers=layers, head=head, input_shape=input_shape)
    return validate_bundle(bundle)


def save_model(bundle: ModelBundle, path, inline: bool = True) -> None:
    """Write a bundle back to model.json (+ blobs when not inline)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    descs = []
    for idx, layer in enumerate(bundle.layers):
        if layer.kind == "dense":
            d = {
                "kind": "dense",
                "out_features": int(layer.weight.shape[0]),
                "in_features": int(layer.weight.shape[1]),
            }
        elif layer.kind == "conv2d":
            d = {
                "kind": "conv2d",
                "out_channels": int(layer.weight.shape[0]),
                "in_channels": int(layer.weight.shape[1]),
                "kernel_size": [int(layer.weight.shape[2]), int(layer.weight.shape[3])],
                "stride": layer.stride,
                "padding": layer.padding,
            }
        elif layer.kind == "avgpool2d":
            d = {"kind": "avgpool2d", "window": layer.window, "stride": layer.stride}
        elif layer.kind == "leakyrelu":
            d = {"kind": "leakyrelu", "alpha": layer.alpha}
        else:
            d = {"kind": layer.kind}
        if layer.kind in ("dense", "conv2d"):
            if inline:
                d["inline"] = True
                d["weight"] = layer.weight.ravel().tolist()
                d["bias"] = layer.bias.tolist()
            else:
                blob_name = f"{idx}.bin"
                blob = np.concatenate([layer.weight.ravel(), layer.bias.ravel()])
                blob.astype("<f4").tofile(path.parent / blob_name)
                d["blob"] = blob_name
        descs.append(d)
    head = bundle.head
    head_desc = {
        "decoder": head.decoder_kind,
        "n_classes": head.n_classes,
        "anchors": head.anchors.tolist(),
        "strides": None if head.strides is None else head.strides.tolist(),
        "layout": head.layout_json if head.layout_json is not None else head.layout.tolist(),
    }
    if head.var1 is not None:
        head_desc["var1"] = head.var1
        head_desc["var2"] = head.var2
    manifest = {
        "format_version": 1,
        "input_shape": list(bundle.input_shape),
        "layers": descs,
        "head": head_desc,
    }
    path.write_text(json.dumps(manifest, indent=1) + "\n")


def load_image(path) -> np.ndarray:
    """Read an image tensor: JSON {shape, data} or raw .f32 blob + sidecar."""
    path = Path(path)
    if path.suffix == ".json":
        try:
            doc = json.loads(path.read_text())
            shape = tuple(int(v) for v in doc["shape"])
            data = np.asarray(doc["data"], dtype=np.float64)
        except OSError as exc:
            raise ParseError(f"cannot read {path}: {exc}") from exc
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed image JSON {path}: {exc}") from exc
    elif path.suffix == ".f32":
        sidecar = path.with_suffix(path.suffix + ".json")
        try:
            shape = tuple(int(v) for v in json.loads(sidecar.read_text())["shape"])
            data = np.fromfile(path, dtype="<f4").astype(np.float64)
        except OSError as exc:
            raise ParseError(f"cannot read image blob {path}: {exc}") from exc
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed image sidecar {sidecar}: {exc}") from exc
    else:
        raise ParseError(f"unsupported image format {path.suffix!r} ({path})")
    if int(np.prod(shape)) != data.size:
        raise ValidationError(f"{path}: shape {shape} does not match {data.size} values")
    return data.reshape(shape)


def save_image(image: np.ndarray, path) -> None:
    path = Path(path)
    doc = {"shape": list(image.shape), "data": np.asarray(image, dtype=np.float64).ravel().tolist()}
    path.write_text(json.dumps(doc) + "\n")
