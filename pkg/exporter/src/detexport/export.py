"""Convert a torch.nn.Sequential detector into the engine interchange format.

The engine supports dense, conv2d, avgpool2d, flatten, relu and leakyrelu
layers only; anything else — max pooling in particular — is refused with a
message naming the offending layer.  Weights are written as sibling
``<layer_idx>.bin`` blobs of little-endian float32 values in row-major
order (kernel followed by bias), next to the ``model.json`` manifest.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from torch import nn


class UnsupportedLayerError(Exception):
    pass


class ExportError(Exception):
    pass


def _pair(value, what: str, layer_name: str) -> tuple[int, int]:
    if isinstance(value, int):
        return value, value
    pair = tuple(int(v) for v in value)
    if len(pair) != 2:
        raise ExportError(f"{layer_name}: cannot interpret {what}={value!r}")
    return pair


def _square(value, what: str, layer_name: str) -> int:
    a, b = _pair(value, what, layer_name)
    if a != b:
        raise UnsupportedLayerError(
            f"{layer_name}: non-square {what} {value!r} is not supported by the engine"
        )
    return a


def load_checkpoint(path) -> nn.Sequential:
    module = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(module, nn.Sequential):
        raise ExportError(
            f"checkpoint must hold a torch.nn.Sequential, got {type(module).__name__}; "
            "wrap the detector layers in a Sequential before saving"
        )
    return module


def _layer_descriptor(idx: int, layer: nn.Module):
    """(descriptor dict, weight array or None) for one torch layer."""
    name = f"layer {idx} ({type(layer).__name__})"
    if isinstance(layer, nn.MaxPool2d):
        raise UnsupportedLayerError(
            f"{name}: max pooling is not supported — the engine requires linear "
            "pooling; retrain or convert the model with AvgPool2d"
        )
    if isinstance(layer, nn.Conv2d):
        if layer.groups != 1 or layer.dilation != (1, 1):
            raise UnsupportedLayerError(f"{name}: grouped or dilated convolutions unsupported")
        kh = _square(layer.kernel_size, "kernel_size", name)
        stride = _square(layer.stride, "stride", name)
        padding = _square(layer.padding, "padding", name)
        weight = layer.weight.detach().numpy().astype(np.float64)
        bias = (np.zeros(layer.out_channels) if layer.bias is None
                else layer.bias.detach().numpy().astype(np.float64))
        desc = {
            "kind": "conv2d",
            "out_channels": int(layer.out_channels),
            "in_channels": int(layer.in_channels),
            "kernel_size": [kh, kh],
            "stride": stride,
            "padding": padding,
        }
        return desc, np.concatenate([weight.ravel(), bias])
    if isinstance(layer, nn.Linear):
        weight = layer.weight.detach().numpy().astype(np.float64)
        bias = (np.zeros(layer.out_features) if layer.bias is None
                else layer.bias.detach().numpy().astype(np.float64))
        desc = {
            "kind": "dense",
            "out_features": int(layer.out_features),
            "in_features": int(layer.in_features),
        }
        return desc, np.concatenate([weight.ravel(), bias])
    if isinstance(layer, nn.AvgPool2d):
        window = _square(layer.kernel_size, "kernel_size", name)
        stride = _square(layer.stride if layer.stride is not None else layer.kernel_size,
                         "stride", name)
        if _square(layer.padding, "padding", name) != 0:
            raise UnsupportedLayerError(f"{name}: padded average pooling unsupported")
        return {"kind": "avgpool2d", "window": window, "stride": stride}, None
    if isinstance(layer, nn.Flatten):
        return {"kind": "flatten"}, None
    if isinstance(layer, nn.ReLU):
        return {"kind": "relu"}, None
    if isinstance(layer, nn.LeakyReLU):
        return {"kind": "leakyrelu", "alpha": float(layer.negative_slope)}, None
    raise UnsupportedLayerError(f"{name}: no engine equivalent for this layer kind")


def load_manifest(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ExportError(f"cannot read manifest {path}: {exc}") from exc
    for key in ("input_shape", "decoder", "anchors", "n_classes"):
        if key not in doc:
            raise ExportError(f"manifest {path}: missing field {key!r}")
    return doc


def export(checkpoint_path, manifest_path, out_dir) -> Path:
    """Write model.json + weight blobs for the given checkpoint and head manifest."""
    module = load_checkpoint(checkpoint_path)
    manifest = load_manifest(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    descs = []
    blobs = {}
    for idx, layer in enumerate(module):
        desc, blob = _layer_descriptor(idx, layer)
        if blob is not None:
            blob_name = f"{idx}.bin"
            desc["blob"] = blob_name
            blobs[blob_name] = blob
        descs.append(desc)

    input_shape = [int(v) for v in manifest["input_shape"]]
    n_classes = int(manifest["n_classes"])
    anchors = manifest["anchors"]
    n_boxes = len(anchors)
    expected_out = n_boxes * (5 + n_classes)
    with torch.no_grad():
        probe = module(torch.zeros(1, *input_shape))
    actual_out = int(probe.numel())
    if actual_out != expected_out:
        raise ExportError(
            f"shape mismatch: model produces {actual_out} outputs but the head "
            f"({n_boxes} anchors, {n_classes} classes) needs {expected_out}"
        )

    head = {
        "decoder": manifest["decoder"],
        "n_classes": n_classes,
        "anchors": anchors,
        "strides": manifest.get("strides"),
        "layout": manifest.get("layout", "box_major"),
    }
    if "var1" in manifest:
        head["var1"] = manifest["var1"]
        head["var2"] = manifest["var2"]

    for blob_name, blob in blobs.items():
        blob.astype("<f4").tofile(out_dir / blob_name)
    model_path = out_dir / "model.json"
    model_path.write_text(json.dumps({
        "format_version": 1,
        "input_shape": input_shape,
        "layers": descs,
        "head": head,
    }, indent=1) + "\n")
    return model_path
