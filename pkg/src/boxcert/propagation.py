"""Sound bound propagation: IBP and backward symbolic substitution.

IBP pushes concrete intervals layer by layer (exact for monotone
activations and linear layers taken in isolation).  Back-substitution
composes per-neuron linear relaxations backward from the output to the
input before concretizing, recovering cross-neuron dependencies that IBP
drops.  Sigmoids never enter either propagator: score sigmoids are applied
to the final logit bounds by endpoint mapping, and the box decoders are
bypassed entirely via the sum/difference coordinate transformation.

LeakyReLU(x) = max(alpha*x, x) over [l, u] with l < 0 < u is bounded by

    upper line: slope (u - alpha*l)/(u - l), intercept (alpha-1)*l*u/(u-l)
    lower line: slope alpha if u < |l| else 1, through the origin

where the lower slope choice minimises the enclosed relaxation area.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from boxcert import kernels
from boxcert.intervals import IntervalTensor, iv_affine
from boxcert.model import Layer, ModelBundle


@dataclass(frozen=True)
class LinearRelaxation:
    """Per-neuron linear envelope: lower/upper slope and intercept."""

    lower_slope: float
    lower_intercept: float
    upper_slope: float
    upper_intercept: float


@dataclass(frozen=True)
class SymbolicBounds:
    """Output bounds as affine expressions over the input variables.

    For every input x in the box: A_lo @ x + d_lo <= f(x) <= A_up @ x + d_up.
    """

    a_lo: np.ndarray
    d_lo: np.ndarray
    a_up: np.ndarray
    d_up: np.ndarray

    def concretize(self, box: IntervalTensor) -> IntervalTensor:
        lo = np.maximum(self.a_lo, 0.0) @ box.lo + np.minimum(self.a_lo, 0.0) @ box.hi + self.d_lo
        hi = np.maximum(self.a_up, 0.0) @ box.hi + np.minimum(self.a_up, 0.0) @ box.lo + self.d_up
        # fp jitter can invert near-degenerate pairs by ~1 ulp
        if np.any(lo > hi + 1e-9):
            raise AssertionError("symbolic bounds inverted beyond fp tolerance")
        return IntervalTensor((lo.size,), np.minimum(lo, hi), hi)


def relax_leakyrelu(l: float, u: float, alpha: float) -> LinearRelaxation:
    """Optimal linear envelope of LeakyReLU with negative slope alpha on [l, u]."""
    if l > u:
        raise ValueError(f"inverted bounds l={l} > u={u}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0,1], got {alpha}")
    if u <= 0.0:
        return LinearRelaxation(alpha, 0.0, alpha, 0.0)
    if l >= 0.0:
        return LinearRelaxation(1.0, 0.0, 1.0, 0.0)
    upper_slope = (u - alpha * l) / (u - l)
    upper_icpt = (alpha - 1.0) * l * u / (u - l)
    lower_slope = alpha if u < -l else 1.0
    return LinearRelaxation(lower_slope, 0.0, upper_slope, upper_icpt)


def relaxation_area(l: float, u: float, alpha: float, alpha_tilde: float) -> float:
    """Total area enclosed between the two bounding lines.

    Decomposes as the (fixed) upper-triangle area -l*u*(1-alpha)/2 plus the
    lower-line area l^2*(at-alpha)/2 + u^2*(1-at)/2, which is affine in the
    lower slope.
    """
    if not (l < 0.0 < u):
        raise ValueError(f"area is defined for l < 0 < u, got l={l}, u={u}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0,1], got {alpha}")
    if not alpha - 1e-12 <= alpha_tilde <= 1.0 + 1e-12:
        raise ValueError(f"alpha_tilde={alpha_tilde} outside [{alpha}, 1]")
    e_upper = -0.5 * l * u * (1.0 - alpha)
    return e_upper + 0.5 * l * l * (alpha_tilde - alpha) + 0.5 * u * u * (1.0 - alpha_tilde)


def _relax_vec(lo: np.ndarray, hi: np.ndarray, alpha: float):
    """Vectorized envelope; returns (lower_slope, lower_icpt, upper_slope, upper_icpt)."""
    n = lo.size
    sl = np.empty(n)
    su = np.empty(n)
    iu = np.zeros(n)
    neg = hi <= 0.0
    pos = lo >= 0.0
    mid = ~(neg | pos)
    sl[neg] = alpha
    su[neg] = alpha
    sl[pos] = 1.0
    su[pos] = 1.0
    if np.any(mid):
        l = lo[mid]
        u = hi[mid]
        su[mid] = (u - alpha * l) / (u - l)
        iu[mid] = (alpha - 1.0) * l * u / (u - l)
        sl[mid] = np.where(u < -l, alpha, 1.0)
    return sl, np.zeros(n), su, iu


def _activation_alpha(layer: Layer) -> float:
    return 0.0 if layer.kind == "relu" else layer.alpha


def ibp_forward(bundle: ModelBundle, box: IntervalTensor) -> list[IntervalTensor]:
    """Concrete interval bounds after every layer, in order."""
    if box.shape != bundle.input_shape:
        raise ValueError(f"input box shape {box.shape} != model input {bundle.input_shape}")
    out: list[IntervalTensor] = []
    cur = box
    for layer, shape in zip(bundle.layers, bundle.layer_shapes):
        if layer.kind == "dense":
            cur = iv_affine(layer.weight, layer.bias, cur)
        elif layer.kind == "conv2d":
            center = 0.5 * (cur.lo_nd() + cur.hi_nd())
            radius = 0.5 * (cur.hi_nd() - cur.lo_nd())
            zero = np.zeros(layer.weight.shape[0])
            c = kernels.conv2d(center, layer.weight, layer.bias, layer.stride, layer.padding)
            r = kernels.conv2d(radius, np.abs(layer.weight), zero, layer.stride, layer.padding)
            cur = IntervalTensor(shape, (c - r).ravel(), (c + r).ravel())
        elif layer.kind == "avgpool2d":
            lo = kernels.avgpool2d(cur.lo_nd(), layer.window, layer.stride)
            hi = kernels.avgpool2d(cur.hi_nd(), layer.window, layer.stride)
            cur = IntervalTensor(shape, lo.ravel(), hi.ravel())
        elif layer.kind == "flatten":
            cur = IntervalTensor(shape, cur.lo, cur.hi)
        elif layer.kind in ("relu", "leakyrelu"):
            a = _activation_alpha(layer)
            lo = np.where(cur.lo >= 0.0, cur.lo, a * cur.lo)
            hi = np.where(cur.hi >= 0.0, cur.hi, a * cur.hi)
            cur = IntervalTensor(shape, lo, hi)
        out.append(cur)
    return out


def _dense_form(layer: Layer, in_shape: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Equivalent (W, b) of a linear layer acting on the flattened input."""
    if layer.kind == "dense":
        return layer.weight, layer.bias
    if layer.kind == "conv2d":
        oc, ic, kh, kw = layer.weight.shape
        c, h, w = in_shape
        s, p = layer.stride, layer.padding
        ho = (h + 2 * p - kh) // s + 1
        wo = (w + 2 * p - kw) // s + 1
        mat = np.zeros((oc * ho * wo, c * h * w))
        ys = np.arange(ho) * s - p
        xs = np.arange(wo) * s - p
        orow = (np.arange(oc)[:, None, None] * ho + np.arange(ho)[None, :, None]) * wo \
            + np.arange(wo)[None, None, :]
        for cc in range(ic):
            for i in range(kh):
                yy = ys + i
                vy = (yy >= 0) & (yy < h)
                for j in range(kw):
                    xx = xs + j
                    vx = (xx >= 0) & (xx < w)
                    if not (vy.any() and vx.any()):
                        continue
                    cols = (cc * h + yy[vy])[:, None] * w + xx[vx][None, :]
                    rows = orow[:, vy][:, :, vx]
                    vals = layer.weight[:, cc, i, j]
                    mat[rows.ravel(), np.broadcast_to(cols, rows.shape).ravel()] += np.repeat(
                        vals, cols.size
                    )
        bias = np.repeat(layer.bias, ho * wo)
        return mat, bias
    if layer.kind == "avgpool2d":
        c, h, w = in_shape
        win, s = layer.window, layer.stride
        ho = (h - win) // s + 1
        wo = (w - win) // s + 1
        mat = np.zeros((c * ho * wo, c * h * w))
        val = 1.0 / (win * win)
        for cc in range(c):
            for y in range(ho):
                for x in range(wo):
                    row = (cc * ho + y) * wo + x
                    for i in range(win):
                        cols = (cc * h + y * s + i) * w + x * s + np.arange(win)
                        mat[row, cols] += val
        return mat, np.zeros(c * ho * wo)
    raise ValueError(f"no dense form for layer kind {layer.kind!r}")


def _cached_dense_form(bundle: ModelBundle, idx: int) -> tuple[np.ndarray, np.ndarray]:
    cache = getattr(bundle, "_dense_forms", None)
    if cache is None:
        cache = {}
        setattr(bundle, "_dense_forms", cache)
    if idx not in cache:
        in_shape = bundle.input_shape if idx == 0 else bundle.layer_shapes[idx - 1]
        cache[idx] = _dense_form(bundle.layers[idx], in_shape)
    return cache[idx]


def backsubstitute_symbolic(bundle: ModelBundle, box: IntervalTensor) -> SymbolicBounds:
    """Affine output bounds over the inputs via backward substitution.

    Intermediate pre-activation bounds (needed to instantiate the piecewise
    relaxations) come from an IBP sweep; the backward pass then composes the
    layer maps and per-neuron envelopes from the output back to the input.
    """
    per_layer = ibp_forward(bundle, box)
    n_out = int(np.prod(bundle.layer_shapes[-1]))
    a_up = np.eye(n_out)
    a_lo = np.eye(n_out)
    d_up = np.zeros(n_out)
    d_lo = np.zeros(n_out)
    for idx in range(len(bundle.layers) - 1, -1, -1):
        layer = bundle.layers[idx]
        if layer.kind == "flatten":
            continue
        if layer.kind in ("dense", "conv2d", "avgpool2d"):
            w, b = _cached_dense_form(bundle, idx)
            d_up = d_up + a_up @ b
            d_lo = d_lo + a_lo @ b
            a_up = a_up @ w
            a_lo = a_lo @ w
            continue
        pre = per_layer[idx - 1] if idx > 0 else box
        sl, il, su, iu = _relax_vec(pre.lo, pre.hi, _activation_alpha(layer))
        up_pos = a_up >= 0.0
        d_up = d_up + np.sum(a_up * np.where(up_pos, iu, il), axis=1)
        a_up = a_up * np.where(up_pos, su, sl)
        lo_pos = a_lo >= 0.0
        d_lo = d_lo + np.sum(a_lo * np.where(lo_pos, il, iu), axis=1)
        a_lo = a_lo * np.where(lo_pos, sl, su)
    return SymbolicBounds(a_lo=a_lo, d_lo=d_lo, a_up=a_up, d_up=d_up)


def backsubstitute(bundle: ModelBundle, box: IntervalTensor) -> IntervalTensor:
    """Concrete output bounds from the backward symbolic pass."""
    return backsubstitute_symbolic(bundle, box).concretize(box)


def propagate(bundle: ModelBundle, box: IntervalTensor, method: str) -> IntervalTensor:
    """Output-layer bounds by the named method ('ibp' or 'backsub')."""
    if method == "ibp":
        return ibp_forward(bundle, box)[-1]
    if method == "backsub":
        return backsubstitute(bundle, box)
    raise ValueError(f"unknown propagation method {method!r}")
