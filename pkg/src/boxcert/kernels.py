"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

The compiled path is used when numba imports cleanly; setting the
environment variable ``BOXCERT_NO_NUMBA=1`` forces the numpy fallback
(useful on platforms without a working LLVM toolchain, and for A/B timing
via ``benchmarks/bench_kernels.py``).  Both paths are kept behaviourally
identical and are cross-checked in the test suite.

All image tensors are float64 (C, H, W); convolution kernels are
(out_ch, in_ch, kh, kw) with symmetric zero padding.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("BOXCERT_NO_NUMBA", "").strip() in ("1", "true", "yes")

try:  # pragma: no cover - exercised indirectly via the selected path
    if _FORCE_NUMPY:
        raise ImportError("numba disabled via BOXCERT_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _pad_input(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    c, h, w = x.shape
    out = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    out[:, pad : pad + h, pad : pad + w] = x
    return out


def conv2d_numpy(
    x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int, pad: int
) -> np.ndarray:
    """Direct convolution; loops only over the (in_ch, kh, kw) taps."""
    oc, ic, kh, kw = kernel.shape
    xp = _pad_input(x, pad)
    _, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    out = np.zeros((oc, ho, wo), dtype=np.float64)
    for c in range(ic):
        for i in range(kh):
            for j in range(kw):
                patch = xp[c, i : i + ho * stride : stride, j : j + wo * stride : stride]
                out += kernel[:, c, i, j][:, None, None] * patch[None, :, :]
    return out + bias[:, None, None]


def avgpool2d_numpy(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    c, h, w = x.shape
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    out = np.zeros((c, ho, wo), dtype=np.float64)
    for i in range(window):
        for j in range(window):
            out += x[:, i : i + ho * stride : stride, j : j + wo * stride : stride]
    return out / (window * window)


def iou_pair_extrema_numpy(
    zx0: np.ndarray,
    zx2: np.ndarray,
    zy1: np.ndarray,
    zy3: np.ndarray,
    g: tuple[float, float, float, float],
) -> tuple[float, float]:
    """Min/max IoU against g over all (x-candidate, y-candidate) pairs.

    The candidate arrays hold valid per-plane coordinates (zx0 < zx2 and
    zy1 < zy3 elementwise).  Intersection widths/heights clamp at zero.
    """
    g0, g1, g2, g3 = g
    garea = (g2 - g0) * (g3 - g1)
    iw = np.maximum(0.0, np.minimum(zx2, g2) - np.maximum(zx0, g0))
    ih = np.maximum(0.0, np.minimum(zy3, g3) - np.maximum(zy1, g1))
    bw = zx2 - zx0
    bh = zy3 - zy1
    inter = iw[:, None] * ih[None, :]
    barea = bw[:, None] * bh[None, :]
    vals = inter / (barea + garea - inter)
    return float(vals.min()), float(vals.max())


def grid_pair_extrema_numpy(
    ix_min: np.ndarray,
    ix_max: np.ndarray,
    dx: np.ndarray,
    iy_min: np.ndarray,
    iy_max: np.ndarray,
    dy: np.ndarray,
    g_area: float,
) -> tuple[float, float]:
    """Exact IoU extrema over a product grid reduced per diff value.

    For fixed widths (dx, dy) the IoU is monotone increasing in the
    intersection area, so the per-(dx, dy) extremes are attained at the
    componentwise min/max intersections; the arrays carry those per diff
    value and the cross product over diff pairs is evaluated densely.
    """
    u_min = ix_min[:, None] * iy_min[None, :]
    u_max = ix_max[:, None] * iy_max[None, :]
    v = dx[:, None] * dy[None, :]
    lo = u_min / (v + g_area - u_min)
    hi = u_max / (v + g_area - u_max)
    return float(lo.min()), float(hi.max())


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------


@njit(cache=True)
def _conv2d_jit(x, kernel, bias, stride, pad):  # pragma: no cover - jit
    oc, ic, kh, kw = kernel.shape
    c, h, w = x.shape
    hp = h + 2 * pad
    wp = w + 2 * pad
    xp = np.zeros((c, hp, wp), dtype=np.float64)
    xp[:, pad : pad + h, pad : pad + w] = x
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    out = np.empty((oc, ho, wo), dtype=np.float64)
    for o in range(oc):
        for y in range(ho):
            for z in range(wo):
                acc = bias[o]
                for cc in range(ic):
                    for i in range(kh):
                        for j in range(kw):
                            acc += kernel[o, cc, i, j] * xp[cc, y * stride + i, z * stride + j]
                out[o, y, z] = acc
    return out


@njit(cache=True)
def _avgpool2d_jit(x, window, stride):  # pragma: no cover - jit
    c, h, w = x.shape
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    out = np.empty((c, ho, wo), dtype=np.float64)
    denom = window * window
    for cc in range(c):
        for y in range(ho):
            for z in range(wo):
                acc = 0.0
                for i in range(window):
                    for j in range(window):
                        acc += x[cc, y * stride + i, z * stride + j]
                out[cc, y, z] = acc / denom
    return out


@njit(cache=True)
def _iou_pair_extrema_jit(zx0, zx2, zy1, zy3, g0, g1, g2, g3):  # pragma: no cover - jit
    garea = (g2 - g0) * (g3 - g1)
    best_lo = np.inf
    best_hi = -np.inf
    for a in range(zx0.shape[0]):
        iw = min(zx2[a], g2) - max(zx0[a], g0)
        if iw < 0.0:
            iw = 0.0
        bw = zx2[a] - zx0[a]
        for b in range(zy1.shape[0]):
            ih = min(zy3[b], g3) - max(zy1[b], g1)
            if ih < 0.0:
                ih = 0.0
            inter = iw * ih
            val = inter / (bw * (zy3[b] - zy1[b]) + garea - inter)
            if val < best_lo:
                best_lo = val
            if val > best_hi:
                best_hi = val
    return best_lo, best_hi


@njit(cache=True)
def _grid_pair_extrema_jit(ix_min, ix_max, dx, iy_min, iy_max, dy, g_area):  # pragma: no cover
    best_lo = np.inf
    best_hi = -np.inf
    for a in range(dx.shape[0]):
        for b in range(dy.shape[0]):
            v = dx[a] * dy[b] + g_area
            u = ix_min[a] * iy_min[b]
            lo = u / (v - u)
            u = ix_max[a] * iy_max[b]
            hi = u / (v - u)
            if lo < best_lo:
                best_lo = lo
            if hi > best_hi:
                best_hi = hi
    return best_lo, best_hi


def _conv2d_numba(x, kernel, bias, stride, pad):
    return _conv2d_jit(
        np.ascontiguousarray(x), np.ascontiguousarray(kernel), np.ascontiguousarray(bias),
        stride, pad,
    )


def _avgpool2d_numba(x, window, stride):
    return _avgpool2d_jit(np.ascontiguousarray(x), window, stride)


def _iou_pair_extrema_numba(zx0, zx2, zy1, zy3, g):
    lo, hi = _iou_pair_extrema_jit(
        np.ascontiguousarray(zx0), np.ascontiguousarray(zx2),
        np.ascontiguousarray(zy1), np.ascontiguousarray(zy3),
        float(g[0]), float(g[1]), float(g[2]), float(g[3]),
    )
    return float(lo), float(hi)


def _grid_pair_extrema_numba(ix_min, ix_max, dx, iy_min, iy_max, dy, g_area):
    lo, hi = _grid_pair_extrema_jit(
        np.ascontiguousarray(ix_min), np.ascontiguousarray(ix_max), np.ascontiguousarray(dx),
        np.ascontiguousarray(iy_min), np.ascontiguousarray(iy_max), np.ascontiguousarray(dy),
        float(g_area),
    )
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# path selection
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    conv2d = _conv2d_numba
    avgpool2d = _avgpool2d_numba
    iou_pair_extrema = _iou_pair_extrema_numba
    grid_pair_extrema = _grid_pair_extrema_numba
    BACKEND = "numba"
else:
    conv2d = conv2d_numpy
    avgpool2d = avgpool2d_numpy
    iou_pair_extrema = iou_pair_extrema_numpy
    grid_pair_extrema = grid_pair_extrema_numpy
    BACKEND = "numpy"
