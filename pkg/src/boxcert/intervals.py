"""Scalar and tensor interval arithmetic.

Everything downstream (bound propagation, score bounds, IoU bounding)
carries its state as closed intervals [lo, hi] of 64-bit floats.  No
directed rounding is performed; soundness checks elsewhere allow a 1e-9
slack to absorb floating-point drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Interval:
    """Closed scalar interval [lo, hi]; degenerate (lo == hi) is allowed."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"inverted interval: lo={self.lo} > hi={self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack


@dataclass(frozen=True)
class IntervalTensor:
    """Shaped array of intervals, stored as flat row-major lo/hi arrays."""

    shape: tuple[int, ...]
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        n = int(np.prod(self.shape)) if self.shape else 1
        if any(int(s) <= 0 for s in self.shape):
            raise ValueError(f"non-positive dimension in shape {self.shape}")
        if self.lo.shape != (n,) or self.hi.shape != (n,):
            raise ValueError(
                f"flat arrays of length {self.lo.shape}/{self.hi.shape} "
                f"do not match shape {self.shape} (need {n})"
            )
        if np.any(self.lo > self.hi):
            bad = int(np.argmax(self.lo > self.hi))
            raise ValueError(
                f"inverted interval at flat index {bad}: "
                f"[{self.lo[bad]}, {self.hi[bad]}]"
            )

    @classmethod
    def from_arrays(cls, lo: np.ndarray, hi: np.ndarray) -> "IntervalTensor":
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if lo.shape != hi.shape:
            raise ValueError(f"lo shape {lo.shape} != hi shape {hi.shape}")
        return cls(tuple(int(s) for s in lo.shape), lo.ravel().copy(), hi.ravel().copy())

    @classmethod
    def point(cls, x: np.ndarray) -> "IntervalTensor":
        """Degenerate tensor pinning every entry to the given values."""
        x = np.asarray(x, dtype=np.float64)
        return cls(tuple(int(s) for s in x.shape), x.ravel().copy(), x.ravel().copy())

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1

    def lo_nd(self) -> np.ndarray:
        return self.lo.reshape(self.shape)

    def hi_nd(self) -> np.ndarray:
        return self.hi.reshape(self.shape)

    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def at(self, flat_index: int) -> Interval:
        return Interval(float(self.lo[flat_index]), float(self.hi[flat_index]))

    def contains(self, x: np.ndarray, slack: float = 0.0) -> bool:
        flat = np.asarray(x, dtype=np.float64).ravel()
        return bool(np.all(flat >= self.lo - slack) and np.all(flat <= self.hi + slack))


def iv_add(a: Interval, b: Interval) -> Interval:
    """[a.lo + b.lo, a.hi + b.hi]."""
    return Interval(a.lo + b.lo, a.hi + b.hi)


def iv_mul(a: Interval, b: Interval) -> Interval:
    """Envelope of the four endpoint products."""
    products = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return Interval(min(products), max(products))


def iv_affine(weights: np.ndarray, bias: np.ndarray, x: IntervalTensor) -> IntervalTensor:
    """Bounds on W @ x + b over the input box, via the sign-split rule.

    Row j is the sum over i of [w_ji*lo_i, w_ji*hi_i] for w_ji >= 0 and
    [w_ji*hi_i, w_ji*lo_i] otherwise, plus bias_j.  This is exact when each
    input coordinate appears once, and sound in general.
    """
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != x.size:
        raise ValueError(f"weight shape {w.shape} incompatible with input size {x.size}")
    if b.shape != (w.shape[0],):
        raise ValueError(f"bias shape {b.shape} incompatible with {w.shape[0]} rows")
    w_pos = np.maximum(w, 0.0)
    w_neg = np.minimum(w, 0.0)
    lo = w_pos @ x.lo + w_neg @ x.hi + b
    hi = w_pos @ x.hi + w_neg @ x.lo + b
    return IntervalTensor((w.shape[0],), lo, hi)


def iv_monotone(
    f: Callable[[float], float], direction: str, x: Interval
) -> Interval:
    """Endpoint image of a map that is monotone on [x.lo, x.hi]."""
    if direction == "increasing":
        return Interval(f(x.lo), f(x.hi))
    if direction == "decreasing":
        return Interval(f(x.hi), f(x.lo))
    raise ValueError(f"direction must be 'increasing' or 'decreasing', got {direction!r}")


def sigmoid(x):
    """Numerically stable logistic function, elementwise on arrays."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(out[0])
    return out.reshape(np.asarray(x).shape)


def sigmoid_interval(x: Interval) -> Interval:
    return Interval(float(sigmoid(x.lo)), float(sigmoid(x.hi)))
