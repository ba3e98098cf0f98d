"""Parameterized input families: brightness, contrast, motion blur.

Every family is affine in a single scalar parameter t:

    x(t) = base + t * direction

so per-pixel bounds over a t-interval are exact endpoint evaluations, and
bisection of the parameter interval is the branch-and-bound split.  Pixels
are deliberately not clamped to [0, 1] after perturbation; clamping would
break affinity in t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from boxcert import kernels
from boxcert.intervals import Interval, IntervalTensor

KINDS = ("brightness", "contrast", "motionblur")
BLUR_ANGLES = (0, 45, 90, 135)


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    epsilon: float
    angle_deg: int = 0
    kernel_size: int = 5

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.kind == "motionblur":
            if self.angle_deg not in BLUR_ANGLES:
                raise ValueError(f"blur angle must be one of {BLUR_ANGLES}, got {self.angle_deg}")
            if self.kernel_size < 1 or self.kernel_size % 2 == 0:
                raise ValueError(f"kernel_size must be odd positive, got {self.kernel_size}")


@dataclass(frozen=True)
class InputSet:
    """Affine one-parameter image family base + t*direction, t in t_interval."""

    base_image: np.ndarray
    direction_image: np.ndarray
    t_interval: Interval

    def realize(self, t: float) -> np.ndarray:
        return self.base_image + t * self.direction_image


def line_kernel(kernel_size: int, angle_deg: int) -> np.ndarray:
    """Normalized line of kernel_size taps through the kernel center.

    Rows index the image y axis (growing downward), so 45 degrees is the
    anti-diagonal and 135 degrees the main diagonal.
    """
    k = np.zeros((kernel_size, kernel_size))
    c = kernel_size // 2
    idx = np.arange(kernel_size)
    if angle_deg == 0:
        k[c, :] = 1.0
    elif angle_deg == 90:
        k[:, c] = 1.0
    elif angle_deg == 45:
        k[idx, kernel_size - 1 - idx] = 1.0
    elif angle_deg == 135:
        k[idx, idx] = 1.0
    else:
        raise ValueError(f"unsupported blur angle {angle_deg}")
    return k / kernel_size


def blur_image(image: np.ndarray, kernel_size: int, angle_deg: int) -> np.ndarray:
    """Channelwise zero-padded convolution with the line kernel."""
    c = image.shape[0]
    k2d = line_kernel(kernel_size, angle_deg)
    kern = np.zeros((c, c, kernel_size, kernel_size))
    for ch in range(c):
        kern[ch, ch] = k2d
    return kernels.conv2d(image, kern, np.zeros(c), 1, kernel_size // 2)


def build_input_set(image: np.ndarray, spec: PerturbationSpec) -> InputSet:
    """Construct the affine family for the given perturbation.

    brightness: direction = 1,         t in [-eps, eps]
    contrast:   direction = 0.5 - x,   t in [0, eps]   (toward mid-gray)
    motionblur: direction = blur(x)-x, t in [0, eps]
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ValueError(f"image must be (C,H,W), got shape {image.shape}")
    if np.any(image < 0.0) or np.any(image > 1.0):
        raise ValueError("pixel values must lie in [0, 1]")
    if spec.kind == "brightness":
        direction = np.ones_like(image)
        t = Interval(-spec.epsilon, spec.epsilon)
    elif spec.kind == "contrast":
        direction = 0.5 - image
        t = Interval(0.0, spec.epsilon)
    else:
        direction = blur_image(image, spec.kernel_size, spec.angle_deg) - image
        t = Interval(0.0, spec.epsilon)
    return InputSet(base_image=image, direction_image=direction, t_interval=t)


def concretize(inset: InputSet) -> IntervalTensor:
    """Per-pixel bounds over the t-interval (exact since x(t) is affine)."""
    a = inset.t_interval.lo * inset.direction_image
    b = inset.t_interval.hi * inset.direction_image
    lo = inset.base_image + np.minimum(a, b)
    hi = inset.base_image + np.maximum(a, b)
    return IntervalTensor.from_arrays(lo, hi)


def bisect(inset: InputSet) -> tuple[InputSet, InputSet]:
    """Split the parameter interval at its midpoint."""
    t = inset.t_interval
    if t.width == 0:
        raise ValueError("cannot bisect a degenerate parameter interval")
    mid = t.mid
    return (
        InputSet(inset.base_image, inset.direction_image, Interval(t.lo, mid)),
        InputSet(inset.base_image, inset.direction_image, Interval(mid, t.hi)),
    )
