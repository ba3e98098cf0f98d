"""Box formats, IoU, anchor decoders, and corner-coordinate constraints.

Coordinates are pixels throughout.  A corner box is (z0, z1, z2, z3) with
(z0, z1) the top-left and (z2, z3) the bottom-right corner; a center box is
(cx, cy, w, h).  The two formats convert via

    h_map(cx, cy, w, h)  = (cx - w/2, cy - h/2, cx + w/2, cy + h/2)
    h_inverse(z0..z3)    = ((z0+z2)/2, (z1+z3)/2, z2-z0, z3-z1)

Each detector family maps a raw offset 4-vector o and an anchor prior to a
center box through a componentwise strictly increasing transform, so offset
intervals induce exact bounds on (z0+z2, z1+z3, z2-z0, z3-z1) — the
constraint region the IoU bounder operates on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from boxcert.intervals import Interval, sigmoid

DECODER_KINDS = ("ssd", "yolov2", "yolov3")


@dataclass(frozen=True)
class CornerBox:
    z0: float
    z1: float
    z2: float
    z3: float

    def __post_init__(self) -> None:
        if not (self.z0 < self.z2 and self.z1 < self.z3):
            raise ValueError(
                f"invalid corner box ({self.z0}, {self.z1}, {self.z2}, {self.z3}): "
                "requires z0 < z2 and z1 < z3"
            )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.z0, self.z1, self.z2, self.z3)


@dataclass(frozen=True)
class CenterBox:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"center box needs positive size, got w={self.w}, h={self.h}")


@dataclass(frozen=True)
class GroundTruth:
    box: CornerBox
    class_id: int

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"negative class id {self.class_id}")


@dataclass(frozen=True)
class ConstraintRegion:
    """Feasible corner boxes as bounds on the four sum/difference coordinates.

    sum_x bounds z0+z2, sum_y bounds z1+z3, diff_x bounds z2-z0 and diff_y
    bounds z3-z1.  Decoded widths and heights are positive, so both diff
    lower bounds must be strictly positive.
    """

    sum_x: Interval
    sum_y: Interval
    diff_x: Interval
    diff_y: Interval

    def __post_init__(self) -> None:
        if self.diff_x.lo <= 0 or self.diff_y.lo <= 0:
            raise ValueError(
                f"region widths/heights must be positive: diff_x.lo={self.diff_x.lo}, "
                f"diff_y.lo={self.diff_y.lo}"
            )

    def contains(self, b: CornerBox, slack: float = 0.0) -> bool:
        return (
            self.sum_x.contains(b.z0 + b.z2, slack)
            and self.sum_y.contains(b.z1 + b.z3, slack)
            and self.diff_x.contains(b.z2 - b.z0, slack)
            and self.diff_y.contains(b.z3 - b.z1, slack)
        )


def area(b: CornerBox) -> float:
    return (b.z2 - b.z0) * (b.z3 - b.z1)


def intersection(b: CornerBox, b2: CornerBox) -> float:
    """Area of the overlap; zero when the boxes are disjoint."""
    iw = min(b.z2, b2.z2) - max(b.z0, b2.z0)
    ih = min(b.z3, b2.z3) - max(b.z1, b2.z1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def iou(b: CornerBox, b2: CornerBox) -> float:
    inter = intersection(b, b2)
    union = area(b) + area(b2) - inter
    return inter / union


def h_map(c: CenterBox) -> CornerBox:
    return CornerBox(c.cx - c.w / 2, c.cy - c.h / 2, c.cx + c.w / 2, c.cy + c.h / 2)


def h_inverse(b: CornerBox) -> CenterBox:
    return CenterBox((b.z0 + b.z2) / 2, (b.z1 + b.z3) / 2, b.z2 - b.z0, b.z3 - b.z1)


def _check_decoder_args(
    kind: str,
    anchor: Sequence[float],
    scale: Optional[float],
    variances: Optional[tuple[float, float]],
) -> None:
    if kind not in DECODER_KINDS:
        raise ValueError(f"unknown decoder kind {kind!r}")
    if len(anchor) != 4:
        raise ValueError(f"anchor must have 4 entries, got {len(anchor)}")
    if anchor[2] <= 0 or anchor[3] <= 0:
        raise ValueError(f"anchor width/height must be positive, got {anchor[2:]}")
    if kind == "ssd":
        if variances is None or variances[0] <= 0 or variances[1] <= 0:
            raise ValueError(f"ssd decoding needs positive variances, got {variances}")
    else:
        if scale is None or scale <= 0:
            raise ValueError(f"{kind} decoding needs a positive stride, got {scale}")


def decode_component(
    kind: str,
    index: int,
    o: float,
    anchor: Sequence[float],
    scale: Optional[float] = None,
    variances: Optional[tuple[float, float]] = None,
) -> float:
    """One coordinate of the offset-to-center transform.

    index 0/1 give the center x/y, index 2/3 the width/height.  Every
    component is strictly increasing in its own offset (the anchor sizes,
    strides and variances are positive), which is what makes endpoint
    mapping of offset intervals exact.
    """
    p0, p1, p2, p3 = anchor
    if kind == "ssd":
        var1, var2 = variances  # type: ignore[misc]
        if index == 0:
            return p0 + o * var1 * p2
        if index == 1:
            return p1 + o * var1 * p3
        if index == 2:
            return p2 * math.exp(o * var2)
        return p3 * math.exp(o * var2)
    s = float(scale)  # type: ignore[arg-type]
    if kind == "yolov2":
        if index == 0:
            return (sigmoid(o) + p0) * s
        if index == 1:
            return (sigmoid(o) + p1) * s
        if index == 2:
            return p2 * math.exp(o) * s
        return p3 * math.exp(o) * s
    # yolov3
    if index == 0:
        return (2.0 * sigmoid(o) - 0.5 + p0) * s
    if index == 1:
        return (2.0 * sigmoid(o) - 0.5 + p1) * s
    if index == 2:
        return (2.0 * sigmoid(o)) ** 2 * p2 * s
    return (2.0 * sigmoid(o)) ** 2 * p3 * s


def decode(
    kind: str,
    offsets: Sequence[float],
    anchor: Sequence[float],
    scale: Optional[float] = None,
    variances: Optional[tuple[float, float]] = None,
) -> CenterBox:
    """Map a raw offset 4-vector to a center-format box for the given family."""
    _check_decoder_args(kind, anchor, scale, variances)
    if len(offsets) != 4:
        raise ValueError(f"offset vector must have 4 entries, got {len(offsets)}")
    vals = [
        decode_component(kind, i, float(offsets[i]), anchor, scale, variances)
        for i in range(4)
    ]
    return CenterBox(*vals)


def offset_interval_to_region(
    kind: str,
    o_bounds: Sequence[Interval],
    anchor: Sequence[float],
    scale: Optional[float] = None,
    variances: Optional[tuple[float, float]] = None,
) -> ConstraintRegion:
    """Exact sum/difference constraints induced by per-offset intervals.

    Because each decoded component is strictly increasing in its own offset,
    the endpoints of the offset intervals map to the exact extreme values of
    2*cx, 2*cy, w and h.
    """
    _check_decoder_args(kind, anchor, scale, variances)
    if len(o_bounds) != 4:
        raise ValueError(f"need 4 offset intervals, got {len(o_bounds)}")

    def comp(index: int, o: float) -> float:
        return decode_component(kind, index, o, anchor, scale, variances)

    return ConstraintRegion(
        sum_x=Interval(2 * comp(0, o_bounds[0].lo), 2 * comp(0, o_bounds[0].hi)),
        sum_y=Interval(2 * comp(1, o_bounds[1].lo), 2 * comp(1, o_bounds[1].hi)),
        diff_x=Interval(comp(2, o_bounds[2].lo), comp(2, o_bounds[2].hi)),
        diff_y=Interval(comp(3, o_bounds[3].lo), comp(3, o_bounds[3].hi)),
    )


def interval_decode_corners(
    kind: str,
    o_bounds: Sequence[Interval],
    anchor: Sequence[float],
    scale: Optional[float] = None,
    variances: Optional[tuple[float, float]] = None,
) -> tuple[Interval, Interval, Interval, Interval]:
    """Per-corner intervals from interval arithmetic over the decode pipeline.

    This is the propagation route that treats the four corner coordinates as
    independent: endpoint-map each center component, then push through the
    center-to-corner conversion with interval subtraction/addition.  It loses
    the sum/difference coupling and is what the baseline IoU bounder consumes.
    """
    region = offset_interval_to_region(kind, o_bounds, anchor, scale, variances)
    cx = Interval(region.sum_x.lo / 2, region.sum_x.hi / 2)
    cy = Interval(region.sum_y.lo / 2, region.sum_y.hi / 2)
    w = region.diff_x
    h = region.diff_y
    z0 = Interval(cx.lo - w.hi / 2, cx.hi - w.lo / 2)
    z1 = Interval(cy.lo - h.hi / 2, cy.hi - h.lo / 2)
    z2 = Interval(cx.lo + w.lo / 2, cx.hi + w.hi / 2)
    z3 = Interval(cy.lo + h.lo / 2, cy.hi + h.hi / 2)
    return (z0, z1, z2, z3)
