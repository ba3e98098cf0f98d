"""Optimal and baseline IoU intervals over a box constraint region.

The feasible set of corner boxes is a product of two planar regions: the
(z0, z2) plane constrained by bounds on z0+z2 and z2-z0, and likewise
(z1, z3).  Within each plane the IoU against a fixed ground truth can only
attain its extrema at

  * the four region corners,
  * intersections of the boundary lines with the ground-truth lines
    z = g_lo and z = g_hi (at most eight), and
  * the ground-truth corner itself,

giving at most 13 points per plane and 169 combined candidates.  The
bounder filters each plane's points for feasibility (within 1e-9 slack so
boundary points survive rounding) and validity (strictly positive extent),
then takes the min/max IoU over the cross product.

The baseline bounder reproduces the looser comparison method: interval
arithmetic over four independent corner-coordinate intervals, with clamped
intersection widths and guarded division.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from boxcert import kernels
from boxcert.boxes import ConstraintRegion, GroundTruth, area
from boxcert.intervals import Interval

FEASIBILITY_SLACK = 1e-9

CORNER = "corner"
GT_INTERSECTION = "gt_intersection"
GT_CORNER = "gt_corner"


class InfeasibleRegionError(Exception):
    """No candidate point was feasible and valid (defensive; see diff.lo > 0)."""


@dataclass(frozen=True)
class IoUInterval:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"IoU interval must satisfy 0 <= lo <= hi <= 1, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= value <= self.hi + slack

    def within(self, other: "IoUInterval", slack: float = 0.0) -> bool:
        return self.lo >= other.lo - slack and self.hi <= other.hi + slack


@dataclass(frozen=True)
class CriticalPointSet:
    """Per-plane candidate extrema: paired coordinates plus provenance tags."""

    first: np.ndarray  # z0 (x plane) or z1 (y plane)
    second: np.ndarray  # z2 or z3
    tags: tuple[str, ...]

    def __len__(self) -> int:
        return int(self.first.size)


def critical_points_plane(
    sum_iv: Interval, diff_iv: Interval, g_lo: float, g_hi: float
) -> CriticalPointSet:
    """All candidate extrema of one plane; duplicates are allowed."""
    if diff_iv.lo <= 0:
        raise ValueError(f"plane needs positive minimum extent, got {diff_iv.lo}")
    l0, u0 = sum_iv.lo, sum_iv.hi
    l2, u2 = diff_iv.lo, diff_iv.hi
    pts: list[tuple[float, float, str]] = [
        ((u0 - u2) / 2, (u0 + u2) / 2, CORNER),
        ((u0 - l2) / 2, (u0 + l2) / 2, CORNER),
        ((l0 - u2) / 2, (l0 + u2) / 2, CORNER),
        ((l0 - l2) / 2, (l0 + l2) / 2, CORNER),
        (g_lo, u0 - g_lo, GT_INTERSECTION),
        (g_lo, l0 - g_lo, GT_INTERSECTION),
        (g_lo, u2 + g_lo, GT_INTERSECTION),
        (g_lo, l2 + g_lo, GT_INTERSECTION),
        (u0 - g_hi, g_hi, GT_INTERSECTION),
        (l0 - g_hi, g_hi, GT_INTERSECTION),
        (g_hi - u2, g_hi, GT_INTERSECTION),
        (g_hi - l2, g_hi, GT_INTERSECTION),
        (g_lo, g_hi, GT_CORNER),
    ]
    first = np.array([p[0] for p in pts])
    second = np.array([p[1] for p in pts])
    tags = tuple(p[2] for p in pts)
    return CriticalPointSet(first=first, second=second, tags=tags)


def _feasible_valid(
    points: CriticalPointSet, sum_iv: Interval, diff_iv: Interval
) -> tuple[np.ndarray, np.ndarray]:
    s = points.first + points.second
    d = points.second - points.first
    tol = FEASIBILITY_SLACK
    keep = (
        (s >= sum_iv.lo - tol)
        & (s <= sum_iv.hi + tol)
        & (d >= diff_iv.lo - tol)
        & (d <= diff_iv.hi + tol)
        & (points.second > points.first)
    )
    return points.first[keep], points.second[keep]


def optimal_iou_bounds(region: ConstraintRegion, g: GroundTruth) -> IoUInterval:
    """Exact IoU range over the region by sweeping the combined candidates."""
    gb = g.box
    px = critical_points_plane(region.sum_x, region.diff_x, gb.z0, gb.z2)
    py = critical_points_plane(region.sum_y, region.diff_y, gb.z1, gb.z3)
    zx0, zx2 = _feasible_valid(px, region.sum_x, region.diff_x)
    zy1, zy3 = _feasible_valid(py, region.sum_y, region.diff_y)
    if zx0.size == 0 or zy1.size == 0:
        raise InfeasibleRegionError("no feasible valid candidate in some plane")
    lo, hi = kernels.iou_pair_extrema(zx0, zx2, zy1, zy3, gb.as_tuple())
    return IoUInterval(min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0))


def _iv_max(a: Interval, c: float) -> Interval:
    return Interval(max(a.lo, c), max(a.hi, c))


def _iv_min(a: Interval, c: float) -> Interval:
    return Interval(min(a.lo, c), min(a.hi, c))


def _iv_sub_clamp(a: Interval, b: Interval) -> Interval:
    return Interval(max(a.lo - b.hi, 0.0), max(a.hi - b.lo, 0.0))


def _iv_mul_nonneg(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo * b.lo, a.hi * b.hi)


def baseline_iou_bounds(
    corner_intervals: tuple[Interval, Interval, Interval, Interval], g: GroundTruth
) -> IoUInterval:
    """Interval-arithmetic IoU over four independent corner intervals.

    Treats z0..z3 as uncorrelated, so the result always contains (and is
    generally wider than) the exact range over any coupled region whose
    projections match the given intervals.
    """
    z0, z1, z2, z3 = corner_intervals
    gb = g.box
    g_area = area(gb)
    iw = _iv_sub_clamp(_iv_min(z2, gb.z2), _iv_max(z0, gb.z0))
    ih = _iv_sub_clamp(_iv_min(z3, gb.z3), _iv_max(z1, gb.z1))
    a_i = _iv_mul_nonneg(iw, ih)
    bw = _iv_sub_clamp(z2, z0)
    bh = _iv_sub_clamp(z3, z1)
    a_b = _iv_mul_nonneg(bw, bh)
    # every realizable union is at least a(g), so the denominator may be
    # tightened to that floor before dividing
    denom = Interval(max(a_b.lo + g_area - a_i.hi, g_area), a_b.hi + g_area - a_i.lo)
    lo = a_i.lo / denom.hi
    hi = a_i.hi / denom.lo
    return IoUInterval(min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0))
