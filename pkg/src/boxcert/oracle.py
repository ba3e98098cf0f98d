"""Brute-force reference implementations backing the test suite.

Nothing here is used on the verification path; these routines provide
independent evidence that the analytic IoU bounds, the propagators and the
verdicts are sound and tight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from boxcert import kernels
from boxcert.boxes import ConstraintRegion, GroundTruth, area
from boxcert.intervals import Interval
from boxcert.model import ModelBundle, forward
from boxcert.perturbations import InputSet
from boxcert.verifier import Counterexample, VerificationQuery, correctness_violation


@dataclass(frozen=True)
class GridSpec:
    resolution_per_plane: int = 400
    seed: int = 0

    def __post_init__(self) -> None:
        if self.resolution_per_plane < 2:
            raise ValueError("grid resolution must be at least 2")


def _plane_values(
    sum_iv: Interval, diff_iv: Interval, g_lo: float, g_hi: float, resolution: int
) -> tuple[np.ndarray, np.ndarray]:
    """Grid coordinates for one plane, parameterized by (sum, diff).

    The regular grid includes the interval endpoints (so all four region
    corners are sampled), and is augmented with the sums/diffs at which the
    ground-truth lines z = g_lo and z = g_hi cross the region boundary, plus
    the ground-truth point itself.  Every analytic extremum candidate that
    is feasible therefore lands exactly on a grid node.
    """
    sums = np.linspace(sum_iv.lo, sum_iv.hi, resolution)
    diffs = np.linspace(diff_iv.lo, diff_iv.hi, resolution)
    extra_sums = np.array([
        2 * g_lo + diff_iv.hi, 2 * g_lo + diff_iv.lo,
        2 * g_hi - diff_iv.hi, 2 * g_hi - diff_iv.lo,
        g_lo + g_hi,
    ])
    extra_diffs = np.array([
        sum_iv.hi - 2 * g_lo, sum_iv.lo - 2 * g_lo,
        2 * g_hi - sum_iv.hi, 2 * g_hi - sum_iv.lo,
        g_hi - g_lo,
    ])
    extra_sums = extra_sums[(extra_sums >= sum_iv.lo) & (extra_sums <= sum_iv.hi)]
    extra_diffs = extra_diffs[(extra_diffs >= diff_iv.lo) & (extra_diffs <= diff_iv.hi)]
    return np.concatenate([sums, extra_sums]), np.concatenate([diffs, extra_diffs])


def _plane_reduction(
    sums: np.ndarray, diffs: np.ndarray, g_lo: float, g_hi: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-diff min/max intersection extent over all grid sums."""
    z_lo = 0.5 * (sums[:, None] - diffs[None, :])
    z_hi = 0.5 * (sums[:, None] + diffs[None, :])
    overlap = np.clip(np.minimum(z_hi, g_hi) - np.maximum(z_lo, g_lo), 0.0, None)
    return overlap.min(axis=0), overlap.max(axis=0)


def grid_iou_extrema(
    region: ConstraintRegion, g: GroundTruth, grid: GridSpec
) -> tuple[float, float]:
    """Sampled IoU extrema over the product grid of both planes.

    Every combination of an (sum_x, diff_x) grid node with a (sum_y, diff_y)
    grid node is a feasible corner box.  For a fixed pair of diffs the IoU
    is monotone in the intersection area, so the sweep reduces each plane to
    per-diff intersection extrema and evaluates the cross product of diffs;
    the result is the exact min/max IoU over all grid combinations.
    """
    gb = g.box
    res = grid.resolution_per_plane
    sums_x, diffs_x = _plane_values(region.sum_x, region.diff_x, gb.z0, gb.z2, res)
    sums_y, diffs_y = _plane_values(region.sum_y, region.diff_y, gb.z1, gb.z3, res)
    ix_min, ix_max = _plane_reduction(sums_x, diffs_x, gb.z0, gb.z2)
    iy_min, iy_max = _plane_reduction(sums_y, diffs_y, gb.z1, gb.z3)
    lo, hi = kernels.grid_pair_extrema(ix_min, ix_max, diffs_x, iy_min, iy_max, diffs_y, area(gb))
    return float(lo), float(hi)


def _sample_ts(t: Interval, n: int, seed: int) -> np.ndarray:
    """n deterministic parameter samples, endpoints first."""
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    rng = np.random.default_rng(seed)
    base = [t.lo, t.hi][: min(n, 2)]
    if n > 2:
        rest = rng.uniform(t.lo, t.hi, n - 2)
        return np.concatenate([base, rest])
    return np.asarray(base)


def sample_outputs(
    model: ModelBundle, inset: InputSet, n: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-output (min, max) envelope over n sampled parameter values."""
    ts = _sample_ts(inset.t_interval, n, seed)
    lo = np.full(model.output_size, np.inf)
    hi = np.full(model.output_size, -np.inf)
    for t in ts:
        out = forward(model, inset.realize(float(t)))
        lo = np.minimum(lo, out)
        hi = np.maximum(hi, out)
    return lo, hi


def falsify(query: VerificationQuery, n: int, seed: int) -> Optional[Counterexample]:
    """Concrete sampling attack: first sampled t violating correctness."""
    from boxcert.perturbations import build_input_set

    inset = build_input_set(query.image, query.perturbation)
    ts = _sample_ts(inset.t_interval, n, seed)
    for t in ts:
        image = inset.realize(float(t))
        criterion = correctness_violation(
            query.model, image, query.ground_truth, query.tau_iou, query.tau_class
        )
        if criterion is not None:
            return Counterexample(t=float(t), image=image, criterion=criterion)
    return None
