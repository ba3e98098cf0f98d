import numpy as np
import pytest

from boxcert.boxes import CornerBox, ConstraintRegion, GroundTruth, iou
from boxcert.intervals import Interval
from boxcert.model import forward
from boxcert.oracle import GridSpec, falsify, grid_iou_extrema, sample_outputs
from boxcert.perturbations import PerturbationSpec, build_input_set, concretize
from boxcert.propagation import backsubstitute, ibp_forward
from boxcert.verifier import NONROBUST, ROBUST, VerificationQuery, verify


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(1, 0)


def test_grid_point_region_exact():
    g = GroundTruth(CornerBox(1, 1, 3, 3), 0)
    box = CornerBox(2, 0.5, 5, 4)
    region = ConstraintRegion(
        Interval(box.z0 + box.z2, box.z0 + box.z2),
        Interval(box.z1 + box.z3, box.z1 + box.z3),
        Interval(box.z2 - box.z0, box.z2 - box.z0),
        Interval(box.z3 - box.z1, box.z3 - box.z1),
    )
    lo, hi = grid_iou_extrema(region, g, GridSpec(50, 0))
    expect = iou(box, g.box)
    assert abs(lo - expect) < 1e-12 and abs(hi - expect) < 1e-12


def test_grid_hits_gt_exactly_when_feasible():
    g = GroundTruth(CornerBox(3, 3, 7, 8), 0)
    region = ConstraintRegion(Interval(8, 12), Interval(9, 13), Interval(3, 5), Interval(4, 6))
    lo, hi = grid_iou_extrema(region, g, GridSpec(37, 0))  # odd resolution: no luck involved
    assert hi == 1.0


def test_grid_max_below_optimal(toy_gt):
    from boxcert.iou_bounds import optimal_iou_bounds

    rng = np.random.default_rng(1)
    for _ in range(50):
        sx = sorted(rng.uniform(0, 15, 2))
        sy = sorted(rng.uniform(0, 15, 2))
        dx = sorted(rng.uniform(0.5, 10, 2))
        dy = sorted(rng.uniform(0.5, 10, 2))
        region = ConstraintRegion(Interval(*sx), Interval(*sy), Interval(*dx), Interval(*dy))
        got = optimal_iou_bounds(region, toy_gt)
        lo, hi = grid_iou_extrema(region, toy_gt, GridSpec(60, 0))
        assert hi <= got.hi + 1e-9
        assert lo >= got.lo - 1e-9


def test_sample_outputs_degenerate(toy_bundle, toy_image):
    inset = build_input_set(toy_image, PerturbationSpec("brightness", 0.0))
    lo, hi = sample_outputs(toy_bundle, inset, 1, 0)
    f = forward(toy_bundle, toy_image)
    assert np.array_equal(lo, f) and np.array_equal(hi, f)


def test_sampled_envelope_inside_propagated_bounds(toy_bundle, toy_image):
    inset = build_input_set(toy_image, PerturbationSpec("contrast", 0.4))
    box = concretize(inset)
    lo, hi = sample_outputs(toy_bundle, inset, 200, 0)
    for bounds in (ibp_forward(toy_bundle, box)[-1], backsubstitute(toy_bundle, box)):
        assert np.all(lo >= bounds.lo - 1e-9)
        assert np.all(hi <= bounds.hi + 1e-9)


def test_sample_outputs_deterministic(toy_bundle, toy_image):
    inset = build_input_set(toy_image, PerturbationSpec("brightness", 0.2))
    a = sample_outputs(toy_bundle, inset, 64, seed=5)
    b = sample_outputs(toy_bundle, inset, 64, seed=5)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def _query(toy_bundle, toy_image, toy_gt, kind, eps):
    return VerificationQuery(
        model=toy_bundle, image=toy_image, ground_truth=toy_gt, tau_iou=0.5,
        tau_class=0.15, perturbation=PerturbationSpec(kind, eps),
        max_depth=12, timeout=60.0,
    )


def test_falsify_zero_epsilon_none(toy_bundle, toy_image, toy_gt):
    assert falsify(_query(toy_bundle, toy_image, toy_gt, "brightness", 0.0), 10, 0) is None


def test_falsify_consistent_with_verifier(toy_bundle, toy_image, toy_gt):
    q = _query(toy_bundle, toy_image, toy_gt, "brightness", 0.5)
    verdict = verify(q)
    assert verdict.status == NONROBUST
    cex = falsify(q, 500, 0)
    assert cex is not None
    q_rob = _query(toy_bundle, toy_image, toy_gt, "brightness", 0.05)
    assert verify(q_rob).status == ROBUST
    assert falsify(q_rob, 500, 0) is None


def test_falsify_requires_positive_n(toy_bundle, toy_image, toy_gt):
    with pytest.raises(ValueError):
        falsify(_query(toy_bundle, toy_image, toy_gt, "brightness", 0.1), 0, 0)
