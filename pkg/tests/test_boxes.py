import math

import numpy as np
import pytest

from boxcert.boxes import (
    CenterBox, CornerBox, ConstraintRegion, GroundTruth, decode, h_inverse, h_map,
    interval_decode_corners, intersection, iou, offset_interval_to_region, area,
)
from boxcert.intervals import Interval

SIG0 = 0.5  # sigmoid(0)


def test_corner_box_validity():
    with pytest.raises(ValueError):
        CornerBox(0, 0, 0, 1)
    with pytest.raises(ValueError):
        CornerBox(0, 2, 1, 2)


def test_iou_examples():
    b = CornerBox(0, 0, 2, 2)
    assert iou(b, b) == 1.0
    assert iou(b, CornerBox(5, 5, 6, 6)) == 0.0
    # overlap 1, union 4 + 4 - 1
    assert abs(iou(b, CornerBox(1, 1, 3, 3)) - 1 / 7) < 1e-15


def test_iou_symmetry_and_range():
    rng = np.random.default_rng(1)
    for _ in range(300):
        a = rng.uniform(0, 10, 2)
        b = rng.uniform(0, 10, 2)
        box1 = CornerBox(a[0], a[1], a[0] + rng.uniform(0.1, 5), a[1] + rng.uniform(0.1, 5))
        box2 = CornerBox(b[0], b[1], b[0] + rng.uniform(0.1, 5), b[1] + rng.uniform(0.1, 5))
        v = iou(box1, box2)
        assert v == iou(box2, box1)
        assert 0.0 <= v <= 1.0
    assert intersection(box1, box1) == area(box1)


def test_h_map_examples():
    assert h_map(CenterBox(1, 1, 2, 2)) == CornerBox(0, 0, 2, 2)
    assert h_inverse(CornerBox(0, 0, 1, 1)) == CenterBox(0.5, 0.5, 1, 1)


def test_h_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        c = CenterBox(*rng.uniform(1, 50, 2), *rng.uniform(0.5, 20, 2))
        back = h_inverse(h_map(c))
        assert abs(back.cx - c.cx) < 1e-9
        assert abs(back.cy - c.cy) < 1e-9
        assert abs(back.w - c.w) < 1e-9
        assert abs(back.h - c.h) < 1e-9


def test_decode_zero_offsets_ssd_identity():
    prior = (10.0, 12.0, 4.0, 6.0)
    c = decode("ssd", [0, 0, 0, 0], prior, variances=(0.1, 0.2))
    assert (c.cx, c.cy, c.w, c.h) == prior


def test_decode_zero_offsets_yolov2():
    c = decode("yolov2", [0, 0, 0, 0], (0.5, 0.5, 2.0, 3.0), scale=32.0)
    assert abs(c.cx - (SIG0 + 0.5) * 32) < 1e-12
    assert abs(c.cy - 32.0) < 1e-12
    assert abs(c.w - 2 * math.exp(0) * 32) < 1e-12
    assert abs(c.h - 96.0) < 1e-12


def test_decode_zero_offsets_yolov3():
    p = (1.0, 2.0, 1.5, 2.5)
    s = 16.0
    c = decode("yolov3", [0, 0, 0, 0], p, scale=s)
    assert abs(c.cx - (2 * SIG0 - 0.5 + p[0]) * s) < 1e-12
    assert abs(c.cy - (2 * SIG0 - 0.5 + p[1]) * s) < 1e-12
    assert abs(c.w - (2 * SIG0) ** 2 * p[2] * s) < 1e-12
    assert abs(c.h - (2 * SIG0) ** 2 * p[3] * s) < 1e-12


def test_decode_precondition_errors():
    with pytest.raises(ValueError):
        decode("ssd", [0] * 4, (1, 1, 0.0, 1), variances=(0.1, 0.2))
    with pytest.raises(ValueError):
        decode("ssd", [0] * 4, (1, 1, 1, 1), variances=(0.0, 0.2))
    with pytest.raises(ValueError):
        decode("yolov2", [0] * 4, (1, 1, 1, 1), scale=0.0)
    with pytest.raises(ValueError):
        decode("nope", [0] * 4, (1, 1, 1, 1), scale=1.0)


def _random_decoder(rng):
    kind = ("ssd", "yolov2", "yolov3")[int(rng.integers(0, 3))]
    if kind == "ssd":
        anchor = (rng.uniform(5, 50), rng.uniform(5, 50), rng.uniform(2, 20), rng.uniform(2, 20))
        return kind, anchor, None, (0.1, 0.2)
    anchor = (float(rng.integers(0, 4)), float(rng.integers(0, 4)),
              rng.uniform(0.5, 3), rng.uniform(0.5, 3))
    return kind, anchor, float(rng.choice([8.0, 16.0, 32.0])), None


def test_injectivity_fuzz():
    """Componentwise-distinct offsets always decode to distinct boxes."""
    rng = np.random.default_rng(4)
    for _ in range(2000):
        kind, anchor, scale, variances = _random_decoder(rng)
        o1 = rng.normal(0, 2, 4)
        o2 = o1 + rng.choice([-1, 1], 4) * rng.uniform(1e-6, 2, 4)
        c1 = decode(kind, o1, anchor, scale, variances)
        c2 = decode(kind, o2, anchor, scale, variances)
        assert (c1.cx, c1.cy, c1.w, c1.h) != (c2.cx, c2.cy, c2.w, c2.h)


def test_region_point_for_degenerate_offsets():
    rng = np.random.default_rng(5)
    for _ in range(50):
        kind, anchor, scale, variances = _random_decoder(rng)
        o = rng.normal(0, 1, 4)
        bounds = [Interval(v, v) for v in o]
        region = offset_interval_to_region(kind, bounds, anchor, scale, variances)
        box = h_map(decode(kind, o, anchor, scale, variances))
        assert region.sum_x.width == 0 and region.diff_y.width == 0
        assert abs(region.sum_x.lo - (box.z0 + box.z2)) < 1e-9
        assert abs(region.diff_x.lo - (box.z2 - box.z0)) < 1e-9


def test_region_yolov2_width_endpoints():
    bounds = [Interval(0, 0), Interval(0, 0), Interval(-1, 1), Interval(0, 0)]
    region = offset_interval_to_region("yolov2", bounds, (0, 0, 2.0, 1.0), scale=1.0)
    assert abs(region.diff_x.lo - 2 * math.exp(-1)) < 1e-12
    assert abs(region.diff_x.hi - 2 * math.exp(1)) < 1e-12


def test_region_soundness_and_exactness():
    """Sampled decodes satisfy the region; endpoint offsets attain its bounds."""
    rng = np.random.default_rng(6)
    for _ in range(200):
        kind, anchor, scale, variances = _random_decoder(rng)
        centers = rng.normal(0, 1, 4)
        widths = rng.uniform(0, 2, 4)
        bounds = [Interval(c - w / 2, c + w / 2) for c, w in zip(centers, widths)]
        region = offset_interval_to_region(kind, bounds, anchor, scale, variances)
        for _ in range(50):
            o = [rng.uniform(b.lo, b.hi) for b in bounds]
            box = h_map(decode(kind, o, anchor, scale, variances))
            assert region.contains(box, slack=1e-9)
        lo_box = h_map(decode(kind, [b.lo for b in bounds], anchor, scale, variances))
        hi_box = h_map(decode(kind, [b.hi for b in bounds], anchor, scale, variances))
        assert abs((lo_box.z0 + lo_box.z2) - region.sum_x.lo) < 1e-9
        assert abs((hi_box.z2 - hi_box.z0) - region.diff_x.hi) < 1e-9


def test_region_widening_is_monotone():
    anchor = (0.0, 0.0, 2.0, 2.0)
    narrow = offset_interval_to_region("yolov2", [Interval(-0.5, 0.5)] * 4, anchor, scale=8.0)
    wide = offset_interval_to_region("yolov2", [Interval(-1.0, 1.0)] * 4, anchor, scale=8.0)
    for attr in ("sum_x", "sum_y", "diff_x", "diff_y"):
        n, w = getattr(narrow, attr), getattr(wide, attr)
        assert w.lo <= n.lo and w.hi >= n.hi


def test_interval_decode_contains_region_corners():
    rng = np.random.default_rng(7)
    for _ in range(100):
        kind, anchor, scale, variances = _random_decoder(rng)
        bounds = [Interval(c - w / 2, c + w / 2)
                  for c, w in zip(rng.normal(0, 1, 4), rng.uniform(0, 1.5, 4))]
        z = interval_decode_corners(kind, bounds, anchor, scale, variances)
        for _ in range(20):
            o = [rng.uniform(b.lo, b.hi) for b in bounds]
            box = h_map(decode(kind, o, anchor, scale, variances))
            for zi, v in zip(z, box.as_tuple()):
                assert zi.contains(v, 1e-9)


def test_ground_truth_requires_positive_area():
    with pytest.raises(ValueError):
        GroundTruth(CornerBox(0, 0, 0, 1), 0)


def test_region_requires_positive_diff():
    with pytest.raises(ValueError):
        ConstraintRegion(Interval(0, 1), Interval(0, 1), Interval(0.0, 1), Interval(1, 2))
