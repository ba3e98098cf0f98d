import numpy as np
import pytest

from boxcert.intervals import Interval
from boxcert.perturbations import (
    PerturbationSpec, bisect, blur_image, build_input_set, concretize, line_kernel,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec("gamma", 0.1)
    with pytest.raises(ValueError):
        PerturbationSpec("brightness", -0.1)
    with pytest.raises(ValueError):
        PerturbationSpec("motionblur", 0.1, angle_deg=30)
    with pytest.raises(ValueError):
        PerturbationSpec("motionblur", 0.1, kernel_size=4)
    PerturbationSpec("motionblur", 0.1, angle_deg=135, kernel_size=5)


def test_rejects_out_of_range_pixels():
    img = np.full((1, 4, 4), 1.2)
    with pytest.raises(ValueError):
        build_input_set(img, PerturbationSpec("brightness", 0.1))


def test_zero_epsilon_is_degenerate():
    img = np.random.default_rng(0).uniform(0, 1, (1, 4, 4))
    for kind in ("brightness", "contrast", "motionblur"):
        s = build_input_set(img, PerturbationSpec(kind, 0.0))
        assert s.t_interval.width == 0.0
        box = concretize(s)
        assert np.array_equal(box.lo, box.hi)
        assert np.array_equal(box.lo_nd(), img)


def test_brightness_bounds():
    img = np.random.default_rng(1).uniform(0.2, 0.8, (1, 3, 3))
    s = build_input_set(img, PerturbationSpec("brightness", 0.1))
    assert s.t_interval == Interval(-0.1, 0.1)
    box = concretize(s)
    assert np.allclose(box.lo_nd(), img - 0.1)
    assert np.allclose(box.hi_nd(), img + 0.1)


def test_contrast_direction_and_full_budget():
    img = np.random.default_rng(2).uniform(0, 1, (1, 3, 3))
    s = build_input_set(img, PerturbationSpec("contrast", 1.0))
    assert s.t_interval == Interval(0.0, 1.0)
    assert np.allclose(s.direction_image, 0.5 - img)
    assert np.allclose(s.realize(1.0), 0.5)


def test_line_kernel_normalization():
    for angle in (0, 45, 90, 135):
        k = line_kernel(5, angle)
        assert abs(k.sum() - 1.0) < 1e-12
        assert np.count_nonzero(k) == 5


def test_blur_one_hot_reproduces_line():
    img = np.zeros((1, 9, 9))
    img[0, 4, 4] = 1.0
    for angle in (0, 45, 90, 135):
        out = blur_image(img, 5, angle)
        k = line_kernel(5, angle)
        # correlation of a centered one-hot with a symmetric line kernel
        # reproduces the kernel pattern around the center
        assert np.allclose(out[0, 2:7, 2:7], k[::-1, ::-1])
        assert abs(out.sum() - 1.0) < 1e-12


def test_blur_constant_image_interior_preserved():
    img = np.full((1, 10, 10), 0.37)
    out = blur_image(img, 5, 0)
    assert np.allclose(out[0, :, 2:8], 0.37)  # zero padding dims only the borders
    s = build_input_set(img, PerturbationSpec("motionblur", 1.0, angle_deg=0))
    assert np.allclose(s.direction_image[0, :, 2:8], 0.0)


def test_concretize_affine_endpoints():
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 1, (1, 4, 4))
    s = build_input_set(img, PerturbationSpec("contrast", 0.6))
    box = concretize(s)
    a = 0.0 * s.direction_image
    b = 0.6 * s.direction_image
    assert np.allclose(box.lo_nd(), img + np.minimum(a, b))
    assert np.allclose(box.hi_nd(), img + np.maximum(a, b))


def test_bisect_halves_and_coverage():
    img = np.random.default_rng(4).uniform(0, 1, (1, 3, 3))
    s = build_input_set(img, PerturbationSpec("contrast", 1.0))
    lo, hi = bisect(s)
    assert lo.t_interval == Interval(0.0, 0.5)
    assert hi.t_interval == Interval(0.5, 1.0)
    q = [bisect(lo), bisect(hi)]
    quarters = [x.t_interval for pair in q for x in pair]
    assert quarters[0].lo == 0.0 and quarters[-1].hi == 1.0
    rng = np.random.default_rng(5)
    for _ in range(100):
        t = rng.uniform(0, 1)
        inside = lo if t <= 0.5 else hi
        assert inside.t_interval.contains(t)
        assert np.allclose(inside.realize(t), s.realize(t))


def test_bisect_containment():
    img = np.random.default_rng(6).uniform(0, 1, (2, 4, 4))
    s = build_input_set(img, PerturbationSpec("brightness", 0.4))
    parent = concretize(s)
    for half in bisect(s):
        child = concretize(half)
        assert np.all(child.lo >= parent.lo - 1e-12)
        assert np.all(child.hi <= parent.hi + 1e-12)


def test_bisect_degenerate_raises():
    img = np.zeros((1, 2, 2))
    s = build_input_set(img, PerturbationSpec("brightness", 0.0))
    with pytest.raises(ValueError):
        bisect(s)
