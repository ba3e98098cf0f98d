import numpy as np
import pytest

from detexport.dataset import MIN_SIDE, make_synthetic_dataset, write_dataset


def test_deterministic_under_seed(tmp_path):
    a = make_synthetic_dataset(20, seed=3)
    b = make_synthetic_dataset(20, seed=3)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.image, sb.image)
        assert sa.box == sb.box
    write_dataset(a, tmp_path / "d1")
    write_dataset(b, tmp_path / "d2")
    for name in sorted(p.name for p in (tmp_path / "d1").iterdir()):
        assert (tmp_path / "d1" / name).read_bytes() == (tmp_path / "d2" / name).read_bytes()


def test_different_seeds_differ():
    a = make_synthetic_dataset(5, seed=0)
    b = make_synthetic_dataset(5, seed=1)
    assert any(not np.array_equal(sa.image, sb.image) for sa, sb in zip(a, b))


def test_boxes_meet_minimum_size_and_fit():
    for s in make_synthetic_dataset(100, seed=7, size=20):
        z0, z1, z2, z3 = s.box
        assert z2 - z0 >= MIN_SIDE and z3 - z1 >= MIN_SIDE
        assert 0 <= z0 < z2 <= 20 and 0 <= z1 < z3 <= 20
        assert s.class_id == 0


def test_rectangle_brighter_than_background():
    for s in make_synthetic_dataset(50, seed=11):
        z0, z1, z2, z3 = (int(v) for v in s.box)
        inside = s.image[0, z1:z3, z0:z2]
        outside = np.delete(s.image[0].ravel(), np.arange(s.image[0].size).reshape(
            s.image[0].shape)[z1:z3, z0:z2].ravel())
        assert inside.min() > (outside.max() if outside.size else 0.0)


def test_validation():
    with pytest.raises(ValueError):
        make_synthetic_dataset(0, seed=0)
    with pytest.raises(ValueError):
        make_synthetic_dataset(1, seed=0, size=8)
