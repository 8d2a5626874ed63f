import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tv4.grid import GridError, as_field, as_image, group_l21_norm, inner_product, pixel_norm

finite = st.floats(-1e3, 1e3, allow_nan=False)
# squares of magnitudes below ~1e-154 underflow; image data never gets there
nonzero_scale = st.one_of(st.just(0.0), st.floats(1e-6, 1e3), st.floats(-1e3, -1e-6))


def test_inner_product_examples(x22, rng):
    assert inner_product(x22, np.ones((2, 2))) == 10.0
    assert inner_product(np.zeros((4, 3, 3)), rng.standard_normal((4, 3, 3))) == 0.0
    u = rng.standard_normal((4, 5, 6))
    assert inner_product(u, u) == pytest.approx(np.sum(u**2))


def test_inner_product_shape_mismatch():
    with pytest.raises(GridError):
        inner_product(np.zeros((2, 2)), np.zeros((2, 3)))


def test_group_l21_examples():
    assert group_l21_norm(np.zeros((4, 3, 3))) == 0.0
    v = np.zeros((4, 3, 3))
    v[:2, 1, 2] = (3.0, 4.0)
    assert group_l21_norm(v) == 5.0
    assert group_l21_norm(np.ones((4, 2, 2))) == 8.0


def test_group_l21_rejects_nonfinite():
    v = np.zeros((4, 2, 2))
    v[0, 0, 0] = np.nan
    with pytest.raises(GridError):
        group_l21_norm(v)


@pytest.mark.parametrize("bad", [np.zeros((1, 4)), np.zeros((4, 1)), np.zeros(4), np.zeros((2, 2, 2))])
def test_as_image_rejects_bad_shapes(bad):
    with pytest.raises(GridError):
        as_image(bad)


def test_as_image_rejects_nan():
    with pytest.raises(GridError):
        as_image(np.array([[0.0, np.inf], [0, 0]]))


def test_as_field_channel_and_grid_checks():
    with pytest.raises(GridError):
        as_field(np.zeros((3, 2, 2)), 4)
    with pytest.raises(GridError):
        as_field(np.zeros((4, 2, 2)), 4, shape=(2, 3))
    assert as_field(np.zeros((2, 2, 3), dtype=int), 2).dtype == np.float64


@given(arrays(np.float64, (4, 3, 3), elements=finite), arrays(np.float64, (4, 3, 3), elements=finite),
       arrays(np.float64, (4, 3, 3), elements=finite), finite, finite)
def test_inner_product_bilinear_symmetric(a, b, c, s, t):
    assert inner_product(a, b) == pytest.approx(inner_product(b, a), rel=1e-12, abs=1e-9)
    lhs = inner_product(s * a + t * c, b)
    rhs = s * inner_product(a, b) + t * inner_product(c, b)
    scale = (abs(s) * np.abs(a).sum() + abs(t) * np.abs(c).sum() + 1) * (np.abs(b).max() + 1)
    assert abs(lhs - rhs) <= 1e-12 * scale


@given(arrays(np.float64, (4, 3, 2), elements=finite), finite)
def test_group_l21_homogeneous(v, c):
    assert group_l21_norm(c * v) == pytest.approx(abs(c) * group_l21_norm(v), rel=1e-12, abs=1e-12)


@given(arrays(np.float64, (4, 2, 3), elements=nonzero_scale))
def test_group_l21_zero_iff_zero(v):
    assert (group_l21_norm(v) == 0.0) == (not np.any(v))


def test_pixel_norm_shape(rng):
    assert pixel_norm(rng.standard_normal((4, 5, 7))).shape == (5, 7)
