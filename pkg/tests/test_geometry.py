import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trimap.geometry import (WHOLE_TRIANGLE, Rectangle, branch_image, graded_slabs, integrate_polygon, polygon_area,
                             rectangle_suite, y_range)
from trimap.map_core import TrianglePoint, classify_digit


def test_whole_triangle_polygon():
    poly = WHOLE_TRIANGLE.polygon()
    assert polygon_area(poly) == pytest.approx(0.5)


def test_rectangle_outside_triangle_is_empty():
    assert Rectangle(0.1, 0.2, 0.5, 0.9).polygon() == []


def test_rectangle_rejects_reversed_corners():
    with pytest.raises(ValueError):
        Rectangle(0.5, 0.4, 0.1, 0.2)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_clipped_area_matches_formula(a, b, c, d):
    x0, x1 = sorted((a, b))
    y0, y1 = sorted((c, d))
    poly = Rectangle(x0, x1, y0, y1).polygon()
    # area of {x0<x<x1, y0<y<min(y1,x)} by direct integration of the clipped height
    xs = np.linspace(x0, x1, 20001)
    h = np.clip(np.minimum(y1, xs) - y0, 0, None)
    ref = np.trapezoid(h, xs)
    assert polygon_area(poly) == pytest.approx(ref, abs=1e-7)


def test_polygon_quadrature_exact_for_polynomials():
    poly = Rectangle(0.2, 0.9, 0.1, 0.6).polygon()
    # int x^2 y over {0.2<x<0.9, 0.1<y<min(0.6,x)}
    from scipy import integrate
    ref, _ = integrate.dblquad(lambda y, x: x * x * y, 0.2, 0.9, lambda x: 0.1, lambda x: min(0.6, x),
                               epsabs=1e-14)
    assert integrate_polygon(lambda x, y: x * x * y, poly, 8) == pytest.approx(ref, abs=1e-13)


def test_graded_slabs_partition_area():
    poly = Rectangle(0.01, 1.0, 0.0, 1.0).polygon()
    pieces = graded_slabs(poly)
    assert len(pieces) > 5
    assert sum(polygon_area(p) for p in pieces) == pytest.approx(polygon_area(poly), abs=1e-15)


@pytest.mark.parametrize("k", [0, 1, 4, 25])
def test_branch_image_lands_in_cell(k):
    poly = Rectangle(0.3, 0.8, 0.1, 0.5).polygon()
    img = branch_image(k, poly)
    assert polygon_area(img) > 0  # counterclockwise in, counterclockwise out
    cx = np.mean([v[0] for v in img])
    cy = np.mean([v[1] for v in img])
    assert classify_digit(TrianglePoint(cx, cy)) == k


def test_y_range():
    poly = Rectangle(0.2, 0.9, 0.1, 0.6).polygon()
    assert y_range(poly, 0.4) == pytest.approx((0.1, 0.4))
    assert y_range(poly, 0.8) == pytest.approx((0.1, 0.6))
    assert y_range(poly, 0.95) is None


def test_rectangle_suite_is_fixed():
    a, b = rectangle_suite(), rectangle_suite()
    assert a == b and len(a) == 20
    assert all(r.x0 >= 0.05 and polygon_area(r.polygon()) > 1e-3 for r in a)
