import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from poincare_gap.errors import Degenerate, NonConvex, SolverDidNotConverge, TooFewVertices
from poincare_gap.geometry import (clip_band, depth, diameter, john_ellipse, load_polygon, polygon_validate,
                                   random_convex_polygon, rectangle, regular_polygon, save_polygon, width)

SQRT3 = math.sqrt(3.0)
TRIANGLE = [[0.0, 0.0], [1.0, 0.0], [0.5, SQRT3 / 2]]


def hexagon(side=1.0):
    return regular_polygon(6, side)


# -- validation -----------------------------------------------------------------
def test_clockwise_square_is_reoriented():
    poly = polygon_validate([[0, 0], [0, 1], [1, 1], [1, 0]])
    v = poly.vertices
    signed = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    assert signed == pytest.approx(1.0)
    assert {tuple(p) for p in v.tolist()} == {(0, 0), (0, 1), (1, 1), (1, 0)}


def test_collinear_points_are_degenerate():
    with pytest.raises(Degenerate):
        polygon_validate([[0, 0], [1, 1], [2, 2]])


def test_hexagon_accepted():
    pts = [[math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)] for k in range(6)]
    assert polygon_validate(pts).n == 6


def test_nonconvex_and_too_few():
    with pytest.raises(NonConvex):
        polygon_validate([[0, 0], [2, 0], [1, 0.3], [2, 2], [0, 2]])
    with pytest.raises(TooFewVertices):
        polygon_validate([[0, 0], [1, 0]])
    with pytest.raises(Degenerate):
        polygon_validate([[0, 0], [1, 0], [1, 0], [0, 1]])


def test_thin_rectangle_validates():
    poly = rectangle(1.0, 1e-4)
    assert poly.area == pytest.approx(1e-4)


def test_polygon_is_immutable():
    poly = rectangle(1.0, 1.0)
    with pytest.raises(ValueError):
        poly.vertices[0, 0] = 5.0


# -- diameter / width / depth ----------------------------------------------------------
def test_diameter_examples():
    assert diameter(rectangle(1, 1)) == pytest.approx(math.sqrt(2), rel=1e-15)
    for eps in (0.1, 0.01, 1e-4):
        assert diameter(rectangle(1, eps)) == pytest.approx(math.sqrt(1 + eps**2), rel=1e-15)
    hexv = hexagon(1.0).vertices
    brute = max(np.linalg.norm(a - b) for a in hexv for b in hexv)
    assert diameter(hexagon(1.0)) == pytest.approx(brute, rel=1e-14)
    assert brute == pytest.approx(2.0, rel=1e-14)


def _width_brute(poly, n=200_000):
    th = np.linspace(0, np.pi, n, endpoint=False)
    dirs = np.column_stack([np.cos(th), np.sin(th)])
    proj = poly.vertices @ dirs.T
    return float((proj.max(0) - proj.min(0)).min())


def test_width_examples():
    assert width(rectangle(1, 1)) == pytest.approx(1.0, rel=1e-14)
    assert width(rectangle(1, 0.01)) == pytest.approx(0.01, rel=1e-12)
    tri = polygon_validate(TRIANGLE)
    assert width(tri) == pytest.approx(SQRT3 / 2, rel=1e-14)
    assert width(tri) == pytest.approx(_width_brute(tri), rel=1e-9)


def test_depth_of_rectangle_and_disk():
    # the diameter is the diagonal; the central chord orthogonal to it has length eps*sqrt(1+eps^2)
    assert depth(rectangle(1, 0.1)) == pytest.approx(0.1 * math.sqrt(1.01), rel=1e-12)
    disk = regular_polygon(128, 1.0)
    assert depth(disk) == pytest.approx(2.0, rel=1e-3)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(3, 15), s=st.floats(0.1, 10.0),
       th=st.floats(0, 2 * math.pi), tx=st.floats(-5, 5), ty=st.floats(-5, 5))
def test_diameter_similarity_and_width_bound(seed, k, s, th, tx, ty):
    poly = random_convex_polygon(seed, k)
    R = s * np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    img = poly.transformed(R, (tx, ty))
    assert diameter(img) == pytest.approx(s * diameter(poly), rel=1e-12)
    assert width(img) <= diameter(img) * (1 + 1e-12)
    assert width(img) == pytest.approx(s * width(poly), rel=1e-10)


# -- random polygons -------------------------------------------------------------------
def test_random_polygon_contract():
    a = random_convex_polygon(123, 8)
    b = random_convex_polygon(123, 8)
    assert np.array_equal(a.vertices, b.vertices)
    for seed in range(30):
        poly = random_convex_polygon(seed, 3 + seed % 10)
        assert abs(diameter(poly) - 1.0) < 1e-12
        polygon_validate(poly.vertices)


def test_random_polygon_rejects_small_n():
    with pytest.raises(TooFewVertices):
        random_convex_polygon(0, 2)


# -- John ellipse ---------------------------------------------------------------------
def test_john_square_is_unit_disk():
    e = john_ellipse(polygon_validate([[-1, -1], [1, -1], [1, 1], [-1, 1]]))
    assert np.allclose(e.center, 0.0, atol=1e-10)
    assert e.a1 == pytest.approx(1.0, rel=1e-9)
    assert e.a2 == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("eps", [0.1, 1e-2, 1e-4])
def test_john_rectangle(eps):
    e = john_ellipse(rectangle(1.0, eps))
    assert e.a1 == pytest.approx(0.5, rel=1e-9)
    assert e.a2 == pytest.approx(eps / 2, rel=1e-9)
    assert abs(math.sin(e.rotation)) < 1e-6


def _john_oracle(poly):
    """Independent SLSQP maximisation of log(a b) over (cx, cy, a, b, theta)."""
    normals, offsets = poly.edges()

    def cons(z):
        cx, cy, a, b, th = z
        R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        B = R @ np.diag([a, b]) @ R.T
        return offsets - normals @ np.array([cx, cy]) - np.linalg.norm(normals @ B, axis=1)

    c = poly.centroid
    best = None
    for th0 in (0.0, 0.7, 1.4):
        r = minimize(lambda z: -math.log(z[2] * z[3]), [c[0], c[1], 0.1, 0.1, th0], method="SLSQP",
                     constraints=[{"type": "ineq", "fun": cons}], bounds=[(None, None)] * 2 + [(1e-6, 2)] * 2
                     + [(None, None)], options={"ftol": 1e-14, "maxiter": 500})
        if best is None or r.fun < best.fun:
            best = r
    return best.x


def test_john_equilateral_triangle_is_incircle():
    tri = polygon_validate(TRIANGLE)
    e = john_ellipse(tri)
    r_in = SQRT3 / 6
    assert e.a1 == pytest.approx(r_in, rel=1e-8)
    assert e.a2 == pytest.approx(r_in, rel=1e-8)
    assert np.allclose(e.center, tri.centroid, atol=1e-9)
    z = _john_oracle(tri)
    assert z[2] * z[3] == pytest.approx(e.a1 * e.a2, rel=1e-5)


def test_john_matches_oracle_on_random_polygons():
    for seed in (3, 17, 29):
        poly = random_convex_polygon(seed, 7)
        e = john_ellipse(poly)
        z = _john_oracle(poly)
        assert e.a1 * e.a2 == pytest.approx(z[2] * z[3], rel=1e-5)


@pytest.mark.parametrize("seed", list(range(7000, 7060)))
def test_john_containment_and_comparability(seed):
    poly = random_convex_polygon(seed, 3 + seed % 10)
    e = john_ellipse(poly)
    inner, outer = e.containment(poly, 360)
    assert inner <= 1e-6 and outer <= 1e-6
    assert e.a1 >= e.a2 > 0
    assert 2 * e.a2 <= width(poly) * (1 + 1e-6) <= diameter(poly) * (1 + 1e-6)
    assert width(poly) <= 2 * (2 * e.a2) * (1 + 1e-6)


def test_john_budget_error():
    with pytest.raises(SolverDidNotConverge):
        john_ellipse(random_convex_polygon(1, 9), max_newton=2)


# -- clipping and files ---------------------------------------------------------------
def test_clip_band():
    disk = regular_polygon(64, 1.0)
    band = clip_band(disk, 0.25)
    assert band.vertices[:, 1].max() == pytest.approx(0.25)
    assert diameter(band) == pytest.approx(2.0, rel=1e-12)


def test_polygon_roundtrip(tmp_path):
    poly = random_convex_polygon(5, 6)
    path = tmp_path / "p.json"
    save_polygon(poly, path)
    assert "vertices" in json.loads(path.read_text())
    again = load_polygon(path)
    assert np.allclose(again.vertices, poly.vertices, atol=0, rtol=0)
