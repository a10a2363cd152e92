import math

import numpy as np
import pytest

from poincare_gap.errors import MeshBudgetExceeded
from poincare_gap.geometry import random_convex_polygon, rectangle, regular_polygon
from poincare_gap.mesh import MIN_ANGLE, effective_h, refine_uniform, triangulate


def test_unit_square_quality():
    m = triangulate(rectangle(1.0, 1.0), 0.1)
    assert m.angles().min() >= MIN_ANGLE - 1e-9
    assert m.h_max <= 0.1 * 1.5
    assert m.areas().sum() == pytest.approx(1.0, rel=1e-12)
    assert np.all(m.areas() > 0)


def test_thin_rectangle_resolves_width():
    poly = rectangle(1.0, 0.01)
    assert effective_h(poly, 0.05) <= 0.0025 + 1e-15
    m = triangulate(poly, 0.05)
    assert m.h_max <= 0.0025 * 1.5
    assert m.areas().sum() == pytest.approx(0.01, rel=1e-12)


def test_boundary_nodes_lie_on_edges():
    poly = random_convex_polygon(4, 7)
    m = triangulate(poly, 0.05)
    normals, offsets = poly.edges()
    gap = (m.nodes[m.boundary] @ normals.T - offsets).max(axis=1)
    assert np.all(np.abs(gap) < 1e-12)


def test_budget():
    with pytest.raises(MeshBudgetExceeded):
        triangulate(rectangle(1.0, 1.0), 1e-3, max_nodes=10_000)
    m = triangulate(rectangle(1.0, 1.0), 0.1)
    with pytest.raises(MeshBudgetExceeded):
        refine_uniform(m, max_nodes=m.n_nodes + 1)


def test_bad_h():
    with pytest.raises(ValueError):
        triangulate(rectangle(1.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        triangulate(rectangle(1.0, 1.0), 2.0)


def test_refine_uniform_is_nested():
    m = triangulate(regular_polygon(12, 0.5), 0.2)
    f = refine_uniform(m)
    assert f.n_triangles == 4 * m.n_triangles
    assert np.array_equal(f.nodes[: m.n_nodes], m.nodes)
    assert f.areas().sum() == pytest.approx(m.areas().sum(), rel=1e-12)
    # red refinement keeps the angle set
    assert f.angles().min() == pytest.approx(m.angles().min(), rel=1e-9)
    assert f.h_max == pytest.approx(m.h_max / 2, rel=1e-12)
    assert f.boundary.sum() == 2 * m.boundary.sum()


def test_graded_mesh():
    poly = rectangle(1.0, 1.0)
    m = triangulate(poly, 0.2, size_fn=lambda c: np.where(c[:, 0] < 0.5, 0.05, 0.2))
    cent = m.nodes[m.triangles].mean(axis=1)
    left = m.areas()[cent[:, 0] < 0.4]
    right = m.areas()[cent[:, 0] > 0.6]
    assert left.max() <= math.sqrt(3) / 4 * 0.05**2 * 1.0001
    assert right.mean() > 4 * left.mean()
