import math

import numpy as np
import pytest

from poincare_gap.errors import InvalidExponent, WrongConcavityClass
from poincare_gap.fem import (linf_bound_check, mu_2_fem, mu_p_fem, p2_spectrum, richardson, solve_richardson,
                              verify_quantitative, weighted_mean_shift)
from poincare_gap.geometry import rectangle, regular_polygon
from poincare_gap.mesh import triangulate
from poincare_gap.onedim import mu_p_1d_shoot
from poincare_gap.weights import Weight

ONE = Weight.constant()
PI2 = math.pi**2


@pytest.fixture(scope="module")
def square_mesh():
    return triangulate(rectangle(1.0, 1.0), 0.05)


def test_square_first_eigenvalue(square_mesh):
    r = mu_2_fem(rectangle(1.0, 1.0), ONE, square_mesh)
    assert r.mu == pytest.approx(PI2, rel=2e-3)
    assert r.residual < 1e-8
    assert abs(r.constraint_residual) < 1e-10
    # pi^2 is double on the square
    assert r.next_mu == pytest.approx(PI2, rel=2e-3)


def test_square_spectrum(square_mesh):
    vals = p2_spectrum(rectangle(1.0, 1.0), ONE, square_mesh, k=3)
    assert np.allclose(vals, [PI2, PI2, 2 * PI2], rtol=5e-3)


def test_thin_rectangle():
    poly = rectangle(1.0, 0.1)
    r = mu_2_fem(poly, ONE, triangulate(poly, 0.05))
    assert r.mu == pytest.approx(PI2, rel=5e-3)


def test_richardson_improves_disk():
    from poincare_gap.onedim import bessel_radial_neumann
    disk = regular_polygon(64, 1.0)
    mu, coarse, fine = solve_richardson(2.0, disk, ONE, 0.1)
    ref = bessel_radial_neumann(1, 1.0)
    assert abs(mu - ref) < abs(fine.mu - ref) < abs(coarse.mu - ref)
    assert richardson(1.0, 1.0) == 1.0
    assert richardson(4.0, 1.0) == pytest.approx(0.0)


def test_p2_descent_matches_eigensolver(square_mesh):
    poly = rectangle(1.0, 1.0)
    m = triangulate(poly, 0.1)
    a = mu_2_fem(poly, ONE, m).mu
    b = mu_p_fem(2.0, poly, ONE, m, restarts=1).mu
    assert b == pytest.approx(a, rel=1e-6)


def test_p3_square_reduces_to_one_dimension():
    # on the square roughly one-dimensional profiles compete with diagonal ones; the FEM
    # minimum can only be below the 1D value up to discretisation error
    poly = rectangle(1.0, 1.0)
    m = triangulate(poly, 0.05)
    r = mu_p_fem(3.0, poly, ONE, m, restarts=2)
    one_d = mu_p_1d_shoot(3.0, 1.0, ONE).mu
    assert r.mu <= one_d * 1.01
    assert r.mu >= mu_p_1d_shoot(3.0, math.sqrt(2), ONE).mu
    assert r.spread >= 0


def test_weighted_mean_shift(square_mesh):
    x, y = square_mesh.nodes.T
    u = x + 0.3 * y**2
    mean = float(np.mean(u))  # rough check only; p = 2 gives the weighted average
    c2 = weighted_mean_shift(u, ONE, 2.0, square_mesh)
    assert c2 == pytest.approx(0.5 + 0.1, abs=5e-3)
    assert abs(c2 - mean) < 0.05
    assert weighted_mean_shift(x - 0.5, ONE, 2.0, square_mesh) == pytest.approx(0.0, abs=1e-12)
    # the discrete root is exact; the continuum value 1/2 is met up to quadrature error
    from poincare_gap.fem import assemble
    R = assemble(square_mesh, ONE).rayleigh
    c3 = weighted_mean_shift(x, ONE, 3.0, square_mesh, prob=None)
    assert abs(R.constraint(x, 3.0, c3)) < 1e-12
    assert c3 == pytest.approx(0.5, abs=1e-5)


def test_square_verify_ratio():
    s = verify_quantitative(2.0, rectangle(1.0, 1.0), ONE, h=0.05, refine=True)
    assert s.ratio == pytest.approx(8 * PI2, rel=1e-2)
    assert s.floor_holds and s.rigidity_holds and s.kroger_holds
    assert s.status == "ok"


def test_verify_rejects_gaussian():
    with pytest.raises(WrongConcavityClass):
        verify_quantitative(2.0, rectangle(1.0, 1.0), Weight.gaussian_y(1.0), h=0.2)


def test_invalid_p(square_mesh):
    with pytest.raises(InvalidExponent):
        mu_p_fem(1.0, rectangle(1.0, 1.0), ONE, square_mesh)


def test_linf_margin(square_mesh):
    poly = rectangle(1.0, 1.0)
    r = mu_2_fem(poly, ONE, square_mesh)
    chk = linf_bound_check(r, poly, ONE, 2.0)
    assert chk["holds"]
    assert chk["margin"] > 10
    assert chk["n_eff"] == 2
    # u is normalised in L^2, so |u|_inf is at least 1 / sqrt(area)
    assert chk["lhs"] >= 1.0


def test_weighted_p2_on_thin_strip():
    # a thin strip along x with weight x reduces to the 1D problem -(x u')' = mu x u
    poly = rectangle(1.0, 0.02)
    w = Weight.affine_power((0.0, 1.0, 0.0), 1.0)
    r = mu_2_fem(poly, w, triangulate(poly, 0.05))
    assert r.mu == pytest.approx(mu_p_1d_shoot(2.0, 1.0, w).mu, rel=1e-2)
