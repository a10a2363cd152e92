import math

import numpy as np
import pytest
from scipy.special import jn_zeros

from poincare_gap import constants as C
from poincare_gap.errors import IntervalTooShort, InvalidExponent, NonIntegrable, WrongConcavityClass
from poincare_gap.onedim import (bessel_radial_neumann, mu_p_1d_rayleigh, mu_p_1d_shoot, refined_lower_bound,
                                 spectrum_1d_p2)
from poincare_gap.weights import Weight

ONE = Weight.constant()
X1 = Weight.affine_power((0.0, 1.0, 0.0), 1.0)
J11_SQ = float(jn_zeros(1, 1)[0]) ** 2  # f(x) = x on (0, 1)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_constant_weight_is_pi_p(p):
    r = mu_p_1d_shoot(p, 1.0, ONE)
    assert r.mu == pytest.approx(C.pi_p_pow(p), rel=1e-8)
    assert r.z == pytest.approx(0.5, abs=1e-6)
    assert r.residual < 1e-5  # Simpson quadrature of phi_p(u), not the solver tolerance


def test_scaling_in_d():
    assert mu_p_1d_shoot(2.0, 0.5, ONE).mu == pytest.approx(4 * math.pi**2, rel=1e-8)


def test_linear_weight_is_bessel():
    r = mu_p_1d_shoot(2.0, 1.0, X1)
    assert r.mu == pytest.approx(J11_SQ, rel=1e-8)
    assert r.mu == pytest.approx(mu_p_1d_rayleigh(2.0, 1.0, X1, n=4096), rel=5e-3)


def test_reflected_weight_matches_mirror():
    left = mu_p_1d_shoot(3.0, 1.0, Weight.affine_power((0.0, 1.0, 0.0), 2.0))
    right = mu_p_1d_shoot(3.0, 1.0, Weight.affine_power((1.0, -1.0, 0.0), 2.0))
    assert "reflected" in right.flags
    assert right.mu == pytest.approx(left.mu, rel=1e-9)
    assert right.z == pytest.approx(1 - left.z, abs=1e-6)


def test_rayleigh_examples():
    assert mu_p_1d_rayleigh(2.0, 1.0, ONE, n=1024) == pytest.approx(math.pi**2, rel=1e-4)
    assert mu_p_1d_rayleigh(3.0, 1.0, ONE, n=1024) == pytest.approx(C.pi_p_pow(3.0), rel=1e-3)


@pytest.mark.parametrize("p,w", [(1.5, X1), (3.0, Weight.affine_power((0.3, 1.0, 0.0), 1.5)),
                                 (2.5, Weight.product(X1, Weight.affine_power((1.0, -1.0, 0.0), 1.0)))])
def test_oracle_agreement(p, w):
    a = mu_p_1d_shoot(p, 1.0, w).mu
    b = mu_p_1d_rayleigh(p, 1.0, w, n=4096)
    assert abs(a - b) / a <= 5e-3


def test_monotone_in_d():
    vals = [mu_p_1d_shoot(3.0, d, ONE).mu for d in (0.4, 0.6, 0.8, 1.0, 1.3)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("p,w", [(2.0, X1), (3.0, X1), (1.5, Weight.affine_power((0.2, 1.0, 0.0), 2.0)),
                                 (2.0, Weight.affine_power((1.0, -0.5, 0.0), 3.0))])
def test_payne_weinberger_floor_and_single_zero(p, w):
    r = mu_p_1d_shoot(p, 1.0, w)
    assert r.mu >= C.pi_p_pow(p) - 1e-8
    signs = np.sign(r.profile[np.abs(r.profile) > 1e-9])
    assert np.count_nonzero(np.diff(signs)) == 1


def test_shoot_errors():
    with pytest.raises(InvalidExponent):
        mu_p_1d_shoot(1.0, 1.0, ONE)
    with pytest.raises(InvalidExponent):
        mu_p_1d_rayleigh(0.5, 1.0, ONE, n=64)
    # x - 1/2 changes sign inside the interval
    with pytest.raises(NonIntegrable):
        mu_p_1d_shoot(2.0, 1.0, Weight.affine_power((-0.5, 1.0, 0.0), 1.0))
    with pytest.raises(WrongConcavityClass):
        mu_p_1d_shoot(2.0, 1.0, Weight.product(ONE, _NotLogConcave()))


class _NotLogConcave(Weight):
    def __init__(self):
        super().__init__("constant", value=1.0)

    @property
    def concavity(self):
        from poincare_gap.weights import ConcavityClass
        return ConcavityClass("none")


def test_refined_bound_constant_h():
    rb = refined_lower_bound(2.0, 1, 1.0, ONE, ONE)
    assert rb.excess.is_zero()
    assert rb.total.value == pytest.approx(math.pi**2, rel=1e-14)


def test_refined_bound_linear_h():
    rb = refined_lower_bound(2.0, 1, 1.0, X1, ONE)
    k3 = C.k3(2.0, 1)
    q = (1 / (1 - k3)) ** 2
    expected = C.k1(2.0, 1) * (2.0 / 3.0) * q
    assert float(rb.excess.ln) == pytest.approx(float(expected.ln), rel=1e-15)
    assert rb.min_log_derivative_sq == pytest.approx(q, rel=1e-12)
    assert rb.total.value <= mu_p_1d_shoot(2.0, 1.0, X1).mu


def test_refined_bound_preconditions():
    with pytest.raises(IntervalTooShort):
        refined_lower_bound(2.0, 1, 0.5 * C.d_p(2.0), ONE, ONE)
    with pytest.raises(ValueError):
        refined_lower_bound(2.0, 1, 1.5, ONE, ONE)
    with pytest.raises(WrongConcavityClass):
        refined_lower_bound(2.0, 1, 1.0, Weight.affine_power((0, 1, 0), 2.0), ONE)


def test_radial_bessel_oracle():
    from scipy.special import jnp_zeros
    assert bessel_radial_neumann(1, 1.0) == pytest.approx(float(jnp_zeros(1, 1)[0]) ** 2, rel=1e-10)
    assert bessel_radial_neumann(0, 1.0) == pytest.approx(float(jn_zeros(1, 1)[0]) ** 2, rel=1e-10)


def test_spectrum_1d():
    vals = spectrum_1d_p2(1.0, ONE, k=3)
    assert np.allclose(vals, [math.pi**2 * k * k for k in (1, 2, 3)], rtol=1e-6)
    assert np.allclose(spectrum_1d_p2(1.0, X1, k=2), np.array(jn_zeros(1, 2)) ** 2, rtol=1e-6)


def test_eig1d_json():
    d = mu_p_1d_shoot(2.0, 1.0, ONE).to_json()
    assert set(d) >= {"mu", "z", "residual", "boundary_defect", "orthogonality", "grid", "profile"}
