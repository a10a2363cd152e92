import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poincare_gap.errors import NonPositiveValue, OutsideDomain, WeightError, WrongConcavityClass
from poincare_gap.weights import (Weight, load_weight, require_log_concave, require_power_concave, save_weight,
                                  weight_eval)


def test_examples():
    assert weight_eval(Weight.constant(), (0.3, -7.0)) == 1.0
    assert weight_eval(Weight.affine_power((0, 1, 0), 1.0, m=1), 0.25) == 0.25
    assert weight_eval(Weight.gaussian_y(2.0), (0.0, 0.5)) == pytest.approx(2 * math.exp(-1), rel=1e-15)


def test_domain_errors():
    w = Weight.affine_power((0, 1, 0), 1.0)
    with pytest.raises(OutsideDomain):
        weight_eval(w, -0.1)
    with pytest.raises(NonPositiveValue):
        weight_eval(w, 0.0)
    boxed = Weight.affine_power((1, 0.5, 0), 1.0, box=((0, 1), (0, 1)))
    with pytest.raises(OutsideDomain):
        weight_eval(boxed, (1.5, 0.5))
    with pytest.raises(OutsideDomain):
        weight_eval(w, (1.0, 2.0, 3.0))
    with pytest.raises(NonPositiveValue):
        Weight.constant(0.0)
    with pytest.raises(WeightError):
        Weight("spline")


def test_concavity_classes():
    assert Weight.constant().concavity.m == 0
    assert Weight.affine_power((0, 1, 0), 2.0).concavity.m == 2
    prod = Weight.product(Weight.affine_power((0, 1, 0), 1.0), Weight.affine_power((1, 0, 1), 2.0))
    assert prod.concavity.is_power_concave() and prod.concavity.m == 3
    mixed = Weight.product(Weight.affine_power((0, 1, 0), 1.0), Weight.gaussian_y(3.0))
    assert mixed.concavity.kind == "log_concave"
    require_log_concave(mixed)
    with pytest.raises(WrongConcavityClass):
        require_power_concave(mixed)
    with pytest.raises(WrongConcavityClass):
        require_power_concave(prod, 2)
    with pytest.raises(WrongConcavityClass):
        Weight.affine_power((0, 1, 0), 2.0, m=1.0)


@settings(max_examples=60, deadline=None)
@given(c0=st.floats(0.5, 3), cx=st.floats(-0.4, 0.4), cy=st.floats(-0.4, 0.4), e=st.floats(0, 3),
       n=st.floats(0.1, 5), x=st.floats(-1, 1), y=st.floats(-1, 1))
def test_product_is_product_of_factors(c0, cx, cy, e, n, x, y):
    f = Weight.affine_power((c0, cx, cy), e)
    g = Weight.gaussian_y(n)
    prod = Weight.product(f, g)
    assert weight_eval(prod, (x, y)) == pytest.approx(weight_eval(f, (x, y)) * weight_eval(g, (x, y)), rel=1e-14)


def test_gradient_matches_finite_differences():
    w = Weight.product(Weight.affine_power((1.0, 0.3, -0.2), 1.7), Weight.gaussian_y(1.3))
    pts = np.array([[0.2, 0.1], [-0.4, 0.5], [0.7, -0.3]])
    h = 1e-6
    for pt in pts:
        fd = [(w(pt + h * e) - w(pt - h * e)) / (2 * h) for e in np.eye(2)]
        assert np.allclose(w.gradient(pt), fd, rtol=1e-7, atol=1e-9)


def test_scalar_1d_matches_vectorised():
    w = Weight.product(Weight.affine_power((0.5, 1.0, 0.0), 2.0), Weight.constant(3.0))
    xs = np.linspace(0, 1, 11)
    fn = w.scalar_1d()
    assert np.allclose([fn(x) for x in xs], w.on_line(xs), rtol=1e-15)


def test_json_roundtrip(tmp_path):
    w = Weight.product(Weight.affine_power((1, 2, 3), 0.5, m=1.0, box=((0, 1), (0, 2))), Weight.gaussian_y(4))
    path = tmp_path / "w.json"
    save_weight(w, path)
    data = json.loads(path.read_text())
    assert data["kind"] == "product"
    assert load_weight(path) == w
