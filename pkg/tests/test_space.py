import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confspace import (
    Bump,
    BumpIntensity,
    ConstantIntensity,
    ExpQuadraticIntensity,
    PolynomialIntensity,
    PreconditionError,
    QuadratureRule,
    Window,
    WindowPolynomial,
    evaluate_jet,
    integrate,
    intensity_mass,
    l2_inner,
    log_derivative,
)
from confspace.errors import QuadratureError, ResourceLimitError
from confspace.space import as_points, composite_nodes_1d, default_rule

# reference values computed with mpmath at 30 digits
BUMP_MASS = 0.133198144850423826417593101341
EXPQUAD_MASS = 0.935433736141802002172022483827
BUMP_NORM2_RHO15 = 0.0598887543802474199842971632772


def test_window_basics():
    w = Window((0.0, 0.0), (2.0, 1.0))
    assert w.dim == 2
    assert w.volume == 2.0
    assert np.allclose(w.center, [1.0, 0.5])
    assert w.contains([[0.5, 0.5], [2.5, 0.5]]).tolist() == [True, False]
    inner = Window((0.5, 0.25), (1.0, 0.75))
    assert w.contains_box(inner)
    assert w.margin_to(inner) == pytest.approx(0.25)
    assert w.intersect(Window((3.0, 0.0), (4.0, 1.0))) is None


def test_window_rejects_degenerate():
    with pytest.raises(PreconditionError):
        Window((1.0,), (1.0,))


def test_as_points_shapes():
    assert as_points(0.3, 1).shape == (1,)
    assert as_points([0.1, 0.2], 1).shape == (2, 1)
    assert as_points([[0.1, 0.2]], 2).shape == (1, 2)


def test_gauss_legendre_exact_for_polynomials():
    x, w = composite_nodes_1d([0.0, 1.0], 8, 2)
    for k in range(16):
        assert w @ x**k == pytest.approx(1 / (k + 1), rel=1e-14)


def test_integrate_adaptive_and_error():
    val, err = integrate(lambda x: np.exp(x[:, 0]), Window.unit(1))
    assert val == pytest.approx(math.e - 1, rel=1e-12)
    assert err < 1e-9
    with pytest.raises(QuadratureError):
        integrate(lambda x: 1.0 / np.sqrt(np.abs(x[:, 0] - 0.3)), Window.unit(1), max_order=32)


def test_quadrature_rule_node_cap():
    with pytest.raises(ResourceLimitError):
        QuadratureRule(64, 8).nodes(Window.unit(3))


def test_default_rules_by_dimension():
    assert default_rule(1).order * default_rule(1).panels >= default_rule(3).order * default_rule(3).panels


def test_intensity_masses():
    w = Window.unit(1)
    assert intensity_mass(ConstantIntensity(2.0), w) == 2.0
    assert intensity_mass(BumpIntensity(1.0, (0.5,), 0.3), w) == pytest.approx(BUMP_MASS, rel=1e-10)
    assert intensity_mass(ExpQuadraticIntensity(2.0, (0.3,), 0.2), w) == pytest.approx(EXPQUAD_MASS, rel=1e-10)
    poly = PolynomialIntensity(w, ((0.0, 1.0),))
    assert intensity_mass(poly, w) == pytest.approx(0.5, rel=1e-12)


def test_polynomial_intensity_must_be_nonnegative():
    with pytest.raises(PreconditionError):
        PolynomialIntensity(Window.unit(1), ((-0.5, 1.0),))


def test_window_polynomial_jet():
    f = WindowPolynomial(Window.unit(1), ((0.0, 1.0, -1.0),))
    value, grad, lap = evaluate_jet(f, 0.5)
    assert value == pytest.approx(0.25)
    assert grad[0] == pytest.approx(0.0, abs=1e-15)
    assert lap == pytest.approx(-2.0)


def test_log_derivative_examples():
    assert log_derivative(ExpQuadraticIntensity(1.0, (0.0,), math.sqrt(0.5)), 1.0)[0] == pytest.approx(-2.0)
    poly = PolynomialIntensity(Window((0.0,), (3.0,)), ((0.0, 0.0, 1.0),))
    assert log_derivative(poly, 2.0)[0] == pytest.approx(1.0)


def test_l2_inner_products():
    w = Window.unit(1)
    f = WindowPolynomial(w, ((0.0, 1.0, -1.0),))
    one = WindowPolynomial(w, ((1.0,),))
    assert l2_inner(f, one, ConstantIntensity(1.0), w) == pytest.approx(1 / 6, rel=1e-13)
    phi = Bump((0.5,), 0.3)
    assert l2_inner(phi, phi, ConstantIntensity(1.5), w) == pytest.approx(BUMP_NORM2_RHO15, rel=1e-9)


def test_l2_inner_rejects_support_outside_window():
    with pytest.raises(PreconditionError):
        l2_inner(Bump((0.9,), 0.3), Bump((0.9,), 0.3), ConstantIntensity(1.0), Window.unit(1))


def test_bump_vanishes_outside_and_is_bounded():
    b = Bump((0.5,), 0.3)
    assert b.value([0.1, 0.9, 0.2, 0.8]).tolist() == [0.0, 0.0, 0.0, 0.0]
    assert float(b.value(0.5)) == pytest.approx(math.exp(-1))
    assert b.sup_abs() == pytest.approx(math.exp(-1))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.5), st.floats(-0.5, 1.5))
def test_bump_nonnegative_and_supported(radius, x):
    b = Bump((0.5,), radius)
    v = float(b.value(x))
    assert v >= 0
    if abs(x - 0.5) >= radius:
        assert v == 0
