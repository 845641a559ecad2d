import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confspace import (
    Bump,
    ComponentField,
    Configuration,
    ConstantIntensity,
    CylinderFunction,
    ExpQuadraticIntensity,
    PolyBump,
    PreconditionError,
    Profile,
    ProductOuter,
    ResourceLimitError,
    Ridge,
    Window,
    carre,
    charlier,
    charlier_batch,
    constant,
    directional_derivative,
    divergence_gamma,
    generator_cylinder,
    intrinsic_gradient,
    l2_inner,
    linear,
    log_derivative_B,
    poisson_adjoint,
    poisson_directional,
    poisson_gradient,
    sigma_pair,
)
from confspace.configuration import ConfigurationBatch

unit = Window.unit(1)
rho = ConstantIntensity(1.5)
phi = Bump((0.5,), 0.3)
psi = PolyBump((0.45,), 0.35, (0.8,), (-0.5,))
F = CylinderFunction((phi, psi), Ridge(Profile("tanh"), (1.0, -0.5)))
gamma = Configuration([0.3, 0.45, 0.62, 0.9])
H = 1e-5


def _moved(g, k, t):
    pts = g.points.copy()
    pts[k] += t
    return Configuration(pts, g.dim)


def test_cylinder_evaluation():
    s = np.array([gamma.pair(phi), gamma.pair(psi)])
    assert F(gamma) == pytest.approx(math.tanh(s[0] - 0.5 * s[1]))
    assert constant(2.0)(gamma) == 2.0
    assert linear(phi, 3.0)(gamma) == pytest.approx(3 * gamma.pair(phi))
    with pytest.raises(PreconditionError):
        CylinderFunction((phi,), ProductOuter(2))


def test_intrinsic_gradient_is_derivative_in_point_positions():
    grad = intrinsic_gradient(F, gamma)
    for k in range(len(gamma)):
        fd = (F(_moved(gamma, k, H)) - F(_moved(gamma, k, -H))) / (2 * H)
        assert grad.vectors[k, 0] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_directional_derivative_is_derivative_along_flow():
    v = ComponentField((Bump((0.5,), 0.4),))
    flow = lambda t: Configuration(gamma.points + t * v.value(gamma.points), 1)
    fd = (F(flow(H)) - F(flow(-H))) / (2 * H)
    assert directional_derivative(F, v, gamma) == pytest.approx(fd, rel=1e-6)


def test_carre_is_tangent_inner_product():
    G = linear(psi)
    assert carre(F, G, gamma) == pytest.approx(intrinsic_gradient(F, gamma).inner(intrinsic_gradient(G, gamma)))
    assert carre(F, F, gamma) == pytest.approx(intrinsic_gradient(F, gamma).norm2())


def test_generator_matches_point_laplacians():
    model = ExpQuadraticIntensity(2.0, (0.3,), 0.4)
    expected = 0.0
    for k, x in enumerate(gamma.points[:, 0]):
        f0, fp, fm = F(gamma), F(_moved(gamma, k, 1e-4)), F(_moved(gamma, k, -1e-4))
        lap = (fp - 2 * f0 + fm) / 1e-8
        grad = (fp - fm) / 2e-4
        expected -= lap + model.log_derivative(x)[0] * grad
    assert generator_cylinder(F, model, gamma) == pytest.approx(expected, rel=1e-5)


def test_generator_of_linear_function():
    value = generator_cylinder(linear(phi), rho, gamma)
    assert value == pytest.approx(-float(np.sum(phi.laplacian(gamma.points))))


def test_divergence_of_scaled_field():
    v = ComponentField((Bump((0.5,), 0.4),))
    G = linear(psi)
    expected = directional_derivative(G, v, gamma) + G(gamma) * log_derivative_B(v, rho, gamma)
    assert divergence_gamma(G, v, rho, gamma) == pytest.approx(expected)


def test_poisson_gradient_of_cylinder():
    x = 0.55
    assert poisson_gradient(F, gamma, x) == pytest.approx(F(gamma.add_point(x)) - F(gamma))
    with pytest.raises(PreconditionError):
        poisson_gradient(F, gamma, 0.3)


def test_poisson_directional_of_linear_function_is_inner_product():
    value = poisson_directional(linear(psi), phi, rho, unit, gamma)
    assert value == pytest.approx(l2_inner(psi, phi, rho, unit), rel=1e-10)
    # a generic callable takes the node-by-node path
    generic = poisson_directional(lambda g: F(g), phi, rho, unit, gamma)
    assert generic == pytest.approx(poisson_directional(F, phi, rho, unit, gamma), rel=1e-12)


def test_poisson_adjoint_of_constant_field_is_first_charlier():
    field = lambda g, xs: phi.value(xs)
    value = poisson_adjoint(field, rho, unit, gamma, support=phi.support)
    assert value == pytest.approx(charlier(1, phi, rho, unit, gamma), rel=1e-10)


def test_charlier_low_orders():
    s = sigma_pair(phi, rho, unit)
    v = phi.value(gamma.points)
    assert charlier(0, phi, rho, unit, gamma) == 1.0
    assert charlier(1, phi, rho, unit, gamma) == pytest.approx(v.sum() - s)
    q2 = v.sum() ** 2 - (v * v).sum() - 2 * s * v.sum() + s * s
    assert charlier(2, phi, rho, unit, gamma) == pytest.approx(q2)


def test_charlier_order_limit():
    with pytest.raises(ResourceLimitError):
        charlier(6, phi, rho, unit, gamma)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), max_size=7, unique=True), st.integers(0, 4))
def test_charlier_recursion_matches_closed_form(xs, n):
    g = Configuration(xs)
    s = sigma_pair(phi, rho, unit)
    batch = ConfigurationBatch.from_configurations([g], 1)
    assert charlier_batch(n, phi, s, batch)[0] == pytest.approx(charlier(n, phi, rho, unit, g), rel=1e-10, abs=1e-12)


def test_sigma_pair_is_cached_and_accurate():
    assert sigma_pair(phi, rho, unit) == pytest.approx(1.5 * 0.133198144850423826417593101341, rel=1e-12)
