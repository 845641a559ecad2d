"""Finite-difference consistency checks shared by the unit and acceptance tests.

Every shipped test function, vector field, outer family and intensity is
probed at 100 random points; analytic first and second derivatives are
compared with central differences of the next-lower order.
"""

import numpy as np

from confspace import (
    Bump,
    BumpIntensity,
    ComponentField,
    ConstantOuter,
    ExpQuadraticIntensity,
    GradientField,
    LinearCombination,
    PolyBump,
    PolynomialIntensity,
    Profile,
    ProductOfOuters,
    ProductOuter,
    Ridge,
    RotationalField,
    Window,
    WindowPolynomial,
)

POINTS = 100
RTOL = 1e-5
STEP = 1e-5


def _rel(fd, an):
    fd, an = np.asarray(fd, dtype=float), np.asarray(an, dtype=float)
    return float(np.max(np.abs(fd - an) / np.maximum(np.abs(an), 1.0)))


def _jacobian(f, x, h=STEP):
    """Central-difference derivative of a vectorised map along each coordinate; last axis indexes it."""
    cols = []
    for i in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def shipped_test_functions():
    out = {}
    for d in (1, 2, 3):
        c = (0.5,) * d
        w = Window((0.0,) * d, (1.0,) * d)
        bump = Bump(c, 0.45, 1.3)
        out[f"bump/d{d}"] = bump
        out[f"polybump/d{d}"] = PolyBump(c, 0.4, tuple(0.3 * (i + 1) for i in range(d)), tuple(-0.2 for _ in range(d)), 0.8)
        out[f"polynomial/d{d}"] = WindowPolynomial(w, tuple((0.3, -1.0, 0.5, 0.7)[: 2 + i] for i in range(d)))
        out[f"combination/d{d}"] = LinearCombination(((1.0, bump), (-0.5, Bump(tuple(0.4 for _ in range(d)), 0.3))))
    return out


def vector_fields():
    return {
        "components/d1": ComponentField((Bump((0.5,), 0.4),)),
        "components/d2": ComponentField((Bump((0.5, 0.5), 0.4), None)),
        "components/d3": ComponentField((Bump((0.5,) * 3, 0.4), PolyBump((0.5,) * 3, 0.3, (0.2, 0.1, 0.0)), None)),
        "gradient/d2": GradientField(Bump((0.5, 0.5), 0.4)),
        "gradient/d3": GradientField(PolyBump((0.5,) * 3, 0.4, (0.3, 0.0, -0.2), (0.1, 0.1, 0.1))),
        "rotational/d2": RotationalField(PolyBump((0.5, 0.5), 0.4, (0.3, -0.4))),
    }


def outer_families():
    out = {}
    for name in ("identity", "square", "cube", "tanh", "gauss", "expneg", "sin"):
        out[f"ridge/{name}"] = Ridge(Profile(name), (0.8, -0.6), 0.1)
    out["ridge/poly"] = Ridge(Profile("poly", (0.5, -1.0, 0.25, 0.1)), (1.0, 0.5))
    out["product"] = ProductOuter(3)
    out["constant"] = ConstantOuter(2.5, 2)
    out["product_of"] = ProductOfOuters(Ridge(Profile("tanh"), (1.0,)), Ridge(Profile("gauss"), (0.5, 0.5)))
    return out


def intensities():
    return {
        "expquad/d1": ExpQuadraticIntensity(2.0, (0.3,), 0.4),
        "expquad/d2": ExpQuadraticIntensity(1.0, (0.3, 0.6), 0.5),
        "polynomial/d1": PolynomialIntensity(Window.unit(1), ((1.0, 2.0, -1.0),)),
        "bump/d2": BumpIntensity(1.5, (0.5, 0.5), 0.45, 0.2),
    }


def check_test_function(f, rng):
    d = f.dim
    box = getattr(f, "support", None) or Window((0.0,) * d, (1.0,) * d)
    x = rng.uniform(box.lower, box.upper, size=(POINTS, d))
    g = f.gradient(x)
    err = _rel(_jacobian(f.value, x), g)
    err = max(err, _rel(_jacobian(f.gradient, x), f.hessian(x)))
    err = max(err, _rel(np.trace(f.hessian(x), axis1=-2, axis2=-1), f.laplacian(x)))
    return err


def check_vector_field(v, rng):
    d = v.dim
    x = rng.uniform(0.1, 0.9, size=(POINTS, d))
    jac = _jacobian(v.value, x)
    return _rel(np.trace(jac, axis1=-2, axis2=-1), v.divergence(x))


def check_outer(g, rng):
    n = g.n_args if g.n_args is not None else 3
    s = rng.uniform(-1.5, 1.5, size=(POINTS, n))
    err = _rel(_jacobian(g.value, s), g.gradient(s))
    return max(err, _rel(_jacobian(g.gradient, s), g.hessian(s)))


def check_intensity(model, rng):
    d = model.dim
    x = rng.uniform(0.05, 0.95, size=(POINTS, d))
    err = _rel(_jacobian(model.density, x), model.gradient(x))
    return max(err, _rel(model.gradient(x) / model.density(x)[:, None], model.log_derivative(x)))


def run_suite(seed: int = 0) -> dict:
    """Worst relative error per object name."""
    rng = np.random.default_rng(seed)
    results = {}
    for name, f in shipped_test_functions().items():
        results[f"function/{name}"] = check_test_function(f, rng)
    for name, v in vector_fields().items():
        results[f"field/{name}"] = check_vector_field(v, rng)
    for name, g in outer_families().items():
        results[f"outer/{name}"] = check_outer(g, rng)
    for name, m in intensities().items():
        results[f"intensity/{name}"] = check_intensity(m, rng)
    return results
