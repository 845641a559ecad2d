"""Cylinder functions, intrinsic and Poissonian gradients, and Charlier functions.

Every pointwise operation on a single configuration is a thin wrapper around
a batch routine working on a :class:`ConfigurationBatch`; the Monte Carlo
checkers call the batch routines directly.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .configuration import Configuration, ConfigurationBatch
from .errors import PreconditionError, ResourceLimitError
from .space import (
    IntensityModel,
    QuadratureRule,
    SmoothTestFunction,
    SmoothVectorField,
    Window,
    as_points,
    default_rule,
    integrate,
)

__all__ = [
    "Profile",
    "ConstantOuter",
    "Ridge",
    "ProductOuter",
    "ProductOfOuters",
    "CylinderFunction",
    "TangentVector",
    "linear",
    "constant",
    "sigma_pair",
    "intrinsic_gradient",
    "directional_derivative",
    "carre",
    "log_derivative_B",
    "poisson_gradient",
    "poisson_directional",
    "poisson_adjoint",
    "divergence_gamma",
    "generator_cylinder",
    "charlier",
    "charlier_batch",
    "intrinsic_gradient_batch",
    "directional_derivative_batch",
    "carre_batch",
    "log_derivative_B_batch",
    "divergence_gamma_batch",
    "generator_batch",
]


# ---------------------------------------------------------------------------
# Outer functions g: R^N -> R
# ---------------------------------------------------------------------------


def _profile_tables():
    def tanh(t, k):
        th = np.tanh(t)
        return (th, 1 - th * th, -2 * th * (1 - th * th))[k]

    def gauss(t, k):
        e = np.exp(-t * t)
        return (e, -2 * t * e, (4 * t * t - 2) * e)[k]

    def expneg(t, k):
        e = np.exp(-t)
        return (e, -e, e)[k]

    def sin(t, k):
        return (np.sin(t), np.cos(t), -np.sin(t))[k]

    return {
        "identity": (lambda t, k: (t, np.ones_like(t), np.zeros_like(t))[k], False),
        "square": (lambda t, k: (t * t, 2 * t, np.full_like(t, 2.0))[k], False),
        "cube": (lambda t, k: (t**3, 3 * t * t, 6 * t)[k], False),
        "tanh": (tanh, True),
        "gauss": (gauss, True),
        "expneg": (expneg, False),
        "sin": (sin, True),
    }


_PROFILES = _profile_tables()


@dataclass(frozen=True)
class Profile:
    """Scalar profile ``h`` with closed-form first and second derivatives.

    ``name`` is one of identity, square, cube, tanh, gauss, expneg, sin or
    poly; ``poly`` uses ``coeffs`` in increasing degree.
    """

    name: str
    coeffs: tuple = ()

    def __post_init__(self):
        if self.name != "poly" and self.name not in _PROFILES:
            raise PreconditionError(f"unknown profile {self.name!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def bounded(self) -> bool:
        if self.name == "poly":
            return len(self.coeffs) <= 1
        return _PROFILES[self.name][1]

    def __call__(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        if self.name == "poly":
            c = np.asarray(self.coeffs or (0.0,))
            for _ in range(order):
                c = np.polynomial.polynomial.polyder(c) if len(c) > 1 else np.zeros(1)
            return np.polynomial.polynomial.polyval(t, c)
        return _PROFILES[self.name][0](t, order)


class Outer:
    """Outer function of a cylinder function; evaluators vectorise over ``(..., N)``."""

    n_args: int
    bounded: bool = False

    def value(self, s):
        raise NotImplementedError

    def gradient(self, s):
        raise NotImplementedError

    def hessian(self, s):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantOuter(Outer):
    c: float = 1.0
    n_args: int = 0

    family = "constant"
    bounded = True

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return np.full(s.shape[:-1], float(self.c))

    def gradient(self, s):
        return np.zeros(np.shape(s))

    def hessian(self, s):
        s = np.asarray(s)
        return np.zeros(s.shape + (s.shape[-1],))


@dataclass(frozen=True)
class Ridge(Outer):
    """``g(s) = h(coef . s + offset)`` for a profile ``h``."""

    profile: Profile
    coef: tuple
    offset: float = 0.0

    family = "ridge"

    def __post_init__(self):
        object.__setattr__(self, "coef", tuple(float(c) for c in self.coef))
        if not self.coef:
            raise PreconditionError("ridge needs at least one coefficient")

    @property
    def n_args(self) -> int:
        return len(self.coef)

    @property
    def bounded(self) -> bool:
        return self.profile.bounded

    def _t(self, s):
        return np.asarray(s, dtype=float) @ np.asarray(self.coef) + self.offset

    def value(self, s):
        return self.profile(self._t(s), 0)

    def gradient(self, s):
        return self.profile(self._t(s), 1)[..., None] * np.asarray(self.coef)

    def hessian(self, s):
        c = np.asarray(self.coef)
        return self.profile(self._t(s), 2)[..., None, None] * np.outer(c, c)


@dataclass(frozen=True)
class ProductOuter(Outer):
    """``g(s) = s_1 * s_2 * ... * s_N``."""

    n_args: int = 2

    family = "product"
    bounded = False

    def _drop(self, s, idx):
        keep = [k for k in range(self.n_args) if k not in idx]
        return np.prod(s[..., keep], axis=-1) if keep else np.ones(s.shape[:-1])

    def value(self, s):
        return np.prod(np.asarray(s, dtype=float), axis=-1)

    def gradient(self, s):
        s = np.asarray(s, dtype=float)
        return np.stack([self._drop(s, (i,)) for i in range(self.n_args)], axis=-1)

    def hessian(self, s):
        s = np.asarray(s, dtype=float)
        n = self.n_args
        out = np.zeros(s.shape + (n,))
        for i in range(n):
            for j in range(n):
                if i != j:
                    out[..., i, j] = self._drop(s, (i, j))
        return out


@dataclass(frozen=True)
class ProductOfOuters(Outer):
    """``g(s) = left(s[:k]) * right(s[k:])`` with ``k = left.n_args``."""

    left: Outer
    right: Outer

    family = "product_of"

    @property
    def n_args(self) -> int:
        return self.left.n_args + self.right.n_args

    @property
    def bounded(self) -> bool:
        return self.left.bounded and self.right.bounded

    def _split(self, s):
        s = np.asarray(s, dtype=float)
        k = self.left.n_args
        return s[..., :k], s[..., k:]

    def value(self, s):
        a, b = self._split(s)
        return self.left.value(a) * self.right.value(b)

    def gradient(self, s):
        a, b = self._split(s)
        la, rb = self.left.value(a), self.right.value(b)
        return np.concatenate([self.left.gradient(a) * rb[..., None], la[..., None] * self.right.gradient(b)], axis=-1)

    def hessian(self, s):
        a, b = self._split(s)
        la, rb = self.left.value(a), self.right.value(b)
        ga, gb = self.left.gradient(a), self.right.gradient(b)
        top = np.concatenate([self.left.hessian(a) * rb[..., None, None], ga[..., :, None] * gb[..., None, :]], axis=-1)
        bottom = np.concatenate([gb[..., :, None] * ga[..., None, :], la[..., None, None] * self.right.hessian(b)], axis=-1)
        return np.concatenate([top, bottom], axis=-2)


# ---------------------------------------------------------------------------
# Cylinder functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CylinderFunction:
    """``F(gamma) = g(<gamma, phi_1>, ..., <gamma, phi_N>)``.

    Parameters
    ----------
    inner : tuple of SmoothTestFunction
        The functions ``phi_i`` (all of one dimension).
    outer : Outer
        The outer function ``g`` with closed-form gradient and Hessian.
    dim : int
        Ambient dimension, needed when ``inner`` is empty.
    """

    inner: tuple
    outer: Outer
    dim: int = 1

    def __post_init__(self):
        inner = tuple(self.inner)
        object.__setattr__(self, "inner", inner)
        if len(inner) != self.outer.n_args:
            raise PreconditionError(f"outer takes {self.outer.n_args} arguments, got {len(inner)} inner functions")
        dims = {f.dim for f in inner}
        if dims and dims != {self.dim}:
            if len(dims) == 1 and self.dim == 1:
                object.__setattr__(self, "dim", dims.pop())
            else:
                raise PreconditionError("inner functions must share the ambient dimension")

    @property
    def n_args(self) -> int:
        return len(self.inner)

    @property
    def bounded(self) -> bool:
        return self.outer.bounded

    @property
    def support(self) -> Optional[Window]:
        """Bounding box of the inner supports (None for a constant)."""
        if not self.inner:
            return None
        boxes = [f.support for f in self.inner]
        lower = np.min([b.lower for b in boxes], axis=0)
        upper = np.max([b.upper for b in boxes], axis=0)
        return Window(lower, upper)

    def stats(self, gamma: Configuration) -> np.ndarray:
        return np.array([gamma.pair(f) for f in self.inner], dtype=float)

    def stats_batch(self, batch: ConfigurationBatch) -> np.ndarray:
        return batch.pair_many(self.inner)

    def from_stats(self, s) -> np.ndarray:
        return self.outer.value(s)

    def __call__(self, gamma: Configuration) -> float:
        return float(self.outer.value(self.stats(gamma)))

    def evaluate_batch(self, batch: ConfigurationBatch) -> np.ndarray:
        return self.outer.value(self.stats_batch(batch))

    def inner_values(self, x) -> np.ndarray:
        """``phi_i(x)`` stacked on a trailing axis, shape ``(..., N)``."""
        x = as_points(x, self.dim)
        if not self.inner:
            return np.zeros(x.shape[:-1] + (0,))
        return np.stack([f.value(x) for f in self.inner], axis=-1)

    def inner_gradients(self, x) -> np.ndarray:
        """``grad phi_i(x)``, shape ``(..., N, d)``."""
        x = as_points(x, self.dim)
        if not self.inner:
            return np.zeros(x.shape[:-1] + (0, self.dim))
        return np.stack([f.gradient(x) for f in self.inner], axis=-2)

    def inner_laplacians(self, x) -> np.ndarray:
        x = as_points(x, self.dim)
        if not self.inner:
            return np.zeros(x.shape[:-1] + (0,))
        return np.stack([f.laplacian(x) for f in self.inner], axis=-1)

    def shifted(self, s, x) -> np.ndarray:
        """``F(gamma + x)`` from ``s = stats(gamma)``; ``s`` and ``x`` broadcast.

        With ``s`` of shape ``(K, N)`` and ``x`` of shape ``(Q, d)`` pass
        ``s[:, None, :]`` to get a ``(K, Q)`` table.
        """
        return self.outer.value(np.asarray(s) + self.inner_values(x))

    def added_point_gradient(self, s, x) -> np.ndarray:
        """``grad_x [F(gamma + x) - F(gamma)] = sum_i d_i g(s + phi(x)) grad phi_i(x)``."""
        grad_g = self.outer.gradient(np.asarray(s) + self.inner_values(x))
        return np.einsum("...i,...id->...d", grad_g, self.inner_gradients(x))

    def __mul__(self, other: "CylinderFunction") -> "CylinderFunction":
        if not isinstance(other, CylinderFunction):
            return NotImplemented
        return CylinderFunction(self.inner + other.inner, ProductOfOuters(self.outer, other.outer), self.dim)


def linear(phi: SmoothTestFunction, coef: float = 1.0) -> CylinderFunction:
    """``F(gamma) = coef * <gamma, phi>``."""
    return CylinderFunction((phi,), Ridge(Profile("identity"), (coef,)), phi.dim)


def constant(c: float = 1.0, dim: int = 1) -> CylinderFunction:
    return CylinderFunction((), ConstantOuter(c, 0), dim)


@dataclass
class TangentVector:
    """Vectors ``w_x`` attached to the points of a configuration (canonical order)."""

    gamma: Configuration
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float).reshape(len(self.gamma), self.gamma.dim)

    def at(self, x) -> np.ndarray:
        i = self.gamma.index_of(x)
        if i < 0:
            raise PreconditionError("point not in configuration")
        return self.vectors[i]

    def inner(self, other: "TangentVector") -> float:
        if other.gamma != self.gamma:
            raise PreconditionError("tangent vectors live over different configurations")
        return float(np.sum(self.vectors * other.vectors))

    def norm2(self) -> float:
        return float(np.sum(self.vectors * self.vectors))

    def pair_field(self, v: SmoothVectorField) -> float:
        """``<self, v restricted to gamma>``."""
        if not len(self.gamma):
            return 0.0
        return float(np.sum(self.vectors * v.value(self.gamma.points)))


# ---------------------------------------------------------------------------
# Batch cores
# ---------------------------------------------------------------------------


def _point_outer_gradient(F: CylinderFunction, batch: ConfigurationBatch, s=None) -> np.ndarray:
    """``d_i g`` at the owning configuration's statistics, per point row."""
    if s is None:
        s = F.stats_batch(batch)
    return F.outer.gradient(s)[batch.owner]


def intrinsic_gradient_batch(F: CylinderFunction, batch: ConfigurationBatch, s=None) -> np.ndarray:
    """Per-point intrinsic gradient vectors, shape ``(M, d)`` aligned with ``batch.points``."""
    if not F.inner or not len(batch.points):
        return np.zeros(batch.points.shape)
    dg = _point_outer_gradient(F, batch, s)
    return np.einsum("mi,mid->md", dg, F.inner_gradients(batch.points))


def directional_derivative_batch(F: CylinderFunction, v: SmoothVectorField, batch: ConfigurationBatch, s=None) -> np.ndarray:
    if not len(batch.points):
        return np.zeros(len(batch))
    grad = intrinsic_gradient_batch(F, batch, s)
    return batch.sum_rows(np.sum(grad * v.value(batch.points), axis=-1))


def carre_batch(F: CylinderFunction, G: CylinderFunction, batch: ConfigurationBatch, sF=None, sG=None) -> np.ndarray:
    if not len(batch.points):
        return np.zeros(len(batch))
    a = intrinsic_gradient_batch(F, batch, sF)
    b = intrinsic_gradient_batch(G, batch, sG)
    return batch.sum_rows(np.sum(a * b, axis=-1))


def log_derivative_B_batch(v: SmoothVectorField, model: IntensityModel, batch: ConfigurationBatch) -> np.ndarray:
    if not len(batch.points):
        return np.zeros(len(batch))
    x = batch.points
    per_point = np.sum(model.log_derivative(x) * v.value(x), axis=-1) + v.divergence(x)
    return batch.sum_rows(per_point)


def divergence_gamma_batch(G: CylinderFunction, v: SmoothVectorField, model: IntensityModel, batch: ConfigurationBatch, s=None) -> np.ndarray:
    if s is None:
        s = G.stats_batch(batch)
    return directional_derivative_batch(G, v, batch, s) + G.from_stats(s) * log_derivative_B_batch(v, model, batch)


def generator_batch(F: CylinderFunction, model: IntensityModel, batch: ConfigurationBatch, s=None) -> np.ndarray:
    """Intrinsic Dirichlet operator applied to ``F``, one value per configuration."""
    if not F.inner or not len(batch.points):
        return np.zeros(len(batch))
    if s is None:
        s = F.stats_batch(batch)
    x = batch.points
    grads = F.inner_gradients(x)  # (M, N, d)
    hess_g = F.outer.hessian(s)[batch.owner]  # (M, N, N)
    grad_g = F.outer.gradient(s)[batch.owner]  # (M, N)
    second = np.einsum("mij,mid,mjd->m", hess_g, grads, grads)
    drift = F.inner_laplacians(x) + np.einsum("md,mid->mi", model.log_derivative(x), grads)
    return -batch.sum_rows(second + np.sum(grad_g * drift, axis=-1))


def _single(gamma: Configuration) -> ConfigurationBatch:
    return ConfigurationBatch.from_configurations([gamma], gamma.dim)


# ---------------------------------------------------------------------------
# Pointwise operations
# ---------------------------------------------------------------------------


def intrinsic_gradient(F: CylinderFunction, gamma: Configuration) -> TangentVector:
    """``x -> sum_i d_i g(<gamma, phi>) grad phi_i(x)`` for ``x`` in ``gamma``."""
    return TangentVector(gamma, intrinsic_gradient_batch(F, _single(gamma)))


def directional_derivative(F: CylinderFunction, v: SmoothVectorField, gamma: Configuration) -> float:
    return float(directional_derivative_batch(F, v, _single(gamma))[0])


def carre(F: CylinderFunction, G: CylinderFunction, gamma: Configuration) -> float:
    return float(carre_batch(F, G, _single(gamma))[0])


def log_derivative_B(v: SmoothVectorField, model: IntensityModel, gamma: Configuration) -> float:
    """``sum over x in gamma of <beta(x), v(x)> + div v(x)``."""
    return float(log_derivative_B_batch(v, model, _single(gamma))[0])


def divergence_gamma(G: CylinderFunction, v: SmoothVectorField, model: IntensityModel, gamma: Configuration) -> float:
    """Divergence of the vector field ``G v`` on configuration space."""
    return float(divergence_gamma_batch(G, v, model, _single(gamma))[0])


def generator_cylinder(F: CylinderFunction, model: IntensityModel, gamma: Configuration) -> float:
    return float(generator_batch(F, model, _single(gamma))[0])


def poisson_gradient(F: Callable[[Configuration], float], gamma: Configuration, x) -> float:
    """``F(gamma + x) - F(gamma)``; ``F`` may be any function of a configuration."""
    x = as_points(x, gamma.dim).reshape(gamma.dim)
    if x in gamma:
        raise PreconditionError("Poisson gradient needs a point outside the configuration")
    return float(F(gamma.add_point(x))) - float(F(gamma))


def _integration_box(phi_support: Window, model: IntensityModel, w: Window) -> Optional[Window]:
    box = phi_support.intersect(w)
    if box is not None and model.support is not None:
        box = box.intersect(model.support)
    return box


@functools.lru_cache(maxsize=512)
def sigma_pair(phi: SmoothTestFunction, model: IntensityModel, w: Window, rtol: float = 1e-13) -> float:
    """``<sigma, phi> = integral of phi * rho`` over ``w``, by order doubling."""
    box = _integration_box(phi.support, model, w)
    if box is None:
        return 0.0
    value, _ = integrate(
        lambda x: phi.value(x) * model.density(x),
        box,
        order=8,
        panels=4 if box.dim < 3 else 2,
        rtol=rtol,
        atol=1e-15,
        max_order=256 if box.dim < 3 else 64,
    )
    return value


def poisson_directional(
    F,
    phi: SmoothTestFunction,
    model: IntensityModel,
    w: Window,
    gamma: Configuration,
    rule: QuadratureRule | None = None,
) -> float:
    """Integral of ``[F(gamma + x) - F(gamma)] phi(x) rho(x)`` over the support of ``phi``.

    Cylinder functions are evaluated in closed form at all nodes at once; any
    other callable is evaluated node by node.
    """
    if not w.contains_box(phi.support):
        raise PreconditionError("support of phi escapes the window")
    box = _integration_box(phi.support, model, w)
    if box is None:
        return 0.0
    rule = rule or default_rule(w.dim)
    nodes, weights = rule.nodes(box)
    if isinstance(F, CylinderFunction):
        s = F.stats(gamma)
        diff = F.shifted(s, nodes) - F.from_stats(s)
    else:
        base = float(F(gamma))
        diff = np.array([float(F(gamma.add_point(x))) - base if x not in gamma else 0.0 for x in nodes])
    return float(weights @ (diff * phi.value(nodes) * model.density(nodes)))


def poisson_adjoint(
    field: Callable,
    model: IntensityModel,
    w: Window,
    gamma: Configuration,
    support: Window | None = None,
    rule: QuadratureRule | None = None,
) -> float:
    """Adjoint of the Poisson gradient applied to a field ``(gamma, x) -> real``.

    ``sum_{x in gamma} field(gamma - x, x) - integral field(gamma, x) rho(x) dx``.
    The field is called with a configuration and an array of points of shape
    ``(Q, d)`` and must return ``Q`` values. The integral runs over ``w``, or
    over ``support`` when the field is known to vanish outside it.
    """
    total = 0.0
    for i in range(len(gamma)):
        total += float(np.asarray(field(gamma.without(i), gamma.points[i : i + 1])).reshape(-1)[0])
    box = w if support is None else support.intersect(w)
    if box is not None and model.support is not None:
        box = box.intersect(model.support)
    if box is None:
        return total
    rule = rule or default_rule(w.dim)
    nodes, weights = rule.nodes(box)
    values = np.asarray(field(gamma, nodes), dtype=float).reshape(-1)
    return total - float(weights @ (values * model.density(nodes)))


# ---------------------------------------------------------------------------
# Charlier functions
# ---------------------------------------------------------------------------


def charlier(
    n: int,
    phi: SmoothTestFunction,
    model: IntensityModel,
    w: Window,
    gamma: Configuration,
    max_order: int = 5,
    s: float | None = None,
) -> float:
    """Charlier function ``Q_n(gamma; phi^{(x)n})`` by the creation recursion.

    ``Q_0 = 1`` and ``Q_{k+1}(gamma) = sum_x phi(x) Q_k(gamma - x) - s Q_k(gamma)``
    with ``s = <sigma, phi>``. Values are memoized over sub-configurations,
    encoded as bitmasks of the points of ``gamma``; the cache lives only for
    this call.
    """
    if n < 0:
        raise PreconditionError("Charlier order must be non-negative")
    if n > max_order:
        raise ResourceLimitError(f"order {n} exceeds the memoization budget {max_order}")
    if not w.contains_box(phi.support):
        raise PreconditionError("support of phi escapes the window")
    if s is None:
        s = sigma_pair(phi, model, w)
    vals = phi.value(gamma.points).tolist() if len(gamma) else []
    live = [i for i, v in enumerate(vals) if v != 0.0]

    @functools.lru_cache(maxsize=None)
    def q(k: int, mask: int) -> float:
        if k == 0:
            return 1.0
        acc = math.fsum(vals[i] * q(k - 1, mask & ~(1 << i)) for i in live if mask >> i & 1)
        return acc - s * q(k - 1, mask)

    return q(n, (1 << len(vals)) - 1)


def charlier_batch(n: int, phi: SmoothTestFunction, s: float, batch: ConfigurationBatch) -> np.ndarray:
    """``Q_n`` for every configuration of a batch, via the closed form.

    ``Q_n = sum_k C(n, k) (-s)^(n-k) k! e_k(phi(gamma))`` where ``e_k`` is the
    k-th elementary symmetric polynomial of the values ``phi(x)``, obtained
    from power sums by Newton's identities. Agrees with :func:`charlier`.
    """
    if n < 0:
        raise PreconditionError("Charlier order must be non-negative")
    K = len(batch)
    vals = phi.value(batch.points) if len(batch.points) else np.zeros(0)
    power = [np.full(K, 0.0)] + [batch.sum_rows(vals**j) for j in range(1, n + 1)]
    e = [np.ones(K)]
    for k in range(1, n + 1):
        acc = np.zeros(K)
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * power[i]
        e.append(acc / k)
    out = np.zeros(K)
    for k in range(n + 1):
        out += math.comb(n, k) * (-s) ** (n - k) * math.factorial(k) * e[k]
    return out
