"""Flat ambient space: boxes, intensity densities, test functions, quadrature.

Everything here is immutable and vectorised over a leading batch of points:
a point array has shape ``(..., d)`` and scalar evaluators return ``(...)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import PreconditionError, QuadratureError, ResourceLimitError

__all__ = [
    "Window",
    "bounding_box",
    "gauss_legendre",
    "composite_nodes_1d",
    "QuadratureRule",
    "integrate",
    "SmoothTestFunction",
    "Bump",
    "PolyBump",
    "WindowPolynomial",
    "LinearCombination",
    "SmoothVectorField",
    "ComponentField",
    "GradientField",
    "RotationalField",
    "ZeroField",
    "IntensityModel",
    "ConstantIntensity",
    "ExpQuadraticIntensity",
    "PolynomialIntensity",
    "BumpIntensity",
    "intensity_mass",
    "log_derivative",
    "l2_inner",
    "evaluate_jet",
    "default_rule",
]

MAX_QUADRATURE_NODES = 4_000_000


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to a float array whose last axis has length ``dim``.

    In one dimension a scalar or a flat array of coordinates is accepted and
    gets a trailing axis appended.
    """
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.ndim == 0 or x.shape[-1] != dim:
        raise PreconditionError(f"expected points with last axis {dim}, got shape {x.shape}")
    return x


def _tuple(values) -> tuple:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


# ---------------------------------------------------------------------------
# Boxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    """Closed axis-aligned box ``[lower, upper]`` in R^d, d in {1, 2, 3}."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower, upper = _tuple(self.lower), _tuple(self.upper)
        if len(lower) != len(upper):
            raise PreconditionError("lower and upper corners differ in dimension")
        if not 1 <= len(lower) <= 3:
            raise PreconditionError(f"dimension must be 1, 2 or 3, got {len(lower)}")
        if not all(math.isfinite(v) for v in lower + upper):
            raise PreconditionError("window corners must be finite")
        if not all(lo < hi for lo, hi in zip(lower, upper)):
            raise PreconditionError(f"degenerate window {lower} .. {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, dim: int = 1) -> "Window":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lower) + np.asarray(self.upper)) / 2

    def contains(self, x) -> np.ndarray:
        x = as_points(x, self.dim)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def contains_box(self, other: "Window") -> bool:
        return all(a <= b for a, b in zip(self.lower, other.lower)) and all(
            a >= b for a, b in zip(self.upper, other.upper)
        )

    def intersect(self, other: "Window") -> Optional["Window"]:
        lower = np.maximum(self.lower, other.lower)
        upper = np.minimum(self.upper, other.upper)
        if np.any(lower >= upper):
            return None
        return Window(lower, upper)

    def grow(self, margin: float) -> "Window":
        return Window(np.subtract(self.lower, margin), np.add(self.upper, margin))

    def margin_to(self, inner: "Window") -> float:
        """Smallest distance from a face of ``inner`` to the matching face of self."""
        gaps = np.concatenate([np.subtract(inner.lower, self.lower), np.subtract(self.upper, inner.upper)])
        return float(gaps.min())


def bounding_box(boxes: Sequence[Window]) -> Window:
    boxes = [b for b in boxes if b is not None]
    if not boxes:
        raise PreconditionError("no boxes to bound")
    lower = np.min([b.lower for b in boxes], axis=0)
    upper = np.max([b.upper for b in boxes], axis=0)
    return Window(lower, upper)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] (cached, read-only)."""
    if order < 1:
        raise PreconditionError("quadrature order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_nodes_1d(breaks, order: int, panels: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on the intervals between sorted ``breaks``.

    Each interval is cut into ``panels`` equal pieces carrying ``order`` nodes.
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    if panels > 1:
        t = np.linspace(0.0, 1.0, panels + 1)[:-1]
        a, b = breaks[:-1], breaks[1:]
        breaks = np.append((a[:, None] + (b - a)[:, None] * t).ravel(), breaks[-1])
    a, b = breaks[:-1], breaks[1:]
    t, w = gauss_legendre(order)
    half = (b - a)[:, None] / 2
    x = ((a + b)[:, None] / 2 + half * t).ravel()
    return x, (half * w).ravel()


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor composite Gauss-Legendre rule.

    ``order`` nodes per panel and ``panels`` equal panels per axis; optional
    per-axis breakpoints split the box further before paneling.
    """

    order: int = 16
    panels: int = 1

    def axis_nodes(self, lo: float, hi: float, cuts=()) -> tuple[np.ndarray, np.ndarray]:
        cuts = [c for c in cuts if lo < c < hi]
        return composite_nodes_1d([lo, hi, *cuts], self.order, self.panels)

    def nodes(self, box: Window, breakpoints=None) -> tuple[np.ndarray, np.ndarray]:
        axes = []
        for i in range(box.dim):
            cuts = () if breakpoints is None else breakpoints[i]
            axes.append(self.axis_nodes(box.lower[i], box.upper[i], cuts))
        total = math.prod(len(a[0]) for a in axes)
        if total > MAX_QUADRATURE_NODES:
            raise ResourceLimitError(f"tensor rule would need {total} nodes")
        grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        weights = np.meshgrid(*[a[1] for a in axes], indexing="ij")
        x = np.stack([g.ravel() for g in grids], axis=-1)
        w = np.prod(np.stack([g.ravel() for g in weights], axis=-1), axis=-1)
        return x, w

    def integrate(self, f: Callable, box: Window, breakpoints=None) -> float:
        x, w = self.nodes(box, breakpoints)
        return float(w @ np.asarray(f(x), dtype=float))


def integrate(
    f: Callable,
    box: Window,
    order: int = 8,
    panels: int = 1,
    rtol: float = 1e-10,
    atol: float = 1e-300,
    max_order: int = 1024,
    breakpoints=None,
) -> tuple[float, float]:
    """Integrate ``f`` over ``box`` by order doubling.

    Returns ``(value, error_estimate)`` where the estimate is the difference
    between the last two orders. Raises QuadratureError when the order cap is
    hit first.
    """
    prev = QuadratureRule(order, panels).integrate(f, box, breakpoints)
    while True:
        order *= 2
        try:
            cur = QuadratureRule(order, panels).integrate(f, box, breakpoints)
        except ResourceLimitError as exc:
            raise QuadratureError(f"no convergence before node budget: {exc}") from exc
        err = abs(cur - prev)
        if err <= rtol * abs(cur) + atol:
            return cur, err
        if order >= max_order:
            raise QuadratureError(f"error estimate {err:.3g} above tolerance at order {order}")
        prev = cur


def default_rule(dim: int) -> QuadratureRule:
    """Fixed rule used where an operation must be exactly linear in its integrand."""
    return {1: QuadratureRule(48, 4), 2: QuadratureRule(32, 4), 3: QuadratureRule(20, 2)}[dim]


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


class SmoothTestFunction:
    """Compactly supported smooth function with closed-form derivatives.

    Subclasses provide ``support`` (a Window) and ``value``, ``gradient`` and
    ``hessian``; everything vanishes outside the support box.
    """

    support: Window

    @property
    def dim(self) -> int:
        return self.support.dim

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        raise NotImplementedError

    def laplacian(self, x) -> np.ndarray:
        return np.trace(self.hessian(x), axis1=-2, axis2=-1)

    def __call__(self, x) -> np.ndarray:
        return self.value(x)

    def sup_abs(self) -> float:
        """Upper bound for |value| (used by truncation tail bounds)."""
        raise NotImplementedError


@dataclass(frozen=True)
class Bump(SmoothTestFunction):
    """``amplitude * exp(-1 / (1 - |x - c|^2 / r^2))`` on the open ball, zero outside."""

    center: tuple
    radius: float
    amplitude: float = 1.0
    support: Window = field(init=False, repr=False, compare=False)

    family = "bump"

    def __post_init__(self):
        object.__setattr__(self, "center", _tuple(self.center))
        if not self.radius > 0:
            raise PreconditionError("bump radius must be positive")
        c = np.asarray(self.center)
        object.__setattr__(self, "support", Window(c - self.radius, c + self.radius))

    def _parts(self, x):
        x = as_points(x, self.dim)
        diff = x - self.center
        r2 = self.radius**2
        u = np.sum(diff * diff, axis=-1) / r2
        gap = np.where(u < 1.0, 1.0 - u, 1.0)
        q = 1.0 / gap
        # exp(-q) underflows past q ~ 700; treat that rim as outside
        live = (u < 1.0) & (q < 700.0)
        q = np.where(live, q, 0.0)
        b = np.where(live, self.amplitude * np.exp(-q), 0.0)
        h = -(q**2)
        hp = -2.0 * q**3
        return diff, u, b, h, hp, r2

    def value(self, x):
        return self._parts(x)[2]

    def gradient(self, x):
        diff, _, b, h, _, r2 = self._parts(x)
        return (2.0 * b * h / r2)[..., None] * diff

    def hessian(self, x):
        diff, _, b, h, hp, r2 = self._parts(x)
        outer = diff[..., :, None] * diff[..., None, :]
        eye = np.eye(self.dim)
        coef = (2.0 / r2) * b
        return coef[..., None, None] * ((2.0 / r2) * (h * h + hp)[..., None, None] * outer + h[..., None, None] * eye)

    def laplacian(self, x):
        _, u, b, h, hp, r2 = self._parts(x)
        return (2.0 / r2) * b * (2.0 * u * (h * h + hp) + self.dim * h)

    def sup_abs(self) -> float:
        return abs(self.amplitude) * math.exp(-1.0)


@dataclass(frozen=True)
class PolyBump(SmoothTestFunction):
    """Bump multiplied by ``1 + sum(l_i dx_i) + sum(q_i dx_i^2)``, ``dx = x - center``."""

    center: tuple
    radius: float
    linear: tuple = ()
    quadratic: tuple = ()
    amplitude: float = 1.0
    support: Window = field(init=False, repr=False, compare=False)

    family = "polybump"

    def __post_init__(self):
        center = _tuple(self.center)
        d = len(center)
        lin = _tuple(self.linear) if len(self.linear) else (0.0,) * d
        quad = _tuple(self.quadratic) if len(self.quadratic) else (0.0,) * d
        if len(lin) != d or len(quad) != d:
            raise PreconditionError("polynomial coefficients must match the dimension")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "quadratic", quad)
        object.__setattr__(self, "_bump", Bump(center, self.radius, self.amplitude))
        object.__setattr__(self, "support", self._bump.support)

    def _poly(self, x):
        x = as_points(x, self.dim)
        dx = x - self.center
        lin, quad = np.asarray(self.linear), np.asarray(self.quadratic)
        p = 1.0 + dx @ lin + (dx * dx) @ quad
        dp = lin + 2.0 * quad * dx
        return x, p, dp

    def value(self, x):
        x, p, _ = self._poly(x)
        return p * self._bump.value(x)

    def gradient(self, x):
        x, p, dp = self._poly(x)
        return p[..., None] * self._bump.gradient(x) + self._bump.value(x)[..., None] * dp

    def hessian(self, x):
        x, p, dp = self._poly(x)
        b, db, hb = self._bump.value(x), self._bump.gradient(x), self._bump.hessian(x)
        cross = dp[..., :, None] * db[..., None, :]
        return p[..., None, None] * hb + cross + np.swapaxes(cross, -1, -2) + b[..., None, None] * np.diag(2.0 * np.asarray(self.quadratic))

    def laplacian(self, x):
        x, p, dp = self._poly(x)
        b, db, lb = self._bump.value(x), self._bump.gradient(x), self._bump.laplacian(x)
        return p * lb + 2.0 * np.sum(dp * db, axis=-1) + b * 2.0 * sum(self.quadratic)

    def sup_abs(self) -> float:
        r = self.radius
        pmax = 1.0 + r * sum(abs(v) for v in self.linear) + r * r * sum(abs(v) for v in self.quadratic)
        return pmax * self._bump.sup_abs()


@dataclass(frozen=True)
class WindowPolynomial(SmoothTestFunction):
    """Separable polynomial ``prod_i P_i(x_i)`` on a closed box, zero outside.

    ``coeffs[i]`` lists the coefficients of ``P_i`` in increasing degree. The
    function is smooth only in the interior of its box.
    """

    window: Window
    coeffs: tuple
    support: Window = field(init=False, repr=False, compare=False)

    family = "polynomial"

    def __post_init__(self):
        coeffs = tuple(_tuple(c) for c in self.coeffs)
        if len(coeffs) != self.window.dim:
            raise PreconditionError("need one coefficient list per axis")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "support", self.window)

    def _factors(self, x, order):
        pv = np.polynomial.polynomial.polyval
        cols = []
        for i, c in enumerate(self.coeffs):
            ci = np.asarray(c)
            for _ in range(order):
                ci = np.polynomial.polynomial.polyder(ci) if len(ci) > 1 else np.zeros(1)
            cols.append(pv(x[..., i], ci))
        return np.stack(cols, axis=-1)

    def _prep(self, x):
        x = as_points(x, self.dim)
        return x, self.window.contains(x)

    def value(self, x):
        x, inside = self._prep(x)
        return np.where(inside, np.prod(self._factors(x, 0), axis=-1), 0.0)

    def gradient(self, x):
        x, inside = self._prep(x)
        f0, f1 = self._factors(x, 0), self._factors(x, 1)
        out = np.empty(x.shape)
        for i in range(self.dim):
            out[..., i] = f1[..., i] * np.prod(np.delete(f0, i, axis=-1), axis=-1)
        return np.where(inside[..., None], out, 0.0)

    def hessian(self, x):
        x, inside = self._prep(x)
        f0, f1, f2 = self._factors(x, 0), self._factors(x, 1), self._factors(x, 2)
        d = self.dim
        out = np.empty(x.shape + (d,))
        for i in range(d):
            for j in range(d):
                if i == j:
                    out[..., i, i] = f2[..., i] * np.prod(np.delete(f0, i, axis=-1), axis=-1)
                else:
                    rest = np.prod(np.delete(f0, [i, j], axis=-1), axis=-1)
                    out[..., i, j] = f1[..., i] * f1[..., j] * rest
        return np.where(inside[..., None, None], out, 0.0)

    def sup_abs(self) -> float:
        total = 1.0
        for i, c in enumerate(self.coeffs):
            total *= _poly_abs_max(c, self.window.lower[i], self.window.upper[i])
        return total


def _poly_abs_max(coeffs, lo, hi) -> float:
    c = np.asarray(coeffs, dtype=float)
    pts = [lo, hi]
    if len(c) > 2:
        roots = np.polynomial.polynomial.polyroots(np.polynomial.polynomial.polyder(c))
        pts += [r.real for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and lo < r.real < hi]
    return float(np.max(np.abs(np.polynomial.polynomial.polyval(np.asarray(pts), c))))


def _poly_min(coeffs, lo, hi) -> float:
    c = np.asarray(coeffs, dtype=float)
    pts = [lo, hi]
    if len(c) > 2:
        roots = np.polynomial.polynomial.polyroots(np.polynomial.polynomial.polyder(c))
        pts += [r.real for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and lo < r.real < hi]
    return float(np.min(np.polynomial.polynomial.polyval(np.asarray(pts), c)))


@dataclass(frozen=True)
class LinearCombination(SmoothTestFunction):
    """``sum_k coef_k * f_k`` for test functions of one dimension."""

    terms: tuple
    support: Window = field(init=False, repr=False, compare=False)

    family = "combination"

    def __post_init__(self):
        terms = tuple((float(c), f) for c, f in self.terms)
        if not terms:
            raise PreconditionError("empty linear combination")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "support", bounding_box([f.support for _, f in terms]))

    def value(self, x):
        return sum(c * f.value(x) for c, f in self.terms)

    def gradient(self, x):
        return sum(c * f.gradient(x) for c, f in self.terms)

    def hessian(self, x):
        return sum(c * f.hessian(x) for c, f in self.terms)

    def laplacian(self, x):
        return sum(c * f.laplacian(x) for c, f in self.terms)

    def sup_abs(self) -> float:
        return sum(abs(c) * f.sup_abs() for c, f in self.terms)


# ---------------------------------------------------------------------------
# Vector fields
# ---------------------------------------------------------------------------


class SmoothVectorField:
    """Compactly supported smooth vector field with closed-form divergence."""

    support: Optional[Window]
    dim: int

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def divergence(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


@dataclass(frozen=True)
class ComponentField(SmoothVectorField):
    """``v = (f_1, ..., f_d)``; a ``None`` entry is the zero component."""

    components: tuple

    family = "components"

    def __post_init__(self):
        comps = tuple(self.components)
        dims = {f.dim for f in comps if f is not None}
        if len(dims) != 1 or dims.pop() != len(comps):
            raise PreconditionError("need exactly one component per axis, all of that dimension")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def support(self) -> Window:
        return bounding_box([f.support for f in self.components if f is not None])

    def value(self, x):
        x = as_points(x, self.dim)
        cols = [np.zeros(x.shape[:-1]) if f is None else f.value(x) for f in self.components]
        return np.stack(cols, axis=-1)

    def divergence(self, x):
        x = as_points(x, self.dim)
        out = np.zeros(x.shape[:-1])
        for i, f in enumerate(self.components):
            if f is not None:
                out = out + f.gradient(x)[..., i]
        return out


@dataclass(frozen=True)
class GradientField(SmoothVectorField):
    """``v = grad(psi)`` with ``div v = laplacian(psi)``."""

    potential: SmoothTestFunction

    family = "gradient"

    @property
    def dim(self) -> int:
        return self.potential.dim

    @property
    def support(self) -> Window:
        return self.potential.support

    def value(self, x):
        return self.potential.gradient(x)

    def divergence(self, x):
        return self.potential.laplacian(x)


@dataclass(frozen=True)
class RotationalField(SmoothVectorField):
    """Planar divergence-free field ``v = (d2 psi, -d1 psi)``."""

    potential: SmoothTestFunction

    family = "rotational"

    def __post_init__(self):
        if self.potential.dim != 2:
            raise PreconditionError("rotational fields exist only in the plane")

    dim = 2

    @property
    def support(self) -> Window:
        return self.potential.support

    def value(self, x):
        g = self.potential.gradient(x)
        return np.stack([g[..., 1], -g[..., 0]], axis=-1)

    def divergence(self, x):
        hess = self.potential.hessian(x)
        return hess[..., 0, 1] - hess[..., 1, 0]


@dataclass(frozen=True)
class ZeroField(SmoothVectorField):
    dim: int = 1

    family = "zero"
    support = None

    def value(self, x):
        x = as_points(x, self.dim)
        return np.zeros(x.shape)

    def divergence(self, x):
        x = as_points(x, self.dim)
        return np.zeros(x.shape[:-1])


# ---------------------------------------------------------------------------
# Intensity densities
# ---------------------------------------------------------------------------


class IntensityModel:
    """Density ``rho`` of the intensity measure with closed-form gradient.

    ``support`` is a box outside of which rho vanishes, or None.
    """

    dim: int
    support: Optional[Window] = None
    is_constant = False

    def density(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def sup(self, box: Window) -> float:
        """Upper bound of rho on ``box`` (needed for rejection sampling)."""
        raise NotImplementedError

    def log_derivative(self, x) -> np.ndarray:
        x = as_points(x, self.dim)
        rho = self.density(x)
        grad = self.gradient(x)
        pos = rho > 0
        safe = np.where(pos, rho, 1.0)
        return np.where(pos[..., None], grad / safe[..., None], 0.0)


@dataclass(frozen=True)
class ConstantIntensity(IntensityModel):
    z: float
    dim: int = 1

    family = "constant"
    is_constant = True

    def __post_init__(self):
        if not (self.z >= 0 and math.isfinite(self.z)):
            raise PreconditionError("constant intensity must be finite and non-negative")

    def density(self, x):
        x = as_points(x, self.dim)
        return np.full(x.shape[:-1], float(self.z))

    def gradient(self, x):
        x = as_points(x, self.dim)
        return np.zeros(x.shape)

    def sup(self, box):
        return float(self.z)


@dataclass(frozen=True)
class ExpQuadraticIntensity(IntensityModel):
    """``z * exp(-|x - m|^2 / (2 s^2))``."""

    z: float
    center: tuple
    scale: float

    family = "expquad"

    def __post_init__(self):
        object.__setattr__(self, "center", _tuple(self.center))
        if not (self.z > 0 and self.scale > 0):
            raise PreconditionError("expquad needs z > 0 and scale > 0")

    @property
    def dim(self) -> int:
        return len(self.center)

    def density(self, x):
        x = as_points(x, self.dim)
        diff = x - self.center
        return self.z * np.exp(-np.sum(diff * diff, axis=-1) / (2 * self.scale**2))

    def gradient(self, x):
        x = as_points(x, self.dim)
        diff = x - self.center
        return -(self.density(x) / self.scale**2)[..., None] * diff

    def log_derivative(self, x):
        x = as_points(x, self.dim)
        return -(x - self.center) / self.scale**2

    def sup(self, box):
        nearest = np.clip(self.center, box.lower, box.upper)
        return float(self.density(nearest))


@dataclass(frozen=True)
class PolynomialIntensity(IntensityModel):
    """Separable polynomial density on a box, zero outside; must be non-negative."""

    window: Window
    coeffs: tuple

    family = "polynomial"

    def __post_init__(self):
        poly = WindowPolynomial(self.window, self.coeffs)
        object.__setattr__(self, "coeffs", poly.coeffs)
        object.__setattr__(self, "_poly", poly)
        for i, c in enumerate(poly.coeffs):
            if _poly_min(c, self.window.lower[i], self.window.upper[i]) < 0:
                raise PreconditionError(f"polynomial density factor {i} is negative on the window")

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def support(self) -> Window:
        return self.window

    def density(self, x):
        return self._poly.value(x)

    def gradient(self, x):
        return self._poly.gradient(x)

    def sup(self, box):
        return self._poly.sup_abs()


@dataclass(frozen=True)
class BumpIntensity(IntensityModel):
    """``z * (base + bump(x))`` with a unit-amplitude bump."""

    z: float
    center: tuple
    radius: float
    base: float = 0.0

    family = "bump"

    def __post_init__(self):
        object.__setattr__(self, "center", _tuple(self.center))
        if not (self.z > 0 and self.base >= 0):
            raise PreconditionError("bump intensity needs z > 0 and base >= 0")
        object.__setattr__(self, "_bump", Bump(self.center, self.radius))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def support(self) -> Optional[Window]:
        return self._bump.support if self.base == 0 else None

    def density(self, x):
        return self.z * (self.base + self._bump.value(x))

    def gradient(self, x):
        return self.z * self._bump.gradient(x)

    def sup(self, box):
        return self.z * (self.base + math.exp(-1.0))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=256)
def _mass(model: IntensityModel, w: Window, rtol: float) -> float:
    box = w if model.support is None else w.intersect(model.support)
    if box is None:
        return 0.0
    if model.is_constant:
        return float(model.sup(box)) * box.volume
    start = 8 if box.dim < 3 else 4
    value, _ = integrate(model.density, box, order=start, panels=2, rtol=rtol, max_order=512 if box.dim < 3 else 128)
    return value


def intensity_mass(model: IntensityModel, w: Window, rtol: float = 1e-8) -> float:
    """``sigma(w) = integral of rho over w``; raises QuadratureError if unconverged."""
    if model.dim != w.dim:
        raise PreconditionError("intensity and window dimensions differ")
    return _mass(model, w, rtol)


def log_derivative(model: IntensityModel, x) -> np.ndarray:
    """``grad(rho) / rho`` where rho > 0, zero where rho vanishes."""
    return model.log_derivative(x)


def l2_inner(phi: SmoothTestFunction, psi: SmoothTestFunction, model: IntensityModel, w: Window, rule: QuadratureRule | None = None) -> float:
    """``(phi, psi)`` in ``L^2(sigma)`` restricted to the window."""
    for f in (phi, psi):
        if not w.contains_box(f.support):
            raise PreconditionError(f"support {f.support} escapes window {w}")
    box = phi.support.intersect(psi.support)
    if box is None:
        return 0.0
    rule = rule or default_rule(w.dim)
    return rule.integrate(lambda x: phi.value(x) * psi.value(x) * model.density(x), box)


def evaluate_jet(phi: SmoothTestFunction, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(value, gradient, laplacian)`` of a test function at ``x``."""
    return phi.value(x), phi.gradient(x), phi.laplacian(x)
