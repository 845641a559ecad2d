"""Pair potentials and the energies and Gibbs weights built from them.

Energies live in R plus a saturating +inf flag. Forbidden configurations are
never represented by a float ``inf`` inside a sum, so ``exp(-E)`` is exactly
zero for them and no NaN can appear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .configuration import Configuration, ConfigurationBatch
from .errors import PreconditionError
from .space import IntensityModel, Window, as_points

__all__ = [
    "EnergyValue",
    "PairPotential",
    "ZeroPotential",
    "HardCore",
    "SoftCore",
    "PotentialModel",
    "conditional_energy",
    "local_energy",
    "rho_gamma",
    "local_energy_batch",
    "StabilityReport",
    "stability_spotcheck",
    "smooth_step",
]


@dataclass(frozen=True)
class EnergyValue:
    """Extended real energy: a finite ``value`` or ``+inf`` when ``infinite``."""

    value: float = 0.0
    infinite: bool = False

    @classmethod
    def inf(cls) -> "EnergyValue":
        return cls(0.0, True)

    def __add__(self, other) -> "EnergyValue":
        if isinstance(other, (int, float)):
            other = EnergyValue(float(other))
        if not isinstance(other, EnergyValue):
            return NotImplemented
        if self.infinite or other.infinite:
            return EnergyValue.inf()
        return EnergyValue(self.value + other.value)

    __radd__ = __add__

    def __sub__(self, other: "EnergyValue") -> "EnergyValue":
        """Difference of two energies; only defined when ``other`` is finite."""
        if other.infinite:
            raise PreconditionError("cannot subtract an infinite energy")
        return EnergyValue.inf() if self.infinite else EnergyValue(self.value - other.value)

    def __float__(self) -> float:
        return math.inf if self.infinite else float(self.value)

    def __lt__(self, other) -> bool:
        return float(self) < float(other)

    def boltzmann(self) -> float:
        """``exp(-E)``; exactly 0.0 for an infinite energy."""
        return 0.0 if self.infinite else math.exp(-self.value)

    @property
    def is_finite(self) -> bool:
        return not self.infinite


def smooth_step(u):
    """C-infinity step from 1 at ``u <= 0`` to 0 at ``u >= 1``.

    ``S(u) = f(1-u) / (f(1-u) + f(u))`` with ``f(z) = exp(-1/z)`` for z > 0.
    """
    u = np.asarray(u, dtype=float)
    inner = (u > 0) & (u < 1)
    uc = np.where(inner, u, 0.5)
    a = np.exp(-1.0 / (1.0 - uc))
    b = np.exp(-1.0 / uc)
    return np.where(u <= 0, 1.0, np.where(u >= 1, 0.0, a / (a + b)))


class PairPotential:
    """Radial symmetric pair interaction ``phi(x) = kernel(|x|)``.

    Subclasses implement ``evaluate(r)`` returning ``(values, inf_mask)``;
    entries flagged infinite carry value 0 so they can be summed safely.
    """

    family = "abstract"
    range: float = 0.0

    @property
    def is_zero(self) -> bool:
        return False

    @property
    def kinks(self) -> tuple:
        """Distances where the kernel is not smooth."""
        return ()

    @property
    def breaks(self) -> tuple:
        """Distances worth placing quadrature breakpoints at (kinks and fast transitions)."""
        return self.kinks

    def evaluate(self, r) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def scalar(self, r: float) -> float:
        """Kernel at one distance as a Python float (``math.inf`` allowed)."""
        vals, inf = self.evaluate(np.array([r]))
        return math.inf if inf[0] else float(vals[0])

    def __call__(self, x) -> np.ndarray:
        """Kernel applied to displacement vectors ``x`` of shape (..., d), with float inf."""
        x = np.asarray(x, dtype=float)
        vals, inf = self.evaluate(np.sqrt(np.sum(x * x, axis=-1)))
        return np.where(inf, np.inf, vals)

    def stability_constant(self) -> Optional[float]:
        """A constant B with ``E(gamma) >= -B |gamma|`` if one is known."""
        return None

    def max_points(self, w: Window) -> Optional[int]:
        """Largest finite-energy population in ``w``, None if unbounded."""
        return None

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class ZeroPotential(PairPotential):
    family = "zero"
    range = 0.0

    @property
    def is_zero(self) -> bool:
        return True

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        return np.zeros(r.shape), np.zeros(r.shape, dtype=bool)

    def scalar(self, r):
        return 0.0

    def stability_constant(self):
        return 0.0


@dataclass(frozen=True)
class HardCore(PairPotential):
    """``+inf`` for ``|x| < r0``, zero otherwise."""

    r0: float

    family = "hardcore"

    def __post_init__(self):
        if not self.r0 > 0:
            raise PreconditionError("hard-core radius must be positive")

    @property
    def range(self) -> float:
        return float(self.r0)

    @property
    def kinks(self):
        return (float(self.r0),)

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        return np.zeros(r.shape), r < self.r0

    def scalar(self, r):
        return math.inf if r < self.r0 else 0.0

    def stability_constant(self):
        return 0.0

    def max_points(self, w: Window) -> int:
        # disjoint balls of radius r0/2 around the points fit in w grown by r0/2
        if w.dim == 1:
            return int(math.floor(w.widths[0] / self.r0 + 1e-12)) + 1
        half = self.r0 / 2
        ball = math.pi ** (w.dim / 2) / math.gamma(w.dim / 2 + 1) * half**w.dim
        return int(w.grow(half).volume / ball)

    def params(self):
        return {"r0": self.r0}


@dataclass(frozen=True)
class SoftCore(PairPotential):
    """Bounded smooth bump: ``a`` for ``|x| <= flat``, smooth decay to 0 at ``r``.

    Between ``flat`` and ``r`` the kernel is ``a * S((t - flat) / (r - flat))``
    with the C-infinity step S, so it is constant on the inner ball and
    vanishes identically beyond ``r``. ``flat`` defaults to ``r / 2``.
    """

    a: float
    r: float
    flat: Optional[float] = None

    family = "softcore"

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.a)):
            raise PreconditionError("soft core needs finite a and r > 0")
        flat = self.r / 2 if self.flat is None else float(self.flat)
        if not 0 <= flat < self.r:
            raise PreconditionError("soft-core plateau must satisfy 0 <= flat < r")
        object.__setattr__(self, "flat", flat)

    @property
    def range(self) -> float:
        return float(self.r)

    @property
    def breaks(self):
        return (self.flat, float(self.r))

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        vals = self.a * smooth_step((r - self.flat) / (self.r - self.flat))
        return vals, np.zeros(r.shape, dtype=bool)

    def scalar(self, t):
        if t <= self.flat:
            return self.a
        if t >= self.r:
            return 0.0
        u = (t - self.flat) / (self.r - self.flat)
        p, q = math.exp(-1.0 / (1.0 - u)), math.exp(-1.0 / u)
        return self.a * p / (p + q)

    def stability_constant(self):
        return 0.0 if self.a >= 0 else None

    def params(self):
        return {"a": self.a, "r": self.r, "flat": self.flat}


@dataclass(frozen=True)
class PotentialModel:
    """The pair potential viewed as a potential on finite configurations.

    Only two-point sets interact: ``Phi({x, y}) = pair(x - y)``.
    """

    pair: PairPotential = field(default_factory=ZeroPotential)

    @property
    def is_zero(self) -> bool:
        return self.pair.is_zero

    def _pairwise(self, pts: np.ndarray):
        n = len(pts)
        i, j = np.triu_indices(n, 1)
        diff = pts[i] - pts[j]
        vals, inf = self.pair.evaluate(np.sqrt(np.sum(diff * diff, axis=-1)))
        return i, j, vals, inf

    def conditional_energy(self, gamma: Configuration, lam: Window) -> EnergyValue:
        if self.is_zero or len(gamma) < 2:
            return EnergyValue(0.0)
        pts = gamma.points
        i, j, vals, inf = self._pairwise(pts)
        inside = lam.contains(pts)
        keep = inside[i] | inside[j]
        if np.any(inf & keep):
            return EnergyValue.inf()
        return EnergyValue(math.fsum(vals[keep].tolist()))

    def total_energy(self, gamma: Configuration) -> EnergyValue:
        """Energy of all pairs of ``gamma``."""
        if self.is_zero or len(gamma) < 2:
            return EnergyValue(0.0)
        _, _, vals, inf = self._pairwise(gamma.points)
        if np.any(inf):
            return EnergyValue.inf()
        return EnergyValue(math.fsum(vals.tolist()))

    def local_energy(self, gamma: Configuration, x) -> EnergyValue:
        """Energy of ``x`` against every point of ``gamma`` (x must be new)."""
        x = as_points(x, gamma.dim).reshape(gamma.dim)
        if x in gamma:
            raise PreconditionError("local energy needs a point outside the configuration")
        if self.is_zero or not len(gamma):
            return EnergyValue(0.0)
        diff = gamma.points - x
        vals, inf = self.pair.evaluate(np.sqrt(np.sum(diff * diff, axis=-1)))
        if np.any(inf):
            return EnergyValue.inf()
        return EnergyValue(math.fsum(vals.tolist()))


def conditional_energy(m: PotentialModel, gamma: Configuration, lam: Window) -> EnergyValue:
    """Sum of pair terms over pairs of ``gamma`` with at least one point in ``lam``."""
    return m.conditional_energy(gamma, lam)


def local_energy(m: PotentialModel, gamma: Configuration, x) -> EnergyValue:
    return m.local_energy(gamma, x)


def rho_gamma(model: IntensityModel, m: PotentialModel, gamma: Configuration, x) -> float:
    """Perturbed density ``exp(-E_x(gamma + x)) * rho(x)``."""
    weight = m.local_energy(gamma, x).boltzmann()
    if weight == 0.0:
        return 0.0
    return weight * float(model.density(as_points(x, gamma.dim).reshape(gamma.dim)))


def local_energy_batch(m: PotentialModel, batch: ConfigurationBatch, rows: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Local energies for many (configuration, new point) queries.

    Parameters
    ----------
    rows : (Q,) int array
        Configuration index of each query in ``batch``.
    xs : (Q, d) array
        Candidate points.

    Returns
    -------
    values, infinite : (Q,) arrays
        Finite parts and +inf flags.
    """
    rows = np.asarray(rows, dtype=np.int64)
    q = len(rows)
    if m.is_zero or q == 0:
        return np.zeros(q), np.zeros(q, dtype=bool)
    counts = batch.counts[rows]
    total = int(counts.sum())
    if total == 0:
        return np.zeros(q), np.zeros(q, dtype=bool)
    qidx = np.repeat(np.arange(q), counts)
    starts = np.repeat(batch.offsets[rows] - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
    pidx = starts + np.arange(total)
    diff = batch.points[pidx] - xs[qidx]
    vals, inf = m.pair.evaluate(np.sqrt(np.sum(diff * diff, axis=-1)))
    energy = np.bincount(qidx, weights=vals, minlength=q)
    blocked = np.bincount(qidx, weights=inf.astype(float), minlength=q) > 0
    return np.where(blocked, 0.0, energy), blocked


def boltzmann_weights(values: np.ndarray, infinite: np.ndarray) -> np.ndarray:
    """``exp(-E)`` for arrays of (finite part, infinite flag)."""
    return np.where(infinite, 0.0, np.exp(-np.where(infinite, 0.0, values)))


@dataclass
class StabilityReport:
    """Outcome of a randomized stability spot check (evidence, not proof)."""

    bound: float
    trials: int
    violations: int
    worst_margin: float
    worst_size: int
    max_abs_energy: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def stability_spotcheck(
    m: PotentialModel,
    B: float,
    trials: int,
    stream,
    window: Window | None = None,
    max_points: int = 24,
) -> StabilityReport:
    """Look for configurations with ``E(gamma) < -B |gamma|``.

    Half of the trials are tight clusters (all points mutually within the
    potential's plateau, the worst case for attractive potentials); the rest
    are uniform in the window. ``stream`` is a RandomStream or a numpy
    Generator.
    """
    if B < 0:
        raise PreconditionError("stability constant must be non-negative")
    rng = getattr(stream, "generator", stream)
    window = window or Window.unit(1)
    d = window.dim
    reach = getattr(m.pair, "flat", None) or m.pair.range or 0.1
    cluster_radius = 0.45 * reach
    violations, worst, worst_n, max_abs = 0, math.inf, 0, 0.0
    for t in range(trials):
        n = int(rng.integers(2, max_points + 1))
        if t % 2 == 0:
            direction = rng.normal(size=(n, d))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            radii = cluster_radius * rng.uniform(size=(n, 1)) ** (1.0 / d)
            pts = window.center + direction * radii
        else:
            pts = rng.uniform(window.lower, window.upper, size=(n, d))
        energy = m.total_energy(Configuration(pts, d))
        if energy.infinite:
            continue
        max_abs = max(max_abs, abs(energy.value))
        margin = energy.value + B * n
        if margin < worst:
            worst, worst_n = margin, n
        if margin < 0:
            violations += 1
    return StabilityReport(B, trials, violations, worst, worst_n, max_abs)
