"""Grid heuristics for the local integrability conditions behind closability.

A point belongs to the regular set R(rho) when ``1 / rho`` is integrable on
some neighbourhood of it. On a grid this is approximated by integrating
``1 / max(rho, tiny)`` over shrinking windows around each cell centre. The
verdict is three-valued because the underlying conditions are
measure-theoretic and can only be approximated on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import PreconditionError
from ..gibbs import PotentialModel, local_energy_batch
from ..space import IntensityModel, Window

__all__ = [
    "ClosabilityReport",
    "closability_diagnostic",
    "fat_cantor_intervals",
    "indicator_of_intervals",
    "pair_potential_closability_check",
]

MACHINE_FLOOR = 1e-300


@dataclass
class ClosabilityReport:
    """Outcome of a grid diagnostic.

    ``violation_measure`` is the length (or volume) of grid cells where the
    density is positive but the cell centre fell outside the estimated
    regular set.
    """

    grid: dict
    regular_fraction: float
    violation_measure: float
    cell_size: float
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict != "fails"

    def to_dict(self) -> dict:
        return {
            "identity": "closability",
            "grid": self.grid,
            "regular_fraction": self.regular_fraction,
            "violation_measure": self.violation_measure,
            "verdict": self.verdict,
            "pass": self.passed,
            **({"details": self.details} if self.details else {}),
        }


def _verdict(violation: float, cell: float) -> str:
    if violation == 0:
        return "holds"
    if violation > 2 * cell:
        return "fails"
    return "inconclusive"


def closability_diagnostic(
    density_slice: Callable[[np.ndarray], np.ndarray],
    interval: tuple,
    n: int = 100,
    floor: float = 1e-12,
    threshold: float = 1e6,
    eps0: Optional[float] = None,
    resolution: int = 1 << 21,
) -> ClosabilityReport:
    """Estimate the regular set of a one-dimensional density on a grid.

    Parameters
    ----------
    density_slice : callable
        Vectorised density along a line.
    interval : (lo, hi)
    n : int
        Number of grid cells (at least 100).
    floor : float
        Densities at or below ``floor`` count as zero.
    threshold : float
        A neighbourhood integral of ``1 / rho`` above this counts as divergent.
    eps0 : float, optional
        Largest neighbourhood radius; defaults to half a cell. The radii
        ``eps0``, ``eps0 / 2`` and ``eps0 / 4`` are tried.
    resolution : int
        Number of midpoint samples used for all neighbourhood integrals.

    Returns
    -------
    ClosabilityReport
        ``fails`` when positive-density cells outside the estimated regular
        set have total length above two cells, ``holds`` when there are
        none, ``inconclusive`` otherwise.
    """
    if n < 100:
        raise PreconditionError("the grid needs at least 100 cells")
    lo, hi = map(float, interval)
    if not lo < hi:
        raise PreconditionError("empty interval")
    h = (hi - lo) / n
    eps0 = h / 2 if eps0 is None else float(eps0)
    per_cell = max(1, math.ceil(resolution / n))
    m = per_cell * n
    delta = (hi - lo) / m
    xs = lo + (np.arange(m) + 0.5) * delta
    rho = np.asarray(density_slice(xs), dtype=float)
    inv = 1.0 / np.maximum(rho, MACHINE_FLOOR)
    cum = np.concatenate([[0.0], np.cumsum(inv * delta)])
    centers = lo + (np.arange(n) + 0.5) * h

    regular = np.zeros(n, dtype=bool)
    for eps in (eps0, eps0 / 2, eps0 / 4):
        a = np.clip(np.floor((centers - eps - lo) / delta).astype(np.int64), 0, m)
        b = np.clip(np.ceil((centers + eps - lo) / delta).astype(np.int64), 0, m)
        regular |= (cum[b] - cum[a]) <= threshold

    positive = (rho > floor).reshape(n, per_cell).mean(axis=1)
    violation = float(np.sum(positive[~regular]) * h)
    return ClosabilityReport(
        {"lo": lo, "hi": hi, "n": n, "eps": [eps0, eps0 / 2, eps0 / 4], "resolution": m},
        float(regular.mean()),
        violation,
        h,
        _verdict(violation, h),
        {"cells_outside_regular_set": int(np.count_nonzero(~regular))},
    )


def fat_cantor_intervals(depth: int = 12, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Intervals left after ``depth`` stages of the Smith-Volterra-Cantor construction.

    Stage j removes an open middle interval of length ``4^-j`` (relative to
    the unit interval) from each of the ``2^(j-1)`` remaining pieces; the
    limit set has measure 1/2. Returns an array of shape ``(2^depth, 2)``.
    """
    pieces = np.array([[0.0, 1.0]])
    for j in range(1, depth + 1):
        gap = 0.25**j
        mid = pieces.mean(axis=1)
        left = np.stack([pieces[:, 0], mid - gap / 2], axis=1)
        right = np.stack([mid + gap / 2, pieces[:, 1]], axis=1)
        pieces = np.stack([left, right], axis=1).reshape(-1, 2)
    return lo + (hi - lo) * pieces


def indicator_of_intervals(intervals: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised indicator of a sorted union of closed disjoint intervals."""
    starts, ends = intervals[:, 0].copy(), intervals[:, 1].copy()

    def indicator(x):
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(starts, x, side="right") - 1
        inside = (k >= 0) & (x <= ends[np.clip(k, 0, len(ends) - 1)])
        return inside.astype(float)

    return indicator


def _ball_offsets(dim: int, per_axis: int) -> np.ndarray:
    t = (np.arange(per_axis) + 0.5) / per_axis * 2 - 1
    grid = np.stack([g.ravel() for g in np.meshgrid(*([t] * dim), indexing="ij")], axis=-1)
    return grid[np.sum(grid * grid, axis=1) <= 1.0]


def pair_potential_closability_check(
    m: PotentialModel,
    model: IntensityModel,
    w: Window,
    configurations,
    grid: int = 100,
    levels: int = 12,
    threshold: float = 1e6,
    samples_per_axis: int = 32,
) -> ClosabilityReport:
    """Local integrability of ``1 / rho_gamma`` around grid points of finite energy.

    For every sampled configuration and every grid point x with finite local
    energy, the integral of ``exp(E_z(gamma + z)) / rho(z)`` over balls
    ``B(x, eps)`` is estimated for ``eps = h / 2, h / 4, ...`` (``levels``
    halvings). The point is regular when some ball gives a finite value
    below ``threshold``. Verdicts are aggregated over configurations with
    the cell rule of :func:`closability_diagnostic`.
    """
    from ..configuration import ConfigurationBatch

    batch = configurations if isinstance(configurations, ConfigurationBatch) else ConfigurationBatch.from_configurations(list(configurations), w.dim)
    d = w.dim
    per_axis = grid if d == 1 else max(4, int(round(grid ** (1.0 / d))))
    widths = w.widths / per_axis
    axes = [w.lower[i] + (np.arange(per_axis) + 0.5) * widths[i] for i in range(d)]
    centers = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    cell = float(np.prod(widths))
    offsets = _ball_offsets(d, samples_per_axis)
    ball_vol = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    h = float(widths.min())

    worst, regular_total, checked = 0.0, 0, 0
    for k in range(len(batch)):
        rows = np.full(len(centers), k)
        _, blocked = local_energy_batch(m, batch, rows, centers)
        finite = ~blocked & (model.density(centers) > 0)
        regular = np.zeros(len(centers), dtype=bool)
        todo = np.flatnonzero(finite)
        for level in range(levels):
            if not len(todo):
                break
            eps = h / 2 * 0.5**level
            pts = (centers[todo][:, None, :] + eps * offsets[None]).reshape(-1, d)
            inside = w.contains(pts)
            energy, hit = local_energy_batch(m, batch, np.repeat(np.full(len(todo), k), len(offsets)), pts)
            rho = model.density(pts)
            bad = hit | (rho <= 0)
            integrand = np.where(bad | ~inside, 0.0, np.exp(np.where(bad, 0.0, energy)) / np.where(bad, 1.0, rho))
            divergent = (bad & inside).reshape(len(todo), -1).any(axis=1)
            value = integrand.reshape(len(todo), -1).mean(axis=1) * ball_vol * eps**d
            ok = ~divergent & (value <= threshold)
            regular[todo[ok]] = True
            todo = todo[~ok]
        checked += int(finite.sum())
        regular_total += int(regular[finite].sum())
        worst = max(worst, float(np.count_nonzero(finite & ~regular)) * cell)

    fraction = regular_total / checked if checked else 1.0
    return ClosabilityReport(
        {"points_per_axis": per_axis, "levels": levels, "configurations": len(batch)},
        float(fraction),
        worst,
        cell,
        _verdict(worst, cell),
        {"potential": m.pair.family},
    )
