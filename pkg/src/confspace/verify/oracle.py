"""Truncated-series quadrature oracle for expectations on small windows.

Under the Poisson law on a window ``w``

    E[f] = exp(-sigma(w)) * sum_k (1/k!) int_{w^k} f({x_1..x_k}) prod rho(x_j) dx,

and under the Gibbs law the same series carries the weight ``exp(-E(x))``
and is divided by the identically computed partition function. The series is
cut at ``n_max`` points and a rigorous bound for the discarded terms is
attached to the result.

The k-fold integrals use a tensor Gauss-Legendre rule on ``w^k`` whose
panels split at the edges of the functional's ``active_box`` (where it
depends on the points), when the functional declares one. A one-dimensional
hard core of radius r0 is removed exactly instead: ordered tuples
``x_1 < ... < x_k`` are written as ``x_i = u_i + (i - 1) r0`` with ``u`` in
a simplex parametrised by collapsed (Duffy) coordinates, so the integrand
stays smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..configuration import ConfigurationBatch
from ..errors import PreconditionError
from ..gibbs import HardCore, PotentialModel
from ..space import IntensityModel, Window, composite_nodes_1d, intensity_mass

__all__ = ["OracleConfig", "OracleResult", "oracle_expectation", "hardcore_1d_series"]


@dataclass(frozen=True)
class OracleConfig:
    """Truncation order and quadrature budget of the oracle.

    ``node_budget`` caps the number of k-point nodes per term;
    ``max_axis_nodes`` caps the nodes per coordinate axis.
    """

    n_max: int = 6
    max_axis_nodes: int = 384
    node_budget: int = 2_000_000
    tail_tolerance: float = 1e-6
    chunk: int = 100_000

    def __post_init__(self):
        if self.n_max < 0 or self.max_axis_nodes < 2 or self.node_budget < 2:
            raise PreconditionError("invalid oracle configuration")

    def axis_nodes(self, k: int, d: int) -> int:
        return int(max(2, min(self.max_axis_nodes, math.floor(self.node_budget ** (1.0 / (k * d)) + 1e-9))))


@dataclass
class OracleResult:
    value: float
    tail_bound: float
    inconclusive: bool
    terms: list = field(default_factory=list)
    partition: float = 1.0
    axis_nodes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "tail_bound": self.tail_bound,
            "inconclusive": self.inconclusive,
            "partition": self.partition,
            "terms": list(self.terms),
        }


def _axis_rule(lo: float, hi: float, count: int):
    panels = max(1, math.ceil(count / 16))
    order = max(1, count // panels)
    return composite_nodes_1d([lo, hi], order, panels)


def _aligned_axis_rule(lo: float, hi: float, count: int, active: Optional[tuple]):
    """Axis rule whose panels split at the edges of the functional's active interval.

    Pieces outside the active interval get two Gauss nodes each (one when
    the axis budget is tiny), since the functional does not vary there; the
    remaining nodes go to the inside, so the axis keeps about ``count`` nodes.
    """
    if active is None:
        return _axis_rule(lo, hi, count)
    a, b = max(lo, active[0]), min(hi, active[1])
    if not a < b:
        return _axis_rule(lo, hi, count)
    outside = [(u, v) for u, v in ((lo, a), (b, hi)) if v - u > 1e-12 * (hi - lo)]
    per_piece = 2 if count >= 2 * len(outside) + 4 else 1
    inside = max(2, count - per_piece * len(outside))
    parts = [_axis_rule(a, b, inside)] + [composite_nodes_1d([u, v], per_piece, 1) for u, v in outside]
    x = np.concatenate([q[0] for q in parts])
    w = np.concatenate([q[1] for q in parts])
    order = np.argsort(x, kind="stable")
    return x[order], w[order]


def _tensor_chunks(axes, chunk: int):
    """Yield ``(nodes, weights)`` blocks of the tensor product of 1-d rules without building it whole."""
    shape = tuple(len(a[0]) for a in axes)
    total = int(np.prod(shape))
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, total)), shape)
        x = np.stack([axes[j][0][i] for j, i in enumerate(idx)], axis=-1)
        w = np.prod(np.stack([axes[j][1][i] for j, i in enumerate(idx)], axis=-1), axis=-1)
        yield x, w


def _simplex_chunks(k: int, length: float, count: int, chunk: int):
    """Collapsed-coordinate rule on ``0 <= u_1 <= ... <= u_k <= length``."""
    t, wt = _axis_rule(0.0, 1.0, count)
    for tt, weights in _tensor_chunks([(t, wt)] * k, chunk):
        weights = weights * length
        u = np.empty_like(tt)
        u[:, k - 1] = length * tt[:, k - 1]
        for j in range(k - 2, -1, -1):
            u[:, j] = u[:, j + 1] * tt[:, j]
            weights = weights * u[:, j + 1]
        yield u, weights


def _cube_chunks(w: Window, k: int, count: int, active: Optional[Window], chunk: int):
    axes = [
        _aligned_axis_rule(w.lower[i], w.upper[i], count, None if active is None else (active.lower[i], active.upper[i]))
        for i in range(w.dim)
    ] * k
    scale = 1.0 / math.factorial(k)
    for x, weights in _tensor_chunks(axes, chunk):
        yield x.reshape(len(x), k, w.dim), weights * scale


def _energies(m: Optional[PotentialModel], pts: np.ndarray, skip_hard: bool):
    """Total pair energy of every k-point row of ``pts`` (shape (Q, k, d))."""
    q, k, _ = pts.shape
    if m is None or m.is_zero or k < 2:
        return np.zeros(q), np.zeros(q, dtype=bool)
    i, j = np.triu_indices(k, 1)
    diff = pts[:, i, :] - pts[:, j, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    vals, inf = m.pair.evaluate(r)
    if skip_hard:
        # the ordered shift already enforces the hard core; guard against rounding at the contact distance
        inf = np.zeros_like(inf)
    return vals.sum(axis=1), inf.any(axis=1)


def _term(functional, model, m, w, k, cfg, hard_r0):
    """``(A_k, Z_k)``: the k-point integrals with and without the functional."""
    if k == 0:
        empty = ConfigurationBatch(np.empty((0, w.dim)), np.zeros(2, dtype=np.int64), w.dim)
        return float(np.asarray(functional(empty))[0]), 1.0, 0
    count = cfg.axis_nodes(k, w.dim)
    if hard_r0 > 0 and w.dim == 1:
        length = w.widths[0] - (k - 1) * hard_r0
        if length <= 0:
            return 0.0, 0.0, count
        shift = hard_r0 * np.arange(k)
        blocks = (((w.lower[0] + u + shift)[..., None], wq) for u, wq in _simplex_chunks(k, length, count, cfg.chunk))
    else:
        blocks = _cube_chunks(w, k, count, getattr(functional, "active_box", None), cfg.chunk)
    a_sum, z_sum = [], []
    for p, weights in blocks:
        wq = weights * np.prod(model.density(p), axis=1)
        energy, blocked = _energies(m, p, hard_r0 > 0 and w.dim == 1)
        wq = np.where(blocked, 0.0, wq * np.exp(-np.where(blocked, 0.0, energy)))
        batch = ConfigurationBatch(p.reshape(-1, w.dim), np.arange(len(p) + 1) * k, w.dim)
        a_sum.append(float(wq @ np.asarray(functional(batch), dtype=float)))
        z_sum.append(float(wq.sum()))
    return math.fsum(a_sum), math.fsum(z_sum), count


def _tail(sigma: float, growth: float, bound: Callable, start: int, stop: Optional[int]):
    """``sum_{k >= start} sigma^k / k! * growth^k * bound(k)`` (up to ``stop`` inclusive)."""
    total, k = 0.0, start
    last = stop if stop is not None else start + 400
    while k <= last:
        b = bound(k)
        if b is None:
            return math.inf
        term = math.exp(k * math.log(sigma * growth) - math.lgamma(k + 1)) * b if sigma > 0 else 0.0
        total += term
        if stop is None and k > sigma * growth + 10 and term < 1e-30 * max(total, 1e-300):
            break
        k += 1
    return total


def oracle_expectation(functional, model: IntensityModel, m: Optional[PotentialModel], w: Window, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """Expectation of ``functional`` by the truncated series.

    ``functional`` maps a ConfigurationBatch to one value per configuration and
    may expose ``bound(k)`` (a bound on |f| over k-point configurations) for
    the tail estimate; without it the tail bound is infinite. ``m = None``
    selects the Poisson law; any PotentialModel selects the Gibbs law.
    """
    sigma = intensity_mass(model, w)
    hard_r0 = m.pair.r0 if m is not None and isinstance(m.pair, HardCore) else 0.0
    a_terms, z_terms, nodes = [], [], {}
    for k in range(cfg.n_max + 1):
        a_k, z_k, count = _term(functional, model, m, w, k, cfg, hard_r0)
        a_terms.append(a_k)
        z_terms.append(z_k)
        nodes[k] = count
    bound = getattr(functional, "bound", lambda k: None)
    A, Z = math.fsum(a_terms), math.fsum(z_terms)
    if m is None:
        value = math.exp(-sigma) * A
        tail = math.exp(-sigma) * _tail(sigma, 1.0, bound, cfg.n_max + 1, None)
        partition = math.exp(sigma)
    else:
        value = A / Z
        stop = m.pair.max_points(w)
        B = m.pair.stability_constant()
        if stop is not None and stop <= cfg.n_max:
            tail = 0.0
        elif B is None:
            tail = math.inf
        else:
            growth = math.exp(B)
            a_tail = _tail(sigma, growth, bound, cfg.n_max + 1, stop)
            z_tail = _tail(sigma, growth, lambda k: 1.0, cfg.n_max + 1, stop)
            tail = (a_tail + abs(value) * z_tail) / Z
        partition = Z
    return OracleResult(value, tail, not tail <= cfg.tail_tolerance, a_terms, partition, nodes)


def hardcore_1d_series(z: float, length: float, r0: float, n_max: int) -> tuple[float, float]:
    """Closed-form truncated partition function and mean count of a 1-d hard core.

    With constant density ``z`` on an interval, the k-point term of the
    partition function is ``z^k (length - (k-1) r0)_+^k / k!``. Returns
    ``(Z_N, E_N[N])``.
    """
    terms = [z**k * max(length - (k - 1) * r0, 0.0) ** k / math.factorial(k) for k in range(n_max + 1)]
    Z = math.fsum(terms)
    return Z, math.fsum(k * t for k, t in enumerate(terms)) / Z
