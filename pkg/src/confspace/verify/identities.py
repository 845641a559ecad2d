"""Paired Monte Carlo checkers for the exact identities of the two calculi.

Each checker draws configurations in fixed replicate blocks, evaluates both
sides of an identity on the same configurations and reports the paired
difference. Integrals over an added point ``x`` are computed by quadrature
inside the expectation, configuration by configuration.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..calculus import (
    CylinderFunction,
    Profile,
    Ridge,
    carre_batch,
    charlier,
    charlier_batch,
    constant,
    directional_derivative_batch,
    divergence_gamma_batch,
    generator_batch,
    log_derivative_B_batch,
    sigma_pair,
)
from ..configuration import ConfigurationBatch
from ..errors import PreconditionError
from ..gibbs import PotentialModel, local_energy_batch
from ..sampler import GibbsChainParams, RandomStream, sample_poisson_batch
from ..space import (
    IntensityModel,
    QuadratureRule,
    SmoothTestFunction,
    SmoothVectorField,
    Window,
    gauss_legendre,
    integrate,
    l2_inner,
)
from .estimates import ABSOLUTE_FLOOR, SIGMA_MULTIPLIER, IdentityReport, MonteCarloEstimate
from .functionals import CharlierProduct
from .laws import GibbsLaw, PoissonLaw, run_replicates

__all__ = [
    "HFunction",
    "verification_rule",
    "added_point_integral",
    "mc_expectation",
    "verify_mecke",
    "verify_gnz",
    "verify_ibp",
    "verify_div_duality",
    "verify_generator",
    "verify_form_poisson",
    "verify_form_gibbs",
    "verify_chaos_orthogonality",
    "laplace_closed_form",
    "AnnihilationReport",
    "check_annihilation",
]


def verification_rule(dim: int) -> QuadratureRule:
    """Fixed composite rule for integrals over an added point."""
    return {1: QuadratureRule(24, 8), 2: QuadratureRule(20, 2), 3: QuadratureRule(10, 2)}[dim]


def _meet(*boxes) -> Optional[Window]:
    out = None
    for b in boxes:
        if b is None:
            continue
        out = b if out is None else out.intersect(b)
        if out is None:
            return None
    return out


@dataclass(frozen=True)
class HFunction:
    """Integrand ``h(gamma, x) = a(x) * F(gamma)`` of the exchange formulas.

    ``family`` is ``constant`` (F = 1), ``laplace`` (F = exp(-<gamma, psi>))
    or ``cylinder`` (any cylinder function).
    """

    a: SmoothTestFunction
    F: CylinderFunction
    family: str = "cylinder"

    @classmethod
    def constant(cls, a: SmoothTestFunction) -> "HFunction":
        return cls(a, constant(1.0, a.dim), "constant")

    @classmethod
    def laplace(cls, a: SmoothTestFunction, psi: SmoothTestFunction) -> "HFunction":
        return cls(a, CylinderFunction((psi,), Ridge(Profile("expneg"), (1.0,)), a.dim), "laplace")

    @classmethod
    def cylinder(cls, a: SmoothTestFunction, F: CylinderFunction) -> "HFunction":
        return cls(a, F, "cylinder")


# ---------------------------------------------------------------------------
# Integration over an added point
# ---------------------------------------------------------------------------


def _breakpoint_nodes(batch, start, stop, box, breaks, order=16, panels=8):
    """Per-configuration composite nodes in d = 1 with cuts at ``y +- b``."""
    lo, hi = box.lower[0], box.upper[0]
    counts = batch.counts[start:stop]
    kc = stop - start
    width = int(counts.max()) if kc else 0
    pad = np.full((kc, max(width, 1)), np.nan)
    if width:
        sl = slice(batch.offsets[start], batch.offsets[stop])
        owner = batch.owner[sl] - start
        pos = np.arange(sl.start, sl.stop) - batch.offsets[start:stop][owner]
        pad[owner, pos] = batch.points[sl, 0]
    cuts = np.concatenate([pad + s * b for b in breaks for s in (-1.0, 1.0)], axis=1)
    cuts = np.clip(np.where(np.isnan(cuts), hi, cuts), lo, hi)
    base = np.broadcast_to(np.linspace(lo, hi, panels + 1), (kc, panels + 1))
    edges = np.sort(np.concatenate([base, cuts], axis=1), axis=1)
    a, b = edges[:, :-1], edges[:, 1:]
    t, w = gauss_legendre(order)
    half = ((b - a) / 2)[..., None]
    nodes = ((a + b) / 2)[..., None] + half * t
    weights = half * w
    return nodes.reshape(kc, -1, 1), weights.reshape(kc, -1)


def added_point_integral(
    batch: ConfigurationBatch,
    law,
    box: Optional[Window],
    integrand: Callable[[int, int, np.ndarray], np.ndarray],
    rule: QuadratureRule | None = None,
) -> np.ndarray:
    """``int_box integrand(k, x) rho(x) exp(-E_x(gamma_k + x)) dx`` for every k.

    ``integrand(start, stop, nodes)`` gets nodes of shape ``(1, Q, d)`` (shared
    grid) or ``(stop - start, Q, d)`` (per-configuration grid) and returns a
    table broadcastable to ``(stop - start, Q)``. The Gibbs factor is used
    only when ``law`` carries a non-zero potential. In one dimension, with a
    potential, every configuration gets its own breakpoints at the kinks of
    the pair potential around each of its points.
    """
    K = len(batch)
    out = np.zeros(K)
    if box is None or K == 0:
        return out
    box = _meet(box, law.window, law.model.support)
    if box is None:
        return out
    model = law.model
    m: PotentialModel = law.potential
    gibbs = not m.is_zero
    per_config = gibbs and box.dim == 1 and bool(m.pair.breaks)
    if not per_config:
        rule = rule or verification_rule(box.dim)
        x, wq = rule.nodes(box)
        base_w = wq * model.density(x)
        shared = x[None]
    step = max(1, 400_000 // (len(shared[0]) if not per_config else 16 * (9 + 4 * len(m.pair.breaks) * max(1, int(batch.counts.max(initial=0))))))
    for start in range(0, K, step):
        stop = min(K, start + step)
        if per_config:
            nodes, wq = _breakpoint_nodes(batch, start, stop, box, m.pair.breaks)
            weights = wq * model.density(nodes)
        else:
            nodes, weights = shared, base_w[None]
        values = np.broadcast_to(integrand(start, stop, nodes), (stop - start, nodes.shape[1]))
        if gibbs:
            q = nodes.shape[1]
            xs = np.broadcast_to(nodes, (stop - start, q, box.dim)).reshape(-1, box.dim)
            rows = np.repeat(np.arange(start, stop), q)
            energy, blocked = local_energy_batch(m, batch, rows, xs)
            factor = np.where(blocked, 0.0, np.exp(-np.where(blocked, 0.0, energy))).reshape(stop - start, q)
            values = values * factor
        out[start:stop] = np.sum(values * weights, axis=1)
    return out


# ---------------------------------------------------------------------------
# Evaluators (picklable so replicates can run in worker processes)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Functional:
    functional: Callable

    def __call__(self, batch):
        return (np.asarray(self.functional(batch), dtype=float),)


@dataclass(frozen=True)
class _Exchange:
    h: HFunction
    law: object
    rule: Optional[QuadratureRule] = None

    def __call__(self, batch):
        a, F = self.h.a, self.h.F
        s = F.stats_batch(batch)
        lhs = F.from_stats(s) * batch.pair(a)

        def integrand(start, stop, nodes):
            return a.value(nodes) * F.shifted(s[start:stop, None, :], nodes)

        rhs = added_point_integral(batch, self.law, a.support, integrand, self.rule)
        return lhs, rhs


@dataclass(frozen=True)
class _Form:
    F: CylinderFunction
    G: CylinderFunction
    law: object
    rule: Optional[QuadratureRule] = None

    def __call__(self, batch):
        sF, sG = self.F.stats_batch(batch), self.G.stats_batch(batch)
        lhs = carre_batch(self.F, self.G, batch, sF, sG)
        if self.F.support is None or self.G.support is None:
            return lhs, np.zeros(len(batch))

        def integrand(start, stop, nodes):
            gf = self.F.added_point_gradient(sF[start:stop, None, :], nodes)
            gg = self.G.added_point_gradient(sG[start:stop, None, :], nodes)
            return np.sum(gf * gg, axis=-1)

        box = self.F.support.intersect(self.G.support)
        rhs = added_point_integral(batch, self.law, box, integrand, self.rule)
        return lhs, rhs


@dataclass(frozen=True)
class _IBP:
    F: CylinderFunction
    G: CylinderFunction
    v: SmoothVectorField
    model: IntensityModel

    def __call__(self, batch):
        sF, sG = self.F.stats_batch(batch), self.G.stats_batch(batch)
        f, g = self.F.from_stats(sF), self.G.from_stats(sG)
        lhs = directional_derivative_batch(self.F, self.v, batch, sF) * g + f * directional_derivative_batch(self.G, self.v, batch, sG)
        rhs = -f * g * log_derivative_B_batch(self.v, self.model, batch)
        return lhs, rhs


@dataclass(frozen=True)
class _DivDuality:
    F: CylinderFunction
    G: CylinderFunction
    v: SmoothVectorField
    model: IntensityModel

    def __call__(self, batch):
        sF, sG = self.F.stats_batch(batch), self.G.stats_batch(batch)
        lhs = self.G.from_stats(sG) * directional_derivative_batch(self.F, self.v, batch, sF)
        rhs = -self.F.from_stats(sF) * divergence_gamma_batch(self.G, self.v, self.model, batch, sG)
        return lhs, rhs


@dataclass(frozen=True)
class _Generator:
    F: CylinderFunction
    G: CylinderFunction
    model: IntensityModel

    def __call__(self, batch):
        sF, sG = self.F.stats_batch(batch), self.G.stats_batch(batch)
        lhs = carre_batch(self.F, self.G, batch, sF, sG)
        rhs = generator_batch(self.F, self.model, batch, sF) * self.G.from_stats(sG)
        return lhs, rhs


@dataclass(frozen=True)
class _Target:
    functional: Callable
    target: float

    def __call__(self, batch):
        values = np.asarray(self.functional(batch), dtype=float)
        return values, np.full(len(values), self.target)


# ---------------------------------------------------------------------------
# Runner glue
# ---------------------------------------------------------------------------


def _collect(columns, index):
    return np.concatenate([np.asarray(c[index], dtype=float) for c in columns])


def _chain_summary(diags) -> Optional[dict]:
    diags = [d for d in diags if d is not None]
    if not diags:
        return None
    total = diags[0]
    for d in diags[1:]:
        total = total.merge(d)
    return total.to_dict()


def _paired(tag, law, evaluator, n, seed, workers, details=None) -> IdentityReport:
    t0 = time.perf_counter()
    columns, sizes, diags = run_replicates(law, evaluator, n, seed, workers)
    lhs, rhs = _collect(columns, 0), _collect(columns, 1)
    details = dict(details or {})
    chain = _chain_summary(diags)
    if chain is not None:
        details["chain"] = chain
    report = IdentityReport.from_pairs(tag, lhs, rhs, seed, sizes, law.batches, details=details)
    report.runtime_ms = (time.perf_counter() - t0) * 1e3
    return report


def mc_expectation(functional: Callable, law, n_samples: int, seed: int, workers: int | None = None) -> MonteCarloEstimate:
    """Replicate-averaged estimate of ``E[functional]`` under ``law``."""
    if n_samples < 100:
        raise PreconditionError("mc_expectation needs at least 100 samples")
    columns, sizes, _ = run_replicates(law, _Functional(functional), n_samples, seed, workers)
    return MonteCarloEstimate.from_values(_collect(columns, 0), sizes, law.batches)


# ---------------------------------------------------------------------------
# Checkers
# ---------------------------------------------------------------------------


def laplace_closed_form(a: SmoothTestFunction, psi: SmoothTestFunction, model: IntensityModel, w: Window) -> float:
    """``(int a e^{-psi} d sigma) * exp(int (e^{-psi} - 1) d sigma)`` over ``w``."""
    box_a = _meet(a.support, w, model.support)
    first = 0.0
    if box_a is not None:
        first, _ = integrate(lambda x: a.value(x) * np.exp(-psi.value(x)) * model.density(x), box_a, order=16, panels=4, rtol=1e-12, atol=1e-15, max_order=256)
    box_p = _meet(psi.support, w, model.support)
    second = 0.0
    if box_p is not None:
        second, _ = integrate(lambda x: np.expm1(-psi.value(x)) * model.density(x), box_p, order=16, panels=4, rtol=1e-12, atol=1e-15, max_order=256)
    return first * math.exp(second)


def _closed_form_details(report: IdentityReport, closed: float) -> dict:
    def agree(est):
        return bool(abs(est.mean - closed) <= SIGMA_MULTIPLIER * est.se + ABSOLUTE_FLOOR)

    return {"closed_form": closed, "lhs_matches_closed_form": agree(report.lhs), "rhs_matches_closed_form": agree(report.rhs)}


def verify_mecke(h: HFunction, model: IntensityModel, w: Window, n: int, seed: int, workers=None, rule=None) -> IdentityReport:
    """``E[sum_{x in gamma} h(gamma, x)] = E[int h(gamma + x, x) rho(x) dx]`` under Poisson."""
    law = PoissonLaw(model, w)
    report = _paired("mecke", law, _Exchange(h, law, rule), n, seed, workers, {"h_family": h.family})
    if h.family == "laplace":
        report.details.update(_closed_form_details(report, laplace_closed_form(h.a, h.F.inner[0], model, w)))
    return report


def verify_gnz(
    h: HFunction,
    model: IntensityModel,
    m: PotentialModel,
    w: Window,
    params: GibbsChainParams,
    n: int,
    seed: int,
    workers=None,
    rule=None,
) -> IdentityReport:
    """Gibbs exchange formula with the weight ``exp(-E_x(gamma + x))`` on the right."""
    law = GibbsLaw(model, m, w, params)
    return _paired("gnz", law, _Exchange(h, law, rule), n, seed, workers, {"h_family": h.family, "potential": m.pair.family})


def _require_inside(w: Window, box: Optional[Window], what: str) -> None:
    if box is not None and not w.contains_box(box):
        raise PreconditionError(f"support of {what} escapes the window")


def verify_ibp(F, G, v: SmoothVectorField, model: IntensityModel, w: Window, n: int, seed: int, workers=None) -> IdentityReport:
    """``E[(D_v F) G] + E[F (D_v G)] + E[F G B_v] = 0``, paired as LHS = -E[F G B_v]."""
    _require_inside(w, v.support, "the vector field")
    return _paired("ibp", PoissonLaw(model, w), _IBP(F, G, v, model), n, seed, workers)


def verify_div_duality(F, G, v: SmoothVectorField, model: IntensityModel, w: Window, n: int, seed: int, workers=None) -> IdentityReport:
    """``E[<G v, grad F>] = -E[F div(G v)]``."""
    _require_inside(w, v.support, "the vector field")
    return _paired("div_duality", PoissonLaw(model, w), _DivDuality(F, G, v, model), n, seed, workers)


def verify_generator(F, G, model: IntensityModel, w: Window, n: int, seed: int, workers=None) -> IdentityReport:
    """``E[carre(F, G)] = E[(H F) G]`` under Poisson."""
    _require_inside(w, F.support, "the inner functions of F")
    return _paired("generator", PoissonLaw(model, w), _Generator(F, G, model), n, seed, workers)


def verify_form_poisson(F, G, model: IntensityModel, w: Window, n: int, seed: int, workers=None, rule=None) -> IdentityReport:
    """Intrinsic form equals the extrinsic form built from the add-one-point gradient."""
    law = PoissonLaw(model, w)
    return _paired("form_poisson", law, _Form(F, G, law, rule), n, seed, workers)


def verify_form_gibbs(
    F,
    G,
    model: IntensityModel,
    m: PotentialModel,
    w: Window,
    params: GibbsChainParams,
    n: int,
    seed: int,
    workers=None,
    rule=None,
) -> IdentityReport:
    """Gibbs version of the form identity with the ``exp(-E_x)`` weight.

    Requires the inner supports of F and G to sit at least one interaction
    range inside the window.
    """
    reach = m.pair.range
    for name, C in (("F", F), ("G", G)):
        box = C.support
        if box is not None and (not w.contains_box(box) or w.margin_to(box) < reach):
            raise PreconditionError(f"inner supports of {name} must stay {reach} inside the window")
    law = GibbsLaw(model, m, w, params)
    return _paired("form_gibbs", law, _Form(F, G, law, rule), n, seed, workers, {"potential": m.pair.family})


def verify_chaos_orthogonality(
    n: int,
    m: int,
    phi: SmoothTestFunction,
    psi: SmoothTestFunction,
    model: IntensityModel,
    w: Window,
    samples: int,
    seed: int,
    workers=None,
) -> IdentityReport:
    """``E[Q_n(phi) Q_m(psi)] = delta_nm n! (phi, psi)^n`` under Poisson."""
    if not (0 <= n <= 3 and 0 <= m <= 3):
        raise PreconditionError("chaos orders must lie in 0..3")
    inner = l2_inner(phi, psi, model, w)
    target = math.factorial(n) * inner**n if n == m else 0.0
    functional = CharlierProduct(n, phi, sigma_pair(phi, model, w), m, psi, sigma_pair(psi, model, w))
    return _paired(
        "chaos_orthogonality",
        PoissonLaw(model, w),
        _Target(functional, target),
        samples,
        seed,
        workers,
        {"n": n, "m": m, "inner_product": inner, "target": target},
    )


@dataclass
class AnnihilationReport:
    """Pointwise comparison of ``int grad^P Q_n(gamma, x) psi(x) d sigma(x)``
    with ``n (phi, psi) Q_{n-1}(gamma)``."""

    orders: tuple
    configurations: int
    max_relative_error: float
    tolerance: float
    worst: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "identity": "annihilation",
            "orders": list(self.orders),
            "configurations": self.configurations,
            "max_relative_error": self.max_relative_error,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def check_annihilation(
    phi: SmoothTestFunction,
    psi: SmoothTestFunction,
    model: IntensityModel,
    w: Window,
    seed: int,
    orders=(1, 2, 3),
    configurations: int = 100,
    tolerance: float = 1e-4,
    rule: QuadratureRule | None = None,
) -> AnnihilationReport:
    """Check the annihilation identity on sampled Poisson configurations.

    The left side integrates ``Q_n(gamma + x) - Q_n(gamma)`` (closed form) over
    the support of ``psi``; the right side uses the memoized recursion and
    the inner product ``(phi, psi)`` from a different quadrature.
    """
    batch = sample_poisson_batch(model, w, RandomStream(seed, ("annihilation",)), configurations)
    s = sigma_pair(phi, model, w)
    inner = l2_inner(phi, psi, model, w)
    box = _meet(psi.support, w, model.support)
    rule = rule or QuadratureRule(20, 6)
    nodes, weights = rule.nodes(box)
    q = len(nodes)
    wq = weights * psi.value(nodes) * model.density(nodes)
    worst, worst_info = 0.0, {}
    for k in range(len(batch)):
        gamma = batch[k]
        pts = np.concatenate([np.repeat(gamma.points[None], q, axis=0), nodes[:, None, :]], axis=1).reshape(-1, w.dim)
        plus = ConfigurationBatch(pts, np.arange(q + 1) * (len(gamma) + 1), w.dim)
        for n in orders:
            base = charlier(n, phi, model, w, gamma, s=s)
            lhs = float(wq @ (charlier_batch(n, phi, s, plus) - base))
            rhs = n * inner * charlier(n - 1, phi, model, w, gamma, s=s)
            err = abs(lhs - rhs) / abs(rhs) if rhs != 0 else abs(lhs)
            if err > worst:
                worst, worst_info = err, {"configuration": k, "order": n, "lhs": lhs, "rhs": rhs}
    return AnnihilationReport(tuple(orders), len(batch), worst, tolerance, worst_info)
