"""Acceptance criteria 1-11, one recorded PASS/FAIL line each.

The lines are printed as the tests run (visible with ``-s``) and repeated
in the terminal summary. Tolerances are the ones the criteria state:
``3 * SE`` for Monte Carlo comparisons (``3 * SE + 1e-9`` for paired
identity verdicts), ``1e-7`` for oracle closed forms, ``1e-6`` for the
oracle tail, ``1e-4`` for annihilation and ``1e-5`` for derivatives.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from confspace import (
    Bump,
    BumpIntensity,
    ComponentField,
    ConstantIntensity,
    CylinderFunction,
    GibbsChainParams,
    HardCore,
    PolyBump,
    PotentialModel,
    Profile,
    ProductOuter,
    RandomStream,
    Ridge,
    SoftCore,
    Window,
    ZeroPotential,
    l2_inner,
    linear,
    sample_poisson_batch,
    sigma_pair,
)
from confspace.verify import (
    CharlierProduct,
    CountFunctional,
    HFunction,
    MonteCarloEstimate,
    OracleConfig,
    PoissonLaw,
    check_annihilation,
    closability_diagnostic,
    fat_cantor_intervals,
    indicator_of_intervals,
    mc_expectation,
    oracle_expectation,
    pair_potential_closability_check,
    verify_chaos_orthogonality,
    verify_div_duality,
    verify_form_gibbs,
    verify_form_poisson,
    verify_generator,
    verify_gnz,
    verify_ibp,
    verify_mecke,
)
from confspace.verify.laws import GibbsLaw

import derivative_suite

ROOT = Path(__file__).resolve().parent.parent
SEED = 20240611
N = 100_000
N_GIBBS = 10_000
CHAIN = GibbsChainParams(burn_in=10_000, thin=10, step=0.1)

unit = Window.unit(1)
square = Window.unit(2)

phi = Bump((0.5,), 0.3)
psi = PolyBump((0.45,), 0.35, (0.8,), (-0.5,))
a = Bump((0.55,), 0.4, 0.7)
chi = Bump((0.5,), 0.25)
F = CylinderFunction((phi, psi), Ridge(Profile("tanh"), (1.0, -0.5)))
G = CylinderFunction((psi,), Ridge(Profile("sin"), (0.7,), 0.2))

phi2 = Bump((0.5, 0.5), 0.3)
psi2 = PolyBump((0.45, 0.5), 0.35, (0.8, -0.3), (-0.5, 0.2))
a2 = Bump((0.55, 0.5), 0.4, 0.7)
chi2 = Bump((0.5, 0.5), 0.25)
F2 = CylinderFunction((phi2, psi2), Ridge(Profile("tanh"), (1.0, -0.5)), 2)

# mpmath: (phi, psi) in L2(2 dx) on [0, 1]
INNER_PHI_PSI_RHO2 = 0.0841101204805239160868809636218
# mpmath: |phi|^2 in L2(0.4 dx) on [0, 1]
NORM2_PHI_RHO04 = 0.0159703345013993125868336793546


def _within(est, target, k=3.0):
    return abs(est.mean - target) <= k * est.se


def _fmt(est):
    return f"{est.mean:.6g}+-{est.se:.2g}"


def test_c1_poisson_sampler_law(criterion):
    t0 = time.perf_counter()
    batch = sample_poisson_batch(ConstantIntensity(1.5), unit, RandomStream(SEED, ("c1",)), N)
    counts = MonteCarloEstimate.from_values(batch.counts)
    void = MonteCarloEstimate.from_values(batch.count(Window((0.0,), (0.4,))) == 0)
    elapsed = time.perf_counter() - t0
    ok = _within(counts, 1.5) and _within(void, math.exp(-0.6)) and elapsed < 30.0
    criterion(1, ok, f"E[N]={_fmt(counts)} (1.5), P(void)={_fmt(void)} ({math.exp(-0.6):.6g}), {elapsed:.2f}s")


def test_c2_mecke(criterion):
    cases = [
        (1, ConstantIntensity(1.5), unit, (HFunction.constant(a), HFunction.laplace(a, phi), HFunction.cylinder(a, F))),
        (2, ConstantIntensity(3.0, 2), square, (HFunction.constant(a2), HFunction.laplace(a2, phi2), HFunction.cylinder(a2, F2))),
    ]
    ok, parts = True, []
    for d, model, w, hs in cases:
        for h in hs:
            r = verify_mecke(h, model, w, N, SEED)
            good = r.passed
            if h.family == "laplace":
                good = good and r.details["lhs_matches_closed_form"] and r.details["rhs_matches_closed_form"]
            ok &= good
            parts.append(f"d{d}/{h.family}:{'ok' if good else 'bad'}({r.paired.mean:.2g}/{r.threshold:.2g})")
    criterion(2, ok, " ".join(parts))


def test_c3_gnz(criterion):
    rho = ConstantIntensity(2.0)
    h = HFunction.laplace(a, phi)
    soft = verify_gnz(HFunction.cylinder(a, F), rho, PotentialModel(SoftCore(1.0, 0.15)), unit, CHAIN, N_GIBBS, SEED)
    hard = verify_gnz(h, rho, PotentialModel(HardCore(0.1)), unit, CHAIN, N_GIBBS, SEED)
    zero = verify_gnz(h, rho, PotentialModel(ZeroPotential()), unit, CHAIN, N_GIBBS, SEED)
    mecke = verify_mecke(h, rho, unit, N_GIBBS, SEED)
    identical = np.array_equal(zero.rows, mecke.rows) and zero.paired == mecke.paired
    ok = soft.passed and hard.passed and identical
    criterion(
        3,
        ok,
        f"softcore {soft.paired.mean:.2g}/{soft.threshold:.2g}, hardcore {hard.paired.mean:.2g}/{hard.threshold:.2g}, "
        f"zero potential bit-identical to Mecke: {identical}",
    )


def test_c4_form_gibbs(criterion):
    m = PotentialModel(SoftCore(1.0, 0.15))
    lin1 = linear(chi)
    nonlin1 = CylinderFunction((phi, chi), ProductOuter(2))
    lin2 = linear(chi2)
    nonlin2 = CylinderFunction((phi2, chi2), ProductOuter(2), 2)
    ok, parts = True, []
    for d, model, w, Fs in (
        (1, ConstantIntensity(2.0), unit, ((lin1, lin1), (nonlin1, lin1))),
        (2, ConstantIntensity(3.0, 2), square, ((lin2, lin2), (nonlin2, lin2))),
    ):
        for name, (f, g) in zip(("linear", "nonlinear"), Fs):
            r = verify_form_gibbs(f, g, model, m, w, CHAIN, N_GIBBS, SEED)
            ok &= r.passed
            parts.append(f"d{d}/{name}:{'ok' if r.passed else 'bad'}({r.paired.mean:.2g}/{r.threshold:.2g})")
    zero = verify_form_gibbs(F, G, ConstantIntensity(2.0), PotentialModel(ZeroPotential()), unit, CHAIN, N_GIBBS, SEED)
    poisson = verify_form_poisson(F, G, ConstantIntensity(2.0), unit, N_GIBBS, SEED)
    same = np.array_equal(zero.rows, poisson.rows) and zero.paired == poisson.paired
    ok &= same
    criterion(4, ok, " ".join(parts) + f" zero potential equals Poisson form: {same}")


def _oracle_c5(n_max):
    rho = ConstantIntensity(0.4)
    s = sigma_pair(phi, rho, unit)
    q11 = CharlierProduct(1, phi, s, 1, phi, s)
    hard = PotentialModel(HardCore(0.25))
    cfg = OracleConfig(n_max=n_max)
    return {
        "count": oracle_expectation(CountFunctional(), rho, None, unit, cfg),
        "q1sq": oracle_expectation(q11, rho, None, unit, cfg),
        "hard": oracle_expectation(CountFunctional(), rho, hard, unit, cfg),
    }, (rho, q11, hard)


def test_c5_oracle_equivalence(criterion):
    oracle, (rho, q11, hard) = _oracle_c5(10)
    criterion(
        5,
        None,
        f"n_max=10: E[N] err {oracle['count'].value - 0.4:.2g} tail {oracle['count'].tail_bound:.2g}, "
        f"E[Q1^2] err {oracle['q1sq'].value - NORM2_PHI_RHO04:.2g} tail {oracle['q1sq'].tail_bound:.2g}",
    )

    oracle, _ = _oracle_c5(6)
    mc = {
        "count": mc_expectation(CountFunctional(), PoissonLaw(rho, unit), N, SEED),
        "q1sq": mc_expectation(q11, PoissonLaw(rho, unit), N, SEED),
        "hard": mc_expectation(CountFunctional(), GibbsLaw(rho, hard, unit, CHAIN), N_GIBBS, SEED),
    }
    agree = {k: _within(mc[k], oracle[k].value) for k in mc}
    closed = abs(oracle["count"].value - 0.4) <= 1e-7 and abs(oracle["q1sq"].value - NORM2_PHI_RHO04) <= 1e-7
    tails = {k: oracle[k].tail_bound for k in oracle}
    ok = all(agree.values()) and closed and all(t < 1e-6 for t in tails.values())
    criterion(
        5,
        ok,
        f"n_max=6: MC agrees {agree}; closed-form errors E[N] {oracle['count'].value - 0.4:.3g}, "
        f"E[Q1^2] {oracle['q1sq'].value - NORM2_PHI_RHO04:.3g} (tol 1e-7); "
        f"tails " + ", ".join(f"{k} {t:.3g}" for k, t in tails.items()) + " (tol 1e-6)",
    )


def test_c6_chaos_orthogonality(criterion):
    rho = ConstantIntensity(2.0)
    ok, bad = True, []
    for n in range(4):
        for m in range(4):
            r = verify_chaos_orthogonality(n, m, phi, psi, rho, unit, N, SEED)
            if not r.passed:
                ok = False
                bad.append(f"({n},{m})")
            if n == m == 1:
                first = r
    quad = l2_inner(phi, psi, rho, unit)
    entry = _within(first.lhs, INNER_PHI_PSI_RHO2) and abs(quad - INNER_PHI_PSI_RHO2) <= 3 * first.lhs.se
    ok &= entry
    criterion(
        6,
        ok,
        f"16 pairs, failing: {bad or 'none'}; E[Q1 Q1]={_fmt(first.lhs)} vs (phi,psi)={INNER_PHI_PSI_RHO2:.10g} "
        f"(quadrature {quad:.10g})",
    )


def test_c7_annihilation(criterion):
    r = check_annihilation(phi, psi, ConstantIntensity(2.0), unit, SEED, orders=(1, 2, 3), configurations=100, tolerance=1e-4)
    criterion(7, r.passed, f"100 configurations, orders 1-3, max relative error {r.max_relative_error:.3g} (tol 1e-4)")


def test_c8_integration_by_parts_family(criterion):
    model = BumpIntensity(2.0, (0.5,), 0.45, 0.5)
    v = ComponentField((chi,))
    reports = {
        "ibp": verify_ibp(F, G, v, model, unit, N, SEED),
        "div_duality": verify_div_duality(F, G, v, model, unit, N, SEED),
        "generator": verify_generator(linear(chi), G, model, unit, N, SEED),
    }
    ok = all(r.passed for r in reports.values())
    criterion(8, ok, ", ".join(f"{k} {r.paired.mean:.2g}/{r.threshold:.2g}" for k, r in reports.items()))


def _closability_verdicts():
    cantor = indicator_of_intervals(fat_cantor_intervals(12))
    m = PotentialModel(SoftCore(1.0, 0.15))
    rho = ConstantIntensity(2.0)
    batch, _ = GibbsLaw(rho, m, unit, CHAIN).draw(RandomStream(SEED, ("c9",)), 10)
    return {
        "constant": closability_diagnostic(lambda x: np.ones_like(x), (0.0, 1.0)).to_dict(),
        "x^2": closability_diagnostic(lambda x: x * x, (0.0, 1.0)).to_dict(),
        "fat_cantor": closability_diagnostic(cantor, (0.0, 1.0)).to_dict(),
        "softcore": pair_potential_closability_check(m, rho, unit, batch).to_dict(),
    }


def test_c9_closability(criterion):
    first, second = _closability_verdicts(), _closability_verdicts()
    verdicts = {k: v["verdict"] for k, v in first.items()}
    expected = {"constant": "holds", "x^2": "holds", "fat_cantor": "fails", "softcore": "holds"}
    ok = verdicts == expected and first == second
    criterion(9, ok, f"{verdicts}, deterministic: {first == second}")


def test_c10_derivative_contracts(criterion):
    results = derivative_suite.run_suite(SEED)
    worst = max(results, key=results.get)
    bad = [k for k, v in results.items() if not v <= derivative_suite.RTOL]
    criterion(10, not bad, f"{len(results)} objects, worst {worst} {results[worst]:.2g} (tol 1e-5), failing: {bad or 'none'}")


def test_c11_reproducible_default_suite(criterion, tmp_path):
    config = ROOT / "configs" / "default_suite.toml"
    reports, times = [], []
    for name in ("first", "second"):
        t0 = time.perf_counter()
        proc = subprocess.run(
            [sys.executable, "-m", "confspace.cli", "run", str(config), "--out", str(tmp_path / name)],
            capture_output=True,
            text=True,
        )
        times.append(time.perf_counter() - t0)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        reports.append((tmp_path / name / "report.json").read_bytes())
    identical = reports[0] == reports[1]
    checks = len(json.loads(reports[0])["checks"])
    ok = identical and max(times) < 600.0
    criterion(11, ok, f"{checks} checks, byte-identical: {identical}, runtimes {times[0]:.0f}s and {times[1]:.0f}s (limit 600s)")
