"""Experiment manifests: parsing, object construction and check execution.

A manifest is a TOML file with named test functions, vector fields,
cylinder functions and potentials, plus a list of ``[[checks]]``. Every
reference is resolved at load time so configuration errors surface before
any sampling starts, with a message naming the offending key.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .calculus import ConstantOuter, CylinderFunction, Profile, ProductOfOuters, ProductOuter, Ridge, sigma_pair
from .errors import ConfigError, ConfspaceError
from .gibbs import HardCore, PotentialModel, SoftCore, ZeroPotential
from .sampler import GibbsChainParams
from .space import (
    Bump,
    BumpIntensity,
    ComponentField,
    ConstantIntensity,
    ExpQuadraticIntensity,
    GradientField,
    LinearCombination,
    PolyBump,
    PolynomialIntensity,
    RotationalField,
    Window,
    WindowPolynomial,
    ZeroField,
)
from .verify import (
    CharlierProduct,
    CountFunctional,
    GibbsLaw,
    HFunction,
    IdentityReport,
    OracleConfig,
    PoissonLaw,
    check_annihilation,
    closability_diagnostic,
    fat_cantor_intervals,
    indicator_of_intervals,
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
from .verify.identities import _Target, _paired

__all__ = ["CATALOG", "ExperimentConfig", "load_config", "run_checks"]


@dataclass(frozen=True)
class CatalogEntry:
    tag: str
    name: str
    statement: str
    parameters: str


CATALOG = {
    e.tag: e
    for e in [
        CatalogEntry(
            "mecke",
            "Mecke exchange formula for the Poisson process",
            "E[sum_{x in gamma} h(gamma, x)] = E[int h(gamma + x, x) rho(x) dx]",
            "h = {family = constant|laplace|cylinder, a, psi | F}, samples",
        ),
        CatalogEntry(
            "gnz",
            "Georgii-Nguyen-Zessin equation for the finite-volume Gibbs law",
            "E_mu[sum_{x in gamma} h(gamma, x)] = E_mu[int h(gamma + x, x) exp(-E_x(gamma + x)) rho(x) dx]",
            "h, potential, samples",
        ),
        CatalogEntry(
            "form_gibbs",
            "intrinsic form of a Gibbs law written with the add-one-point gradient",
            "E_mu[<grad F, grad G>_gamma] = E_mu[int <grad_x D_x F, grad_x D_x G> exp(-E_x(gamma + x)) rho(x) dx]",
            "F, G, potential, samples (inner supports one interaction range inside the window)",
        ),
        CatalogEntry(
            "form_poisson",
            "intrinsic form of the Poisson law written with the add-one-point gradient",
            "E[<grad F, grad G>_gamma] = E[int <grad_x D_x F, grad_x D_x G> rho(x) dx]",
            "F, G, samples",
        ),
        CatalogEntry(
            "chaos_orthogonality",
            "orthogonality of Charlier functions",
            "E[Q_n(phi) Q_m(psi)] = delta_nm n! (phi, psi)^n in L2(sigma)",
            "n, m in 0..3, phi, psi, samples",
        ),
        CatalogEntry(
            "ibp",
            "integration by parts on configuration space",
            "E[(D_v F) G] + E[F (D_v G)] + E[F G B_v] = 0 with B_v = sum_x <beta(x), v(x)> + div v(x)",
            "F, G, v, samples",
        ),
        CatalogEntry(
            "div_duality",
            "divergence as the adjoint of the directional derivative",
            "E[<G v, grad F>_gamma] = -E[F div(G v)]",
            "F, G, v, samples",
        ),
        CatalogEntry(
            "generator",
            "intrinsic Dirichlet operator on cylinder functions",
            "E[<grad F, grad G>_gamma] = E[(H F) G]",
            "F, G, samples (inner supports of F inside the window)",
        ),
        CatalogEntry(
            "closability",
            "local integrability of 1/density on a grid (three-valued heuristic)",
            "x is regular when 1/rho is integrable on a neighbourhood of x",
            "mode = density|potential, slice, interval, grid, potential, configurations",
        ),
        CatalogEntry(
            "oracle",
            "Monte Carlo versus truncated-series quadrature",
            "E[f] = exp(-sigma(w)) sum_k (1/k!) int_{w^k} f prod rho (Gibbs: weighted by exp(-E), divided by Z)",
            "functional = count|charlier_square, phi, potential, n_max, samples",
        ),
        CatalogEntry(
            "annihilation",
            "Charlier functions under the add-one-point gradient",
            "int D_x Q_n(gamma; phi) psi(x) rho(x) dx = n (phi, psi) Q_{n-1}(gamma; phi)",
            "phi, psi, orders, configurations, tolerance",
        ),
    ]
}


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


class _Section:
    """Dict wrapper that remembers its key path for error messages."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a table")
        self.data, self.path = data, path

    def key(self, name: str) -> str:
        return f"{self.path}.{name}" if self.path else name

    def get(self, name: str, default: Any = ..., kind: Callable | None = None):
        if name not in self.data:
            if default is ...:
                raise ConfigError(f"{self.key(name)}: missing required key")
            return default
        value = self.data[name]
        if kind is None:
            return value
        try:
            return kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.key(name)}: {exc}") from exc

    def sub(self, name: str, default: Any = ...) -> "_Section":
        value = self.get(name, default)
        return _Section(value if value is not None else {}, self.key(name))

    def check_keys(self, allowed) -> None:
        extra = sorted(set(self.data) - set(allowed))
        if extra:
            raise ConfigError(f"{self.key(extra[0])}: unknown key")


def _floats(value) -> tuple:
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(v) for v in value)


def _build(section: _Section, builders: dict, kind: str):
    family = section.get("family", kind=str)
    if family not in builders:
        raise ConfigError(f"{section.key('family')}: unknown {kind} family {family!r}")
    try:
        return builders[family](section)
    except ConfigError:
        raise
    except (ConfspaceError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{section.path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Configuration object
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Validated experiment manifest with all named objects constructed."""

    seed: int
    window: Window
    intensity: Any
    chain: GibbsChainParams
    samples: int
    gibbs_samples: int
    functions: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)
    cylinders: dict = field(default_factory=dict)
    potentials: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    source: str = ""

    @property
    def dimension(self) -> int:
        return self.window.dim


def _function_builders(window: Window, functions: dict) -> dict:
    def ref(section, key):
        name = section.get(key, kind=str)
        if name not in functions:
            raise ConfigError(f"{section.key(key)}: unknown function {name!r}")
        return functions[name]

    return {
        "bump": lambda s: Bump(_floats(s.get("center")), s.get("radius", kind=float), s.get("amplitude", 1.0, float)),
        "polybump": lambda s: PolyBump(
            _floats(s.get("center")),
            s.get("radius", kind=float),
            _floats(s.get("linear", ())),
            _floats(s.get("quadratic", ())),
            s.get("amplitude", 1.0, float),
        ),
        "polynomial": lambda s: WindowPolynomial(
            Window(_floats(s.get("lower", window.lower)), _floats(s.get("upper", window.upper))),
            tuple(_floats(c) for c in s.get("coeffs")),
        ),
        "combination": lambda s: LinearCombination(
            tuple((float(c), functions[n] if n in functions else (_ for _ in ()).throw(ConfigError(f"{s.key('terms')}: unknown function {n!r}"))) for c, n in s.get("terms"))
        ),
    }


def _intensity(section: _Section, dim: int):
    return _build(
        section,
        {
            "constant": lambda s: ConstantIntensity(s.get("z", kind=float), dim),
            "expquad": lambda s: ExpQuadraticIntensity(s.get("z", kind=float), _floats(s.get("center")), s.get("scale", kind=float)),
            "polynomial": lambda s: PolynomialIntensity(
                Window(_floats(s.get("lower")), _floats(s.get("upper"))), tuple(_floats(c) for c in s.get("coeffs"))
            ),
            "bump": lambda s: BumpIntensity(s.get("z", kind=float), _floats(s.get("center")), s.get("radius", kind=float), s.get("base", 0.0, float)),
        },
        "intensity",
    )


def _potential(section: _Section) -> PotentialModel:
    pair = _build(
        section,
        {
            "zero": lambda s: ZeroPotential(),
            "hardcore": lambda s: HardCore(s.get("r0", kind=float)),
            "softcore": lambda s: SoftCore(s.get("a", kind=float), s.get("r", kind=float), s.get("flat", None)),
        },
        "potential",
    )
    return PotentialModel(pair)


def _outer(section: _Section, n_inner: int):
    outer = section.get("outer", "ridge", str)
    if outer == "ridge":
        coef = _floats(section.get("coef", (1.0,) * n_inner))
        return Ridge(Profile(section.get("profile", "identity", str), _floats(section.get("poly", ()))), coef, section.get("offset", 0.0, float))
    if outer == "linear":
        return Ridge(Profile("identity"), _floats(section.get("coef", (1.0,) * n_inner)), section.get("offset", 0.0, float))
    if outer == "product":
        return ProductOuter(n_inner)
    if outer == "constant":
        return ConstantOuter(section.get("c", 1.0, float), n_inner)
    raise ConfigError(f"{section.key('outer')}: unknown outer family {outer!r}")


def load_config(path) -> ExperimentConfig:
    """Parse and validate a manifest; raises ConfigError naming the bad key."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, str(path))


def parse_config(raw: dict, source: str = "") -> ExperimentConfig:
    root = _Section(raw, "")
    root.check_keys(
        {"seed", "dimension", "samples", "gibbs_samples", "window", "intensity", "chain", "functions", "fields", "cylinders", "potentials", "checks"}
    )
    seed = root.get("seed", kind=int)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed: must fit in 64 unsigned bits")
    dim = root.get("dimension", 1, int)
    win = root.sub("window", {})
    try:
        window = Window(_floats(win.get("lower", (0.0,) * dim)), _floats(win.get("upper", (1.0,) * dim)))
    except ConfspaceError as exc:
        raise ConfigError(f"window: {exc}") from exc
    if window.dim != dim:
        raise ConfigError("window: corner length differs from dimension")
    intensity = _intensity(root.sub("intensity"), dim)
    ch = root.sub("chain", {})
    ch.check_keys({"burn_in", "thin", "p_birth", "p_death", "p_translate", "step", "max_rejections", "sweep_moves"})
    try:
        chain = GibbsChainParams(**{k: v for k, v in ch.data.items()})
    except (ConfspaceError, TypeError) as exc:
        raise ConfigError(f"chain: {exc}") from exc

    functions: dict = {}
    table = root.sub("functions", {})
    builders = _function_builders(window, functions)
    for name in table.data:
        functions[name] = _build(table.sub(name), builders, "function")

    fields: dict = {"zero": ZeroField(dim)}
    table = root.sub("fields", {})
    for name in table.data:
        s = table.sub(name)

        def fn(key, s=s):
            n = s.get(key, kind=str)
            if n not in functions:
                raise ConfigError(f"{s.key(key)}: unknown function {n!r}")
            return functions[n]

        def comps(s):
            out = []
            for n in s.get("components"):
                if n in ("zero", None, ""):
                    out.append(None)
                elif n in functions:
                    out.append(functions[n])
                else:
                    raise ConfigError(f"{s.key('components')}: unknown function {n!r}")
            return ComponentField(tuple(out))

        fields[name] = _build(
            s,
            {
                "components": comps,
                "gradient": lambda s: GradientField(fn("potential", s)),
                "rotational": lambda s: RotationalField(fn("potential", s)),
                "zero": lambda s: ZeroField(dim),
            },
            "field",
        )

    cylinders: dict = {}
    table = root.sub("cylinders", {})
    for name in table.data:
        s = table.sub(name)
        if s.get("outer", "ridge", str) == "product_of":
            parts = []
            for n in s.get("factors"):
                if n not in cylinders:
                    raise ConfigError(f"{s.key('factors')}: unknown cylinder {n!r} (define factors first)")
                parts.append(cylinders[n])
            cyl = parts[0]
            for p in parts[1:]:
                cyl = cyl * p
            cylinders[name] = cyl
            continue
        inner = []
        for n in s.get("inner", []):
            if n not in functions:
                raise ConfigError(f"{s.key('inner')}: unknown function {n!r}")
            inner.append(functions[n])
        try:
            cylinders[name] = CylinderFunction(tuple(inner), _outer(s, len(inner)), dim)
        except ConfigError:
            raise
        except ConfspaceError as exc:
            raise ConfigError(f"{s.path}: {exc}") from exc

    potentials: dict = {"zero": PotentialModel(ZeroPotential())}
    table = root.sub("potentials", {})
    for name in table.data:
        potentials[name] = _potential(table.sub(name))

    checks = raw.get("checks", [])
    if not isinstance(checks, list) or not checks:
        raise ConfigError("checks: at least one check is required")
    cfg = ExperimentConfig(
        seed,
        window,
        intensity,
        chain,
        root.get("samples", 100_000, int),
        root.get("gibbs_samples", 10_000, int),
        functions,
        fields,
        cylinders,
        potentials,
        [],
        source,
    )
    for i, c in enumerate(checks):
        cfg.checks.append(_validate_check(cfg, _Section(c, f"checks[{i}]")))
    return cfg


_CHECK_KEYS = {
    "mecke": {"h", "samples"},
    "gnz": {"h", "potential", "samples"},
    "form_poisson": {"F", "G", "samples"},
    "form_gibbs": {"F", "G", "potential", "samples"},
    "ibp": {"F", "G", "v", "samples"},
    "div_duality": {"F", "G", "v", "samples"},
    "generator": {"F", "G", "samples"},
    "chaos_orthogonality": {"n", "m", "phi", "psi", "samples"},
    "closability": {"mode", "slice", "interval", "grid", "potential", "configurations", "floor", "threshold"},
    "oracle": {"functional", "phi", "potential", "n_max", "samples"},
    "annihilation": {"phi", "psi", "orders", "configurations", "tolerance"},
}


def _validate_check(cfg: ExperimentConfig, s: _Section) -> dict:
    tag = s.get("identity", kind=str)
    if tag not in CATALOG:
        raise ConfigError(f"{s.key('identity')}: unknown identity {tag!r}")
    s.check_keys(_CHECK_KEYS[tag] | {"identity", "label"})
    out = {"identity": tag, "label": s.get("label", tag, str)}

    def named(key, table, what, default=...):
        name = s.get(key, default)
        if name is None:
            return None
        if name not in table:
            raise ConfigError(f"{s.key(key)}: unknown {what} {name!r}")
        return table[name]

    if "samples" in _CHECK_KEYS[tag]:
        gibbs = tag in ("gnz", "form_gibbs") or (tag == "oracle" and s.get("potential", None) not in (None, "zero"))
        out["samples"] = s.get("samples", cfg.gibbs_samples if gibbs else cfg.samples, int)
    if tag in ("mecke", "gnz"):
        h = s.sub("h")
        h.check_keys({"family", "a", "psi", "F"})
        a = named_in(h, "a", cfg.functions, "function")
        family = h.get("family", kind=str)
        if family == "constant":
            out["h"] = HFunction.constant(a)
        elif family == "laplace":
            out["h"] = HFunction.laplace(a, named_in(h, "psi", cfg.functions, "function"))
        elif family == "cylinder":
            out["h"] = HFunction.cylinder(a, named_in(h, "F", cfg.cylinders, "cylinder"))
        else:
            raise ConfigError(f"{h.key('family')}: unknown h family {family!r}")
    if tag in ("gnz", "form_gibbs"):
        out["potential"] = named("potential", cfg.potentials, "potential")
    if tag in ("form_poisson", "form_gibbs", "ibp", "div_duality", "generator"):
        out["F"] = named("F", cfg.cylinders, "cylinder")
        out["G"] = named("G", cfg.cylinders, "cylinder")
    if tag in ("ibp", "div_duality"):
        out["v"] = named("v", cfg.fields, "field")
    if tag == "chaos_orthogonality":
        out["n"], out["m"] = s.get("n", kind=int), s.get("m", kind=int)
        out["phi"] = named("phi", cfg.functions, "function")
        out["psi"] = named("psi", cfg.functions, "function")
    if tag == "annihilation":
        out["phi"] = named("phi", cfg.functions, "function")
        out["psi"] = named("psi", cfg.functions, "function")
        out["orders"] = tuple(int(v) for v in s.get("orders", [1, 2, 3]))
        out["configurations"] = s.get("configurations", 100, int)
        out["tolerance"] = s.get("tolerance", 1e-4, float)
    if tag == "oracle":
        out["functional"] = s.get("functional", "count", str)
        if out["functional"] not in ("count", "charlier_square"):
            raise ConfigError(f"{s.key('functional')}: unknown functional {out['functional']!r}")
        out["phi"] = named("phi", cfg.functions, "function", None)
        if out["functional"] == "charlier_square" and out["phi"] is None:
            raise ConfigError(f"{s.key('phi')}: charlier_square needs a function")
        out["potential"] = named("potential", cfg.potentials, "potential", None)
        out["n_max"] = s.get("n_max", 6, int)
    if tag == "closability":
        out["mode"] = s.get("mode", "density", str)
        if out["mode"] == "density":
            sl = s.sub("slice", {"family": "intensity"})
            fam = sl.get("family", kind=str)
            if fam == "intensity":
                if cfg.dimension != 1:
                    raise ConfigError(f"{sl.key('family')}: the intensity slice needs dimension 1")
                out["density"] = cfg.intensity.density
            elif fam == "fat_cantor":
                out["density"] = indicator_of_intervals(fat_cantor_intervals(sl.get("depth", 12, int)))
            elif fam == "power":
                p = sl.get("exponent", kind=float)
                out["density"] = lambda x, p=p: np.abs(x) ** p
            else:
                raise ConfigError(f"{sl.key('family')}: unknown slice family {fam!r}")
            out["interval"] = _floats(s.get("interval", (cfg.window.lower[0], cfg.window.upper[0])))
            out["grid"] = s.get("grid", 100, int)
            out["floor"] = s.get("floor", 1e-12, float)
            out["threshold"] = s.get("threshold", 1e6, float)
        elif out["mode"] == "potential":
            out["potential"] = named("potential", cfg.potentials, "potential")
            out["configurations"] = s.get("configurations", 20, int)
            out["grid"] = s.get("grid", 100, int)
        else:
            raise ConfigError(f"{s.key('mode')}: unknown closability mode {out['mode']!r}")
    return out


def named_in(section: _Section, key: str, table: dict, what: str):
    name = section.get(key, kind=str)
    if name not in table:
        raise ConfigError(f"{section.key(key)}: unknown {what} {name!r}")
    return table[name]


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    label: str
    identity: str
    payload: dict
    passed: bool
    inconclusive: bool
    runtime_ms: float
    replicate_rows: list = field(default_factory=list)


def _from_identity(label: str, report: IdentityReport) -> CheckResult:
    payload = report.to_dict()
    payload["label"] = label
    rows = [
        {"replicate": r, "lhs_mean": a, "rhs_mean": b, "paired_mean": c}
        for r, (a, b, c) in enumerate(zip(report.lhs.replicate_means, report.rhs.replicate_means, report.paired.replicate_means))
    ]
    return CheckResult(label, report.identity, payload, report.passed, report.inconclusive, report.runtime_ms, rows)


def run_check(cfg: ExperimentConfig, check: dict, workers: int | None = None) -> CheckResult:
    tag, label = check["identity"], check["label"]
    seed, w, rho = cfg.seed, cfg.window, cfg.intensity
    t0 = time.perf_counter()
    if tag == "mecke":
        return _from_identity(label, verify_mecke(check["h"], rho, w, check["samples"], seed, workers))
    if tag == "gnz":
        return _from_identity(label, verify_gnz(check["h"], rho, check["potential"], w, cfg.chain, check["samples"], seed, workers))
    if tag == "form_poisson":
        return _from_identity(label, verify_form_poisson(check["F"], check["G"], rho, w, check["samples"], seed, workers))
    if tag == "form_gibbs":
        return _from_identity(label, verify_form_gibbs(check["F"], check["G"], rho, check["potential"], w, cfg.chain, check["samples"], seed, workers))
    if tag == "ibp":
        return _from_identity(label, verify_ibp(check["F"], check["G"], check["v"], rho, w, check["samples"], seed, workers))
    if tag == "div_duality":
        return _from_identity(label, verify_div_duality(check["F"], check["G"], check["v"], rho, w, check["samples"], seed, workers))
    if tag == "generator":
        return _from_identity(label, verify_generator(check["F"], check["G"], rho, w, check["samples"], seed, workers))
    if tag == "chaos_orthogonality":
        return _from_identity(
            label, verify_chaos_orthogonality(check["n"], check["m"], check["phi"], check["psi"], rho, w, check["samples"], seed, workers)
        )
    if tag == "oracle":
        m = check["potential"]
        if check["functional"] == "count":
            functional = CountFunctional()
        else:
            phi = check["phi"]
            s = sigma_pair(phi, rho, w)
            functional = CharlierProduct(1, phi, s, 1, phi, s)
        result = oracle_expectation(functional, rho, m, w, OracleConfig(n_max=check["n_max"]))
        law = PoissonLaw(rho, w) if m is None or m.is_zero else GibbsLaw(rho, m, w, cfg.chain)
        report = _paired("oracle", law, _Target(functional, result.value), check["samples"], seed, workers, {"oracle": result.to_dict()})
        report.inconclusive = result.inconclusive
        return _from_identity(label, report)
    if tag == "annihilation":
        rep = check_annihilation(check["phi"], check["psi"], rho, w, seed, check["orders"], check["configurations"], check["tolerance"])
        payload = rep.to_dict()
        payload["label"] = label
        return CheckResult(label, tag, payload, rep.passed, False, (time.perf_counter() - t0) * 1e3)
    if tag == "closability":
        if check["mode"] == "density":
            rep = closability_diagnostic(check["density"], check["interval"], check["grid"], check["floor"], check["threshold"])
        else:
            law = GibbsLaw(rho, check["potential"], w, cfg.chain)
            batch, _ = law.draw(_stream(seed, "closability"), check["configurations"])
            rep = pair_potential_closability_check(check["potential"], rho, w, batch, check["grid"])
        payload = rep.to_dict()
        payload["label"] = label
        return CheckResult(label, tag, payload, rep.passed, rep.verdict == "inconclusive", (time.perf_counter() - t0) * 1e3)
    raise ConfigError(f"unknown identity {tag!r}")


def _stream(seed, tag):
    from .sampler import RandomStream

    return RandomStream(seed, (tag,))


def run_checks(cfg: ExperimentConfig, workers: int | None = None) -> list[CheckResult]:
    return [run_check(cfg, c, workers) for c in cfg.checks]
