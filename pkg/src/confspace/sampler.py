"""Exact Poisson sampling and birth-death-translate MCMC for finite-volume Gibbs laws."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .configuration import Configuration, ConfigurationBatch, _lex_order
from .errors import ChainStuckError, PreconditionError
from .gibbs import PotentialModel
from .space import IntensityModel, Window, intensity_mass

__all__ = [
    "RandomStream",
    "replicate_streams",
    "sample_poisson",
    "sample_poisson_batch",
    "GibbsChainParams",
    "ChainDiagnostics",
    "GibbsChain",
    "sample_gibbs",
    "sample_gibbs_batch",
    "integrated_autocorrelation",
]


def _path_entry(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise PreconditionError("stream path entries must be non-negative")
        return int(tag)
    return zlib.crc32(str(tag).encode())


class RandomStream:
    """Reproducible random stream addressed by ``(seed, path)``.

    The path is a tuple of non-negative ints or string tags (hashed to ints).
    Streams with different paths are independent by the SeedSequence spawn
    construction, and equal addresses always give identical draws.
    """

    def __init__(self, seed: int, path=()):
        if not 0 <= int(seed) < 2**64:
            raise PreconditionError("seed must fit in 64 unsigned bits")
        self.seed = int(seed)
        self.path = tuple(_path_entry(p) for p in path)
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.path)))

    def substream(self, *path) -> "RandomStream":
        return RandomStream(self.seed, self.path + tuple(path))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path})"


def replicate_streams(seed: int, k: int) -> list[RandomStream]:
    """Streams ``(seed, (i,))`` for ``i < k``; independent of any worker count."""
    if k < 1:
        raise PreconditionError("need at least one replicate stream")
    return [RandomStream(seed, (i,)) for i in range(k)]


def _rng(stream) -> np.random.Generator:
    return getattr(stream, "generator", stream)


def _sampling_box(model: IntensityModel, w: Window) -> Optional[Window]:
    return w if model.support is None else w.intersect(model.support)


def _draw_points(model: IntensityModel, box: Window, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. points with density proportional to rho on ``box``."""
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    if model.is_constant or n == 0:
        return rng.uniform(lo, hi, size=(n, box.dim))
    bound = model.sup(box)
    if not (bound > 0 and math.isfinite(bound)):
        raise PreconditionError(f"no usable sup bound for {type(model).__name__}")
    out, have = [], 0
    while have < n:
        m = max(16, int(1.3 * (n - have) * bound * box.volume / max(intensity_mass(model, box), 1e-300)))
        cand = rng.uniform(lo, hi, size=(m, box.dim))
        keep = cand[rng.uniform(size=m) * bound < model.density(cand)]
        out.append(keep[: n - have])
        have += len(out[-1])
    return np.concatenate(out)


def sample_poisson(model: IntensityModel, w: Window, stream) -> Configuration:
    """One Poisson configuration on ``w``: Poisson count, then rejection placement."""
    rng = _rng(stream)
    sigma = intensity_mass(model, w)
    box = _sampling_box(model, w)
    n = int(rng.poisson(sigma)) if sigma > 0 else 0
    if n == 0 or box is None:
        return Configuration((), w.dim)
    return Configuration(_draw_points(model, box, n, rng), w.dim)


def sample_poisson_batch(model: IntensityModel, w: Window, stream, k: int) -> ConfigurationBatch:
    """``k`` independent Poisson configurations packed in a batch."""
    rng = _rng(stream)
    sigma = intensity_mass(model, w)
    box = _sampling_box(model, w)
    counts = rng.poisson(sigma, size=k) if sigma > 0 and box is not None else np.zeros(k, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    total = int(offsets[-1])
    pts = _draw_points(model, box, total, rng) if total else np.empty((0, w.dim))
    owner = np.repeat(np.arange(k), counts)
    order = np.lexsort(tuple(pts.T[::-1]) + (owner,)) if total else np.arange(0)
    return ConfigurationBatch(pts[order], offsets, w.dim)


# ---------------------------------------------------------------------------
# Gibbs sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GibbsChainParams:
    """Birth-death-translate chain settings.

    A sweep is ``sweep_moves`` single moves; by default
    ``max(1, ceil(sigma(w)))``, i.e. about one move per expected point.
    """

    burn_in: int = 10_000
    thin: int = 10
    p_birth: float = 0.35
    p_death: float = 0.35
    p_translate: float = 0.3
    step: float = 0.1
    max_rejections: int = 1_000_000
    sweep_moves: Optional[int] = None

    def __post_init__(self):
        probs = (self.p_birth, self.p_death, self.p_translate)
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise PreconditionError("move probabilities must be non-negative and sum to 1")
        if self.p_birth != self.p_death:
            raise PreconditionError("birth and death probabilities must be equal")
        if self.burn_in < 0 or self.thin < 1 or self.step <= 0 or self.max_rejections < 1:
            raise PreconditionError("invalid burn-in, thinning, step or rejection limit")
        if self.sweep_moves is not None and self.sweep_moves < 1:
            raise PreconditionError("sweep_moves must be positive")


@dataclass
class ChainDiagnostics:
    """Acceptance statistics and mixing summary of one or more chains."""

    proposed: dict = field(default_factory=lambda: {"birth": 0, "death": 0, "translate": 0})
    accepted: dict = field(default_factory=lambda: {"birth": 0, "death": 0, "translate": 0})
    mean_population: float = 0.0
    iact: float = float("nan")
    samples: int = 0
    moves_per_sweep: int = 1

    @property
    def acceptance(self) -> dict:
        return {k: (self.accepted[k] / self.proposed[k] if self.proposed[k] else 0.0) for k in self.proposed}

    def merge(self, other: "ChainDiagnostics") -> "ChainDiagnostics":
        total = self.samples + other.samples
        mean = (self.mean_population * self.samples + other.mean_population * other.samples) / total if total else 0.0
        iacts = [v for v in (self.iact, other.iact) if math.isfinite(v)]
        return ChainDiagnostics(
            {k: self.proposed[k] + other.proposed[k] for k in self.proposed},
            {k: self.accepted[k] + other.accepted[k] for k in self.accepted},
            mean,
            max(iacts) if iacts else float("nan"),
            total,
            self.moves_per_sweep,
        )

    def to_dict(self) -> dict:
        return {
            "acceptance": self.acceptance,
            "proposed": dict(self.proposed),
            "mean_population": self.mean_population,
            "iact": self.iact,
            "samples": self.samples,
            "moves_per_sweep": self.moves_per_sweep,
        }


def integrated_autocorrelation(series, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's adaptive window."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 4:
        return float("nan")
    x = x - x.mean()
    var = x @ x / n
    if var == 0:
        return 1.0
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acf = np.fft.irfft(f * np.conj(f), size)[:n] / (n * var)
    tau = 1.0
    for m in range(1, n):
        tau += 2.0 * acf[m]
        if m >= c * tau:
            break
    return max(float(tau), 1e-12)


class GibbsChain:
    """Metropolis-Hastings chain targeting ``exp(-E_w) d(pi_sigma)`` on ``w``.

    Moves: birth at ``x ~ rho / sigma(w)``, death of a uniformly chosen point,
    Gaussian translation of a uniformly chosen point. Points of an optional
    frozen ``boundary`` configuration interact with the window points but
    never move. The state is kept as Python lists; populations are small.
    """

    _BUF = 4096

    def __init__(
        self,
        model: IntensityModel,
        m: PotentialModel,
        w: Window,
        params: GibbsChainParams,
        stream,
        boundary: Configuration | None = None,
    ):
        self.model, self.potential, self.window, self.params = model, m, w, params
        self.rng = _rng(stream)
        self.dim = w.dim
        self.sigma = intensity_mass(model, w)
        self.box = _sampling_box(model, w)
        self.sweep = params.sweep_moves or max(1, math.ceil(self.sigma))
        self._bound = model.sup(self.box) if self.box is not None and not model.is_constant else None
        self._pair = m.pair
        self._range = m.pair.range
        self._zero = m.is_zero
        self.boundary = [] if boundary is None else [tuple(map(float, p)) for p in boundary.points if not np.all(w.contains(p))]
        self.points: list[tuple] = []
        self.dens: list[float] = []
        self.diag = ChainDiagnostics(moves_per_sweep=self.sweep)
        self._u = np.empty(0)
        self._ui = 0
        self._g = np.empty(0)
        self._gi = 0
        self._stuck = 0
        if self.sigma <= 0 or self.box is None:
            self._dead = True
        else:
            self._dead = False

    # -- buffered randomness ------------------------------------------------

    def _uniform(self) -> float:
        if self._ui >= len(self._u):
            self._u = self.rng.uniform(size=self._BUF).tolist()
            self._ui = 0
        v = self._u[self._ui]
        self._ui += 1
        return v

    def _normal(self) -> float:
        if self._gi >= len(self._g):
            self._g = self.rng.normal(size=self._BUF).tolist()
            self._gi = 0
        v = self._g[self._gi]
        self._gi += 1
        return v

    # -- model helpers ------------------------------------------------------

    def _density(self, x: tuple) -> float:
        return float(self.model.density(np.array(x)))

    def _propose_birth(self) -> tuple[tuple, float]:
        lo, hi = self.box.lower, self.box.upper
        while True:
            x = tuple(lo[i] + (hi[i] - lo[i]) * self._uniform() for i in range(self.dim))
            if self.model.is_constant:
                return x, float(self.model.z)
            rho = self._density(x)
            if self._uniform() * self._bound < rho:
                return x, rho

    def _energy(self, x: tuple, skip: int = -1) -> float:
        """Energy of ``x`` against the state (minus index ``skip``) and boundary."""
        if self._zero:
            return 0.0
        e = 0.0
        pair, reach = self._pair, self._range
        for pts, offset in ((self.points, skip), (self.boundary, -1)):
            for k, p in enumerate(pts):
                if k == offset:
                    continue
                dist = math.dist(x, p)
                if dist < reach:
                    v = pair.scalar(dist)
                    if v == math.inf:
                        return math.inf
                    e += v
        return e

    # -- moves --------------------------------------------------------------

    def _accept(self, kind: str, ok: bool) -> None:
        self.diag.proposed[kind] += 1
        if ok:
            self.diag.accepted[kind] += 1
            self._stuck = 0
        else:
            self._stuck += 1
            if self._stuck > self.params.max_rejections:
                raise ChainStuckError(f"{self._stuck} consecutive rejections")

    def step(self) -> None:
        """One Metropolis-Hastings move."""
        if self._dead:
            return
        p = self.params
        u = self._uniform()
        n = len(self.points)
        if u < p.p_birth:
            x, rho = self._propose_birth()
            de = self._energy(x)
            ok = de != math.inf and self._uniform() * (n + 1) < self.sigma * math.exp(-de)
            if ok:
                self.points.append(x)
                self.dens.append(rho)
            self._accept("birth", ok)
        elif u < p.p_birth + p.p_death:
            if n == 0:
                self._accept("death", False)
                return
            i = min(int(self._uniform() * n), n - 1)
            de = self._energy(self.points[i], skip=i)
            ok = self._uniform() * self.sigma < n * math.exp(de)
            if ok:
                self.points[i] = self.points[-1]
                self.dens[i] = self.dens[-1]
                self.points.pop()
                self.dens.pop()
            self._accept("death", ok)
        else:
            if n == 0:
                self._accept("translate", False)
                return
            i = min(int(self._uniform() * n), n - 1)
            old = self.points[i]
            new = tuple(old[k] + p.step * self._normal() for k in range(self.dim))
            lo, hi = self.window.lower, self.window.upper
            if any(new[k] < lo[k] or new[k] > hi[k] for k in range(self.dim)):
                self._accept("translate", False)
                return
            rho_new = float(self.model.z) if self.model.is_constant else self._density(new)
            if rho_new <= 0:
                self._accept("translate", False)
                return
            e_new = self._energy(new, skip=i)
            if e_new == math.inf:
                self._accept("translate", False)
                return
            e_old = self._energy(old, skip=i)
            ratio = rho_new / self.dens[i] * math.exp(e_old - e_new)
            ok = self._uniform() < ratio
            if ok:
                self.points[i] = new
                self.dens[i] = rho_new
            self._accept("translate", ok)

    def run_sweeps(self, sweeps: int) -> None:
        for _ in range(sweeps * self.sweep):
            self.step()

    def state(self) -> Configuration:
        return Configuration(np.array(self.points).reshape(-1, self.dim), self.dim)

    def sample(self, n_samples: int) -> tuple[list[Configuration], ChainDiagnostics]:
        """Burn in, then record ``n_samples`` states ``thin`` sweeps apart."""
        self.run_sweeps(self.params.burn_in)
        out, sizes = [], []
        for _ in range(n_samples):
            self.run_sweeps(self.params.thin)
            out.append(self.state())
            sizes.append(len(self.points))
        self.diag.samples = n_samples
        self.diag.mean_population = float(np.mean(sizes)) if sizes else 0.0
        self.diag.iact = integrated_autocorrelation(sizes)
        return out, self.diag


def sample_gibbs(
    model: IntensityModel,
    m: PotentialModel,
    w: Window,
    params: GibbsChainParams,
    stream,
    boundary: Configuration | None = None,
) -> tuple[Configuration, ChainDiagnostics]:
    """Run one chain through burn-in and return its final state."""
    chain = GibbsChain(model, m, w, params, stream, boundary)
    configs, diag = chain.sample(1)
    return configs[0], diag


def sample_gibbs_batch(
    model: IntensityModel,
    m: PotentialModel,
    w: Window,
    params: GibbsChainParams,
    stream,
    n_samples: int,
    boundary: Configuration | None = None,
) -> tuple[ConfigurationBatch, ChainDiagnostics]:
    """``n_samples`` thinned states of one chain packed in a batch."""
    chain = GibbsChain(model, m, w, params, stream, boundary)
    configs, diag = chain.sample(n_samples)
    return ConfigurationBatch.from_configurations(configs, w.dim), diag
