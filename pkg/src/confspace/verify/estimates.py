"""Monte Carlo estimates and paired identity reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import PreconditionError

__all__ = ["MonteCarloEstimate", "IdentityReport", "ABSOLUTE_FLOOR", "SIGMA_MULTIPLIER"]

SIGMA_MULTIPLIER = 3.0
ABSOLUTE_FLOOR = 1e-9


def _exact_mean(values: np.ndarray) -> float:
    if len(values) and np.all(values == values[0]):
        return float(values[0])
    return math.fsum(values.tolist()) / len(values)


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Sample mean with its standard error.

    ``n`` is the number of samples. For i.i.d. samples the standard error is
    ``std / sqrt(n)``; for Markov chain output it is the batch-means error
    over ``batches`` contiguous batches per replicate.
    """

    mean: float
    se: float
    n: int
    replicate_means: tuple = ()
    batches: int = 0

    @classmethod
    def from_values(cls, values, replicate_sizes: Sequence[int] | None = None, batches_per_replicate: int | None = None) -> "MonteCarloEstimate":
        values = np.asarray(values, dtype=float).reshape(-1)
        n = len(values)
        if n < 2:
            raise PreconditionError("need at least two samples for a standard error")
        sizes = list(replicate_sizes) if replicate_sizes is not None else [n]
        if sum(sizes) != n:
            raise PreconditionError("replicate sizes do not add up to the sample count")
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        reps = tuple(_exact_mean(values[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a)
        mean = _exact_mean(values)
        if batches_per_replicate:
            means = []
            for a, b in zip(bounds[:-1], bounds[1:]):
                for chunk in np.array_split(values[a:b], batches_per_replicate):
                    if len(chunk):
                        means.append(chunk.mean())
            means = np.asarray(means)
            se = float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else float("inf")
            return cls(mean, se, n, reps, len(means))
        # deviations from the correctly rounded mean: a constant sample gets se = 0 exactly
        dev = values - mean
        se = math.sqrt(math.fsum((dev * dev).tolist()) / (n - 1) / n)
        return cls(mean, se, n, reps, 0)

    @classmethod
    def exact(cls, value: float) -> "MonteCarloEstimate":
        """A deterministic quantity presented as an estimate with zero error."""
        return cls(float(value), 0.0, 0)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se}


@dataclass
class IdentityReport:
    """Paired comparison of the two sides of an identity.

    The verdict is ``|paired.mean| <= 3 * paired.se + 1e-9``.
    """

    identity: str
    lhs: MonteCarloEstimate
    rhs: MonteCarloEstimate
    paired: MonteCarloEstimate
    seed: int
    n: int
    runtime_ms: float = 0.0
    details: dict = field(default_factory=dict)
    rows: Optional[np.ndarray] = field(default=None, repr=False)
    inconclusive: bool = False

    @property
    def threshold(self) -> float:
        return SIGMA_MULTIPLIER * self.paired.se + ABSOLUTE_FLOOR

    @property
    def passed(self) -> bool:
        return abs(self.paired.mean) <= self.threshold

    @classmethod
    def from_pairs(cls, identity: str, lhs, rhs, seed: int, replicate_sizes=None, batches_per_replicate=None, **kw) -> "IdentityReport":
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        est = lambda v: MonteCarloEstimate.from_values(v, replicate_sizes, batches_per_replicate)
        return cls(identity, est(lhs), est(rhs), est(lhs - rhs), seed, len(lhs), rows=np.stack([lhs, rhs], axis=1), **kw)

    def to_dict(self, include_runtime: bool = False) -> dict:
        out = {
            "identity": self.identity,
            "lhs": self.lhs.to_dict(),
            "rhs": self.rhs.to_dict(),
            "paired": self.paired.to_dict(),
            "threshold": self.threshold,
            "pass": self.passed,
            "inconclusive": self.inconclusive,
            "seed": self.seed,
            "n": self.n,
        }
        if self.details:
            out["details"] = self.details
        if include_runtime:
            out["runtime_ms"] = self.runtime_ms
        return out
