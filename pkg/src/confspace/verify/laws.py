"""Sampling laws used by the checkers and the replicate runner."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..configuration import ConfigurationBatch
from ..errors import PreconditionError
from ..gibbs import PotentialModel, ZeroPotential
from ..sampler import GibbsChainParams, RandomStream, sample_gibbs_batch, sample_poisson_batch
from ..space import IntensityModel, Window

__all__ = ["PoissonLaw", "GibbsLaw", "split_sizes", "run_replicates", "DEFAULT_REPLICATES"]

DEFAULT_REPLICATES = 4


@dataclass(frozen=True)
class PoissonLaw:
    """Poisson point process with density ``model`` restricted to ``window``."""

    model: IntensityModel
    window: Window
    replicates: int = DEFAULT_REPLICATES

    @property
    def potential(self) -> PotentialModel:
        return PotentialModel(ZeroPotential())

    @property
    def iid(self) -> bool:
        return True

    @property
    def batches(self) -> Optional[int]:
        return None

    def draw(self, stream: RandomStream, k: int):
        return sample_poisson_batch(self.model, self.window, stream, k), None


@dataclass(frozen=True)
class GibbsLaw:
    """Finite-volume Gibbs law with empty boundary, one chain per replicate.

    With the zero potential the law is the Poisson law, and draws are routed
    through the exact Poisson sampler so results coincide bit for bit with
    the Poisson checkers. Chain output is summarised with ``batches``
    batch means per chain.
    """

    model: IntensityModel
    potential: PotentialModel
    window: Window
    params: GibbsChainParams = field(default_factory=GibbsChainParams)
    replicates: int = DEFAULT_REPLICATES
    batches_per_chain: int = 10

    @property
    def iid(self) -> bool:
        return self.potential.is_zero

    @property
    def batches(self) -> Optional[int]:
        return None if self.iid else self.batches_per_chain

    def draw(self, stream: RandomStream, k: int):
        if self.potential.is_zero:
            return sample_poisson_batch(self.model, self.window, stream, k), None
        return sample_gibbs_batch(self.model, self.potential, self.window, self.params, stream, k)


def split_sizes(n: int, replicates: int) -> list[int]:
    """Sizes of ``replicates`` near-equal blocks adding up to ``n``."""
    if replicates < 1 or n < replicates:
        raise PreconditionError("need at least one sample per replicate")
    base, extra = divmod(n, replicates)
    return [base + (r < extra) for r in range(replicates)]


def _replicate(law, evaluator, seed: int, r: int, size: int):
    batch, diag = law.draw(RandomStream(seed, (r,)), size)
    return evaluator(batch), diag


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("CONFSPACE_WORKERS", "1")))
    except ValueError:
        return 1


def run_replicates(law, evaluator: Callable[[ConfigurationBatch], tuple], n: int, seed: int, workers: int | None = None):
    """Draw ``n`` samples in fixed replicate blocks and evaluate each block.

    Replicate ``r`` always uses stream ``(seed, (r,))`` and the same block
    size, so results do not depend on ``workers``.

    Returns
    -------
    columns : list of tuples of arrays, one tuple per replicate
    sizes : list of int
    diagnostics : list of ChainDiagnostics or None
    """
    sizes = split_sizes(n, law.replicates)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(sizes) == 1:
        results = [_replicate(law, evaluator, seed, r, k) for r, k in enumerate(sizes)]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(sizes))) as pool:
            futures = [pool.submit(_replicate, law, evaluator, seed, r, k) for r, k in enumerate(sizes)]
            results = [f.result() for f in futures]
    return [c for c, _ in results], sizes, [d for _, d in results]
