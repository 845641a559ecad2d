"""Functionals of a configuration, vectorised over batches, with size bounds.

``bound(k)`` returns an upper bound of ``|f(gamma)|`` over configurations of
``k`` points, or None when no bound is known; the oracle uses it for its
truncation tail. ``active_box``, when present, bounds the region where the
functional depends on point positions; the oracle aligns its panels with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..calculus import CylinderFunction, Profile, Ridge, charlier_batch
from ..configuration import ConfigurationBatch
from ..space import SmoothTestFunction, Window, bounding_box

__all__ = ["ConstantFunctional", "CountFunctional", "CylinderFunctional", "LaplaceFunctional", "CharlierProduct"]


@dataclass(frozen=True)
class ConstantFunctional:
    c: float = 1.0

    def __call__(self, batch: ConfigurationBatch) -> np.ndarray:
        return np.full(len(batch), float(self.c))

    def bound(self, k: int) -> float:
        return abs(self.c)


@dataclass(frozen=True)
class CountFunctional:
    """``N_B``; with no box, the total number of points."""

    box: Optional[Window] = None

    def __call__(self, batch: ConfigurationBatch) -> np.ndarray:
        if self.box is None:
            return batch.counts.astype(float)
        return batch.count(self.box).astype(float)

    def bound(self, k: int) -> float:
        return float(k)

    @property
    def active_box(self) -> Optional[Window]:
        return self.box


@dataclass(frozen=True)
class CylinderFunctional:
    F: CylinderFunction
    sup: Optional[float] = None

    def __call__(self, batch: ConfigurationBatch) -> np.ndarray:
        return self.F.evaluate_batch(batch)

    def bound(self, k: int) -> Optional[float]:
        return self.sup

    @property
    def active_box(self) -> Optional[Window]:
        return self.F.support


def LaplaceFunctional(psi: SmoothTestFunction) -> CylinderFunctional:
    """``exp(-<gamma, psi>)``; bounded by 1 when ``psi >= 0``."""
    F = CylinderFunction((psi,), Ridge(Profile("expneg"), (1.0,)), psi.dim)
    return CylinderFunctional(F, 1.0)


@dataclass(frozen=True)
class CharlierProduct:
    """``Q_n(gamma; phi) * Q_m(gamma; psi)`` with precomputed ``<sigma, .>``."""

    n: int
    phi: SmoothTestFunction
    s_phi: float
    m: int
    psi: SmoothTestFunction
    s_psi: float

    def __call__(self, batch: ConfigurationBatch) -> np.ndarray:
        return charlier_batch(self.n, self.phi, self.s_phi, batch) * charlier_batch(self.m, self.psi, self.s_psi, batch)

    @staticmethod
    def _single(n: int, s: float, sup: float, k: int) -> float:
        return sum(math.comb(n, j) * abs(s) ** (n - j) * math.factorial(j) * math.comb(k, j) * sup**j for j in range(n + 1))

    def bound(self, k: int) -> float:
        return self._single(self.n, self.s_phi, self.phi.sup_abs(), k) * self._single(self.m, self.s_psi, self.psi.sup_abs(), k)

    @property
    def active_box(self) -> Optional[Window]:
        boxes = [f.support for order, f in ((self.n, self.phi), (self.m, self.psi)) if order > 0]
        return bounding_box(boxes) if boxes else None
