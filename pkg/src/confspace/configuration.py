"""Finite configurations of distinct points and their elementary functionals."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import PreconditionError
from .space import Window, as_points

__all__ = ["Configuration", "ConfigurationBatch", "pair", "count", "add_point", "remove_point"]


def _lex_order(points: np.ndarray) -> np.ndarray:
    # np.lexsort treats its last key as primary
    return np.lexsort(points.T[::-1]) if len(points) else np.arange(0)


class Configuration:
    """A finite set of distinct points in R^d, stored in lexicographic order.

    Parameters
    ----------
    points : array_like, shape (n, d)
        Point coordinates. In one dimension a flat sequence is accepted.
    dim : int
        Ambient dimension; needed to type the empty configuration.
    """

    __slots__ = ("_points", "_dim", "_hash")

    def __init__(self, points=(), dim: int = 1):
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            pts = np.empty((0, dim))
        elif dim == 1 and pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] != dim:
            raise PreconditionError(f"points of shape {pts.shape} do not fit dimension {dim}")
        if not np.all(np.isfinite(pts)):
            raise PreconditionError("configuration points must be finite")
        pts = pts[_lex_order(pts)]
        if len(pts) > 1 and np.any(np.all(pts[1:] == pts[:-1], axis=1)):
            raise PreconditionError("configuration points must be pairwise distinct")
        pts.setflags(write=False)
        self._points = pts
        self._dim = dim
        self._hash = None

    @classmethod
    def _trusted(cls, pts: np.ndarray, dim: int) -> "Configuration":
        # caller guarantees pts are sorted and distinct, and hands over ownership
        obj = cls.__new__(cls)
        pts.setflags(write=False)
        obj._points, obj._dim, obj._hash = pts, dim, None
        return obj

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def dim(self) -> int:
        return self._dim

    def __len__(self) -> int:
        return len(self._points)

    def __iter__(self):
        return iter(self._points)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self._dim == other._dim and np.array_equal(self._points, other._points)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._dim, self._points.tobytes()))
        return self._hash

    def __repr__(self) -> str:
        return f"Configuration(n={len(self)}, dim={self._dim})"

    def index_of(self, x) -> int:
        """Row index of point ``x``, or -1 when absent."""
        x = as_points(x, self._dim).reshape(self._dim)
        hits = np.flatnonzero(np.all(self._points == x, axis=1))
        return int(hits[0]) if len(hits) else -1

    def __contains__(self, x) -> bool:
        return self.index_of(x) >= 0

    def pair(self, phi) -> float:
        """``<phi, gamma> = sum of phi(x) over x in gamma``."""
        if not len(self._points):
            return 0.0
        return math.fsum(np.asarray(phi.value(self._points), dtype=float).tolist())

    def count(self, b: Window) -> int:
        """Number of points inside the closed box ``b``."""
        if not len(self._points):
            return 0
        return int(np.count_nonzero(b.contains(self._points)))

    def add_point(self, x) -> "Configuration":
        x = as_points(x, self._dim).reshape(1, self._dim)
        if x[0] in self:
            raise PreconditionError("point already in configuration")
        pts = np.concatenate([self._points, x])
        return Configuration._trusted(pts[_lex_order(pts)], self._dim)

    def remove_point(self, x) -> "Configuration":
        i = self.index_of(x)
        if i < 0:
            raise PreconditionError("point not in configuration")
        return self.without(i)

    def without(self, i: int) -> "Configuration":
        """Configuration with the ``i``-th point (canonical order) removed."""
        return Configuration._trusted(np.delete(self._points, i, axis=0), self._dim)

    def restrict(self, b: Window) -> "Configuration":
        return Configuration._trusted(self._points[b.contains(self._points)].copy(), self._dim)

    def min_distance(self) -> float:
        """Smallest pairwise distance, ``inf`` for fewer than two points."""
        if len(self) < 2:
            return math.inf
        diff = self._points[:, None, :] - self._points[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        return float(dist[np.triu_indices(len(self), 1)].min())

    # --- serialization -----------------------------------------------------

    def to_csv(self, path=None) -> str:
        """Rows ``x1,...,xd`` in canonical order; written to ``path`` if given."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in self._points:
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path, dim: int | None = None) -> "Configuration":
        return cls.from_csv_text(Path(path).read_text(), dim)

    @classmethod
    def from_csv_text(cls, text: str, dim: int | None = None) -> "Configuration":
        rows = [list(map(float, r)) for r in csv.reader(io.StringIO(text)) if r]
        if not rows:
            if dim is None:
                raise PreconditionError("empty CSV needs an explicit dimension")
            return cls((), dim)
        return cls(np.array(rows), len(rows[0]) if dim is None else dim)


def pair(gamma: Configuration, phi) -> float:
    return gamma.pair(phi)


def count(gamma: Configuration, b: Window) -> int:
    return gamma.count(b)


def add_point(gamma: Configuration, x) -> Configuration:
    return gamma.add_point(x)


def remove_point(gamma: Configuration, x) -> Configuration:
    return gamma.remove_point(x)


class ConfigurationBatch:
    """Many configurations packed into one point array for vectorised work.

    ``points[offsets[k]:offsets[k + 1]]`` is configuration ``k``; ``owner``
    maps every point row to its configuration.
    """

    def __init__(self, points: np.ndarray, offsets: np.ndarray, dim: int):
        self.points = np.asarray(points, dtype=float).reshape(-1, dim)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.dim = dim
        self.counts = np.diff(self.offsets)
        self.owner = np.repeat(np.arange(len(self.counts)), self.counts)

    @classmethod
    def from_configurations(cls, configs: Sequence[Configuration], dim: int | None = None) -> "ConfigurationBatch":
        if dim is None:
            if not configs:
                raise PreconditionError("empty batch needs an explicit dimension")
            dim = configs[0].dim
        sizes = [len(c) for c in configs]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        pts = np.concatenate([c.points for c in configs]) if configs else np.empty((0, dim))
        return cls(pts, offsets, dim)

    def __len__(self) -> int:
        return len(self.counts)

    def __getitem__(self, k: int) -> Configuration:
        lo, hi = self.offsets[k], self.offsets[k + 1]
        return Configuration._trusted(self.points[lo:hi].copy(), self.dim)

    def __iter__(self) -> Iterable[Configuration]:
        return (self[k] for k in range(len(self)))

    def chunks(self, size: int):
        """Yield ``(start, sub_batch)`` for consecutive blocks of configurations."""
        for start in range(0, len(self), size):
            stop = min(start + size, len(self))
            lo, hi = self.offsets[start], self.offsets[stop]
            yield start, ConfigurationBatch(self.points[lo:hi], self.offsets[start : stop + 1] - lo, self.dim)

    def sum_rows(self, values: np.ndarray) -> np.ndarray:
        """Per-configuration sums of a per-point quantity (leading axis = points)."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            return np.bincount(self.owner, weights=values, minlength=len(self))
        out = np.zeros((len(self),) + values.shape[1:])
        np.add.at(out, self.owner, values)
        return out

    def pair(self, phi) -> np.ndarray:
        return self.sum_rows(phi.value(self.points))

    def pair_many(self, phis: Sequence) -> np.ndarray:
        """Matrix ``S[k, i] = <phi_i, gamma_k>``."""
        if not phis:
            return np.zeros((len(self), 0))
        return np.stack([self.pair(f) for f in phis], axis=-1)

    def count(self, b: Window) -> np.ndarray:
        return np.bincount(self.owner, weights=b.contains(self.points).astype(float), minlength=len(self)).astype(np.int64)
