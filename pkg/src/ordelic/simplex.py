"""Probability-vector arithmetic, sampling, and empirical conditionals.

Points on the simplex are plain float64 numpy arrays; :func:`as_simplex_point`
is the single validation/renormalization gate.  Datasets are column arrays of
(x_id, label) pairs with optional nonnegative row weights, so that exact
synthetic scenarios (irrational conditionals included) can be represented
without sampling noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from ordelic.errors import SimplexError, SpecError

SIMPLEX_TOL = 1e-12

NormKind = int | float | str  # 1, 2, inf / "l1", "l2", "linf"


def norm_order(kind: NormKind) -> float:
    """Map a norm spec (1, 2, inf, 'l1', 'l2', 'linf') to a numpy ord."""
    if isinstance(kind, str):
        table = {"l1": 1.0, "l2": 2.0, "linf": np.inf, "1": 1.0, "2": 2.0, "inf": np.inf}
        try:
            return table[kind.strip().lower()]
        except KeyError:
            raise SpecError(f"unknown norm kind {kind!r}") from None
    value = float(kind)
    if value not in (1.0, 2.0, np.inf):
        raise SpecError(f"norm order must be 1, 2 or inf, got {kind!r}")
    return value


def as_simplex_point(x, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate and renormalize a probability vector.

    Entries within ``tol`` of [0, 1] and a total within ``tol`` of 1 are
    accepted and renormalized exactly; anything further out is rejected, since
    the downstream ratio formulas are sensitive to constraint violation.
    """
    p = np.asarray(x, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise SimplexError(f"expected a 1-d vector with >= 2 entries, got shape {p.shape}")
    if np.any(p < -tol) or np.any(p > 1.0 + tol):
        raise SimplexError(f"entries outside [0, 1] beyond tolerance: {p}")
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise SimplexError(f"entries sum to {total}, not 1 within {tol}")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def as_simplex_points(x, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Batch variant of :func:`as_simplex_point` for an (m, n) array."""
    P = np.asarray(x, dtype=np.float64)
    if P.ndim != 2:
        raise SimplexError(f"expected a 2-d array, got shape {P.shape}")
    if np.any(P < -tol) or np.any(P > 1.0 + tol):
        raise SimplexError("entries outside [0, 1] beyond tolerance")
    totals = P.sum(axis=1)
    if np.any(np.abs(totals - 1.0) > tol):
        raise SimplexError("row sums differ from 1 beyond tolerance")
    P = np.clip(P, 0.0, None)
    return P / P.sum(axis=1, keepdims=True)


def norm_distance(a, b, kind: NormKind = 2) -> float:
    """||a - b|| for two same-dimension simplex points under the chosen norm."""
    pa = np.asarray(a, dtype=np.float64)
    pb = np.asarray(b, dtype=np.float64)
    if pa.shape != pb.shape:
        raise SimplexError(f"dimension mismatch: {pa.shape} vs {pb.shape}")
    return float(np.linalg.norm(pa - pb, ord=norm_order(kind)))


def ternary_plot_coords(p) -> np.ndarray:
    """Embed an n=3 simplex point into the standard ternary plot plane.

    Vertices map to (0,0) for outcome 1, (1,0) for outcome 3 and
    (1/2, sqrt(3)/2) for outcome 2, i.e. p -> (p3 + p2/2, p2*sqrt(3)/2).
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != 3:
        raise SimplexError("ternary plot coordinates require 3 outcomes")
    x = p[..., 2] + 0.5 * p[..., 1]
    y = p[..., 1] * (np.sqrt(3.0) / 2.0)
    return np.stack([x, y], axis=-1)


def from_ternary_plot(xy) -> np.ndarray:
    """Inverse of :func:`ternary_plot_coords`."""
    xy = np.asarray(xy, dtype=np.float64)
    p2 = xy[..., 1] * 2.0 / np.sqrt(3.0)
    p3 = xy[..., 0] - 0.5 * p2
    p1 = 1.0 - p2 - p3
    return as_simplex_points(np.stack([p1, p2, p3], axis=-1).reshape(-1, 3)).reshape(xy.shape[:-1] + (3,))


def sample_simplex(n: int, count: int, seed: int) -> np.ndarray:
    """Uniform points on the (n-1)-simplex via exponential spacings.

    Deterministic for a fixed seed; returns an (count, n) array.
    """
    if n < 2:
        raise SpecError("need at least 2 outcomes")
    if count < 1:
        raise SpecError("need at least 1 sample")
    rng = np.random.default_rng(seed)
    e = rng.standard_exponential(size=(count, n))
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class LabeledDataset:
    """(x_id, label) rows with 1-based labels and optional row weights."""

    x_ids: np.ndarray  # object array of opaque keys
    y: np.ndarray      # int array, values in 1..n
    n: int
    weights: np.ndarray | None = None

    def __post_init__(self):
        x_ids = np.asarray(self.x_ids, dtype=object)
        y = np.asarray(self.y, dtype=np.int64)
        object.__setattr__(self, "x_ids", x_ids)
        object.__setattr__(self, "y", y)
        if len(y) == 0:
            raise SpecError("dataset must be nonempty")
        if len(x_ids) != len(y):
            raise SpecError("x_ids and y lengths differ")
        if y.min() < 1 or y.max() > self.n:
            raise SpecError(f"labels must lie in 1..{self.n}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if len(w) != len(y) or np.any(w < 0) or w.sum() <= 0:
                raise SpecError("weights must be nonnegative with positive total")
            object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def row_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(len(self.y))
        return self.weights

    @classmethod
    def from_rows(cls, rows: Iterable[tuple], n: int) -> "LabeledDataset":
        xs, ys = zip(*rows)
        return cls(np.array(xs, dtype=object), np.array(ys, dtype=np.int64), n)

    @classmethod
    def from_exact_scenario(cls, feature_ids, feature_weights, conditionals) -> "LabeledDataset":
        """Weighted dataset reproducing a finite scenario with zero sampling noise.

        One row per (feature, label) pair, weighted by
        feature_weight * conditional probability.
        """
        cond = as_simplex_points(conditionals)
        w = np.asarray(feature_weights, dtype=np.float64)
        n = cond.shape[1]
        xs, ys, ws = [], [], []
        for f, fid in enumerate(feature_ids):
            for label in range(1, n + 1):
                mass = w[f] * cond[f, label - 1]
                if mass > 0:
                    xs.append(fid)
                    ys.append(label)
                    ws.append(mass)
        return cls(np.array(xs, dtype=object), np.array(ys, dtype=np.int64), n,
                   weights=np.array(ws))


def empirical_conditional(
    data: LabeledDataset,
    bin_of: Mapping | Callable,
) -> tuple[dict, list]:
    """Per-bin empirical label frequency vectors.

    ``bin_of`` maps each x_id to a hashable bin key (mapping or callable).
    Returns (bin -> frequency vector, list of empty bins).  A bin is "empty"
    when it appears in the binner's codomain (mapping input only) but receives
    no rows.
    """
    lookup = bin_of.__getitem__ if isinstance(bin_of, Mapping) else bin_of
    counts: dict = {}
    weights = data.row_weights
    for xid, label, w in zip(data.x_ids, data.y, weights):
        key = lookup(xid)
        vec = counts.get(key)
        if vec is None:
            vec = np.zeros(data.n)
            counts[key] = vec
        vec[label - 1] += w

    conditionals = {}
    empty = []
    for key, vec in counts.items():
        total = vec.sum()
        if total > 0:
            conditionals[key] = vec / total
        else:
            empty.append(key)
    if isinstance(bin_of, Mapping):
        for key in dict.fromkeys(bin_of.values()):
            if key not in counts:
                empty.append(key)
    return conditionals, empty
