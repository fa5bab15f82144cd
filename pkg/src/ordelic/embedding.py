"""Smoothed surrogate built from an embedded max-affine loss.

The discrete reports are embedded at strictly increasing reals phi.  Each
outcome's loss becomes the max of the lower-convex-envelope chords through
the embedded cost values plus steep outer extensions.  A three-case
pseudo-derivative at the interpolation grid, linearly interpolated with
unit-slope tails, gives a nondecreasing identification function whose
expected root is a Lipschitz property refining the discrete target through
a midpoint-threshold link.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ordelic._kernels import node_root_batch
from ordelic.errors import DegenerateRangeError, SpecError
from ordelic.piecewise import (
    MaxAffinePieces,
    PiecewiseAffine,
    expected_identification_root,
    lower_convex_envelope,
)
from ordelic.properties import CostMatrix
from ordelic.simplex import as_simplex_point, as_simplex_points

_EMBED_TOL = 1e-10


@dataclass(frozen=True)
class EmbeddingInput:
    """Per-outcome embedded losses plus the report embedding points."""

    losses: tuple  # MaxAffinePieces per outcome
    phi: np.ndarray  # strictly increasing, one per report
    cost: CostMatrix | None = None

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        if np.any(np.diff(phi) <= 0):
            raise SpecError("embedding points must be strictly increasing")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "losses", tuple(self.losses))
        if self.cost is not None:
            if len(phi) != self.cost.n_reports:
                raise SpecError("one embedding point per report required")
            if len(self.losses) != self.cost.n_outcomes:
                raise SpecError("one loss per outcome required")
            for y, loss in enumerate(self.losses):
                got = loss(phi)
                want = self.cost.entries[:, y]
                if np.any(np.abs(got - want) > _EMBED_TOL * (1.0 + np.abs(want))):
                    raise SpecError(
                        f"loss for outcome {y + 1} does not match the cost "
                        "matrix at the embedded points"
                    )

    @property
    def n_outcomes(self) -> int:
        return len(self.losses)


def build_envelope_loss(cost: CostMatrix, phi, outer_slope: float) -> EmbeddingInput:
    """Embedded loss: envelope chords of (phi_r, cost[r, y]) plus outer
    extensions of slope -S and +S through the extreme points.

    ``outer_slope`` must be at least the largest chord-slope magnitude so the
    extensions never cut below the chords.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if len(phi) != cost.n_reports:
        raise SpecError("one embedding point per report required")
    if np.any(np.diff(phi) <= 0):
        raise SpecError("embedding points must be strictly increasing")
    S = float(outer_slope)
    if S <= 0:
        raise SpecError("outer slope must be positive")
    losses = []
    for y in range(cost.n_outcomes):
        pts = np.column_stack([phi, cost.entries[:, y]])
        chords = lower_convex_envelope(pts)
        max_slope = max(abs(a) for a, _ in chords)
        if S < max_slope - 1e-12:
            raise SpecError(
                f"outer slope {S} does not dominate chord slopes "
                f"(max magnitude {max_slope}) for outcome {y + 1}"
            )
        left = (-S, pts[0, 1] + S * pts[0, 0])
        right = (S, pts[-1, 1] - S * pts[-1, 0])
        pieces = []
        for piece in [left] + chords + [right]:
            if not any(
                abs(piece[0] - q[0]) <= 1e-12 and abs(piece[1] - q[1]) <= 1e-12
                for q in pieces
            ):
                pieces.append(piece)
        losses.append(MaxAffinePieces(np.array(pieces)))
    return EmbeddingInput(tuple(losses), phi, cost=cost)


def pseudo_identification(inp: EmbeddingInput, u: float, outcome: int) -> float:
    """Three-case pseudo-derivative of the embedded loss at u (1-based outcome).

    Differentiable: the derivative.  Left/right derivative signs differ: 0.
    Same sign: their average.
    """
    dl, dr = inp.losses[outcome - 1].derivative_interval(float(u))
    if abs(dl - dr) <= 1e-12:
        return dl
    if np.sign(dl) != np.sign(dr):
        return 0.0
    return 0.5 * (dl + dr)


def interpolation_grid(inp: EmbeddingInput) -> np.ndarray:
    """Embedding points union consecutive midpoints, sorted."""
    phi = inp.phi
    mids = 0.5 * (phi[:-1] + phi[1:])
    return np.unique(np.concatenate([phi, mids]))


def interpolate_identification(inp: EmbeddingInput) -> list[PiecewiseAffine]:
    """Per-outcome piecewise-linear interpolation of the pseudo-derivative
    over the interpolation grid, continued with unit slope outside it."""
    grid = interpolation_grid(inp)
    out = []
    for y in range(1, inp.n_outcomes + 1):
        nodes = np.array([pseudo_identification(inp, u, y) for u in grid])
        if np.any(np.diff(nodes) < -1e-12):
            raise SpecError(
                f"interpolated identification for outcome {y} is decreasing; "
                "input loss is not convex in the embedded sense"
            )
        out.append(PiecewiseAffine.from_nodes(grid, nodes, 1.0, 1.0))
    return out


@dataclass(frozen=True)
class SmoothedSurrogate:
    """Interpolated identification functions, their integrated losses, the
    grid, the link thresholds, the property range, and a Lipschitz bound."""

    v_bar: tuple  # PiecewiseAffine per outcome
    l_bar: tuple  # PiecewiseQuadratic per outcome
    u_grid: np.ndarray
    thresholds: np.ndarray
    lipschitz_bound: float
    value_range: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "v_bar", tuple(self.v_bar))
        object.__setattr__(self, "l_bar", tuple(self.l_bar))
        object.__setattr__(self, "u_grid", np.asarray(self.u_grid, dtype=np.float64))
        object.__setattr__(self, "thresholds",
                           np.asarray(self.thresholds, dtype=np.float64))

    @property
    def n_outcomes(self) -> int:
        return len(self.v_bar)

    @property
    def node_values(self) -> np.ndarray:
        """(n_outcomes, grid size) matrix of identification values on the grid."""
        return np.stack([v(self.u_grid) for v in self.v_bar])


def _value_range(v_bar) -> tuple[float, float]:
    """Property range: extreme roots over the simplex vertices.

    Each vertex distribution e_y roots its own identification function; the
    expected identification at any p is sandwiched between these, so the
    range endpoints are vertex roots.
    """
    n = len(v_bar)
    roots = []
    for y in range(n):
        p = np.zeros(n)
        p[y] = 1.0
        roots.append(expected_identification_root(list(v_bar), p))
    return float(min(roots)), float(max(roots))


def _max_abs_identification(v_bar, lo: float, hi: float) -> float:
    best = 0.0
    for v in v_bar:
        us = np.concatenate(([lo], v.breakpoints[(v.breakpoints > lo)
                                                 & (v.breakpoints < hi)], [hi]))
        best = max(best, float(np.abs(v(us)).max()))
    return best


def build_surrogate(inp: EmbeddingInput) -> SmoothedSurrogate:
    """Full construction: interpolate, integrate, set midpoint thresholds,
    compute the property range and the Lipschitz bound K = max |v| on it."""
    v_bar = interpolate_identification(inp)
    l_bar = [v.integrate_from_zero() for v in v_bar]
    thresholds = 0.5 * (inp.phi[:-1] + inp.phi[1:])
    lo, hi = _value_range(v_bar)
    K = _max_abs_identification(v_bar, lo, hi)
    return SmoothedSurrogate(
        v_bar=tuple(v_bar),
        l_bar=tuple(l_bar),
        u_grid=interpolation_grid(inp),
        thresholds=thresholds,
        lipschitz_bound=K,
        value_range=(lo, hi),
    )


def gamma_surrogate_eval(s: SmoothedSurrogate, p) -> float:
    """Property value at p: root of the expected identification function."""
    probs = as_simplex_point(p)[None, :]
    return float(node_root_batch(s.u_grid, s.node_values, probs)[0])


def gamma_surrogate_eval_many(s: SmoothedSurrogate, probs) -> np.ndarray:
    return node_root_batch(s.u_grid, s.node_values, as_simplex_points(probs))


def link_eval(s: SmoothedSurrogate, u: float) -> int:
    """Report index: 1 + number of thresholds strictly below u."""
    return int(np.sum(s.thresholds < float(u))) + 1


def link_eval_many(s: SmoothedSurrogate, us) -> np.ndarray:
    us = np.asarray(us, dtype=np.float64)
    return np.sum(s.thresholds[None, :] < us[:, None], axis=1) + 1


def normalize_surrogate(s: SmoothedSurrogate) -> SmoothedSurrogate:
    """Affinely reparameterize so the property range becomes [0, 1].

    Node values are divided by the range width as well, which keeps the
    outer slopes at one and rescales the property by the same affine map;
    the link thresholds move with it, so the composed discrete report is
    unchanged.
    """
    lo, hi = s.value_range
    width = hi - lo
    if width <= 1e-12:
        raise DegenerateRangeError("property range has zero width")
    if abs(lo) <= 1e-15 and abs(hi - 1.0) <= 1e-15:
        return s
    grid = (s.u_grid - lo) / width
    nodes = s.node_values / width
    v_bar = [PiecewiseAffine.from_nodes(grid, nodes[y], 1.0, 1.0)
             for y in range(s.n_outcomes)]
    l_bar = [v.integrate_from_zero() for v in v_bar]
    thresholds = (s.thresholds - lo) / width
    K = _max_abs_identification(v_bar, 0.0, 1.0)
    return SmoothedSurrogate(
        v_bar=tuple(v_bar),
        l_bar=tuple(l_bar),
        u_grid=grid,
        thresholds=thresholds,
        lipschitz_bound=K,
        value_range=(0.0, 1.0),
    )
