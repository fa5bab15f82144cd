"""Calibration estimators and quantitative bound checks.

Three empirical notions are measured against a linked surrogate property:
distribution calibration (norm distance between a distributional prediction
and its bin's conditional), surrogate calibration (absolute gap between a
scalar prediction and the property of its bin's conditional), and discrete
calibration (probability that the discrete prediction leaves the target set
of its bin's conditional).  Bound checkers relate the three, including the
post-processing inequality, its contraction corollary, the counterexample
generator for too-small Lipschitz constants, and the discretization bound
driven by distance-to-threshold margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ordelic.embedding import gamma_surrogate_eval_many, link_eval_many
from ordelic.errors import DegenerateRangeError, SearchFailure, SpecError
from ordelic.normals import clip_ceiling_link_many, roe_eval_many
from ordelic.properties import CostMatrix, OrientedNormals, gamma_from_cost
from ordelic.simplex import (
    LabeledDataset,
    as_simplex_point,
    norm_order,
    sample_simplex,
    ternary_plot_coords,
)

_BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class PredictorTable:
    """x_id -> prediction; kind is 'distribution', 'scalar', or 'report'."""

    kind: str
    table: dict

    def __post_init__(self):
        if self.kind not in ("distribution", "scalar", "report"):
            raise SpecError(f"unknown predictor kind {self.kind!r}")

    def __getitem__(self, x_id):
        return self.table[x_id]


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "satisfied": self.satisfied,
            "params": self.params,
        }


@dataclass(frozen=True)
class AuditReport:
    notion: str
    norm: str
    epsilon_hat: float
    bin_count: int
    bin_min_size: float
    empty_bins: tuple
    bounds: tuple = ()
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "notion": self.notion,
            "norm": self.norm,
            "epsilon_hat": self.epsilon_hat,
            "bins": {
                "count": self.bin_count,
                "min_size": self.bin_min_size,
                "empty": list(self.empty_bins),
            },
            "bounds": [b.as_dict() for b in self.bounds],
            **({"extras": self.extras} if self.extras else {}),
        }


@dataclass(frozen=True)
class LinkedProperty:
    """Uniform handle over either surrogate construction plus its discrete
    target, exposing the property, the link, thresholds, and the bound K."""

    kind: str  # "embedding" | "normals"
    surrogate: object
    cost: CostMatrix | None = None
    normals: OrientedNormals | None = None

    def __post_init__(self):
        if self.kind not in ("embedding", "normals"):
            raise SpecError(f"unknown surrogate kind {self.kind!r}")
        if self.kind == "normals" and self.normals is None:
            object.__setattr__(self, "normals", self.surrogate.normals)
        if self.cost is None and self.normals is None:
            raise SpecError("need a cost matrix or normals for the discrete target")

    @property
    def thresholds(self) -> np.ndarray:
        return self.surrogate.thresholds

    @property
    def lipschitz_bound(self) -> float:
        return self.surrogate.lipschitz_bound

    @property
    def value_range(self) -> tuple[float, float]:
        return self.surrogate.value_range

    @property
    def n_outcomes(self) -> int:
        return self.surrogate.n_outcomes

    def gamma_many(self, probs) -> np.ndarray:
        if self.kind == "embedding":
            return gamma_surrogate_eval_many(self.surrogate, probs)
        return roe_eval_many(self.surrogate, probs)

    def gamma(self, p) -> float:
        return float(self.gamma_many(np.asarray(p, dtype=np.float64)[None, :])[0])

    def link_many(self, us) -> np.ndarray:
        if self.kind == "embedding":
            return link_eval_many(self.surrogate, us)
        return clip_ceiling_link_many(self.surrogate, us)

    def link(self, u: float) -> int:
        return int(self.link_many(np.array([u]))[0])

    def discrete_set(self, p, tol: float = 1e-10) -> set[int]:
        """Target reports at p; boundary points return both adjacent reports."""
        if self.cost is not None:
            return gamma_from_cost(self.cost, p, tol=tol)
        scores = self.normals.o @ as_simplex_point(p)
        k = len(scores)
        out = set()
        for j in range(1, k + 2):
            lo_ok = all(scores[i] >= -tol for i in range(j - 1))
            hi_ok = all(scores[i] <= tol for i in range(j - 1, k))
            if lo_ok and hi_ok:
                out.add(j)
        return out


def _rescaled(linked: LinkedProperty, alpha: float):
    """Property evaluator scaled by alpha (Lipschitz bound scales with it)."""
    def gamma_many(probs):
        return alpha * linked.gamma_many(probs)
    return gamma_many


# ---------------------------------------------------------------------------
# shared binning plumbing
#
# Estimators aggregate the dataset once per distinct x_id (weighted label
# counts) and then work per feature, since every prediction and bin key is a
# function of x_id alone.  This keeps large Monte Carlo audits off the
# per-row Python path.


def _aggregate(data: LabeledDataset) -> dict:
    """x_id -> weighted label-count vector."""
    agg: dict = {}
    weights = data.row_weights
    for xid, y, w in zip(data.x_ids, data.y, weights):
        rec = agg.get(xid)
        if rec is None:
            rec = np.zeros(data.n)
            agg[xid] = rec
        rec[y - 1] += w
    return agg


def _group_bins(agg: dict, key_of) -> tuple[dict, dict, dict]:
    """(bin -> conditional, bin -> total weight, x_id -> bin)."""
    totals: dict = {}
    xid_bin: dict = {}
    for xid, rec in agg.items():
        key = key_of(xid)
        xid_bin[xid] = key
        tot = totals.get(key)
        if tot is None:
            totals[key] = rec.copy()
        else:
            tot += rec
    cond = {key: vec / vec.sum() for key, vec in totals.items()}
    sizes = {key: float(vec.sum()) for key, vec in totals.items()}
    return cond, sizes, xid_bin


def _scalar_bins(g: PredictorTable, data: LabeledDataset, bin_width: float | None):
    """Exact-value bins by default; optional uniform-width bins with midpoint
    representatives for continuous-valued predictors."""
    if bin_width is None:
        def key_of(xid):
            return float(g[xid])

        def rep_of(key):
            return float(key)
    else:
        w = float(bin_width)

        def key_of(xid):
            return int(math.floor(float(g[xid]) / w))

        def rep_of(key):
            return (key + 0.5) * w
    return key_of, rep_of


# ---------------------------------------------------------------------------
# the three calibration estimators


def dist_calibration_wrt(
    f: PredictorTable,
    data: LabeledDataset,
    binner,
    norm="l2",
    convention: str = "simplex",
) -> AuditReport:
    """Mean norm distance between f(x) and its bin's empirical conditional.

    ``binner`` maps a distributional prediction to a bin key.  With
    convention "plot" (3 outcomes only) distances are taken in the ternary
    plot plane instead of raw simplex coordinates.
    """
    if f.kind != "distribution":
        raise SpecError("distribution calibration needs a distributional predictor")
    ordv = norm_order(norm)
    agg = _aggregate(data)
    preds = {xid: np.asarray(f[xid], dtype=np.float64) for xid in agg}
    cond, sizes, xid_bin = _group_bins(agg, lambda xid: binner(preds[xid]))
    total = sum(rec.sum() for rec in agg.values())
    acc = 0.0
    for xid, rec in agg.items():
        p = preds[xid]
        q = cond[xid_bin[xid]]
        if convention == "plot":
            d = float(np.linalg.norm(
                ternary_plot_coords(p) - ternary_plot_coords(q), ord=ordv))
        else:
            d = float(np.linalg.norm(p - q, ord=ordv))
        acc += rec.sum() * d
    return AuditReport(
        notion="distribution",
        norm=str(norm),
        epsilon_hat=acc / total,
        bin_count=len(cond),
        bin_min_size=min(sizes.values()) if sizes else 0.0,
        empty_bins=(),
        extras={"convention": convention},
    )


def surrogate_calibration(
    g: PredictorTable,
    data: LabeledDataset,
    gamma_eval,
    norm="l2",
    bin_width: float | None = None,
) -> AuditReport:
    """Mean |gamma(bin conditional) - g(x)| with exact-value bins by default.

    ``gamma_eval`` maps a batch of distributions to property values.
    """
    if g.kind != "scalar":
        raise SpecError("surrogate calibration needs a scalar predictor")
    key_of, _ = _scalar_bins(g, data, bin_width)
    agg = _aggregate(data)
    cond, sizes, xid_bin = _group_bins(agg, key_of)
    keys = list(cond.keys())
    gamma_of = dict(zip(keys, gamma_eval(np.stack([cond[k] for k in keys]))))
    total = sum(rec.sum() for rec in agg.values())
    acc = 0.0
    for xid, rec in agg.items():
        acc += rec.sum() * abs(float(gamma_of[xid_bin[xid]]) - float(g[xid]))
    return AuditReport(
        notion="surrogate",
        norm=str(norm),
        epsilon_hat=acc / total,
        bin_count=len(cond),
        bin_min_size=min(sizes.values()) if sizes else 0.0,
        empty_bins=(),
        extras={"bin_width": bin_width},
    )


def discrete_calibration(
    h: PredictorTable,
    data: LabeledDataset,
    gamma_set,
) -> AuditReport:
    """Probability that h(x) is outside the target set of its bin conditional.

    ``gamma_set`` maps a distribution to the set of optimal reports, so
    boundary conditionals count as matches for either adjacent report.
    """
    if h.kind != "report":
        raise SpecError("discrete calibration needs a report-valued predictor")
    agg = _aggregate(data)
    cond, sizes, xid_bin = _group_bins(agg, lambda xid: int(h[xid]))
    match = {key: int(key) in gamma_set(vec) for key, vec in cond.items()}
    total = sum(rec.sum() for rec in agg.values())
    acc = sum(rec.sum() for xid, rec in agg.items() if not match[xid_bin[xid]])
    return AuditReport(
        notion="discrete",
        norm="0-1",
        epsilon_hat=float(acc / total),
        bin_count=len(cond),
        bin_min_size=min(sizes.values()) if sizes else 0.0,
        empty_bins=(),
    )


# ---------------------------------------------------------------------------
# bound checks


def check_postprocessing_bound(
    f: PredictorTable,
    data: LabeledDataset,
    linked: LinkedProperty,
    norm="l2",
) -> AuditReport:
    """Post-processing inequality: the surrogate miscalibration of the scalar
    predictor gamma∘f is at most K times the distribution miscalibration of f
    binned by that same scalar value.  For K < 1, also records the stronger
    contraction inequality (rhs = epsilon itself)."""
    if f.kind != "distribution":
        raise SpecError("post-processing bound needs a distributional predictor")
    K = linked.lipschitz_bound
    ids = list(dict.fromkeys(f.table.keys()))
    gvals = dict(zip(ids, linked.gamma_many(
        np.stack([np.asarray(f[x], dtype=np.float64) for x in ids]))))
    g = PredictorTable("scalar", {x: float(gvals[x]) for x in ids})

    def binner(p):
        return float(linked.gamma(p))

    eps_report = dist_calibration_wrt(f, data, binner, norm=norm)
    eps = eps_report.epsilon_hat
    eps_prime_report = surrogate_calibration(g, data, linked.gamma_many, norm=norm)
    eps_prime = eps_prime_report.epsilon_hat
    bounds = [
        BoundCheck(
            name="postprocessing",
            lhs=eps_prime,
            rhs=K * eps,
            satisfied=bool(eps_prime <= K * eps + _BOUND_SLACK),
            params={"K": K, "epsilon": eps},
        )
    ]
    if K < 1.0:
        bounds.append(
            BoundCheck(
                name="contraction",
                lhs=eps_prime,
                rhs=eps,
                satisfied=bool(eps_prime <= eps + _BOUND_SLACK),
                params={"K": K},
            )
        )
    return AuditReport(
        notion="postprocessing",
        norm=str(norm),
        epsilon_hat=eps_prime,
        bin_count=eps_prime_report.bin_count,
        bin_min_size=eps_prime_report.bin_min_size,
        empty_bins=eps_prime_report.empty_bins,
        bounds=tuple(bounds),
        extras={"epsilon_dist": eps, "epsilon_surrogate": eps_prime},
    )


def counterexample_gap(
    gamma_eval,
    n: int,
    C: float,
    budget: int = 50_000,
    seed: int = 0,
    norm="l2",
):
    """Search for p, q with |gamma(p) - gamma(q)| > C * ||p - q||.

    Returns (p, q, instance) where the instance is the one-feature scenario
    (prediction p, true conditional q) whose audits certify distribution
    calibration ||p - q|| but surrogate miscalibration above C times that.
    Raises :class:`SearchFailure` with the best ratio when the budget runs
    out, which is the expected outcome when C is a valid Lipschitz bound.
    """
    ordv = norm_order(norm)
    rng = np.random.default_rng(seed)
    used = 0
    best_ratio = -1.0
    best_pair = None
    step = 1e-3
    batch = 2048
    while used < budget:
        if best_pair is None or used < budget // 3:
            base = sample_simplex(n, batch, int(rng.integers(2**31)))
        else:
            # local refinement around the best base point
            center = best_pair[0]
            jitter = rng.standard_normal((batch, n)) * 0.02
            base = np.clip(center[None, :] + jitter, 1e-12, None)
            base /= base.sum(axis=1, keepdims=True)
        d = rng.standard_normal((batch, n))
        d -= d.mean(axis=1, keepdims=True)
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        other = np.clip(base + step * d, 0.0, None)
        other /= other.sum(axis=1, keepdims=True)
        dist = np.linalg.norm(base - other, ord=ordv, axis=1)
        ok = dist > 1e-12
        gv = gamma_eval(base)
        gw = gamma_eval(other)
        ratio = np.where(ok, np.abs(gv - gw) / np.where(ok, dist, 1.0), -1.0)
        used += batch
        idx = int(np.argmax(ratio))
        if ratio[idx] > best_ratio:
            best_ratio = float(ratio[idx])
            best_pair = (base[idx], other[idx])
        if best_ratio > C:
            p, q = best_pair
            instance = {
                "x_id": "x0",
                "prediction": p.tolist(),
                "conditional": q.tolist(),
                "distribution_epsilon": float(np.linalg.norm(p - q, ord=ordv)),
                "surrogate_gap": float(abs(gamma_eval(p[None, :])[0]
                                           - gamma_eval(q[None, :])[0])),
                "C": float(C),
                "ratio": best_ratio,
            }
            return p, q, instance
    raise SearchFailure(
        f"no pair with ratio above {C} in {budget} evaluations; "
        f"best ratio {best_ratio:.6g}"
    )


def instance_dataset(instance: dict) -> tuple[PredictorTable, LabeledDataset]:
    """Materialize the counterexample as (distributional predictor, dataset)."""
    q = np.asarray(instance["conditional"], dtype=np.float64)
    data = LabeledDataset.from_exact_scenario(
        [instance["x_id"]], [1.0], q[None, :]
    )
    f = PredictorTable("distribution",
                       {instance["x_id"]: np.asarray(instance["prediction"])})
    return f, data


def delta_to_threshold(thresholds, u: float) -> float:
    """Distance from u to the nearest link threshold."""
    t = np.asarray(thresholds, dtype=np.float64)
    if t.size == 0:
        raise SpecError("threshold set is empty")
    return float(np.abs(t - float(u)).min())


def link_diameter(thresholds, value_range) -> float:
    """Widest preimage interval of the link within the property range."""
    lo, hi = float(value_range[0]), float(value_range[1])
    if hi <= lo:
        raise DegenerateRangeError("property range has zero width")
    t = np.sort(np.asarray(thresholds, dtype=np.float64))
    t = t[(t > lo) & (t < hi)]
    edges = np.concatenate(([lo], t, [hi]))
    return float(np.diff(edges).max())


def check_discretization_bound(
    g: PredictorTable,
    data: LabeledDataset,
    linked: LinkedProperty,
    C_marginal: float,
    t_grid=None,
    c_estimated: bool = False,
) -> AuditReport:
    """Discretization bound: the discrete mismatch probability of the linked
    prediction is controlled by the threshold-margin tail plus
    (eps' + K*C*diam)/t, minimized over t.

    ``C_marginal`` is the assumed Lipschitz constant of the map from a
    prediction value to its bin's conditional distribution; it is an input
    assumption, not something certified from data.
    """
    if g.kind != "scalar":
        raise SpecError("discretization bound needs a scalar predictor")
    K = linked.lipschitz_bound
    thresholds = linked.thresholds
    lo, hi = linked.value_range
    diam = link_diameter(thresholds, (lo, hi))

    image = sorted(set(float(g[x]) for x in g.table))
    if not image:
        raise SpecError("predictor image is empty")
    delta_min = min(delta_to_threshold(thresholds, u) for u in image)

    eps_report = surrogate_calibration(g, data, linked.gamma_many)
    eps_prime = eps_report.epsilon_hat

    agg = _aggregate(data)
    cond, _, xid_bin = _group_bins(agg, lambda xid: float(g[xid]))
    mismatch_of = {
        key: linked.link(key) not in linked.discrete_set(vec)
        for key, vec in cond.items()
    }
    xids = list(agg.keys())
    xw = np.array([agg[x].sum() for x in xids])
    total = xw.sum()
    deltas = np.array([delta_to_threshold(thresholds, float(g[x])) for x in xids])
    lhs = float(sum(w for x, w in zip(xids, xw) if mismatch_of[xid_bin[x]]) / total)

    width = hi - lo
    if t_grid is None:
        t_low = max(delta_min / 10.0, 1e-9 * width)
        t_grid = np.geomspace(t_low, width, 20)
    ts = np.unique(np.concatenate([np.asarray(t_grid, dtype=np.float64),
                                   [delta_min] if delta_min > 0 else []]))
    ts = ts[ts > 0]
    numer = eps_prime + K * C_marginal * diam
    best_rhs = np.inf
    best_t = None
    for t in ts:
        tail = float(np.sum(xw[deltas < t]) / total)
        rhs = tail + numer / t
        if rhs < best_rhs:
            best_rhs = rhs
            best_t = float(t)
    vacuous = bool(best_rhs >= 1.0)
    bound = BoundCheck(
        name="discretization",
        lhs=lhs,
        rhs=float(best_rhs),
        satisfied=bool(lhs <= best_rhs + _BOUND_SLACK),
        params={
            "K": K,
            "C_marginal": C_marginal,
            "C_estimated": c_estimated,
            "diam": diam,
            "delta_min": delta_min,
            "epsilon_surrogate": eps_prime,
            "t_star": best_t,
            "vacuous": vacuous,
        },
    )
    return AuditReport(
        notion="discretization",
        norm="0-1",
        epsilon_hat=lhs,
        bin_count=eps_report.bin_count,
        bin_min_size=eps_report.bin_min_size,
        empty_bins=eps_report.empty_bins,
        bounds=(bound,),
        extras={"vacuous": vacuous},
    )


def estimate_marginal_lipschitz(g: PredictorTable, data: LabeledDataset) -> float:
    """Max difference quotient of bin conditionals across adjacent prediction
    values: a data-driven stand-in for C_marginal, flagged as an estimate."""
    agg = _aggregate(data)
    cond, _, _ = _group_bins(agg, lambda xid: float(g[xid]))
    keys = sorted(cond.keys())
    best = 0.0
    for a, b in zip(keys[:-1], keys[1:]):
        if b - a > 1e-15:
            best = max(best, float(np.linalg.norm(cond[b] - cond[a]) / (b - a)))
    return best


def lipschitz_estimate(
    gamma_eval,
    n: int,
    norm="l2",
    samples: int = 20_000,
    seed: int = 0,
    refine_rounds: int = 8,
):
    """Max sampled difference quotient of the property plus local refinement.

    Returns (K_hat, (p, q)) for the best pair found.
    """
    if samples < 2:
        raise SpecError("need at least 2 samples")
    ordv = norm_order(norm)
    rng = np.random.default_rng(seed)
    base = sample_simplex(n, samples, int(rng.integers(2**31)))
    step = 1e-4
    d = rng.standard_normal((samples, n))
    d -= d.mean(axis=1, keepdims=True)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    other = np.clip(base + step * d, 0.0, None)
    other /= other.sum(axis=1, keepdims=True)
    dist = np.linalg.norm(base - other, ord=ordv, axis=1)
    ok = dist > 1e-12
    quot = np.where(ok, np.abs(gamma_eval(base) - gamma_eval(other))
                    / np.where(ok, dist, 1.0), 0.0)
    idx = int(np.argmax(quot))
    best = float(quot[idx])
    best_pair = (base[idx], other[idx])
    radius = 0.05
    for _ in range(refine_rounds):
        center = best_pair[0]
        jitter = rng.standard_normal((2048, n)) * radius
        cand = np.clip(center[None, :] + jitter, 1e-12, None)
        cand /= cand.sum(axis=1, keepdims=True)
        d = rng.standard_normal((2048, n))
        d -= d.mean(axis=1, keepdims=True)
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        other = np.clip(cand + step * d, 0.0, None)
        other /= other.sum(axis=1, keepdims=True)
        dist = np.linalg.norm(cand - other, ord=ordv, axis=1)
        ok = dist > 1e-12
        quot = np.where(ok, np.abs(gamma_eval(cand) - gamma_eval(other))
                        / np.where(ok, dist, 1.0), 0.0)
        idx = int(np.argmax(quot))
        if quot[idx] > best:
            best = float(quot[idx])
            best_pair = (cand[idx], other[idx])
        radius *= 0.5
    return best, best_pair
