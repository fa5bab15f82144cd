"""File formats: property specs, surrogate exports, datasets, predictors,
scenarios, and audit reports.

All JSON is emitted with sorted keys and fixed indentation so repeated runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from ordelic.audit import AuditReport, PredictorTable
from ordelic.embedding import SmoothedSurrogate
from ordelic.errors import SpecError
from ordelic.normals import NormalsSurrogate
from ordelic.piecewise import PiecewiseAffine, PiecewiseQuadratic
from ordelic.properties import AffineBoundary, CostMatrix, OrientedNormals
from ordelic.scenario import ScenarioSpec
from ordelic.simplex import LabeledDataset


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed JSON in {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# property specs


def load_property_spec(path) -> dict:
    """Parse a property-spec file into reports plus a cost matrix or
    report-ordered boundaries."""
    raw = read_json(path)
    if not isinstance(raw, dict) or "n" not in raw or "reports" not in raw:
        raise SpecError("property spec needs 'n' and 'reports'")
    n = int(raw["n"])
    reports = list(raw["reports"])
    out = {"n": n, "reports": reports, "cost": None, "boundaries": None}
    if "cost_matrix" in raw:
        cm = np.asarray(raw["cost_matrix"], dtype=np.float64)
        if cm.shape != (len(reports), n):
            raise SpecError(
                f"cost matrix shape {cm.shape} does not match "
                f"{len(reports)} reports x {n} outcomes"
            )
        out["cost"] = CostMatrix(cm)
    elif "boundaries" in raw:
        bds = []
        for item in raw["boundaries"]:
            c = np.asarray(item["c"], dtype=np.float64)
            if len(c) != n:
                raise SpecError("boundary coefficient length does not match n")
            bds.append(AffineBoundary(c, float(item["b"])))
        if len(bds) != len(reports) - 1:
            raise SpecError("need one boundary per consecutive report pair")
        out["boundaries"] = bds
    else:
        raise SpecError("property spec needs 'cost_matrix' or 'boundaries'")
    return out


# ---------------------------------------------------------------------------
# surrogate exports


def _piecewise_affine_json(v: PiecewiseAffine) -> dict:
    return {
        "breakpoints": v.breakpoints.tolist(),
        "slopes": v.slopes.tolist(),
        "intercepts": v.intercepts.tolist(),
    }


def _piecewise_affine_from_json(d: dict) -> PiecewiseAffine:
    return PiecewiseAffine(
        np.asarray(d["breakpoints"]), np.asarray(d["slopes"]),
        np.asarray(d["intercepts"]),
    )


def _piecewise_quadratic_json(q: PiecewiseQuadratic) -> dict:
    return {
        "breakpoints": q.breakpoints.tolist(),
        "coeffs": q.coeffs.tolist(),
        "convex": q.check_convex,
    }


def _piecewise_quadratic_from_json(d: dict) -> PiecewiseQuadratic:
    return PiecewiseQuadratic(
        np.asarray(d["breakpoints"]), np.asarray(d["coeffs"]),
        check_convex=bool(d.get("convex", True)),
    )


def surrogate_to_json(s, cost: CostMatrix | None = None) -> dict:
    if isinstance(s, SmoothedSurrogate):
        out = {
            "kind": "embedding",
            "u_grid": s.u_grid.tolist(),
            "v_bar": [_piecewise_affine_json(v) for v in s.v_bar],
            "l_bar": [_piecewise_quadratic_json(q) for q in s.l_bar],
            "thresholds": s.thresholds.tolist(),
            "lipschitz_bound": s.lipschitz_bound,
            "value_range": [s.value_range[0], s.value_range[1]],
        }
    elif isinstance(s, NormalsSurrogate):
        out = {
            "kind": "normals",
            "normals": s.normals.o.tolist(),
            "v_bar": [_piecewise_affine_json(v) for v in s.v],
            "l_bar": [_piecewise_quadratic_json(q) for q in s.loss],
            "thresholds": s.thresholds.tolist(),
            "lipschitz_bound": s.lipschitz_bound,
            "lipschitz_exact": s.lipschitz_exact,
            "value_range": [s.value_range[0], s.value_range[1]],
        }
    else:
        raise SpecError(f"cannot serialize surrogate of type {type(s).__name__}")
    if cost is not None:
        out["cost_matrix"] = cost.entries.tolist()
    return out


def surrogate_from_json(d: dict):
    """Rebuild a surrogate (and the source cost matrix, when present)."""
    kind = d.get("kind")
    cost = CostMatrix(np.asarray(d["cost_matrix"])) if "cost_matrix" in d else None
    if kind == "embedding":
        s = SmoothedSurrogate(
            v_bar=tuple(_piecewise_affine_from_json(v) for v in d["v_bar"]),
            l_bar=tuple(_piecewise_quadratic_from_json(q) for q in d["l_bar"]),
            u_grid=np.asarray(d["u_grid"]),
            thresholds=np.asarray(d["thresholds"]),
            lipschitz_bound=float(d["lipschitz_bound"]),
            value_range=(float(d["value_range"][0]), float(d["value_range"][1])),
        )
        return s, cost
    if kind == "normals":
        s = NormalsSurrogate(
            normals=OrientedNormals(np.asarray(d["normals"])),
            v=tuple(_piecewise_affine_from_json(v) for v in d["v_bar"]),
            loss=tuple(_piecewise_quadratic_from_json(q) for q in d["l_bar"]),
            lipschitz_bound=float(d["lipschitz_bound"]),
            lipschitz_exact=bool(d.get("lipschitz_exact", False)),
            value_range=(float(d["value_range"][0]), float(d["value_range"][1])),
        )
        return s, cost
    raise SpecError(f"unknown surrogate kind {kind!r}")


# ---------------------------------------------------------------------------
# datasets


def dataset_to_csv(data: LabeledDataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x_id", "y"])
    for xid, y in zip(data.x_ids, data.y):
        writer.writerow([xid, int(y)])
    return buf.getvalue()


def write_dataset_csv(path, data: LabeledDataset) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dataset_to_csv(data))


def read_dataset_csv(path, n: int) -> LabeledDataset:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x_id", "y"]:
            raise SpecError(f"expected header 'x_id,y', got {header}")
        rows = [(xid, int(y)) for xid, y in reader]
    if not rows:
        raise SpecError("dataset file has no rows")
    return LabeledDataset.from_rows(rows, n)


# ---------------------------------------------------------------------------
# predictors, scenarios, audit reports


def predictor_to_json(p: PredictorTable) -> dict:
    table = {}
    for key, value in p.table.items():
        if p.kind == "distribution":
            table[str(key)] = np.asarray(value, dtype=np.float64).tolist()
        elif p.kind == "scalar":
            table[str(key)] = float(value)
        else:
            table[str(key)] = int(value)
    return {"kind": p.kind, "table": table}


def predictor_from_json(d: dict) -> PredictorTable:
    kind = d["kind"]
    table = {}
    for key, value in d["table"].items():
        if kind == "distribution":
            table[key] = np.asarray(value, dtype=np.float64)
        elif kind == "scalar":
            table[key] = float(value)
        else:
            table[key] = int(value)
    return PredictorTable(kind, table)


def scenario_to_json(s: ScenarioSpec) -> dict:
    out = {
        "features": [
            {"id": str(x), "weight": float(w), "conditional": c.tolist()}
            for x, w, c in zip(s.feature_ids, s.weights, s.conditionals)
        ],
        "predictor": {"recipe": s.recipe},
    }
    if s.recipe == "perturbed":
        out["predictor"]["eta"] = s.eta
    if s.recipe == "fixed":
        out["predictor"]["table"] = {
            str(k): np.asarray(v, dtype=np.float64).tolist()
            for k, v in s.fixed_table.items()
        }
    return out


def scenario_from_json(d: dict) -> ScenarioSpec:
    feats = d["features"]
    pred = d.get("predictor", {"recipe": "bayes"})
    fixed = None
    if pred["recipe"] == "fixed":
        fixed = {k: np.asarray(v, dtype=np.float64)
                 for k, v in pred["table"].items()}
    return ScenarioSpec(
        feature_ids=tuple(f["id"] for f in feats),
        weights=np.asarray([f["weight"] for f in feats], dtype=np.float64),
        conditionals=np.asarray([f["conditional"] for f in feats], dtype=np.float64),
        recipe=pred["recipe"],
        eta=float(pred.get("eta", 0.0)),
        fixed_table=fixed,
    )


def audit_report_to_json(r: AuditReport) -> dict:
    return r.as_dict()
