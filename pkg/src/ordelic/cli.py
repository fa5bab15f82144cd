"""Command-line harness: construct, levelsets, simulate, audit, counterexample.

Exit codes: 0 success, 2 input or spec error, 3 bound violation, 4 search
failure.  All randomness flows from --seed (fallback: the ORDELIC_SEED
environment variable); outputs are byte-identical across repeated runs with
the same configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

import numpy as np

from ordelic import audit as audit_mod
from ordelic import serialize
from ordelic.audit import LinkedProperty
from ordelic.embedding import build_envelope_loss, build_surrogate
from ordelic.errors import OrdelicError, SearchFailure, SpecError
from ordelic.normals import full_pipeline
from ordelic.piecewise import lower_convex_envelope
from ordelic.properties import gamma_from_cost
from ordelic.scenario import exact_dataset, materialize_predictor, sample_dataset
from ordelic.simplex import as_simplex_points

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_BOUND = 3
EXIT_SEARCH = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ordelic",
        description="Surrogate property construction and calibration audits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="root seed (fallback: ORDELIC_SEED)")
    common.add_argument("--out", required=True, help="output path or prefix")

    p = sub.add_parser("construct", parents=[common],
                       help="build a surrogate from a property spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--algo", choices=["embedding", "normals"], default="normals")
    p.add_argument("--phi", default=None,
                   help="comma-separated embedding points (embedding only)")
    p.add_argument("--outer-slope", type=float, default=None)

    p = sub.add_parser("levelsets", parents=[common],
                       help="emit a barycentric grid of property values")
    p.add_argument("--spec", required=True)
    p.add_argument("--algo", choices=["embedding", "normals"], default="normals")
    p.add_argument("--phi", default=None)
    p.add_argument("--outer-slope", type=float, default=None)
    p.add_argument("--resolution", type=int, default=200)

    p = sub.add_parser("simulate", parents=[common],
                       help="sample a dataset and predictor from a scenario")
    p.add_argument("--spec", required=True, help="scenario JSON")
    p.add_argument("--samples", type=int, default=10_000)

    p = sub.add_parser("audit", parents=[common],
                       help="run calibration estimators and bound checks")
    p.add_argument("--surrogate", required=True, help="construct output JSON")
    p.add_argument("--data", default=None, help="dataset CSV")
    p.add_argument("--scenario", default=None,
                   help="scenario JSON for an exact (noise-free) audit")
    p.add_argument("--predictor", required=True, help="predictor JSON")
    p.add_argument("--norm", choices=["l1", "l2", "linf"], default="l2")
    p.add_argument("--bin-width", type=float, default=None)
    p.add_argument("--c-marginal", type=float, default=None)
    p.add_argument("--convention", choices=["simplex", "plot"], default="simplex")

    p = sub.add_parser("counterexample", parents=[common],
                       help="search for a Lipschitz-violating pair")
    p.add_argument("--surrogate", required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--samples", type=int, default=50_000, help="search budget")
    p.add_argument("--norm", choices=["l1", "l2", "linf"], default="l2")
    return parser


def _resolve_seed(args) -> int | None:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("ORDELIC_SEED")
    return int(env) if env else None


def _require_seed(args) -> int:
    seed = _resolve_seed(args)
    if seed is None:
        raise SpecError("a seed is required: pass --seed or set ORDELIC_SEED")
    return seed


def _default_phi(n_reports: int) -> np.ndarray:
    return np.arange(n_reports, dtype=np.float64)


def _parse_phi(arg, n_reports: int) -> np.ndarray:
    if arg is None:
        return _default_phi(n_reports)
    phi = np.array([float(v) for v in arg.split(",")])
    if len(phi) != n_reports:
        raise SpecError(f"--phi needs {n_reports} values")
    return phi


def _default_outer_slope(cost, phi) -> float:
    worst = 0.0
    for y in range(cost.n_outcomes):
        chords = lower_convex_envelope(np.column_stack([phi, cost.entries[:, y]]))
        worst = max(worst, max(abs(a) for a, _ in chords))
    return 1.0 + worst


def _build_embedding(spec: dict, args):
    cost = spec["cost"]
    if cost is None:
        raise SpecError("the embedding construction needs a cost matrix spec")
    phi = _parse_phi(args.phi, cost.n_reports)
    S = args.outer_slope if args.outer_slope is not None \
        else _default_outer_slope(cost, phi)
    surrogate = build_surrogate(build_envelope_loss(cost, phi, S))
    report = {
        "algo": "embedding",
        "phi": phi.tolist(),
        "outer_slope": S,
        "u_grid": surrogate.u_grid.tolist(),
        "thresholds": surrogate.thresholds.tolist(),
        "lipschitz_bound": surrogate.lipschitz_bound,
        "value_range": list(surrogate.value_range),
    }
    return surrogate, cost, report


def _build_normals(spec: dict, seed: int):
    source = spec["cost"] if spec["cost"] is not None else spec["boundaries"]
    surrogate, report = full_pipeline(source, seed)
    report = {"algo": "normals", **report,
              "thresholds": surrogate.thresholds.tolist(),
              "value_range": list(surrogate.value_range)}
    return surrogate, spec["cost"], report


def _cmd_construct(args) -> int:
    spec = serialize.load_property_spec(args.spec)
    if args.algo == "embedding":
        surrogate, cost, report = _build_embedding(spec, args)
    else:
        surrogate, cost, report = _build_normals(spec, _require_seed(args))
    serialize.write_json(args.out, serialize.surrogate_to_json(surrogate, cost))
    report["config"] = {"spec": args.spec, "algo": args.algo,
                        "seed": _resolve_seed(args), "out": args.out}
    sys.stdout.write(serialize.dumps(report))
    return EXIT_OK


def _discrete_eval(spec: dict, linked_cost, surrogate, pts) -> np.ndarray:
    if linked_cost is not None:
        return np.array([min(gamma_from_cost(linked_cost, p)) for p in pts])
    from ordelic.properties import region_index_many
    return region_index_many(surrogate.normals, pts)


def _cmd_levelsets(args) -> int:
    spec = serialize.load_property_spec(args.spec)
    if spec["n"] != 3:
        raise SpecError("level-set grids are only defined for 3 outcomes")
    if args.algo == "embedding":
        surrogate, cost, _ = _build_embedding(spec, args)
        from ordelic.embedding import gamma_surrogate_eval_many as ev
    else:
        surrogate, cost, _ = _build_normals(spec, _require_seed(args))
        from ordelic.normals import roe_eval_many as ev
    res = args.resolution
    if res < 1:
        raise SpecError("resolution must be positive")
    rows = []
    for i in range(res + 1):
        for j in range(res + 1 - i):
            rows.append((i / res, j / res, (res - i - j) / res))
    pts = as_simplex_points(np.array(rows))
    gamma_s = ev(surrogate, pts)
    gamma_d = _discrete_eval(spec, cost, surrogate, pts)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["p1", "p2", "p3", "gamma_discrete", "gamma_surrogate"])
    for p, gd, gs in zip(pts, gamma_d, gamma_s):
        writer.writerow([repr(float(p[0])), repr(float(p[1])),
                         repr(float(p[2])), int(gd), repr(float(gs))])
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return EXIT_OK


def _cmd_simulate(args) -> int:
    seed = _require_seed(args)
    scenario = serialize.scenario_from_json(serialize.read_json(args.spec))
    data = sample_dataset(scenario, args.samples, seed)
    predictor = materialize_predictor(scenario, seed + 1)
    serialize.write_dataset_csv(args.out + ".data.csv", data)
    serialize.write_json(args.out + ".predictor.json",
                         serialize.predictor_to_json(predictor))
    serialize.write_json(args.out + ".meta.json", {
        "config": {"spec": args.spec, "samples": args.samples,
                   "seed": seed, "out": args.out},
        "n_outcomes": scenario.n_outcomes,
    })
    return EXIT_OK


def _load_linked(path) -> LinkedProperty:
    surrogate, cost = serialize.surrogate_from_json(serialize.read_json(path))
    kind = "embedding" if surrogate.__class__.__name__ == "SmoothedSurrogate" \
        else "normals"
    if kind == "embedding" and cost is None:
        raise SpecError("embedding surrogate file lacks its cost matrix; "
                        "re-run construct")
    return LinkedProperty(kind=kind, surrogate=surrogate, cost=cost)


def _cmd_audit(args) -> int:
    linked = _load_linked(args.surrogate)
    predictor = serialize.predictor_from_json(serialize.read_json(args.predictor))
    if (args.data is None) == (args.scenario is None):
        raise SpecError("pass exactly one of --data or --scenario")
    if args.scenario is not None:
        scenario = serialize.scenario_from_json(serialize.read_json(args.scenario))
        data = exact_dataset(scenario)
    else:
        data = serialize.read_dataset_csv(args.data, linked.n_outcomes)

    reports = []
    if predictor.kind == "distribution":
        reports.append(audit_mod.dist_calibration_wrt(
            predictor, data, lambda p: float(linked.gamma(p)),
            norm=args.norm, convention=args.convention))
        reports.append(audit_mod.check_postprocessing_bound(
            predictor, data, linked, norm=args.norm))
    elif predictor.kind == "scalar":
        reports.append(audit_mod.surrogate_calibration(
            predictor, data, linked.gamma_many, norm=args.norm,
            bin_width=args.bin_width))
        if args.c_marginal is not None:
            c_marg, estimated = args.c_marginal, False
        else:
            c_marg, estimated = audit_mod.estimate_marginal_lipschitz(
                predictor, data), True
        reports.append(audit_mod.check_discretization_bound(
            predictor, data, linked, C_marginal=c_marg, c_estimated=estimated))
    else:
        reports.append(audit_mod.discrete_calibration(
            predictor, data, linked.discrete_set))

    payload = {
        "config": {"surrogate": args.surrogate, "data": args.data,
                   "scenario": args.scenario, "predictor": args.predictor,
                   "norm": args.norm, "bin_width": args.bin_width,
                   "convention": args.convention, "out": args.out},
        "reports": [serialize.audit_report_to_json(r) for r in reports],
    }
    serialize.write_json(args.out, payload)
    sys.stdout.write(serialize.dumps(payload))
    all_ok = all(b.satisfied for r in reports for b in r.bounds)
    return EXIT_OK if all_ok else EXIT_BOUND


def _cmd_counterexample(args) -> int:
    seed = _require_seed(args)
    linked = _load_linked(args.surrogate)
    p, q, instance = audit_mod.counterexample_gap(
        linked.gamma_many, linked.n_outcomes, args.c,
        budget=args.samples, seed=seed, norm=args.norm)
    f, data = audit_mod.instance_dataset(instance)
    dist_report = audit_mod.dist_calibration_wrt(
        f, data, lambda v: float(linked.gamma(v)), norm=args.norm)
    g = audit_mod.PredictorTable(
        "scalar", {instance["x_id"]: linked.gamma(p)})
    sur_report = audit_mod.surrogate_calibration(g, data, linked.gamma_many,
                                                 norm=args.norm)
    payload = {
        "config": {"surrogate": args.surrogate, "c": args.c, "seed": seed,
                   "budget": args.samples, "norm": args.norm, "out": args.out},
        "instance": instance,
        "audits": {
            "distribution_epsilon": dist_report.epsilon_hat,
            "surrogate_epsilon": sur_report.epsilon_hat,
            "gap_exceeds_C_times_epsilon": bool(
                sur_report.epsilon_hat > args.c * dist_report.epsilon_hat),
        },
    }
    serialize.write_json(args.out + ".report.json", payload)
    serialize.write_json(args.out + ".scenario.json", {
        "features": [{"id": instance["x_id"], "weight": 1.0,
                      "conditional": instance["conditional"]}],
        "predictor": {"recipe": "fixed",
                      "table": {instance["x_id"]: instance["prediction"]}},
    })
    serialize.write_json(args.out + ".predictor.json",
                         serialize.predictor_to_json(f))
    sys.stdout.write(serialize.dumps(payload))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SPEC if exc.code not in (0, None) else 0
    try:
        if args.command == "construct":
            return _cmd_construct(args)
        if args.command == "levelsets":
            return _cmd_levelsets(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "audit":
            return _cmd_audit(args)
        if args.command == "counterexample":
            return _cmd_counterexample(args)
        raise SpecError(f"unknown command {args.command!r}")
    except SearchFailure as exc:
        sys.stderr.write(f"search failed: {exc}\n")
        return EXIT_SEARCH
    except (OrdelicError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
