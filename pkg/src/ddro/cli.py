"""Command-line front end: problem files in, JSON reports out.

Commands
  solve        minimize f(x) + Phi(x) over the decision box
  worst-case   evaluate the inner worst case and its dual certificate at x
  validate     sample the box and check the primal/dual gap everywhere
  sip          run the exchange loop (wc / ksc / phi families) at fixed x

Exit codes: 0 success, 2 input/validation problem, 3 solver failure.
Reports are schema-stable JSON; errors go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import dual, expr, inner, model, outer, sip
from .errors import (
    AmbiguityEmptyError,
    ConsistencyError,
    DdroError,
    ExprError,
    LpIterationError,
    NonterminationError,
    ParameterError,
    RecourseInfeasibleError,
    SlaterError,
    SpecError,
    ToleranceError,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

_SOLVER_ERRORS = (
    AmbiguityEmptyError,
    SlaterError,
    ToleranceError,
    NonterminationError,
    LpIterationError,
    ConsistencyError,
    RecourseInfeasibleError,
)


class SchemaError(DdroError):
    """Problem file violates the document schema."""


# ---------------------------------------------------------------------------
# problem-file schema (strict: unknown keys are rejected)


def _require_keys(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object")
    allowed = set(required) | set(optional)
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}: unknown key")
    for key in required:
        if key not in obj:
            raise SchemaError(f"{path}.{key}: missing")


def _parse_expr(text, n, d, path):
    if not isinstance(text, str):
        raise SchemaError(f"{path}: expected an expression string")
    try:
        return expr.parse(text, n, d)
    except ExprError as e:
        raise SchemaError(f"{path}: {e}") from None


def _expr_list(items, count, n, d, path):
    if not isinstance(items, list) or (count is not None and len(items) != count):
        raise SchemaError(f"{path}: expected a list of {count} expression strings")
    return [_parse_expr(t, n, d, f"{path}[{i}]") for i, t in enumerate(items)]


def _float_list(items, count, path):
    if not isinstance(items, list) or (count is not None and len(items) != count):
        raise SchemaError(f"{path}: expected a list of {count} numbers")
    try:
        return [float(v) for v in items]
    except (TypeError, ValueError):
        raise SchemaError(f"{path}: expected numbers") from None


def load_problem(doc):
    """Build a validated ProblemSpec from a problem-file dictionary."""
    _require_keys(doc, "$", ("decision", "objective_f", "scenarios", "cost", "ambiguity"))
    dec = doc["decision"]
    _require_keys(dec, "$.decision", ("dim", "lower", "upper"))
    n = dec["dim"]
    if not isinstance(n, int) or n < 1:
        raise SchemaError("$.decision.dim: expected a positive integer")
    x_lower = np.array(_float_list(dec["lower"], n, "$.decision.lower"))
    x_upper = np.array(_float_list(dec["upper"], n, "$.decision.upper"))

    sc = doc["scenarios"]
    _require_keys(sc, "$.scenarios", ("points",), ("weights",))
    pts = sc["points"]
    if not isinstance(pts, list) or not pts:
        raise SchemaError("$.scenarios.points: expected a nonempty list of points")
    d = len(pts[0]) if isinstance(pts[0], list) else None
    if d is None or d < 1:
        raise SchemaError("$.scenarios.points: each point must be a list of numbers")
    points = np.array(
        [_float_list(p, d, f"$.scenarios.points[{i}]") for i, p in enumerate(pts)]
    )
    N = len(points)
    weights = None
    if "weights" in sc:
        weights = np.array(_float_list(sc["weights"], N, "$.scenarios.weights"))
    scenarios = model.ScenarioSet(points, weights)

    f = _parse_expr(doc["objective_f"], n, 0, "$.objective_f")
    cost = _load_cost(doc["cost"], n, d)
    ambiguity = _load_ambiguity(doc["ambiguity"], n, d, N)
    spec = model.ProblemSpec(
        n=n,
        x_lower=x_lower,
        x_upper=x_upper,
        f=f,
        scenarios=scenarios,
        cost=cost,
        ambiguity=ambiguity,
    )
    diags = model.validate(spec)
    if diags:
        raise SpecError(diags)
    return spec


def _load_cost(doc, n, d):
    if not isinstance(doc, dict) or "type" not in doc:
        raise SchemaError("$.cost: expected an object with a 'type'")
    if doc["type"] == "expr":
        _require_keys(doc, "$.cost", ("type", "h"))
        return model.ClosedFormCost(_parse_expr(doc["h"], n, d, "$.cost.h"))
    if doc["type"] == "recourse":
        _require_keys(doc, "$.cost", ("type", "y_dim", "q", "W", "T", "rhs"))
        y_dim = doc["y_dim"]
        if not isinstance(y_dim, int) or y_dim < 1:
            raise SchemaError("$.cost.y_dim: expected a positive integer")
        q = _expr_list(doc["q"], y_dim, 0, d, "$.cost.q")
        W_doc, T_doc, rhs_doc = doc["W"], doc["T"], doc["rhs"]
        if not (isinstance(W_doc, list) and isinstance(T_doc, list) and isinstance(rhs_doc, list)):
            raise SchemaError("$.cost: W, T, rhs must be lists")
        rows = len(W_doc)
        if len(T_doc) != rows or len(rhs_doc) != rows:
            raise SchemaError("$.cost: W, T, rhs must have the same number of rows")
        W = [_expr_list(row, y_dim, 0, d, f"$.cost.W[{r}]") for r, row in enumerate(W_doc)]
        T = [_expr_list(row, n, d, f"$.cost.T[{r}]") for r, row in enumerate(T_doc)]
        rhs = _expr_list(rhs_doc, rows, 0, d, "$.cost.rhs")
        return model.RecourseCost(y_dim=y_dim, q=q, W=W, T=T, rhs=rhs)
    raise SchemaError(f"$.cost.type: unknown cost type {doc['type']!r}")


def _load_ambiguity(doc, n, d, N):
    if not isinstance(doc, dict) or "family" not in doc:
        raise SchemaError("$.ambiguity: expected an object with a 'family'")
    fam = doc["family"]
    path = "$.ambiguity"
    if fam == "sm":
        _require_keys(doc, path, ("family",), ("moments", "lower", "upper", "p_lower", "p_upper"))
        moments = doc.get("moments", [])
        lower = doc.get("lower", [])
        upper = doc.get("upper", [])
        if not (len(moments) == len(lower) == len(upper)):
            raise SchemaError(f"{path}: moments, lower, upper must have equal length")
        mom = [_parse_expr(t, 0, d, f"{path}.moments[{i}]") for i, t in enumerate(moments)]
        low = [_parse_expr(t, n, 0, f"{path}.lower[{i}]") for i, t in enumerate(lower)]
        up = [_parse_expr(t, n, 0, f"{path}.upper[{i}]") for i, t in enumerate(upper)]
        one_xi = expr.parse("1", 0, d)
        one_x = expr.parse("1", n, 0)
        p_lo = _expr_list(doc["p_lower"], N, n, 0, f"{path}.p_lower") if "p_lower" in doc else [
            expr.parse("0", n, 0) for _ in range(N)
        ]
        p_hi = _expr_list(doc["p_upper"], N, n, 0, f"{path}.p_upper") if "p_upper" in doc else [
            expr.parse("1", n, 0) for _ in range(N)
        ]
        return model.SmParams(
            moments=[one_xi] + mom,
            lower=[one_x] + low,
            upper=[one_x] + up,
            p_lower=p_lo,
            p_upper=p_hi,
        )
    if fam == "dy":
        _require_keys(doc, path, ("family", "mu", "Q", "alpha", "beta"))
        mu = _expr_list(doc["mu"], d, n, 0, f"{path}.mu")
        Q_doc = doc["Q"]
        if not isinstance(Q_doc, list) or len(Q_doc) != d:
            raise SchemaError(f"{path}.Q: expected a {d}x{d} matrix of expressions")
        Q = [_expr_list(row, d, n, 0, f"{path}.Q[{r}]") for r, row in enumerate(Q_doc)]
        return model.DyParams(
            mu=mu,
            Q=Q,
            alpha=_parse_expr(doc["alpha"], n, 0, f"{path}.alpha"),
            beta=_parse_expr(doc["beta"], n, 0, f"{path}.beta"),
        )
    if fam == "w":
        _require_keys(doc, path, ("family", "radius"), ("norm",))
        norm = doc.get("norm", "l2")
        if norm not in model.NORMS:
            raise SchemaError(f"{path}.norm: unknown norm {norm!r}")
        return model.WParams(radius=_parse_expr(doc["radius"], n, 0, f"{path}.radius"), norm=norm)
    if fam == "phi":
        _require_keys(doc, path, ("family", "eta"), ("phi",))
        kind = doc.get("phi", "kl")
        if kind not in model.PHI_KINDS:
            raise SchemaError(f"{path}.phi: unknown divergence {kind!r}")
        return model.PhiParams(eta=_parse_expr(doc["eta"], n, 0, f"{path}.eta"), phi=kind)
    if fam == "ks":
        _require_keys(doc, path, ("family", "eta"), ("order",))
        order = None
        if "order" in doc:
            order = doc["order"]
            if not isinstance(order, list) or sorted(order) != list(range(N)):
                raise SchemaError(f"{path}.order: expected a permutation of 0..{N - 1}")
            order = tuple(int(i) for i in order)
        return model.KsParams(eta=_parse_expr(doc["eta"], n, 0, f"{path}.eta"), order=order)
    if fam in ("wc", "ksc"):
        required = ("family", "radius", "box") if fam == "wc" else ("family", "eta", "box")
        optional = ("norm",) if fam == "wc" else ("h_convex_in_scenario",)
        _require_keys(doc, path, required, optional)
        box = doc["box"]
        _require_keys(box, f"{path}.box", ("lower", "upper"))
        lo = np.array(_float_list(box["lower"], d, f"{path}.box.lower"))
        hi = np.array(_float_list(box["upper"], d, f"{path}.box.upper"))
        if fam == "wc":
            norm = doc.get("norm", "l2")
            if norm not in model.NORMS:
                raise SchemaError(f"{path}.norm: unknown norm {norm!r}")
            return model.WcParams(
                radius=_parse_expr(doc["radius"], n, 0, f"{path}.radius"),
                box_lower=lo,
                box_upper=hi,
                norm=norm,
            )
        convex = doc.get("h_convex_in_scenario", False)
        if not isinstance(convex, bool):
            raise SchemaError(f"{path}.h_convex_in_scenario: expected a boolean")
        return model.KscParams(
            eta=_parse_expr(doc["eta"], n, 0, f"{path}.eta"),
            box_lower=lo,
            box_upper=hi,
            h_convex_in_scenario=convex,
        )
    raise SchemaError(f"{path}.family: unknown family {fam!r}")


def load_problem_file(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise SchemaError(f"cannot read problem file: {e}") from None
    except json.JSONDecodeError as e:
        raise SchemaError(f"problem file is not valid JSON: {e}") from None
    return load_problem(doc), doc


# ---------------------------------------------------------------------------
# report plumbing


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _resolved_section(spec):
    resolved = {"families": spec.ambiguity.family, "N": spec.N, "d": spec.d}
    if spec.ambiguity.family == "ks":
        resolved["order"] = list(spec.ambiguity.order)
    if spec.scenarios.weights is not None:
        resolved["weights"] = spec.scenarios.weights
    return resolved


def _gap_dict(report):
    return {
        "family": report.family,
        "primal": report.primal,
        "dual": report.dual,
        "abs_gap": report.abs_gap,
        "rel_gap": report.rel_gap,
        "tol": report.tol,
        "passed": report.passed,
        "warnings": list(report.warnings),
    }


def _cert_dict(cert):
    return {
        "family": cert.family,
        "value": cert.value,
        "primal_value": cert.primal_value,
        "multipliers": {k: _jsonable(v) for k, v in cert.multipliers.items()},
        "residual": cert.residual,
        "notes": list(cert.notes),
        "warnings": list(cert.warnings),
    }


def _emit(report, out, started):
    report = dict(report)
    report["timing"] = {"seconds": time.perf_counter() - started}
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _fail(kind, detail, code):
    sys.stderr.write(json.dumps({"error": kind, "detail": str(detail)}) + "\n")
    return code


def _parse_x(text, spec):
    try:
        x = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise SchemaError(f"--x: expected comma-separated numbers, got {text!r}") from None
    if x.shape != (spec.n,):
        raise SchemaError(f"--x: expected {spec.n} components, got {x.size}")
    if not spec.in_box(x):
        raise SchemaError(f"--x: {list(map(float, x))} outside the decision box")
    return x


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args):
    started = time.perf_counter()
    spec, doc = load_problem_file(args.file)
    options = outer.SolveOptions(
        starts=args.starts, seed=args.seed, tol=args.tol, budget=args.budget
    )
    report = outer.minimize(spec, options)
    payload = {
        "command": "solve",
        "input": doc,
        "resolved": _resolved_section(spec),
        "options": {
            "starts": options.starts,
            "seed": options.seed,
            "tol": options.tol,
            "budget": options.budget,
        },
        "result": {
            "best_x": report.best_x,
            "best_value": report.best_value,
            "inner_calls": report.inner_calls,
            "infeasible_points": report.infeasible_points,
            "distinct_values": report.distinct_values,
            "gap": _gap_dict(report.gap) if report.gap else None,
            "starts": [
                {
                    "index": t.start_index,
                    "start": t.start,
                    "x": t.x,
                    "value": t.value,
                    "iterations": t.iterations,
                }
                for t in report.trajectories
            ],
            "warnings": list(report.warnings),
        },
    }
    _emit(payload, args.out, started)
    return EXIT_OK


def cmd_worst_case(args):
    started = time.perf_counter()
    spec, doc = load_problem_file(args.file)
    if spec.ambiguity.family in ("wc", "ksc"):
        raise SchemaError(
            "worst-case handles the finite-support families; use `sip` for "
            "continuous support"
        )
    x = _parse_x(args.x, spec)
    ev = outer.evaluate(spec, x)
    result = {
        "x": x,
        "phi": ev.phi_value,
        "f": ev.f_value,
        "objective": ev.value,
        "distribution": ev.worst.p,
        "active": [[lab, m] for lab, m in ev.worst.active],
        "warnings": list(ev.worst.warnings),
        "certificate": _cert_dict(ev.certificate),
        "gap": _gap_dict(ev.gap_report),
    }
    if ev.worst.transport is not None:
        result["transport"] = ev.worst.transport
    payload = {
        "command": "worst-case",
        "input": doc,
        "resolved": _resolved_section(spec),
        "options": {"x": x},
        "result": result,
    }
    _emit(payload, args.out, started)
    return EXIT_OK


def cmd_validate(args):
    started = time.perf_counter()
    spec, doc = load_problem_file(args.file)
    if spec.ambiguity.family in ("wc", "ksc"):
        raise SchemaError("validate needs a finite-support family")
    rng = np.random.default_rng(args.seed)
    samples = spec.x_lower + rng.random((args.samples, spec.n)) * (
        spec.x_upper - spec.x_lower
    )
    reports = []
    infeasible = 0
    failures = 0
    max_abs = 0.0
    max_rel = 0.0
    for x in samples:
        try:
            rep = dual.validate_duality(spec, x)
        except (AmbiguityEmptyError, SlaterError, ParameterError) as e:
            infeasible += 1
            reports.append({"x": x, "infeasible": str(e)})
            continue
        max_abs = max(max_abs, rep.abs_gap)
        max_rel = max(max_rel, rep.rel_gap)
        failures += 0 if rep.passed else 1
        reports.append(_gap_dict(rep) | {"x": x})
    payload = {
        "command": "validate",
        "input": doc,
        "resolved": _resolved_section(spec),
        "options": {"samples": args.samples, "seed": args.seed},
        "result": {
            "max_abs_gap": max_abs,
            "max_rel_gap": max_rel,
            "failures": failures,
            "infeasible": infeasible,
            "reports": reports,
        },
    }
    _emit(payload, args.out, started)
    if infeasible == args.samples:
        raise AmbiguityEmptyError(
            f"ambiguity set empty at all {infeasible} sampled decisions"
        )
    return EXIT_OK if failures == 0 else EXIT_SOLVER


def cmd_sip(args):
    started = time.perf_counter()
    spec, doc = load_problem_file(args.file)
    if args.eps <= 0:
        raise SchemaError("eps must be positive")
    x = _parse_x(args.x, spec)
    fam = spec.ambiguity.family
    if fam == "wc":
        problem = sip.build_wass_cont(spec, x, eps=args.eps)
        v, state = sip.solve_sip(problem)
        resid = sip.verify_on_grid(problem, v)
        result = {
            "x": x,
            "value": float(problem.c @ v),
            "eps": args.eps,
            "multipliers": v,
            "trace": state.as_dict(),
            "final_violation": state.violations[-1],
            "verification_residual": resid,
        }
    elif fam == "ksc":
        value, cells, sups, sol = sip.ks_cont_value(spec, x)
        result = {
            "x": x,
            "value": value,
            "eps": args.eps,
            "cell_grid": {
                "coordinates": [list(map(float, c)) for c in cells.coords],
                "cumulative_counts": cells.counts,
                "cell_mass": cells.cell_mass,
            },
            "cell_suprema": sups,
        }
    elif fam == "phi":
        problem = sip.build_phi_sip(spec, x, eps=args.eps)
        v, state = sip.solve_sip(problem)
        resid = sip.verify_on_grid(problem, v)
        result = {
            "x": x,
            "value": float(v[0]),
            "eps": args.eps,
            "trace": state.as_dict(),
            "final_violation": state.violations[-1],
            "verification_residual": resid,
        }
    else:
        raise SchemaError(
            f"sip handles the wc, ksc and phi families, not {fam!r}"
        )
    payload = {
        "command": "sip",
        "input": doc,
        "resolved": _resolved_section(spec),
        "options": {"x": x, "eps": args.eps},
        "result": result,
    }
    _emit(payload, args.out, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ddro",
        description="Distributionally robust optimization with decision-dependent ambiguity sets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="minimize f(x) + Phi(x) over the decision box")
    p.add_argument("file")
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--budget", type=int, default=50_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("worst-case", help="inner worst case + dual certificate at x")
    p.add_argument("file")
    p.add_argument("--x", required=True, help="decision vector, comma separated")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_worst_case)

    p = sub.add_parser("validate", help="duality gap over sampled decisions")
    p.add_argument("file")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sip", help="exchange loop at fixed x (wc, ksc, phi)")
    p.add_argument("file")
    p.add_argument("--x", required=True, help="decision vector, comma separated")
    p.add_argument("--eps", type=float, default=sip.DEFAULT_EPS)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sip)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, SpecError, ExprError, ParameterError) as e:
        return _fail(type(e).__name__, e, EXIT_VALIDATION)
    except _SOLVER_ERRORS as e:
        return _fail(type(e).__name__, e, EXIT_SOLVER)


if __name__ == "__main__":
    sys.exit(main())
