"""Outer minimization of F(x) = f(x) + Phi(x) over the decision box.

Phi is piecewise smooth at best (inner active sets change with x), so the
search is derivative free: multi-start coordinate polling with step halving,
start points drawn from a seeded Halton sequence.  Decisions where the
ambiguity set is empty are treated as +inf and flagged, letting the search
route around them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import dual, expr, inner, model, sip
from .errors import (
    AmbiguityEmptyError,
    ParameterError,
    SlaterError,
)

INFEASIBLE_KINDS = (AmbiguityEmptyError, SlaterError, ParameterError)


@dataclass
class SolveOptions:
    starts: int = 8
    seed: int = 0
    tol: float = 1e-5
    budget: int = 50_000  # total inner-oracle evaluations across starts


@dataclass
class Trajectory:
    start_index: int
    start: np.ndarray
    x: np.ndarray
    value: float
    iterations: int
    calls: int


@dataclass
class Evaluation:
    value: float  # F(x) = f(x) + Phi(x)
    f_value: float
    phi_value: float
    worst: inner.WorstCase = None
    certificate: dual.DualCertificate = None
    gap_report: dual.GapReport = None
    sip_state: sip.SipState = None


@dataclass
class SolveReport:
    best_x: np.ndarray
    best_value: float
    trajectories: list
    inner_calls: int
    infeasible_points: int
    distinct_values: int
    gap: dual.GapReport = None
    options: SolveOptions = None
    warnings: list = field(default_factory=list)


def phi_value(spec, x):
    """Worst-case expectation at x (no certificate work)."""
    fam = spec.ambiguity.family
    if fam == "wc":
        val, _, _ = sip.wass_cont_value(spec, x)
        return val
    if fam == "ksc":
        val, _, _, _ = sip.ks_cont_value(spec, x)
        return val
    return inner.worst_case(spec, x).value


def evaluate(spec, x):
    """F(x) with the primal worst case, the dual certificate, and their gap."""
    x = np.asarray(x, dtype=float)
    if not spec.in_box(x):
        raise ParameterError(f"x={list(map(float, x))} outside the decision box")
    fv = float(expr.evaluate(spec.f, x))
    fam = spec.ambiguity.family
    if fam == "wc":
        val, _, state = sip.wass_cont_value(spec, x)
        return Evaluation(value=fv + val, f_value=fv, phi_value=val, sip_state=state)
    if fam == "ksc":
        val, _, _, _ = sip.ks_cont_value(spec, x)
        return Evaluation(value=fv + val, f_value=fv, phi_value=val)
    worst = inner.worst_case(spec, x)
    cert = dual.dual_value(spec, x)
    report = dual.validate_duality(spec, x)
    return Evaluation(
        value=fv + worst.value,
        f_value=fv,
        phi_value=worst.value,
        worst=worst,
        certificate=cert,
        gap_report=report,
    )


def minimize(spec, options: SolveOptions = None) -> SolveReport:
    options = options or SolveOptions()
    n = spec.n
    lo, hi = spec.x_lower, spec.x_upper
    width = hi - lo

    halton = qmc.Halton(d=n, scramble=True, seed=options.seed)
    starts = lo + halton.random(options.starts) * width

    cache = {}
    stats = {"calls": 0, "infeasible": 0}

    def F(x):
        key = tuple(float(v) for v in x)
        if key in cache:
            return cache[key]
        if stats["calls"] >= options.budget:
            raise _BudgetExhausted()
        stats["calls"] += 1
        try:
            val = float(expr.evaluate(spec.f, x)) + phi_value(spec, x)
        except INFEASIBLE_KINDS:
            stats["infeasible"] += 1
            val = np.inf
        cache[key] = val
        return val

    trajectories = []
    for si in range(options.starts):
        x = starts[si].copy()
        try:
            val = F(x)
            x, val, iters = _pattern_search(F, x, lo, hi, width / 4.0, options.tol)
        except _BudgetExhausted:
            trajectories.append(
                Trajectory(si, starts[si].copy(), x, cache.get(tuple(map(float, x)), np.inf), 0, stats["calls"])
            )
            break
        trajectories.append(Trajectory(si, starts[si].copy(), x, val, iters, stats["calls"]))

    finite = [t for t in trajectories if np.isfinite(t.value)]
    if not finite:
        raise AmbiguityEmptyError("ambiguity set empty on sampled decision box")
    best = finite[0]
    for t in finite[1:]:
        if t.value < best.value or (
            t.value == best.value and tuple(t.x) < tuple(best.x)
        ):
            best = t

    vals = sorted(t.value for t in finite)
    distinct = 1 + sum(
        1 for a, b in zip(vals, vals[1:]) if b - a > 1e-8 * (1.0 + abs(b))
    )

    gap = None
    warnings = []
    if spec.ambiguity.family not in ("wc", "ksc"):
        try:
            gap = dual.validate_duality(spec, best.x)
        except INFEASIBLE_KINDS as e:
            warnings.append(f"no duality report at the incumbent: {e}")
    return SolveReport(
        best_x=best.x.copy(),
        best_value=best.value,
        trajectories=trajectories,
        inner_calls=stats["calls"],
        infeasible_points=stats["infeasible"],
        distinct_values=distinct,
        gap=gap,
        options=options,
        warnings=warnings,
    )


class _BudgetExhausted(Exception):
    pass


def _pattern_search(F, x, lo, hi, step0, tol):
    """Coordinate polling with step halving; returns (x, F(x), iterations)."""
    x = x.copy()
    val = F(x)
    step = step0.astype(float).copy()
    iters = 0
    n = x.size
    while float(np.max(step)) >= tol:
        iters += 1
        best_cand, best_val = None, val
        for j in range(n):
            for sign in (1.0, -1.0):
                cand = x.copy()
                cand[j] = min(max(cand[j] + sign * step[j], lo[j]), hi[j])
                if cand[j] == x[j]:
                    continue
                cv = F(cand)
                if cv < best_val:
                    best_cand, best_val = cand, cv
        if best_cand is None:
            step *= 0.5
        else:
            x, val = best_cand, best_val
    return x, val, iters
