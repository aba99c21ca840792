"""Primal worst-case oracles: Phi(x) = max_{P in ambiguity set at x} E_P[h(x,.)].

The probability-box/moment, Wasserstein and Kolmogorov-Smirnov families are
exact linear programs.  The mean-covariance and phi-divergence families are
convex programs solved by a cutting-plane loop on a simplex master: gradient
cuts for scalar convex constraints, eigenvector cuts for the covariance
dominance constraint, supporting-hyperplane cuts (anchored at the reference
distribution) for the divergence ball.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp, model
from .errors import (
    AmbiguityEmptyError,
    ParameterError,
    SlaterError,
    ToleranceError,
)
from .model import (
    distance_matrix,
    dy_data,
    ks_eta,
    phi_divergence,
    phi_eta,
    sm_data,
    w_radius,
)
from .symeig import min_eig, spd_factors

CUT_TOL = 1e-7
CUT_BUDGET = 500
DIST_TOL = 1e-9  # simplex residual allowed on returned distributions


@dataclass
class WorstCase:
    value: float
    p: np.ndarray  # worst-case distribution over the scenarios
    active: list = field(default_factory=list)  # (row label, multiplier)
    transport: np.ndarray = None  # joint transport plan, Wasserstein only
    warnings: list = field(default_factory=list)


def distribution_residual(p):
    p = np.asarray(p, dtype=float)
    return max(float(abs(p.sum() - 1.0)), float(max(0.0, -p.min(initial=0.0))))


def _require_weights(spec):
    w = spec.scenarios.weights
    if w is None:
        raise ParameterError(f"{spec.ambiguity.family}: reference weights are required")
    return w


def _active_rows(labels, duals, tol=1e-9):
    return [(lab, float(mult)) for lab, mult in zip(labels, duals) if abs(mult) > tol]


# ---------------------------------------------------------------------------
# probability box + componentwise moment bounds


def sm_lp(spec, x, h):
    """The inner maximization as an explicit LP (moment rows + p box)."""
    F, low, up, p_lo, p_hi = sm_data(spec, x)
    m, N = F.shape
    A = np.vstack([F, F])
    rel = [lp.GE] * m + [lp.LE] * m
    b = np.concatenate([low, up])
    return lp.LinearProgram("max", h, A, rel, b, lb=p_lo, ub=p_hi)


def worst_case_sm(spec, x):
    h = model.scenario_costs(spec, x)
    prog = sm_lp(spec, x, h)
    sol = lp.solve(prog)
    if sol.status == lp.INFEASIBLE:
        raise AmbiguityEmptyError(f"ambiguity set empty at x={list(map(float, x))}")
    if sol.status != lp.OPTIMAL:
        raise ParameterError(f"sm inner problem reported {sol.status}")
    m = len(spec.ambiguity.moments)
    labels = [f"moment[{i}] lower" for i in range(m)] + [
        f"moment[{i}] upper" for i in range(m)
    ]
    return WorstCase(
        value=float(sol.value),
        p=sol.x.copy(),
        active=_active_rows(labels, sol.dual),
    )


# ---------------------------------------------------------------------------
# Wasserstein ball around the reference distribution


def w_lp(spec, x, h):
    """Transport formulation: variables (p, w) with w the joint plan."""
    phat = _require_weights(spec)
    N = spec.N
    r = w_radius(spec, x)
    D = distance_matrix(spec.scenarios.points, spec.ambiguity.norm)
    nv = N + N * N

    def wcol(i, j):
        return N + i * N + j

    rows = []
    rel = []
    b = []
    for i in range(N):  # row marginal equals p_i
        a = np.zeros(nv)
        a[i] = -1.0
        a[[wcol(i, j) for j in range(N)]] = 1.0
        rows.append(a)
        rel.append(lp.EQ)
        b.append(0.0)
    for j in range(N):  # column marginal equals the reference weight
        a = np.zeros(nv)
        a[[wcol(i, j) for i in range(N)]] = 1.0
        rows.append(a)
        rel.append(lp.EQ)
        b.append(float(phat[j]))
    a = np.zeros(nv)  # transport budget
    for i in range(N):
        for j in range(N):
            a[wcol(i, j)] = D[i, j]
    rows.append(a)
    rel.append(lp.LE)
    b.append(r)
    a = np.zeros(nv)  # normalization
    a[:N] = 1.0
    rows.append(a)
    rel.append(lp.EQ)
    b.append(1.0)

    c = np.concatenate([h, np.zeros(N * N)])
    return lp.LinearProgram("max", c, np.array(rows), rel, np.array(b))


def worst_case_w(spec, x):
    h = model.scenario_costs(spec, x)
    prog = w_lp(spec, x, h)
    sol = lp.solve(prog)
    if sol.status == lp.INFEASIBLE:
        raise AmbiguityEmptyError(f"ambiguity set empty at x={list(map(float, x))}")
    if sol.status != lp.OPTIMAL:
        raise ParameterError(f"w inner problem reported {sol.status}")
    N = spec.N
    labels = (
        [f"marginal p[{i}]" for i in range(N)]
        + [f"marginal ref[{j}]" for j in range(N)]
        + ["transport budget", "normalization"]
    )
    return WorstCase(
        value=float(sol.value),
        p=sol.x[:N].copy(),
        active=_active_rows(labels, sol.dual),
        transport=sol.x[N:].reshape(N, N).copy(),
    )


def wasserstein_distance(points, p, q, norm="l2"):
    """Optimal-transport distance between two distributions on `points`."""
    points = np.atleast_2d(points)
    N = len(points)
    D = distance_matrix(points, norm)
    c = D.reshape(-1)
    rows = []
    b = []
    for i in range(N):
        a = np.zeros(N * N)
        a[i * N : (i + 1) * N] = 1.0
        rows.append(a)
        b.append(float(p[i]))
    for j in range(N):
        a = np.zeros(N * N)
        a[j::N] = 1.0
        rows.append(a)
        b.append(float(q[j]))
    prog = lp.LinearProgram("min", c, np.array(rows), [lp.EQ] * (2 * N), np.array(b))
    return float(lp.solve_or_raise(prog).value)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov band on cumulative sums


def ks_lp(spec, x, h):
    phat = _require_weights(spec)
    N = spec.N
    eta = ks_eta(spec, x)
    order = list(spec.ambiguity.order)
    chat = np.cumsum(phat[order])
    rows = []
    rel = []
    b = []
    for k in range(N):
        a = np.zeros(N)
        a[order[: k + 1]] = 1.0
        rows.append(a)
        rel.append(lp.LE)
        b.append(float(chat[k] + eta))
        rows.append(a.copy())
        rel.append(lp.GE)
        b.append(float(chat[k] - eta))
    rows.append(np.ones(N))
    rel.append(lp.EQ)
    b.append(1.0)
    return lp.LinearProgram("max", h, np.array(rows), rel, np.array(b))


def worst_case_ks(spec, x):
    h = model.scenario_costs(spec, x)
    prog = ks_lp(spec, x, h)
    sol = lp.solve(prog)
    if sol.status == lp.INFEASIBLE:
        raise AmbiguityEmptyError(f"ambiguity set empty at x={list(map(float, x))}")
    if sol.status != lp.OPTIMAL:
        raise ParameterError(f"ks inner problem reported {sol.status}")
    N = spec.N
    labels = []
    for k in range(N):
        labels += [f"cumulative[{k}] upper", f"cumulative[{k}] lower"]
    labels.append("normalization")
    return WorstCase(
        value=float(sol.value),
        p=sol.x.copy(),
        active=_active_rows(labels, sol.dual),
    )


# ---------------------------------------------------------------------------
# phi-divergence ball


def _phi_grad(kind, t):
    if kind == "kl":
        return np.log(np.maximum(t, 1e-300)) + 1.0
    if kind == "chisq":
        return 2.0 * (t - 1.0)
    raise ParameterError(f"unknown divergence kind {kind!r}")


def worst_case_phi(spec, x):
    phat = _require_weights(spec)
    kind = spec.ambiguity.phi
    eta = phi_eta(spec, x)
    h = model.scenario_costs(spec, x)
    N = spec.N
    if kind == "kl" and np.any(phat <= 0):
        raise ParameterError("phi: kl divergence needs strictly positive reference weights")
    if eta == 0.0:
        return WorstCase(
            value=float(h @ phat), p=phat.copy(), active=[("divergence budget", 0.0)]
        )

    # scenarios with zero reference weight are pinned to zero mass (chisq)
    ub = np.where(phat > 0, np.inf, 0.0)
    cuts_a = [np.ones(N)]
    cuts_rel = [lp.EQ]
    cuts_b = [1.0]
    best_feasible = float(h @ phat)
    value = None
    p_cur = None
    for it in range(CUT_BUDGET):
        prog = lp.LinearProgram(
            "max",
            h,
            np.array(cuts_a),
            cuts_rel,
            np.array(cuts_b),
            lb=np.zeros(N),
            ub=ub,
        )
        sol = lp.solve(prog)
        if sol.status == lp.INFEASIBLE:
            raise AmbiguityEmptyError(f"ambiguity set empty at x={list(map(float, x))}")
        p_cur = sol.x
        value = float(sol.value)
        viol = phi_divergence(kind, p_cur, phat) - eta
        if viol <= CUT_TOL:
            return WorstCase(
                value=value,
                p=p_cur.copy(),
                active=[("divergence budget", viol)],
            )
        # supporting hyperplane at the boundary point of the segment from
        # the reference distribution to the violating iterate; the anchor is
        # strictly inside the ball, so the gradient there is finite
        z = _boundary_point(kind, phat, p_cur, eta)
        t = np.where(phat > 0, z / np.maximum(phat, 1e-300), 0.0)
        g = np.where(phat > 0, _phi_grad(kind, t), 0.0)
        cuts_a.append(g)
        cuts_rel.append(lp.LE)
        cuts_b.append(float(g @ z))
        best_feasible = max(best_feasible, float(h @ z))
    raise ToleranceError(
        f"phi cutting-plane budget ({CUT_BUDGET}) exhausted; "
        f"bounds [{best_feasible}, {value}]",
        best=(best_feasible, value),
    )


def _boundary_point(kind, phat, p, eta, iters=80):
    """Point on the divergence-ball boundary along the segment phat -> p."""
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        z = (1.0 - mid) * phat + mid * p
        if phi_divergence(kind, z, phat) <= eta:
            lo = mid
        else:
            hi = mid
    return (1.0 - lo) * phat + lo * p


# ---------------------------------------------------------------------------
# mean-covariance (ellipsoid + dominance) family


@dataclass
class DyCut:
    kind: str  # "ell" or "psd"
    vec: np.ndarray  # q-tilde (ell) or eigenvector (psd)
    row: np.ndarray  # coefficients over p
    rhs: float


@dataclass
class DySolve:
    value: float
    p: np.ndarray
    cuts: list
    master: lp.LpSolution
    mu: np.ndarray
    Q: np.ndarray
    Qinv: np.ndarray
    Qinv_sqrt: np.ndarray
    Qsqrt: np.ndarray
    alpha: float
    beta: float
    warnings: list


def dy_solve(spec, x):
    mu, Q, alpha, beta = dy_data(spec, x)
    Qinv, Qinv_sqrt, Qsqrt = spd_factors(Q, where=" (Q(x))")
    pts = spec.scenarios.points
    N, d = spec.N, spec.d
    h = model.scenario_costs(spec, x)
    diffs = pts - mu  # N x d
    Amats = [np.outer(diffs[k], diffs[k]) for k in range(N)]

    warnings = []
    if alpha <= 1e-12 or beta <= 1e-12:
        warnings.append(
            "strict feasibility impossible (alpha or beta is zero): "
            "duality validated numerically instead of by hypothesis"
        )

    cuts = []
    rows = [np.ones(N)]
    rel = [lp.EQ]
    rhs = [1.0]
    sol = None
    for it in range(CUT_BUDGET + 1):
        prog = lp.LinearProgram(
            "max", h, np.array(rows), rel, np.array(rhs), lb=np.zeros(N)
        )
        sol = lp.solve(prog)
        if sol.status == lp.INFEASIBLE:
            raise SlaterError(
                f"no distribution satisfies the mean/covariance restrictions at "
                f"x={list(map(float, x))}; strong duality here needs a strictly "
                "feasible one"
            )
        p = sol.x
        tau = p @ pts
        qt = tau - mu
        e_viol = float(qt @ Qinv @ qt - alpha)
        M = np.zeros((d, d))
        for k in range(N):
            if p[k] > 0:
                M += p[k] * Amats[k]
        lam, v = min_eig(beta * Q - M)
        s_viol = -lam
        if max(e_viol, s_viol) <= CUT_TOL:
            return DySolve(
                value=float(sol.value),
                p=p.copy(),
                cuts=cuts,
                master=sol,
                mu=mu,
                Q=Q,
                Qinv=Qinv,
                Qinv_sqrt=Qinv_sqrt,
                Qsqrt=Qsqrt,
                alpha=alpha,
                beta=beta,
                warnings=warnings,
            )
        if it == CUT_BUDGET:
            break
        if e_viol > CUT_TOL:
            w = Qinv @ qt
            row = 2.0 * (pts @ w)
            bound = float(alpha + qt @ w + 2.0 * (w @ mu))
            cuts.append(DyCut("ell", qt.copy(), row, bound))
            rows.append(row)
            rel.append(lp.LE)
            rhs.append(bound)
        if s_viol > CUT_TOL:
            row = np.array([float(v @ Amats[k] @ v) for k in range(N)])
            bound = float(beta * (v @ Q @ v))
            cuts.append(DyCut("psd", v.copy(), row, bound))
            rows.append(row)
            rel.append(lp.LE)
            rhs.append(bound)
    raise ToleranceError(
        f"mean-covariance cutting-plane budget ({CUT_BUDGET}) exhausted; "
        f"best master value {float(sol.value)}, violation "
        f"{max(e_viol, s_viol):.3e}",
        best=float(sol.value),
    )


def worst_case_dy(spec, x):
    res = dy_solve(spec, x)
    active = [
        (f"{c.kind} cut[{i}]", float(m))
        for i, (c, m) in enumerate(zip(res.cuts, res.master.dual[1:]))
        if abs(m) > 1e-9
    ]
    return WorstCase(
        value=res.value, p=res.p, active=active, warnings=list(res.warnings)
    )


# ---------------------------------------------------------------------------
# dispatch + membership


def worst_case(spec, x):
    fam = spec.ambiguity.family
    if fam == "sm":
        return worst_case_sm(spec, x)
    if fam == "dy":
        return worst_case_dy(spec, x)
    if fam == "w":
        return worst_case_w(spec, x)
    if fam == "phi":
        return worst_case_phi(spec, x)
    if fam == "ks":
        return worst_case_ks(spec, x)
    raise ParameterError(f"no finite-support worst case for family {fam!r}")


def membership_residual(spec, x, p):
    """How far `p` is from the ambiguity set at x (<= 0 means inside).

    Independent of the oracle code paths above: recomputes the defining
    quantities directly from the parameter expressions.
    """
    p = np.asarray(p, dtype=float)
    fam = spec.ambiguity.family
    resid = distribution_residual(p)
    if fam == "sm":
        F, low, up, p_lo, p_hi = sm_data(spec, x)
        vals = F @ p
        resid = max(
            resid,
            float(np.max(low - vals, initial=0.0)),
            float(np.max(vals - up, initial=0.0)),
            float(np.max(p_lo - p, initial=0.0)),
            float(np.max(p - p_hi, initial=0.0)),
        )
    elif fam == "dy":
        mu, Q, alpha, beta = dy_data(spec, x)
        Qinv, _, _ = spd_factors(Q)
        pts = spec.scenarios.points
        tau = p @ pts
        qt = tau - mu
        resid = max(resid, float(qt @ Qinv @ qt - alpha))
        M = np.zeros_like(Q)
        for k in range(spec.N):
            diff = pts[k] - mu
            M += p[k] * np.outer(diff, diff)
        lam, _ = min_eig(beta * Q - M)
        resid = max(resid, float(-lam))
    elif fam == "w":
        phat = _require_weights(spec)
        dist = wasserstein_distance(
            spec.scenarios.points, p, phat, spec.ambiguity.norm
        )
        resid = max(resid, dist - w_radius(spec, x))
    elif fam == "phi":
        phat = _require_weights(spec)
        resid = max(
            resid, phi_divergence(spec.ambiguity.phi, p, phat) - phi_eta(spec, x)
        )
    elif fam == "ks":
        phat = _require_weights(spec)
        order = list(spec.ambiguity.order)
        dev = np.abs(np.cumsum(p[order]) - np.cumsum(phat[order]))
        resid = max(resid, float(np.max(dev)) - ks_eta(spec, x))
    else:
        raise ParameterError(f"no membership test for family {fam!r}")
    return float(resid)
