"""Dual reformulations of the inner worst-case problems, as certificates.

Each family's dual is built mechanically from its primal (the printed
closed forms circulating for these sets have sign and index slips, so the
certificate carries descriptive `notes` stating the convention actually
used).  Every constructor also solves the primal side and records the gap:
a certificate is evidence, not an assumption.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import inner, lp, model
from .errors import (
    AmbiguityEmptyError,
    ConsistencyError,
    ParameterError,
    ToleranceError,
)
from .model import dy_data, ks_eta, phi_eta, sm_data, w_radius
from .symeig import min_eig

# value agreement demanded of a certificate, scaled by 1 + |primal|
FAMILY_TOL = {"sm": 1e-7, "w": 1e-7, "ks": 1e-7, "dy": 5e-6, "phi": 1e-5}
# pass/fail thresholds for validate_duality reports
REPORT_TOL = {"sm": 1e-6, "w": 1e-6, "ks": 1e-6, "dy": 5e-6, "phi": 1e-5}

Y_EIG_TOL = -1e-8


@dataclass
class DualCertificate:
    family: str
    value: float  # dual objective
    primal_value: float
    multipliers: dict
    residual: float  # worst dual-feasibility violation
    notes: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def gap(self):
        return abs(self.value - self.primal_value)


@dataclass
class GapReport:
    family: str
    x: np.ndarray
    primal: float
    dual: float
    abs_gap: float
    rel_gap: float
    tol: float
    passed: bool
    warnings: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# probability box + moment bounds


def dual_value_sm(spec, x):
    h = model.scenario_costs(spec, x)
    F, low, up, p_lo, p_hi = sm_data(spec, x)
    m, N = F.shape
    primal = inner.worst_case_sm(spec, x)

    # variables: alpha (m, >=0), beta (m, <=0), gamma (N, >=0), mu (N, <=0)
    nv = 2 * m + 2 * N
    c = np.concatenate([up, low, p_hi, p_lo])
    A = np.zeros((N, nv))
    for k in range(N):
        A[k, :m] = F[:, k]
        A[k, m : 2 * m] = F[:, k]
        A[k, 2 * m + k] = 1.0
        A[k, 2 * m + N + k] = 1.0
    lb = np.concatenate([np.zeros(m), np.full(m, -np.inf), np.zeros(N), np.full(N, -np.inf)])
    ub = np.concatenate([np.full(m, np.inf), np.zeros(m), np.full(N, np.inf), np.zeros(N)])
    prog = lp.LinearProgram("min", c, A, [lp.GE] * N, h, lb=lb, ub=ub)
    sol = lp.solve(prog)
    if sol.status == lp.UNBOUNDED:
        raise AmbiguityEmptyError(f"ambiguity set empty at x={list(map(float, x))}")
    if sol.status != lp.OPTIMAL:
        raise ParameterError(f"sm dual problem reported {sol.status}")
    alpha = sol.x[:m]
    beta = sol.x[m : 2 * m]
    gamma = sol.x[2 * m : 2 * m + N]
    mu = sol.x[2 * m + N :]
    resid = max(
        float(np.max(h - A @ sol.x, initial=0.0)),
        float(np.max(-alpha, initial=0.0)),
        float(np.max(beta, initial=0.0)),
        float(np.max(-gamma, initial=0.0)),
        float(np.max(mu, initial=0.0)),
    )
    return DualCertificate(
        family="sm",
        value=float(sol.value),
        primal_value=primal.value,
        multipliers={"alpha": alpha, "beta": beta, "gamma": gamma, "mu": mu},
        residual=resid,
        notes=[
            "objective pairs alpha with the upper moment bounds and gamma with "
            "the upper probability bounds (mechanical dual of the inner LP)"
        ],
    )


# ---------------------------------------------------------------------------
# Wasserstein ball


def dual_value_w(spec, x):
    h = model.scenario_costs(spec, x)
    phat = spec.scenarios.weights
    N = spec.N
    r = w_radius(spec, x)
    D = model.distance_matrix(spec.scenarios.points, spec.ambiguity.norm)
    primal = inner.worst_case_w(spec, x)

    # variables: alpha (N, free), beta (N, free), gamma (<=0), eta (free)
    nv = 2 * N + 2
    c = np.concatenate([np.zeros(N), -phat, [-r, 1.0]])
    rows = []
    b = []
    for i in range(N):  # alpha_i + eta >= h_i
        a = np.zeros(nv)
        a[i] = 1.0
        a[-1] = 1.0
        rows.append(a)
        b.append(h[i])
    for i in range(N):  # -alpha_i - beta_j - d_ij gamma >= 0
        for j in range(N):
            a = np.zeros(nv)
            a[i] = -1.0
            a[N + j] = -1.0
            a[-2] = -D[i, j]
            rows.append(a)
            b.append(0.0)
    lb = np.full(nv, -np.inf)
    ub = np.full(nv, np.inf)
    ub[-2] = 0.0  # gamma <= 0
    prog = lp.LinearProgram("min", c, np.array(rows), [lp.GE] * len(rows), np.array(b), lb=lb, ub=ub)
    sol = lp.solve(prog)
    if sol.status == lp.UNBOUNDED:
        raise AmbiguityEmptyError(f"ambiguity set empty at x={list(map(float, x))}")
    if sol.status != lp.OPTIMAL:
        raise ParameterError(f"w dual problem reported {sol.status}")
    alpha = sol.x[:N]
    beta = sol.x[N : 2 * N]
    gamma = float(sol.x[-2])
    eta = float(sol.x[-1])
    mu = alpha + eta - h  # slack of the first row family
    lam = -alpha[:, None] - beta[None, :] - D * gamma
    resid = max(
        float(np.max(-mu, initial=0.0)),
        float(np.max(-lam, initial=0.0)),
        max(0.0, gamma),
    )
    return DualCertificate(
        family="w",
        value=float(sol.value),
        primal_value=primal.value,
        multipliers={
            "alpha": alpha,
            "beta": beta,
            "mu": np.maximum(mu, 0.0),
            "lambda": np.maximum(lam, 0.0),
            "gamma": gamma,
            "eta": eta,
        },
        residual=resid,
        notes=[
            "transport rows enter as -alpha_i - beta_j - d_ij*gamma >= 0 "
            "(mechanical dual of the transport LP)"
        ],
    )


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov band


def dual_value_ks(spec, x):
    h = model.scenario_costs(spec, x)
    phat = spec.scenarios.weights
    N = spec.N
    eta = ks_eta(spec, x)
    order = list(spec.ambiguity.order)
    chat = np.cumsum(phat[order])
    primal = inner.worst_case_ks(spec, x)

    # variables: lambda (free), alpha (N, <=0), beta (N, >=0)
    nv = 1 + 2 * N
    c = np.concatenate([[1.0], chat - eta, chat + eta])
    rows = []
    b = []
    for i in range(N):  # lambda + sum_{k>=i} (alpha_k + beta_k) >= h(ordered i)
        a = np.zeros(nv)
        a[0] = 1.0
        a[1 + i : 1 + N] = 1.0
        a[1 + N + i : 1 + 2 * N] = 1.0
        rows.append(a)
        b.append(h[order[i]])
    lb = np.concatenate([[-np.inf], np.full(N, -np.inf), np.zeros(N)])
    ub = np.concatenate([[np.inf], np.zeros(N), np.full(N, np.inf)])
    prog = lp.LinearProgram("min", c, np.array(rows), [lp.GE] * N, np.array(b), lb=lb, ub=ub)
    sol = lp.solve(prog)
    if sol.status == lp.UNBOUNDED:
        raise AmbiguityEmptyError(f"ambiguity set empty at x={list(map(float, x))}")
    if sol.status != lp.OPTIMAL:
        raise ParameterError(f"ks dual problem reported {sol.status}")
    lam = float(sol.x[0])
    alpha = sol.x[1 : 1 + N]
    beta = sol.x[1 + N :]
    gamma = np.array(rows) @ sol.x - np.array(b)  # per-scenario slack
    resid = max(
        float(np.max(-gamma, initial=0.0)),
        float(np.max(alpha, initial=0.0)),
        float(np.max(-beta, initial=0.0)),
    )
    return DualCertificate(
        family="ks",
        value=float(sol.value),
        primal_value=primal.value,
        multipliers={"lambda": lam, "alpha": alpha, "beta": beta, "gamma": np.maximum(gamma, 0.0)},
        residual=resid,
        notes=[
            "objective uses prefix sums of the reference weights and the "
            "budget coefficient sum(beta - alpha) (mechanical dual of the "
            "cumulative-band LP)"
        ],
    )


# ---------------------------------------------------------------------------
# mean-covariance family


def dual_value_dy(spec, x):
    res = inner.dy_solve(spec, x)
    pts = spec.scenarios.points
    N, d = spec.N, spec.d
    h = model.scenario_costs(spec, x)

    s = float(res.master.dual[0])
    sigma_sum = 0.0
    z0_acc = 0.0
    u = np.zeros(d)
    Y = np.zeros((d, d))
    for cut, mult in zip(res.cuts, res.master.dual[1:]):
        mult = float(mult)
        if mult <= 0.0:
            continue
        if cut.kind == "psd":
            Y += mult * np.outer(cut.vec, cut.vec)
        else:
            qt = cut.vec
            u += 2.0 * mult * (res.Qinv @ qt)
            z0_acc += mult * (res.alpha + float(qt @ res.Qinv @ qt))
            sigma_sum += mult
    z1 = -res.Qsqrt @ u
    if res.alpha > 0:
        z0 = z0_acc / np.sqrt(res.alpha)
    else:
        z0 = float(np.linalg.norm(z1))

    lam_min, _ = min_eig(Y) if d > 0 else (0.0, None)
    if lam_min < Y_EIG_TOL:
        raise ConsistencyError(
            f"aggregated covariance multiplier has eigenvalue {lam_min:.3e} < {Y_EIG_TOL}"
        )

    value = float(
        s
        + res.beta * np.sum(res.Q * Y)
        + np.sqrt(res.alpha) * z0
        - (res.Qinv_sqrt @ res.mu) @ z1
    )
    # dual feasibility: s + u.xi_k + A_k . Y >= h_k
    lhs = s + pts @ u + np.array([np.sum(np.outer(pts[k] - res.mu, pts[k] - res.mu) * Y) for k in range(N)])
    resid = max(
        float(np.max(h - lhs, initial=0.0)),
        max(0.0, float(np.linalg.norm(z1)) - z0),
    )
    return DualCertificate(
        family="dy",
        value=value,
        primal_value=res.value,
        multipliers={"s": s, "u": u, "z": np.concatenate([[z0], z1]), "Y": Y},
        residual=resid,
        warnings=list(res.warnings),
        notes=["multipliers aggregated from the cutting-plane master duals"],
    )


# ---------------------------------------------------------------------------
# phi-divergence family (Lagrangian dual in closed form over p)


def _phi_inv_grad(kind, s):
    """Solve phi'(t) = s for t >= 0 (clamped at zero)."""
    if kind == "kl":
        return np.exp(np.clip(s - 1.0, -745.0, 700.0))
    if kind == "chisq":
        return np.maximum(1.0 + 0.5 * s, 0.0)
    raise ParameterError(f"unknown divergence kind {kind!r}")


def _phi_dual_point(kind, h, phat, alpha, beta):
    """Maximizer of the Lagrangian over p >= 0 at fixed (alpha, beta)."""
    s = -(beta + h) / alpha  # alpha < 0
    t = _phi_inv_grad(kind, s)
    return phat * t, t


def _phi_dual_g(kind, h, phat, eta, alpha, beta):
    p, t = _phi_dual_point(kind, h, phat, alpha, beta)
    div = model.phi_divergence(kind, p, phat)
    return float(h @ p + alpha * (div - eta) + beta * (p.sum() - 1.0)), p, t


def _phi_inner_beta(kind, h, phat, eta, alpha, tol=1e-13, iters=200):
    """min over beta of the dual function at fixed alpha < 0.

    The derivative in beta is sum(p) - 1, increasing in beta, so the
    stationary beta is found by bracketing + bisection.
    """
    scale = 1.0 + float(np.max(np.abs(h))) + abs(alpha)
    lo, hi = -scale, scale
    for _ in range(200):
        if _phi_dual_point(kind, h, phat, alpha, lo)[0].sum() < 1.0:
            break
        lo *= 2.0
    for _ in range(200):
        if _phi_dual_point(kind, h, phat, alpha, hi)[0].sum() > 1.0:
            break
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _phi_dual_point(kind, h, phat, alpha, mid)[0].sum() < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * scale:
            break
    beta = 0.5 * (lo + hi)
    val, p, t = _phi_dual_g(kind, h, phat, eta, alpha, beta)
    return val, beta, p, t


def dual_value_phi(spec, x, alpha_cap=2.0**40):
    phat = spec.scenarios.weights
    kind = spec.ambiguity.phi
    eta = phi_eta(spec, x)
    h = model.scenario_costs(spec, x)
    N = spec.N
    primal = inner.worst_case_phi(spec, x)
    if kind == "kl" and np.any(phat <= 0):
        raise ParameterError("phi: kl divergence needs strictly positive reference weights")
    if eta == 0.0:
        return DualCertificate(
            family="phi",
            value=float(h @ phat),
            primal_value=primal.value,
            multipliers={"alpha": 0.0, "beta": 0.0, "lambda": np.zeros(N)},
            residual=0.0,
            warnings=["zero budget: multipliers reported in the vanishing-budget limit"],
        )
    if float(np.ptp(h)) == 0.0:
        # objective constant over the simplex
        c = float(h[0])
        return DualCertificate(
            family="phi",
            value=c,
            primal_value=primal.value,
            multipliers={"alpha": 0.0, "beta": -c, "lambda": np.zeros(N)},
            residual=0.0,
        )

    def G(alpha):
        return _phi_inner_beta(kind, h, phat, eta, alpha)[0]

    # bracket the golden-section search; expand while the minimum hugs the
    # left end (the Slater margin shrinks as eta -> 0)
    amax = 4.0 * (1.0 + float(np.max(np.abs(h))))
    while True:
        a_opt, g_opt = _golden_min(G, -amax, -1e-12, iters=70)
        if a_opt > -0.98 * amax or amax >= alpha_cap:
            break
        amax = min(8.0 * amax, alpha_cap)
    if amax >= alpha_cap and a_opt <= -0.97 * alpha_cap:
        raise ToleranceError(
            f"phi dual bracket exhausted at alpha={a_opt:.3e} (cap {alpha_cap:.1e})"
        )
    g_zero = float(np.max(h))  # limit value as alpha -> 0
    if g_zero < g_opt:
        a_opt, g_opt = 0.0, g_zero

    if a_opt == 0.0:
        value = g_zero
        beta = -float(np.max(h))
        lam = h + beta  # reduced gradient at the vertex limit
        resid = float(np.max(lam, initial=0.0))
    else:
        value, beta, p, t = _phi_inner_beta(kind, h, phat, eta, a_opt)
        mask = phat > 0
        grad = np.zeros(N)
        grad[mask] = inner._phi_grad(kind, np.maximum(t[mask], 0.0))
        lam = a_opt * grad + beta + h
        lam = np.where(p > 0, 0.0, lam)  # exact stationarity at supported points
        lam = np.where(mask, lam, 0.0)  # zero-weight scenarios are outside the model
        resid = max(
            float(np.max(lam, initial=0.0)),
            abs(float(p.sum()) - 1.0),
        )
        lam = np.minimum(lam, 0.0)
    return DualCertificate(
        family="phi",
        value=float(value),
        primal_value=primal.value,
        multipliers={"alpha": float(a_opt), "beta": float(beta), "lambda": lam},
        residual=resid,
        notes=[
            "lambda stores the reduced gradient alpha*phi'(t_i)+beta+h_i "
            "(zero at supported scenarios, nonpositive at pinned ones)"
        ],
    )


def _golden_min(fn, lo, hi, iters=90):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    xm = c if fc <= fd else d
    return float(xm), float(min(fc, fd))


# ---------------------------------------------------------------------------
# dispatch + gap validation


def dual_value(spec, x):
    fam = spec.ambiguity.family
    if fam == "sm":
        return dual_value_sm(spec, x)
    if fam == "dy":
        return dual_value_dy(spec, x)
    if fam == "w":
        return dual_value_w(spec, x)
    if fam == "phi":
        return dual_value_phi(spec, x)
    if fam == "ks":
        return dual_value_ks(spec, x)
    raise ParameterError(f"no finite-support dual for family {fam!r}")


def validate_duality(spec, x, family=None):
    fam = family or spec.ambiguity.family
    if fam != spec.ambiguity.family:
        raise ParameterError(
            f"spec ambiguity family is {spec.ambiguity.family!r}, not {fam!r}"
        )
    cert = dual_value(spec, x)
    primal = cert.primal_value
    abs_gap = abs(cert.value - primal)
    rel_gap = abs_gap / (1.0 + abs(primal))
    tol = REPORT_TOL[fam]
    return GapReport(
        family=fam,
        x=np.asarray(x, dtype=float),
        primal=primal,
        dual=cert.value,
        abs_gap=abs_gap,
        rel_gap=rel_gap,
        tol=tol,
        passed=bool(rel_gap <= tol),
        warnings=list(cert.warnings),
    )
