"""Problem container: scenarios, decision box, cost, ambiguity description.

A ProblemSpec is treated as immutable once `validate` comes back clean;
the worst-case oracles re-evaluate every decision-dependent parameter at
each queried decision vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr, lp
from .errors import DdroError, ParameterError, RecourseInfeasibleError, SlaterError

WEIGHT_TOL = 1e-12

NORMS = ("l1", "l2", "linf")
PHI_KINDS = ("kl", "chisq")


def ground_distance(u, v, norm):
    w = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    if norm == "l1":
        return float(np.sum(np.abs(w)))
    if norm == "l2":
        return float(np.sqrt(np.sum(w * w)))
    if norm == "linf":
        return float(np.max(np.abs(w)))
    raise ParameterError(f"unknown norm {norm!r}")


def distance_matrix(points, norm):
    N = len(points)
    D = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            D[i, j] = D[j, i] = ground_distance(points[i], points[j], norm)
    return D


@dataclass
class ScenarioSet:
    points: np.ndarray  # N x d
    weights: np.ndarray = None  # reference distribution p-hat, optional

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)

    @property
    def N(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]


@dataclass
class ClosedFormCost:
    h: expr.Expr  # over (x, xi)


@dataclass
class RecourseCost:
    """h(x, xi) = min_y  q(xi).y   s.t.  W(xi) y >= rhs(xi) - T(xi) x.

    Entries of q, W, T, rhs are expressions in the scenario vector only;
    y is free (bounds, when wanted, are extra rows of W).
    """

    y_dim: int
    q: list  # y_dim exprs
    W: list  # rows of exprs, each row length y_dim
    T: list  # one row per W row, each length n
    rhs: list  # one expr per W row


@dataclass
class SmParams:
    """Scenario-probability box plus componentwise moment bounds.

    moments[0] is the constant 1 with lower[0] = upper[0] = 1; builders
    prepend that row so a distribution is always enforced.
    """

    moments: list  # m exprs over xi
    lower: list  # m exprs over x
    upper: list  # m exprs over x
    p_lower: list  # N exprs over x
    p_upper: list  # N exprs over x

    family = "sm"


@dataclass
class DyParams:
    """Ellipsoidal mean set and covariance-dominance set."""

    mu: list  # d exprs over x
    Q: list  # d x d exprs over x
    alpha: expr.Expr
    beta: expr.Expr

    family = "dy"


@dataclass
class WParams:
    radius: expr.Expr
    norm: str = "l2"

    family = "w"


@dataclass
class PhiParams:
    eta: expr.Expr
    phi: str = "kl"  # "kl" (t log t) or "chisq" ((t-1)^2)

    family = "phi"


@dataclass
class KsParams:
    eta: expr.Expr
    order: tuple = None  # scenario order used for the cumulative sums

    family = "ks"


@dataclass
class WcParams:
    radius: expr.Expr
    box_lower: np.ndarray
    box_upper: np.ndarray
    norm: str = "l2"

    family = "wc"


@dataclass
class KscParams:
    eta: expr.Expr
    box_lower: np.ndarray
    box_upper: np.ndarray
    h_convex_in_scenario: bool = False

    family = "ksc"


FAMILIES = ("sm", "dy", "w", "phi", "ks", "wc", "ksc")


@dataclass
class ProblemSpec:
    n: int
    x_lower: np.ndarray
    x_upper: np.ndarray
    f: expr.Expr  # deterministic objective part, over x
    scenarios: ScenarioSet
    cost: object  # ClosedFormCost | RecourseCost
    ambiguity: object  # one of the *Params above
    _recourse_cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.x_lower = np.asarray(self.x_lower, dtype=float)
        self.x_upper = np.asarray(self.x_upper, dtype=float)
        if isinstance(self.ambiguity, KsParams) and self.ambiguity.order is None:
            self.ambiguity.order = lexicographic_order(self.scenarios.points)

    @property
    def N(self):
        return self.scenarios.N

    @property
    def d(self):
        return self.scenarios.d

    def box_mid(self):
        return 0.5 * (self.x_lower + self.x_upper)

    def in_box(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.x_lower - tol) and np.all(x <= self.x_upper + tol)
        )


def lexicographic_order(points):
    points = np.atleast_2d(points)
    keys = tuple(points[:, k] for k in range(points.shape[1] - 1, -1, -1))
    return tuple(int(i) for i in np.lexsort(keys))


# ---------------------------------------------------------------------------
# validation


def validate(spec: ProblemSpec):
    """Return a list of human-readable diagnostics; empty means valid."""
    diags = []
    sc = spec.scenarios
    if sc.N < 1 or sc.d < 1:
        diags.append("scenarios: need N >= 1 points of dimension d >= 1")
    if spec.x_lower.shape != (spec.n,) or spec.x_upper.shape != (spec.n,):
        diags.append("decision box: bound vectors must have length n")
    elif np.any(spec.x_lower > spec.x_upper):
        diags.append("decision box: lower bound exceeds upper bound")
    if sc.weights is not None:
        if sc.weights.shape != (sc.N,):
            diags.append("reference weights: length differs from scenario count")
        else:
            if np.any(sc.weights < -WEIGHT_TOL):
                diags.append("reference weights: negative entry")
            if abs(float(np.sum(sc.weights)) - 1.0) > WEIGHT_TOL:
                diags.append("reference weights do not sum to 1")
    for i in range(sc.N):
        for j in range(i + 1, sc.N):
            if np.array_equal(sc.points[i], sc.points[j]):
                diags.append(f"scenarios: points {i} and {j} coincide")
    diags.extend(_validate_cost(spec))
    diags.extend(_validate_ambiguity(spec))
    return diags


def _validate_cost(spec):
    diags = []
    cost = spec.cost
    if isinstance(cost, ClosedFormCost):
        return diags
    if not isinstance(cost, RecourseCost):
        return [f"cost: unknown cost variant {type(cost).__name__}"]
    q = cost.q
    if len(q) != cost.y_dim:
        diags.append("recourse: q length differs from y dimension")
    rows = len(cost.W)
    if len(cost.T) != rows or len(cost.rhs) != rows:
        diags.append("recourse: W, T, rhs row counts differ")
    for r, row in enumerate(cost.W):
        if len(row) != cost.y_dim:
            diags.append(f"recourse: W row {r} length differs from y dimension")
    for r, row in enumerate(cost.T):
        if len(row) != spec.n:
            diags.append(f"recourse: T row {r} length differs from decision dimension")
    return diags


def _validate_ambiguity(spec):
    diags = []
    amb = spec.ambiguity
    N = spec.N
    xmid = spec.box_mid()
    if isinstance(amb, SmParams):
        m = len(amb.moments)
        if not (len(amb.lower) == len(amb.upper) == m):
            diags.append("sm: moment bound lengths differ from moment count")
        if not (len(amb.p_lower) == len(amb.p_upper) == N):
            diags.append("sm: probability bound lengths differ from scenario count")
        if m >= 1:
            try:
                f0 = [expr.evaluate(amb.moments[0], (), spec.scenarios.points[k]) for k in range(N)]
                l0 = expr.evaluate(amb.lower[0], xmid)
                u0 = expr.evaluate(amb.upper[0], xmid)
                if any(abs(v - 1.0) > 1e-12 for v in f0) or abs(l0 - 1.0) > 1e-12 or abs(u0 - 1.0) > 1e-12:
                    diags.append("sm: first moment row must pin the total mass to 1")
            except DdroError as e:
                diags.append(f"sm: moment row evaluation failed: {e}")
    elif isinstance(amb, DyParams):
        d = spec.d
        if len(amb.mu) != d:
            diags.append("dy: mu length differs from scenario dimension")
        if len(amb.Q) != d or any(len(row) != d for row in amb.Q):
            diags.append("dy: Q must be d x d")
        else:
            try:
                Qm = np.array(
                    [[expr.evaluate(amb.Q[i][j], xmid) for j in range(d)] for i in range(d)]
                )
                if np.max(np.abs(Qm - Qm.T), initial=0.0) > 1e-9 * (1 + np.max(np.abs(Qm))):
                    diags.append("dy: Q evaluates non-symmetric at the box midpoint")
            except DdroError as e:
                diags.append(f"dy: Q evaluation failed at the box midpoint: {e}")
    elif isinstance(amb, WParams):
        if amb.norm not in NORMS:
            diags.append(f"w: unknown norm {amb.norm!r}")
    elif isinstance(amb, PhiParams):
        if amb.phi not in PHI_KINDS:
            diags.append(f"phi: unknown divergence kind {amb.phi!r}")
        if amb.phi == "kl" and spec.scenarios.weights is not None:
            if np.any(spec.scenarios.weights <= 0):
                diags.append("phi: kl divergence needs strictly positive reference weights")
    elif isinstance(amb, KsParams):
        if sorted(amb.order) != list(range(N)):
            diags.append("ks: order is not a permutation of the scenarios")
    elif isinstance(amb, (WcParams, KscParams)):
        lo = np.asarray(amb.box_lower, dtype=float)
        hi = np.asarray(amb.box_upper, dtype=float)
        if lo.shape != (spec.d,) or hi.shape != (spec.d,):
            diags.append(f"{amb.family}: support box must have dimension d")
        elif np.any(lo >= hi):
            diags.append(f"{amb.family}: support box is empty or degenerate")
        else:
            pts = spec.scenarios.points
            if np.any(pts < lo) or np.any(pts > hi):
                diags.append(f"{amb.family}: sample points outside the support box")
            if isinstance(amb, KscParams):
                if np.any(pts <= lo) or np.any(pts >= hi):
                    diags.append("ksc: sample coordinates must lie strictly inside the box")
                for k in range(spec.d):
                    col = np.sort(pts[:, k])
                    if np.any(np.diff(col) == 0):
                        diags.append(
                            f"ksc: coincident sample coordinates in dimension {k}; "
                            "jitter or remove duplicates"
                        )
    else:
        diags.append(f"ambiguity: unknown family {type(amb).__name__}")
    if isinstance(amb, (WParams, PhiParams, KsParams, WcParams, KscParams)):
        if spec.scenarios.weights is None and not isinstance(amb, (WcParams, KscParams)):
            diags.append(f"{amb.family}: reference weights are required")
    return diags


def validate_or_raise(spec):
    diags = validate(spec)
    if diags:
        from .errors import SpecError

        raise SpecError(diags)
    return spec


# ---------------------------------------------------------------------------
# cost evaluation


def cost_eval(spec: ProblemSpec, x, k: int) -> float:
    """h(x, xi^k): closed form value or the optimal recourse cost."""
    x = np.asarray(x, dtype=float)
    cost = spec.cost
    if isinstance(cost, ClosedFormCost):
        return float(expr.evaluate(cost.h, x, spec.scenarios.points[k]))
    return _recourse_value(spec, x, _recourse_data(spec, k), scenario_index=k)


def cost_value(spec: ProblemSpec, x, xi) -> float:
    """h(x, xi) at an arbitrary scenario vector (continuous-support use)."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    cost = spec.cost
    if isinstance(cost, ClosedFormCost):
        return float(expr.evaluate(cost.h, x, xi))
    q = np.array([expr.evaluate(e, (), xi) for e in cost.q])
    W = np.array([[expr.evaluate(e, (), xi) for e in row] for row in cost.W])
    T = np.array([[expr.evaluate(e, (), xi) for e in row] for row in cost.T])
    rhs = np.array([expr.evaluate(e, (), xi) for e in cost.rhs])
    return _recourse_value(spec, x, (q, W, T, rhs))


def _recourse_value(spec, x, data, scenario_index=None):
    q, W, T, rhs = data
    prog = lp.LinearProgram(
        "min",
        q,
        W,
        [lp.GE] * W.shape[0],
        rhs - T @ x,
        lb=np.full(spec.cost.y_dim, -np.inf),
        ub=np.full(spec.cost.y_dim, np.inf),
    )
    sol = lp.solve(prog)
    if sol.status == lp.INFEASIBLE:
        raise RecourseInfeasibleError(x, -1 if scenario_index is None else scenario_index)
    if sol.status == lp.UNBOUNDED:
        raise DdroError(
            "recourse problem unbounded: second-stage cost not finite "
            f"(scenario {scenario_index})"
        )
    return float(sol.value)


def scenario_costs(spec: ProblemSpec, x) -> np.ndarray:
    return np.array([cost_eval(spec, x, k) for k in range(spec.N)])


def _recourse_data(spec, k):
    cached = spec._recourse_cache.get(k)
    if cached is not None:
        return cached
    cost = spec.cost
    xi = spec.scenarios.points[k]
    q = np.array([expr.evaluate(e, (), xi) for e in cost.q])
    W = np.array([[expr.evaluate(e, (), xi) for e in row] for row in cost.W])
    T = np.array([[expr.evaluate(e, (), xi) for e in row] for row in cost.T])
    if T.size == 0:
        T = T.reshape((W.shape[0], spec.n))
    rhs = np.array([expr.evaluate(e, (), xi) for e in cost.rhs])
    spec._recourse_cache[k] = (q, W, T, rhs)
    return q, W, T, rhs


# ---------------------------------------------------------------------------
# decision-dependent parameter evaluation (one helper per family)


def sm_data(spec, x):
    amb = spec.ambiguity
    pts = spec.scenarios.points
    N, m = spec.N, len(amb.moments)
    F = np.array(
        [[expr.evaluate(amb.moments[i], (), pts[k]) for k in range(N)] for i in range(m)]
    )
    low = np.array([expr.evaluate(e, x) for e in amb.lower])
    up = np.array([expr.evaluate(e, x) for e in amb.upper])
    p_lo = np.array([expr.evaluate(e, x) for e in amb.p_lower])
    p_hi = np.array([expr.evaluate(e, x) for e in amb.p_upper])
    if np.any(p_lo > p_hi):
        raise ParameterError("sm: probability lower bound exceeds upper bound at x")
    return F, low, up, p_lo, p_hi


def dy_data(spec, x):
    amb = spec.ambiguity
    d = spec.d
    mu = np.array([expr.evaluate(e, x) for e in amb.mu])
    # mirror the upper triangle so downstream code sees an exactly symmetric Q
    Q = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            Q[i, j] = Q[j, i] = expr.evaluate(amb.Q[i][j], x)
    alpha = float(expr.evaluate(amb.alpha, x))
    beta = float(expr.evaluate(amb.beta, x))
    if alpha < 0:
        raise SlaterError(
            f"dy: alpha(x) = {alpha} < 0 admits no distribution at all; strong "
            "duality here needs a strictly feasible one"
        )
    if beta < 0:
        raise SlaterError(
            f"dy: beta(x) = {beta} < 0 admits no distribution at all; strong "
            "duality here needs a strictly feasible one"
        )
    return mu, Q, alpha, beta


def w_radius(spec, x):
    r = float(expr.evaluate(spec.ambiguity.radius, x))
    if r < 0:
        raise ParameterError(f"w: radius r(x) = {r} is negative")
    return r


def phi_eta(spec, x):
    eta = float(expr.evaluate(spec.ambiguity.eta, x))
    if eta < 0:
        raise ParameterError(f"phi: budget eta(x) = {eta} is negative")
    return eta


def ks_eta(spec, x):
    eta = float(expr.evaluate(spec.ambiguity.eta, x))
    if eta < 0:
        raise ParameterError(f"ks: budget eta(x) = {eta} is negative")
    return eta


def phi_value(kind, t):
    """phi(t) for the shipped divergences, with the 0 log 0 = 0 convention."""
    t = np.asarray(t, dtype=float)
    if kind == "kl":
        out = np.where(t > 0, t * np.log(np.maximum(t, 1e-300)), 0.0)
        return out if out.ndim else float(out)
    if kind == "chisq":
        out = (t - 1.0) ** 2
        return out if out.ndim else float(out)
    raise ParameterError(f"unknown divergence kind {kind!r}")


def phi_divergence(kind, p, phat):
    """D_phi(p || phat) = sum_i phat_i phi(p_i / phat_i)."""
    p = np.asarray(p, dtype=float)
    phat = np.asarray(phat, dtype=float)
    total = 0.0
    for pi, qi in zip(p, phat):
        if qi <= 0.0:
            if kind == "kl":
                raise ParameterError("kl divergence undefined: reference weight is zero")
            if abs(pi) > 1e-14:
                return np.inf
            continue
        total += qi * phi_value(kind, pi / qi)
    return float(total)
