"""Cutting-surface (exchange) loop for semi-infinite programs, plus the
continuous-support builders: Wasserstein ball around an empirical sample,
Kolmogorov-Smirnov cell grid, and the divergence-ball saddle form.

The master problems in scope are all linear: a finite working set of index
points contributes one affine row each, the loop adds the most violated
index found by the separation search, and stops once the separation value
drops to eps/2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import lp, model
from .errors import (
    DdroError,
    NonterminationError,
    ParameterError,
)
from .model import ground_distance, phi_divergence

DEFAULT_EPS = 1e-4
ITER_CAP = 10_000
GRID_POINTS = 64
REFINE_ROUNDS = 40
REFINE_SHRINK = 0.5


@dataclass
class IndexBox:
    """Index set: a box, optionally crossed with finite tags, or a simplex."""

    lower: np.ndarray = None
    upper: np.ndarray = None
    tags: list = None
    simplex_dim: int = 0  # > 0: points are probability vectors of this length

    def __post_init__(self):
        if self.simplex_dim == 0:
            self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
            self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))


@dataclass
class SipProblem:
    dim: int
    c: np.ndarray  # master objective, minimized
    lb: np.ndarray
    ub: np.ndarray
    index_set: IndexBox
    cut: callable  # t -> (a, b) meaning a @ v <= b
    eps: float = DEFAULT_EPS
    seeds: list = field(default_factory=list)
    lipschitz: float = None
    grid: int = GRID_POINTS
    name: str = ""

    def violation(self, v, t):
        a, b = self.cut(t)
        return float(a @ v - b)


@dataclass
class SipState:
    iterations: int = 0
    index_points: list = field(default_factory=list)
    x: np.ndarray = None
    master_values: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    terminated: bool = False
    warnings: list = field(default_factory=list)

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "index_points": [_index_to_jsonable(t) for t in self.index_points],
            "master_values": [float(v) for v in self.master_values],
            "violations": [float(v) for v in self.violations],
            "terminated": self.terminated,
            "warnings": list(self.warnings),
        }


def _index_to_jsonable(t):
    if isinstance(t, tuple) and len(t) == 2 and np.ndim(t[0]) >= 1:
        return [list(map(float, np.atleast_1d(t[0]))), int(t[1])]
    return list(map(float, np.atleast_1d(t)))


# ---------------------------------------------------------------------------
# exchange loop


def solve_sip(problem: SipProblem, iter_cap=ITER_CAP):
    """Algorithm: solve the finite master, add the (eps/2-accurate) most
    violated index, stop when the separation value is at most eps/2."""
    if problem.eps <= 0:
        raise ParameterError("eps must be positive")
    state = SipState()
    if problem.lipschitz is None:
        state.warnings.append(
            "no smoothness bound supplied; separation grid density is heuristic"
        )
    working = list(problem.seeds)
    state.index_points = working
    half = 0.5 * problem.eps
    while True:
        rows = [problem.cut(t) for t in working]
        if rows:
            A = np.array([a for a, _ in rows])
            b = np.array([bb for _, bb in rows])
            rel = [lp.LE] * len(rows)
        else:
            A = np.zeros((1, problem.dim))
            b = np.array([1.0])
            rel = [lp.LE]
        prog = lp.LinearProgram(
            "min", problem.c, A, rel, b, lb=problem.lb, ub=problem.ub
        )
        sol = lp.solve(prog)
        if sol.status == lp.INFEASIBLE:
            raise DdroError(f"sip master infeasible ({problem.name})")
        if sol.status == lp.UNBOUNDED:
            raise DdroError(
                f"sip master unbounded ({problem.name}); seed the working set"
            )
        v = sol.x
        state.x = v
        state.master_values.append(float(sol.value))
        t_star, viol = separation_max(
            lambda t: problem.violation(v, t),
            problem.index_set,
            grid=problem.grid,
            lipschitz=problem.lipschitz,
            target=half,
        )
        state.violations.append(float(viol))
        if viol <= half:
            state.terminated = True
            return v, state
        working.append(t_star)
        state.iterations += 1
        if state.iterations >= iter_cap:
            raise NonterminationError(
                f"sip exchange loop hit the iteration cap ({iter_cap}) with "
                f"violation {viol:.3e} (eps {problem.eps})",
                state=state,
            )


# ---------------------------------------------------------------------------
# separation search


def separation_max(g, index_set, grid=GRID_POINTS, lipschitz=None, target=None):
    """eps/2-global maximizer of g over the index set.

    Boxes get a dense mesh (density from the Lipschitz bound when given)
    followed by coordinate-descent refinement; simplex index sets get a
    composition grid refined by pairwise exchange moves.
    """
    if index_set.simplex_dim:
        return _simplex_max(g, index_set.simplex_dim)
    lo, hi = index_set.lower, index_set.upper
    kd = lo.size
    tags = index_set.tags if index_set.tags is not None else [None]
    npts = grid
    if lipschitz is not None and target is not None and kd > 0:
        width = float(np.max(hi - lo, initial=0.0))
        if lipschitz * width > 0:
            npts = max(grid, int(np.ceil(2.0 * lipschitz * width / target)) + 1)
            npts = min(npts, 4097)
    best_t, best_v = None, -np.inf
    for tag in tags:
        wrap = (lambda s, _tag=tag: g((s, _tag))) if tag is not None else g
        if kd == 0:
            s = np.zeros(0)
            val = wrap(s)
            if val > best_v:
                best_t, best_v = (s, tag) if tag is not None else s, val
            continue
        axes = [np.linspace(lo[k], hi[k], npts) for k in range(kd)]
        s0, v0 = None, -np.inf
        for combo in itertools.product(*axes):
            s = np.array(combo)
            val = wrap(s)
            if val > v0:
                s0, v0 = s, val
        s0, v0 = _refine_box(wrap, s0, v0, lo, hi, (hi - lo) / max(npts - 1, 1))
        if v0 > best_v:
            best_t, best_v = (s0, tag) if tag is not None else s0, v0
    return best_t, best_v


def _refine_box(g, s, val, lo, hi, step):
    step = step.astype(float).copy()
    for _ in range(REFINE_ROUNDS):
        moved = False
        for k in range(s.size):
            for sign in (1.0, -1.0):
                cand = s.copy()
                cand[k] = min(max(cand[k] + sign * step[k], lo[k]), hi[k])
                cv = g(cand)
                if cv > val + 1e-15:
                    s, val = cand, cv
                    moved = True
        if not moved:
            step *= REFINE_SHRINK
    return s, val


def _simplex_grid(N, m):
    for comp in itertools.combinations(range(N + m - 1), N - 1):
        prev = -1
        out = []
        for c in comp:
            out.append(c - prev - 1)
            prev = c
        out.append(N + m - 2 - prev)
        yield np.array(out, dtype=float) / m


def _simplex_max(g, N, m=32):
    best_p, best_v = None, -np.inf
    if N == 1:
        p = np.ones(1)
        return p, g(p)
    for p in _simplex_grid(N, m):
        val = g(p)
        if val > best_v:
            best_p, best_v = p, val
    delta = 1.0 / m
    for _ in range(60):
        moved = False
        for i in range(N):
            for j in range(N):
                if i == j or best_p[j] < delta - 1e-15:
                    continue
                cand = best_p.copy()
                cand[i] += delta
                cand[j] -= delta
                cv = g(cand)
                if cv > best_v + 1e-15:
                    best_p, best_v = cand, cv
                    moved = True
        if not moved:
            delta *= 0.5
    return best_p, best_v


def verify_on_grid(problem: SipProblem, v, factor=10):
    """Max violation on a mesh `factor` times denser than the separation grid."""
    idx = problem.index_set
    if idx.simplex_dim:
        best = -np.inf
        for p in _simplex_grid(idx.simplex_dim, min(8 * factor, 96)):
            best = max(best, problem.violation(v, p))
        return float(best)
    lo, hi = idx.lower, idx.upper
    kd = lo.size
    tags = idx.tags if idx.tags is not None else [None]
    npts = problem.grid * factor
    best = -np.inf
    for tag in tags:
        if kd == 0:
            t = np.zeros(0)
            best = max(best, problem.violation(v, (t, tag) if tag is not None else t))
            continue
        axes = [np.linspace(lo[k], hi[k], npts) for k in range(kd)]
        for combo in itertools.product(*axes):
            s = np.array(combo)
            t = (s, tag) if tag is not None else s
            best = max(best, problem.violation(v, t))
    return float(best)


# ---------------------------------------------------------------------------
# continuous-support Wasserstein (empirical center)


def build_wass_cont(spec, x, eps=DEFAULT_EPS, lipschitz=None):
    """Master over (v_1..v_N, v_{N+1} >= 0):

        min (1/N) sum v_i + r(x) v_{N+1}
        s.t. h(x, s) - v_i - v_{N+1} d(s, xi^i) <= 0   for all s in the box,
                                                        for each sample i.
    """
    amb = spec.ambiguity
    if amb.family != "wc":
        raise ParameterError("build_wass_cont needs the continuous Wasserstein family")
    r = float(model.w_radius(spec, x))
    pts = spec.scenarios.points
    N = spec.N
    lo = np.asarray(amb.box_lower, dtype=float)
    hi = np.asarray(amb.box_upper, dtype=float)
    if np.any(pts < lo) or np.any(pts > hi):
        raise ParameterError("wc: sample points outside the support box")
    xv = np.asarray(x, dtype=float)

    def cut(t):
        s, i = t
        a = np.zeros(N + 1)
        a[i] = -1.0
        a[N] = -ground_distance(s, pts[i], amb.norm)
        return a, -model.cost_value(spec, xv, s)

    c = np.concatenate([np.full(N, 1.0 / N), [r]])
    lb = np.concatenate([np.full(N, -np.inf), [0.0]])
    ub = np.full(N + 1, np.inf)
    seeds = [(pts[i].copy(), i) for i in range(N)]
    return SipProblem(
        dim=N + 1,
        c=c,
        lb=lb,
        ub=ub,
        index_set=IndexBox(lower=lo, upper=hi, tags=list(range(N))),
        cut=cut,
        eps=eps,
        seeds=seeds,
        lipschitz=lipschitz,
        name="wass-cont",
    )


def wass_cont_value(spec, x, eps=DEFAULT_EPS, lipschitz=None):
    problem = build_wass_cont(spec, x, eps=eps, lipschitz=lipschitz)
    v, state = solve_sip(problem)
    return float(problem.c @ v), v, state


# ---------------------------------------------------------------------------
# continuous-support Kolmogorov-Smirnov cell grid


@dataclass
class KSCellGrid:
    coords: list  # per dimension, sorted sample coordinates
    intervals: list  # per dimension, N+1 (lo, hi) closed-cell bounds
    counts: np.ndarray  # cumulative sample counts, shape (N+1,)*d
    cell_mass: np.ndarray  # per-cell empirical mass (inclusion-exclusion)

    @property
    def shape(self):
        return self.counts.shape


def build_ks_cell_grid(points, box_lower, box_upper):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    N, d = points.shape
    lo = np.asarray(box_lower, dtype=float)
    hi = np.asarray(box_upper, dtype=float)
    coords = []
    intervals = []
    for k in range(d):
        col = np.sort(points[:, k])
        if np.any(np.diff(col) == 0):
            raise ParameterError(
                f"coincident sample coordinates in dimension {k}; jitter or "
                "remove duplicates before building the cell grid"
            )
        if col[0] <= lo[k] or col[-1] >= hi[k]:
            raise ParameterError(
                f"sample coordinates must lie strictly inside the box in dimension {k}"
            )
        coords.append(col)
        edges = np.concatenate([[lo[k]], col, [hi[k]]])
        intervals.append([(float(edges[i]), float(edges[i + 1])) for i in range(N + 1)])
    shape = (N + 1,) * d
    counts = np.zeros(shape, dtype=int)
    for j in np.ndindex(shape):
        thresh = np.array([coords[k][j[k] - 1] if j[k] >= 1 else lo[k] for k in range(d)])
        counts[j] = int(np.sum(np.all(points <= thresh, axis=1)))
    mass = np.zeros(shape, dtype=float)
    for j in np.ndindex(shape):
        total = 0.0
        for sub in itertools.product((0, 1), repeat=d):
            jj = tuple(j[k] - sub[k] for k in range(d))
            if min(jj) < 0:
                continue
            total += ((-1) ** sum(sub)) * counts[jj]
        mass[j] = total / N
    return KSCellGrid(coords=coords, intervals=intervals, counts=counts, cell_mass=mass)


def build_ks_cont(spec, x, grid=24):
    """Cell grid plus the finite-multiplier program with cell suprema fixed.

    Returns (grid, lp_problem, cell_sups): one nonnegative and one nonpositive
    multiplier per cell with coefficients mass +/- the band radius, one free
    normalization multiplier, and one row per cell:

        lam_pos_j + lam_neg_j + gamma >= sup_{s in cl(cell j)} h(x, s).
    """
    amb = spec.ambiguity
    if amb.family != "ksc":
        raise ParameterError("build_ks_cont needs the continuous K-S family")
    alpha = float(model.ks_eta(spec, x))
    cells = build_ks_cell_grid(spec.scenarios.points, amb.box_lower, amb.box_upper)
    xv = np.asarray(x, dtype=float)
    d = spec.d
    shape = cells.shape
    cell_list = list(np.ndindex(shape))
    sups = np.zeros(len(cell_list))
    for idx, j in enumerate(cell_list):
        lo = np.array([cells.intervals[k][j[k]][0] for k in range(d)])
        hi = np.array([cells.intervals[k][j[k]][1] for k in range(d)])
        if amb.h_convex_in_scenario:
            best = -np.inf
            for corner in itertools.product(*[(lo[k], hi[k]) for k in range(d)]):
                best = max(best, model.cost_value(spec, xv, np.array(corner)))
            sups[idx] = best
        else:
            box = IndexBox(lower=lo, upper=hi)
            _, val = separation_max(
                lambda s: model.cost_value(spec, xv, s), box, grid=grid
            )
            sups[idx] = val
    C = len(cell_list)
    mass = np.array([cells.cell_mass[j] for j in cell_list])
    # variables: lam_pos (C, >=0), lam_neg (C, <=0), gamma (free)
    c = np.concatenate([mass + alpha, mass - alpha, [1.0]])
    A = np.zeros((C, 2 * C + 1))
    for i in range(C):
        A[i, i] = 1.0
        A[i, C + i] = 1.0
        A[i, 2 * C] = 1.0
    lb = np.concatenate([np.zeros(C), np.full(C, -np.inf), [-np.inf]])
    ub = np.concatenate([np.full(C, np.inf), np.zeros(C), [np.inf]])
    prog = lp.LinearProgram("min", c, A, [lp.GE] * C, sups, lb=lb, ub=ub)
    return cells, prog, sups


def ks_cont_value(spec, x, grid=24):
    cells, prog, sups = build_ks_cont(spec, x, grid=grid)
    sol = lp.solve_or_raise(prog)
    return float(sol.value), cells, sups, sol


# ---------------------------------------------------------------------------
# divergence ball as a saddle semi-infinite program


def build_phi_sip(spec, x, eps=5e-5):
    """Saddle form of the divergence-ball worst case at fixed x:

        min z  over (z, a <= 0, b, l >= 0)
        s.t. z >= h.p + a (D(p) - eta) + b (sum p - 1) + l.p   for all p
             in the probability simplex.
    """
    amb = spec.ambiguity
    if amb.family != "phi":
        raise ParameterError("build_phi_sip needs the divergence family")
    phat = spec.scenarios.weights
    if phat is None:
        raise ParameterError("phi: reference weights are required")
    if np.any(phat <= 0):
        raise ParameterError(
            "phi saddle form needs strictly positive reference weights"
        )
    eta = float(model.phi_eta(spec, x))
    if eta <= 0:
        raise ParameterError("phi saddle form needs a positive budget")
    h = model.scenario_costs(spec, x)
    N = spec.N
    kind = amb.phi

    def cut(p):
        p = np.asarray(p, dtype=float)
        div = phi_divergence(kind, p, phat)
        a = np.concatenate([[-1.0], [div - eta], [p.sum() - 1.0], p])
        return a, -float(h @ p)

    c = np.zeros(N + 3)
    c[0] = 1.0
    lb = np.concatenate([[-np.inf], [-np.inf], [-np.inf], np.zeros(N)])
    ub = np.concatenate([[np.inf], [0.0], [np.inf], np.full(N, np.inf)])
    seeds = [phat.copy()]
    for i in range(N):
        e = np.zeros(N)
        e[i] = 1.0
        seeds.append(e)
    return SipProblem(
        dim=N + 3,
        c=c,
        lb=lb,
        ub=ub,
        index_set=IndexBox(simplex_dim=N),
        cut=cut,
        eps=eps,
        seeds=seeds,
        name="phi-sip",
    )


def phi_sip_value(spec, x, eps=5e-5):
    problem = build_phi_sip(spec, x, eps=eps)
    v, state = solve_sip(problem)
    return float(v[0]), v, state
