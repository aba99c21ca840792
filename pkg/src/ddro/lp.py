"""Dense linear-programming kernel.

Two-phase primal simplex on a dense tableau, Dantzig pricing with a Bland
fallback once degenerate pivots pile up.  Every solve returns the primal
point, one dual multiplier per constraint row, and reduced costs per
variable, all in the caller's row/column space and sign convention:

    objective == dual @ b + redcost @ x        (at an optimum)

Duals are shadow prices of the rhs with respect to the *stated* sense, so
for a max problem a binding `<=` row carries a nonnegative multiplier and a
binding `>=` row a nonpositive one; for min problems the signs flip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LpError, LpIterationError

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
OPT_TOL = 1e-9
REDUNDANT_TOL = 1e-9
REFRESH_EVERY = 64  # rebuild the reduced-cost row to shed accumulated error

LE, EQ, GE = "<=", "=", ">="

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"


@dataclass
class LinearProgram:
    sense: str  # "min" or "max"
    c: np.ndarray
    A: np.ndarray
    rel: list
    b: np.ndarray
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        m, n = self.A.shape
        if self.sense not in ("min", "max"):
            raise LpError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if self.c.shape != (n,) or self.b.shape != (m,) or len(self.rel) != m:
            raise LpError(
                f"dimension mismatch: A is {m}x{n}, c {self.c.shape}, "
                f"b {self.b.shape}, rel {len(self.rel)}"
            )
        for r in self.rel:
            if r not in (LE, EQ, GE):
                raise LpError(f"unknown row relation {r!r}")
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise LpError("bound vectors must match the number of columns")
        if not (
            np.all(np.isfinite(self.A))
            and np.all(np.isfinite(self.b))
            and np.all(np.isfinite(self.c))
        ):
            raise LpError("A, b, c must be finite")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise LpError("bounds must not be NaN")
        if np.any(self.lb > self.ub):
            raise LpError("lower bound exceeds upper bound")

    @property
    def nrows(self):
        return self.A.shape[0]

    @property
    def ncols(self):
        return self.A.shape[1]


@dataclass
class LpSolution:
    status: str
    x: np.ndarray = None
    dual: np.ndarray = None  # one multiplier per row, shadow-price sign
    redcost: np.ndarray = None  # active-bound multiplier per column
    value: float = np.nan
    iterations: int = 0
    max_infeasibility: float = np.nan

    @property
    def optimal(self):
        return self.status == OPTIMAL


def solve(lp: LinearProgram) -> LpSolution:
    """Solve `lp`; deterministic for identical input."""
    m, n = lp.nrows, lp.ncols
    minsign = 1.0 if lp.sense == "min" else -1.0
    c_user = lp.c.copy()

    # --- reduce to: min cz.z  s.t.  rows(z), z >= 0 ------------------------
    # x_j = shift_j + coef_j * z_k; free columns are split into two z's.
    col_shift = np.zeros(n)
    col_map = []  # per z column: (orig_col, coef)
    ub_rows = []  # (z_col, rhs) finite two-sided bounds become extra rows
    for j in range(n):
        lo, hi = lp.lb[j], lp.ub[j]
        if np.isfinite(lo):
            col_shift[j] = lo
            col_map.append((j, 1.0))
            if np.isfinite(hi):
                ub_rows.append((len(col_map) - 1, hi - lo))
        elif np.isfinite(hi):
            col_shift[j] = hi
            col_map.append((j, -1.0))
        else:
            col_map.append((j, 1.0))
            col_map.append((j, -1.0))
    nz = len(col_map)
    mall = m + len(ub_rows)

    Az = np.zeros((mall, nz))
    for k, (j, coef) in enumerate(col_map):
        Az[:m, k] = coef * lp.A[:, j]
    bz = np.concatenate([lp.b - lp.A @ col_shift, np.zeros(len(ub_rows))])
    rels = list(lp.rel)
    for i, (k, rhs) in enumerate(ub_rows):
        Az[m + i, k] = 1.0
        bz[m + i] = rhs
        rels.append(LE)
    cz = np.array([minsign * c_user[j] * coef for j, coef in col_map])

    # slack / surplus columns
    nslack = sum(1 for r in rels if r != EQ)
    S = np.zeros((mall, nslack))
    k = 0
    for i, r in enumerate(rels):
        if r == LE:
            S[i, k] = 1.0
            k += 1
        elif r == GE:
            S[i, k] = -1.0
            k += 1
    T = np.hstack([Az, S]) if nslack else Az
    ctot = np.concatenate([cz, np.zeros(nslack)])

    # orient rows so rhs >= 0 (flips those rows' dual signs)
    row_sign = np.ones(mall)
    negrow = bz < 0
    row_sign[negrow] = -1.0
    T[negrow] *= -1.0
    bz = np.where(negrow, -bz, bz)

    tab = _Tableau(T, bz, ctot)
    status = tab.run_two_phase()
    if status != OPTIMAL:
        return LpSolution(status=status, iterations=tab.iterations)

    z = tab.primal()
    x = col_shift.copy()
    for k, (j, coef) in enumerate(col_map):
        x[j] += coef * z[k]

    y_std = tab.duals()
    y_user = minsign * row_sign[:m] * y_std[:m]
    redcost = c_user - lp.A.T @ y_user
    value = float(c_user @ x)
    return LpSolution(
        status=OPTIMAL,
        x=x,
        dual=y_user,
        redcost=redcost,
        value=value,
        iterations=tab.iterations,
        max_infeasibility=_feasibility_residual(lp, x),
    )


def solve_or_raise(lp: LinearProgram) -> LpSolution:
    sol = solve(lp)
    if sol.status != OPTIMAL:
        raise LpError(f"expected optimal solution, got {sol.status}")
    return sol


def _feasibility_residual(lp, x):
    r = lp.A @ x - lp.b
    worst = 0.0
    for i, rel in enumerate(lp.rel):
        if rel == LE:
            worst = max(worst, r[i])
        elif rel == GE:
            worst = max(worst, -r[i])
        else:
            worst = max(worst, abs(r[i]))
    worst = max(worst, float(np.max(np.maximum(lp.lb - x, 0.0), initial=0.0)))
    worst = max(worst, float(np.max(np.maximum(x - lp.ub, 0.0), initial=0.0)))
    return float(worst)


class _Tableau:
    """min c.z, T z = b, z >= 0, with b >= 0 on entry.

    The tableau rows are kept in updated (B^-1 A) form; the reduced-cost row
    is updated per pivot and refreshed periodically.  Duals come from one
    B^T y = c_B solve against the pristine column copies at the end.
    """

    def __init__(self, T, b, c):
        self.m, self.n = T.shape
        self.T = np.asarray(T, dtype=float).copy()
        self.b = np.asarray(b, dtype=float).copy()
        self.c = np.asarray(c, dtype=float).copy()
        self.A0 = self.T.copy()
        self.basis = np.full(self.m, -1, dtype=int)
        self.art = []
        self.row_alive = np.ones(self.m, dtype=bool)
        self.iterations = 0

    def run_two_phase(self):
        self._seed_basis()
        self.cap = 10000 + 200 * (self.m + self.ntot)
        if self.art:
            cost1 = np.zeros(self.ntot)
            cost1[self.art] = 1.0
            status = self._iterate(cost1)
            if status == UNBOUNDED:
                raise LpError("phase-1 problem reported unbounded")
            obj1 = float(cost1[self.basis] @ self.b)
            if obj1 > FEAS_TOL * (1.0 + float(np.max(np.abs(self.b), initial=0.0))):
                return INFEASIBLE
            self._purge_artificials()
        cost2 = np.zeros(self.ntot)
        cost2[: self.c.shape[0]] = self.c
        return self._iterate(cost2)

    def _seed_basis(self):
        taken = set()
        for i in range(self.m):
            seed = -1
            for j in range(self.n):
                if j in taken:
                    continue
                col = self.T[:, j]
                if abs(col[i] - 1.0) < 1e-12 and np.count_nonzero(np.abs(col) > 1e-14) == 1:
                    seed = j
                    break
            if seed >= 0:
                self.basis[i] = seed
                taken.add(seed)
        need = [i for i in range(self.m) if self.basis[i] < 0]
        if need:
            ext = np.zeros((self.m, len(need)))
            for k, i in enumerate(need):
                ext[i, k] = 1.0
                self.basis[i] = self.n + k
                self.art.append(self.n + k)
            self.T = np.hstack([self.T, ext])
            self.A0 = np.hstack([self.A0, ext])
        self.ntot = self.T.shape[1]
        self.banned = np.zeros(self.ntot, dtype=bool)
        if self.art:
            self.banned[self.art] = True  # artificials never (re-)enter

    def _reduced_costs(self, cost):
        rc = cost - cost[self.basis] @ self.T
        rc[self.basis] = 0.0
        return rc

    def _iterate(self, cost):
        rc = self._reduced_costs(cost)
        degenerate_run = 0
        bland_trigger = 2 * (self.m + self.ntot)
        since_refresh = 0
        while True:
            if self.iterations > self.cap:
                raise LpIterationError(
                    f"simplex exceeded {self.cap} iterations ({self.m}x{self.ntot})"
                )
            if since_refresh >= REFRESH_EVERY:
                rc = self._reduced_costs(cost)
                since_refresh = 0
            use_bland = degenerate_run >= bland_trigger
            enter = self._entering(rc, use_bland)
            if enter < 0:
                return OPTIMAL
            leave = self._leaving(enter, use_bland)
            if leave < 0:
                return UNBOUNDED
            step = self.b[leave] / self.T[leave, enter]
            degenerate_run = degenerate_run + 1 if step < 1e-12 else 0
            self._pivot(leave, enter)
            rc = rc - rc[enter] * self.T[leave]
            rc[enter] = 0.0
            self.iterations += 1
            since_refresh += 1

    def _entering(self, rc, use_bland):
        masked = np.where(self.banned, np.inf, rc)
        if use_bland:
            idx = np.where(masked < -OPT_TOL)[0]
            return int(idx[0]) if idx.size else -1
        j = int(np.argmin(masked))
        return j if masked[j] < -OPT_TOL else -1

    def _leaving(self, enter, use_bland):
        col = self.T[:, enter]
        rows = np.where(col > PIVOT_TOL)[0]
        if rows.size == 0:
            return -1
        ratios = self.b[rows] / col[rows]
        best = float(np.min(ratios))
        cand = rows[ratios <= best + 1e-12]
        if use_bland:
            k = int(np.argmin(self.basis[cand]))
            return int(cand[k])
        return int(cand[0])

    def _pivot(self, row, col):
        piv = self.T[row, col]
        self.T[row] /= piv
        self.b[row] /= piv
        factors = self.T[:, col].copy()
        factors[row] = 0.0
        self.T -= np.outer(factors, self.T[row])
        self.b -= factors * self.b[row]
        self.T[:, col] = 0.0
        self.T[row, col] = 1.0
        self.basis[row] = col

    def _purge_artificials(self):
        """Pivot out artificials left basic at zero; rows that cannot
        release one are linearly dependent and are neutralized."""
        for i in range(self.m):
            if self.basis[i] in self.art:
                target = -1
                for j in range(self.ntot):
                    if not self.banned[j] and abs(self.T[i, j]) > REDUNDANT_TOL:
                        target = j
                        break
                if target >= 0:
                    self._pivot(i, target)
                else:
                    self.T[i, :] = 0.0
                    self.T[i, self.basis[i]] = 1.0
                    self.b[i] = 0.0
                    self.row_alive[i] = False

    def primal(self):
        z = np.zeros(self.ntot)
        z[self.basis] = self.b
        return z

    def duals(self):
        cost2 = np.zeros(self.ntot)
        cost2[: self.c.shape[0]] = self.c
        cb = cost2[self.basis]
        B = self.A0[:, self.basis]
        try:
            y = np.linalg.solve(B.T, cb)
        except np.linalg.LinAlgError:
            y = np.linalg.lstsq(B.T, cb, rcond=None)[0]
        y[~self.row_alive] = 0.0
        return y
