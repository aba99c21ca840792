"""Shared instance generators and independent brute-force oracles.

The oracles here deliberately avoid the library's solver paths: membership
is recomputed from the set definitions with vectorized numpy, eigenvalues
come from closed forms or numpy.linalg, and worst cases are dense
simplex-grid searches.
"""

import numpy as np

from ddro import expr, model


def E(text, n=1, d=0):
    return expr.parse(text, n, d)


def make_spec(points, weights, h_text, amb, n=1, xlo=None, xhi=None, f_text="0", cost=None):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    sc = model.ScenarioSet(points, None if weights is None else np.asarray(weights, dtype=float))
    xlo = np.zeros(n) if xlo is None else np.asarray(xlo, dtype=float)
    xhi = np.ones(n) if xhi is None else np.asarray(xhi, dtype=float)
    if cost is None:
        cost = model.ClosedFormCost(expr.parse(h_text, n, sc.d))
    return model.ProblemSpec(
        n=n, x_lower=xlo, x_upper=xhi, f=expr.parse(f_text, n),
        scenarios=sc, cost=cost, ambiguity=amb,
    )


def sm_normalized(moments, lower, upper, p_lower, p_upper):
    """Prepend the total-mass row the way the file loader does."""
    one_xi = E("1", 0, 1)
    one_x = E("1", 1, 0)
    return model.SmParams(
        moments=[one_xi] + list(moments),
        lower=[one_x] + list(lower),
        upper=[one_x] + list(upper),
        p_lower=list(p_lower),
        p_upper=list(p_upper),
    )


# ---------------------------------------------------------------------------
# dense simplex grids (vectorized)


def simplex_grid(N, step):
    m = int(round(1.0 / step))
    if N == 1:
        return np.ones((1, 1))
    if N == 2:
        a = np.arange(m + 1)
        return np.stack([a, m - a], axis=1) / m
    if N == 3:
        A, B = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        mask = A + B <= m
        a, b = A[mask], B[mask]
        return np.stack([a, b, m - a - b], axis=1) / m
    raise ValueError("simplex_grid supports N <= 3")


def grid_worst_case(spec, x, step=1e-3):
    """Dense-grid maximum of E_p[h] over the ambiguity set at x."""
    P = simplex_grid(spec.N, step)
    h = model.scenario_costs(spec, x)
    feas = _grid_membership(spec, x, P)
    if not np.any(feas):
        raise ValueError("no grid point is feasible; enlarge the set")
    vals = P @ h
    return float(np.max(vals[feas]))


def _grid_membership(spec, x, P):
    fam = spec.ambiguity.family
    pts = spec.scenarios.points
    tol = 1e-12
    if fam == "sm":
        F, low, up, p_lo, p_hi = model.sm_data(spec, x)
        vals = P @ F.T
        ok = np.all(vals >= low - tol, axis=1) & np.all(vals <= up + tol, axis=1)
        ok &= np.all(P >= p_lo - tol, axis=1) & np.all(P <= p_hi + tol, axis=1)
        return ok
    if fam == "w":
        if spec.d != 1:
            raise ValueError("grid membership for the Wasserstein family needs d = 1")
        phat = spec.scenarios.weights
        r = model.w_radius(spec, x)
        order = np.argsort(pts[:, 0])
        gaps = np.diff(pts[order, 0])
        dev = np.cumsum(P[:, order] - phat[order], axis=1)[:, :-1]
        dist = np.abs(dev) @ gaps
        return dist <= r + tol
    if fam == "ks":
        phat = spec.scenarios.weights
        eta = model.ks_eta(spec, x)
        order = list(spec.ambiguity.order)
        dev = np.abs(np.cumsum(P[:, order] - phat[order], axis=1))
        return np.max(dev, axis=1) <= eta + tol
    if fam == "phi":
        phat = spec.scenarios.weights
        eta = model.phi_eta(spec, x)
        kind = spec.ambiguity.phi
        div = np.zeros(len(P))
        for i, q in enumerate(phat):
            t = P[:, i] / q
            if kind == "kl":
                div += q * np.where(t > 0, t * np.log(np.clip(t, 1e-300, None)), 0.0)
            else:
                div += q * (t - 1.0) ** 2
        return div <= eta + tol
    if fam == "dy":
        mu, Q, alpha, beta = model.dy_data(spec, x)
        d = spec.d
        tau = P @ pts
        diff = tau - mu
        Qinv = np.linalg.inv(Q)
        ell = np.einsum("mi,ij,mj->m", diff, Qinv, diff)
        ok = ell <= alpha + 1e-10
        A = np.array([np.outer(pts[k] - mu, pts[k] - mu) for k in range(spec.N)])
        S = beta * Q - np.einsum("mk,kij->mij", P, A)
        if d == 1:
            lam = S[:, 0, 0]
        elif d == 2:
            tr = S[:, 0, 0] + S[:, 1, 1]
            det = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] * S[:, 1, 0]
            lam = 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0)))
        else:
            lam = np.array([np.linalg.eigvalsh(S[m])[0] for m in range(len(P))])
        return ok & (lam >= -1e-10)
    raise ValueError(f"no grid membership for family {fam!r}")


def cdf_area_distance(points1d, p, q):
    """1-D transport distance as the area between the two CDFs."""
    points1d = np.asarray(points1d, dtype=float)
    order = np.argsort(points1d)
    gaps = np.diff(points1d[order])
    dev = np.cumsum(np.asarray(p)[order] - np.asarray(q)[order])[:-1]
    return float(np.abs(dev) @ gaps)


# ---------------------------------------------------------------------------
# random instance generators (all decision-dependent through x1)


def random_points(rng, N, d, spread=2.0):
    while True:
        pts = rng.uniform(-spread, spread, size=(N, d)).round(3)
        if len({tuple(row) for row in pts}) == N:
            return pts


def random_simplex(rng, N, floor=0.05):
    w = rng.dirichlet(np.ones(N))
    w = (w + floor) / (1.0 + N * floor)
    return w


def aff(v, a=0.0):
    """Expression text for v + a*x1."""
    if a == 0.0:
        return f"{v:.17g}"
    return f"{v:.17g} + {a:.17g}*x1"


def random_sm_spec(rng, N=None, d=None, extra_moments=None, n=1):
    N = N or int(rng.integers(2, 9))
    d = d or int(rng.integers(1, 4))
    m_extra = extra_moments if extra_moments is not None else int(rng.integers(0, 4))
    pts = random_points(rng, N, d)
    p0 = random_simplex(rng, N)
    moments, lower, upper = [], [], []
    for i in range(m_extra):
        j = int(rng.integers(0, d))
        power = int(rng.integers(1, 3))
        text = f"xi{j + 1}" if power == 1 else f"xi{j + 1}*xi{j + 1}"
        f_i = E(text, 0, d)
        v = float(sum(p0[k] * expr.evaluate(f_i, (), pts[k]) for k in range(N)))
        slack = 0.1 + float(rng.uniform(0.05, 0.3))
        moments.append(f_i)
        lower.append(E(aff(v - slack, -float(rng.uniform(0, 0.1))), n))
        upper.append(E(aff(v + slack, +float(rng.uniform(0, 0.1))), n))
    p_lower = [E("0", n) for _ in range(N)]
    cap = min(1.0, float(np.max(p0)) + float(rng.uniform(0.3, 0.8)))
    p_upper = [E(aff(cap), n) for _ in range(N)]
    amb = sm_normalized(moments, lower, upper, p_lower, p_upper)
    h_text = _random_h_text(rng, d)
    return make_spec(pts, p0, h_text, amb, n=n)


def random_w_spec(rng, N=None, d=None, n=1):
    N = N or int(rng.integers(2, 9))
    d = d or int(rng.integers(1, 4))
    pts = random_points(rng, N, d)
    phat = random_simplex(rng, N)
    diam = float(np.max([np.linalg.norm(a - b) for a in pts for b in pts]))
    r0 = float(rng.uniform(0.05, 0.5)) * diam
    amb = model.WParams(E(aff(r0, 0.2 * r0), n), norm=str(rng.choice(["l1", "l2", "linf"])))
    return make_spec(pts, phat, _random_h_text(rng, d), amb, n=n)


def random_ks_spec(rng, N=None, d=None, n=1):
    N = N or int(rng.integers(2, 9))
    d = d or int(rng.integers(1, 4))
    pts = random_points(rng, N, d)
    phat = random_simplex(rng, N)
    eta0 = float(rng.uniform(0.05, 0.5))
    amb = model.KsParams(E(aff(eta0, 0.1 * eta0), n))
    return make_spec(pts, phat, _random_h_text(rng, d), amb, n=n)


def random_phi_spec(rng, kind, N=None, d=None, n=1):
    N = N or int(rng.integers(2, 9))
    d = d or int(rng.integers(1, 4))
    pts = random_points(rng, N, d)
    phat = random_simplex(rng, N)
    eta0 = float(rng.uniform(0.02, 0.5))
    amb = model.PhiParams(E(aff(eta0, 0.2 * eta0), n), phi=kind)
    return make_spec(pts, phat, _random_h_text(rng, d), amb, n=n)


def random_dy_spec(rng, N=None, d=None, n=1):
    """Slater-feasible by construction: the anchor distribution sits strictly
    inside both restrictions for every x in the unit box."""
    N = N or int(rng.integers(2, 9))
    d = d or int(rng.integers(1, 4))
    pts = random_points(rng, N, d)
    p0 = random_simplex(rng, N)
    mu = p0 @ pts
    Araw = rng.normal(size=(d, d))
    Q = Araw @ Araw.T + 0.3 * np.eye(d)
    M0 = np.zeros((d, d))
    for k in range(N):
        diff = pts[k] - mu
        M0 += p0[k] * np.outer(diff, diff)
    lam = float(np.max(np.linalg.eigvalsh(np.linalg.inv(Q) @ M0)))
    beta0 = 1.5 * lam + 0.2
    alpha0 = float(rng.uniform(0.1, 1.0))
    amb = model.DyParams(
        mu=[E(aff(float(v)), n) for v in mu],
        Q=[[E(aff(float(Q[i, j])), n) for j in range(d)] for i in range(d)],
        alpha=E(aff(alpha0, 0.3 * alpha0), n),
        beta=E(aff(beta0, 0.2 * beta0), n),
    )
    return make_spec(pts, p0, _random_h_text(rng, d), amb, n=n)


def _random_h_text(rng, d):
    j = int(rng.integers(0, d))
    a = float(rng.uniform(-2, 2))
    b = float(rng.uniform(-1, 1))
    c = float(rng.uniform(-0.5, 0.5))
    return f"{a:.17g}*xi{j + 1} + {b:.17g}*xi{j + 1}*xi{j + 1} + {c:.17g}*x1"


def random_spec(rng, family, **kw):
    if family == "sm":
        return random_sm_spec(rng, **kw)
    if family == "w":
        return random_w_spec(rng, **kw)
    if family == "ks":
        return random_ks_spec(rng, **kw)
    if family == "kl":
        return random_phi_spec(rng, "kl", **kw)
    if family == "chisq":
        return random_phi_spec(rng, "chisq", **kw)
    if family == "dy":
        return random_dy_spec(rng, **kw)
    raise ValueError(family)
