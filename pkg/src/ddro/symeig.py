"""Symmetric eigendecomposition by cyclic Jacobi rotations.

Matrices here are tiny (scenario dimension d), so Jacobi sweeps to machine
precision are cheap and keep the eigenvector cuts deterministic.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

OFF_TOL = 1e-12
MAX_SWEEPS = 60


def jacobi_eigh(A, tol=OFF_TOL):
    """Eigenvalues (ascending) and eigenvectors of a symmetric matrix.

    Returns (w, V) with A = V @ diag(w) @ V.T and V orthonormal columns.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    V = np.eye(n)
    if n == 1:
        return A[0, 0:1].copy(), V
    scale = float(np.max(np.abs(A), initial=0.0)) + 1.0
    for _ in range(MAX_SWEEPS):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= tol * scale * 1e-4:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t = t / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                A = rot.T @ A @ rot
                V = V @ rot
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def min_eig(A):
    """Smallest eigenvalue and its eigenvector."""
    w, V = jacobi_eigh(A)
    return float(w[0]), V[:, 0]


def spd_factors(Q, where=""):
    """Inverse and inverse square root of a symmetric positive definite Q.

    Raises ParameterError when Q is not (numerically) SPD.
    """
    Q = np.asarray(Q, dtype=float)
    sym_err = float(np.max(np.abs(Q - Q.T), initial=0.0))
    if sym_err > 1e-9 * (1.0 + float(np.max(np.abs(Q), initial=0.0))):
        raise ParameterError(f"matrix not symmetric{where} (asymmetry {sym_err:.2e})")
    w, V = jacobi_eigh(0.5 * (Q + Q.T))
    if w[0] <= 1e-12 * max(1.0, float(w[-1])):
        raise ParameterError(
            f"matrix not positive definite{where} (min eigenvalue {w[0]:.3e})"
        )
    inv = V @ np.diag(1.0 / w) @ V.T
    inv_sqrt = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    sqrt = V @ np.diag(np.sqrt(w)) @ V.T
    return inv, inv_sqrt, sqrt
