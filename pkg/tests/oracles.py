"""Brute-force oracles that share no code with the package kernels.

They are exponential in the problem size and only meant for tiny instances.
"""

from itertools import combinations

import numpy as np


def qp_by_enumeration(Q, c, A, b, tol=1e-9):
    """Solve ``min 1/2 x'Qx + c'x s.t. A x <= b`` by trying every active set.

    Returns ``(x, lam, active)`` or ``None`` when no KKT point exists.  For a
    positive definite ``Q`` the KKT point is unique, so the first one found is
    the minimiser.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    A = np.asarray(A, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float).reshape(-1)
    m = A.shape[0]
    for size in range(min(n, m) + 1):
        for act in combinations(range(m), size):
            act = list(act)
            Aa = A[act]
            K = np.block([[Q, Aa.T], [Aa, np.zeros((size, size))]])
            rhs = np.concatenate([-c, b[act]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.allclose(K @ sol, rhs, atol=1e-9):
                continue
            x, mu = sol[:n], sol[n:]
            if np.any(mu < -tol) or np.any(A @ x > b + tol * (1 + np.abs(b))):
                continue
            lam = np.zeros(m)
            lam[act] = mu
            return x, lam, tuple(act)
    return None


def lp_by_vertices(c, A, b, tol=1e-9):
    """Minimise ``c'z`` over a bounded ``{A z <= b}`` by enumerating vertices."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    best = None
    for rows in combinations(range(A.shape[0]), n):
        Ar = A[list(rows)]
        if abs(np.linalg.det(Ar)) < 1e-12:
            continue
        z = np.linalg.solve(Ar, b[list(rows)])
        if np.all(A @ z <= b + tol):
            val = float(np.dot(c, z))
            if best is None or val < best[0] - 1e-12:
                best = (val, z)
    return best


def chebyshev_radius_by_vertices(C, d):
    """Chebyshev radius of a bounded polyhedron through its (z, r) LP vertices."""
    C = np.asarray(C, dtype=float)
    d = np.asarray(d, dtype=float)
    norms = np.linalg.norm(C, axis=1)
    n = C.shape[1]
    A = np.hstack([C, norms[:, None]])
    # r >= -big keeps the LP bounded when the set is empty
    A = np.vstack([A, np.append(np.zeros(n), -1.0)])
    b = np.append(d, 1e3)
    cost = np.append(np.zeros(n), -1.0)
    best = lp_by_vertices(cost, A, b)
    return None if best is None else -best[0]
