"""Pure-Python (numpy) twin of the compiled simplex kernel in ``_simplex.pyx``.

Both implementations solve the standard-form LP

    min  g'y   s.t.  E y = h,  y >= 0

with a dense two-phase tableau.  The pivoting rule is Dantzig's (most
negative reduced cost, lowest index on ties) with a Harris two-pass ratio
test.  After ``bland_after`` consecutive pivots that leave the objective
unchanged (within ``tol``) the phase switches permanently to Bland's rule
with the textbook ratio test, ties broken by the lowest basic variable
index.  Phase 1 ends once the artificial sum is within ``tol`` times the
right-hand-side scale.  Both twins must produce identical pivot sequences.
"""

import numpy as np

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3


def _pivot(T, r, e):
    T[r] /= T[r, e]
    f = T[:, e].copy()
    f[r] = 0.0
    T -= np.outer(f, T[r])


def _run(T, basis, k, ncols, tol, max_iter, bland_after, it, target=-1.0):
    if ncols == 0:
        return OPTIMAL, it
    stalled = 0
    bland = False
    while it < max_iter:
        if target >= 0.0 and -T[k, -1] <= target:
            return OPTIMAL, it
        obj = T[k, :ncols]
        if bland:
            cand = np.flatnonzero(obj < -tol)
            if cand.size == 0:
                return OPTIMAL, it
            e = int(cand[0])
        else:
            e = int(np.argmin(obj))
            if obj[e] >= -tol:
                return OPTIMAL, it
        col = T[:k, e]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return UNBOUNDED, it
        if bland:
            # textbook ratio test, lowest basic index on ties (anti-cycling)
            ratios = np.maximum(T[rows, -1], 0.0) / col[rows]
            rmin = ratios.min()
            ties = rows[ratios <= rmin + tol]
            r = int(ties[np.argmin(basis[ties])])
        else:
            # Harris two-pass test: relaxed bound, then the largest pivot
            tmax = ((T[rows, -1] + tol) / col[rows]).min()
            cand = rows[T[rows, -1] / col[rows] <= tmax]
            piv = col[cand]
            top = cand[piv == piv.max()]
            r = int(top[np.argmin(basis[top])])
            rmin = max(T[r, -1], 0.0) / col[r]
        # a pivot that barely moves the objective counts as a stall
        if -obj[e] * rmin <= tol * (1.0 + abs(T[k, -1])):
            stalled += 1
            if stalled >= bland_after:
                bland = True
        else:
            stalled = 0
        _pivot(T, r, e)
        basis[r] = e
        it += 1
    return ITERATION_LIMIT, it


def simplex_std(E, h, g, tol=1e-9, max_iter=5000, bland_after=50):
    """Solve ``min g'y s.t. E y = h, y >= 0``.

    Returns ``(status, y, pi, iterations)`` where ``pi`` are the simplex
    multipliers of the equality rows (the optimal solution of the dual
    ``max h'pi s.t. E'pi <= g``).
    """
    E = np.asarray(E, dtype=float)
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    k, m = E.shape
    sign = np.where(h < 0.0, -1.0, 1.0)
    T = np.zeros((k + 1, m + k + 1))
    T[:k, :m] = E * sign[:, None]
    T[:k, m:m + k] = np.eye(k)
    T[:k, -1] = h * sign
    basis = np.arange(m, m + k, dtype=np.int64)

    # phase 1: minimise the sum of artificials
    T[k, :m] = -T[:k, :m].sum(axis=0)
    T[k, -1] = -T[:k, -1].sum()
    scale = 1.0 + np.abs(h).max(initial=0.0)
    # stop as soon as the artificials are within the feasibility tolerance
    status, it = _run(T, basis, k, m, tol, max_iter, bland_after, 0, tol * scale)
    if status == ITERATION_LIMIT:
        return status, np.zeros(m), np.zeros(k), it
    if -T[k, -1] > tol * scale * 10.0:
        return INFEASIBLE, np.zeros(m), np.zeros(k), it

    # drive zero-level artificials out of the basis
    for r in range(k):
        if basis[r] >= m:
            cand = np.flatnonzero(np.abs(T[r, :m]) > tol)
            if cand.size:
                _pivot(T, r, int(cand[0]))
                basis[r] = int(cand[0])
                it += 1

    # phase 2
    gext = np.zeros(m + k)
    gext[:m] = g
    cb = gext[basis]
    T[k, :-1] = gext - cb @ T[:k, :-1]
    T[k, -1] = -cb @ T[:k, -1]
    status, it = _run(T, basis, k, m, tol, max_iter, bland_after, it)

    y = np.zeros(m)
    real = basis < m
    y[basis[real]] = np.maximum(T[:k, -1][real], 0.0)
    pi = -T[k, m:m + k] * sign
    return status, y, pi, it
