"""Dense LP and strictly convex QP solvers.

All LPs are routed through one kernel: ``max w'z s.t. C z <= d`` is solved
through its dual ``min d'y s.t. C'y = w, y >= 0`` on a tableau whose row
count is the (small) number of variables rather than the number of
constraints.  The primal optimiser is read off the simplex multipliers.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"

LP_TOL = 1e-9
KKT_TOL = 1e-8


class SolverError(RuntimeError):
    """Raised when a kernel fails for numerical reasons."""

    def __init__(self, message, active_set=None):
        super().__init__(message)
        self.active_set = active_set


@dataclass
class LpResult:
    x: np.ndarray
    fun: float
    status: str


def _run_simplex(E, h, g, backend):
    """Kernel call that retries a stalled solve with Bland's rule from the start.

    Dantzig pricing with the Harris ratio test can drift into a degenerate
    vertex cluster it never leaves, even after the late switch to Bland.
    """
    simplex = kernels.get_simplex(backend)
    out = simplex(E, h, g, LP_TOL)
    if out[0] == kernels.ITERATION_LIMIT:
        out = simplex(E, h, g, LP_TOL, 5000, 0)
    return out


def maximize(w, C, d, backend=None):
    """Maximise ``w'z`` subject to ``C z <= d`` with ``z`` free."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.asarray(d, dtype=float)
    w = np.asarray(w, dtype=float)
    n = w.size
    if C.shape[0] == 0:
        if np.any(np.abs(w) > 0):
            return LpResult(np.zeros(n), np.inf, UNBOUNDED)
        return LpResult(np.zeros(n), 0.0, OPTIMAL)
    status, _, pi, _ = _run_simplex(C.T, w, d, backend)
    if status == kernels.OPTIMAL:
        return LpResult(pi, float(w @ pi), OPTIMAL)
    if status == kernels.UNBOUNDED:
        return LpResult(np.zeros(n), -np.inf, INFEASIBLE)
    if status == kernels.INFEASIBLE:
        # dual infeasible: primal is unbounded unless it is itself infeasible
        if is_feasible(C, d, backend):
            return LpResult(np.zeros(n), np.inf, UNBOUNDED)
        return LpResult(np.zeros(n), -np.inf, INFEASIBLE)
    return LpResult(np.zeros(n), np.nan, NUMERICAL_FAILURE)


def is_feasible(C, d, backend=None):
    """True iff ``{z : C z <= d}`` is nonempty (up to the LP tolerance)."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.asarray(d, dtype=float)
    if C.shape[0] == 0:
        return True
    status, _, _, _ = _run_simplex(C.T, np.zeros(C.shape[1]), d, backend)
    if status == kernels.ITERATION_LIMIT:
        raise SolverError("feasibility LP hit the iteration limit")
    return status == kernels.OPTIMAL


def feasible_point(C, d, backend=None):
    """Return a point of ``{z : C z <= d}`` or ``None`` when empty."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.asarray(d, dtype=float)
    if C.shape[0] == 0:
        return np.zeros(C.shape[1])
    status, _, pi, _ = _run_simplex(C.T, np.zeros(C.shape[1]), d, backend)
    if status != kernels.OPTIMAL:
        return None
    return pi


def solve_lp(c, A, b, A_eq=None, b_eq=None, backend=None):
    """Minimise ``c'x`` s.t. ``A x <= b`` (and ``A_eq x = b_eq``).

    Returns an :class:`LpResult`; ``status`` is ``"optimal"``,
    ``"infeasible"`` or ``"unbounded"``.  Ties between optimal vertices are
    broken deterministically by the kernel's lowest-index pivoting rule.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, c.size)
    b = np.asarray(b, dtype=float).reshape(-1)
    if A_eq is not None and len(A_eq):
        A_eq = np.asarray(A_eq, dtype=float).reshape(-1, c.size)
        b_eq = np.asarray(b_eq, dtype=float).reshape(-1)
        A = np.vstack([A, A_eq, -A_eq])
        b = np.concatenate([b, b_eq, -b_eq])
    res = maximize(-c, A, b, backend)
    if res.status == OPTIMAL:
        return LpResult(res.x, float(c @ res.x), OPTIMAL)
    return LpResult(res.x, -res.fun, res.status)


# ---------------------------------------------------------------------------
# quadratic programming


@dataclass
class QpProblem:
    """``min 1/2 x'Qx + c'x  s.t.  A x <= b`` with ``Q`` positive definite."""

    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.Q.shape != (n, n):
            raise ValueError(f"Q must be {n}x{n}, got {self.Q.shape}")
        if self.A.shape[0] != self.b.size:
            raise ValueError("A and b row counts differ")
        if not np.allclose(self.Q, self.Q.T, atol=1e-10, rtol=0.0):
            raise ValueError("Q is not symmetric")


@dataclass
class QpSolution:
    x: np.ndarray
    lam: np.ndarray
    active_set: tuple
    status: str
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def objective(self):
        return self.diagnostics.get("objective", np.nan)


def _independent_rows(A, rows, tol=1e-10):
    keep = []
    for j in rows:
        trial = A[keep + [j]]
        if np.linalg.matrix_rank(trial, tol=tol * max(1.0, np.abs(trial).max())) == len(keep) + 1:
            keep.append(j)
    return keep


def solve_qp(p: QpProblem, max_iter=500, backend=None) -> QpSolution:
    """Primal active-set method started from a phase-1 LP vertex.

    Blocking constraints and dropped multipliers are chosen by the most
    violating index with ties to the lowest index; after ``n + m`` iterations
    without termination the drop rule switches to Bland's lowest index.
    """
    Q, c, A, b = p.Q, p.c, p.A, p.b
    n, m = c.size, b.size
    try:
        cho = cho_factor(Q)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Q is not positive definite") from exc

    if m == 0:
        x = -cho_solve(cho, c)
        return _finish(p, x, np.zeros(0), [], 0)

    x = feasible_point(A, b, backend)
    if x is None:
        return QpSolution(np.full(n, np.nan), np.zeros(m), (), INFEASIBLE)

    scale = 1.0 + np.abs(b).max()
    slack = b - A @ x
    tight = [j for j in range(m) if abs(slack[j]) <= 1e-9 * scale]
    W = _independent_rows(A, tight)[:n]
    bland_after = n + m

    for it in range(max_iter):
        g = Q @ x + c
        if W:
            AW = A[W]
            Z = cho_solve(cho, AW.T)
            S = AW @ Z
            try:
                lamW = np.linalg.solve(S, -AW @ cho_solve(cho, g))
            except np.linalg.LinAlgError:
                return QpSolution(x, np.zeros(m), tuple(sorted(W)), NUMERICAL_FAILURE,
                                  it, {"reason": "singular working-set Schur complement"})
            # n independent working rows fix x; anything else is rounding noise
            step = np.zeros(n) if len(W) == n else -cho_solve(cho, g + AW.T @ lamW)
        else:
            lamW = np.zeros(0)
            step = -cho_solve(cho, g)

        if np.abs(step).max(initial=0.0) <= 1e-11 * (1.0 + np.abs(x).max()):
            if lamW.size == 0 or lamW.min() >= -KKT_TOL:
                lam = np.zeros(m)
                lam[W] = np.maximum(lamW, 0.0)
                return _finish(p, x, lam, W, it)
            neg = [k for k in range(len(W)) if lamW[k] < -KKT_TOL]
            if it >= bland_after:
                drop = min(neg, key=lambda k: W[k])
            else:
                drop = min(neg, key=lambda k: (lamW[k], W[k]))
            W.pop(drop)
            continue

        Ap = A @ step
        alpha, block = 1.0, None
        for j in range(m):
            if j in W or Ap[j] <= 1e-12:
                continue
            ratio = max(b[j] - A[j] @ x, 0.0) / Ap[j]
            if ratio < alpha - 1e-14 or (block is not None and abs(ratio - alpha) <= 1e-14 and j < block):
                alpha, block = ratio, j
        x = x + alpha * step
        if block is not None:
            W.append(block)

    return QpSolution(x, np.zeros(m), tuple(sorted(W)), NUMERICAL_FAILURE, max_iter,
                      {"reason": "iteration limit"})


def _finish(p, x, lam, W, it):
    resid_stat = p.Q @ x + p.c + p.A.T @ lam
    viol = p.A @ x - p.b if p.b.size else np.zeros(0)
    diag = {
        "objective": float(0.5 * x @ p.Q @ x + p.c @ x),
        "stationarity": float(np.abs(resid_stat).max(initial=0.0)),
        "primal_violation": float(max(viol.max(initial=0.0), 0.0)),
    }
    return QpSolution(x, lam, tuple(sorted(W)), OPTIMAL, it, diag)
