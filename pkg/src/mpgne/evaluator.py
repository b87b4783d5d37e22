"""Online evaluation of explicit GNE solutions: point location and law evaluation."""

from dataclasses import dataclass

import numpy as np

from . import polyhedra, qp_core
from .gne_solver import INFINITE, UNIQUE, ExplicitGNESolution, GNEProblem


class EvaluationError(RuntimeError):
    pass


class OutsideParameterBox(EvaluationError):
    pass


@dataclass(frozen=True)
class EvaluationPolicy:
    """How to pick a law when several regions, or a whole family, apply.

    ``infinite_resolution`` is ``"stored_subregions"`` (use selection
    subregions, falling back to the minimum-norm ``y2``) or
    ``"min_norm_y2"`` (always resolve the family online).
    """

    region_order: str = "solver_order"
    infinite_resolution: str = "stored_subregions"
    tol_membership: float = 1e-9

    def __post_init__(self):
        if self.tol_membership < 0:
            raise ValueError("tol_membership must be nonnegative")
        if self.region_order != "solver_order":
            raise ValueError("only solver_order is supported")
        if self.infinite_resolution not in ("stored_subregions", "min_norm_y2"):
            raise ValueError("infinite_resolution must be stored_subregions or min_norm_y2")


DEFAULT_POLICY = EvaluationPolicy()


@dataclass
class EvaluationResult:
    x: np.ndarray
    region: int
    subregion: int = None
    y2: np.ndarray = None


def _slice(er, p):
    """The lifted set of an infinite region at fixed ``p``, as rows over ``y2``."""
    npar = p.size
    L = er.lifted
    return L.C[:, npar:], L.d - L.C[:, :npar] @ p


def _slice_nonempty(er, p, tol):
    Cy, dy = _slice(er, p)
    P = polyhedra.Polyhedron(Cy, dy + tol)
    return polyhedra.chebyshev(P).radius >= 0.0


def locate(sol: ExplicitGNESolution, p, tol=None):
    """Indices of all regions containing ``p``, in solver order."""
    tol = DEFAULT_POLICY.tol_membership if tol is None else tol
    p = np.asarray(p, dtype=float).reshape(-1)
    gp = sol.problem
    if p.size != gp.n_p:
        raise EvaluationError(f"p has {p.size} entries, expected {gp.n_p}")
    if not polyhedra.contains(gp.p_box, p, tol):
        raise OutsideParameterBox(f"p={p.tolist()} lies outside the parameter box")
    hits = []
    for k, er in enumerate(sol.regions):
        if er.region is not None:
            if polyhedra.contains(er.region, p, tol):
                hits.append(k)
        elif _slice_nonempty(er, p, tol):
            hits.append(k)
    return hits


def nearest_region(sol: ExplicitGNESolution, p):
    """``(index, violation)`` of the region whose inequalities ``p`` violates least."""
    best, viol = None, np.inf
    for k, er in enumerate(sol.regions):
        if er.region is None:
            continue
        v = float(np.max(er.region.C @ p - er.region.d, initial=-np.inf))
        if v < viol:
            best, viol = k, v
    return best, viol


def min_norm_y2(er, p, tol=1e-9):
    """Smallest-norm ``y2`` with ``(p, y2)`` in the region's lifted set."""
    Cy, dy = _slice(er, np.asarray(p, dtype=float))
    ny = er.y2_dim
    sol = qp_core.solve_qp(qp_core.QpProblem(2.0 * np.eye(ny), np.zeros(ny), Cy, dy + tol))
    if sol.status != qp_core.OPTIMAL:
        raise EvaluationError(f"lifted slice is empty or ill-posed at p={p.tolist()}: {sol.status}")
    return sol.x


def evaluate(sol: ExplicitGNESolution, p, policy: EvaluationPolicy = None, return_info=False):
    """Equilibrium ``x*(p)`` from the first region containing ``p``."""
    policy = policy or DEFAULT_POLICY
    p = np.asarray(p, dtype=float).reshape(-1)
    hits = locate(sol, p, policy.tol_membership)
    if not hits:
        k, v = nearest_region(sol, p)
        raise EvaluationError(f"p={p.tolist()} lies in no critical region "
                              f"(nearest: region {k}, violation {v:.3g})")
    k = hits[0]
    er = sol.regions[k]
    if er.kind == UNIQUE:
        res = EvaluationResult(er.law(p), k)
    else:
        res = None
        if policy.infinite_resolution == "stored_subregions":
            for j, sub in enumerate(er.subregions):
                if polyhedra.contains(sub.region, p, policy.tol_membership):
                    res = EvaluationResult(sub.law(p), k, j, sub.y2_law(p))
                    break
        if res is None:
            y2 = min_norm_y2(er, p, policy.tol_membership)
            res = EvaluationResult(er.x_of(p, y2), k, None, y2)
    return res if return_info else res.x


def agent_best_response(gp: GNEProblem, i, p, x):
    """Optimal block of agent ``i`` for fixed ``x_{-i}`` and ``p`` (or ``None`` if infeasible)."""
    I, O = gp.block(i), gp.others(i)
    Qi = gp.Q[i]
    lin = gp.c[i][I] + Qi[np.ix_(I, O)] @ x[O] + gp.F[i][I] @ p
    rhs = gp.b + gp.S @ p - gp.A[:, O] @ x[O]
    Ai = gp.A[:, I]
    own = np.linalg.norm(Ai, axis=1) > 0
    # rows without own variables only restrict (x_{-i}, p)
    if np.any(rhs[~own] < -1e-9 * (1.0 + np.abs(rhs[~own]))):
        return None
    sol = qp_core.solve_qp(qp_core.QpProblem(Qi[np.ix_(I, I)], lin, Ai[own], rhs[own]))
    if sol.status != qp_core.OPTIMAL:
        return None
    return sol


def equilibrium_residual(gp: GNEProblem, p, x, return_details=False):
    """Largest deviation of any agent's block from its best response."""
    p = np.asarray(p, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if p.size != gp.n_p or x.size != gp.n_x:
        raise ValueError("dimension mismatch between problem and (p, x)")
    worst, details = 0.0, []
    for i in range(gp.N):
        sol = agent_best_response(gp, i, p, x)
        if sol is None:
            details.append({"agent": i, "status": "infeasible"})
            worst = np.inf
            continue
        dev = float(np.abs(x[gp.block(i)] - sol.x).max(initial=0.0))
        details.append({"agent": i, "status": "optimal", "deviation": dev})
        worst = max(worst, dev)
    return (worst, details) if return_details else worst
