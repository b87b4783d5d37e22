"""Invariant suites for explicit GNE solutions.

Each suite returns a :class:`CheckResult`; :func:`run_all` runs the six
suites used by ``mpgne verify``:

a. agent mpQP laws against the active-set QP solver,
b. equilibrium residual of every stored law on sampled parameters,
c. minimum-norm dominance of the selected ``y2`` over sampled feasible ``y2``,
d. equality of coupling-row multipliers on v-GNE subregions,
e. SVD reconstruction and the solvability condition ``U2'[M_p M_1] = 0``,
f. interior infeasibility of combinations rejected by the shared-row rule.
"""

from dataclasses import dataclass, field
import time

import numpy as np

from . import evaluator, polyhedra, qp_core
from .gne_solver import (INFINITE, UNIQUE, ExplicitGNESolution, GNEProblem,
                         assemble_linear_system, best_responses, coupling_groups,
                         enumerate_combinations, is_valid, svd_blocks)

RESIDUAL_TOL = 1e-6
LAW_TOL = 1e-7
CONSENSUS_TOL = 1e-6
SVD_TOL = 1e-9
INTERIOR_TOL = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float = 0.0
    checked: int = 0
    failures: list = field(default_factory=list)
    note: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        msg = f"[{status}] {self.name}: {self.checked} checks, worst {self.worst:.3g}"
        if self.note:
            msg += f" ({self.note})"
        return msg


def _interior_samples(P: polyhedra.Polyhedron, n, rng, shrink=1e-7):
    """Up to ``n`` points of ``P`` pulled slightly towards its Chebyshev centre."""
    if n <= 0:
        return np.zeros((0, P.dim))
    cheb = polyhedra.chebyshev(P)
    if cheb.radius < 0:
        return np.zeros((0, P.dim))
    try:
        pts = polyhedra.sample_uniform(P, n, rng)
    except polyhedra.PolyhedronError:
        return np.zeros((0, P.dim))
    if len(pts) < n:
        pts = np.vstack([pts, np.repeat(cheb.center[None], n - len(pts), axis=0)])
    return pts + shrink * (cheb.center - pts)


def _family_samples(er, gp, n, rng):
    """``(p, y2)`` pairs drawn from the lifted set of an infinite region."""
    pts = _interior_samples(er.lifted, n, rng)
    return pts[:, :gp.n_p], pts[:, gp.n_p:]


# ---------------------------------------------------------------------------
# (a)


def check_agent_laws(gp: GNEProblem, maps=None, n_samples=200, seed=0, tol=LAW_TOL):
    """Each agent's explicit best response against a direct QP solve."""
    maps = maps or best_responses(gp)
    rng = np.random.default_rng(seed)
    res = CheckResult("a. agent mpQP laws vs QP solver", True)
    for i, br in enumerate(maps):
        P = gp.agent_mpqp(i)
        pts = polyhedra.sample_uniform(P.theta_box, n_samples, rng)
        for th in pts:
            sol = qp_core.solve_qp(qp_core.QpProblem(P.Q, P.c + P.F @ th, P.A, P.b + P.B @ th))
            if sol.status == qp_core.INFEASIBLE:
                continue
            hits = br.locate(th, 1e-9)
            if not hits:
                res.failures.append({"agent": i, "theta": th.tolist(), "error": "not covered"})
                res.worst = np.inf
                continue
            err = max(float(np.abs(br.regions[k].primal(th) - sol.x).max()) for k in hits)
            res.worst = max(res.worst, err)
            res.checked += 1
            if err > tol * (1.0 + np.abs(sol.x).max(initial=0.0)):
                res.failures.append({"agent": i, "theta": th.tolist(), "error": err})
    res.passed = not res.failures
    return res


# ---------------------------------------------------------------------------
# (b)


def _record(res, label, p, r):
    res.checked += 1
    res.worst = max(res.worst, r)
    if not r <= RESIDUAL_TOL:
        res.failures.append({"region": label, "p": np.asarray(p).tolist(), "residual": r})


def check_residuals(sol: ExplicitGNESolution, n_samples=50, seed=0):
    """Residual of unique laws, family members and selection laws."""
    gp = sol.problem
    rng = np.random.default_rng(seed)
    res = CheckResult("b. equilibrium residual", True)
    for k, er in enumerate(sol.regions):
        if er.kind == UNIQUE:
            for p in _interior_samples(er.region, n_samples, rng):
                _record(res, k, p, evaluator.equilibrium_residual(gp, p, er.law(p)))
            continue
        P, Y = _family_samples(er, gp, n_samples, rng)
        for p, y2 in zip(P, Y):
            _record(res, k, p, evaluator.equilibrium_residual(gp, p, er.x_of(p, y2)))
        for j, sub in enumerate(er.subregions):
            for p in _interior_samples(sub.region, n_samples, rng):
                _record(res, f"{k}.{j}", p, evaluator.equilibrium_residual(gp, p, sub.law(p)))
    res.passed = not res.failures
    return res


# ---------------------------------------------------------------------------
# (c)


def check_min_norm(sol: ExplicitGNESolution, n_p_samples=5, n_y2_samples=100, seed=0, tol=1e-7):
    """The selected ``y2`` is no longer than any feasible ``y2`` at the same ``p``."""
    gp = sol.problem
    rng = np.random.default_rng(seed)
    res = CheckResult("c. min-norm dominance", True)
    for k, er in enumerate(sol.regions):
        if er.kind != INFINITE:
            continue
        P, _ = _family_samples(er, gp, n_p_samples, rng)
        for p in P:
            if sol.selection == "min_norm":
                hits = [s for s in er.subregions if polyhedra.contains(s.region, p, 1e-9)]
                if not hits:
                    continue
                ystar = hits[0].y2_law(p)
            else:
                ystar = evaluator.min_norm_y2(er, p)
            Cy, dy = evaluator._slice(er, p)
            slice_ = polyhedra.Polyhedron(Cy, dy + 1e-12)
            try:
                ys = polyhedra.sample_uniform(slice_, n_y2_samples, rng)
            except polyhedra.PolyhedronError:
                res.note = "unbounded slices skipped"
                continue
            if not len(ys):
                continue
            gap = float(np.linalg.norm(ystar) - np.linalg.norm(ys, axis=1).min())
            res.checked += len(ys)
            res.worst = max(res.worst, gap)
            if gap > tol * (1.0 + np.linalg.norm(ystar)):
                res.failures.append({"region": k, "p": p.tolist(), "excess": gap})
    if res.checked == 0 and not res.note:
        res.note = "no infinite regions"
    res.passed = not res.failures
    return res


# ---------------------------------------------------------------------------
# (d)


def coupling_multipliers(gp: GNEProblem, p, x):
    """``{row: [multiplier of each agent in the row]}`` from direct QP solves."""
    out = {}
    lam = []
    for i in range(gp.N):
        sol = evaluator.agent_best_response(gp, i, p, x)
        if sol is None:
            return None
        own = np.flatnonzero(np.linalg.norm(gp.A[:, gp.block(i)], axis=1) > 0)
        full = np.zeros(gp.n_A)
        full[own] = sol.lam
        lam.append(full)
    for g in coupling_groups(gp):
        out[g.constraint_row] = [lam[i][g.constraint_row] for i in g.agents]
    return out


def check_consensus(sol: ExplicitGNESolution, n_samples=50, seed=0, tol=CONSENSUS_TOL):
    gp = sol.problem
    rng = np.random.default_rng(seed)
    res = CheckResult("d. v-GNE multiplier consensus", True)
    if sol.selection != "vgne":
        res.note = "not a v-GNE solution"
        return res
    for k, er in enumerate(sol.regions):
        for j, sub in enumerate(er.subregions):
            for p in _interior_samples(sub.region, n_samples, rng):
                mult = coupling_multipliers(gp, p, sub.law(p))
                if mult is None:
                    res.failures.append({"region": f"{k}.{j}", "p": p.tolist(), "error": "infeasible"})
                    res.worst = np.inf
                    continue
                spread = max((max(v) - min(v) for v in mult.values()), default=0.0)
                res.checked += 1
                res.worst = max(res.worst, spread)
                if spread > tol:
                    res.failures.append({"region": f"{k}.{j}", "p": p.tolist(), "spread": spread})
    if res.checked == 0:
        res.note = "no v-GNE subregions"
    res.passed = not res.failures
    return res


# ---------------------------------------------------------------------------
# (e)


def check_svd(sol: ExplicitGNESolution, tol=SVD_TOL):
    res = CheckResult("e. SVD reconstruction and solvability", True)
    for k, er in enumerate(sol.regions):
        if er.kind != INFINITE:
            continue
        scale = max(1.0, np.abs(er.M_x).max())
        rec = er.U1 @ np.diag(er.sigma1) @ er.V1.T
        errs = {"reconstruction": np.abs(rec - er.M_x).max() / scale}
        rhs = np.hstack([er.M_p, er.M_1[:, None]])
        errs["U2'[M_p M_1]"] = np.abs(er.U2.T @ rhs).max(initial=0.0) / max(1.0, np.abs(rhs).max())
        V = np.hstack([er.V1, er.V2])
        U = np.hstack([er.U1, er.U2])
        errs["orthogonality"] = max(np.abs(V.T @ V - np.eye(V.shape[1])).max(),
                                    np.abs(U.T @ U - np.eye(U.shape[1])).max())
        # the particular law solves the system for every p
        errs["particular law"] = np.abs(er.M_x @ np.hstack([er.law.G, er.law.g[:, None]]) - rhs).max() / scale
        errs["null space"] = np.abs(er.M_x @ er.V2).max(initial=0.0) / scale
        worst = max(errs.values())
        res.checked += 1
        res.worst = max(res.worst, worst)
        if worst > tol:
            res.failures.append({"region": k, **{n: float(v) for n, v in errs.items()}})
    if res.checked == 0:
        res.note = "no infinite regions"
    res.passed = not res.failures
    return res


# ---------------------------------------------------------------------------
# (f)


def combination_margins(comb, maps, gp: GNEProblem, tol_rank=1e-9):
    """Largest uniform slack of all agents' critical-region rows for a combination.

    Returns ``(interior, closure)``: ``interior`` is the best margin ``s``
    with which every region row can hold strictly (capped at 1; rows that
    vanish after substituting the equilibrium law keep their constant slack),
    ``closure`` whether the closed system has any solution.
    """
    M_x, M_p, M_1, (Gx, Gp, g) = assemble_linear_system(comb, maps, gp)
    U1, U2, V1, V2, s1 = svd_blocks(M_x, tol_rank)
    rhs = np.hstack([M_p, M_1[:, None]])
    if U2.size and np.abs(U2.T @ rhs).max() > tol_rank * max(1.0, np.abs(rhs).max()):
        return -np.inf, False
    W = V1 @ np.diag(1.0 / s1) @ U1.T
    T, t = W @ M_p, W @ M_1
    ny = V2.shape[1]
    R = np.vstack([np.hstack([Gx @ T + Gp, Gx @ V2]),
                   np.hstack([gp.p_box.C, np.zeros((gp.p_box.n_rows, ny))])])
    d = np.concatenate([g - Gx @ t, gp.p_box.d])
    norms = np.linalg.norm(R, axis=1)
    scale = np.where(norms > 1e-12, norms, 1.0)
    R, d = R / scale[:, None], d / scale
    nz = R.shape[1]
    C = np.vstack([np.hstack([R, np.ones((R.shape[0], 1))]), np.eye(1, nz + 1, nz)])
    w = np.eye(1, nz + 1, nz).ravel()
    lp = qp_core.maximize(w, C, np.append(d, 1.0))
    interior = float(lp.fun) if lp.status == qp_core.OPTIMAL else -np.inf
    closure = qp_core.is_feasible(R, d + 1e-9)
    return interior, closure


def check_invalid_combinations(sol: ExplicitGNESolution, maps=None, limit=500, tol=INTERIOR_TOL):
    """Combinations rejected by the shared-row rule admit no interior point.

    A rejected combination has a shared row active for one agent and
    inactive for another; holding the row strictly slack in the second
    agent's region while it is tight for the first is contradictory, so the
    assembled system must have no point with positive margin.  The closed
    system may still be feasible: its points lie on region boundaries.
    """
    gp = sol.problem
    maps = maps or best_responses(gp)
    groups = coupling_groups(gp)
    res = CheckResult("f. rejected combinations have empty interior", True)
    n_closure = 0
    for comb in enumerate_combinations(maps, gp, include_invalid=True):
        if is_valid(comb.active_sets, gp, groups):
            continue
        if res.checked >= limit:
            res.note = f"stopped after {limit} combinations"
            break
        interior, closure = combination_margins(comb, maps, gp)
        n_closure += bool(closure)
        res.checked += 1
        res.worst = max(res.worst, interior)
        if interior > tol:
            res.failures.append({"combination": list(comb.region_indices), "margin": interior})
    extra = f"{n_closure} with nonempty closure"
    res.note = f"{res.note}; {extra}" if res.note else extra
    res.passed = not res.failures
    return res


# ---------------------------------------------------------------------------


def run_all(sol: ExplicitGNESolution, n_samples=50, seed=0, maps=None, law_samples=200,
            invalid_limit=500):
    """All suites; returns ``(all_passed, [CheckResult], seconds)``."""
    t0 = time.perf_counter()
    gp = sol.problem
    maps = maps or best_responses(gp)
    results = [
        check_agent_laws(gp, maps, law_samples, seed),
        check_residuals(sol, n_samples, seed),
        check_min_norm(sol, seed=seed),
        check_consensus(sol, n_samples, seed),
        check_svd(sol),
        check_invalid_combinations(sol, maps, invalid_limit),
    ]
    return all(r.passed for r in results), results, time.perf_counter() - t0


__all__ = ["CheckResult", "check_agent_laws", "check_residuals", "check_min_norm",
           "check_consensus", "check_svd", "check_invalid_combinations", "combination_margins",
           "coupling_multipliers", "run_all"]
