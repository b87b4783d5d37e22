"""Explicit multiparametric QP by active-set enumeration.

Problem::

    min_x  1/2 x'Qx + (c + F theta)'x   s.t.  A x <= b + B theta,  theta in box

Candidate active sets are enumerated by size, in lexicographic order.  A set
is discarded together with all its supersets when its rows are linearly
dependent or when fixing it active leaves no primal-feasible point.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import polyhedra
from .polyhedra import Polyhedron, chebyshev

log = logging.getLogger(__name__)

ACTIVE_SET_BUDGET = 2 ** 18
LICQ_TOL = 1e-10
COND_LIMIT = 1e12
COVERAGE_TOL = 1e-7


class MpqpError(RuntimeError):
    pass


class CoverageError(MpqpError):
    def __init__(self, message, points):
        super().__init__(message)
        self.points = points


@dataclass(frozen=True, eq=False)
class AffineFunction:
    """``theta -> G theta + g``."""

    G: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        g = np.asarray(self.g, dtype=float).reshape(-1)
        if G.shape[0] != g.size:
            raise ValueError(f"G has {G.shape[0]} rows, g has {g.size}")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)

    def __call__(self, theta):
        return self.G @ np.asarray(theta, dtype=float) + self.g

    @property
    def n_out(self):
        return self.g.size

    def to_dict(self):
        return {"G": self.G, "g": self.g}

    @classmethod
    def from_dict(cls, data):
        g = np.asarray(data["g"], dtype=float)
        G = np.asarray(data["G"], dtype=float).reshape(g.size, -1)
        return cls(G, g)


@dataclass
class MpqpProblem:
    Q: np.ndarray
    c: np.ndarray
    F: np.ndarray
    A: np.ndarray
    b: np.ndarray
    B: np.ndarray
    theta_box: Polyhedron

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = self.Q.shape[0]
        ntheta = self.theta_box.dim
        self.c = np.asarray(self.c, dtype=float).reshape(n)
        self.F = np.asarray(self.F, dtype=float).reshape(n, ntheta)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        nA = self.A.shape[0]
        self.b = np.asarray(self.b, dtype=float).reshape(nA)
        self.B = np.asarray(self.B, dtype=float).reshape(nA, ntheta)
        if not np.allclose(self.Q, self.Q.T, atol=1e-10, rtol=0):
            raise ValueError("Q must be symmetric")
        try:
            self._cho = cho_factor(self.Q)
        except np.linalg.LinAlgError as exc:
            raise ValueError("Q must be positive definite") from exc

    @property
    def n(self):
        return self.Q.shape[0]

    @property
    def n_theta(self):
        return self.theta_box.dim

    @property
    def n_constraints(self):
        return self.A.shape[0]

    def qinv(self, X):
        return cho_solve(self._cho, X)


@dataclass
class CriticalRegionAgent:
    active_set: tuple
    primal: AffineFunction
    dual: AffineFunction
    region: Polyhedron
    center: np.ndarray
    radius: float

    def to_dict(self):
        return {
            "active_set": list(self.active_set),
            "primal": self.primal.to_dict(),
            "dual": self.dual.to_dict(),
            "region": self.region.to_dict(),
        }


@dataclass
class BestResponseMap:
    agent_id: int
    regions: list
    theta_box: Polyhedron
    diagnostics: dict = field(default_factory=dict)

    def locate(self, theta, tol=COVERAGE_TOL):
        theta = np.asarray(theta, dtype=float)
        return [k for k, r in enumerate(self.regions) if polyhedra.contains(r.region, theta, tol)]

    def evaluate(self, theta, tol=COVERAGE_TOL):
        hits = self.locate(theta, tol)
        if not hits:
            raise MpqpError(f"theta={theta} is not covered by any region")
        return self.regions[hits[0]].primal(theta)

    def to_dict(self):
        return {"agent": self.agent_id, "regions": [r.to_dict() for r in self.regions]}


def _licq(A_S):
    if A_S.shape[0] == 0:
        return True
    if A_S.shape[0] > A_S.shape[1]:
        return False
    s = np.linalg.svd(A_S, compute_uv=False)
    return s[-1] > LICQ_TOL * max(1.0, s[0])


def kkt_laws(p: MpqpProblem, aset):
    """Affine primal and multiplier laws for a fixed active set, or ``None``."""
    aset = tuple(aset)
    n, nA, nt = p.n, p.n_constraints, p.n_theta
    if not aset:
        H = -p.qinv(p.F)
        h = -p.qinv(p.c)
        return AffineFunction(H, h), AffineFunction(np.zeros((nA, nt)), np.zeros(nA))
    idx = list(aset)
    AS = p.A[idx]
    QiAt = p.qinv(AS.T)
    M = AS @ QiAt
    if np.linalg.cond(M) > COND_LIMIT:
        return None
    QiF = p.qinv(p.F)
    Qic = p.qinv(p.c)
    Lt = -np.linalg.solve(M, p.B[idx] + AS @ QiF)
    L1 = -np.linalg.solve(M, p.b[idx] + AS @ Qic)
    H = -(QiF + QiAt @ Lt)
    h = -(Qic + QiAt @ L1)
    Lam = np.zeros((nA, nt))
    lam1 = np.zeros(nA)
    Lam[idx] = Lt
    lam1[idx] = L1
    return AffineFunction(H, h), AffineFunction(Lam, lam1)


def _region_rows(p, aset, primal, dual):
    nA = p.n_constraints
    act = list(aset)
    inact = [j for j in range(nA) if j not in aset]
    rows = [-dual.G[act], p.A[inact] @ primal.G - p.B[inact], p.theta_box.C]
    rhs = [dual.g[act], p.b[inact] - p.A[inact] @ primal.g, p.theta_box.d]
    return np.vstack(rows), np.concatenate(rhs)


def active_set_region(p: MpqpProblem, aset, eps=polyhedra.FULL_DIM_EPS, backend=None):
    """Critical region of one active set, or ``None`` if degenerate/lower-dimensional."""
    aset = tuple(sorted(aset))
    if not _licq(p.A[list(aset)]):
        return None
    laws = kkt_laws(p, aset)
    if laws is None:
        return None
    primal, dual = laws
    C, d = _region_rows(p, aset, primal, dual)
    region = Polyhedron(C, d, p.theta_box.var_labels)
    cheb = chebyshev(region, backend)
    if cheb.radius <= eps:
        return None
    return CriticalRegionAgent(aset, primal, dual, region, cheb.center, cheb.radius)


def _primal_feasible(p, aset, backend):
    """Is ``A_S x = b_S + B_S theta, A x <= b + B theta, theta in box`` solvable?"""
    n, nt = p.n, p.n_theta
    idx = list(aset)
    G = np.hstack([p.A, -p.B])
    rows = [G, G[idx] * -1.0, np.hstack([np.zeros((p.theta_box.n_rows, n)), p.theta_box.C])]
    rhs = [p.b, -p.b[idx], p.theta_box.d]
    from . import qp_core
    return qp_core.is_feasible(np.vstack(rows), np.concatenate(rhs), backend)


def solve_mpqp(p: MpqpProblem, max_size=None, budget=ACTIVE_SET_BUDGET,
               eps=polyhedra.FULL_DIM_EPS, coverage_samples=500, seed=0,
               check_coverage=True, agent_id=0, backend=None) -> BestResponseMap:
    """Enumerate all full-dimensional critical regions over ``p.theta_box``."""
    n, nA = p.n, p.n_constraints
    row_norm = np.linalg.norm(p.A, axis=1) if nA else np.zeros(0)
    usable = [j for j in range(nA) if row_norm[j] > 1e-12]
    if max_size is None:
        max_size = min(n, len(usable))
    regions = []
    stats = {"candidates": 0, "licq_skipped": 0, "infeasible_pruned": 0,
             "lower_dimensional": 0}
    alive = {()}
    frontier = [()]
    for size in range(max_size + 1):
        if size > 0:
            frontier = []
            for S in sorted(alive):
                start = usable.index(S[-1]) + 1 if S else 0
                for j in usable[start:]:
                    T = S + (j,)
                    if all(T[:k] + T[k + 1:] in alive for k in range(len(T))):
                        frontier.append(T)
            alive = set()
        for S in frontier:
            stats["candidates"] += 1
            if stats["candidates"] > budget:
                raise MpqpError(f"active-set budget of {budget} candidates exceeded")
            if not _licq(p.A[list(S)]):
                stats["licq_skipped"] += 1
                continue
            laws = kkt_laws(p, S)
            if laws is None:
                stats["licq_skipped"] += 1
                continue
            primal, dual = laws
            C, d = _region_rows(p, S, primal, dual)
            region = Polyhedron(C, d, p.theta_box.var_labels)
            cheb = chebyshev(region, backend)
            if cheb.radius > eps:
                regions.append(CriticalRegionAgent(S, primal, dual, region, cheb.center, cheb.radius))
                alive.add(S)
            elif cheb.radius >= 0 or _primal_feasible(p, S, backend):
                stats["lower_dimensional"] += 1
                alive.add(S)
            else:
                stats["infeasible_pruned"] += 1
        if not alive:
            break
    regions = _dedupe_regions(regions, backend)
    br = BestResponseMap(agent_id, regions, p.theta_box, stats)
    if check_coverage:
        check_map_coverage(br, p, coverage_samples, seed, backend=backend)
    return br


def _dedupe_regions(regions, backend):
    out = []
    for r in regions:
        dup = False
        for q in out:
            if (np.allclose(r.primal.G, q.primal.G, atol=1e-9) and np.allclose(r.primal.g, q.primal.g, atol=1e-9)
                    and polyhedra.contains(q.region, r.center, 1e-9) and polyhedra.contains(r.region, q.center, 1e-9)):
                a = polyhedra.remove_redundant(r.region, backend=backend)
                b = polyhedra.remove_redundant(q.region, backend=backend)
                if a.n_rows == b.n_rows and np.allclose(np.sort(np.c_[a.C, a.d], axis=0), np.sort(np.c_[b.C, b.d], axis=0), atol=1e-9):
                    dup = True
                    break
        if not dup:
            out.append(r)
    return out


def uncovered_points(br: BestResponseMap, problem: MpqpProblem = None, n_samples=500, seed=0,
                     tol=COVERAGE_TOL, backend=None):
    """Sampled parameters of the box lying in no region.

    With ``problem`` given, parameters at which the QP itself is infeasible
    are not reported.
    """
    rng = np.random.default_rng(seed)
    pts = polyhedra.sample_uniform(br.theta_box, n_samples, rng)
    covered = np.zeros(len(pts), dtype=bool)
    for r in br.regions:
        covered |= np.all(pts @ r.region.C.T <= r.region.d + tol, axis=1)
    missing = pts[~covered]
    if problem is not None and len(missing):
        from . import qp_core
        keep = [qp_core.is_feasible(problem.A, problem.b + problem.B @ th, backend) for th in missing]
        missing = missing[np.asarray(keep, dtype=bool)]
    return missing


def check_map_coverage(br: BestResponseMap, problem: MpqpProblem = None, n_samples=500, seed=0,
                       tol=COVERAGE_TOL, backend=None):
    missing = uncovered_points(br, problem, n_samples, seed, tol, backend)
    if len(missing):
        raise CoverageError(
            f"agent {br.agent_id}: {len(missing)} of {n_samples} sampled parameters are in no "
            f"critical region, e.g. {missing[:3].tolist()}", missing)
