"""Explicit solution of multiparametric generalized Nash equilibrium problems.

Each agent ``i`` solves::

    min_{x_i}  1/2 x'Q_i x + (c_i + F_i p)'x   s.t.  A x <= b + S p

The agents' best responses are computed as explicit mpQP maps over
``(x_{-i}, p)``.  Every valid combination of one critical region per agent
yields a parametric linear system ``M_x x = M_p p + M_1``; a full-rank
``M_x`` gives a unique affine equilibrium, a rank-deficient one an affine
family ``x = T p + t + V2 y2`` over a polyhedron in ``(p, y2)``.  Families
may be reduced to single-valued laws by a selection mpQP (minimum norm,
welfare, or multiplier consensus).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import hashlib
import json
import logging
import os
import warnings

import numpy as np

from . import polyhedra
from .mpqp import (AffineFunction, BestResponseMap, MpqpError, MpqpProblem,
                   solve_mpqp)
from .polyhedra import Polyhedron, chebyshev

log = logging.getLogger(__name__)

SELECTIONS = ("none", "min_norm", "welfare", "vgne")
SHARED_ROW_TOL = 1e-12
UNIQUE = "unique"
INFINITE = "infinite"


class GNEProblemError(ValueError):
    pass


class WelfareError(ValueError):
    pass


@dataclass
class GNEProblem:
    """Quadratic GNEP with agent blocks of sizes ``sizes`` (in order)."""

    sizes: list
    Q: list
    c: list
    F: list
    A: np.ndarray
    b: np.ndarray
    S: np.ndarray
    p_box: Polyhedron
    x_min: np.ndarray
    x_max: np.ndarray
    param_labels: tuple = ()
    name: str = "gnep"
    coupling_rows: tuple = ()

    def __post_init__(self):
        self.sizes = [int(s) for s in self.sizes]
        if not self.sizes or min(self.sizes) < 1:
            raise GNEProblemError("need at least one agent with a positive block size")
        nx = sum(self.sizes)
        npar = self.p_box.dim
        N = len(self.sizes)
        for name in ("Q", "c", "F"):
            if len(getattr(self, name)) != N:
                raise GNEProblemError(f"{name} must have one entry per agent ({N})")
        self.Q = [np.asarray(q, dtype=float).reshape(nx, nx) for q in self.Q]
        self.Q = [0.5 * (q + q.T) for q in self.Q]
        self.c = [np.asarray(v, dtype=float).reshape(nx) for v in self.c]
        self.F = [np.asarray(f, dtype=float).reshape(nx, npar) for f in self.F]
        self.A = np.asarray(self.A, dtype=float).reshape(-1, nx)
        nA = self.A.shape[0]
        self.b = np.asarray(self.b, dtype=float).reshape(nA)
        self.S = np.asarray(self.S, dtype=float).reshape(nA, npar)
        self.x_min = np.asarray(self.x_min, dtype=float).reshape(nx)
        self.x_max = np.asarray(self.x_max, dtype=float).reshape(nx)
        if np.any(self.x_min >= self.x_max):
            raise GNEProblemError("x_min must be strictly below x_max")
        if not self.param_labels:
            self.param_labels = tuple(self.p_box.var_labels)
        self.param_labels = tuple(self.param_labels)
        for i in range(N):
            I = self.block(i)
            Qii = self.Q[i][np.ix_(I, I)]
            if np.linalg.eigvalsh(Qii).min() <= 1e-12 * max(1.0, np.abs(Qii).max()):
                raise GNEProblemError(f"agent {i}: own-block Hessian Q_ii is not positive definite")
            if np.linalg.eigvalsh(self.Q[i]).min() < -1e-12:
                warnings.warn(f"agent {i}: full Q_i is indefinite (only Q_ii must be positive definite)",
                              stacklevel=2)

    @property
    def N(self):
        return len(self.sizes)

    @property
    def n_x(self):
        return sum(self.sizes)

    @property
    def n_p(self):
        return self.p_box.dim

    @property
    def n_A(self):
        return self.A.shape[0]

    def block(self, i):
        start = sum(self.sizes[:i])
        return np.arange(start, start + self.sizes[i])

    def others(self, i):
        I = set(self.block(i).tolist())
        return np.array([k for k in range(self.n_x) if k not in I], dtype=int)

    @property
    def x_box(self):
        return Polyhedron.box(self.x_min, self.x_max, [f"x{k}" for k in range(self.n_x)])

    def agents_in_row(self, r):
        return tuple(i for i in range(self.N) if np.abs(self.A[r, self.block(i)]).max() > SHARED_ROW_TOL)

    def shared_rows(self):
        return [r for r in range(self.n_A) if len(self.agents_in_row(r)) >= 2]

    def agent_cost(self, i, x, p):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q[i] @ x + (self.c[i] + self.F[i] @ p) @ x)

    def problem_hash(self):
        h = hashlib.sha256()
        h.update(json.dumps({"sizes": self.sizes}).encode())
        for arr in [*self.Q, *self.c, *self.F, self.A, self.b, self.S, self.p_box.C,
                    self.p_box.d, self.x_min, self.x_max]:
            # + 0.0 maps -0.0 to 0.0 so serialized copies hash identically
            h.update((np.ascontiguousarray(arr, dtype=float) + 0.0).tobytes())
        return h.hexdigest()

    def agent_mpqp(self, i):
        """Reduced mpQP of agent ``i`` with parameter ``theta = (x_{-i}, p)``."""
        I, O = self.block(i), self.others(i)
        Qi = self.Q[i]
        Fbar = np.hstack([Qi[np.ix_(I, O)], self.F[i][I]])
        Bbar = np.hstack([-self.A[:, O], self.S])
        labels = [f"x{k}" for k in O] + list(self.param_labels)
        box = Polyhedron(
            _blkdiag(Polyhedron.box(self.x_min[O], self.x_max[O]).C, self.p_box.C) if O.size else self.p_box.C,
            np.concatenate([Polyhedron.box(self.x_min[O], self.x_max[O]).d, self.p_box.d]) if O.size else self.p_box.d,
            labels)
        return MpqpProblem(Qi[np.ix_(I, I)], self.c[i][I], Fbar, self.A[:, I], self.b, Bbar, box)

    def check_consistency(self):
        """Dimension cross-checks beyond construction; raises on mismatch."""
        if self.S.shape[0] != self.n_A:
            raise GNEProblemError("A, b, S row counts differ")


def _blkdiag(A, B):
    out = np.zeros((A.shape[0] + B.shape[0], A.shape[1] + B.shape[1]))
    out[:A.shape[0], :A.shape[1]] = A
    out[A.shape[0]:, A.shape[1]:] = B
    return out


@dataclass(frozen=True)
class Combination:
    region_indices: tuple
    active_sets: tuple

    def active_in(self, agent, row):
        return row in self.active_sets[agent]


@dataclass(frozen=True)
class CouplingGroup:
    constraint_row: int
    agents: tuple

    @property
    def reference_agent(self):
        return min(self.agents)


@dataclass
class Subregion:
    region: Polyhedron
    law: AffineFunction
    y2_law: AffineFunction
    active_set: tuple
    label: str

    def to_dict(self):
        return {"label": self.label, "active_set": list(self.active_set),
                "region": self.region.to_dict(), "law": self.law.to_dict(),
                "y2_law": self.y2_law.to_dict()}


@dataclass
class EquilibriumRegion:
    kind: str
    combination: Combination
    M_x: np.ndarray
    M_p: np.ndarray
    M_1: np.ndarray
    law: AffineFunction          # unique law, or the particular part of the family
    region: Polyhedron           # over p; None when only the lifted set is kept
    lifted: Polyhedron = None    # over (p, y2)
    U1: np.ndarray = None
    U2: np.ndarray = None
    V1: np.ndarray = None
    V2: np.ndarray = None
    sigma1: np.ndarray = None
    subregions: list = field(default_factory=list)
    residual_subregions: list = field(default_factory=list)
    radius: float = 0.0

    @property
    def y2_dim(self):
        return 0 if self.V2 is None else self.V2.shape[1]

    def x_of(self, p, y2=None):
        x = self.law(p)
        if self.kind == INFINITE:
            y2 = np.zeros(self.y2_dim) if y2 is None else np.asarray(y2, dtype=float)
            x = x + self.V2 @ y2
        return x


@dataclass
class SolveOptions:
    tol_rank: float = 1e-9
    eps_region: float = polyhedra.FULL_DIM_EPS
    budget: int = 2 ** 18
    threads: int = 0
    project_max_y2: int = 8
    fm_row_cap: int = polyhedra.FM_ROW_CAP
    coverage_samples: int = 500
    welfare: tuple = None        # optional (Q_f, c_f, F_f)
    regularization: float = 1e-9
    backend: str = None
    # drop combinations whose shared rows are active for some agents only;
    # off, every combination is assembled and judged by its region alone
    shared_row_filter: bool = True

    def n_threads(self):
        if self.threads and self.threads > 0:
            return self.threads
        return int(os.environ.get("MPGNE_THREADS", "1") or 1)


@dataclass
class ExplicitGNESolution:
    problem: GNEProblem
    regions: list
    selection: str
    problem_hash: str
    diagnostics: dict
    agent_maps: list = None


# ---------------------------------------------------------------------------
# step 1


def best_responses(gp: GNEProblem, opts: SolveOptions = None):
    opts = opts or SolveOptions()
    maps = []
    for i in range(gp.N):
        mp = gp.agent_mpqp(i)
        maps.append(solve_mpqp(mp, budget=opts.budget, eps=opts.eps_region,
                               coverage_samples=opts.coverage_samples, seed=i,
                               agent_id=i, backend=opts.backend))
    return maps


# ---------------------------------------------------------------------------
# step 2: combinations


def coupling_groups(gp: GNEProblem):
    return [CouplingGroup(r, gp.agents_in_row(r)) for r in gp.shared_rows()]


def is_valid(active_sets, gp: GNEProblem, groups=None):
    """Shared rows must be active for all involved agents or for none."""
    groups = coupling_groups(gp) if groups is None else groups
    for g in groups:
        flags = {g.constraint_row in active_sets[i] for i in g.agents}
        if len(flags) > 1:
            return False
    return True


def enumerate_combinations(maps, gp: GNEProblem, include_invalid=False):
    """Yield valid :class:`Combination` objects in lexicographic order."""
    groups = coupling_groups(gp)
    # signature of agent i's region restricted to rows shared with earlier agents
    def sig(i, aset, earlier):
        return tuple(g.constraint_row in aset for g in groups
                     if i in g.agents and any(a < i for a in g.agents))

    N = len(maps)

    def rec(i, chosen):
        if i == N:
            sets = tuple(maps[k].regions[j].active_set for k, j in enumerate(chosen))
            yield Combination(tuple(chosen), sets)
            return
        for j, reg in enumerate(maps[i].regions):
            if not include_invalid:
                ok = True
                for g in groups:
                    if i not in g.agents:
                        continue
                    prev = [a for a in g.agents if a < i]
                    if not prev:
                        continue
                    mine = g.constraint_row in reg.active_set
                    theirs = g.constraint_row in maps[prev[0]].regions[chosen[prev[0]]].active_set
                    if mine != theirs:
                        ok = False
                        break
                if not ok:
                    continue
            yield from rec(i + 1, chosen + [j])

    yield from rec(0, [])


def assemble_linear_system(comb: Combination, maps, gp: GNEProblem):
    """Return ``(M_x, M_p, M_1, (G_x, G_p, g))`` for a combination.

    ``G_x x + G_p p <= g`` stacks every agent's critical-region inequalities
    lifted to the common ``(x, p)`` space.
    """
    nx, npar = gp.n_x, gp.n_p
    M_x = np.zeros((nx, nx))
    M_p = np.zeros((nx, npar))
    M_1 = np.zeros(nx)
    Gx, Gp, g = [], [], []
    for i, j in enumerate(comb.region_indices):
        reg = maps[i].regions[j]
        I, O = gp.block(i), gp.others(i)
        H = reg.primal.G
        M_x[np.ix_(I, I)] = np.eye(I.size)
        M_x[np.ix_(I, O)] = -H[:, :O.size]
        M_p[I] = H[:, O.size:]
        M_1[I] = reg.primal.g
        R = reg.region.C
        rows_x = np.zeros((R.shape[0], nx))
        rows_x[:, O] = R[:, :O.size]
        Gx.append(rows_x)
        Gp.append(R[:, O.size:])
        g.append(reg.region.d)
    return M_x, M_p, M_1, (np.vstack(Gx), np.vstack(Gp), np.concatenate(g))


def _p_region(ineqs, T, t, gp):
    Gx, Gp, g = ineqs
    C = np.vstack([Gx @ T + Gp, gp.p_box.C])
    d = np.concatenate([g - Gx @ t, gp.p_box.d])
    return Polyhedron(C, d, gp.param_labels)


def numerical_rank(M_x, tol_rank=1e-9):
    s = np.linalg.svd(M_x, compute_uv=False)
    return int(np.sum(s > tol_rank * max(s[0] if s.size else 0.0, 1.0)))


def solve_unique(M_x, M_p, M_1, ineqs, gp, comb=None, opts=None):
    opts = opts or SolveOptions()
    try:
        sol = np.linalg.solve(M_x, np.hstack([M_p, M_1[:, None]]))
    except np.linalg.LinAlgError:
        return None
    T, t = sol[:, :-1], sol[:, -1]
    region = _p_region(ineqs, T, t, gp)
    cheb = chebyshev(region, opts.backend)
    if cheb.radius <= opts.eps_region:
        return None
    region = polyhedra.remove_redundant(region, backend=opts.backend)
    return EquilibriumRegion(UNIQUE, comb, M_x, M_p, M_1, AffineFunction(T, t), region,
                             radius=cheb.radius)


def _sign_fix(M):
    """Flip columns so each one's largest-magnitude entry is positive (ties: last)."""
    M = M.copy()
    for k in range(M.shape[1]):
        col = M[:, k]
        mx = np.abs(col).max(initial=0.0)
        if mx == 0:
            continue
        j = np.flatnonzero(np.abs(col) >= mx * (1 - 1e-9))[-1]
        if col[j] < 0:
            M[:, k] = -col
    return M


def svd_blocks(M_x, tol_rank=1e-9):
    """``(U1, U2, V1, V2, sigma1)`` with the sign convention of :func:`_sign_fix`."""
    U, s, Vt = np.linalg.svd(M_x)
    V = Vt.T
    nM = int(np.sum(s > tol_rank * max(s[0] if s.size else 0.0, 1.0)))
    U1, V1 = U[:, :nM].copy(), V[:, :nM].copy()
    for k in range(nM):
        col = U1[:, k]
        mx = np.abs(col).max()
        j = np.flatnonzero(np.abs(col) >= mx * (1 - 1e-9))[-1]
        if col[j] < 0:
            U1[:, k] *= -1
            V1[:, k] *= -1
    U2 = _sign_fix(U[:, nM:])
    V2 = _sign_fix(V[:, nM:])
    return U1, U2, V1, V2, s[:nM]


def solve_degenerate(M_x, M_p, M_1, ineqs, gp, comb=None, opts=None):
    opts = opts or SolveOptions()
    U1, U2, V1, V2, s1 = svd_blocks(M_x, opts.tol_rank)
    scale = max(1.0, s1[0] if s1.size else 0.0, np.abs(M_p).max(initial=0.0), np.abs(M_1).max(initial=0.0))
    tol = opts.tol_rank * scale
    if U2.size and (np.abs(U2.T @ M_p).max(initial=0.0) > tol or np.abs(U2.T @ M_1).max(initial=0.0) > tol):
        return None
    W = V1 @ np.diag(1.0 / s1) @ U1.T if s1.size else np.zeros((gp.n_x, gp.n_x))
    T, t = W @ M_p, W @ M_1
    Gx, Gp, g = ineqs
    ny = V2.shape[1]
    labels = list(gp.param_labels) + [f"y2_{k}" for k in range(ny)]
    lifted = Polyhedron(
        np.vstack([np.hstack([Gx @ T + Gp, Gx @ V2]),
                   np.hstack([gp.p_box.C, np.zeros((gp.p_box.n_rows, ny))])]),
        np.concatenate([g - Gx @ t, gp.p_box.d]), labels)
    cheb = chebyshev(lifted, opts.backend)
    if cheb.radius <= opts.eps_region:
        return None
    lifted = polyhedra.remove_redundant(lifted, backend=opts.backend)
    region = None
    if ny <= opts.project_max_y2:
        try:
            region = polyhedra.eliminate(lifted, range(gp.n_p, gp.n_p + ny), opts.fm_row_cap,
                                         backend=opts.backend)
        except polyhedra.EliminationBlowup:
            region = None
    return EquilibriumRegion(INFINITE, comb, M_x, M_p, M_1, AffineFunction(T, t), region,
                             lifted=lifted, U1=U1, U2=U2, V1=V1, V2=V2, sigma1=s1,
                             radius=cheb.radius)


# ---------------------------------------------------------------------------
# selection among infinitely many equilibria


def _selection_problem(er: EquilibriumRegion, gp, Qy, cy, Fy):
    npar, ny = gp.n_p, er.y2_dim
    L = er.lifted
    A = L.C[:, npar:]
    B = -L.C[:, :npar]
    return MpqpProblem(Qy, cy, Fy, A, L.d, B, gp.p_box)


def _run_selection(er, gp, Qy, cy, Fy, label, opts):
    mp = _selection_problem(er, gp, Qy, cy, Fy)
    br = solve_mpqp(mp, budget=opts.budget, eps=opts.eps_region, check_coverage=False,
                    backend=opts.backend)
    subs = []
    for reg in br.regions:
        y2law = reg.primal
        G = er.law.G + er.V2 @ y2law.G
        gv = er.law.g + er.V2 @ y2law.g
        region = polyhedra.remove_redundant(reg.region, backend=opts.backend)
        subs.append(Subregion(region, AffineFunction(G, gv), y2law, reg.active_set, label))
    return subs, br


def _regularized(Qy, reg):
    Qy = 0.5 * (Qy + Qy.T)
    ev = np.linalg.eigvalsh(Qy)
    scale = max(1.0, np.abs(ev).max(initial=0.0))
    if ev.min(initial=1.0) <= 1e-9 * scale:
        Qy = Qy + reg * scale * np.eye(Qy.shape[0])
    return Qy


def select_min_norm(er: EquilibriumRegion, gp, opts=None):
    opts = opts or SolveOptions()
    ny = er.y2_dim
    subs, _ = _run_selection(er, gp, 2.0 * np.eye(ny), np.zeros(ny), np.zeros((ny, gp.n_p)),
                             "min_norm", opts)
    return subs


def welfare_terms(gp, welfare=None):
    """``(Q_f, c_f, F_f)`` of the welfare objective; default is the agents' cost sum."""
    if welfare is not None:
        Qf, cf, Ff = welfare
        return (np.asarray(Qf, dtype=float), np.asarray(cf, dtype=float),
                np.asarray(Ff, dtype=float).reshape(gp.n_x, gp.n_p))
    return sum(gp.Q), sum(gp.c), sum(gp.F)


def select_welfare(er: EquilibriumRegion, gp, welfare=None, opts=None):
    opts = opts or SolveOptions()
    Qf, cf, Ff = welfare_terms(gp, welfare if welfare is not None else opts.welfare)
    V2 = er.V2
    Qy = V2.T @ Qf @ V2
    ev = np.linalg.eigvalsh(0.5 * (Qy + Qy.T))
    if ev.min() < -1e-9 * max(1.0, np.abs(ev).max()):
        raise WelfareError("welfare objective is indefinite on the equilibrium family; "
                           "use min-norm selection or supply a convex welfare function")
    T, t = er.law.G, er.law.g
    cy = V2.T @ (Qf @ t + cf)
    Fy = V2.T @ (Qf @ T + Ff)
    subs, _ = _run_selection(er, gp, _regularized(Qy, opts.regularization), cy, Fy, "welfare", opts)
    return subs


def consensus_system(er: EquilibriumRegion, gp, groups, maps):
    """Rows of ``L y2 + M p + m`` whose zeros equalise coupling multipliers."""
    comb = er.combination
    T, t, V2 = er.law.G, er.law.g, er.V2
    L, M, m = [], [], []

    def lam_terms(i, row):
        reg = maps[i].regions[comb.region_indices[i]]
        O = gp.others(i)
        Lx = reg.dual.G[row, :O.size]
        Lp = reg.dual.G[row, O.size:]
        return Lx @ V2[O], Lx @ T[O] + Lp, Lx @ t[O] + reg.dual.g[row]

    for g in groups:
        i1 = g.reference_agent
        if not comb.active_in(i1, g.constraint_row):
            continue
        a1, b1, c1 = lam_terms(i1, g.constraint_row)
        for i in g.agents:
            if i == i1:
                continue
            a, bb, cc = lam_terms(i, g.constraint_row)
            L.append(a - a1)
            M.append(bb - b1)
            m.append(cc - c1)
    ny = er.y2_dim
    if not L:
        return np.zeros((0, ny)), np.zeros((0, gp.n_p)), np.zeros(0)
    return np.array(L), np.array(M), np.array(m)


def select_vgne(er: EquilibriumRegion, gp, groups, maps, opts=None, n_checks=10):
    """Return ``(v_subregion or None, residual_subregions)``."""
    opts = opts or SolveOptions()
    L, M, m = consensus_system(er, gp, groups, maps)
    ny = er.y2_dim
    if L.shape[0] == 0:
        return None, []
    Qy = _regularized(2.0 * L.T @ L, opts.regularization)
    subs, _ = _run_selection(er, gp, Qy, 2.0 * L.T @ m, 2.0 * L.T @ M, "vgne", opts)
    rng = np.random.default_rng(0)
    vsub, residual = None, []
    scale = 1.0 + np.abs(np.hstack([L, M, m[:, None]])).max()
    for s in subs:
        ok = vsub is None and len(s.active_set) == 0
        if ok:
            pts = [chebyshev(s.region, opts.backend).center]
            pts.extend(polyhedra.sample_uniform(s.region, n_checks, rng))
            for p in pts:
                r = L @ s.y2_law(p) + M @ p + m
                if np.abs(r).max() > 1e-7 * scale:
                    ok = False
                    break
        if ok:
            vsub = s
        else:
            s.label = "non_variational"
            residual.append(s)
    return vsub, residual


# ---------------------------------------------------------------------------
# Algorithm driver


def _process(comb, maps, gp, opts, selection, groups):
    M_x, M_p, M_1, ineqs = assemble_linear_system(comb, maps, gp)
    rank = numerical_rank(M_x, opts.tol_rank)
    if rank == gp.n_x:
        er = solve_unique(M_x, M_p, M_1, ineqs, gp, comb, opts)
        return er, ("empty_unique" if er is None else "unique")
    er = solve_degenerate(M_x, M_p, M_1, ineqs, gp, comb, opts)
    if er is None:
        return None, "empty_or_lower_dim_infinite"
    if selection == "min_norm":
        er.subregions = select_min_norm(er, gp, opts)
    elif selection == "welfare":
        er.subregions = select_welfare(er, gp, opts=opts)
    elif selection == "vgne":
        vsub, residual = select_vgne(er, gp, groups, maps, opts)
        er.subregions = [vsub] if vsub is not None else []
        er.residual_subregions = residual
    return er, "infinite"


def region_counts(regions, selection):
    nu = sum(r.kind == UNIQUE for r in regions)
    ni = sum(r.kind == INFINITE for r in regions)
    nsub = sum(len(r.subregions) for r in regions if r.kind == INFINITE)
    counts = {"unique": nu, "infinite": None, "vgne": None, "min_norm": None, "welfare": None}
    if selection in ("none", "vgne"):
        counts["infinite"] = ni
    if selection == "vgne":
        counts["vgne"] = nsub
        total = nu + ni + nsub
    elif selection in ("min_norm", "welfare"):
        counts[selection] = nsub
        total = nu + nsub
    else:
        total = nu + ni
    counts["total"] = total
    return counts


def solve_gnep(gp: GNEProblem, selection="none", opts: SolveOptions = None, maps=None):
    """Explicit GNE solution over ``gp.p_box``."""
    if selection not in SELECTIONS:
        raise ValueError(f"selection must be one of {SELECTIONS}")
    opts = opts or SolveOptions()
    gp.check_consistency()
    if maps is None:
        maps = best_responses(gp, opts)
    groups = coupling_groups(gp)
    n_raw = int(np.prod([len(m.regions) for m in maps]))
    combos = list(enumerate_combinations(maps, gp, include_invalid=not opts.shared_row_filter))

    def work(comb):
        try:
            return _process(comb, maps, gp, opts, selection, groups)
        except (MpqpError, polyhedra.PolyhedronError, np.linalg.LinAlgError, RuntimeError) as exc:
            return None, f"failure: {type(exc).__name__}: {exc}"

    nthreads = opts.n_threads()
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            results = list(ex.map(work, combos))
    else:
        results = [work(c) for c in combos]

    regions, tally, failures = [], {}, []
    for comb, (er, tag) in zip(combos, results):
        key = "failure" if tag.startswith("failure") else tag
        tally[key] = tally.get(key, 0) + 1
        if key == "failure":
            failures.append({"combination": list(comb.region_indices), "error": tag[9:]})
        if er is not None:
            regions.append(er)
    if combos and len(failures) == len(combos):
        raise RuntimeError(f"all {len(combos)} combinations failed; first error: {failures[0]['error']}")
    diag = {
        "agent_regions": [len(m.regions) for m in maps],
        "combinations_raw": n_raw,
        "combinations_invalid": n_raw - len(combos),
        "combinations_examined": len(combos),
        "outcomes": dict(sorted(tally.items())),
        "failures": failures,
        "counts": region_counts(regions, selection),
    }
    return ExplicitGNESolution(gp, regions, selection, gp.problem_hash(), diag, maps)
