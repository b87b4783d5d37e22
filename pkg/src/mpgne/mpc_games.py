"""Linear-quadratic dynamic games, their condensation into GNEPs, and closed-loop simulation.

Decision vector ordering after condensation: agent blocks in order, each
block holding that agent's inputs ``u_{i,0}, ..., u_{i,K-1}`` (time-major).
The parameter vector is described by ``param_layout``, a list of
``(name, size)`` pairs.  Two names are special: ``"x"`` is the current
state and ``"u_prev"`` the previously applied stacked input.
"""

from dataclasses import dataclass, field
import csv
import warnings

import numpy as np
from scipy.linalg import expm

from .gne_solver import GNEProblem
from .polyhedra import Polyhedron


class GameSpecError(ValueError):
    pass


@dataclass
class StageCost:
    """Agent stage cost

    ``x'Qx + u'Ru + du'R_delta du + (Fx p + fx)'x + (Fu p + fu)'u + p'Pq p + pl'p + const``

    where ``u`` is the stacked input of all agents and ``du`` its increment.
    """

    Q: np.ndarray
    R: np.ndarray
    R_delta: np.ndarray = None
    Fx: np.ndarray = None
    fx: np.ndarray = None
    Fu: np.ndarray = None
    fu: np.ndarray = None
    Pq: np.ndarray = None
    pl: np.ndarray = None
    const: float = 0.0

    def filled(self, n, m, n_p):
        def arr(v, shape):
            return np.zeros(shape) if v is None else np.asarray(v, dtype=float).reshape(shape)
        return StageCost(arr(self.Q, (n, n)), arr(self.R, (m, m)), arr(self.R_delta, (m, m)),
                         arr(self.Fx, (n, n_p)), arr(self.fx, (n,)), arr(self.Fu, (m, n_p)),
                         arr(self.fu, (m,)), arr(self.Pq, (n_p, n_p)), arr(self.pl, (n_p,)),
                         float(self.const))

    def value(self, x, u, du, p):
        return float(x @ self.Q @ x + u @ self.R @ u + du @ self.R_delta @ du
                     + (self.Fx @ p + self.fx) @ x + (self.Fu @ p + self.fu) @ u
                     + p @ self.Pq @ p + self.pl @ p + self.const)


@dataclass
class LinearConstraint:
    """``C v <= c + S p`` on ``v`` (an agent input, the stacked input, or the state)."""

    C: np.ndarray
    c: np.ndarray
    S: np.ndarray = None


@dataclass
class DynamicGameSpec:
    A: np.ndarray
    B: list
    horizon: int
    costs: list
    param_layout: list
    W_d: np.ndarray = None
    local_input: list = None          # one LinearConstraint (or None) per agent
    coupled_input: LinearConstraint = None
    coupled_state: LinearConstraint = None
    state_steps: tuple = None         # prediction steps carrying state rows (default 1..K)
    p_min: np.ndarray = None
    p_max: np.ndarray = None
    u_min: np.ndarray = None          # range of interest for the stacked input
    u_max: np.ndarray = None
    name: str = "game"
    exogenous: dict = field(default_factory=dict)   # default values of non-state parameters

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise GameSpecError("A must be square")
        self.B = [np.asarray(b, dtype=float).reshape(n, -1) for b in self.B]
        if int(self.horizon) < 1:
            raise GameSpecError("horizon must be at least 1")
        self.horizon = int(self.horizon)
        if len(self.costs) != len(self.B):
            raise GameSpecError("one stage cost per agent is required")
        self.param_layout = [(str(k), int(s)) for k, s in self.param_layout]
        n_p = self.n_p
        self.W_d = np.zeros((n, n_p)) if self.W_d is None else np.asarray(self.W_d, float).reshape(n, n_p)
        self.costs = [c.filled(n, self.m, n_p) for c in self.costs]
        if self.local_input is None:
            self.local_input = [None] * self.N
        if self.state_steps is None:
            self.state_steps = tuple(range(1, self.horizon + 1))
        if "x" in self.param_names and self.param_slice("x").stop - self.param_slice("x").start != n:
            raise GameSpecError("parameter 'x' must have the state dimension")
        if "u_prev" in self.param_names and \
                self.param_slice("u_prev").stop - self.param_slice("u_prev").start != self.m:
            raise GameSpecError("parameter 'u_prev' must have the stacked input dimension")

    # sizes -------------------------------------------------------------
    @property
    def N(self):
        return len(self.B)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m_agents(self):
        return [b.shape[1] for b in self.B]

    @property
    def m(self):
        return sum(self.m_agents)

    @property
    def n_p(self):
        return sum(s for _, s in self.param_layout)

    @property
    def param_names(self):
        return [k for k, _ in self.param_layout]

    def param_slice(self, name):
        start = 0
        for k, s in self.param_layout:
            if k == name:
                return slice(start, start + s)
            start += s
        raise KeyError(name)

    def param_labels(self):
        out = []
        for k, s in self.param_layout:
            out.extend([k] if s == 1 else [f"{k}[{j}]" for j in range(s)])
        return out

    @property
    def B_full(self):
        return np.hstack(self.B)

    def input_offsets(self):
        return np.concatenate([[0], np.cumsum(self.m_agents)])

    def selector(self, name):
        """Matrix picking parameter block ``name`` out of ``p``."""
        sl = self.param_slice(name)
        P = np.zeros((sl.stop - sl.start, self.n_p))
        P[:, sl] = np.eye(sl.stop - sl.start)
        return P

    def W_x(self):
        return self.selector("x") if "x" in self.param_names else np.zeros((self.n, self.n_p))

    def W_uprev(self):
        return self.selector("u_prev") if "u_prev" in self.param_names else np.zeros((self.m, self.n_p))

    def step(self, x, u, p):
        return self.A @ x + self.B_full @ u + self.W_d @ p

    def assemble_p(self, x, u_prev, exogenous=None):
        vals = dict(self.exogenous)
        vals.update(exogenous or {})
        vals["x"] = x
        vals["u_prev"] = u_prev
        parts = []
        for k, s in self.param_layout:
            if k not in vals:
                raise GameSpecError(f"no value for parameter {k!r}")
            parts.append(np.asarray(vals[k], dtype=float).reshape(s))
        return np.concatenate(parts) if parts else np.zeros(0)


# ---------------------------------------------------------------------------
# condensation


def _prediction_maps(spec: DynamicGameSpec):
    """Affine maps of predicted states/inputs in ``z = (U, p, 1)``."""
    n, m, K, n_p = spec.n, spec.m, spec.horizon, spec.n_p
    nU = m * K
    nz = nU + n_p + 1
    off = spec.input_offsets()
    # U index of agent j, step k, component r
    def uidx(j, k, r):
        return off[j] * K + k * spec.m_agents[j] + r

    Umaps = []
    for k in range(K):
        Uk = np.zeros((m, nz))
        for j in range(spec.N):
            for r in range(spec.m_agents[j]):
                Uk[off[j] + r, uidx(j, k, r)] = 1.0
        Umaps.append(Uk)
    P = np.zeros((n_p, nz))
    P[:, nU:nU + n_p] = np.eye(n_p)
    E = np.zeros((1, nz))
    E[0, -1] = 1.0
    Xmaps = [spec.W_x() @ P]
    for k in range(K):
        Xmaps.append(spec.A @ Xmaps[-1] + spec.B_full @ Umaps[k] + spec.W_d @ P)
    prev = spec.W_uprev() @ P
    Dmaps = []
    for k in range(K):
        Dmaps.append(Umaps[k] - prev)
        prev = Umaps[k]
    return Xmaps, Umaps, Dmaps, P, E, uidx


def cost_quadratic_form(spec: DynamicGameSpec, agent):
    """Symmetric ``W`` with ``J_agent = z'Wz`` for ``z = (U, p, 1)``."""
    X, U, D, P, E, _ = _prediction_maps(spec)
    c = spec.costs[agent]
    nz = P.shape[1]
    W = np.zeros((nz, nz))
    for k in range(spec.horizon):
        W += X[k].T @ c.Q @ X[k] + U[k].T @ c.R @ U[k] + D[k].T @ c.R_delta @ D[k]
        lin = X[k].T @ (c.Fx @ P + np.outer(c.fx, E)) + U[k].T @ (c.Fu @ P + np.outer(c.fu, E))
        W += 0.5 * (lin + lin.T)
        W += P.T @ c.Pq @ P
        pe = np.outer(P.T @ c.pl, E)
        W += 0.5 * (pe + pe.T) + c.const * E.T @ E
    return 0.5 * (W + W.T)


def condense(spec: DynamicGameSpec, x_range=None):
    """Build the GNEP over the stacked input sequences.

    ``x_range`` optionally overrides the decision-variable box of interest
    ``(x_min, x_max)``; by default it is ``spec.u_min``/``spec.u_max``
    repeated over the horizon.
    """
    K, n_p, m = spec.horizon, spec.n_p, spec.m
    nU = m * K
    X, U, D, P, E, uidx = _prediction_maps(spec)
    Qs, cs, Fs = [], [], []
    for i in range(spec.N):
        W = cost_quadratic_form(spec, i)
        Qs.append(2.0 * W[:nU, :nU])
        Fs.append(2.0 * W[:nU, nU:nU + n_p])
        cs.append(2.0 * W[:nU, -1])
    rows, rhs, par, coupling = [], [], [], []

    def add(Cmap, c, S, is_coupling):
        # Cmap: rows over z; constraint Cmap z <= c + S p  ->  A U <= c + (S - Cmap_p) p - Cmap_1
        for r in range(Cmap.shape[0]):
            rows.append(Cmap[r, :nU])
            par.append(S[r] - Cmap[r, nU:nU + n_p])
            rhs.append(c[r] - Cmap[r, -1])
            coupling.append(is_coupling)

    off = spec.input_offsets()
    for i, lc in enumerate(spec.local_input):
        if lc is None:
            continue
        C = np.atleast_2d(np.asarray(lc.C, float))
        c = np.asarray(lc.c, float).reshape(-1)
        S = np.zeros((c.size, n_p)) if lc.S is None else np.asarray(lc.S, float).reshape(c.size, n_p)
        for k in range(K):
            add(C @ U[k][off[i]:off[i + 1]], c, S, False)
    if spec.coupled_input is not None:
        lc = spec.coupled_input
        C = np.atleast_2d(np.asarray(lc.C, float))
        c = np.asarray(lc.c, float).reshape(-1)
        S = np.zeros((c.size, n_p)) if lc.S is None else np.asarray(lc.S, float).reshape(c.size, n_p)
        for k in range(K):
            add(C @ U[k], c, S, True)
    if spec.coupled_state is not None:
        lc = spec.coupled_state
        C = np.atleast_2d(np.asarray(lc.C, float))
        c = np.asarray(lc.c, float).reshape(-1)
        S = np.zeros((c.size, n_p)) if lc.S is None else np.asarray(lc.S, float).reshape(c.size, n_p)
        for k in spec.state_steps:
            add(C @ X[k], c, S, True)
    nA = len(rows)
    A = np.array(rows).reshape(nA, nU)
    b = np.array(rhs).reshape(nA)
    S = np.array(par).reshape(nA, n_p)

    # reorder decision variables into agent blocks (already agent-major)
    sizes = [mj * K for mj in spec.m_agents]
    if x_range is None:
        if spec.u_min is None or spec.u_max is None:
            raise GameSpecError("a decision-variable range (u_min/u_max or x_range) is required")
        x_min = np.concatenate([np.tile(np.asarray(spec.u_min, float)[off[j]:off[j + 1]], K)
                                for j in range(spec.N)])
        x_max = np.concatenate([np.tile(np.asarray(spec.u_max, float)[off[j]:off[j + 1]], K)
                                for j in range(spec.N)])
    else:
        x_min, x_max = (np.asarray(v, float).reshape(nU) for v in x_range)
    if spec.p_min is None or spec.p_max is None:
        raise GameSpecError("parameter box p_min/p_max is required")
    p_box = Polyhedron.box(spec.p_min, spec.p_max, spec.param_labels())
    coupling_rows = tuple(r for r in range(nA) if coupling[r])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gp = GNEProblem(sizes, Qs, cs, Fs, A, b, S, p_box, x_min, x_max,
                        tuple(spec.param_labels()), spec.name, coupling_rows)
    return gp


# ---------------------------------------------------------------------------
# benchmark generators


def zoh(Ac, Bc, Ts):
    """Exact zero-order-hold discretisation via the augmented matrix exponential."""
    if Ts <= 0:
        raise GameSpecError("sampling time must be positive")
    n, m = Bc.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = Ac
    M[:n, n:] = Bc
    E = expm(M * Ts)
    return E[:n, :n], E[:n, n:]


TWO_MASS_DEFAULTS = dict(M1=3.0, M2=1.0, K_spring=0.5, beta1=1.5, beta2=1.0, Ts=0.2, dy=0.5,
                         N=10, Q1=[[1, -1], [-1, 1]], R1=[[1, 1], [1, 1]],
                         Q2=[[0, 0], [0, 1]], R2=[[0, 0], [0, 0.1]], constraint_steps=3,
                         constraint_start=0,
                         p_bound=100.0, u_bound=1e4, r1=1.0, r2=2.0)


def two_mass_game(**params) -> DynamicGameSpec:
    """Two masses joined by a spring, each pushed by one agent.

    State ``(y1, dy1, y2, dy2)``; parameters ``(x, u_prev, r1, r2)``.
    Agent 1 penalises ``(e1 - e2)`` and the total force increment, agent 2
    its own tracking error and force increment.  ``y2 >= y1 + dy`` is
    imposed on ``constraint_steps`` consecutive prediction steps starting at
    ``constraint_start``.  With the default start of 0 the first row involves
    the measured state only and acts as a restriction on the parameter.
    """
    cfg = dict(TWO_MASS_DEFAULTS)
    unknown = set(params) - set(cfg)
    if unknown:
        raise GameSpecError(f"unknown two-mass parameters: {sorted(unknown)}")
    cfg.update(params)
    M1, M2, Ks = cfg["M1"], cfg["M2"], cfg["K_spring"]
    b1, b2 = cfg["beta1"], cfg["beta2"]
    if min(M1, M2) <= 0:
        raise GameSpecError("masses must be positive")
    Ac = np.array([[0, 1, 0, 0],
                   [-Ks / M1, -b1 / M1, Ks / M1, 0],
                   [0, 0, 0, 1],
                   [Ks / M2, 0, -Ks / M2, -b2 / M2]])
    Bc = np.array([[0, 0], [1 / M1, 0], [0, 0], [0, -1 / M2]])
    Ad, Bd = zoh(Ac, Bc, cfg["Ts"])
    layout = [("x", 4), ("u_prev", 2), ("r1", 1), ("r2", 1)]
    n_p = 8
    Cy = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])        # positions
    Rsel = np.zeros((2, n_p))
    Rsel[0, 6] = Rsel[1, 7] = 1.0                          # references

    def tracking(Qe, Ru):
        Qe = np.asarray(Qe, float)
        # (Cy x - Rsel p)' Qe (Cy x - Rsel p)
        return StageCost(Q=Cy.T @ Qe @ Cy, R=np.zeros((2, 2)), R_delta=np.asarray(Ru, float),
                         Fx=-2.0 * Cy.T @ Qe @ Rsel, Pq=Rsel.T @ Qe @ Rsel)

    costs = [tracking(cfg["Q1"], cfg["R1"]), tracking(cfg["Q2"], cfg["R2"])]
    # y1 - y2 <= -dy
    state_con = LinearConstraint(np.array([[1.0, 0, -1.0, 0]]), np.array([-cfg["dy"]]))
    pb, ub = cfg["p_bound"], cfg["u_bound"]
    return DynamicGameSpec(
        A=Ad, B=[Bd[:, :1], Bd[:, 1:]], horizon=cfg["N"], costs=costs, param_layout=layout,
        coupled_state=state_con, state_steps=tuple(range(cfg["constraint_start"],
                                                                  cfg["constraint_start"] + cfg["constraint_steps"])),
        p_min=-pb * np.ones(n_p), p_max=pb * np.ones(n_p),
        u_min=-ub * np.ones(2), u_max=ub * np.ones(2), name="two_mass",
        exogenous={"r1": cfg["r1"], "r2": cfg["r2"]})


BATTERY_DEFAULTS = dict(
    gamma1=[0.03, 0.05], gamma3=[0.04, 0.04], u_max=[10.0, 10.0], l_max=[10.0, 10.0],
    A=[0.960, 0.985], B=[0.71, 0.76], d=[1.67, 1.27], x_ref=[15.0, 15.0], K=5,
    L_max=9.0, gamma2=[0.0, 0.0], soc_range=(0.0, 30.0), gamma2_range=(-1.0, 1.0),
    L_range=(0.0, 20.0))


def battery_game(**params) -> DynamicGameSpec:
    """Battery charging game with a shared grid-load limit.

    Agent ``i`` buys ``l_i = u_i + d_i`` from the grid at price
    ``gamma1_i * sum_j l_j + gamma2_i`` and pays ``gamma3_i (x_i - x_ref_i)^2``
    for deviating from its reference state of charge.  Parameters are
    ``(x_1..x_N, gamma2_1..gamma2_N, L_max)``.
    """
    cfg = dict(BATTERY_DEFAULTS)
    unknown = set(params) - set(cfg)
    if unknown:
        raise GameSpecError(f"unknown battery parameters: {sorted(unknown)}")
    cfg.update(params)
    g1, g3 = np.asarray(cfg["gamma1"], float), np.asarray(cfg["gamma3"], float)
    umax, lmax = np.asarray(cfg["u_max"], float), np.asarray(cfg["l_max"], float)
    Av, Bv = np.asarray(cfg["A"], float), np.asarray(cfg["B"], float)
    d, xref = np.asarray(cfg["d"], float), np.asarray(cfg["x_ref"], float)
    N = g1.size
    if np.any((Av < 0) | (Av > 1)) or np.any((Bv < 0) | (Bv > 1)):
        warnings.warn("battery leakage/efficiency coefficients outside [0, 1]", stacklevel=2)
    layout = [("x", N), ("gamma2", N), ("L_max", 1)]
    n_p = 2 * N + 1
    sd = d.sum()
    costs = []
    for i in range(N):
        e = np.zeros(N)
        e[i] = 1.0
        R = g1[i] * 0.5 * (np.outer(e, np.ones(N)) + np.outer(np.ones(N), e))
        Fu = np.zeros((N, n_p))
        Fu[i, N + i] = 1.0
        pl = np.zeros(n_p)
        pl[N + i] = d[i]
        costs.append(StageCost(
            Q=g3[i] * np.outer(e, e), R=R, fx=-2.0 * g3[i] * xref[i] * e,
            Fu=Fu, fu=g1[i] * sd * e + g1[i] * d[i] * np.ones(N), pl=pl,
            const=g1[i] * sd * d[i] + g3[i] * xref[i] ** 2))
    local = []
    for i in range(N):
        # -u <= d, u <= lmax - d, u <= umax, -u <= umax
        local.append(LinearConstraint(np.array([[-1.0], [1.0], [1.0], [-1.0]]),
                                      np.array([d[i], lmax[i] - d[i], umax[i], umax[i]])))
    SL = np.zeros((2, n_p))
    SL[0, -1] = 1.0
    coupled = LinearConstraint(np.vstack([np.ones(N), -np.ones(N)]), np.array([-sd, sd]), SL)
    lo_soc, hi_soc = cfg["soc_range"]
    g2r = np.asarray(cfg["gamma2_range"], float)
    # one (lo, hi) pair for every agent, or one pair per agent
    lo_g, hi_g = (g2r[0], g2r[1]) if g2r.ndim == 1 else (g2r[:, 0], g2r[:, 1])
    lo_L, hi_L = cfg["L_range"]
    p_min = np.concatenate([np.full(N, lo_soc), np.broadcast_to(lo_g, N), [lo_L]])
    p_max = np.concatenate([np.full(N, hi_soc), np.broadcast_to(hi_g, N), [hi_L]])
    u_lo = np.maximum(-umax, -d)
    u_hi = np.minimum(umax, lmax - d)
    return DynamicGameSpec(
        A=np.diag(Av), B=[Bv[i] * np.eye(N)[:, i:i + 1] for i in range(N)], horizon=cfg["K"],
        costs=costs, param_layout=layout, local_input=local, coupled_input=coupled,
        p_min=p_min, p_max=p_max, u_min=u_lo, u_max=u_hi, name="battery",
        exogenous={"gamma2": np.asarray(cfg["gamma2"], float), "L_max": cfg["L_max"]})


# ---------------------------------------------------------------------------
# closed loop


@dataclass
class Trajectory:
    states: np.ndarray
    inputs: np.ndarray
    stage_costs: np.ndarray          # steps x N
    region_index: list
    margins: np.ndarray              # min constraint margin of the applied plan per step
    params: np.ndarray = None

    @property
    def cumulative_costs(self):
        return self.stage_costs.sum(axis=0)

    def to_csv(self, path):
        n = self.states.shape[1]
        m = self.inputs.shape[1] if self.inputs.ndim == 2 else 0
        N = self.stage_costs.shape[1] if self.stage_costs.ndim == 2 else 0
        header = (["t"] + [f"x{j}" for j in range(n)] + [f"u{j}" for j in range(m)]
                  + [f"cost_agent_{i}" for i in range(N)] + ["region_index", "min_margin"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t in range(self.states.shape[0]):
                row = [t] + [repr(float(v)) for v in self.states[t]]
                if t < self.inputs.shape[0]:
                    row += [repr(float(v)) for v in self.inputs[t]]
                    row += [repr(float(v)) for v in self.stage_costs[t]]
                    row += [self.region_index[t], repr(float(self.margins[t]))]
                else:
                    row += [""] * (m + N + 2)
                w.writerow(row)


def first_inputs(spec: DynamicGameSpec, U):
    """Stacked ``u_0`` of all agents from the condensed decision vector."""
    K = spec.horizon
    off = spec.input_offsets()
    return np.concatenate([U[off[j] * K: off[j] * K + spec.m_agents[j]] for j in range(spec.N)])


def simulate_closed_loop(spec: DynamicGameSpec, sol, x0, steps, policy=None, u_prev0=None,
                         exogenous=None, gp=None):
    """Receding-horizon simulation under an explicit GNE law."""
    from . import evaluator
    gp = gp or sol.problem
    x = np.asarray(x0, dtype=float).reshape(spec.n)
    u_prev = np.zeros(spec.m) if u_prev0 is None else np.asarray(u_prev0, float).reshape(spec.m)
    states, inputs, costs, regs, margins, params = [x.copy()], [], [], [], [], []
    for t in range(int(steps)):
        p = spec.assemble_p(x, u_prev, exogenous)
        try:
            res = evaluator.evaluate(sol, p, policy, return_info=True)
        except evaluator.EvaluationError as exc:
            raise evaluator.EvaluationError(f"step {t}: {exc}") from exc
        U = res.x
        u = first_inputs(spec, U)
        du = u - u_prev
        costs.append([c.value(x, u, du, p) for c in spec.costs])
        margins.append(float(np.min(gp.b + gp.S @ p - gp.A @ U)) if gp.n_A else np.inf)
        regs.append(res.region)
        params.append(p)
        inputs.append(u)
        x = spec.step(x, u, p)
        u_prev = u
        states.append(x.copy())
    N = spec.N
    return Trajectory(np.array(states), np.array(inputs).reshape(-1, spec.m),
                      np.array(costs).reshape(-1, N), regs, np.array(margins),
                      np.array(params).reshape(-1, spec.n_p))
