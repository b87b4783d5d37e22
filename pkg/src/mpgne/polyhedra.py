"""Dense H-polyhedra ``{z : C z <= d}`` and the LP-based operations on them."""

from dataclasses import dataclass

import numpy as np

from . import qp_core

#: Chebyshev radii are capped at this value; an uncapped LP would be unbounded
#: for polyhedra containing arbitrarily large balls.
RADIUS_CAP = 1e6
FULL_DIM_EPS = 1e-6
REDUNDANCY_TOL = 1e-9
FAR_ROW_FACTOR = 1e6
FM_ROW_CAP = 5000
ZERO_ROW_TOL = 1e-12


class PolyhedronError(ValueError):
    pass


class EliminationBlowup(PolyhedronError):
    """Fourier-Motzkin produced more rows than the configured cap."""


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """Set ``{z : C z <= d}``; rows are scaled to unit norm on construction.

    Rows with zero coefficients are dropped when satisfied; an unsatisfiable
    zero row is kept as ``0 z <= -1`` so the set stays visibly empty.
    """

    C: np.ndarray
    d: np.ndarray
    var_labels: tuple = ()

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if C.ndim == 1:
            C = C.reshape(d.size, -1) if d.size else C.reshape(0, -1)
        if C.shape[0] != d.size:
            raise PolyhedronError(f"C has {C.shape[0]} rows but d has {d.size}")
        labels = tuple(self.var_labels) or tuple(f"z{i}" for i in range(C.shape[1]))
        if len(labels) != C.shape[1]:
            raise PolyhedronError("var_labels length does not match C columns")
        norms = np.linalg.norm(C, axis=1)
        zero = norms <= ZERO_ROW_TOL
        bad = zero & (d < -ZERO_ROW_TOL)
        keep = ~zero
        # rows already of unit norm are left untouched so normalizing is idempotent
        scale = np.where(np.abs(norms - 1.0) <= 8 * np.finfo(float).eps, 1.0, norms)
        C = C[keep] / scale[keep, None]
        d = d[keep] / scale[keep]
        if bad.any():
            C = np.vstack([C, np.zeros((1, C.shape[1]))])
            d = np.append(d, -1.0)
        C.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "var_labels", labels)

    @property
    def dim(self):
        return self.C.shape[1]

    @property
    def n_rows(self):
        return self.C.shape[0]

    @classmethod
    def box(cls, lower, upper, labels=()):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n = lower.size
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]), labels)

    @classmethod
    def universe(cls, n, labels=()):
        return cls(np.zeros((0, n)), np.zeros(0), labels)

    def is_trivially_empty(self):
        return bool(np.any(np.all(self.C == 0.0, axis=1) & (self.d < 0)))

    def to_dict(self):
        return {"C": self.C, "d": self.d, "vars": list(self.var_labels)}

    @classmethod
    def from_dict(cls, data):
        C = np.asarray(data["C"], dtype=float).reshape(len(data["d"]), len(data["vars"]))
        return cls(C, data["d"], data["vars"])


@dataclass(frozen=True)
class ChebyshevResult:
    center: np.ndarray
    radius: float


def chebyshev(P: Polyhedron, backend=None) -> ChebyshevResult:
    """Largest inscribed ball.  A negative radius means no interior (or empty)."""
    n = P.dim
    if P.n_rows == 0:
        return ChebyshevResult(np.zeros(n), RADIUS_CAP)
    if P.is_trivially_empty():
        return ChebyshevResult(np.zeros(n), -np.inf)
    # max r  s.t.  C z + r <= d,  r <= cap   (rows are unit norm)
    C = np.hstack([P.C, np.ones((P.n_rows, 1))])
    cap = np.zeros((1, n + 1))
    cap[0, -1] = 1.0
    w = np.zeros(n + 1)
    w[-1] = 1.0
    res = qp_core.maximize(w, np.vstack([C, cap]), np.append(P.d, RADIUS_CAP), backend)
    if res.status != qp_core.OPTIMAL:
        raise qp_core.SolverError(f"Chebyshev LP failed with status {res.status}")
    return ChebyshevResult(res.x[:n], float(res.x[-1]))


def is_full_dimensional(P: Polyhedron, eps=FULL_DIM_EPS, backend=None) -> bool:
    """True iff the Chebyshev radius exceeds ``eps``.

    A system with no rows carries no region description and is reported as
    not full-dimensional.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if P.n_rows == 0:
        return False
    return chebyshev(P, backend).radius > eps


def contains(P: Polyhedron, z, tol=0.0) -> bool:
    z = np.asarray(z, dtype=float)
    if z.size != P.dim:
        raise PolyhedronError(f"point has dimension {z.size}, polyhedron {P.dim}")
    if P.n_rows == 0:
        return True
    return bool(np.all(P.C @ z <= P.d + tol))


def intersect(P1: Polyhedron, P2: Polyhedron) -> Polyhedron:
    if P1.dim != P2.dim:
        raise PolyhedronError(f"dimension mismatch: {P1.dim} vs {P2.dim}")
    return Polyhedron(np.vstack([P1.C, P2.C]), np.concatenate([P1.d, P2.d]), P1.var_labels)


def _dedupe(C, d, tol=1e-12):
    keep = []
    for i in range(C.shape[0]):
        dup = False
        for j in keep:
            if np.abs(C[i] - C[j]).max() <= tol and abs(d[i] - d[j]) <= tol * (1 + abs(d[j])):
                dup = True
                break
        if not dup:
            keep.append(i)
    return np.asarray(keep, dtype=int)


def _redundant_row(C, d, j, alive, tol, backend):
    """True when row ``j`` is implied by the rows flagged in ``alive``.

    Row ``j`` itself is relaxed by one unit so the LP stays bounded.  An LP
    that does not reach optimality keeps the row; an extra row never changes
    the set.
    """
    mask = alive.copy()
    mask[j] = False
    rows = np.vstack([C[mask], C[j:j + 1]])
    rhs = np.append(d[mask], d[j] + 1.0)
    res = qp_core.maximize(C[j], rows, rhs, backend)
    return res.status == qp_core.OPTIMAL and res.fun <= d[j] + tol


def remove_redundant(P: Polyhedron, tol=REDUNDANCY_TOL, backend=None) -> Polyhedron:
    """Drop rows implied by the others; survivors keep their relative order.

    Rows whose offset dwarfs the rest (far-away, nearly parallel cuts) spoil
    the conditioning of the LPs, so they are left out while the other rows
    are tested and are checked last against the survivors.
    """
    if P.n_rows == 0:
        return P
    if chebyshev(P, backend).radius < 0:
        raise PolyhedronError("remove_redundant requires a nonempty polyhedron")
    idx = _dedupe(P.C, P.d)
    C, d = P.C[idx], P.d[idx]
    far = np.abs(d) > FAR_ROW_FACTOR * (1.0 + np.median(np.abs(d)))
    alive = ~far
    for j in np.flatnonzero(~far):
        alive[j] = not _redundant_row(C, d, j, alive, tol, backend)
    for j in np.flatnonzero(far):
        alive[j] = not _redundant_row(C, d, j, alive | (np.arange(d.size) == j), tol, backend)
    return Polyhedron(C[alive], d[alive], P.var_labels)


def eliminate(P: Polyhedron, drop_vars, row_cap=FM_ROW_CAP, backend=None) -> Polyhedron:
    """Project onto the kept variables by Fourier-Motzkin elimination."""
    drop = sorted(set(int(k) for k in drop_vars), reverse=True)
    C, d = np.array(P.C), np.array(P.d)
    labels = list(P.var_labels)
    for k in drop:
        col = C[:, k]
        pos = np.flatnonzero(col > ZERO_ROW_TOL)
        neg = np.flatnonzero(col < -ZERO_ROW_TOL)
        zer = np.flatnonzero(np.abs(col) <= ZERO_ROW_TOL)
        n_new = zer.size + pos.size * neg.size
        if n_new > row_cap:
            raise EliminationBlowup(
                f"eliminating variable {labels[k]!r} would create {n_new} rows "
                f"(cap {row_cap}); keep the lifted polyhedron instead")
        rows = [C[zer]]
        rhs = [d[zer]]
        if pos.size and neg.size:
            Cp = C[pos] / col[pos, None]
            dp = d[pos] / col[pos]
            Cn = C[neg] / -col[neg, None]
            dn = d[neg] / -col[neg]
            rows.append((Cp[:, None, :] + Cn[None, :, :]).reshape(-1, C.shape[1]))
            rhs.append((dp[:, None] + dn[None, :]).reshape(-1))
        C = np.delete(np.vstack(rows), k, axis=1)
        d = np.concatenate(rhs)
        del labels[k]
        Q = Polyhedron(C, d, labels)
        if Q.n_rows and chebyshev(Q, backend).radius >= 0:
            Q = remove_redundant(Q, backend=backend)
        C, d = np.array(Q.C), np.array(Q.d)
    return Polyhedron(C, d, labels)


def bounding_box(P: Polyhedron, backend=None):
    """Coordinate-wise bounds of a bounded polyhedron."""
    n = P.dim
    lo, hi = np.empty(n), np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        up = qp_core.maximize(e, P.C, P.d, backend)
        dn = qp_core.maximize(-e, P.C, P.d, backend)
        if up.status != qp_core.OPTIMAL or dn.status != qp_core.OPTIMAL:
            raise PolyhedronError(f"coordinate {i} is unbounded or the set is empty")
        hi[i], lo[i] = up.fun, -dn.fun
    return lo, hi


def sample_uniform(P: Polyhedron, n_samples, rng, box=None, max_tries=200):
    """Rejection-sample points of ``P`` from its bounding box."""
    lo, hi = box if box is not None else bounding_box(P)
    out = []
    for _ in range(max_tries):
        Z = rng.uniform(lo, hi, size=(max(n_samples, 16), lo.size))
        ok = np.all(Z @ P.C.T <= P.d + 1e-12, axis=1) if P.n_rows else np.ones(len(Z), bool)
        out.extend(Z[ok])
        if len(out) >= n_samples:
            return np.asarray(out[:n_samples])
    return np.asarray(out).reshape(-1, lo.size)
