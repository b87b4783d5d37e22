import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpgne import polyhedra, qp_core
from mpgne.polyhedra import Polyhedron, chebyshev, contains, eliminate, intersect, is_full_dimensional, remove_redundant

from oracles import chebyshev_radius_by_vertices

BOX10 = Polyhedron.box([-10, -10], [10, 10], ("p_c", "p_1"))
seeds = st.integers(0, 2 ** 32 - 1)


def same_set(P, Q, tol=1e-7):
    """Mutual containment of two bounded polyhedra, row by row through LPs."""
    for A, B in ((P, Q), (Q, P)):
        for row, rhs in zip(B.C, B.d):
            res = qp_core.maximize(row, A.C, A.d)
            if res.status != qp_core.OPTIMAL or res.fun > rhs + tol:
                return False
    return True


def random_polytope(seed, n=None, m=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 8))
    C = rng.standard_normal((m, n))
    d = rng.uniform(-0.5, 2.0, m)
    box = Polyhedron.box(-3 * np.ones(n), 3 * np.ones(n))
    return Polyhedron(np.vstack([C, box.C]), np.concatenate([d, box.d])), rng


# --- chebyshev ------------------------------------------------------------


def test_unit_box_center_and_radius():
    r = chebyshev(Polyhedron.box([-1, -1], [1, 1]))
    assert r.radius == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(r.center, 0.0, atol=1e-12)


def test_contradictory_bounds_have_negative_radius():
    assert chebyshev(Polyhedron([[1.0], [-1.0]], [0.0, -1.0])).radius < 0


def test_running_example_first_region_is_full_dimensional():
    # p = (p_c, p_1): p_1 <= 0, p_1 - p_c <= 0
    P = intersect(Polyhedron([[0, 1], [-1, 1]], [0, 0]), BOX10)
    assert chebyshev(P).radius > 0


def test_rows_are_normalized():
    P = Polyhedron([[3.0, 4.0]], [10.0])
    np.testing.assert_allclose(P.C, [[0.6, 0.8]])
    np.testing.assert_allclose(P.d, [2.0])


def test_infeasible_zero_row_kept_visible():
    P = Polyhedron([[0.0, 0.0], [1.0, 0.0]], [-1.0, 1.0])
    assert chebyshev(P).radius < 0


# --- full dimensionality ----------------------------------------------------


def test_full_dimensional_examples():
    assert is_full_dimensional(Polyhedron.box([-1, -1], [1, 1]), 1e-6)
    assert not is_full_dimensional(Polyhedron([[1.0], [-1.0]], [0.0, 0.0]), 1e-6)
    assert not is_full_dimensional(Polyhedron(np.zeros((0, 2)), np.zeros(0)), 1e-6)


# --- redundancy ---------------------------------------------------------------


def test_dominated_row_removed():
    P = remove_redundant(Polyhedron([[1.0], [1.0]], [1.0, 2.0]))
    np.testing.assert_allclose(P.C, [[1.0]])
    np.testing.assert_allclose(P.d, [1.0])


def test_duplicated_box_rows_removed():
    box = Polyhedron.box([-1, -1], [1, 1])
    dup = Polyhedron(np.vstack([box.C, box.C]), np.concatenate([box.d, box.d]))
    P = remove_redundant(dup)
    assert P.n_rows == 4
    assert same_set(P, box)


def test_running_example_unique_origin_region_reduces_to_two_rows():
    # raw rows after substituting x = (0, 0): -p_1 <= 0, -p_c <= 0 (twice), -p_c - p_1 <= 0
    raw = Polyhedron([[0, -1], [-1, 0], [-1, 0], [-1, -1]], [0, 0, 0, 0])
    P = remove_redundant(intersect(raw, BOX10))
    inner = Polyhedron([[0, -1], [-1, 0]], [0, 0])
    assert same_set(P, intersect(inner, BOX10))
    core = [row for row, rhs in zip(P.C, P.d) if abs(rhs) < 1e-12]
    np.testing.assert_allclose(sorted(map(tuple, core)), sorted([(0, -1), (-1, 0)]), atol=1e-12)


def test_survivor_order_preserved():
    P = Polyhedron([[1, 0], [0, 1], [1, 1], [-1, 0], [0, -1]], [1, 1, 5, 1, 1])
    R = remove_redundant(P)
    np.testing.assert_allclose(R.C, P.C[[0, 1, 3, 4]])


# --- intersect / contains ------------------------------------------------------


def test_intersect_examples():
    P = Polyhedron.box([-1], [1])
    assert intersect(P, Polyhedron.universe(1)).n_rows == P.n_rows
    Q = intersect(Polyhedron([[1.0]], [1.0]), Polyhedron([[-1.0]], [0.0]))
    assert contains(Q, [0.5]) and not contains(Q, [1.5]) and not contains(Q, [-0.5])


def test_intersect_dimension_mismatch():
    with pytest.raises(polyhedra.PolyhedronError):
        intersect(Polyhedron.box([0], [1]), Polyhedron.box([0, 0], [1, 1]))


def test_contains_examples():
    box = Polyhedron.box([-1, -1], [1, 1])
    assert contains(box, [0, 0], 0.0)
    assert not contains(box, [2, 0], 0.0)
    cr3 = Polyhedron([[1, 0], [1, -1]], [0, 0])  # p_c <= 0, p_c <= p_1
    assert contains(cr3, [-1, 1], 1e-9)


# --- elimination ---------------------------------------------------------------


def test_eliminate_shifted_copy():
    # variables (x, y): 0 <= y <= 1, x = y
    P = Polyhedron([[0, 1], [0, -1], [1, -1], [-1, 1]], [1, 0, 0, 0])
    proj = eliminate(P, [1])
    assert same_set(proj, Polyhedron.box([0], [1]))


def test_eliminate_box():
    P = Polyhedron.box([-1, -2, 0], [1, 2, 5])
    proj = eliminate(P, [2])
    assert same_set(proj, Polyhedron.box([-1, -2], [1, 2]))


def test_eliminate_running_example_family(running_solutions):
    inf = [er for er in running_solutions["none"].regions if er.kind == "infinite"]
    assert len(inf) == 1
    proj = eliminate(inf[0].lifted, [2])
    expected = intersect(Polyhedron([[1, 0], [1, -1]], [0, 0]), BOX10)
    assert same_set(proj, expected)


def test_eliminate_row_cap():
    rng = np.random.default_rng(0)
    C = rng.standard_normal((60, 6))
    P = Polyhedron(C, np.ones(60))
    with pytest.raises(polyhedra.EliminationBlowup):
        eliminate(P, [0, 1, 2, 3], row_cap=50)


# --- properties ----------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_redundancy_removal_keeps_membership(seed):
    P, rng = random_polytope(seed)
    if chebyshev(P).radius <= 1e-6:
        return
    R = remove_redundant(P)
    pts = rng.uniform(-3.5, 3.5, (100, P.dim))
    # points closer than 1e-8 to a facet are ambiguous under the LP tolerance
    margin = np.abs(P.C @ pts.T - P.d[:, None]).min(axis=0)
    for z in pts[margin > 1e-8]:
        assert contains(P, z) == contains(R, z)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.1, 50.0))
def test_radius_invariant_under_duplication_and_scaling(seed, scale):
    P, rng = random_polytope(seed)
    r = chebyshev(P).radius
    idx = rng.integers(0, P.n_rows, 3)
    C = np.vstack([P.C * scale, P.C[idx]])
    d = np.concatenate([P.d * scale, P.d[idx]])
    assert chebyshev(Polyhedron(C, d)).radius == pytest.approx(r, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_radius_matches_vertex_oracle(seed):
    P, _ = random_polytope(seed, n=2)
    ref = chebyshev_radius_by_vertices(P.C, P.d)
    got = chebyshev(P).radius
    if ref is None or ref < 0:
        assert got < 1e-9
    else:
        assert got == pytest.approx(ref, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_projection_is_exact_on_samples(seed):
    P, rng = random_polytope(seed, n=3, m=6)
    if chebyshev(P).radius <= 1e-4:
        return
    proj = eliminate(P, [2])
    # projection of feasible points lies in the projection
    for z in polyhedra.sample_uniform(P, 30, rng):
        assert contains(proj, z[:2], 1e-8)
    # interior points of the projection lift back
    c = chebyshev(proj)
    for t in np.linspace(0, 1, 50):
        u = rng.standard_normal(2)
        q = c.center + t * c.radius * u / np.linalg.norm(u)
        assert qp_core.is_feasible(P.C[:, 2:], P.d - P.C[:, :2] @ q)


def test_far_row_does_not_break_redundancy_removal():
    # a nearly parallel cut with an enormous offset next to a thin sliver
    C = np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1], [1, 1e-12]])
    d = np.array([1e-5, 1e-5, 1.0, 1.0, 1e11])
    P = Polyhedron(C, d)
    Q = polyhedra.remove_redundant(P)
    assert Q.n_rows == 4
    # the survivors form a box; the dropped row holds at all its corners
    corners = np.array([[a, b] for a in (-1e-5, 1e-5) for b in (-1.0, 1.0)])
    assert np.all(corners @ Q.C.T <= Q.d + 1e-15)
    assert np.all(corners @ C[4] <= d[4])
