import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from mpgne import kernels, qp_core
from mpgne.qp_core import QpProblem, solve_lp, solve_qp

from oracles import lp_by_vertices, qp_by_enumeration

seeds = st.integers(0, 2 ** 32 - 1)


def random_qp(rng, n, m):
    L = rng.standard_normal((n, n))
    Q = L @ L.T + 0.5 * np.eye(n)
    c = rng.standard_normal(n)
    A = rng.standard_normal((m, n))
    b = rng.uniform(-1.0, 2.0, m)
    return QpProblem(Q, c, A, b)


def kkt_residuals(p, s):
    stat = p.Q @ s.x + p.c + p.A.T @ s.lam
    slack = p.A @ s.x - p.b
    return np.abs(stat).max(initial=0), np.abs(s.lam * slack).max(initial=0), slack.max(initial=-np.inf)


def test_box_interior_optimum():
    s = solve_qp(QpProblem(np.eye(2), [0, 0], np.vstack([np.eye(2), -np.eye(2)]), np.ones(4)))
    assert s.status == qp_core.OPTIMAL
    np.testing.assert_allclose(s.x, 0, atol=1e-12)
    np.testing.assert_allclose(s.lam, 0, atol=1e-12)
    assert s.active_set == ()


def test_running_example_agent2_coupling_active():
    # x_1 = 0, p_c = -1: min x_2^2  s.t.  -x_2 <= -1 (coupling), -x_2 <= 0
    s = solve_qp(QpProblem([[2.0]], [0.0], [[-1.0], [-1.0]], [-1.0, 0.0]))
    assert s.x[0] == pytest.approx(1.0, abs=1e-12)
    assert 0 in s.active_set and s.lam[0] > 0


def test_infeasible_reported():
    s = solve_qp(QpProblem(np.eye(1), [0.0], [[1.0], [-1.0]], [0.0, -1.0]))
    assert s.status == qp_core.INFEASIBLE


def test_random_2d_six_rows_matches_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = random_qp(rng, 2, 6)
        ref = qp_by_enumeration(p.Q, p.c, p.A, p.b)
        s = solve_qp(p)
        if ref is None:
            assert s.status == qp_core.INFEASIBLE
            continue
        np.testing.assert_allclose(s.x, ref[0], atol=1e-7)


def test_deterministic():
    rng = np.random.default_rng(3)
    p = random_qp(rng, 4, 8)
    a, b = solve_qp(p), solve_qp(p)
    assert a.x.tobytes() == b.x.tobytes() and a.active_set == b.active_set


def test_lp_examples():
    r = solve_lp([1.0], [[1.0], [-1.0]], [1.0, 0.0])
    assert r.status == qp_core.OPTIMAL and r.x[0] == pytest.approx(0.0, abs=1e-12)
    # min p_1 over {p_c >= 0, p_1 >= 0} within the box of half-width 10
    A = np.vstack([[[0, -1], [-1, 0]], np.eye(2), -np.eye(2)])
    b = np.concatenate([[0, 0], 10 * np.ones(4)])
    r = solve_lp([0.0, 1.0], A, b)
    assert r.fun == pytest.approx(0.0, abs=1e-12)


def test_lp_unit_square_chebyshev():
    # variables (z1, z2, r): C z + r <= d for the unit box
    C = np.vstack([np.eye(2), -np.eye(2)])
    A = np.hstack([C, np.ones((4, 1))])
    r = solve_lp([0, 0, -1], A, np.ones(4))
    assert -r.fun == pytest.approx(1.0, abs=1e-12)


def test_lp_error_statuses():
    assert solve_lp([1.0], [[1.0]], [1.0]).status == qp_core.UNBOUNDED
    assert solve_lp([1.0], [[1.0], [-1.0]], [0.0, -1.0]).status == qp_core.INFEASIBLE


def test_lp_with_equalities():
    r = solve_lp([1.0, 1.0], -np.eye(2), np.zeros(2), A_eq=[[1.0, -1.0]], b_eq=[2.0])
    np.testing.assert_allclose(r.x, [2.0, 0.0], atol=1e-12)


@pytest.mark.skipif(not kernels.compiled_available(), reason="compiled kernel not built")
def test_backends_agree_on_random_lps():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n, m = int(rng.integers(2, 6)), int(rng.integers(3, 15))
        A = np.vstack([rng.standard_normal((m, n)), np.eye(n), -np.eye(n)])
        b = np.concatenate([rng.uniform(-0.5, 2, m), 5 * np.ones(2 * n)])
        c = rng.standard_normal(n)
        a = solve_lp(c, A, b, backend="compiled")
        p = solve_lp(c, A, b, backend="python")
        assert a.status == p.status
        if a.status == qp_core.OPTIMAL:
            np.testing.assert_allclose(a.x, p.x, rtol=0, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(seeds)
@example(1244842)   # ill-conditioned start vertex with all rows tight
def test_qp_matches_enumeration_and_kkt(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 5)), int(rng.integers(0, 9))
    p = random_qp(rng, n, m)
    ref = qp_by_enumeration(p.Q, p.c, p.A, p.b)
    s = solve_qp(p)
    if ref is None:
        assert s.status == qp_core.INFEASIBLE
        return
    assert s.status == qp_core.OPTIMAL
    np.testing.assert_allclose(s.x, ref[0], atol=1e-7)
    stat, comp, viol = kkt_residuals(p, s)
    assert stat <= 1e-8 and comp <= 1e-8 and viol <= 1e-8
    assert np.all(s.lam >= 0)
    # strong duality: dual objective of the Lagrangian equals the primal value
    primal = 0.5 * s.x @ p.Q @ s.x + p.c @ s.x
    w = p.c + p.A.T @ s.lam
    dual = -0.5 * w @ np.linalg.solve(p.Q, w) - p.b @ s.lam
    assert dual == pytest.approx(primal, abs=1e-7 * (1 + abs(primal)))


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 4)), int(rng.integers(1, 6))
    A = np.vstack([rng.standard_normal((m, n)), np.eye(n), -np.eye(n)])
    b = np.concatenate([rng.uniform(-0.5, 2, m), 3 * np.ones(2 * n)])
    c = rng.standard_normal(n)
    ref = lp_by_vertices(c, A, b)
    r = solve_lp(c, A, b)
    if ref is None:
        assert r.status == qp_core.INFEASIBLE
    else:
        assert r.status == qp_core.OPTIMAL
        assert r.fun == pytest.approx(ref[0], abs=1e-8)


@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_degenerate_lp_that_stalls_dantzig_pricing(backend):
    # a welfare-selection region of the battery game; Dantzig pricing cycles on it
    import json
    from pathlib import Path
    from mpgne import kernels, polyhedra, serialization
    if backend == "compiled" and not kernels.compiled_available():
        pytest.skip("compiled extension not built")
    doc = json.loads((Path(__file__).parent / "data" / "stalling-chebyshev.json").read_text())
    P = serialization.polyhedron_from_dict(doc)
    # radius from scipy's HiGHS: -3.3103332e-06 (the set is empty)
    assert polyhedra.chebyshev(P, backend).radius == pytest.approx(-3.3103e-06, abs=1e-9)
