import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpgne import evaluator, polyhedra
from mpgne.evaluator import EvaluationPolicy, equilibrium_residual, evaluate, locate
from mpgne.gne_solver import INFINITE, UNIQUE

ONLINE = EvaluationPolicy(infinite_resolution="min_norm_y2")


def kinds(sol, idx):
    return [sol.regions[k].kind for k in idx]


def test_policy_validation():
    with pytest.raises(ValueError):
        EvaluationPolicy(tol_membership=-1.0)
    with pytest.raises(ValueError):
        EvaluationPolicy(infinite_resolution="closest")


def test_locate_examples(running_solutions):
    sol = running_solutions["none"]
    # p = (p_c, p_1)
    hits = locate(sol, [1, -1])
    assert len(hits) == 1
    np.testing.assert_allclose(sol.regions[hits[0]].law([1, -1]), [1, 0])
    assert len(locate(sol, [0, 0])) == 3
    hits = locate(sol, [-1, 2])
    assert kinds(sol, hits) == [INFINITE]


def test_locate_outside_box(running_solutions):
    with pytest.raises(evaluator.OutsideParameterBox):
        locate(running_solutions["none"], [11, 0])
    with pytest.raises(evaluator.EvaluationError):
        locate(running_solutions["none"], [1, 2, 3])


def test_locate_without_projection(running_solutions):
    sol = running_solutions["none"]
    import copy
    implicit = copy.copy(sol)
    implicit.regions = [copy.copy(r) for r in sol.regions]
    for r in implicit.regions:
        if r.kind == INFINITE:
            r.region = None
    rng = np.random.default_rng(0)
    for p in rng.uniform(-10, 10, (200, 2)):
        assert locate(sol, p) == locate(implicit, p)


def test_evaluate_examples(running_solutions):
    np.testing.assert_allclose(evaluate(running_solutions["min_norm"], [-2, 1]), [1, 1], atol=1e-12)
    np.testing.assert_allclose(evaluate(running_solutions["none"], [1, 2]), [0, 0], atol=1e-12)
    np.testing.assert_allclose(evaluate(running_solutions["min_norm"], [1, -1]), [1, 0], atol=1e-12)


def test_online_min_norm_resolution(running_solutions):
    sol = running_solutions["none"]
    p = np.array([-2.0, 3.0])
    info = evaluate(sol, p, ONLINE, return_info=True)
    assert sol.regions[info.region].kind == INFINITE
    # value frozen from the grid oracle below: the slice contains y2 = 0
    np.testing.assert_allclose(info.x, [1, 1], atol=1e-9)
    er = sol.regions[info.region]
    grid = np.linspace(-15, 15, 300001)
    Cy, dy = er.lifted.C[:, 2:], er.lifted.d - er.lifted.C[:, :2] @ p
    ok = grid[np.all(np.outer(grid, Cy[:, 0]) <= dy, axis=1)]
    y_ref = ok[np.argmin(np.abs(ok))]
    np.testing.assert_allclose(info.y2, [y_ref], atol=1e-4)


def test_stored_and_online_agree_for_min_norm(running_solutions):
    sol = running_solutions["min_norm"]
    rng = np.random.default_rng(1)
    for p in rng.uniform(-10, 10, (200, 2)):
        a = evaluate(sol, p)
        b = evaluate(sol, p, ONLINE)
        np.testing.assert_allclose(a, b, atol=1e-7)


def test_no_region_error():
    from mpgne.gne_solver import ExplicitGNESolution
    from conftest import load_running_example
    gp = load_running_example()
    empty = ExplicitGNESolution(gp, [], "none", gp.problem_hash(), {})
    with pytest.raises(evaluator.EvaluationError, match="no critical region"):
        evaluate(empty, [0, 0])


def test_residual_examples(running):
    assert equilibrium_residual(running, [1, -1], [1, 0]) <= 1e-7
    # agent 1's best response at x_2 = 0, p_1 = -1 is x_1 = 1
    assert equilibrium_residual(running, [1, -1], [0, 0]) >= 0.5


def test_residual_infeasible_agent(running):
    # x_2 < 0 violates a row that only involves agent 2's block: agent 1 sees an infeasible problem
    r, details = equilibrium_residual(running, [0, 0], [1, -1], return_details=True)
    assert r == np.inf
    assert details[0]["status"] == "infeasible"


def test_evaluate_is_bit_deterministic(running_solutions):
    rng = np.random.default_rng(2)
    for p in rng.uniform(-10, 10, (50, 2)):
        for sol in running_solutions.values():
            assert evaluate(sol, p).tobytes() == evaluate(sol, p).tobytes()


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["none", "min_norm", "welfare", "vgne"]),
       st.floats(-10, 10), st.floats(-10, 10))
def test_every_located_point_is_an_equilibrium(running_solutions, selection, pc, p1):
    sol = running_solutions[selection]
    p = np.array([pc, p1])
    if not locate(sol, p):
        return
    for policy in (evaluator.DEFAULT_POLICY, ONLINE):
        x = evaluate(sol, p, policy)
        assert equilibrium_residual(sol.problem, p, x) <= 1e-6


def test_every_region_sample_is_an_equilibrium(running_solutions, two_mass_solutions):
    rng = np.random.default_rng(3)
    for sol in list(running_solutions.values()) + [two_mass_solutions["min_norm"]]:
        for er in sol.regions:
            pts = polyhedra.sample_uniform(er.region, 50, rng)
            for p in pts:
                if er.kind == UNIQUE:
                    x = er.law(p)
                else:
                    x = er.x_of(p, evaluator.min_norm_y2(er, p))
                assert equilibrium_residual(sol.problem, p, x) <= 1e-6
