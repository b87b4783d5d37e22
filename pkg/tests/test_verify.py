import copy
from dataclasses import replace

import numpy as np

from mpgne import verify
from mpgne.gne_solver import best_responses, coupling_groups, enumerate_combinations, is_valid


def test_all_suites_pass_on_running_example(running_solutions):
    for sel, sol in running_solutions.items():
        ok, results, _ = verify.run_all(sol, n_samples=30)
        assert ok, (sel, [r.line() for r in results if not r.passed])
        assert [r.name[0] for r in results] == list("abcdef")


def test_rejected_running_combinations_are_empty(running):
    maps = best_responses(running)
    groups = coupling_groups(running)
    rejected = [c for c in enumerate_combinations(maps, running, include_invalid=True)
                if not is_valid(c.active_sets, running, groups)]
    assert len(rejected) == 3
    for comb in rejected:
        interior, closure = verify.combination_margins(comb, maps, running)
        assert interior <= 1e-9
        # the closed systems are feasible: their points sit on region boundaries
        assert closure


def test_residual_suite_flags_a_shifted_law(running_solutions):
    sol = copy.deepcopy(running_solutions["none"])
    k = next(i for i, r in enumerate(sol.regions) if r.kind == "unique")
    law = sol.regions[k].law
    sol.regions[k].law = replace(law, g=law.g + 0.25)
    res = verify.check_residuals(sol, n_samples=10)
    assert not res.passed and res.worst >= 0.1
    assert all(f["region"] == k for f in res.failures)


def test_svd_suite_flags_a_broken_basis(running_solutions):
    sol = copy.deepcopy(running_solutions["none"])
    er = next(r for r in sol.regions if r.kind == "infinite")
    er.V2 = er.V2 + 1e-3
    assert not verify.check_svd(sol).passed


def test_min_norm_suite_flags_a_non_minimal_selection(running_solutions):
    sol = copy.deepcopy(running_solutions["min_norm"])
    er = next(r for r in sol.regions if r.kind == "infinite")
    for s in er.subregions:
        s.y2_law = replace(s.y2_law, g=s.y2_law.g + 0.5)
        s.law = replace(s.law, g=s.law.g + er.V2 @ np.full(er.V2.shape[1], 0.5))
    assert not verify.check_min_norm(sol).passed


def test_consensus_on_two_mass_vgne(two_mass_solutions):
    res = verify.check_consensus(two_mass_solutions["vgne"], n_samples=20)
    assert res.passed and res.checked > 0 and res.worst <= 1e-6
