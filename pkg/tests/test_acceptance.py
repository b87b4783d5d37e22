"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
"acceptance criteria" section of the pytest summary.
"""

import time

import numpy as np
import pytest

from mpgne import cli, serialization
from mpgne.gne_solver import INFINITE, UNIQUE, solve_gnep
from mpgne.mpc_games import simulate_closed_loop

from conftest import FIXTURES, load_running_example, record_criterion

RUNNING = FIXTURES / "running-example.json"
TWO_MASS = FIXTURES / "two-mass.json"
BATTERY = FIXTURES / "battery.json"


def _grid(n=81, half=10.0):
    g = np.linspace(-half, half, n)
    return np.array([(a, b) for a in g for b in g])


def _same_region(P, member, pts, margin=1e-6):
    """Compare ``P`` with an indicator on grid points away from the boundary."""
    slack = np.max(pts @ P.C.T - P.d, axis=1)
    clear = np.abs(slack) > margin
    return np.array_equal((slack <= 0)[clear], member(pts)[clear])


def _laws_match(G_list, targets, tol):
    """Every target law matched by exactly one computed law (g assumed zero)."""
    used = set()
    for T in targets:
        hit = [k for k, G in enumerate(G_list) if k not in used and np.abs(G - T).max() <= tol]
        if not hit:
            return False
        used.add(hit[0])
    return len(used) == len(G_list)


# p = (p_c, p_1)
REGION_1 = lambda P: (P[:, 1] <= 0) & (P[:, 1] <= P[:, 0])
REGION_2 = lambda P: (P[:, 1] >= 0) & (P[:, 0] >= 0)
REGION_3 = lambda P: (P[:, 0] <= 0) & (P[:, 0] <= P[:, 1])


def test_criterion_1_running_example_regions():
    gp = load_running_example()
    t0 = time.perf_counter()
    sol = solve_gnep(gp, "none")
    secs = time.perf_counter() - t0
    pts = _grid()
    uniq = [r for r in sol.regions if r.kind == UNIQUE]
    fam = [r for r in sol.regions if r.kind == INFINITE]
    ok_count = len(sol.regions) == 3 and len(uniq) == 2 and len(fam) == 1
    ok_unique = ok_count and all(
        any(_same_region(r.region, m, pts) and np.abs(r.law.G - G).max() <= 1e-3
            and np.abs(r.law.g).max() <= 1e-3 for r in uniq)
        for m, G in ((REGION_1, [[0, -1], [0, 0]]), (REGION_2, np.zeros((2, 2)))))
    ok_family = False
    if ok_count:
        er = fam[0]
        ok_family = (_same_region(er.region, REGION_3, pts)
                     and er.V2.shape == (2, 1)
                     and np.abs(er.V2[:, 0] - [-0.707, 0.707]).max() <= 1e-3
                     and np.abs(er.law.G - [[-0.5, 0], [-0.5, 0]]).max() <= 1e-3
                     and np.abs(er.law.g).max() <= 1e-3)
    passed = ok_count and ok_unique and ok_family and secs < 1.0
    record_criterion(1, passed, f"{len(uniq)} unique + {len(fam)} family regions, "
                                f"laws/regions match={ok_unique and ok_family}, {secs:.2f} s")
    assert passed


def test_criterion_2_min_norm_split(running_solutions):
    sol = running_solutions["min_norm"]
    er = next(r for r in sol.regions if r.kind == INFINITE)
    G = [s.law.G for s in er.subregions]
    gs = [np.abs(s.law.g).max() for s in er.subregions]
    passed = (len(G) == 2 and max(gs) <= 1e-3
              and _laws_match(G, [np.array([[-0.5, 0], [-0.5, 0]]), np.array([[-0.5, -0.5], [-0.5, 0.5]])], 1e-3))
    record_criterion(2, passed, f"{len(G)} min-norm subregions, laws within 1e-3: {passed}")
    assert passed


def test_criterion_3_welfare_split(running_solutions):
    sol = running_solutions["welfare"]
    er = next(r for r in sol.regions if r.kind == INFINITE)
    G = [s.law.G for s in er.subregions]
    gs = [np.abs(s.law.g).max() for s in er.subregions]
    targets = [np.array([[-0.66, -0.33], [-0.33, 0.33]]), np.array([[0, 0], [-1, 0]])]
    passed = len(G) == 2 and max(gs) <= 1e-2 and _laws_match(G, targets, 1e-2)
    record_criterion(3, passed, f"{len(G)} welfare subregions, laws within 1e-2: {passed}")
    assert passed


TABLE_II = {
    "none": {"unique": 4, "infinite": 3, "total": 7},
    "min_norm": {"unique": 4, "min_norm": 19, "total": 19},
    "vgne": {"unique": 4, "infinite": 3, "vgne": 3, "total": 10},
    "welfare": {"unique": 4, "welfare": 19, "total": 19},
}


def test_criterion_4_two_mass_counts():
    gp, _ = serialization.load_problem(serialization.load_json(TWO_MASS))
    got, secs = {}, 0.0
    for sel in TABLE_II:
        t0 = time.perf_counter()
        got[sel] = solve_gnep(gp, sel).diagnostics["counts"]
        secs += time.perf_counter() - t0
    exact = all(got[s]["unique"] == 4 for s in TABLE_II) and all(
        got[s]["infinite"] == 3 for s in ("none", "vgne"))
    split_ok = all(abs(got[s][k] - v) <= 2 for s, want in TABLE_II.items() for k, v in want.items()
                   if k in ("min_norm", "welfare", "vgne"))
    passed = exact and split_ok and secs < 300
    summary = "; ".join(f"{s}: " + " ".join(f"{k}={got[s][k]}" for k in want) for s, want in TABLE_II.items())
    record_criterion(4, passed, f"{summary} (target unique=4 inf=3), {secs:.1f} s")
    assert passed


def test_criterion_5_two_mass_closed_loop():
    doc = serialization.load_json(TWO_MASS)
    gp, spec = serialization.load_problem(doc)
    sim = doc["simulation"]
    r = np.array([doc["params"]["r1"], doc["params"]["r2"]])
    details, passed = [], True
    for sel in ("min_norm", "vgne", "welfare"):
        sol = solve_gnep(gp, sel)
        tr = simulate_closed_loop(spec, sol, sim["x0"], sim["steps"], u_prev0=sim["u_prev0"])
        gap = float(np.min(tr.states[:, 2] - tr.states[:, 0]))
        err = np.linalg.norm(tr.states[:, [0, 2]] - r, axis=1)
        ratio = err[-1] / err[0]
        ok = tr.states.shape[0] == sim["steps"] + 1 and gap >= 0.5 - 1e-6 and ratio <= 0.05
        passed &= ok
        details.append(f"{sel}: min gap {gap:.6f}, final/initial error {ratio:.4f}")
    record_criterion(5, passed, "; ".join(details))
    assert passed


def test_criterion_6_battery_welfare_vs_vgne():
    doc = serialization.load_json(BATTERY)
    gp, spec = serialization.load_problem(doc)
    sim = doc["simulation"]
    assert spec.horizon == 5 and spec.exogenous["L_max"] == 9.0 and sim["steps"] == 14
    cost = {}
    for sel in ("vgne", "welfare"):
        sol = solve_gnep(gp, sel)
        cost[sel] = simulate_closed_loop(spec, sol, sim["x0"], sim["steps"]).cumulative_costs
    d = cost["welfare"] - cost["vgne"]
    conds = {"agent 2 higher": d[1] > 0, "|d1| < |d2|/5": abs(d[0]) < abs(d[1]) / 5, "total lower": d.sum() < 0}
    passed = all(conds.values())
    record_criterion(6, passed, f"delta cost welfare - vgne = ({d[0]:+.4f}, {d[1]:+.4f}), total {d.sum():+.4f}; "
                                + ", ".join(f"{k}: {v}" for k, v in conds.items()))
    assert passed


@pytest.fixture(scope="module")
def solution_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("solutions")
    out = []
    for problem in (RUNNING, TWO_MASS, BATTERY):
        for sel in ("none", "min-norm", "welfare", "vgne"):
            path = d / f"{problem.stem}-{sel}.json"
            assert cli.main(["solve", str(problem), "--selection", sel, "--out", str(path)]) == 0
            out.append((problem, sel, path))
    return out


def test_criterion_7_property_suite(solution_files, capsys):
    worst, fails = 0.0, []
    for problem, sel, path in solution_files:
        t0 = time.perf_counter()
        code = cli.main(["verify", str(problem), str(path)])
        secs = time.perf_counter() - t0
        worst = max(worst, secs)
        if code != 0 or secs >= 120:
            fails.append(f"{problem.stem}/{sel} (exit {code}, {secs:.0f} s)")
    out = capsys.readouterr().out
    with capsys.disabled():
        passed = not fails
        record_criterion(7, passed, f"{len(solution_files)} verify runs over suites a-f, slowest {worst:.1f} s"
                                    + (f"; failing: {', '.join(fails)}" if fails else ""))
    assert passed, out


def test_criterion_8_determinism(tmp_path):
    same = True
    for problem in (RUNNING, TWO_MASS):
        blobs = []
        for k, threads in enumerate(("1", "1", "4")):
            path = tmp_path / f"{problem.stem}-{k}.json"
            assert cli.main(["solve", str(problem), "--selection", "min-norm", "--threads", threads,
                             "--out", str(path)]) == 0
            blobs.append(path.read_bytes())
        same &= blobs[0] == blobs[1] == blobs[2]
    record_criterion(8, same, "repeated and 1- vs 4-thread solves byte-identical" if same else "outputs differ")
    assert same
