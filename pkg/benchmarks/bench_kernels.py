"""Compare the compiled and pure-Python simplex kernels.

Two workloads:

* Chebyshev-centre LPs of random bounded polyhedra of several sizes,
* complete explicit solves (running example, two-mass game) with each backend.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.  Results are
checked for agreement between the backends before timings are reported.
"""

import argparse
from pathlib import Path
import time
import warnings

import numpy as np

from mpgne import kernels, polyhedra, serialization
from mpgne.gne_solver import SolveOptions, solve_gnep
from mpgne.mpc_games import condense, two_mass_game

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def random_polyhedron(rng, n, m):
    C = rng.standard_normal((m, n))
    d = rng.uniform(0.5, 2.0, m)
    box = polyhedra.Polyhedron.box(-5 * np.ones(n), 5 * np.ones(n))
    return polyhedra.Polyhedron(np.vstack([C, box.C]), np.concatenate([d, box.d]))


def time_call(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_lps(repeat, backends):
    rng = np.random.default_rng(0)
    rows = []
    for n, m in [(2, 10), (5, 40), (10, 100), (20, 200)]:
        polys = [random_polyhedron(rng, n, m) for _ in range(20)]
        res = {}
        for b in backends:
            t, radii = time_call(lambda: [polyhedra.chebyshev(P, b).radius for P in polys], repeat)
            res[b] = (t, np.array(radii))
        if len(backends) == 2:
            diff = np.abs(res[backends[0]][1] - res[backends[1]][1]).max()
            assert diff < 1e-8, f"backends disagree on Chebyshev radii (n={n}, m={m}): {diff}"
        rows.append((f"20 Chebyshev LPs n={n} m={m + 2 * n}", {b: res[b][0] for b in backends}))
    return rows


def _compare(a, b):
    """Laws and regions must match exactly; Chebyshev radii may differ in the last bits."""
    da, db = serialization.solution_to_dict(a), serialization.solution_to_dict(b)
    ra = np.array([r.pop("radius") for r in da["regions"]])
    rb = np.array([r.pop("radius") for r in db["regions"]])
    if serialization.dumps(da) != serialization.dumps(db) or ra.shape != rb.shape:
        return " (SOLUTIONS DIFFER)"
    rel = np.abs(ra - rb).max(initial=0.0) / max(1.0, np.abs(ra).max(initial=0.0))
    return "" if rel == 0 else f" (radii differ by {rel:.0e})"


def bench_solves(repeat, backends):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        running, _ = serialization.load_problem(serialization.load_json(FIXTURES / "running-example.json"))
        twomass = condense(two_mass_game())
    rows = []
    for name, gp, sel in [("running example, min-norm", running, "min_norm"),
                          ("two-mass game, min-norm", twomass, "min_norm")]:
        res = {}
        for b in backends:
            t, sol = time_call(lambda: solve_gnep(gp, sel, SolveOptions(backend=b)), repeat)
            res[b] = (t, sol)
        if len(backends) == 2:
            name += _compare(res[backends[0]][1], res[backends[1]][1])
        rows.append((name, {b: res[b][0] for b in backends}))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = ["compiled", "python"] if kernels.compiled_available() else ["python"]
    if len(backends) == 1:
        print("compiled kernel not built; timing the Python fallback only")
    rows = bench_lps(args.repeat, backends) + bench_solves(args.repeat, backends)
    width = max(len(r[0]) for r in rows)
    head = f"{'workload':<{width}} " + " ".join(f"{b:>10}" for b in backends)
    if len(backends) == 2:
        head += f" {'speedup':>8}"
    print(head)
    for name, t in rows:
        line = f"{name:<{width}} " + " ".join(f"{t[b] * 1e3:>8.1f}ms" for b in backends)
        if len(backends) == 2:
            line += f" {t['python'] / t['compiled']:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
