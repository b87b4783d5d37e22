"""``mpgne`` command line: solve, eval, simulate, verify.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 numerical failure.
"""

import argparse
import csv
from importlib import resources
import json
import logging
import sys

import jsonschema
import numpy as np

from . import evaluator, mpqp, polyhedra, qp_core, serialization, verify
from .gne_solver import GNEProblemError, SolveOptions, WelfareError, solve_gnep
from .mpc_games import GameSpecError, condense, simulate_closed_loop

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
SELECTION_NAMES = {"none": "none", "min-norm": "min_norm", "welfare": "welfare", "vgne": "vgne"}

log = logging.getLogger("mpgne")


class InputError(Exception):
    """Bad file, flag value or parameter; maps to exit code 2."""


def _schema(name):
    text = resources.files("mpgne").joinpath("schemas", name).read_text(encoding="utf-8")
    return json.loads(text)


def _validate(doc, schema_name, path):
    validator = jsonschema.Draft202012Validator(_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors[:5]:
            loc = "/" + "/".join(str(k) for k in e.absolute_path)
            lines.append(f"  at {loc}: {e.message}")
        raise InputError(f"{path}: schema validation failed\n" + "\n".join(lines))


def read_problem(path):
    """``(doc, GNEProblem, DynamicGameSpec or None)`` from a problem file."""
    doc = serialization.load_json(path)
    _validate(doc, "problem.schema.json", path)
    try:
        gp, spec = serialization.load_problem(doc)
    except (serialization.FileFormatError, GNEProblemError, GameSpecError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    return doc, gp, spec


def read_solution(path):
    doc = serialization.load_json(path)
    _validate(doc, "solution.schema.json", path)
    try:
        return serialization.solution_from_dict(doc)
    except (serialization.FileFormatError, GNEProblemError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _vector(text, name):
    try:
        return np.array([float(v) for v in text.replace(";", ",").split(",") if v.strip()])
    except ValueError as exc:
        raise InputError(f"{name}: expected comma-separated numbers, got {text!r}") from exc


def count_table(counts):
    """Region counts in the column order unique / inf-many / v-GNE / min norm / welfare / total."""
    cols = [("unique", "unique"), ("∞-many", "infinite"), ("v-GNE", "vgne"),
            ("min norm", "min_norm"), ("welfare", "welfare"), ("total", "total")]
    cells = ["-" if counts.get(k) is None else str(counts[k]) for _, k in cols]
    widths = [max(len(h), len(c)) for (h, _), c in zip(cols, cells)]
    head = " | ".join(h.rjust(w) for (h, _), w in zip(cols, widths))
    row = " | ".join(c.rjust(w) for c, w in zip(cells, widths))
    summary = " ".join(f"{h}={counts[k]}" for h, k in cols if counts.get(k) is not None)
    return f"{head}\n{row}\n{summary}"


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args):
    doc, gp, _ = read_problem(args.problem)
    fopts = doc.get("options", {})
    sel_name = args.selection or fopts.get("selection", "none")
    opts = SolveOptions(
        tol_rank=args.tol_rank if args.tol_rank is not None else fopts.get("tol_rank", 1e-9),
        eps_region=args.tol_region if args.tol_region is not None else fopts.get("tol_region", 1e-6),
        budget=fopts.get("budget", 2 ** 18),
        coverage_samples=fopts.get("coverage_samples", 500),
        threads=args.threads if args.threads is not None else fopts.get("threads", 0),
        shared_row_filter=not args.keep_invalid and fopts.get("shared_row_filter", True))
    if opts.tol_rank <= 0 or opts.eps_region <= 0:
        raise InputError("tolerances must be positive")
    sol = solve_gnep(gp, SELECTION_NAMES[sel_name], opts)
    if args.out:
        serialization.save_solution(sol, args.out)
    if args.dump_agent_maps:
        serialization.dump({"problem_hash": sol.problem_hash,
                            "agents": [m.to_dict() for m in sol.agent_maps]}, args.dump_agent_maps)
    print(count_table(sol.diagnostics["counts"]))
    fails = sol.diagnostics["failures"]
    if fails:
        print(f"warning: {len(fails)} combination(s) failed numerically, first: "
              f"{fails[0]['combination']}: {fails[0]['error']}", file=sys.stderr)
    if not args.out:
        sys.stdout.write(serialization.dumps(serialization.solution_to_dict(sol)))
    return EXIT_OK


def _policy(args):
    return evaluator.EvaluationPolicy(
        infinite_resolution="min_norm_y2" if args.resolution == "min-norm" else "stored_subregions",
        tol_membership=args.tol)


def cmd_eval(args):
    sol = read_solution(args.solution)
    policy = _policy(args)
    if args.p is not None:
        rows = [_vector(args.p, "--p")]
    else:
        try:
            with open(args.batch, newline="") as fh:
                rows = [np.array([float(v) for v in r]) for r in csv.reader(fh)
                        if r and not r[0].lstrip().startswith("#")]
        except ValueError as exc:
            raise InputError(f"{args.batch}: non-numeric entry ({exc})") from exc
    n_p = sol.problem.n_p
    for k, p in enumerate(rows):
        if p.size != n_p:
            raise InputError(f"row {k}: p has {p.size} entries, expected {n_p}")
    try:
        results = [evaluator.evaluate(sol, p, policy, return_info=True) for p in rows]
    except evaluator.OutsideParameterBox as exc:
        raise InputError(str(exc)) from exc
    if args.p is not None:
        r = results[0]
        print("x* = " + ", ".join(repr(float(v)) for v in r.x))
        print(f"region = {r.region}" + ("" if r.subregion is None else f"  subregion = {r.subregion}"))
        if r.y2 is not None:
            print("y2 = " + ", ".join(repr(float(v)) for v in r.y2))
        return EXIT_OK
    n_x = sol.problem.n_x
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(n_x)] + ["region", "subregion"])
        for r in results:
            w.writerow([repr(float(v)) for v in r.x] + [r.region, "" if r.subregion is None else r.subregion])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_simulate(args):
    doc, gp, spec = read_problem(args.game)
    if spec is None:
        raise InputError(f"{args.game}: simulation needs a dynamic_game problem")
    sol = read_solution(args.solution)
    if sol.problem_hash != gp.problem_hash():
        raise InputError("solution was computed for a different problem (hash mismatch)")
    sim = doc.get("simulation", {})
    x0 = _vector(args.x0, "--x0") if args.x0 else serialization.decode_array(sim.get("x0"))
    if x0 is None:
        raise InputError("no initial state: pass --x0 or add simulation.x0 to the game file")
    if x0.size != spec.n:
        raise InputError(f"--x0 has {x0.size} entries, the state has {spec.n}")
    steps = args.steps if args.steps is not None else sim.get("steps", 50)
    if steps < 0:
        raise InputError("--steps must be nonnegative")
    u_prev0 = serialization.decode_array(sim.get("u_prev0"))
    exo = {k: np.asarray(v, dtype=float) for k, v in (sim.get("exogenous") or {}).items()}
    try:
        traj = simulate_closed_loop(spec, sol, x0, steps, _policy(args), u_prev0=u_prev0,
                                    exogenous=exo or None, gp=gp)
    except evaluator.OutsideParameterBox as exc:
        raise InputError(str(exc)) from exc
    traj.to_csv(args.out)
    costs = traj.cumulative_costs
    print(f"{steps} steps written to {args.out}; cumulative costs: "
          + ", ".join(f"agent {i}: {c:.6g}" for i, c in enumerate(costs)))
    return EXIT_OK


def cmd_verify(args):
    _, gp, _ = read_problem(args.problem)
    sol = read_solution(args.solution)
    if sol.problem_hash != gp.problem_hash():
        raise InputError("solution was computed for a different problem (hash mismatch)")
    ok, results, secs = verify.run_all(sol, n_samples=args.samples, seed=args.seed,
                                       law_samples=args.law_samples, invalid_limit=args.invalid_limit)
    for r in results:
        print(r.line())
        for f in r.failures[:3]:
            print("    " + json.dumps(f, default=float))
    print(f"{'all checks passed' if ok else 'verification FAILED'} in {secs:.2f} s")
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="mpgne", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute an explicit GNE solution")
    s.add_argument("problem")
    s.add_argument("--selection", choices=sorted(SELECTION_NAMES))
    s.add_argument("--tol-rank", type=float)
    s.add_argument("--tol-region", type=float, help="Chebyshev radius threshold")
    s.add_argument("--threads", type=int, help="worker threads (default: MPGNE_THREADS or 1)")
    s.add_argument("--out", help="solution file (default: print to stdout)")
    s.add_argument("--dump-agent-maps", metavar="PATH", help="also write each agent's mpQP map")
    s.add_argument("--keep-invalid", action="store_true",
                   help="assemble combinations whose shared rows are active for some agents only")
    s.set_defaults(func=cmd_solve)

    def add_policy(p):
        p.add_argument("--resolution", choices=["stored", "min-norm"], default="stored",
                       help="how to pick a member of an infinite family")
        p.add_argument("--tol", type=float, default=1e-9, help="membership tolerance")

    e = sub.add_parser("eval", help="evaluate a solution at parameter values")
    e.add_argument("solution")
    g = e.add_mutually_exclusive_group(required=True)
    g.add_argument("--p", help='comma-separated parameter vector, e.g. "1,-1" (use --p=-2,3 when it starts with a minus)')
    g.add_argument("--batch", help="CSV file with one parameter vector per row")
    e.add_argument("--out", help="CSV output for --batch (default stdout)")
    add_policy(e)
    e.set_defaults(func=cmd_eval)

    m = sub.add_parser("simulate", help="closed-loop simulation of a dynamic game")
    m.add_argument("game")
    m.add_argument("solution")
    m.add_argument("--x0", help="initial state (default: simulation.x0 of the game file)")
    m.add_argument("--steps", type=int)
    m.add_argument("--out", required=True, help="trajectory CSV")
    add_policy(m)
    m.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run the invariant suites on a solution")
    v.add_argument("problem")
    v.add_argument("solution")
    v.add_argument("--samples", type=int, default=50, help="samples per region")
    v.add_argument("--law-samples", type=int, default=200, help="samples per agent map")
    v.add_argument("--invalid-limit", type=int, default=500,
                   help="maximum number of rejected combinations to check")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, serialization.FileFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (qp_core.SolverError, mpqp.MpqpError, polyhedra.PolyhedronError, WelfareError,
            evaluator.EvaluationError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
