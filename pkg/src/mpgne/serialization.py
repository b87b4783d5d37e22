"""Canonical JSON for problems, games and explicit solutions.

Floats are written with 17 significant digits (``%.17g``) so that
``load -> save`` reproduces a file byte for byte.  Arrays are stored as
``{"shape": [...], "data": [...]}`` in row-major order; hand-written
problem files may also use plain (nested) lists.  Negative zero is written
as ``0``.  Non-finite values are written as the strings ``"inf"``,
``"-inf"`` and ``"nan"``.
"""

import json
import math
import warnings

import numpy as np

from .gne_solver import (INFINITE, Combination, EquilibriumRegion, ExplicitGNESolution,
                         GNEProblem, Subregion)
from .mpqp import AffineFunction
from .polyhedra import Polyhedron

SOLUTION_FORMAT = "mpgne-solution"
FORMAT_VERSION = 1
_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


class FileFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# canonical writer


def format_float(v):
    v = float(v)
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    if v == 0.0:
        return "0"
    return "%.17g" % v


def encode_array(a):
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.reshape(-1).tolist()}


def _is_flat(seq):
    return all(not isinstance(v, (dict, list, tuple)) for v in seq)


def _write(obj, level, out):
    pad = " " * level
    if isinstance(obj, np.ndarray):
        obj = encode_array(obj)
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for k, (key, val) in enumerate(items):
            out.append(f"{pad} {json.dumps(str(key))}: ")
            _write(val, level + 1, out)
            out.append(",\n" if k + 1 < len(items) else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if _is_flat(obj):
            parts = []
            for v in obj:
                sub = []
                _write(v, 0, sub)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for k, val in enumerate(obj):
            out.append(pad + " ")
            _write(val, level + 1, out)
            out.append(",\n" if k + 1 < len(obj) else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    """Canonical JSON text (trailing newline included)."""
    out = []
    _write(obj, 0, out)
    return "".join(out) + "\n"


def dump(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") \
            from exc


# ---------------------------------------------------------------------------
# readers


def _num(v):
    if isinstance(v, str):
        if v not in _NONFINITE:
            raise FileFormatError(f"not a number: {v!r}")
        return _NONFINITE[v]
    return float(v)


def decode_array(obj, shape=None, name="array"):
    """Array from ``{"shape", "data"}``, a nested list or a scalar."""
    if obj is None:
        return None
    if isinstance(obj, dict):
        if "shape" not in obj or "data" not in obj:
            raise FileFormatError(f"{name}: array objects need 'shape' and 'data'")
        data = np.array([_num(v) for v in obj["data"]], dtype=float)
        want = int(np.prod(obj["shape"])) if obj["shape"] else 1
        if data.size != want:
            raise FileFormatError(f"{name}: shape {obj['shape']} needs {want} entries, got {data.size}")
        a = data.reshape(obj["shape"])
    else:
        try:
            a = np.array(obj, dtype=float)
        except (TypeError, ValueError) as exc:
            raise FileFormatError(f"{name}: not a rectangular numeric array") from exc
    if shape is not None:
        try:
            a = a.reshape(shape)
        except ValueError as exc:
            raise FileFormatError(f"{name}: expected shape {tuple(shape)}, got {a.shape}") from exc
    return a


def polyhedron_to_dict(P):
    return None if P is None else {"vars": list(P.var_labels), "C": encode_array(P.C),
                                   "d": encode_array(P.d)}


def polyhedron_from_dict(d):
    if d is None:
        return None
    labels = list(d["vars"])
    rhs = decode_array(d["d"], (-1,), "d")
    return Polyhedron(decode_array(d["C"], (rhs.size, len(labels)), "C"), rhs, labels)


def affine_to_dict(f):
    return None if f is None else {"G": encode_array(f.G), "g": encode_array(f.g)}


def affine_from_dict(d):
    if d is None:
        return None
    g = decode_array(d["g"], (-1,), "g")
    return AffineFunction(decode_array(d["G"], (g.size, -1), "G"), g)


# ---------------------------------------------------------------------------
# problems


def problem_to_dict(gp: GNEProblem):
    """Canonical ``gnep`` problem document (parameter set stored as a polyhedron)."""
    agents = []
    for i in range(gp.N):
        agents.append({"size": gp.sizes[i], "Q": encode_array(gp.Q[i]), "c": encode_array(gp.c[i]),
                       "F": encode_array(gp.F[i])})
    return {
        "kind": "gnep",
        "name": gp.name,
        "agents": agents,
        "constraints": {"A": encode_array(gp.A), "b": encode_array(gp.b), "S": encode_array(gp.S),
                        "coupling_rows": [int(r) for r in gp.coupling_rows]},
        "parameters": {"labels": list(gp.param_labels), "set": polyhedron_to_dict(gp.p_box)},
        "x_bounds": {"lower": encode_array(gp.x_min), "upper": encode_array(gp.x_max)},
    }


def problem_from_dict(doc):
    """``GNEProblem`` from a ``gnep`` document (schema checks are done by the caller)."""
    agents = doc["agents"]
    if not agents:
        raise FileFormatError("agents: at least one agent is required")
    sizes = [int(a["size"]) for a in agents]
    nx = sum(sizes)
    par = doc["parameters"]
    if "set" in par:
        p_box = polyhedron_from_dict(par["set"])
        labels = par.get("labels") or list(p_box.var_labels)
    else:
        lo = decode_array(par["lower"], (-1,), "parameters.lower")
        hi = decode_array(par["upper"], (lo.size,), "parameters.upper")
        if np.any(lo >= hi):
            raise FileFormatError("parameters: lower must be strictly below upper")
        labels = par.get("labels") or [f"p{k}" for k in range(lo.size)]
        if len(labels) != lo.size:
            raise FileFormatError("parameters.labels: length does not match the bounds")
        p_box = Polyhedron.box(lo, hi, labels)
    npar = p_box.dim
    con = doc.get("constraints") or {}
    A = decode_array(con.get("A", np.zeros((0, nx))), (-1, nx), "constraints.A")
    nA = A.shape[0]
    b = decode_array(con.get("b", np.zeros(0)), (nA,), "constraints.b")
    S = decode_array(con.get("S"), (nA, npar), "constraints.S") if "S" in con else np.zeros((nA, npar))
    xb = doc.get("x_bounds") or {}
    x_min = decode_array(xb.get("lower", -1e4 * np.ones(nx)), (nx,), "x_bounds.lower")
    x_max = decode_array(xb.get("upper", 1e4 * np.ones(nx)), (nx,), "x_bounds.upper")
    Q, c, F = [], [], []
    for i, a in enumerate(agents):
        Q.append(decode_array(a["Q"], (nx, nx), f"agents[{i}].Q"))
        c.append(decode_array(a.get("c", np.zeros(nx)), (nx,), f"agents[{i}].c"))
        F.append(decode_array(a.get("F", np.zeros((nx, npar))), (nx, npar), f"agents[{i}].F"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return GNEProblem(sizes, Q, c, F, A, b, S, p_box, x_min, x_max, tuple(labels),
                          doc.get("name", "gnep"), tuple(con.get("coupling_rows", ())))


# ---------------------------------------------------------------------------
# dynamic games


def _stage_cost(d):
    from .mpc_games import StageCost
    keys = ("Q", "R", "R_delta", "Fx", "fx", "Fu", "fu", "Pq", "pl")
    kw = {k: decode_array(d.get(k), name=k) for k in keys}
    return StageCost(const=float(d.get("const", 0.0)), **kw)


def _constraint(d):
    from .mpc_games import LinearConstraint
    if d is None:
        return None
    return LinearConstraint(decode_array(d["C"], name="C"), decode_array(d["c"], name="c"),
                            decode_array(d.get("S"), name="S"))


def game_from_dict(doc):
    """``DynamicGameSpec`` from a ``dynamic_game`` document.

    Either ``{"generator": "two_mass" | "battery", "params": {...}}`` or an
    explicit ``"spec"`` whose keys mirror the fields of ``DynamicGameSpec``.
    """
    from . import mpc_games
    if "generator" in doc:
        gens = {"two_mass": mpc_games.two_mass_game, "battery": mpc_games.battery_game}
        gen = gens.get(doc["generator"])
        if gen is None:
            raise FileFormatError(f"generator: unknown game {doc['generator']!r} (known: {sorted(gens)})")
        try:
            return gen(**(doc.get("params") or {}))
        except mpc_games.GameSpecError as exc:
            raise FileFormatError(f"params: {exc}") from exc
    s = doc["spec"]
    try:
        return mpc_games.DynamicGameSpec(
            A=decode_array(s["A"], name="A"), B=[decode_array(b, name="B") for b in s["B"]],
            horizon=int(s["horizon"]), costs=[_stage_cost(c) for c in s["costs"]],
            param_layout=[(k, int(n)) for k, n in s["param_layout"]],
            W_d=decode_array(s.get("W_d"), name="W_d"),
            local_input=[_constraint(c) for c in s["local_input"]] if s.get("local_input") else None,
            coupled_input=_constraint(s.get("coupled_input")),
            coupled_state=_constraint(s.get("coupled_state")),
            state_steps=tuple(s["state_steps"]) if "state_steps" in s else None,
            p_min=decode_array(s.get("p_min"), name="p_min"),
            p_max=decode_array(s.get("p_max"), name="p_max"),
            u_min=decode_array(s.get("u_min"), name="u_min"),
            u_max=decode_array(s.get("u_max"), name="u_max"),
            name=s.get("name", "game"),
            exogenous={k: np.asarray(v, dtype=float) for k, v in (s.get("exogenous") or {}).items()})
    except mpc_games.GameSpecError as exc:
        raise FileFormatError(f"spec: {exc}") from exc


def load_problem(doc):
    """``(GNEProblem, DynamicGameSpec or None)`` from a problem document."""
    from .mpc_games import condense
    if doc["kind"] == "gnep":
        return problem_from_dict(doc), None
    spec = game_from_dict(doc)
    return condense(spec), spec


# ---------------------------------------------------------------------------
# solutions


def _subregion_to_dict(s: Subregion):
    return {"label": s.label, "active_set": [int(k) for k in s.active_set],
            "region": polyhedron_to_dict(s.region), "law": affine_to_dict(s.law),
            "y2_law": affine_to_dict(s.y2_law)}


def _subregion_from_dict(d):
    return Subregion(polyhedron_from_dict(d["region"]), affine_from_dict(d["law"]),
                     affine_from_dict(d["y2_law"]), tuple(d["active_set"]), d["label"])


_REGION_ARRAYS = ("M_x", "M_p", "M_1", "U1", "U2", "V1", "V2", "sigma1")


def region_to_dict(er: EquilibriumRegion):
    out = {"kind": er.kind,
           "combination": {"regions": [int(k) for k in er.combination.region_indices],
                           "active_sets": [[int(r) for r in a] for a in er.combination.active_sets]},
           "law": affine_to_dict(er.law),
           "region": polyhedron_to_dict(er.region),
           "lifted": polyhedron_to_dict(er.lifted),
           "radius": float(er.radius)}
    for name in _REGION_ARRAYS:
        v = getattr(er, name)
        out[name] = None if v is None else encode_array(v)
    out["subregions"] = [_subregion_to_dict(s) for s in er.subregions]
    out["residual_subregions"] = [_subregion_to_dict(s) for s in er.residual_subregions]
    return out


def region_from_dict(d):
    comb = Combination(tuple(d["combination"]["regions"]),
                       tuple(tuple(a) for a in d["combination"]["active_sets"]))
    arrays = {name: decode_array(d.get(name), name=name) for name in _REGION_ARRAYS}
    if arrays["M_1"] is not None:
        arrays["M_1"] = arrays["M_1"].reshape(-1)
    if arrays["sigma1"] is not None:
        arrays["sigma1"] = arrays["sigma1"].reshape(-1)
    if d["kind"] not in ("unique", INFINITE):
        raise FileFormatError(f"unknown region kind {d['kind']!r}")
    return EquilibriumRegion(
        kind=d["kind"], combination=comb, law=affine_from_dict(d["law"]),
        region=polyhedron_from_dict(d["region"]), lifted=polyhedron_from_dict(d.get("lifted")),
        subregions=[_subregion_from_dict(s) for s in d.get("subregions", [])],
        residual_subregions=[_subregion_from_dict(s) for s in d.get("residual_subregions", [])],
        radius=float(d.get("radius", 0.0)), **arrays)


def solution_to_dict(sol: ExplicitGNESolution):
    return {"format": SOLUTION_FORMAT, "version": FORMAT_VERSION,
            "problem_hash": sol.problem_hash, "selection": sol.selection,
            "diagnostics": sol.diagnostics,
            "problem": problem_to_dict(sol.problem),
            "regions": [region_to_dict(r) for r in sol.regions]}


def solution_from_dict(doc):
    if doc.get("format") != SOLUTION_FORMAT:
        raise FileFormatError(f"not a solution file (format={doc.get('format')!r})")
    if doc.get("version") != FORMAT_VERSION:
        raise FileFormatError(f"unsupported solution version {doc.get('version')!r}")
    gp = problem_from_dict(doc["problem"])
    return ExplicitGNESolution(gp, [region_from_dict(r) for r in doc["regions"]], doc["selection"],
                               doc["problem_hash"], doc.get("diagnostics", {}))


def save_solution(sol, path):
    dump(solution_to_dict(sol), path)


def load_solution(path):
    return solution_from_dict(load_json(path))
