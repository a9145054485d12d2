"""Command-line front end: JSON scenarios in, reports and tables out.

Commands: reduce, solve-hj, verify, reconstruct, simulate, integrate,
equilibrium.  A scenario is a JSON document (schema below, enforced
with jsonschema) naming the system, its symmetry, and per-command
settings; outputs are JSON reports and CSV series written atomically.

Exit codes: 0 success; 1 a measured residual exceeded --tol; 2 invalid
scenario or usage; 3 numeric failure (solver divergence, domain error,
violated precondition).  Identical scenario + seed + flags give
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from importlib import resources

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from .expr import DomainError, ParseError, parse as parse_expr
from .hj import (GeneratingFunction, OneForm, PreconditionError, SolveError,
                 check_complete, cyclic_ansatz, cyclic_complete_solution,
                 mesh_grid, quadrature_complete_solution, solve_reduced_1d)
from .integrators import run_scheme, transform_to_equilibrium
from .phase_space import (HamiltonianSystem, PhasePoint, Trajectory,
                          flow_reference)
from .reconstruction import (integrate_projected, lift_report, lift_solution,
                             reconstruct_trajectory)
from .reduction import (build_chart, magnetic_lagrangian_residual,
                        magnetic_term, reduced_hamiltonian)
from .symmetry import TranslationAction

__all__ = ["main", "load_scenario", "emit_trajectory", "read_trajectory",
           "SCENARIO_SCHEMA", "ScenarioError", "ResidualFailure"]

EXIT_OK = 0
EXIT_RESIDUAL = 1
EXIT_SCENARIO = 2
EXIT_NUMERIC = 3


class ScenarioError(Exception):
    """Scenario file invalid or inapplicable to the requested command."""


class ResidualFailure(Exception):
    """A measured residual exceeded the requested tolerance."""


# ---------------------------------------------------------------------------
# Scenario schema.

_RANGE = {"type": "array", "items": {"type": "number"},
          "minItems": 2, "maxItems": 2}
_NUM_ARRAY = {"type": "array", "items": {"type": "number"}}
_STR_ARRAY = {"type": "array", "items": {"type": "string"}, "minItems": 1}
_MATRIX = {"type": "array", "items": _NUM_ARRAY, "minItems": 1}
_COUNTS = {"anyOf": [{"type": "integer", "minimum": 2},
                     {"type": "array", "items":
                      {"type": "integer", "minimum": 1}, "minItems": 1}]}
_CHART_GRID = {
    "type": "object",
    "properties": {"y": {"type": "array", "items": _RANGE},
                   "x": {"type": "array", "items": _RANGE},
                   "counts": _COUNTS},
    "additionalProperties": False,
}
_BOUNDS_GRID = {
    "type": "object",
    "properties": {"bounds": {"type": "array", "items": _RANGE,
                              "minItems": 1},
                   "counts": _COUNTS},
    "required": ["bounds"],
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "name": {"type": "string", "minLength": 1,
                 "pattern": "^[A-Za-z0-9_.-]+$"},
        "coords": _STR_ARRAY,
        "momenta": _STR_ARRAY,
        "hamiltonian": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
        "energy": {"type": "number"},
        "t_end": {"type": "number"},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "action": _MATRIX,
        "mu": _NUM_ARRAY,
        "z0": {
            "type": "object",
            "properties": {"q": _NUM_ARRAY, "p": _NUM_ARRAY},
            "required": ["q", "p"],
            "additionalProperties": False,
        },
        "chart": {
            "type": "object",
            "properties": {"y_block": _MATRIX, "x_block": _MATRIX,
                           "horizontal": _MATRIX, "generators": _MATRIX},
            "additionalProperties": False,
        },
        "solve": {
            "type": "object",
            "properties": {"range": _RANGE, "energy": {"type": "number"},
                           "branch": {"enum": [1, -1]},
                           "n_nodes": {"type": "integer", "minimum": 3},
                           "cyclic": _STR_ARRAY, "beta": _NUM_ARRAY},
            "required": ["range"],
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {"grid": _CHART_GRID},
            "additionalProperties": False,
        },
        "reconstruct": {
            "type": "object",
            "properties": {"y0": _NUM_ARRAY, "g0": _NUM_ARRAY,
                           "t_end": {"type": "number"},
                           "dt": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["y0"],
            "additionalProperties": False,
        },
        "integrator": {
            "type": "object",
            "properties": {"kind": {"enum": ["typeI", "typeII"]},
                           "s": {"type": "string"},
                           "params": _STR_ARRAY,
                           "tau": {"type": "number", "exclusiveMinimum": 0},
                           "n_steps": {"type": "integer", "minimum": 1}},
            "required": ["kind", "s", "params", "tau", "n_steps"],
            "additionalProperties": False,
        },
        "generating_function": {
            "type": "object",
            "properties": {"kind": {"enum": ["typeI", "typeII"]},
                           "s": {"type": "string"},
                           "params": _STR_ARRAY},
            "required": ["kind", "s", "params"],
            "additionalProperties": False,
        },
        "complete_solution": {
            "type": "object",
            "properties": {"method": {"enum": ["quadrature"]},
                           "q_range": _RANGE,
                           "branch": {"enum": [1, -1]},
                           "param": {"type": "string"},
                           "n_quad": {"type": "integer", "minimum": 8}},
            "required": ["q_range"],
            "additionalProperties": False,
        },
        "magnetic": {
            "type": "object",
            "properties": {"alpha_mu": _STR_ARRAY,
                           "gamma_tilde": _STR_ARRAY,
                           "grid": _BOUNDS_GRID},
            "required": ["alpha_mu"],
            "additionalProperties": False,
        },
    },
    "required": ["name", "coords", "hamiltonian"],
    "additionalProperties": False,
}

_VALIDATOR = Draft202012Validator(SCENARIO_SCHEMA)


def load_scenario(path_or_name):
    """Load a scenario by file path or bundled name, schema-checked."""
    if os.path.exists(path_or_name):
        with open(path_or_name, "r", encoding="utf-8") as f:
            text = f.read()
    else:
        fname = path_or_name if path_or_name.endswith(".json") \
            else path_or_name + ".json"
        res = resources.files("hjreduce").joinpath("scenarios", fname)
        if not res.is_file():
            raise ScenarioError(f"scenario not found: {path_or_name}")
        text = res.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"not valid JSON: {e}")
    err = best_match(_VALIDATOR.iter_errors(doc))
    if err is not None:
        raise ScenarioError(f"{err.json_path}: {err.message}")
    return doc


def _parse_field(text, where):
    try:
        return parse_expr(text)
    except ParseError as e:
        raise ScenarioError(f"{where}: {e}")


def build_system(doc):
    """HamiltonianSystem + optional action + mu from a validated doc."""
    coords = doc["coords"]
    h = _parse_field(doc["hamiltonian"], "$.hamiltonian")
    try:
        sys_ = HamiltonianSystem(h, coords, doc.get("momenta"))
    except ValueError as e:
        raise ScenarioError(f"$.hamiltonian: {e}")
    action = None
    mu = None
    if "action" in doc:
        rows = doc["action"]
        for i, row in enumerate(rows):
            if len(row) != len(coords):
                raise ScenarioError(
                    f"$.action[{i}]: generator has {len(row)} entries, "
                    f"expected {len(coords)}")
        try:
            action = TranslationAction(rows)
        except ValueError as e:
            raise ScenarioError(f"$.action: {e}")
        mu = np.zeros(action.k)
    if "mu" in doc:
        if action is None and "chart" not in doc:
            raise ScenarioError("$.mu: mu given without an action")
        mu = np.asarray(doc["mu"], dtype=float)
        if action is not None and mu.size != action.k:
            raise ScenarioError(
                f"$.mu: expected {action.k} entries, got {mu.size}")
    return sys_, action, mu


def _seed(doc, args):
    return args.seed if args.seed is not None else doc.get("seed", 42)


def _phase_point(doc):
    if "z0" not in doc:
        raise ScenarioError("this command needs a 'z0' section")
    z = doc["z0"]
    n = len(doc["coords"])
    if len(z["q"]) != n or len(z["p"]) != n:
        raise ScenarioError(f"$.z0: q and p must each have {n} entries")
    return PhasePoint(z["q"], z["p"])


def _time_grid(doc, args, section=None):
    block = doc.get(section, {}) if section else {}
    t_end = args.t_end if args.t_end is not None \
        else block.get("t_end", doc.get("t_end"))
    dt = args.dt if args.dt is not None else block.get("dt", doc.get("dt"))
    if t_end is None or dt is None:
        raise ScenarioError("this command needs t_end and dt "
                            "(scenario fields or --t-end/--dt)")
    return float(t_end), float(dt)


# ---------------------------------------------------------------------------
# Output helpers.

def _fmt(v):
    return f"{float(v):.17g}"


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".hjreduce_")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON-serializable: {type(o).__name__}")


def write_json(path, obj):
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True,
                                   default=_json_default) + "\n")
    print(f"wrote {path}")


def emit_trajectory(traj, path):
    """CSV with header t,q1,...,qn,p1,...,pn at full double precision."""
    n = traj.n
    header = ("t," + ",".join(f"q{i+1}" for i in range(n))
              + "," + ",".join(f"p{i+1}" for i in range(n)))
    lines = [header]
    for i in range(len(traj)):
        row = [traj.times[i], *traj.qs[i], *traj.ps[i]]
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")
    print(f"wrote {path}")


def read_trajectory(path):
    """Inverse of emit_trajectory; bit-exact for files it wrote."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [ln for ln in f.read().split("\n") if ln]
    header = lines[0].split(",")
    if len(header) < 3 or len(header) % 2 == 0 or header[0] != "t":
        raise ValueError(f"{path}: not a trajectory CSV")
    n = (len(header) - 1) // 2
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    data = np.array(rows, dtype=float).reshape(len(rows), 2 * n + 1)
    return Trajectory(data[:, 0], data[:, 1:n + 1], data[:, n + 1:])


def _out_path(doc, args, suffix):
    return os.path.join(args.out, f"{doc['name']}_{suffix}")


def _chart_points(chart, grid_spec, override):
    """Full-space grid from per-chart-coordinate bounds."""
    y_bounds = grid_spec.get("y", [])
    x_bounds = grid_spec.get("x", [])
    if len(y_bounds) != chart.m or len(x_bounds) != chart.k:
        raise ScenarioError(
            f"$.verify.grid: need {chart.m} y ranges and {chart.k} x ranges")
    counts = override if override is not None \
        else grid_spec.get("counts", 20)
    pts = mesh_grid(list(y_bounds) + list(x_bounds), counts)
    ys = pts[:, :chart.m]
    xs = pts[:, chart.m:]
    return ys @ chart.horizontal.T + xs @ chart.generators.T


# ---------------------------------------------------------------------------
# Shared pipeline pieces.

def _reduced_problem(doc, sys_, action, mu, args):
    """Chart + reduced hamiltonian, checked against the scenario action."""
    if action is None:
        raise ScenarioError("this command needs an 'action' section")
    chart = build_chart(action)
    # The invariance gate is structural, not a user-tunable residual.
    h_red = reduced_hamiltonian(sys_, chart, mu, tol=1e-9,
                                seed=_seed(doc, args))
    return chart, h_red


def _solve_block(doc, default_energy=None):
    sv = doc.get("solve")
    if sv is None:
        raise ScenarioError("this command needs a 'solve' section")
    energy = sv.get("energy", doc.get("energy", default_energy))
    if energy is None:
        raise ScenarioError("$.solve: no energy given "
                            "(solve.energy or top-level energy)")
    return sv, float(energy)


def _solve_1d(doc, sys_, action, mu, args):
    """Dispatch the scenario to a 1-D quadrature solution.

    Returns (solution, y_var, equation, energy, solve_block); the
    equation is in (y_var, momentum-slot) variables with everything
    else already substituted, so residuals can be re-measured off-node.
    """
    sv, energy = _solve_block(doc)
    branch = sv.get("branch", 1)
    n_nodes = args.grid if args.grid is not None \
        else sv.get("n_nodes", 2001)
    rng_ = sv["range"]
    if "cyclic" in sv:
        betas = sv.get("beta")
        if betas is None or len(betas) != len(sv["cyclic"]):
            raise ScenarioError("$.solve.beta: need one beta per cyclic "
                                "variable")
        ans = cyclic_ansatz(sys_, sv["cyclic"], betas, seed=_seed(doc, args))
        if len(ans.remaining_vars) != 1:
            raise ScenarioError("$.solve.cyclic: exactly one non-cyclic "
                                "coordinate is needed for quadrature")
        y_var, p_var = ans.remaining_vars[0], ans.slot_vars[0]
        sol = solve_reduced_1d(ans.equation, y_var, p_var, energy, rng_,
                               branch=branch, n_nodes=n_nodes)
        return sol, y_var, p_var, ans.equation, energy, sv
    if action is not None:
        chart, h_red = _reduced_problem(doc, sys_, action, mu, args)
        if chart.m != 1:
            raise ScenarioError("the reduced problem is not one-dimensional")
        y_var, p_var = chart.y_names[0], chart.py_names[0]
        sol = solve_reduced_1d(h_red, y_var, p_var, energy, rng_,
                               branch=branch, n_nodes=n_nodes)
        return sol, y_var, p_var, h_red, energy, sv
    if sys_.n == 1:
        y_var, p_var = sys_.coords[0], sys_.momenta[0]
        sol = solve_reduced_1d(sys_.h, y_var, p_var, energy, rng_,
                               branch=branch, n_nodes=n_nodes)
        return sol, y_var, p_var, sys_.h, energy, sv
    raise ScenarioError("solve-hj needs an action, a cyclic list, or a "
                        "one-dimensional system")


def _node_residual(sol, equation, y_var, p_var, energy):
    worst = 0.0
    for y, p in zip(sol.table.ys, sol.table.derivs):
        r = abs(equation.evaluate({y_var: y, p_var: p}) - energy)
        if r > worst:
            worst = r
    return worst


# ---------------------------------------------------------------------------
# Commands.

def cmd_reduce(doc, args):
    sys_, action, mu = build_system(doc)
    chart, h_red = _reduced_problem(doc, sys_, action, mu, args)
    out = {
        "name": doc["name"] + "_reduced",
        "coords": list(chart.y_names),
        "momenta": list(chart.py_names),
        "hamiltonian": str(h_red),
        "mu": mu.tolist(),
        "seed": _seed(doc, args),
        "chart": {
            "y_block": chart.y_block.tolist(),
            "x_block": chart.x_block.tolist(),
            "horizontal": chart.horizontal.tolist(),
            "generators": chart.generators.tolist(),
        },
    }
    if "energy" in doc:
        out["energy"] = doc["energy"]
    if "solve" in doc and "cyclic" not in doc["solve"]:
        out["solve"] = doc["solve"]
    write_json(_out_path(doc, args, "reduced.json"), out)
    print(f"reduce: {', '.join(chart.y_names)} | h = {h_red}")
    return EXIT_OK


def cmd_solve_hj(doc, args):
    sys_, action, mu = build_system(doc)
    sol, y_var, p_var, equation, energy, sv = _solve_1d(doc, sys_, action,
                                                        mu, args)
    resid = _node_residual(sol, equation, y_var, p_var, energy)
    table = sol.table
    lines = ["y,W,dW"]
    for y, w, dw in zip(table.ys, table.values, table.derivs):
        lines.append(f"{_fmt(y)},{_fmt(w)},{_fmt(dw)}")
    csv_path = _out_path(doc, args, "table.csv")
    _atomic_write(csv_path, "\n".join(lines) + "\n")
    print(f"wrote {csv_path}")
    report = {
        "variable": y_var,
        "energy": energy,
        "range": [sol.y_range[0], sol.y_range[1]],
        "n_nodes": int(table.ys.size),
        "branch": sv.get("branch", 1),
        "max_node_residual": resid,
        "tol": args.tol,
        "pass": bool(resid <= args.tol),
    }
    write_json(_out_path(doc, args, "solve.json"), report)
    print(f"solve-hj: max node residual {resid:.3e} (tol {args.tol:.1e}) "
          f"{'PASS' if report['pass'] else 'FAIL'}")
    if not report["pass"]:
        raise ResidualFailure(f"node residual {resid:.3e} > {args.tol:.1e}")
    return EXIT_OK


def _verify_magnetic(doc, sys_, action, mu, args):
    if action is None:
        raise ScenarioError("magnetic verification needs an 'action'")
    mg = doc["magnetic"]
    chart = build_chart(action)
    comps = [_parse_field(c, "$.magnetic.alpha_mu") for c in mg["alpha_mu"]]
    if len(comps) != sys_.n:
        raise ScenarioError("$.magnetic.alpha_mu: one component per "
                            "coordinate")
    alpha = OneForm(sys_.coords, components=comps)
    term = magnetic_term(chart, alpha, mu, tol=1e-9, seed=_seed(doc, args))
    report = {
        "beta": {f"d{chart.y_names[i]}^d{chart.y_names[j]}":
                 str(term.beta.entry(i, j))
                 for i in range(chart.m) for j in range(i + 1, chart.m)},
        "pullback_residual": term.pullback_residual,
        "momentum_dev": term.momentum_dev,
        "invariance_dev": term.invariance_dev,
        "tol": args.tol,
    }
    ok = term.pullback_residual <= args.tol
    if "gamma_tilde" in mg:
        g_comps = [_parse_field(c, "$.magnetic.gamma_tilde")
                   for c in mg["gamma_tilde"]]
        if len(g_comps) != chart.m:
            raise ScenarioError("$.magnetic.gamma_tilde: one component per "
                                "reduced coordinate")
        gamma = OneForm(chart.y_names, components=g_comps)
        gspec = mg.get("grid", {"bounds": [[-2.0, 2.0]] * chart.m})
        grid = mesh_grid(gspec["bounds"],
                         args.grid if args.grid is not None
                         else gspec.get("counts", 15))
        resid = magnetic_lagrangian_residual(gamma, term.beta, grid)
        report["magnetic_residual"] = resid
        ok = ok and resid <= args.tol
    report["pass"] = bool(ok)
    return report


def _verify_family(doc, sys_, args, gf, param_names, param_values, q_var,
                   q_lo, q_hi):
    n_pts = args.grid if args.grid is not None else 200
    t_end = doc.get("t_end", 1.0)
    points = {q_var: np.linspace(q_lo, q_hi, n_pts),
              sys_.t_var: np.linspace(0.0, t_end, n_pts)}
    for c in sys_.coords:
        if c != q_var:
            points[c] = np.linspace(-2.0, 2.0, n_pts)
    for nm, v in zip(param_names, param_values):
        points[nm] = np.full(n_pts, float(v))
    rep = check_complete(gf, sys_, points, tol=args.tol, det_floor=1e-6)
    return {
        "hj_max_dev": rep.hj_max_dev,
        "min_abs_det": rep.min_abs_det,
        "tol": args.tol,
        "pass": bool(rep.complete),
    }


def cmd_verify(doc, args):
    sys_, action, mu = build_system(doc)
    if "magnetic" in doc:
        report = _verify_magnetic(doc, sys_, action, mu, args)
        kind = "magnetic"
    elif "complete_solution" in doc:
        cs = doc["complete_solution"]
        if sys_.n != 1:
            raise ScenarioError("$.complete_solution: quadrature families "
                                "need a one-dimensional system")
        param = cs.get("param", "a1")
        gf = quadrature_complete_solution(sys_, cs["q_range"],
                                          branch=cs.get("branch", 1),
                                          n_quad=cs.get("n_quad", 200),
                                          param=param)
        energy = doc.get("energy")
        if energy is None:
            energy = sys_.energy(_phase_point(doc))
        report = _verify_family(doc, sys_, args, gf, (param,), (energy,),
                                sys_.coords[0], cs["q_range"][0],
                                cs["q_range"][1])
        kind = "complete_solution"
    elif "solve" in doc and "cyclic" in doc["solve"]:
        sol, y_var, p_var, equation, energy, sv = _solve_1d(doc, sys_,
                                                            action, mu, args)
        n_pts = args.grid if args.grid is not None else 200
        ys = np.linspace(sol.y_range[0], sol.y_range[1], n_pts)
        worst = 0.0
        for y in ys:
            r = abs(equation.evaluate({y_var: y, p_var: sol.root.solve((y,))})
                    - energy)
            worst = max(worst, r)
        gf = cyclic_complete_solution(sys_, sv["cyclic"], sv["range"])
        betas = sv["beta"]
        fam = _verify_family(doc, sys_, args, gf, gf.params,
                             [energy, *betas], y_var,
                             sol.y_range[0], sol.y_range[1])
        report = {
            "max_offnode_residual": worst,
            "hj_max_dev": fam["hj_max_dev"],
            "min_abs_det": fam["min_abs_det"],
            "tol": args.tol,
            "pass": bool(worst <= args.tol and fam["pass"]),
        }
        kind = "cyclic"
    elif action is not None:
        sol, y_var, p_var, equation, energy, sv = _solve_1d(doc, sys_,
                                                            action, mu, args)
        chart = build_chart(action)
        vspec = doc.get("verify", {}).get("grid")
        if vspec is None:
            raise ScenarioError("this scenario has no verify.grid section")
        grid = _chart_points(chart, vspec, args.grid)
        rep = lift_report(sys_, sol, chart, mu, grid, closed_tol=1e-8,
                          seed=_seed(doc, args))
        report = {
            "hj_max_dev": rep.hj_max_dev,
            "closedness": rep.closedness,
            "momentum_dev": rep.momentum_dev,
            "invariance_dev": rep.invariance_dev,
            "energy_estimate": rep.energy,
            "grid_points": int(grid.shape[0]),
            "tol": args.tol,
            "pass": bool(rep.hj_max_dev <= args.tol
                         and rep.momentum_dev <= args.tol),
        }
        kind = "reduction"
    else:
        raise ScenarioError("nothing to verify: need 'magnetic', "
                            "'complete_solution', a cyclic solve, or an "
                            "action pipeline")
    report["mode"] = kind
    write_json(_out_path(doc, args, "verify.json"), report)
    print(f"verify[{kind}]: {'PASS' if report['pass'] else 'FAIL'}")
    if not report["pass"]:
        raise ResidualFailure(f"verification exceeded tol {args.tol:.1e}")
    return EXIT_OK


def cmd_reconstruct(doc, args):
    sys_, action, mu = build_system(doc)
    rc = doc.get("reconstruct")
    if rc is None:
        raise ScenarioError("this command needs a 'reconstruct' section")
    sol, y_var, p_var, equation, energy, sv = _solve_1d(doc, sys_, action,
                                                        mu, args)
    if action is None:
        raise ScenarioError("reconstruction needs an 'action' section")
    chart = build_chart(action)
    t_end, dt = _time_grid(doc, args, "reconstruct")
    y0 = np.asarray(rc["y0"], dtype=float)
    g0 = np.asarray(rc["g0"], dtype=float) if "g0" in rc else None
    traj = reconstruct_trajectory(sys_, sol, chart, mu, y0, t_end, dt, g0=g0)
    emit_trajectory(traj, _out_path(doc, args, "reconstructed.csv"))
    form = lift_solution(sol, chart, mu, sys_.coords)
    traj2 = integrate_projected(sys_, form, traj.qs[0], t_end, dt)
    sup_dev = max(float(np.max(np.abs(traj.qs - traj2.qs))),
                  float(np.max(np.abs(traj.ps - traj2.ps))))
    z0 = PhasePoint(traj.qs[0], form.values(traj.qs[0]))
    flow = flow_reference(sys_, z0, t_end, dt)
    related = max(float(np.max(np.abs(form.values(flow.qs[i]) - flow.ps[i])))
                  for i in range(len(flow)))
    report = {
        "t_end": t_end,
        "dt": dt,
        "sup_dev_vs_projected": sup_dev,
        "graph_relatedness_dev": related,
        "tol": args.tol,
        "pass": bool(sup_dev <= args.tol and related <= args.tol),
    }
    write_json(_out_path(doc, args, "reconstruct.json"), report)
    print(f"reconstruct: sup dev {sup_dev:.3e}, relatedness {related:.3e} "
          f"{'PASS' if report['pass'] else 'FAIL'}")
    if not report["pass"]:
        raise ResidualFailure(
            f"reconstruction deviation exceeded tol {args.tol:.1e}")
    return EXIT_OK


def cmd_simulate(doc, args):
    sys_, _, _ = build_system(doc)
    z0 = _phase_point(doc)
    t_end, dt = _time_grid(doc, args)
    traj = flow_reference(sys_, z0, t_end, dt)
    emit_trajectory(traj, _out_path(doc, args, "trajectory.csv"))
    energies = traj.energies(sys_)
    report = {
        "t_end": t_end,
        "dt": dt,
        "samples": len(traj),
        "energy_initial": float(energies[0]),
        "energy_final": float(energies[-1]),
        "max_energy_drift": float(np.max(np.abs(energies - energies[0]))),
    }
    write_json(_out_path(doc, args, "simulate.json"), report)
    print(f"simulate: {len(traj)} samples, energy drift "
          f"{report['max_energy_drift']:.3e}")
    return EXIT_OK


def cmd_integrate(doc, args):
    sys_, action, _ = build_system(doc)
    ib = doc.get("integrator")
    if ib is None:
        raise ScenarioError("this command needs an 'integrator' section")
    z0 = _phase_point(doc)
    s = _parse_field(ib["s"], "$.integrator.s")
    try:
        gf = GeneratingFunction(ib["kind"], s, q_vars=sys_.coords,
                                params=ib["params"])
    except ValueError as e:
        raise ScenarioError(f"$.integrator: {e}")
    rep = run_scheme(gf, sys_, z0, ib["n_steps"], ib["tau"], action=action)
    emit_trajectory(rep.trajectory, _out_path(doc, args, "scheme.csv"))
    report = {
        "tau": ib["tau"],
        "n_steps": ib["n_steps"],
        "symplecticity_defect": rep.symplecticity_defect,
        "max_energy_drift": float(np.max(rep.energy_drift)),
        "tol": args.tol,
        "pass": bool(rep.symplecticity_defect <= args.tol),
    }
    if rep.momentum_drift is not None:
        report["max_momentum_drift"] = float(np.max(rep.momentum_drift))
    write_json(_out_path(doc, args, "scheme.json"), report)
    print(f"integrate: defect {rep.symplecticity_defect:.3e} "
          f"{'PASS' if report['pass'] else 'FAIL'}")
    if not report["pass"]:
        raise ResidualFailure(
            f"symplecticity defect {rep.symplecticity_defect:.3e} > "
            f"{args.tol:.1e}")
    return EXIT_OK


def cmd_equilibrium(doc, args):
    sys_, _, _ = build_system(doc)
    z0 = _phase_point(doc)
    t_end, dt = _time_grid(doc, args)
    param_guess = None
    if "generating_function" in doc:
        gb = doc["generating_function"]
        if gb["kind"] != "typeI":
            raise ScenarioError("$.generating_function: equilibrium "
                                "transforms use a typeI family")
        s = _parse_field(gb["s"], "$.generating_function.s")
        try:
            gf = GeneratingFunction("typeI", s, q_vars=sys_.coords,
                                    params=gb["params"])
        except ValueError as e:
            raise ScenarioError(f"$.generating_function: {e}")
    elif "complete_solution" in doc:
        cs = doc["complete_solution"]
        if sys_.n != 1:
            raise ScenarioError("$.complete_solution: quadrature families "
                                "need a one-dimensional system")
        gf = quadrature_complete_solution(sys_, cs["q_range"],
                                          branch=cs.get("branch", 1),
                                          n_quad=cs.get("n_quad", 200),
                                          param=cs.get("param", "a1"))
        param_guess = [doc.get("energy", sys_.energy(z0))]
    else:
        raise ScenarioError("equilibrium needs a 'generating_function' or "
                            "'complete_solution' section")
    rep = transform_to_equilibrium(gf, sys_, z0, t_end, dt,
                                   param_guess=param_guess)
    n = sys_.n
    header = ("t," + ",".join(f"alpha{i+1}" for i in range(n))
              + "," + ",".join(f"beta{i+1}" for i in range(n)))
    lines = [header]
    for i in range(rep.times.size):
        row = [rep.times[i], *rep.alphas[i], *rep.betas[i]]
        lines.append(",".join(_fmt(v) for v in row))
    csv_path = _out_path(doc, args, "equilibrium.csv")
    _atomic_write(csv_path, "\n".join(lines) + "\n")
    print(f"wrote {csv_path}")
    report = {
        "t_end": t_end,
        "dt": dt,
        "alpha0": rep.alphas[0].tolist(),
        "beta0": rep.betas[0].tolist(),
        "max_variation": rep.max_var,
        "tol": args.tol,
        "pass": bool(rep.max_var <= args.tol),
    }
    write_json(_out_path(doc, args, "equilibrium.json"), report)
    print(f"equilibrium: max variation {rep.max_var:.3e} "
          f"{'PASS' if report['pass'] else 'FAIL'}")
    if not report["pass"]:
        raise ResidualFailure(
            f"new variables varied by {rep.max_var:.3e} > {args.tol:.1e}")
    return EXIT_OK


_COMMANDS = {
    "reduce": (cmd_reduce, "descend an invariant system to the quotient"),
    "solve-hj": (cmd_solve_hj, "solve a 1-D reduced equation by quadrature"),
    "verify": (cmd_verify, "check a scenario's solution claim end to end"),
    "reconstruct": (cmd_reconstruct,
                    "rebuild a full trajectory from the reduced flow"),
    "simulate": (cmd_simulate, "integrate the canonical equations (RK4)"),
    "integrate": (cmd_integrate,
                  "run a generating-function scheme with diagnostics"),
    "equilibrium": (cmd_equilibrium,
                    "transform a trajectory to equilibrium coordinates"),
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hjreduce",
        description="Symmetry reduction, Hamilton-Jacobi solving by "
                    "quadrature, and generating-function integrators.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")
    for name, (fn, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("scenario",
                        help="scenario file path or bundled scenario name")
        sp.add_argument("--tol", type=float, default=1e-8,
                        help="residual tolerance (default 1e-8)")
        sp.add_argument("--grid", type=int, default=None,
                        help="override grid point count per axis")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the scenario RNG seed")
        sp.add_argument("--out", default=".",
                        help="output directory (default .)")
        sp.add_argument("--dt", type=float, default=None,
                        help="override the integration step")
        sp.add_argument("--t-end", dest="t_end", type=float, default=None,
                        help="override the integration span")
        sp.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        doc = load_scenario(args.scenario)
        return args.fn(doc, args)
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_SCENARIO
    except ResidualFailure as e:
        print(f"residual failure: {e}", file=sys.stderr)
        return EXIT_RESIDUAL
    except (DomainError, SolveError, PreconditionError) as e:
        print(f"numeric failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # remaining ValueErrors are malformed inputs (ranges, counts, shapes)
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
