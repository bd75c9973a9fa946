"""Command-line front end: ``synth``, ``solve``, ``compare`` and ``profile``.

Runs are described by one JSON config file::

    {
      "problem": {
        "synth": {"frame_h": 12, "frame_w": 16, "n_frames": 30, "box": [4, 4],
                  "intensity": 0.9, "step": 1, "noise_sigma": 0.02, "seed": 0},
        "scenario": "noisy",
        "psf_sigma": 1.0,
        "penalty": {"kind": "fraction", "mu": 0.1, "alpha": 1.0},
        "box_radius": 1.0
      },
      "solver": {
        "admm": {"tau": 1.0, "beta": "heuristic", "tol_a1": 1e-4, "tol_a2": 5e-3},
        "palm": {"tol_p": 1e-4}
      },
      "sweep": {"mu": [0.1, 0.01], "tau": [0.8, 1.0, 1.6], "seeds": [0, 1]},
      "output": {"dir": "out", "format": "csv"}
    }

Instead of ``synth`` the problem may name a ``data`` file (binary matrix, as
written by :mod:`ncxadmm.io`) and, optionally, ``truth`` and ``frame`` =
``[h, w]`` (required for the blurred scenario).  Unknown keys anywhere are
rejected.  Tolerances default to the per-scenario settings of
:func:`ncxadmm.bench.default_solvers`.

Exit codes: 0 success, 1 configuration error, 2 a solver hit ``max_iter``,
3 input/output error.  ``NCXADMM_LOG`` sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import logging
import math
import os
import sys

import numpy as np

from . import bench
from . import io as mio
from . import operators as ops
from .admm import AdmmConfig, FixedBeta, HeuristicBeta
from .palm import PalmConfig
from .problem import ProblemSpec
from .regularizers import KINDS, ConstraintSetSpec, PenaltySpec

__all__ = ["ConfigError", "load_config", "validate_config", "main"]

log = logging.getLogger("ncxadmm")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONV, EXIT_IO = 0, 1, 2, 3

TRACE_COLUMNS = ("k", "objective", "potential", "violation", "succ_chg", "beta")
RESULT_COLUMNS = ("video", "scenario", "regularizer", "param", "mu", "solver",
                  "iter", "converged", "objective", "f_measure")
TIMING_COLUMNS = ("video", "regularizer", "param", "mu", "solver", "time_ms")

TOLERANCES = {
    "noisy": {"tol_a1": 1e-4, "tol_a2": 5e-3, "tol_p": 1e-4},
    "blurred": {"tol_a1": 5e-3, "tol_a2": 1e-2, "tol_p": 3e-3},
}


class ConfigError(ValueError):
    """The run configuration is malformed or violates a domain constraint."""


# ---------------------------------------------------------------------------
# config

_SCHEMA = {
    "problem": {
        "synth": {"frame_h": int, "frame_w": int, "n_frames": int, "box": list,
                  "intensity": float, "step": int, "row": int, "noise_sigma": float,
                  "seed": int},
        "data": str,
        "truth": str,
        "frame": list,
        "scenario": str,
        "psf_sigma": float,
        "penalty": {"kind": str, "mu": float, "p": float, "alpha": float},
        "box_radius": float,
    },
    "solver": {
        "admm": {"tau": float, "beta": (str, float), "guaranteed": bool, "tol_a1": float,
                 "tol_a2": float, "max_iter": int, "min_iter": int},
        "palm": {"step_factor": float, "tol_p": float, "max_iter": int, "min_iter": int},
    },
    "sweep": {"mu": list, "tau": list, "seeds": list},
    "output": {"dir": str, "format": str},
}


def _check_keys(node, schema, where):
    if not isinstance(node, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    for key, val in node.items():
        path = f"{where}.{key}" if where else key
        if key not in schema:
            raise ConfigError(f"unknown key {path!r}")
        want = schema[key]
        if isinstance(want, dict):
            _check_keys(val, want, path)
            continue
        types = want if isinstance(want, tuple) else (want,)
        ok = any(
            (t is float and isinstance(val, (int, float)) and not isinstance(val, bool))
            or (t is int and isinstance(val, int) and not isinstance(val, bool))
            or (t not in (int, float) and isinstance(val, t))
            for t in types
        )
        if not ok:
            raise ConfigError(f"{path} has the wrong type ({type(val).__name__})")


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return validate_config(cfg)


def _penalty(cfg):
    pen = dict(cfg.get("problem", {}).get("penalty", {"kind": "fraction", "mu": 0.1}))
    kind = pen.pop("kind", None)
    if kind not in KINDS:
        raise ConfigError(f"penalty kind must be one of {sorted(KINDS)}, got {kind!r}")
    try:
        return PenaltySpec(kind, **{"mu": 0.1, **pen})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"problem.penalty: {exc}") from exc


def _scenario(cfg):
    sc = cfg.get("problem", {}).get("scenario", "noisy")
    if sc not in TOLERANCES:
        raise ConfigError(f"scenario must be 'noisy' or 'blurred', got {sc!r}")
    return sc


def _scene(cfg, seed=None):
    s = dict(cfg["problem"]["synth"])
    try:
        box = tuple(int(v) for v in s.pop("box", (3, 3)))
        if len(box) != 2:
            raise ValueError("box must be [height, width]")
        if seed is not None:
            s["seed"] = seed
        scene = bench.moving_box_scene(s.pop("frame_h"), s.pop("frame_w"), s.pop("n_frames"),
                                       box=box, **s)
    except KeyError as exc:
        raise ConfigError(f"problem.synth is missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"problem.synth: {exc}") from exc
    return scene


def _admm_config(cfg, scenario, tau=None):
    a = dict(cfg.get("solver", {}).get("admm", {}))
    tol = TOLERANCES[scenario]
    beta = a.pop("beta", "heuristic")
    guaranteed = a.pop("guaranteed", False)
    if beta == "heuristic":
        policy = HeuristicBeta()
    elif isinstance(beta, (int, float)):
        policy = FixedBeta(float(beta), guaranteed=guaranteed)
    else:
        raise ConfigError(f"solver.admm.beta must be 'heuristic' or a number, got {beta!r}")
    if tau is not None:
        a["tau"] = tau
    a.setdefault("tol_a1", tol["tol_a1"])
    a.setdefault("tol_a2", tol["tol_a2"])
    a.setdefault("max_iter", 5000)
    return AdmmConfig(beta_policy=policy, **a)


def _palm_config(cfg, scenario):
    p = dict(cfg.get("solver", {}).get("palm", {}))
    p.setdefault("tol_p", TOLERANCES[scenario]["tol_p"])
    p.setdefault("max_iter", 5000)
    return PalmConfig(**p)


def _solvers(cfg, scenario, taus=None):
    """SolverSpecs named ``admm_tau<t>`` and ``palm`` as selected by the config."""
    sol = cfg.get("solver", {"admm": {}, "palm": {}})
    out = []
    if "admm" in sol:
        for tau in taus or [sol["admm"].get("tau", 1.0)]:
            out.append(bench.SolverSpec(f"admm_tau{tau:g}", _admm_config(cfg, scenario, tau)))
    if "palm" in sol:
        out.append(bench.SolverSpec("palm", _palm_config(cfg, scenario)))
    return out


def validate_config(cfg):
    """Check structure and every domain constraint; returns ``cfg`` unchanged."""
    _check_keys(cfg, _SCHEMA, "")
    prob = cfg.get("problem", {})
    if ("synth" in prob) == ("data" in prob):
        raise ConfigError("problem needs exactly one of 'synth' or 'data'")
    scenario = _scenario(cfg)
    _penalty(cfg)
    if "synth" in prob:
        _scene(cfg)
    elif scenario == "blurred" and "frame" not in prob:
        raise ConfigError("blurred data needs problem.frame = [h, w]")
    if "frame" in prob and (len(prob["frame"]) != 2
                            or not all(isinstance(v, int) and v > 0 for v in prob["frame"])):
        raise ConfigError("problem.frame must be two positive integers")
    if not prob.get("psf_sigma", 1.0) > 0:
        raise ConfigError("problem.psf_sigma must be positive")
    try:
        ConstraintSetSpec(prob.get("box_radius", 1.0))
    except ValueError as exc:
        raise ConfigError(f"problem.box_radius: {exc}") from exc
    sweep = cfg.get("sweep", {})
    for key in ("mu", "tau", "seeds"):
        vals = sweep.get(key, [])
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            raise ConfigError(f"sweep.{key} must be a list of numbers")
    if any(not v > 0 for v in sweep.get("mu", [])):
        raise ConfigError("sweep.mu values must be positive")
    if any(int(v) != v for v in sweep.get("seeds", [])):
        raise ConfigError("sweep.seeds must be integers")
    try:
        _solvers(cfg, scenario, sweep.get("tau") or None)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from exc
    fmt = cfg.get("output", {}).get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output.format must be 'csv' or 'json', got {fmt!r}")
    return cfg


# ---------------------------------------------------------------------------
# output


def _cell_text(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return str(v)


def write_table(path_stem, columns, rows, fmt="csv"):
    """Write ``rows`` (dicts) as ``<stem>.csv`` or ``<stem>.json``; returns the path."""
    path = f"{path_stem}.{fmt}"
    if fmt == "json":
        data = [{c: (r[c] if not (isinstance(r[c], float) and not math.isfinite(r[c]))
                     else _cell_text(r[c])) for c in columns} for r in rows]
        text = json.dumps({"columns": list(columns), "rows": data}, indent=1) + "\n"
    else:
        buf = _stdio.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell_text(r[c]) for c in columns])
        text = buf.getvalue()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def read_table(path):
    """Read a table written by :func:`write_table` as ``(columns, rows)``."""
    with open(path, encoding="utf-8") as fh:
        if path.endswith(".json"):
            data = json.load(fh)
            return data["columns"], [[r[c] for c in data["columns"]] for r in data["rows"]]
        rows = list(csv.reader(fh))
    if not rows:
        raise mio.MatrixFormatError(f"{path}: empty table")
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# commands


def _load_problem(cfg, seed=None):
    """``(D, S_true or None, A, video name)`` from the problem section."""
    prob = cfg["problem"]
    scenario = _scenario(cfg)
    if "synth" in prob:
        scene = _scene(cfg, seed)
        D, S_true, A = bench.make_scenario(scene, scenario, prob.get("psf_sigma", 1.0))
        return D, S_true, A, f"synth{scene.seed}"
    D = mio.read_matrix(prob["data"])
    S_true = mio.read_matrix(prob["truth"]) if "truth" in prob else None
    if scenario == "blurred":
        h, w = prob["frame"]
        A = ops.frame_blur(h, w, prob.get("psf_sigma", 1.0))
    else:
        A = ops.identity()
    name = os.path.splitext(os.path.basename(prob["data"]))[0]
    return D, S_true, A, name


def cmd_synth(cfg, out, seed=None, fmt="csv"):
    if "synth" not in cfg["problem"]:
        raise ConfigError("synth needs a problem.synth section")
    scene = _scene(cfg, seed)
    scenario = _scenario(cfg)
    D, S_true, _ = bench.make_scenario(scene, scenario, cfg["problem"].get("psf_sigma", 1.0))
    mio.write_matrix(os.path.join(out, "D.bin"), D)
    mio.write_matrix(os.path.join(out, "S_true.bin"), S_true)
    manifest = {
        "frame_h": scene.frame_h, "frame_w": scene.frame_w, "n_frames": scene.n_frames,
        "noise_sigma": scene.noise_sigma, "seed": scene.seed, "scenario": scenario,
        "psf_sigma": cfg["problem"].get("psf_sigma", 1.0),
        "background": list(scene.background),
        "fg_rects": [vars(r) for r in scene.fg_rects],
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return EXIT_OK


def cmd_solve(cfg, out, seed=None, fmt="csv"):
    D, S_true, A, video = _load_problem(cfg, seed)
    scenario = _scenario(cfg)
    problem = ProblemSpec(D, _penalty(cfg), ConstraintSetSpec(cfg["problem"].get("box_radius", 1.0)),
                          a_map=A)
    summary = []
    all_converged = True
    for solver in _solvers(cfg, scenario):
        rep = bench.run_solver(solver, problem)
        n = len(rep.trace["k"])
        rows = [{c: (int(rep.trace[c][i]) if c == "k" else float(rep.trace[c][i]))
                 if c in rep.trace else math.nan for c in TRACE_COLUMNS} for i in range(n)]
        write_table(os.path.join(out, f"trace_{solver.name}"), TRACE_COLUMNS, rows, fmt)
        mio.write_matrix(os.path.join(out, f"L_{solver.name}.bin"), rep.L)
        mio.write_matrix(os.path.join(out, f"S_{solver.name}.bin"), rep.S)
        fm = bench.f_measure(rep.S, S_true).f_measure if S_true is not None else math.nan
        summary.append({"video": video, "scenario": scenario, "regularizer": problem.phi.kind,
                        "param": problem.phi.param, "mu": problem.phi.mu, "solver": solver.name,
                        "iter": rep.iterations, "converged": rep.converged,
                        "objective": rep.objective, "f_measure": fm})
        all_converged &= rep.converged
        if not rep.converged:
            log.warning("%s did not converge within max_iter", solver.name)
    write_table(os.path.join(out, "summary"), RESULT_COLUMNS, summary, fmt)
    return EXIT_OK if all_converged else EXIT_NONCONV


def _wide_rows(rows, measure, solvers):
    T, names = bench.profile_table(rows, measure)
    out = []
    for i in range(T.shape[0]):
        row = {"problem": i}
        row.update({s: float(T[i, names.index(s)]) for s in solvers})
        out.append(row)
    return out


def cmd_compare(cfg, out, seed=None, jobs=1, fmt="csv"):
    prob = cfg["problem"]
    scenario = _scenario(cfg)
    sweep = cfg.get("sweep", {})
    base = _penalty(cfg)
    mus = sweep.get("mu", [base.mu])
    taus = sweep.get("tau") or None
    solvers = tuple(_solvers(cfg, scenario, taus))
    names = [s.name for s in solvers]
    radius = prob.get("box_radius", 1.0)

    if "synth" in prob:
        seeds = sweep.get("seeds") or [seed if seed is not None else prob["synth"].get("seed", 0)]
        cells = []
        for sd in seeds:
            scene = _scene(cfg, int(sd))
            for mu in mus:
                cells.append(bench.Cell(f"synth{int(sd)}", scene, scenario, base.with_mu(mu),
                                        solvers, radius, psf_sigma=prob.get("psf_sigma", 1.0)))
        rows = bench.run_sweep(cells, jobs)
    else:
        D, S_true, A, video = _load_problem(cfg)
        rows = []
        for mu in mus:
            problem = ProblemSpec(D, base.with_mu(mu), ConstraintSetSpec(radius), a_map=A)
            for solver in solvers:
                rep, ms = bench.timed_run(solver, problem)
                fm = bench.f_measure(rep.S, S_true).f_measure if S_true is not None else math.nan
                rows.append({"video": video, "scenario": scenario, "regularizer": base.kind,
                             "param": base.param, "mu": mu, "solver": solver.name,
                             "iter": rep.iterations, "converged": rep.converged,
                             "objective": rep.objective, "f_measure": fm, "time_ms": ms})

    write_table(os.path.join(out, "results"), RESULT_COLUMNS, rows, fmt)
    write_table(os.path.join(out, "timings"), TIMING_COLUMNS, rows, fmt)
    cols = ("problem", *names)
    write_table(os.path.join(out, "iterations"), cols, _wide_rows(rows, "iter", names), fmt)
    write_table(os.path.join(out, "objectives"), cols, _wide_rows(rows, "objective", names), fmt)
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONV


def profile_series(T, nu_max):
    """Breakpoints ``nu`` in ``[1, nu_max]`` and the profile values there."""
    if T.shape[0] == 0:
        return np.empty(0), np.empty((0, T.shape[1]))
    R = bench.performance_ratios(T)
    finite = R[np.isfinite(R) & (R <= nu_max)]
    nu = np.unique(np.concatenate([[1.0], finite, [nu_max]]))
    return nu, bench.performance_profile(R, nu)


def cmd_profile(table, out, nu_max=10.0, fmt="csv"):
    """Performance profiles from a wide problems x solvers table."""
    if not nu_max >= 1:
        raise ConfigError("--nu-max must be at least 1")
    columns, rows = read_table(table)
    if not columns or columns[0] != "problem":
        raise ConfigError(f"{table}: first column must be 'problem'")
    solvers = columns[1:]
    try:
        T = np.array([[float(v) for v in r[1:]] for r in rows], dtype=float).reshape(len(rows),
                                                                                  len(solvers))
    except ValueError as exc:
        raise mio.MatrixFormatError(f"{table}: {exc}") from exc
    nu, prof = profile_series(T, nu_max)
    out_rows = [{"nu": float(v), **{s: float(prof[i, j]) for j, s in enumerate(solvers)}}
                for i, v in enumerate(nu)]
    write_table(os.path.join(out, "profile"), ("nu", *solvers), out_rows, fmt)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _parser():
    p = argparse.ArgumentParser(prog="ncxadmm", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    for name in ("synth", "solve", "compare"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--seed", type=int, default=None, help="override the scene seed")
        if name == "compare":
            sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp = sub.add_parser("profile", parents=[common])
    sp.add_argument("table", help="problems x solvers table written by compare")
    sp.add_argument("--nu-max", type=float, default=10.0)
    return p


def _setup_logging():
    level = os.environ.get("NCXADMM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        if args.command == "profile":
            out = args.out or "."
            mio.ensure_dir(out)
            return cmd_profile(args.table, out, args.nu_max, args.format or "csv")
        cfg = load_config(args.config)
        output = cfg.get("output", {})
        out = args.out or output.get("dir", ".")
        fmt = args.format or output.get("format", "csv")
        mio.ensure_dir(out)
        if args.command == "synth":
            return cmd_synth(cfg, out, args.seed, fmt)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.seed, fmt)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        return cmd_compare(cfg, out, args.seed, args.jobs, fmt)
    except (ConfigError, ops.ShapeError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
