"""Synthetic scenes, recovery metrics and solver comparison tools.

The synthetic generator stands in for surveillance video: a static background
(one value per pixel, identical across frames) is occluded by rectangles of
constant intensity.  The ground-truth foreground ``S_true`` is the difference
between the occluded frames and the background, so it is nonzero exactly on
the rectangle footprints.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import operators as ops
from .admm import AdmmConfig, HeuristicBeta
from .admm import solve as solve_admm
from .palm import PalmConfig, solve_palm
from .problem import ProblemSpec
from .regularizers import ConstraintSetSpec, PenaltySpec

__all__ = [
    "FgRect",
    "SyntheticSceneSpec",
    "MetricsReport",
    "make_rng",
    "moving_box_scene",
    "synth_video",
    "corrupt_blur",
    "make_scenario",
    "f_measure",
    "performance_ratios",
    "performance_profile",
    "relerr_trace",
    "SolverSpec",
    "default_solvers",
    "run_solver",
    "timed_run",
    "Cell",
    "run_cell",
    "run_sweep",
    "mu_sweep",
    "profile_table",
    "MU_GRID",
]

# regularization weights swept in the experiments
MU_GRID = (5e-1, 1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5)


def make_rng(seed, *stream):
    """Counter-based Philox generator keyed by ``seed`` and optional stream ids.

    Distinct streams give independent sequences, so results do not depend on
    the order in which cells are scheduled.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class FgRect:
    """A rectangle of constant ``intensity`` shown in frames ``start:stop``."""

    start: int
    stop: int
    top: int
    left: int
    height: int
    width: int
    intensity: float = 0.9


@dataclass(frozen=True)
class SyntheticSceneSpec:
    frame_h: int
    frame_w: int
    n_frames: int
    fg_rects: Sequence[FgRect] = ()
    noise_sigma: float = 0.0
    seed: int = 0
    background: tuple = (0.1, 0.6)

    def __post_init__(self):
        if min(self.frame_h, self.frame_w, self.n_frames) <= 0:
            raise ValueError("scene dimensions must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        object.__setattr__(self, "fg_rects", tuple(self.fg_rects))


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_measure: float


def moving_box_scene(frame_h, frame_w, n_frames, box=(3, 3), intensity=0.9,
                     noise_sigma=0.0, seed=0, step=1, row=None):
    """Scene with one box sliding left to right, wrapping at the frame edge."""
    bh, bw = box
    if not (0 < bh <= frame_h and 0 < bw <= frame_w):
        raise ValueError(f"box {box} does not fit in a {frame_h}x{frame_w} frame")
    top = (frame_h - bh) // 2 if row is None else row
    rects = []
    span = frame_w - bw + 1
    for j in range(n_frames):
        left = (j * step) % span
        rects.append(FgRect(j, j + 1, top, left, bh, bw, intensity))
    return SyntheticSceneSpec(frame_h, frame_w, n_frames, rects, noise_sigma, seed)


def synth_video(spec):
    """Return ``(D, S_true)`` with frames stacked column-major as columns.

    ``D = background + S_true + noise``, clipped to ``[0, 1]``.
    """
    rng = make_rng(spec.seed, 0)
    h, w, n = spec.frame_h, spec.frame_w, spec.n_frames
    lo, hi = spec.background
    bg = rng.uniform(lo, hi, size=(h, w))
    frames = np.repeat(bg[None], n, axis=0)
    for r in spec.fg_rects:
        frames[r.start:r.stop, r.top:r.top + r.height, r.left:r.left + r.width] = r.intensity
    clean = np.clip(frames, 0.0, 1.0)
    to_cols = lambda F: F.transpose(0, 2, 1).reshape(n, h * w).T
    B = to_cols(np.repeat(bg[None], n, axis=0))
    S_true = to_cols(clean) - B
    D = B + S_true
    if spec.noise_sigma > 0:
        D = D + spec.noise_sigma * make_rng(spec.seed, 1).standard_normal(D.shape)
    return np.clip(D, 0.0, 1.0), S_true


def corrupt_blur(D, blur_map, noise_sigma=0.0, seed=0):
    """Blur every frame, add Gaussian noise, clip to ``[0, 1]``."""
    out = ops.apply(blur_map, D)
    if noise_sigma > 0:
        out = out + noise_sigma * make_rng(seed, 2).standard_normal(out.shape)
    return np.clip(out, 0.0, 1.0)


def make_scenario(scene, scenario="noisy", psf_sigma=1.0):
    """Data, ground truth and forward map for one scenario.

    ``"noisy"`` uses the identity map and the scene's own noise. ``"blurred"``
    synthesizes the clean scene, blurs it, then adds the scene's noise level.
    """
    if scenario == "noisy":
        D, S_true = synth_video(scene)
        return D, S_true, ops.identity()
    if scenario == "blurred":
        clean = SyntheticSceneSpec(scene.frame_h, scene.frame_w, scene.n_frames,
                                   scene.fg_rects, 0.0, scene.seed, scene.background)
        D0, S_true = synth_video(clean)
        A = ops.frame_blur(scene.frame_h, scene.frame_w, psf_sigma)
        return corrupt_blur(D0, A, scene.noise_sigma, scene.seed), S_true, A
    raise ValueError(f"unknown scenario {scenario!r}")


# ---------------------------------------------------------------------------
# metrics


def f_measure(S_star, S_true, threshold=1e-3):
    """Support recovery scores of ``S_star`` against ``S_true``.

    Supports are the entries with magnitude above ``threshold``. Ratios with a
    zero denominator are reported as 0.
    """
    S_star, S_true = np.asarray(S_star), np.asarray(S_true)
    if S_star.shape != S_true.shape:
        raise ops.ShapeError(f"shape mismatch {S_star.shape} vs {S_true.shape}")
    est = np.abs(S_star) > threshold
    true = np.abs(S_true) > threshold
    tp = int(np.sum(est & true))
    fp = int(np.sum(est & ~true))
    fn = int(np.sum(~est & true))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if tp else 0.0
    return MetricsReport(tp, fp, fn, precision, recall, f)


def performance_ratios(table):
    """Divide each row (problem) by its smallest entry (best solver).

    Non-finite entries (failed runs) get an infinite ratio.
    """
    T = np.asarray(table, dtype=float)
    if T.ndim != 2:
        raise ValueError("expected a problems x solvers table")
    T = np.where(np.isfinite(T), T, np.inf)
    best = T.min(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        R = T / best
    return np.where(np.isnan(R), np.inf, R)


def performance_profile(ratios, nu_grid):
    """Fraction of problems each solver solves within factor ``nu``.

    Returns an array of shape ``(len(nu_grid), n_solvers)``.
    """
    R = np.asarray(ratios, dtype=float)
    nu = np.asarray(nu_grid, dtype=float)
    if R.shape[0] == 0:
        return np.zeros((len(nu), R.shape[1] if R.ndim == 2 else 0))
    return (R[None, :, :] <= nu[:, None, None]).mean(axis=1)


def relerr_trace(objective_traces, f_min=None):
    """``|F_k - F_min| / F_min`` for each solver's objective trace.

    ``f_min`` defaults to the smallest objective value seen by any solver.
    """
    traces = {k: np.asarray(v, dtype=float) for k, v in objective_traces.items()}
    if f_min is None:
        f_min = min(float(np.min(v)) for v in traces.values())
    if not f_min > 0:
        raise ValueError(f"f_min must be positive, got {f_min}")
    return {k: np.abs(v - f_min) / f_min for k, v in traces.items()}


# ---------------------------------------------------------------------------
# solver comparison


@dataclass(frozen=True)
class SolverSpec:
    name: str
    config: object

    def run(self, problem):
        return run_solver(self, problem)


def default_solvers(scenario="noisy", taus=(0.8, 1.0, 1.6)):
    """ADMM at each ``tau`` (adaptive penalty) plus PALM, with the tolerance
    settings used for each scenario."""
    if scenario == "noisy":
        t1, t2, tp = 1e-4, 5e-3, 1e-4
    elif scenario == "blurred":
        t1, t2, tp = 5e-3, 1e-2, 3e-3
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    out = [SolverSpec(f"admm_tau{tau:g}",
                      AdmmConfig(tau=tau, beta_policy=HeuristicBeta(), tol_a1=t1, tol_a2=t2,
                                 max_iter=5000))
           for tau in taus]
    out.append(SolverSpec("palm", PalmConfig(tol_p=tp, max_iter=5000)))
    return out


def run_solver(solver, problem):
    if isinstance(solver.config, AdmmConfig):
        return solve_admm(problem, solver.config)
    if isinstance(solver.config, PalmConfig):
        return solve_palm(problem, solver.config)
    raise TypeError(f"unsupported solver config {type(solver.config).__name__}")


@dataclass(frozen=True)
class Cell:
    """One (scene, penalty, mu) problem instance run by every solver."""

    video: str
    scene: SyntheticSceneSpec
    scenario: str
    penalty: PenaltySpec
    solvers: tuple = field(default=())
    box_radius: float = 1.0
    threshold: float = 1e-3
    psf_sigma: float = 1.0


def timed_run(solver, problem):
    """``(report, wall time in ms)``."""
    t0 = time.perf_counter()
    rep = run_solver(solver, problem)
    return rep, 1e3 * (time.perf_counter() - t0)


def run_cell(cell):
    """Run every solver on one cell; returns one result row per solver."""
    D, S_true, A = make_scenario(cell.scene, cell.scenario, cell.psf_sigma)
    problem = ProblemSpec(D, cell.penalty, ConstraintSetSpec(cell.box_radius), a_map=A)
    rows = []
    for solver in cell.solvers:
        rep, ms = timed_run(solver, problem)
        m = f_measure(rep.S, S_true, cell.threshold)
        rows.append({
            "video": cell.video,
            "scenario": cell.scenario,
            "regularizer": cell.penalty.kind,
            "param": cell.penalty.param,
            "mu": cell.penalty.mu,
            "solver": solver.name,
            "iter": rep.iterations,
            "converged": rep.converged,
            "objective": rep.objective,
            "f_measure": m.f_measure,
            "time_ms": ms,
            "report": rep,
        })
    return rows


def run_sweep(cells, jobs=1):
    """Run cells, optionally in a process pool; rows come back in cell order."""
    cells = list(cells)
    if jobs <= 1 or len(cells) <= 1:
        return [row for c in cells for row in run_cell(c)]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return [row for rows in pool.map(run_cell, cells) for row in rows]


def mu_sweep(D, S_true, penalty, solver, mus=MU_GRID, a_map=None, box_radius=1.0,
             threshold=1e-3):
    """Pick the ``mu`` with the best F-measure, breaking ties by iterations.

    Returns
    -------
    best : dict
        The winning row (``mu``, ``f_measure``, ``iter``, ``report``).
    rows : list of dict
        One row per ``mu`` in sweep order.
    """
    a_map = a_map if a_map is not None else ops.identity()
    rows = []
    for mu in mus:
        problem = ProblemSpec(D, penalty.with_mu(mu), ConstraintSetSpec(box_radius), a_map=a_map)
        rep = run_solver(solver, problem)
        m = f_measure(rep.S, S_true, threshold)
        rows.append({"mu": mu, "f_measure": m.f_measure, "iter": rep.iterations,
                     "metrics": m, "report": rep})
    best = min(rows, key=lambda r: (-r["f_measure"], r["iter"]))
    return best, rows


def profile_table(rows, measure="iter"):
    """Problems x solvers table of ``measure`` from sweep rows.

    Problems are keyed by (video, scenario, regularizer, param, mu) in first
    appearance order; solvers likewise.
    """
    problems, solvers = {}, {}
    for r in rows:
        problems.setdefault((r["video"], r["scenario"], r["regularizer"], r["param"], r["mu"]),
                            len(problems))
        solvers.setdefault(r["solver"], len(solvers))
    T = np.full((len(problems), len(solvers)), math.inf)
    for r in rows:
        key = (r["video"], r["scenario"], r["regularizer"], r["param"], r["mu"])
        T[problems[key], solvers[r["solver"]]] = r[measure]
    return T, list(solvers)
