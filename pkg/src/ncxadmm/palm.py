"""Proximal alternating linearized minimization, used as the baseline."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .problem import RunReport, initialize, objective
from .regularizers import project_omega, prox_matrix

__all__ = ["PalmConfig", "palm_step", "solve_palm"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PalmConfig:
    """Both block step sizes are ``1/c`` with ``c = lambda_max / step_factor``."""

    step_factor: float = 0.99
    tol_p: float = 1e-4
    max_iter: int = 1000
    min_iter: int = 0

    def __post_init__(self):
        if not 0 < self.step_factor < 1:
            raise ValueError(f"step_factor must lie in (0, 1), got {self.step_factor}")
        if not self.tol_p > 0:
            raise ValueError("tol_p must be positive")
        if self.max_iter < 1 or self.min_iter < 0:
            raise ValueError("max_iter must be >= 1 and min_iter >= 0")


def _residual_grad(A, D, X):
    return ops.apply_adjoint(A, ops.apply(A, X) - D)


def palm_step(problem, config, L, S):
    if not problem.identity_splitting:
        raise NotImplementedError("PALM updates are implemented for B = C = identity only")
    c = problem.eigen_bounds()[1] / config.step_factor
    A, D = problem.a_map, problem.D
    L_new = project_omega(problem.psi, L - _residual_grad(A, D, L + S) / c)
    S_new = prox_matrix(problem.phi, S - _residual_grad(A, D, L_new + S) / c, c)
    return L_new, S_new


def solve_palm(problem, config, init=None):
    """Iterate :func:`palm_step` until the relative change of ``(L, S)``
    drops below ``tol_p``.

    ``init`` is an ``(L, S)`` pair; by default the same start point as the
    ADMM (``L = P(D)``, ``S = 0``).
    """
    if init is None:
        st = initialize(problem)
        L, S = st.L, st.S
    else:
        L, S = (np.array(x, dtype=float) for x in init)

    keys = ("k", "objective", "dL", "dS")
    rows = {key: [] for key in keys}

    def record(k, L, S, dL, dS):
        rows["k"].append(k)
        rows["objective"].append(objective(problem, L, S))
        rows["dL"].append(dL)
        rows["dS"].append(dS)

    start = time.perf_counter()
    record(0, L, S, math.nan, math.nan)
    converged = False
    k = 0
    for k in range(1, config.max_iter + 1):
        L_new, S_new = palm_step(problem, config, L, S)
        dL, dS = np.linalg.norm(L_new - L), np.linalg.norm(S_new - S)
        record(k, L_new, S_new, float(dL), float(dS))
        rel = (dL + dS) / (np.linalg.norm(L_new) + np.linalg.norm(S_new) + 1)
        L, S = L_new, S_new
        if k >= config.min_iter and rel < config.tol_p:
            converged = True
            break
    elapsed = time.perf_counter() - start
    if not converged:
        log.info("PALM hit max_iter=%d without meeting the tolerance", config.max_iter)
    return RunReport(
        solver="palm", L=L, S=S, iterations=k, converged=converged, elapsed=elapsed,
        trace={key: np.asarray(val, dtype=float) for key, val in rows.items()},
    )
