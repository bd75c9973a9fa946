"""Three-block ADMM with a general dual step-size.

The splitting ``B(L) + C(S) = Z`` turns the model into

    min Psi(L) + Phi(S) + 1/2 ||D - A(Z)||^2   s.t.   B(L) + C(S) = Z,

and each iteration minimizes the augmented Lagrangian over ``L``, ``S`` and
``Z`` in turn before moving the multiplier by ``tau * beta`` times the
constraint residual.  For ``0 < tau < (1 + sqrt 5)/2`` and ``beta`` above
:func:`beta_bar`, the potential :func:`potential` is non-increasing along the
iterates, which is what :func:`solve` records and the tests check.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from . import operators as ops
from .problem import (
    RunReport,
    SolverState,
    constraint_violation,
    initialize,
    objective,
)
from .regularizers import in_omega, phi_matrix, project_omega, prox_matrix

__all__ = [
    "GOLDEN",
    "FixedBeta",
    "HeuristicBeta",
    "AdmmConfig",
    "theta",
    "beta_bar",
    "decrease_coefficients",
    "augmented_lagrangian",
    "potential",
    "admm_step",
    "update_beta_heuristic",
    "check_termination",
    "solve",
]

log = logging.getLogger(__name__)

GOLDEN = (1 + math.sqrt(5)) / 2


def _check_tau(tau):
    if not 0 < tau < GOLDEN:
        raise ValueError(f"tau must lie in (0, {GOLDEN:.6f}), got {tau}")


@dataclass(frozen=True)
class FixedBeta:
    """Constant penalty. With ``guaranteed=True`` the solver refuses any
    ``beta`` below ``1.0001 * beta_bar``."""

    beta: float
    guaranteed: bool = False

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")


@dataclass(frozen=True)
class HeuristicBeta:
    """Start at ``init_factor * beta_bar`` and grow by ``growth`` while the
    successive changes stagnate and ``beta <= cap_factor * beta_bar``."""

    init_factor: float = 0.6
    growth: float = 1.1
    cap_factor: float = 1.01
    ns_ratio: float = 0.3
    fnorm_cap: float = 1e10
    decay: float = 0.99


@dataclass(frozen=True)
class AdmmConfig:
    tau: float = 1.0
    beta_policy: Union[FixedBeta, HeuristicBeta] = field(default_factory=HeuristicBeta)
    tol_a1: float = 1e-4
    tol_a2: float = 5e-3
    max_iter: int = 1000
    min_iter: int = 0

    def __post_init__(self):
        _check_tau(self.tau)
        if not (self.tol_a1 > 0 and self.tol_a2 > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.min_iter < 0:
            raise ValueError("max_iter must be >= 1 and min_iter >= 0")


# ---------------------------------------------------------------------------
# threshold and potential


def theta(tau):
    """``max{1 - tau, (tau - 1) tau^2 / (1 + tau - tau^2)}``."""
    _check_tau(tau)
    return max(1 - tau, (tau - 1) * tau**2 / (1 + tau - tau**2))


def _gamma(tau):
    return max(1 / tau, tau**2 / (1 + tau - tau**2))


def beta_bar(tau, lambda_min, lambda_max):
    """Penalty threshold above which the potential decreases and the
    iterates stay bounded."""
    _check_tau(tau)
    first = max(1 / tau, tau) * lambda_max
    second = -lambda_min / 2 + 0.5 * math.sqrt(lambda_min**2 + 8 * _gamma(tau) * lambda_max**2)
    return max(first, second)


def decrease_coefficients(tau, beta, lambda_min, lambda_max, sigma=1.0):
    """Coefficients ``(c_L, c_Z)`` of the guaranteed per-step decrease

        Theta_k - Theta_{k+1} >= c_L ||dL||^2 + c_Z ||dZ||^2   (k >= 1).
    """
    c_z = (lambda_min + beta) / 2 - _gamma(tau) * lambda_max**2 / beta
    return sigma * beta / 2, c_z


def augmented_lagrangian(problem, beta, state):
    """``Psi + Phi + 1/2||D - A(Z)||^2 - <Lam, R> + beta/2 ||R||^2`` with
    ``R = B(L) + C(S) - Z``."""
    if not in_omega(problem.psi, state.L):
        return math.inf
    R = ops.apply(problem.b_map, state.L) + ops.apply(problem.c_map, state.S) - state.Z
    fit = problem.D - ops.apply(problem.a_map, state.Z)
    return (phi_matrix(problem.phi, state.S) + 0.5 * float(np.vdot(fit, fit))
            - float(np.vdot(state.Lam, R)) + 0.5 * beta * float(np.vdot(R, R)))


def potential(problem, tau, beta, state):
    """Augmented Lagrangian plus ``theta(tau) * beta * ||R||^2``."""
    lag = augmented_lagrangian(problem, beta, state)
    return lag + theta(tau) * beta * constraint_violation(problem, state) ** 2


# ---------------------------------------------------------------------------
# iteration


def admm_step(problem, config, state):
    """One sweep of L-, S-, Z- and multiplier updates at penalty ``state.beta``."""
    if not problem.identity_splitting:
        raise NotImplementedError("ADMM updates are implemented for B = C = identity only")
    beta, tau = state.beta, config.tau
    A = problem.a_map
    shifted = state.Z + state.Lam / beta
    L = project_omega(problem.psi, shifted - state.S)
    S = prox_matrix(problem.phi, shifted - L, beta)
    rhs = ops.apply_adjoint(A, problem.D) - state.Lam + beta * (L + S)
    Z = ops.solve_z_system(A, beta, rhs, x0=state.Z)
    Lam = state.Lam - tau * beta * (L + S - Z)
    return SolverState(L, S, Z, Lam, beta, state.ns, state.succ_chg_prev)


def update_beta_heuristic(config, state, k, succ_chg, fnorm, beta_bar_value):
    """Adaptive penalty rule, checked once per iteration ``k >= 1``.

    ``ns`` counts iterations whose successive change failed to shrink by the
    factor ``decay``; ``beta`` grows by ``growth`` while it is at most
    ``cap_factor * beta_bar`` and either ``ns >= ns_ratio * k`` or the
    iterates blow past ``fnorm_cap``.
    """
    pol = config.beta_policy
    ns = state.ns
    if succ_chg > pol.decay * state.succ_chg_prev:
        ns += 1
    beta = state.beta
    if beta <= pol.cap_factor * beta_bar_value and (ns >= pol.ns_ratio * k or fnorm > pol.fnorm_cap):
        beta *= pol.growth
    return replace(state, beta=beta, ns=ns, succ_chg_prev=succ_chg)


def _rel(a_new, a_old, b_new, b_old):
    num = np.linalg.norm(a_new - a_old) + np.linalg.norm(b_new - b_old)
    return num / (np.linalg.norm(a_new) + np.linalg.norm(b_new) + 1)


def check_termination(prev, state, config):
    """Two-stage relative-change test; True means stop.

    The ``(S, Lambda)`` stage is only evaluated once the ``(L, Z)`` stage
    passes.
    """
    if _rel(state.L, prev.L, state.Z, prev.Z) >= config.tol_a1:
        return False
    return bool(_rel(state.S, prev.S, state.Lam, prev.Lam) < config.tol_a2)


_TRACE_KEYS = ("k", "objective", "potential", "violation", "succ_chg", "beta",
               "dL", "dS", "dZ", "dLam", "fnorm")


def solve(problem, config, init_state=None):
    """Run ADMM until the two-stage test passes or ``max_iter`` is reached.

    Parameters
    ----------
    problem : ProblemSpec
    config : AdmmConfig
    init_state : SolverState, optional
        Starting iterate; defaults to :func:`~ncxadmm.problem.initialize`
        with ``kappa = 1``. Its ``beta`` is overwritten by the penalty policy.

    Returns
    -------
    RunReport
        ``converged`` is False when ``max_iter`` ran out. The trace holds the
        objective, potential (at the penalty used for that step), constraint
        violation, successive change, penalty and the per-block change norms.
    """
    lmin, lmax = problem.eigen_bounds()
    bb = beta_bar(config.tau, lmin, lmax)
    pol = config.beta_policy
    state = (init_state if init_state is not None else initialize(problem)).copy()
    if isinstance(pol, FixedBeta):
        if pol.guaranteed and pol.beta < 1.0001 * bb:
            raise ValueError(f"beta={pol.beta} is below the guaranteed threshold 1.0001*{bb:.6g}")
        state.beta = pol.beta
    else:
        state.beta = pol.init_factor * bb
    state.ns, state.succ_chg_prev = 0, math.inf

    rows = {key: [] for key in _TRACE_KEYS}

    def record(k, st, beta, diffs, succ_chg):
        rows["k"].append(k)
        rows["objective"].append(objective(problem, st.L, st.S))
        rows["potential"].append(potential(problem, config.tau, beta, st))
        rows["violation"].append(constraint_violation(problem, st))
        rows["succ_chg"].append(succ_chg)
        rows["beta"].append(beta)
        for key, val in zip(("dL", "dS", "dZ", "dLam"), diffs):
            rows[key].append(val)
        rows["fnorm"].append(float(np.linalg.norm(st.L) + np.linalg.norm(st.Z)))

    start = time.perf_counter()
    record(0, state, state.beta, (math.nan,) * 4, math.nan)
    converged = False
    k = 0
    for k in range(1, config.max_iter + 1):
        new = admm_step(problem, config, state)
        diffs = tuple(float(np.linalg.norm(getattr(new, name) - getattr(state, name)))
                      for name in ("L", "S", "Z", "Lam"))
        succ_chg = diffs[0] + diffs[2]
        record(k, new, state.beta, diffs, succ_chg)
        if isinstance(pol, HeuristicBeta):
            new = update_beta_heuristic(config, new, k, succ_chg, rows["fnorm"][-1], bb)
        stop = k >= config.min_iter and check_termination(state, new, config)
        state = new
        if stop:
            converged = True
            break
    elapsed = time.perf_counter() - start
    if not converged:
        log.info("ADMM hit max_iter=%d without meeting the tolerances", config.max_iter)

    return RunReport(
        solver=f"admm(tau={config.tau:g})",
        L=state.L, S=state.S, Z=state.Z, Lam=state.Lam, beta=state.beta,
        iterations=k, converged=converged, elapsed=elapsed,
        trace={key: np.asarray(val, dtype=float) for key, val in rows.items()},
    )
