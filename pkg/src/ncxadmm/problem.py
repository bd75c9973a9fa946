"""Problem assembly, objective, stationarity measure and safe initialization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import operators as ops
from .regularizers import (
    ConstraintSetSpec,
    PenaltySpec,
    in_omega,
    phi_matrix,
    project_omega,
    prox_matrix,
)

__all__ = [
    "ProblemSpec",
    "SolverState",
    "objective",
    "gradient",
    "stationarity_residual",
    "initialize",
    "constraint_violation",
    "RunReport",
]


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """``min Psi(L) + Phi(S) + 1/2 ||D - A[B(L) + C(S)]||_F^2``.

    ``Psi`` is the indicator of the set described by ``psi``; ``Phi`` is the
    separable penalty described by ``phi``.
    """

    D: np.ndarray
    phi: PenaltySpec
    psi: ConstraintSetSpec = field(default_factory=ConstraintSetSpec)
    a_map: ops.LinearMapSpec = field(default_factory=ops.identity)
    b_map: ops.LinearMapSpec = field(default_factory=ops.identity)
    c_map: ops.LinearMapSpec = field(default_factory=ops.identity)

    def __post_init__(self):
        D = np.array(self.D, dtype=float)
        if D.ndim != 2:
            raise ops.ShapeError(f"D must be a matrix, got shape {D.shape}")
        D.setflags(write=False)
        object.__setattr__(self, "D", D)
        for name in ("a_map", "b_map", "c_map"):
            A = getattr(self, name)
            if not A.is_identity and A.frame_size != D.shape[0]:
                raise ops.ShapeError(
                    f"{name} acts on {A.frame_size}-pixel frames but D has {D.shape[0]} rows"
                )
        for name in ("b_map", "c_map"):
            if ops.gram_eigen_bounds(getattr(self, name))[0] <= 0:
                raise ValueError(f"{name} must be injective")

    @property
    def shape(self):
        return self.D.shape

    @property
    def identity_splitting(self):
        return self.b_map.is_identity and self.c_map.is_identity

    def with_penalty(self, phi):
        return replace(self, phi=phi)

    def eigen_bounds(self):
        """``(lambda_min, lambda_max)`` of ``A*A``."""
        return ops.gram_eigen_bounds(self.a_map)


@dataclass
class SolverState:
    """ADMM iterate ``(L, S, Z, Lambda)`` plus the adaptive-penalty counters."""

    L: np.ndarray
    S: np.ndarray
    Z: np.ndarray
    Lam: np.ndarray
    beta: float = 1.0
    ns: int = 0
    succ_chg_prev: float = math.inf

    def copy(self):
        return SolverState(self.L.copy(), self.S.copy(), self.Z.copy(), self.Lam.copy(),
                           self.beta, self.ns, self.succ_chg_prev)


def _model(problem, L, S):
    return ops.apply(problem.b_map, L) + ops.apply(problem.c_map, S)


def objective(problem, L, S):
    """``F(L, S)``; infinite when ``L`` leaves the constraint set."""
    if not in_omega(problem.psi, L):
        return math.inf
    fit = problem.D - ops.apply(problem.a_map, _model(problem, L, S))
    return phi_matrix(problem.phi, S) + 0.5 * float(np.vdot(fit, fit))


def gradient(problem, L, S):
    """Gradients of the smooth data-fit term with respect to ``L`` and ``S``."""
    A = problem.a_map
    W = ops.apply_adjoint(A, ops.apply(A, _model(problem, L, S)) - problem.D)
    return ops.apply_adjoint(problem.b_map, W), ops.apply_adjoint(problem.c_map, W)


def stationarity_residual(problem, L, S, t=None):
    """Prox-gradient residual, zero exactly at stationary points.

    ``r(t) = ||L - P(L - t G_L)|| / t + ||S - prox_{t Phi}(S - t G_S)|| / t``
    with ``G_L, G_S`` the data-fit gradients. ``t`` defaults to
    ``1 / lambda_max``.
    """
    if t is None:
        t = 1.0 / problem.eigen_bounds()[1]
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    GL, GS = gradient(problem, L, S)
    rL = L - project_omega(problem.psi, L - t * GL)
    rS = S - prox_matrix(problem.phi, S - t * GS, 1.0 / t)
    return float((np.linalg.norm(rL) + np.linalg.norm(rS)) / t)


def initialize(problem, kappa=1.0, beta=1.0):
    """Start point ``L = P(kappa D)``, ``S = 0``, ``Z = B(L)``,
    ``Lambda = A*(D - A(Z))``.

    This choice makes the first ADMM step non-increasing in the potential
    whenever the penalty exceeds its threshold.
    """
    L0 = project_omega(problem.psi, kappa * problem.D)
    S0 = np.zeros_like(problem.D)
    Z0 = ops.apply(problem.b_map, L0).copy()
    Lam0 = ops.apply_adjoint(problem.a_map, problem.D - ops.apply(problem.a_map, Z0))
    return SolverState(L0, S0, Z0, np.array(Lam0, dtype=float), beta=float(beta))


def constraint_violation(problem, state):
    """``||B(L) + C(S) - Z||_F``."""
    return float(np.linalg.norm(_model(problem, state.L, state.S) - state.Z))


@dataclass
class RunReport:
    """Outcome of one solver run.

    ``trace`` maps column names to per-iteration arrays; row ``i`` describes
    iterate ``trace["k"][i]``, starting from the initial point ``k = 0``.
    """

    solver: str
    L: np.ndarray
    S: np.ndarray
    iterations: int
    converged: bool
    trace: dict
    elapsed: float
    Z: np.ndarray = None
    Lam: np.ndarray = None
    beta: float = None

    @property
    def objective(self):
        return float(self.trace["objective"][-1])
