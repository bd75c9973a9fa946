"""ADMM with a general dual step-size for nonconvex low-rank plus sparse models."""

from .operators import (
    LinearMapSpec,
    ShapeError,
    SolverError,
    UnsupportedPSFError,
    apply,
    apply_adjoint,
    frame_blur,
    gaussian_psf,
    gram_eigen_bounds,
    identity,
    kron_decomp_periodic,
    solve_z_system,
)
from .regularizers import (
    ConstraintSetSpec,
    PenaltySpec,
    check_init_condition,
    h0_lower_bound,
    phi_matrix,
    phi_scalar,
    project_omega,
    prox_matrix,
    prox_scalar,
)
from .problem import (
    ProblemSpec,
    SolverState,
    constraint_violation,
    initialize,
    objective,
    stationarity_residual,
)
from .admm import (
    AdmmConfig,
    FixedBeta,
    HeuristicBeta,
    RunReport,
    admm_step,
    augmented_lagrangian,
    beta_bar,
    potential,
    solve,
    theta,
)
from .palm import PalmConfig, palm_step, solve_palm
from . import bench, io

__version__ = "0.1.0"
