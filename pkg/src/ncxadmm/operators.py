"""Linear forward maps on data matrices whose columns are vectorized frames.

Two kinds of map are supported: the identity, and a frame-wise Gaussian blur
with periodic boundary conditions.  A blur map is the Kronecker product
``Hr (x) Hc`` of two small circulant matrices acting on every column of the
data matrix, where each column holds one ``frame_h x frame_w`` frame stacked
in column-major order.  With that convention ``(Hr (x) Hc) vec(F) =
vec(Hc @ F @ Hr.T)``, so ``Hc`` is ``frame_h x frame_h`` and ``Hr`` is
``frame_w x frame_w``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import circulant
from scipy.sparse.linalg import LinearOperator, cg

__all__ = [
    "LinearMapSpec",
    "ShapeError",
    "UnsupportedPSFError",
    "SolverError",
    "identity",
    "frame_blur",
    "apply",
    "apply_adjoint",
    "gaussian_psf",
    "kron_decomp_periodic",
    "gram_eigen_bounds",
    "solve_z_system",
]

CG_RTOL = 1e-9


class ShapeError(ValueError):
    """Matrix dimensions do not match the linear map."""


class UnsupportedPSFError(ValueError):
    """The point spread function cannot be split into Kronecker factors."""


class SolverError(RuntimeError):
    """An inner linear solve failed to reach its residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class LinearMapSpec:
    """Immutable description of a linear map on ``m x n`` matrices.

    Build instances with :func:`identity` or :func:`frame_blur` rather than
    calling the constructor directly.
    """

    kind: str = "identity"
    frame_h: Optional[int] = None
    frame_w: Optional[int] = None
    psf_sigma: Optional[float] = None
    Hr: Optional[np.ndarray] = field(default=None, repr=False)
    Hc: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def is_identity(self):
        return self.kind == "identity"

    @property
    def frame_size(self):
        if self.is_identity:
            return None
        return self.frame_h * self.frame_w


def identity():
    return LinearMapSpec("identity")


def frame_blur(frame_h, frame_w, psf_sigma=1.0):
    """Periodic Gaussian blur applied independently to every frame."""
    frame_h, frame_w = int(frame_h), int(frame_w)
    if frame_h <= 0 or frame_w <= 0:
        raise ValueError("frame dimensions must be positive")
    psf, center = gaussian_psf(frame_h, frame_w, psf_sigma)
    Hr, Hc = kron_decomp_periodic(psf, center)
    Hr.setflags(write=False)
    Hc.setflags(write=False)
    return LinearMapSpec("frame_blur", frame_h, frame_w, float(psf_sigma), Hr, Hc)


def _check_shape(A, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {X.shape}")
    if not A.is_identity and X.shape[0] != A.frame_size:
        raise ShapeError(
            f"matrix has {X.shape[0]} rows but frames hold "
            f"{A.frame_h}x{A.frame_w}={A.frame_size} pixels"
        )
    return X


def _frames(A, X):
    # column j -> frame_h x frame_w frame stored column-major; result (n, h, w)
    return X.T.reshape(X.shape[1], A.frame_w, A.frame_h).transpose(0, 2, 1)


def _unframes(F):
    n, h, w = F.shape
    return F.transpose(0, 2, 1).reshape(n, h * w).T


def apply(A, X):
    """Return ``A(X)``."""
    X = _check_shape(A, X)
    if A.is_identity:
        return X
    return _unframes(A.Hc @ _frames(A, X) @ A.Hr.T)


def apply_adjoint(A, X):
    """Return ``A*(X)``, the adjoint with respect to the trace inner product."""
    X = _check_shape(A, X)
    if A.is_identity:
        return X
    # adjoint of F -> Hc F Hr^T is G -> Hc^T G Hr
    return _unframes(A.Hc.T @ _frames(A, X) @ A.Hr)


def gaussian_psf(frame_h, frame_w, psf_sigma):
    """Gaussian point spread function on a full ``frame_h x frame_w`` grid.

    Returns
    -------
    psf : ndarray, shape (frame_h, frame_w)
        Nonnegative entries summing to one.
    center : tuple of int
        Location of the peak in 1-based indexing,
        ``(frame_h // 2 + 1, frame_w // 2 + 1)``.
    """
    if not psf_sigma > 0:
        raise ValueError(f"psf_sigma must be positive, got {psf_sigma}")
    if frame_h <= 0 or frame_w <= 0:
        raise ValueError("frame dimensions must be positive")
    y = np.arange(frame_h) - frame_h // 2
    x = np.arange(frame_w) - frame_w // 2
    Y, X = np.meshgrid(y, x, indexing="ij")
    psf = np.exp(-(X**2) / (2 * psf_sigma**2) - (Y**2) / (2 * psf_sigma**2))
    psf /= psf.sum()
    return psf, (frame_h // 2 + 1, frame_w // 2 + 1)


def kron_decomp_periodic(psf, center):
    """Split a separable PSF into circulant factors ``(Hr, Hc)``.

    The PSF is factored as ``c r^T`` through its leading singular pair. Each
    factor becomes a circulant matrix whose first column is the vector rotated
    so that the PSF center lands at index 0; both vectors are rescaled to unit
    sum so the factors preserve constant frames.

    Raises
    ------
    UnsupportedPSFError
        If the PSF is not rank one to within ``1e-8`` relative.
    """
    psf = np.asarray(psf, dtype=float)
    U, s, Vt = np.linalg.svd(psf)
    if s[0] <= 0:
        raise UnsupportedPSFError("PSF is identically zero")
    if len(s) > 1 and s[1] > 1e-8 * s[0]:
        raise UnsupportedPSFError(
            f"PSF is not separable (sigma_2/sigma_1 = {s[1] / s[0]:.3e})"
        )
    c = np.sqrt(s[0]) * U[:, 0]
    r = np.sqrt(s[0]) * Vt[0, :]
    if c.sum() < 0:
        c, r = -c, -r
    c_sum, r_sum = c.sum(), r.sum()
    if abs(c_sum) > 0 and abs(r_sum) > 0:
        # c r^T is unchanged; for a unit-mass PSF both factors get unit mass
        c, r = c / c_sum, r * c_sum
    ci, cj = center[0] - 1, center[1] - 1
    Hc = circulant(np.roll(c, -ci))
    Hr = circulant(np.roll(r, -cj))
    return Hr, Hc


def gram_eigen_bounds(A):
    """Smallest and largest eigenvalue of ``A*A``.

    For a Kronecker map the singular values are products of the factors'
    singular values, so both bounds follow from two small SVDs.
    """
    if A.is_identity:
        return 1.0, 1.0
    sr = np.linalg.svd(A.Hr, compute_uv=False)
    sc = np.linalg.svd(A.Hc, compute_uv=False)
    return float((sr.min() * sc.min()) ** 2), float((sr.max() * sc.max()) ** 2)


def solve_z_system(A, beta, rhs, x0=None):
    """Solve ``A*A(Z) + beta Z = rhs`` for ``Z``.

    The identity map is handled in closed form. Otherwise conjugate gradients
    runs on the symmetric positive definite operator until the true residual
    satisfies ``||A*A(Z) + beta Z - rhs||_F <= 1e-9 (1 + ||rhs||_F)``.

    Raises
    ------
    SolverError
        If the residual bound is not met within ``10 m`` iterations.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    rhs = _check_shape(A, rhs)
    if A.is_identity:
        return rhs / (1.0 + beta)

    shape = rhs.shape
    tol = CG_RTOL * (1.0 + np.linalg.norm(rhs))

    def normal(x):
        X = x.reshape(shape)
        return (apply_adjoint(A, apply(A, X)) + beta * X).ravel()

    op = LinearOperator((rhs.size, rhs.size), matvec=normal, dtype=float)
    guess = None if x0 is None else np.asarray(x0, dtype=float).ravel()
    # the recursive residual can drift from the true one; aim a bit lower
    z, _ = cg(op, rhs.ravel(), x0=guess, rtol=0.0, atol=0.1 * tol,
              maxiter=10 * shape[0])
    resid = np.linalg.norm(normal(z) - rhs.ravel())
    if resid > tol:
        raise SolverError(
            f"conjugate gradients stalled at residual {resid:.3e} > {tol:.3e}",
            residual=resid,
        )
    return z.reshape(shape)
