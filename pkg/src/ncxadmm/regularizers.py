"""Separable sparsity penalties, their proximal maps, and the low-rank set.

A penalty is ``Phi(S) = mu * sum_ij phi(s_ij)`` with ``phi`` one of

========== ========================================================
bridge     ``|t|**p``, ``0 < p <= 1``
fraction   ``alpha |t| / (1 + alpha |t|)``
logistic   ``log(1 + alpha |t|)``
scad       ``int_0^|t| min(1, (alpha - s/mu)_+ / (alpha - 1)) ds``
mcp        ``int_0^|t| (1 - s/(alpha mu))_+ ds``
hard       ``mu - (mu - |t|)_+**2 / mu``
========== ========================================================

Note that ``mu`` appears both inside ``phi`` (scad, mcp, hard) and as the
outer weight, so e.g. the hard penalty saturates at ``mu**2`` per entry.

The low-rank part is the indicator of ``Omega = {L : |L|_inf <= l, all
columns equal}`` (or the plain box when ``equal_columns`` is false).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KINDS",
    "PenaltySpec",
    "ConstraintSetSpec",
    "phi_scalar",
    "phi_values",
    "phi_matrix",
    "prox_scalar",
    "prox_matrix",
    "project_omega",
    "in_omega",
    "h0_lower_bound",
    "check_init_condition",
]

KINDS = ("bridge", "fraction", "logistic", "scad", "mcp", "hard")

_NEWTON_ITERS = 100


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty kind with its weight ``mu`` and shape parameter.

    ``p`` is used by the bridge penalty, ``alpha`` by the others (the hard
    penalty has no shape parameter).
    """

    kind: str
    mu: float
    p: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}; expected one of {KINDS}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.kind == "bridge" and not 0 < self.p <= 1:
            raise ValueError(f"bridge penalty needs 0 < p <= 1, got {self.p}")
        if self.kind == "scad" and not self.alpha > 2:
            raise ValueError(f"SCAD needs alpha > 2, got {self.alpha}")
        if self.kind in ("fraction", "logistic", "mcp") and not self.alpha > 0:
            raise ValueError(f"{self.kind} penalty needs alpha > 0, got {self.alpha}")

    @property
    def param(self):
        """The shape parameter that matters for this kind (None for hard)."""
        if self.kind == "bridge":
            return self.p
        if self.kind == "hard":
            return None
        return self.alpha

    def with_mu(self, mu):
        return PenaltySpec(self.kind, mu, self.p, self.alpha)


@dataclass(frozen=True)
class ConstraintSetSpec:
    box_radius: float = 1.0
    equal_columns: bool = True

    def __post_init__(self):
        if not self.box_radius > 0:
            raise ValueError(f"box_radius must be positive, got {self.box_radius}")


# ---------------------------------------------------------------------------
# penalty values


def phi_values(spec, T):
    """Entrywise ``phi`` (without the outer ``mu``) for an array ``T``."""
    a = np.abs(np.asarray(T, dtype=float))
    mu, alpha = spec.mu, spec.alpha
    kind = spec.kind
    if kind == "bridge":
        if spec.p == 1:
            return a
        return np.where(a > 0, a ** spec.p, 0.0)
    if kind == "fraction":
        return alpha * a / (1.0 + alpha * a)
    if kind == "logistic":
        return np.log1p(alpha * a)
    if kind == "scad":
        mid = mu + (alpha * (a - mu) - (a**2 - mu**2) / (2 * mu)) / (alpha - 1)
        return np.where(a <= mu, a, np.where(a <= alpha * mu, mid, mu * (alpha + 1) / 2))
    if kind == "mcp":
        return np.where(a <= alpha * mu, a - a**2 / (2 * alpha * mu), alpha * mu / 2)
    # hard: mu - (mu - a)_+^2 / mu, written so phi(0) is exactly 0
    return np.where(a < mu, a * (2.0 - a / mu), mu)


def phi_scalar(spec, t):
    """Scalar penalty ``phi(t)``; the outer weight ``mu`` is not applied."""
    return float(phi_values(spec, t))


def phi_matrix(spec, S):
    """``Phi(S) = mu * sum_ij phi(s_ij)``."""
    return float(spec.mu * np.sum(phi_values(spec, S)))


# ---------------------------------------------------------------------------
# proximal map


def _larger_root(g, dg, smin, a):
    """Larger root of ``g(s, a) = 0`` where ``g(., a)`` is convex with its
    minimum at ``smin``; zero where no root exists in ``(smin, a]``.

    Newton's method started at ``s = a`` (where ``g > 0``) decreases
    monotonically onto the root because ``g`` is convex and increasing to the
    right of ``smin``.
    """
    out = np.zeros_like(a)
    live = a > smin
    t = a[live]
    has = g(np.full_like(t, smin), t) <= 0
    t = t[has]
    s = t.copy()
    for _ in range(_NEWTON_ITERS):
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.nan_to_num(g(s, t) / dg(s))
        s = np.maximum(s - step, smin)
        if not np.any(np.abs(step) > 4 * np.finfo(float).eps * (1 + s)):
            break
    sub = out[live]
    sub[has] = s
    out[live] = sub
    return out


def _stationary_candidates(spec, a, lam):
    """Candidate minimizers on ``[0, a]`` of ``lam*phi(s) + (s - a)**2 / 2``.

    Returns a list of arrays broadcastable against ``a``; entries that are
    outside ``[0, a]`` are clipped later and compared by objective value.
    """
    mu, alpha = spec.mu, spec.alpha
    kind = spec.kind
    cands = [np.zeros_like(a), a]

    if kind == "bridge":
        p = spec.p
        if p == 1:
            cands.append(a - lam)
            return cands
        # s + lam p s^(p-1) = a; the left side is convex with its minimum at smin
        smin = (lam * p * (1 - p)) ** (1.0 / (2 - p))
        cands.append(_larger_root(lambda s, t: s + lam * p * s ** (p - 1) - t,
                                  lambda s: 1 + lam * p * (p - 1) * s ** (p - 2), smin, a))
        return cands

    if kind == "fraction":
        # s + lam alpha / (1 + alpha s)^2 = a, convex in s >= 0
        smin = max(((2 * lam * alpha**2) ** (1.0 / 3) - 1) / alpha, 0.0)
        cands.append(_larger_root(lambda s, t: s + lam * alpha / (1 + alpha * s) ** 2 - t,
                                  lambda s: 1 - 2 * lam * alpha**2 / (1 + alpha * s) ** 3,
                                  smin, a))
        return cands

    if kind == "logistic":
        # alpha s^2 + (1 - alpha a) s + (lam alpha - a) = 0
        b = 1 - alpha * a
        c = lam * alpha - a
        disc = b * b - 4 * alpha * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        # larger root without cancellation
        big = np.where(b < 0, (-b + sq) / (2 * alpha), -2 * c / np.where(b + sq == 0, 1.0, b + sq))
        cands.append(np.where(disc >= 0, big, 0.0))
        return cands

    if kind == "scad":
        cands += [np.full_like(a, mu), np.full_like(a, alpha * mu)]
        cands.append(a - lam)  # slope-1 piece
        denom = 1 - lam / (mu * (alpha - 1))
        if denom != 0:
            cands.append((a - lam * alpha / (alpha - 1)) / denom)
        return cands

    if kind == "mcp":
        cands.append(np.full_like(a, alpha * mu))
        denom = 1 - lam / (alpha * mu)
        if denom != 0:
            cands.append((a - lam) / denom)
        return cands

    # hard: phi = 2s - s^2/mu on [0, mu]
    cands.append(np.full_like(a, mu))
    denom = 1 - 2 * lam / mu
    if denom != 0:
        cands.append((a - 2 * lam) / denom)
    return cands


def prox_matrix(spec, V, beta):
    """Entrywise ``argmin_s mu*phi(s) + beta/2 (s - v)**2``.

    Every candidate stationary point on ``[0, |v|]`` is enumerated (plus the
    endpoints and the penalty's breakpoints) and the one with the lowest
    objective wins; exact ties go to the smaller magnitude. The result carries
    the sign of ``v``.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    V = np.asarray(V, dtype=float)
    a = np.abs(V)
    lam = spec.mu / beta
    cands = np.stack([np.clip(np.broadcast_to(c, a.shape), 0.0, a)
                      for c in _stationary_candidates(spec, a, lam)])
    obj = lam * phi_values(spec, cands) + 0.5 * (cands - a) ** 2
    best = obj.min(axis=0)
    s = np.where(obj <= best, cands, np.inf).min(axis=0)
    return np.where(s > 0, np.copysign(s, V), 0.0)


def prox_scalar(spec, v, beta):
    return float(prox_matrix(spec, np.array([[v]]), beta)[0, 0])


# ---------------------------------------------------------------------------
# constraint set


def project_omega(omega, X):
    """Euclidean projection onto ``Omega``.

    With equal columns the projection is the row mean clipped to the box and
    broadcast across columns; otherwise it is an entrywise clip.
    """
    X = np.asarray(X, dtype=float)
    l = omega.box_radius
    if not omega.equal_columns:
        return np.clip(X, -l, l)
    u = X.mean(axis=1, keepdims=True)
    # a row mean of equal entries can be off by an ulp; keep such rows exact
    const = np.all(X == X[:, :1], axis=1, keepdims=True)
    u = np.clip(np.where(const, X[:, :1], u), -l, l)
    return np.repeat(u, X.shape[1], axis=1)


def in_omega(omega, X, tol=1e-12):
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return True
    if np.max(np.abs(X)) > omega.box_radius + tol:
        return False
    if omega.equal_columns:
        return bool(np.all(np.abs(X - X[:, :1]) <= tol))
    return True


# ---------------------------------------------------------------------------
# initialization support


def h0_lower_bound(spec):
    """``liminf Phi(S)`` as ``||S||_F -> inf``."""
    mu, alpha = spec.mu, spec.alpha
    if spec.kind in ("bridge", "logistic"):
        return math.inf
    if spec.kind == "fraction":
        return mu
    if spec.kind == "scad":
        return 0.5 * (alpha + 1) * mu**2
    if spec.kind == "mcp":
        return 0.5 * alpha * mu**2
    return mu**2


def check_init_condition(problem, kappa=1.0):
    """Test ``1/2 ||D - A(B(P_Omega(kappa D)))||^2 < h0``.

    Returns
    -------
    passed : bool
    margin : float
        ``h0`` minus the left side; positive when the test passes.
    """
    from .operators import apply

    D = problem.D
    L0 = project_omega(problem.psi, kappa * D)
    lhs = 0.5 * np.linalg.norm(D - apply(problem.a_map, apply(problem.b_map, L0))) ** 2
    margin = h0_lower_bound(problem.phi) - lhs
    return bool(margin > 0), float(margin)
