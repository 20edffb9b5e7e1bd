"""Closed embedded submanifolds of R^n and their tubular coordinates.

A submanifold Sigma of codimension d is represented implicitly as the zero
set of a constraint map F: R^n -> R^d with full-rank Jacobian.  Every point
x closer to Sigma than the tube radius has a unique closest point xi on
Sigma; the triple (xi, omega, rho) of foot point, unit fiber direction
(coordinates with respect to an orthonormal normal frame at xi) and distance
are the tubular coordinates of x, and x = xi + rho * sum_k omega_k n_k(xi).

All evaluation callbacks broadcast over leading axes: points are arrays of
shape (..., n).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NoConvergence, OnManifold, RankDeficient

# Projection iteration targets.  The constraint residual bound is tighter
# than the contract (1e-12) so the post-condition holds with margin.
_PROJ_TOL_F = 1e-13
_PROJ_TOL_STEP = 1e-12
_PROJ_MAX_ITER = 50
_ON_MANIFOLD_RHO = 1e-13


@dataclass(frozen=True)
class Submanifold:
    """Implicit description of a closed submanifold Sigma in R^n.

    ``constraint`` maps (..., n) -> (..., d) and vanishes exactly on Sigma;
    ``constraint_jacobian`` maps (..., n) -> (..., d, n).  ``tube_radius``
    is a constant radius within which closest-point projection is unique;
    shipped shapes declare it exactly, generic shapes must supply a safe
    value.  ``closed_form_projection``, when present, is used as the fast
    path for ``project`` and must be complex-step safe for the shipped
    shapes.  ``constraint_hessian`` maps (..., n) -> (..., d, n, n); without
    it the Newton projector falls back to finite differences of the
    Jacobian.
    """

    ambient_dim: int
    codim: int
    constraint: Callable
    constraint_jacobian: Callable
    tube_radius: float
    closed_form_projection: Optional[Callable] = None
    constraint_hessian: Optional[Callable] = None
    shape_id: str = "implicit"
    shape_params: dict = field(default_factory=dict)
    oracle: object = None

    def __post_init__(self):
        if self.ambient_dim < 2:
            raise ValueError("ambient_dim must be >= 2")
        if not 1 <= self.codim < self.ambient_dim:
            raise ValueError("codim must satisfy 1 <= d < n")
        if self.tube_radius <= 0:
            raise ValueError("tube_radius must be positive")


@dataclass(frozen=True)
class NormalFrame:
    """Orthonormal basis of the normal space at a point of Sigma."""

    base_point: np.ndarray
    vectors: np.ndarray  # (d, n), rows are the frame vectors n_1..n_d


@dataclass(frozen=True)
class TubularCoordinates:
    """Foot point xi on Sigma, unit fiber direction omega, distance rho."""

    foot: np.ndarray
    fiber_dir: np.ndarray  # (d,) coordinates w.r.t. the frame at foot
    dist: float


def _fd_hessian(M: Submanifold, xi: np.ndarray) -> np.ndarray:
    """Central FD of the constraint Jacobian, (d, n, n), symmetrized."""
    n = M.ambient_dim
    h = 1e-5 * max(1.0, float(np.linalg.norm(xi)))
    H = np.empty((M.codim, n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        H[:, :, i] = (M.constraint_jacobian(xi + e) - M.constraint_jacobian(xi - e)) / (2 * h)
    return 0.5 * (H + np.swapaxes(H, 1, 2))


def _newton_project(M: Submanifold, x: np.ndarray) -> np.ndarray:
    """Damped Newton on the Lagrange system of min |x-xi|^2 s.t. F(xi)=0."""
    n, d = M.ambient_dim, M.codim
    xi = np.array(x, dtype=float)
    mu = np.zeros(d)

    def merit(xi_, mu_):
        F_ = np.atleast_1d(M.constraint(xi_))
        J_ = M.constraint_jacobian(xi_)
        r_ = x - xi_ - J_.T @ mu_
        return float(F_ @ F_ + r_ @ r_), F_, J_, r_

    m0, F, J, r1 = merit(xi, mu)
    scale = max(1.0, float(np.linalg.norm(x)))
    for _ in range(_PROJ_MAX_ITER):
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] < 1e-10 * max(sv[0], 1.0):
            raise RankDeficient(f"constraint Jacobian rank-deficient near {xi}")
        if M.constraint_hessian is not None:
            H = M.constraint_hessian(xi)
        else:
            H = _fd_hessian(M, xi)
        W = np.eye(n) + np.einsum("k,kij->ij", mu, H)
        A = np.zeros((n + d, n + d))
        A[:n, :n] = W
        A[:n, n:] = J.T
        A[n:, :n] = J
        rhs = np.concatenate([r1, -F])
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            # curvature matrix singular (focal point); Gauss-Newton step
            A[:n, :n] = np.eye(n)
            sol = np.linalg.solve(A, rhs)
        dxi, dmu = sol[:n], sol[n:]

        t = 1.0
        for _ in range(30):
            m1, F_t, J_t, r_t = merit(xi + t * dxi, mu + t * dmu)
            if m1 <= m0 * (1.0 - 1e-4 * t) or m1 < 1e-28:
                break
            t *= 0.5
        xi = xi + t * dxi
        mu = mu + t * dmu
        m0, F, J, r1 = m1, F_t, J_t, r_t
        if (
            np.max(np.abs(F)) < _PROJ_TOL_F * scale
            and np.linalg.norm(t * dxi) < _PROJ_TOL_STEP * scale
            and np.linalg.norm(r1) < 1e-11 * scale
        ):
            return xi
    raise NoConvergence(
        "projection did not converge in 50 iterations; point may be outside the tube"
    )


def project(M: Submanifold, x, *, force_generic: bool = False) -> np.ndarray:
    """Closest-point projection pi(x) onto Sigma.

    Inside the tube the closest point is unique and satisfies F(xi) = 0 with
    x - xi orthogonal to the tangent space at xi.  Uses the shape's closed
    form when available unless ``force_generic`` asks for the Newton path.
    Broadcasts over leading axes.
    """
    x = np.asarray(x)
    if M.closed_form_projection is not None and not force_generic:
        return M.closed_form_projection(x)
    if x.ndim == 1:
        return _newton_project(M, x)
    flat = x.reshape(-1, M.ambient_dim)
    out = np.empty_like(flat, dtype=float)
    for i, pt in enumerate(flat):
        out[i] = _newton_project(M, pt)
    return out.reshape(x.shape)


def frame_vectors(M: Submanifold, xi) -> np.ndarray:
    """Orthonormal normal frame at points of Sigma, shape (..., d, n).

    Gram-Schmidt of the constraint Jacobian rows in declared order, which is
    deterministic and smooth wherever the Jacobian has full rank.
    """
    if M.oracle is not None and getattr(M.oracle, "frame", None) is not None:
        return M.oracle.frame(np.asarray(xi))
    return _gram_schmidt_rows(M.constraint_jacobian(np.asarray(xi)))


def _gram_schmidt_rows(J: np.ndarray) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    d = J.shape[-2]
    out = np.empty_like(J)
    for k in range(d):
        v = J[..., k, :].copy()
        for j in range(k):
            v -= np.sum(v * out[..., j, :], axis=-1, keepdims=True) * out[..., j, :]
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        row_scale = np.linalg.norm(J[..., k, :], axis=-1, keepdims=True)
        if np.any(norm < 1e-10 * np.maximum(row_scale, 1.0)):
            raise RankDeficient("constraint Jacobian rows are linearly dependent")
        out[..., k, :] = v / norm
    return out


def frame(M: Submanifold, xi) -> NormalFrame:
    """Normal frame at a single point xi on Sigma."""
    xi = np.asarray(xi, dtype=float)
    return NormalFrame(base_point=xi, vectors=frame_vectors(M, xi))


def tube_coords(M: Submanifold, x) -> TubularCoordinates:
    """Tubular coordinates (xi, omega, rho) of a single point in the tube.

    Raises OnManifold when rho is below 1e-13: the fiber direction is
    genuinely undefined on Sigma.
    """
    x = np.asarray(x, dtype=float)
    xi = project(M, x)
    diff = x - xi
    rho = float(np.linalg.norm(diff))
    if rho < _ON_MANIFOLD_RHO * max(1.0, float(np.linalg.norm(x))):
        raise OnManifold("point lies on Sigma; omega is undefined")
    nvecs = frame_vectors(M, xi)
    omega = nvecs @ diff / rho
    omega = omega / np.linalg.norm(omega)
    return TubularCoordinates(foot=xi, fiber_dir=omega, dist=rho)


def embed(M: Submanifold, c: TubularCoordinates) -> np.ndarray:
    """Map tubular coordinates back to the ambient point."""
    nvecs = frame_vectors(M, c.foot)
    return c.foot + c.dist * np.asarray(c.fiber_dir) @ nvecs


def embed_points(M: Submanifold, xi, omega, rho) -> np.ndarray:
    """Batched embedding xi + rho * sum_k omega_k n_k(xi).

    ``xi``: (..., n), ``omega``: (..., d), ``rho``: (...).  Shapes broadcast.
    """
    xi = np.asarray(xi, dtype=float)
    omega = np.asarray(omega, dtype=float)
    rho = np.asarray(rho, dtype=float)
    nvecs = frame_vectors(M, xi)
    direction = np.einsum("...k,...kn->...n", omega, nvecs)
    return xi + rho[..., None] * direction


def tube_coords_batch(M: Submanifold, x):
    """Batched (xi, omega, rho) without the on-manifold guard.

    Intended for quadrature/extraction grids whose radii are strictly
    positive by construction.  Complex-step safe when the shape's closed
    forms are.
    """
    x = np.asarray(x)
    xi = project(M, x)
    diff = x - xi
    rho = np.sqrt(np.sum(diff * diff, axis=-1))
    nvecs = frame_vectors(M, xi)
    omega = np.einsum("...kn,...n->...k", nvecs, diff) / rho[..., None]
    return xi, omega, rho


def grad_rho(M: Submanifold, x) -> np.ndarray:
    """Gradient of the distance function rho(x) = dist(x, Sigma).

    Equals the unit fiber direction (x - pi(x))/rho, i.e. the frame
    combination sum_k omega_k n_k at the foot point; it has unit length and
    does not depend on rho.  Broadcasts; raises OnManifold at rho ~ 0.
    """
    x = np.asarray(x, dtype=float)
    xi = project(M, x)
    diff = x - xi
    rho = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(rho < _ON_MANIFOLD_RHO * np.maximum(1.0, np.sqrt(np.sum(x * x, axis=-1)))):
        raise OnManifold("gradient of the distance is undefined on Sigma")
    return diff / rho[..., None]
