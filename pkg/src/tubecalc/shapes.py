"""Analytic shape catalog: spheres r*S^(n-1) and the circle in R^3.

Each constructor returns a Submanifold whose ``oracle`` carries the closed
forms (projection, frame, Jacobian of the foot-point map, expansion
coefficients of that Jacobian, second fundamental form) used both as fast
paths and as test oracles for the generic numerical routines.  All closed
forms are written with sqrt-of-sum-of-squares instead of norms so they stay
valid under complex-step perturbations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Submanifold
from .quadrature import unit_sphere_measure


@dataclass(frozen=True)
class ShapeOracle:
    """Closed-form callbacks and named reference values for a shape."""

    shape_id: str
    projection: Callable
    frame: Callable                      # xi (..., n) -> (..., d, n)
    jacobian_pi: Callable                # x (..., n) -> (..., n, n)
    b_coeff: Optional[Callable] = None   # (l, i, q, xi, omega) -> (...)
    mu: Optional[Callable] = None        # xi (..., n) -> (..., n, n)
    mean_curvature: Optional[Callable] = None
    values: dict = field(default_factory=dict)


def _sq_norm(x):
    return np.sum(x * x, axis=-1)


def make_sphere(n: int, r: float) -> Submanifold:
    """Sphere of radius r in R^n as the zero set of |x|^2 - r^2.

    Closed forms: pi(x) = r x/|x|, normal n(xi) = xi/r, Jacobian of pi
    (r/|x|)(I - x x^T/|x|^2), the Jacobian expansion coefficients
    b_{l,i,q} = (delta_il - xi_i xi_l / r^2) (-omega/r)^q with omega = +1 on
    the outside, mu = (I - n n^T)/r and H = 1/r.  Tube radius r.
    """
    if n < 2 or r <= 0:
        raise ValueError("need n >= 2 and r > 0")
    r = float(r)

    def constraint(x):
        return (_sq_norm(x) - r * r)[..., None]

    def jacobian(x):
        return 2.0 * np.asarray(x)[..., None, :]

    def hessian(x):
        x = np.asarray(x)
        eye = 2.0 * np.eye(n)
        return np.broadcast_to(eye, x.shape[:-1] + (1, n, n)).reshape(
            x.shape[:-1] + (1, n, n)
        )

    def projection(x):
        x = np.asarray(x)
        s = np.sqrt(_sq_norm(x))
        return r * x / s[..., None]

    def frame(xi):
        return np.asarray(xi)[..., None, :] / r

    def jacobian_pi(x):
        x = np.asarray(x)
        s2 = _sq_norm(x)[..., None, None]
        s = np.sqrt(s2)
        outer = x[..., :, None] * x[..., None, :]
        return (r / s) * (np.eye(n) - outer / s2)

    def b_coeff(l, i, q, xi, omega):
        xi = np.asarray(xi, dtype=float)
        omega = np.asarray(omega, dtype=float)
        tang = (1.0 if l == i else 0.0) - xi[..., i] * xi[..., l] / (r * r)
        return tang * (-omega[..., 0] / r) ** q

    def mu(xi):
        nvec = np.asarray(xi) / r
        return (np.eye(n) - nvec[..., :, None] * nvec[..., None, :]) / r

    def mean_curvature(xi):
        xi = np.asarray(xi)
        return np.full(xi.shape[:-1], 1.0 / r)

    oracle = ShapeOracle(
        shape_id="sphere",
        projection=projection,
        frame=frame,
        jacobian_pi=jacobian_pi,
        b_coeff=b_coeff,
        mu=mu,
        mean_curvature=mean_curvature,
        values={
            "H": 1.0 / r,
            "surface_measure": unit_sphere_measure(n) * r ** (n - 1),
        },
    )
    return Submanifold(
        ambient_dim=n,
        codim=1,
        constraint=constraint,
        constraint_jacobian=jacobian,
        constraint_hessian=hessian,
        tube_radius=r,
        closed_form_projection=projection,
        shape_id="sphere",
        shape_params={"radius": r, "ambient_dim": n},
        oracle=oracle,
    )


def make_circle3d(R: float) -> Submanifold:
    """Circle of radius R in the z=0 plane of R^3 (codimension 2).

    Constraints (x^2 + y^2 - R^2, z); frame n_1 = in-plane radial,
    n_2 = e_z; closed-form projection scales the in-plane part to radius R.
    Tube radius R.
    """
    if R <= 0:
        raise ValueError("need R > 0")
    R = float(R)

    def constraint(x):
        x = np.asarray(x)
        return np.stack(
            [x[..., 0] ** 2 + x[..., 1] ** 2 - R * R, x[..., 2]], axis=-1
        )

    def jacobian(x):
        x = np.asarray(x)
        J = np.zeros(x.shape[:-1] + (2, 3))
        J[..., 0, 0] = 2.0 * x[..., 0]
        J[..., 0, 1] = 2.0 * x[..., 1]
        J[..., 1, 2] = 1.0
        return J

    def hessian(x):
        x = np.asarray(x)
        H = np.zeros(x.shape[:-1] + (2, 3, 3))
        H[..., 0, 0, 0] = 2.0
        H[..., 0, 1, 1] = 2.0
        return H

    def projection(x):
        x = np.asarray(x)
        s = np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)
        out = np.zeros_like(x)
        out[..., 0] = R * x[..., 0] / s
        out[..., 1] = R * x[..., 1] / s
        return out

    def frame(xi):
        xi = np.asarray(xi)
        s = np.sqrt(xi[..., 0] ** 2 + xi[..., 1] ** 2)
        nv = np.zeros(xi.shape[:-1] + (2, 3), dtype=xi.dtype)
        nv[..., 0, 0] = xi[..., 0] / s
        nv[..., 0, 1] = xi[..., 1] / s
        nv[..., 1, 2] = 1.0
        return nv

    def jacobian_pi(x):
        x = np.asarray(x)
        s2 = x[..., 0] ** 2 + x[..., 1] ** 2
        s = np.sqrt(s2)
        J = np.zeros(x.shape[:-1] + (3, 3))
        for a in range(2):
            for b in range(2):
                J[..., a, b] = (R / s) * ((1.0 if a == b else 0.0) - x[..., a] * x[..., b] / s2)
        return J

    oracle = ShapeOracle(
        shape_id="circle3d",
        projection=projection,
        frame=frame,
        jacobian_pi=jacobian_pi,
        values={"length": 2.0 * np.pi * R},
    )
    return Submanifold(
        ambient_dim=3,
        codim=2,
        constraint=constraint,
        constraint_jacobian=jacobian,
        constraint_hessian=hessian,
        tube_radius=R,
        closed_form_projection=projection,
        shape_id="circle3d",
        shape_params={"radius": R},
        oracle=oracle,
    )


def sphere_delta_derivative_oracle(n: int, r: float, i: int, k: int, j: int) -> float:
    """Closed-form pairing of the differentiated degree-j sphere layer
    against the test function with flat expansion coefficient n_k.

    Zero unless i == k and j is even with j >= 0; for those cases the value
    is r^(n-j-2) |S^(n-1)| (1/n - 1).
    """
    if i != k:
        return 0.0
    if j <= -1 or j % 2 == 1:
        return 0.0
    return r ** (n - j - 2) * unit_sphere_measure(n) * (1.0 / n - 1.0)
