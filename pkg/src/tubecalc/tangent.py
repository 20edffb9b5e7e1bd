"""Tangential and normal derivative calculus on Sigma.

delta-derivatives are the tangential surrogates for ambient partials of
functions living only on Sigma, realized by differentiating f(pi(x)); the
normal-frame derivatives D_n^alpha differentiate along the frame directions.
From these two come the Jacobian of the foot-point map, its radial expansion
coefficients b_{l,i,q}, the distance-gradient components theta_i on
Sigma x S^(d-1), and the second fundamental form of hypersurfaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as _iproduct
from math import factorial
from typing import Callable, Optional

import numpy as np

from .errors import CodimUnsupported, OrderTooHigh
from .geometry import Submanifold, frame_vectors, project

# Central-difference steps per total derivative order, scaled by max(1,|xi|).
# Chosen so truncation (after one Richardson pass) and eps/h^order roundoff
# both stay near or below 1e-7 in double precision.
_DELTA_STEP = 1e-5
_NESTED_STEP = {1: 1e-5, 2: 1e-4, 3: 2e-3}
_JACOBIAN_STEP = 1e-3


@dataclass(frozen=True)
class SurfaceFunction:
    """Scalar function a(xi, omega) on Sigma x S^(d-1).

    ``eval`` broadcasts over leading axes; functions of xi alone simply
    ignore the omega argument.  Analytic tangential/fiber derivatives may be
    supplied to bypass the finite-difference fallbacks.
    """

    eval: Callable                    # (xi, omega) -> values
    delta_xi: Optional[Callable] = None     # (i, xi, omega) -> values
    delta_omega: Optional[Callable] = None  # (k, xi, omega) -> values


@dataclass(frozen=True)
class SecondFundamentalData:
    """Second fundamental form in ambient coordinates (hypersurface case)."""

    base_point: np.ndarray
    mu: np.ndarray          # (..., n, n)
    mean_curvature: np.ndarray


def _as_surface_function(f) -> SurfaceFunction:
    if isinstance(f, SurfaceFunction):
        return f
    return SurfaceFunction(eval=lambda xi, omega, _f=f: _f(xi, omega))


def _scale(xi) -> float:
    return max(1.0, float(np.max(np.sqrt(np.sum(np.asarray(xi) ** 2, axis=-1)))))


def delta_derivative(M: Submanifold, f, xi, i: int, omega=None):
    """Tangential derivative (delta f / delta x_i)(xi) on Sigma.

    Differentiates the canonical extension f(pi(x)) by central differences
    along the ambient axis i, with one Richardson refinement.  Analytic
    callbacks on a SurfaceFunction take precedence.  Broadcasts over xi.
    """
    f = _as_surface_function(f)
    if f.delta_xi is not None:
        return f.delta_xi(i, np.asarray(xi, dtype=float), omega)
    xi = np.asarray(xi, dtype=float)
    h = _DELTA_STEP * _scale(xi)
    e = np.zeros(M.ambient_dim)
    e[i] = 1.0

    def diff(step):
        plus = f.eval(project(M, xi + step * e), omega)
        minus = f.eval(project(M, xi - step * e), omega)
        return (plus - minus) / (2.0 * step)

    d1, d2 = diff(h), diff(h / 2.0)
    return (4.0 * d2 - d1) / 3.0


def delta_derivative_omega(M: Submanifold, a, xi, omega, k: int):
    """Fiber-sphere tangential derivative of a(xi, omega) in slot k.

    Uses the degree-zero homogeneous extension a(xi, omega/|omega|); for
    hypersurfaces (d=1) the fiber is discrete and the derivative vanishes.
    """
    a = _as_surface_function(a)
    if M.codim == 1:
        xi = np.asarray(xi)
        return np.zeros(np.broadcast_shapes(xi.shape[:-1], np.asarray(omega).shape[:-1]))
    if a.delta_omega is not None:
        return a.delta_omega(k, np.asarray(xi, dtype=float), np.asarray(omega, dtype=float))
    omega = np.asarray(omega, dtype=float)
    h = 1e-5
    e = np.zeros(M.codim)
    e[k] = 1.0

    def diff(step):
        wp = omega + step * e
        wm = omega - step * e
        wp = wp / np.sqrt(np.sum(wp * wp, axis=-1))[..., None]
        wm = wm / np.sqrt(np.sum(wm * wm, axis=-1))[..., None]
        return (a.eval(xi, wp) - a.eval(xi, wm)) / (2.0 * step)

    d1, d2 = diff(h), diff(h / 2.0)
    return (4.0 * d2 - d1) / 3.0


def multi_indices(d: int, q: int):
    """All multi-indices alpha in N^d with |alpha| = q."""
    return [a for a in _iproduct(range(q + 1), repeat=d) if sum(a) == q]


def _central_stencil(alpha) -> dict:
    """Nested central-difference stencil for D^alpha on the unit-step grid.

    Maps integer offset tuples to weights; multiply values by h^(-|alpha|)
    after summation.
    """
    d = len(alpha)
    stencil = {tuple([0] * d): 1.0}
    for slot, order in enumerate(alpha):
        for _ in range(order):
            new: dict = {}
            for off, w in stencil.items():
                for shift, c in ((1, 0.5), (-1, -0.5)):
                    key = list(off)
                    key[slot] += shift
                    key = tuple(key)
                    new[key] = new.get(key, 0.0) + w * c
            stencil = new
    return stencil


def normal_derivative(M: Submanifold, phi, xi, alpha, *, step=None, analytic=None):
    """Normal-frame derivative D_n^alpha phi(xi) = d^alpha/dy^alpha of
    y -> phi(xi + sum_k y_k n_k(xi)) at y = 0.

    alpha is a multi-index over the d frame slots; |alpha| <= 3 in numerical
    mode (nested central differences, one Richardson pass).  Broadcasts over
    xi.
    """
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != M.codim:
        raise ValueError("alpha must have one slot per codimension")
    if analytic is not None:
        return analytic(np.asarray(xi, dtype=float), alpha)
    order = sum(alpha)
    if order > 3:
        raise OrderTooHigh("numerical normal derivatives support |alpha| <= 3")
    xi = np.asarray(xi, dtype=float)
    nvecs = frame_vectors(M, xi)  # (..., d, n)
    if order == 0:
        return phi(xi)
    h = (step or _NESTED_STEP[order]) * _scale(xi)
    stencil = _central_stencil(alpha)

    def diff(hh):
        total = 0.0
        for off, w in stencil.items():
            shift = np.einsum("k,...kn->...n", np.asarray(off, dtype=float) * hh, nvecs)
            total = total + w * phi(xi + shift)
        return total / hh**order

    d1, d2 = diff(h), diff(h / 2.0)
    return (4.0 * d2 - d1) / 3.0


def jacobian_pi(M: Submanifold, x, *, step: float = _JACOBIAN_STEP) -> np.ndarray:
    """Jacobian of the foot-point map, entries (l, i) = d xi_l / d x_i.

    Central differences of the projection column by column with one
    Richardson pass; works on Sigma itself (the projection is smooth across
    it, where the Jacobian is the orthogonal tangent projector).
    Broadcasts over x, returning (..., n, n).
    """
    x = np.asarray(x, dtype=float)
    n = M.ambient_dim
    h = step * _scale(x)

    def diff(hh):
        cols = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = hh
            cols.append((project(M, x + e) - project(M, x - e)) / (2.0 * hh))
        return np.stack(cols, axis=-1)  # (..., l, i)

    d1, d2 = diff(h), diff(h / 2.0)
    return (4.0 * d2 - d1) / 3.0


def b_coeff(M: Submanifold, l: int, i: int, q: int, xi, omega):
    """Expansion coefficient b_{l,i,q} of the foot-point Jacobian entry
    (l, i) in powers of rho along the fiber direction omega.

    Computed as sum over |alpha| = q of omega^alpha / alpha! times the
    normal-frame derivative of the entry; shapes that ship a closed form
    (the sphere) use it directly, otherwise q <= 2.
    """
    if q < 1:
        raise ValueError("b coefficients start at order q = 1")
    if M.oracle is not None and M.oracle.b_coeff is not None:
        return M.oracle.b_coeff(l, i, q, xi, omega)
    if q > 2:
        raise OrderTooHigh(
            "numerical b coefficients support q <= 2; shape supplies no closed form"
        )
    xi = np.asarray(xi, dtype=float)
    omega = np.asarray(omega, dtype=float)

    def entry(points):
        return jacobian_pi(M, points)[..., l, i]

    steps = {1: 1e-3, 2: 2.5e-3}
    total = 0.0
    for alpha in multi_indices(M.codim, q):
        coeff = np.prod(omega ** np.asarray(alpha, dtype=float), axis=-1)
        weight = 1.0
        for a in alpha:
            weight /= factorial(a)
        total = total + coeff * weight * normal_derivative(
            M, entry, xi, alpha, step=steps[q]
        )
    return total


def theta(M: Submanifold, xi, omega, i: int):
    """Component i of the distance gradient expressed on Sigma x S^(d-1)."""
    return theta_vector(M, xi, omega)[..., i]


def theta_vector(M: Submanifold, xi, omega) -> np.ndarray:
    """All components sum_k omega_k n_k(xi), shape (..., n)."""
    nvecs = frame_vectors(M, np.asarray(xi, dtype=float))
    return np.einsum("...k,...kn->...n", np.asarray(omega, dtype=float), nvecs)


def frame_delta_derivatives(M: Submanifold, xi, i: int) -> np.ndarray:
    """delta n_k / delta x_i for every frame vector, shape (..., d, n)."""
    xi = np.asarray(xi, dtype=float)
    h = _DELTA_STEP * _scale(xi)
    e = np.zeros(M.ambient_dim)
    e[i] = 1.0

    def diff(step):
        plus = frame_vectors(M, project(M, xi + step * e))
        minus = frame_vectors(M, project(M, xi - step * e))
        return (plus - minus) / (2.0 * step)

    d1, d2 = diff(h), diff(h / 2.0)
    return (4.0 * d2 - d1) / 3.0


def second_fundamental(M: Submanifold, xi) -> SecondFundamentalData:
    """Second fundamental form mu_ik = delta n_k / delta x_i and mean
    curvature of a hypersurface (codimension 1 only).  Broadcasts over xi.
    """
    if M.codim != 1:
        raise CodimUnsupported("second fundamental form implemented for d = 1 only")
    xi = np.asarray(xi, dtype=float)
    n = M.ambient_dim
    cols = [frame_delta_derivatives(M, xi, i)[..., 0, :] for i in range(n)]
    mu = np.stack(cols, axis=-2)  # (..., i, k)
    H = np.trace(mu, axis1=-2, axis2=-1) / (n - 1)
    return SecondFundamentalData(base_point=xi, mu=mu, mean_curvature=H)
