"""Quadrature rules over Sigma, the fiber sphere, and the radial interval.

Tube integrals follow the product-measure convention rho^(d-1) drho
dsigma(omega) dsigma(xi) used by every closed-form manipulation downstream;
no curvature Jacobian is applied.  Surface rules for the shipped shapes are
exact on trigonometric/spherical polynomials up to degree 2*level; weights
are positive and sum to the total measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .errors import DimUnsupported, NotConverged, ShapeUnsupported

DEFAULT_SIGMA_LEVEL = 16
DEFAULT_FIBER_LEVEL = 4
DEFAULT_RADIAL_POINTS = 64


def unit_sphere_measure(d: int) -> float:
    """Surface measure |S^(d-1)| of the unit sphere in R^d (|S^0| = 2)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes, positive weights, and the measure they add up to."""

    nodes: np.ndarray   # (N, dim) points, or (N,) radii
    weights: np.ndarray  # (N,)
    measure_total: float


@dataclass(frozen=True)
class QuadConfig:
    """Resolution knobs shared by pairings and the scenario runner."""

    sigma_level: int = DEFAULT_SIGMA_LEVEL
    fiber_level: int = DEFAULT_FIBER_LEVEL
    radial_points: int = DEFAULT_RADIAL_POINTS

    @staticmethod
    def from_dict(spec: dict | None) -> "QuadConfig":
        spec = spec or {}
        return QuadConfig(
            sigma_level=int(spec.get("sigma_level", DEFAULT_SIGMA_LEVEL)),
            fiber_level=int(spec.get("fiber_level", DEFAULT_FIBER_LEVEL)),
            radial_points=int(spec.get("radial_points", DEFAULT_RADIAL_POINTS)),
        )

    def scaled(self, factor: int) -> "QuadConfig":
        return QuadConfig(
            sigma_level=self.sigma_level * factor,
            fiber_level=self.fiber_level * factor,
            radial_points=self.radial_points * factor,
        )


def _uniform_circle(N: int, radius: float) -> QuadratureRule:
    ang = 2.0 * np.pi * np.arange(N) / N
    nodes = radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    weights = np.full(N, 2.0 * np.pi * radius / N)
    return QuadratureRule(nodes, weights, 2.0 * np.pi * radius)


def sigma_rule(M, level: int = DEFAULT_SIGMA_LEVEL) -> QuadratureRule:
    """Surface rule on Sigma for the shipped shape catalog.

    Sphere in R^3: Gauss-Legendre in the polar cosine times a uniform
    azimuth grid (2*level x 4*level nodes).  Sphere in R^2 and circle3d:
    uniform angular nodes (16*level), which integrate trigonometric
    polynomials of degree < 16*level exactly.
    """
    if M.shape_id == "sphere":
        n = M.shape_params["ambient_dim"]
        r = M.shape_params["radius"]
        if n == 3:
            ntheta, nphi = 2 * level, 4 * level
            u, wu = roots_legendre(ntheta)
            phi = 2.0 * np.pi * np.arange(nphi) / nphi
            su = np.sqrt(1.0 - u**2)
            nodes = np.empty((ntheta, nphi, 3))
            nodes[..., 0] = r * su[:, None] * np.cos(phi)[None, :]
            nodes[..., 1] = r * su[:, None] * np.sin(phi)[None, :]
            nodes[..., 2] = r * u[:, None]
            weights = (r * r * wu[:, None] * (2.0 * np.pi / nphi)) * np.ones(
                (ntheta, nphi)
            )
            return QuadratureRule(
                nodes.reshape(-1, 3), weights.reshape(-1), 4.0 * np.pi * r * r
            )
        if n == 2:
            return _uniform_circle(16 * level, r)
        raise ShapeUnsupported(f"no sphere surface rule for ambient dimension {n}")
    if M.shape_id == "circle3d":
        R = M.shape_params["radius"]
        rule2d = _uniform_circle(16 * level, R)
        nodes = np.concatenate(
            [rule2d.nodes, np.zeros((rule2d.nodes.shape[0], 1))], axis=-1
        )
        return QuadratureRule(nodes, rule2d.weights, rule2d.measure_total)
    raise ShapeUnsupported(f"no surface rule for shape {M.shape_id!r}")


def fiber_rule(d: int, level: int = DEFAULT_FIBER_LEVEL) -> QuadratureRule:
    """Rule on the fiber sphere S^(d-1) for d in {1, 2, 3}.

    d=1 is the two-point set {+1, -1} with unit weights; d=2 uses 8*level
    uniform circle nodes; d=3 a Gauss-Legendre x uniform product rule.
    """
    if d == 1:
        return QuadratureRule(
            np.array([[1.0], [-1.0]]), np.array([1.0, 1.0]), 2.0
        )
    if d == 2:
        return _uniform_circle(8 * level, 1.0)
    if d == 3:
        ntheta, nphi = 2 * level, 4 * level
        u, wu = roots_legendre(ntheta)
        phi = 2.0 * np.pi * np.arange(nphi) / nphi
        su = np.sqrt(1.0 - u**2)
        nodes = np.empty((ntheta, nphi, 3))
        nodes[..., 0] = su[:, None] * np.cos(phi)[None, :]
        nodes[..., 1] = su[:, None] * np.sin(phi)[None, :]
        nodes[..., 2] = u[:, None]
        weights = (wu[:, None] * (2.0 * np.pi / nphi)) * np.ones((ntheta, nphi))
        return QuadratureRule(nodes.reshape(-1, 3), weights.reshape(-1), 4.0 * np.pi)
    raise DimUnsupported(f"no fiber rule for d = {d}")


def fp_radial(a, eta: float):
    """Finite part of the radial primitive int_0^eta rho^a drho.

    eta^(a+1)/(a+1) away from a = -1; exactly ln(eta) at a = -1 (the
    divergent pieces eta^(-p) and ln(eta) of the lower limit are discarded
    by the finite-part prescription).
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    a = complex(a) if isinstance(a, complex) else float(a)
    if abs(a + 1) < 1e-12:
        return math.log(eta)
    val = eta ** (a + 1) / (a + 1)
    return val


def gauss_panel(a: float, b: float, npts: int):
    """Gauss-Legendre nodes/weights on [a, b]."""
    x, w = roots_legendre(npts)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def radial_panels(breaks, npts: int):
    """Concatenated Gauss-Legendre panels over consecutive break points."""
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b > a:
            x, w = gauss_panel(a, b, npts)
            xs.append(x)
            ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


class SurfaceGrid:
    """Cached tensor grid: Sigma nodes, fiber nodes, frames, directions."""

    def __init__(self, M, config: QuadConfig):
        from .geometry import frame_vectors

        self.M = M
        self.config = config
        srule = sigma_rule(M, config.sigma_level)
        frule = fiber_rule(M.codim, config.fiber_level)
        self.xi = srule.nodes                      # (Ns, n)
        self.w_xi = srule.weights                  # (Ns,)
        self.omega = frule.nodes                   # (Nw, d)
        self.w_omega = frule.weights               # (Nw,)
        self.sigma_measure = srule.measure_total
        self.fiber_measure = frule.measure_total
        self.frames = frame_vectors(M, self.xi)    # (Ns, d, n)
        # unit offsets for every (xi, omega) pair: (Ns, Nw, n)
        self.dirs = np.einsum("wk,skn->swn", self.omega, self.frames)
        self.xi_grid = np.broadcast_to(
            self.xi[:, None, :], self.dirs.shape
        )
        self.omega_grid = np.broadcast_to(
            self.omega[None, :, :], (self.xi.shape[0],) + self.omega.shape
        )
        self.w2 = self.w_xi[:, None] * self.w_omega[None, :]   # (Ns, Nw)

    def points(self, rho: np.ndarray) -> np.ndarray:
        """Ambient points (Ns, Nw, P, n) at radii rho (P,)."""
        rho = np.asarray(rho, dtype=float)
        return (
            self.xi[:, None, None, :]
            + rho[None, None, :, None] * self.dirs[:, :, None, :]
        )


_GRID_CACHE: dict = {}


def surface_grid(M, config: QuadConfig) -> SurfaceGrid:
    key = (id(M), config.sigma_level, config.fiber_level)
    grid = _GRID_CACHE.get(key)
    if grid is None or grid.M is not M:
        grid = SurfaceGrid(M, config)
        _GRID_CACHE[key] = grid
    return grid


def integrate_tube(
    M,
    integrand,
    rho_interval,
    config: QuadConfig | None = None,
    rtol: float = 1e-8,
):
    """Tensor quadrature of integrand(xi, omega, rho) over the tube shell.

    Measure rho^(d-1) drho dsigma(omega) dsigma(xi).  The result must move
    by less than ``rtol`` when all levels are doubled; one extra doubling is
    attempted before giving up with NotConverged.  ``integrand`` receives
    broadcast arrays xi (..., n), omega (..., d), rho (...).
    """
    config = config or QuadConfig()
    a, b = rho_interval
    d = M.codim

    def evaluate(cfg: QuadConfig) -> float:
        grid = surface_grid(M, cfg)
        rho, w_rho = gauss_panel(a, b, cfg.radial_points)
        xi = grid.xi_grid[:, :, None, :]
        omega = grid.omega_grid[:, :, None, :]
        vals = integrand(xi, omega, rho[None, None, :])
        vals = np.broadcast_to(vals, grid.w2.shape + rho.shape)
        radial_w = w_rho * rho ** (d - 1)
        return float(np.einsum("sw,swp,p->", grid.w2, vals, radial_w))

    v1 = evaluate(config)
    v2 = evaluate(config.scaled(2))
    if abs(v2 - v1) <= rtol * (1.0 + abs(v2)):
        return v2
    v4 = evaluate(config.scaled(4))
    if abs(v4 - v2) <= rtol * (1.0 + abs(v4)):
        return v4
    raise NotConverged(
        f"tube integral refinement moved by {abs(v4 - v2):.3e} (> {rtol:.1e})"
    )
