"""Built-in test functions, multipliers, and fiber densities.

Every catalog evaluator is written to accept complex ambient points (branch
decisions use real parts only), so partial derivatives can be taken by
complex-step differentiation with no cancellation.  Compact support is
enforced by a smooth radial cutoff that equals one near Sigma, which leaves
the expansion coefficients untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import SchemaError
from .expansion import ThickTestFunction
from .geometry import Submanifold, tube_coords_batch
from .tangent import theta_vector


def radial_cutoff(rho, start: float, stop: float):
    """Smooth transition 1 -> 0 on [start, stop]; exactly 1 below start."""
    rho = np.asarray(rho)
    t = (rho - start) / (stop - start)
    out = np.ones_like(t)
    tr = np.real(t)
    hi = tr >= 1.0
    mid = (tr > 0.0) & ~hi
    out[hi] = 0.0
    tm = t[mid]
    f_up = np.exp(-1.0 / (1.0 - tm))
    f_dn = np.exp(-1.0 / tm)
    out[mid] = f_up / (f_up + f_dn)
    return out


_ANGULAR: dict = {
    "one": lambda xi, omega: np.ones(
        np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1])
    ),
    "omega1": lambda xi, omega: omega[..., 0],
    "omega2": lambda xi, omega: omega[..., 1],
}


def angular_factor(name: str) -> Callable:
    try:
        return _ANGULAR[name]
    except KeyError:
        raise SchemaError(f"unknown angular factor {name!r}") from None


def _default_support(M: Submanifold, support_radius):
    s = 0.8 * M.tube_radius if support_radius is None else float(support_radius)
    if not 0 < s <= M.tube_radius:
        raise SchemaError("support_radius must lie in (0, tube_radius]")
    return s


def make_laurent(
    M: Submanifold,
    m: int,
    terms,
    support_radius: Optional[float] = None,
) -> ThickTestFunction:
    """Finite Laurent-type test function sum_j c_j rho^j ang_j(xi, omega).

    ``terms`` is a list of (j, c) or (j, c, angular_name) with integer
    exponents j >= m.  Coefficients are exact at all orders (zero beyond the
    listed terms).
    """
    support = _default_support(M, support_radius)
    start = 0.5 * support
    parsed = []
    for t in terms:
        j, c = int(t[0]), float(t[1])
        ang = angular_factor(t[2] if len(t) > 2 else "one")
        if j < m:
            raise SchemaError(f"laurent term exponent {j} below leading order {m}")
        parsed.append((j, c, ang))

    def eval_(x):
        xi, omega, rho = tube_coords_batch(M, x)
        total = 0.0
        for j, c, ang in parsed:
            total = total + c * rho ** j * ang(xi, omega)
        return total * radial_cutoff(rho, start, support)

    def coeffs(j, xi, omega):
        total = np.zeros(np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1]))
        for jj, c, ang in parsed:
            if jj == j:
                total = total + c * ang(np.asarray(xi), np.asarray(omega))
        return total

    return ThickTestFunction(
        leading_order=m,
        eval=eval_,
        support_radius=support,
        analytic_coeffs=coeffs,
        complex_step_ok=True,
        cutoff_start=start,
        label=f"laurent(m={m})",
    )


def make_smooth_poly(
    M: Submanifold,
    monomials,
    support_radius: Optional[float] = None,
) -> ThickTestFunction:
    """Polynomial in the ambient coordinates times the radial cutoff.

    ``monomials`` is a list of (coef, exponents) with one exponent per
    coordinate.  Expansion coefficients come from exact polynomial
    interpolation along each normal ray (the restriction to a ray is a
    polynomial in rho of the total degree).
    """
    support = _default_support(M, support_radius)
    start = 0.5 * support
    n = M.ambient_dim
    mono = [(float(c), tuple(int(e) for e in exps)) for c, exps in monomials]
    for _, exps in mono:
        if len(exps) != n:
            raise SchemaError("smooth_poly exponents must have one entry per coordinate")
    degree = max((sum(e) for _, e in mono), default=0)

    def poly(x):
        x = np.asarray(x)
        total = 0.0
        for c, exps in mono:
            term = c
            for axis, e in enumerate(exps):
                if e:
                    term = term * x[..., axis] ** e
            total = total + term
        return total * np.ones(x.shape[:-1], dtype=x.dtype)

    def eval_(x):
        _, _, rho = tube_coords_batch(M, x)
        return poly(x) * radial_cutoff(rho, start, support)

    # exact ray interpolation: nodes symmetric around 0, Vandermonde inverse
    t_nodes = (np.arange(degree + 1) - degree / 2.0) * (0.2 * M.tube_radius)
    V = np.vander(t_nodes, degree + 1, increasing=True)
    Vinv = np.linalg.inv(V)

    def coeffs(j, xi, omega):
        xi = np.asarray(xi, dtype=float)
        omega = np.asarray(omega, dtype=float)
        shape = np.broadcast_shapes(xi.shape[:-1], omega.shape[:-1])
        if j < 0 or j > degree:
            return np.zeros(shape)
        u = theta_vector(M, xi, omega)
        xi_b = np.broadcast_to(xi, shape + (n,))
        u_b = np.broadcast_to(u, shape + (n,))
        vals = np.stack([poly(xi_b + t * u_b) for t in t_nodes])
        return np.einsum("s,s...->...", Vinv[j], vals)

    return ThickTestFunction(
        leading_order=0,
        eval=eval_,
        support_radius=support,
        analytic_coeffs=coeffs,
        complex_step_ok=True,
        cutoff_start=start,
        label=f"poly(deg={degree})",
    )


_BUMP_SERIES_DEPTH = 16


def _bump_series(depth: int) -> np.ndarray:
    """Taylor coefficients in u of exp(1 - 1/(1-u)) = exp(-u - u^2 - ...)."""
    v = np.zeros(depth + 1)
    v[1:] = -1.0
    e = np.zeros(depth + 1)
    e[0] = 1.0
    for k in range(1, depth + 1):
        e[k] = sum(j * v[j] * e[k - j] for j in range(1, k + 1)) / k
    return e


def make_bump(M: Submanifold, support_radius: Optional[float] = None) -> ThickTestFunction:
    """Radial bump exp(1 - 1/(1 - (rho/s)^2)): equals 1 on Sigma, vanishes
    with all derivatives at rho = s.  Even expansion in rho."""
    support = _default_support(M, support_radius)
    series = _bump_series(_BUMP_SERIES_DEPTH)

    def eval_(x):
        _, _, rho = tube_coords_batch(M, x)
        u = (rho / support) ** 2
        out = np.zeros_like(u)
        inside = np.real(u) < 1.0
        ui = u[inside]
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui))
        return out

    def coeffs(j, xi, omega):
        shape = np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1])
        if j < 0 or j % 2 == 1:
            return np.zeros(shape)
        return np.full(shape, series[j // 2] / support ** j)

    return ThickTestFunction(
        leading_order=0,
        eval=eval_,
        support_radius=support,
        analytic_coeffs=coeffs,
        complex_step_ok=True,
        max_coeff_order=2 * _BUMP_SERIES_DEPTH,
        cutoff_start=None,
        label="bump",
    )


def make_flat_normal_component(
    M: Submanifold, k: int, support_radius: Optional[float] = None
) -> ThickTestFunction:
    """Hypersurface test function with flat expansion a_0 = n_k(xi).

    The ambient formula x_k/|x| (spheres) has exactly this expansion: along
    a normal ray both numerator and denominator scale by the same factor.
    """
    if M.shape_id != "sphere":
        raise SchemaError("flat normal-component functions ship for spheres only")
    support = _default_support(M, support_radius)
    start = 0.5 * support
    r = M.shape_params["radius"]

    def eval_(x):
        x = np.asarray(x)
        s = np.sqrt(np.sum(x * x, axis=-1))
        _, _, rho = tube_coords_batch(M, x)
        return x[..., k] / s * radial_cutoff(rho, start, support)

    def coeffs(j, xi, omega):
        xi = np.asarray(xi)
        shape = np.broadcast_shapes(xi.shape[:-1], np.shape(omega)[:-1])
        if j != 0:
            return np.zeros(shape)
        return np.broadcast_to(xi[..., k] / r, shape).copy()

    return ThickTestFunction(
        leading_order=0,
        eval=eval_,
        support_radius=support,
        analytic_coeffs=coeffs,
        complex_step_ok=True,
        cutoff_start=start,
        label=f"flat_n{k + 1}",
    )


@dataclass(frozen=True)
class Multiplier:
    """Element of the multiplier algebra with a finite radial expansion.

    ``coeff(s, xi, omega)`` gives the coefficient of rho^s, nonzero only for
    s_min <= s <= s_max.  ``partial`` returns the multiplier d psi/dx_i when
    a closed form ships.
    """

    eval: Callable
    coeff: Callable
    s_min: int
    s_max: int
    partial: Optional[Callable] = None
    label: str = "psi"


def mult_const(c: float) -> Multiplier:
    def coeff(s, xi, omega):
        shape = np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1])
        return np.full(shape, c if s == 0 else 0.0)

    return Multiplier(
        eval=lambda x: c * np.ones(np.shape(x)[:-1]),
        coeff=coeff,
        s_min=0,
        s_max=0,
        partial=lambda i: mult_const(0.0),
        label=str(c),
    )


def mult_coordinate(M: Submanifold, i: int) -> Multiplier:
    """The coordinate function x_i: xi_i at order 0 plus theta_i at order 1."""

    def coeff(s, xi, omega):
        xi = np.asarray(xi, dtype=float)
        omega = np.asarray(omega, dtype=float)
        shape = np.broadcast_shapes(xi.shape[:-1], omega.shape[:-1])
        if s == 0:
            return np.broadcast_to(xi[..., i], shape).copy()
        if s == 1:
            return np.broadcast_to(theta_vector(M, xi, omega)[..., i], shape).copy()
        return np.zeros(shape)

    return Multiplier(
        eval=lambda x: np.asarray(x)[..., i],
        coeff=coeff,
        s_min=0,
        s_max=1,
        partial=lambda j: mult_const(1.0 if j == i else 0.0),
        label=f"x{i + 1}",
    )


def mult_theta(M: Submanifold, i: int) -> Multiplier:
    """theta_i as a multiplier (rho-independent on the tube)."""

    def eval_(x):
        xi, omega, rho = tube_coords_batch(M, x)
        return theta_vector(M, xi, omega)[..., i]

    def coeff(s, xi, omega):
        xi = np.asarray(xi, dtype=float)
        omega = np.asarray(omega, dtype=float)
        shape = np.broadcast_shapes(xi.shape[:-1], omega.shape[:-1])
        if s == 0:
            return np.broadcast_to(theta_vector(M, xi, omega)[..., i], shape).copy()
        return np.zeros(shape)

    return Multiplier(
        eval=eval_, coeff=coeff, s_min=0, s_max=0, partial=None, label=f"theta{i + 1}"
    )


def mult_rho(M: Submanifold) -> Multiplier:
    def eval_(x):
        _, _, rho = tube_coords_batch(M, x)
        return rho

    def coeff(s, xi, omega):
        shape = np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1])
        return np.full(shape, 1.0 if s == 1 else 0.0)

    return Multiplier(
        eval=eval_,
        coeff=coeff,
        s_min=1,
        s_max=1,
        partial=lambda i: mult_theta(M, i),
        label="rho",
    )


def mult_product(a: Multiplier, b: Multiplier) -> Multiplier:
    def coeff(s, xi, omega):
        total = 0.0
        for sa in range(a.s_min, a.s_max + 1):
            sb = s - sa
            if b.s_min <= sb <= b.s_max:
                total = total + a.coeff(sa, xi, omega) * b.coeff(sb, xi, omega)
        shape = np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1])
        return total + np.zeros(shape)

    # product-rule partial would need multiplier sums; not required here
    return Multiplier(
        eval=lambda x: a.eval(x) * b.eval(x),
        coeff=coeff,
        s_min=a.s_min + b.s_min,
        s_max=a.s_max + b.s_max,
        partial=None,
        label=f"{a.label}*{b.label}",
    )


def multiply_testfn(M: Submanifold, psi: Multiplier, phi: ThickTestFunction) -> ThickTestFunction:
    """Product psi * phi as a thick test function (Cauchy-product coefficients)."""

    def eval_(x):
        return psi.eval(x) * phi.eval(x)

    coeffs = None
    max_order = None
    if phi.analytic_coeffs is not None:

        def coeffs(j, xi, omega):
            total = 0.0
            for s in range(psi.s_min, psi.s_max + 1):
                jj = j - s
                if jj < phi.leading_order:
                    continue
                if phi.max_coeff_order is not None and jj > phi.max_coeff_order:
                    continue
                total = total + psi.coeff(s, xi, omega) * phi.analytic_coeffs(jj, xi, omega)
            shape = np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1])
            return total + np.zeros(shape)

        if phi.max_coeff_order is not None:
            max_order = phi.max_coeff_order + psi.s_min

    return ThickTestFunction(
        leading_order=phi.leading_order + psi.s_min,
        eval=eval_,
        support_radius=phi.support_radius,
        analytic_coeffs=coeffs,
        complex_step_ok=False,
        max_coeff_order=max_order,
        cutoff_start=phi.cutoff_start,
        min_rho=phi.min_rho,
        label=f"{psi.label}*{phi.label}",
    )


# fiber densities g(xi, omega) for thick deltas
def density_one(xi, omega):
    return np.ones(np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1]))


def density_omega(k: int) -> Callable:
    def g(xi, omega):
        return np.asarray(omega)[..., k] * np.ones(np.shape(xi)[:-1])

    g.label = f"omega{k + 1}"  # type: ignore[attr-defined]
    return g


def density_theta(M: Submanifold, i: int) -> Callable:
    def g(xi, omega):
        return theta_vector(M, xi, omega)[..., i]

    g.label = f"theta{i + 1}"  # type: ignore[attr-defined]
    return g


def catalog_test_functions(M: Submanifold):
    """The three reference test functions used by the validation suite."""
    if M.codim == 1:
        laurent = make_laurent(
            M,
            -2,
            [(-2, 1.0), (-1, 0.5, "omega1"), (0, 1.0), (1, 0.75, "omega1")],
        )
        if M.ambient_dim == 3:
            poly = make_smooth_poly(
                M,
                [(1.0, (0, 0, 0)), (1.0, (1, 0, 0)), (0.5, (0, 1, 1)), (0.25, (2, 0, 0))],
            )
        else:
            poly = make_smooth_poly(
                M, [(1.0, (0, 0)), (1.0, (1, 0)), (0.3, (1, 1))]
            )
    else:
        laurent = make_laurent(
            M,
            -1,
            [(-1, 1.0, "omega1"), (0, 1.0), (1, 0.5, "omega2")],
        )
        poly = make_smooth_poly(
            M, [(1.0, (0, 0, 0)), (1.0, (0, 0, 1)), (0.5, (1, 0, 1))]
        )
    return [laurent, poly, make_bump(M)]
