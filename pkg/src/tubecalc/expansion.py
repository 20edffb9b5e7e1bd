"""Singular test functions and their radial expansion coefficients.

A thick test function is smooth off Sigma, vanishes outside a tube of
radius ``support_radius``, and approaches Sigma like a Laurent-type series
sum_j a_j(xi, omega) rho^j starting at a leading order m (possibly
negative).  This module extracts those coefficients (analytically when the
function carries them, otherwise by a least-squares fit along geometric
rays), builds the coefficients of smooth fields from normal-frame Taylor
data, and implements the termwise expansion of a partial derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import factorial
from typing import Callable, Optional

import numpy as np

from .errors import ExpansionUnavailable, IllConditioned, OrderTooHigh
from .geometry import Submanifold, embed_points, frame_vectors
from .tangent import (
    SurfaceFunction,
    b_coeff,
    delta_derivative,
    delta_derivative_omega,
    frame_delta_derivatives,
    multi_indices,
    normal_derivative,
    theta_vector,
)

_COMPLEX_STEP = 1e-20
_FD_STEP = 1e-6
_MAX_FIT_RANGE = 12  # cap on J - m for the ladder fit
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ThickTestFunction:
    """Test function singular along Sigma with prescribed leading order.

    ``eval`` broadcasts over points (..., n) and must accept complex input
    when ``complex_step_ok`` is set (used for exact partial derivatives).
    ``analytic_coeffs(j, xi, omega)`` returns the expansion coefficient of
    rho^j; when ``max_coeff_order`` is None the callback is valid for every
    j (finite expansions return zeros beyond their top term), otherwise only
    up to that order.  ``cutoff_start`` is the radius below which eval is
    free of the support cutoff; fits stay inside it.
    """

    leading_order: int
    eval: Callable
    support_radius: float
    analytic_coeffs: Optional[Callable] = None
    gradient: Optional[Callable] = None
    complex_step_ok: bool = False
    max_coeff_order: Optional[int] = None
    cutoff_start: Optional[float] = None
    min_rho: float = 0.0
    label: str = "phi"


def partial_derivative(phi: ThickTestFunction, i: int) -> ThickTestFunction:
    """Ambient partial of a thick test function, as a thick test function.

    Prefers the analytic gradient, then complex-step differentiation (exact
    to machine precision), then central differences with step 1e-6 scaled.
    The leading order drops by one; expansion coefficients are left for
    extraction so the derivative stays an independent object.
    """
    if phi.gradient is not None:
        grad = phi.gradient

        def eval_i(x, _g=grad, _i=i):
            return _g(np.asarray(x))[..., _i]

        min_rho = phi.min_rho
    elif phi.complex_step_ok:

        def eval_i(x, _f=phi.eval, _i=i):
            xc = np.asarray(x, dtype=complex).copy()
            xc[..., _i] = xc[..., _i] + 1j * _COMPLEX_STEP
            return np.imag(_f(xc)) / _COMPLEX_STEP

        min_rho = phi.min_rho
    else:

        def eval_i(x, _f=phi.eval, _i=i):
            x = np.asarray(x, dtype=float)
            h = _FD_STEP * max(1.0, float(np.max(np.abs(x))))
            e = np.zeros(x.shape[-1])
            e[_i] = h
            return (_f(x + e) - _f(x - e)) / (2.0 * h)

        min_rho = max(phi.min_rho, 100.0 * _FD_STEP)
    return ThickTestFunction(
        leading_order=phi.leading_order - 1,
        eval=eval_i,
        support_radius=phi.support_radius,
        analytic_coeffs=None,
        complex_step_ok=False,
        cutoff_start=phi.cutoff_start,
        min_rho=min_rho,
        label=f"d{phi.label}/dx{i + 1}",
    )


def _fit_ladder(M: Submanifold, phi: ThickTestFunction, J: int):
    """Radii and basis exponents for the ray fit (rows t = 0..J-m+6)."""
    m = phi.leading_order
    if J - m > _MAX_FIT_RANGE:
        raise ExpansionUnavailable(
            f"fit range J - m = {J - m} exceeds the supported {_MAX_FIT_RANGE}"
        )
    rho0 = M.tube_radius / 4.0
    if phi.cutoff_start is not None:
        rho0 = min(rho0, 0.9 * phi.cutoff_start)
    rho0 = min(rho0, 0.9 * phi.support_radius)
    T = J - m + 7
    rho = rho0 * 0.5 ** np.arange(T)
    if phi.min_rho > 0:
        rho = rho[rho >= phi.min_rho]
        if rho.size < (J + 2 - m + 1) + 2:
            raise ExpansionUnavailable(
                "evaluation floor leaves too few ladder points for the fit"
            )
    return rho


def extract_coeffs(
    M: Submanifold,
    phi: ThickTestFunction,
    xi,
    omega,
    J: int,
    *,
    full_output: bool = False,
):
    """Expansion coefficients a_m .. a_J of phi at (xi, omega).

    Uses the function's analytic coefficients when present; otherwise a
    least-squares fit of eval along the geometric ray rho_t = rho_0 2^(-t)
    against the powers rho^m .. rho^(J+2) (two guard terms).  Returns an
    array of shape (J - m + 1, ...) stacking the orders; with
    ``full_output`` also a diagnostics dict carrying the fit residual and
    matrix condition number.  Broadcasts over (xi, omega).
    """
    m = phi.leading_order
    if J < m:
        raise ValueError("top order J below the leading order")
    xi = np.asarray(xi, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if phi.analytic_coeffs is not None and (
        phi.max_coeff_order is None or J <= phi.max_coeff_order
    ):
        vals = np.stack([phi.analytic_coeffs(j, xi, omega) for j in range(m, J + 1)])
        return (vals, {"residual": 0.0, "cond": 1.0}) if full_output else vals

    rho = _fit_ladder(M, phi, J)
    pts = embed_points(
        M,
        xi[None, ...],
        omega[None, ...],
        np.broadcast_to(
            rho.reshape((-1,) + (1,) * max(xi.ndim - 1, 0)), (rho.size,) + xi.shape[:-1]
        ),
    )
    vals = phi.eval(pts)  # (T, ...)
    # fit rho^(-m) phi against plain powers 0 .. J+2-m for balanced rows
    scaled = vals * rho.reshape((-1,) + (1,) * (vals.ndim - 1)) ** (-m)
    exps = np.arange(0, J + 2 - m + 1)
    A = rho[:, None] ** exps[None, :]
    col = np.linalg.norm(A, axis=0)
    A_s = A / col
    cond = np.linalg.cond(A_s)
    if cond > _COND_LIMIT:
        raise IllConditioned(
            f"fit matrix condition {cond:.2e} exceeds 1e12; "
            "declared leading order may be too high or phi not expandable"
        )
    rhs = scaled.reshape(rho.size, -1)
    sol, *_ = np.linalg.lstsq(A_s, rhs, rcond=None)
    sol = sol / col[:, None]
    fit_resid = A @ sol - rhs
    denom = np.maximum(1.0, np.abs(rhs).max(axis=0))
    residual = float(np.max(np.abs(fit_resid) / denom))
    coeffs = sol[: J - m + 1].reshape((J - m + 1,) + vals.shape[1:])
    if full_output:
        return coeffs, {"residual": residual, "cond": float(cond)}
    return coeffs


def taylor_coeffs_smooth(M: Submanifold, phi, xi, omega, J: int, *, analytic=None):
    """Coefficients a_0 .. a_J of a smooth field from normal-frame Taylor
    data: a_j = sum over |alpha| = j of D_n^alpha phi(xi) omega^alpha/alpha!.

    J <= 3 in numerical mode.  ``phi`` is a plain callable on ambient
    points; ``analytic`` optionally supplies exact D_n values.
    """
    if J > 3 and analytic is None:
        raise OrderTooHigh("normal-frame Taylor data limited to J <= 3 numerically")
    xi = np.asarray(xi, dtype=float)
    omega = np.asarray(omega, dtype=float)
    out = []
    for j in range(0, J + 1):
        acc = 0.0
        for alpha in multi_indices(M.codim, j):
            dn = normal_derivative(M, phi, xi, alpha, analytic=analytic)
            wfac = 1.0
            for a in alpha:
                wfac /= factorial(a)
            mono = np.prod(omega ** np.asarray(alpha, dtype=float), axis=-1)
            acc = acc + dn * mono * wfac
        out.append(acc * np.ones(np.broadcast_shapes(xi.shape[:-1], omega.shape[:-1])))
    return np.stack(out)


@dataclass(frozen=True)
class Expansion:
    """Coefficient family a_j(xi, omega), m <= j <= J, with derivative access.

    ``coeff(j, xi, omega)`` must return zeros for j < m.  Tangential and
    fiber derivatives of the coefficients use the supplied analytic
    callbacks when present and finite differences otherwise.
    """

    M: Submanifold
    m: int
    J: int
    coeff: Callable
    delta_xi_fn: Optional[Callable] = None
    delta_omega_fn: Optional[Callable] = None

    def a(self, j: int, xi, omega):
        if j < self.m:
            return np.zeros(
                np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1])
            )
        if j > self.J:
            raise OrderTooHigh(f"coefficient order {j} above available top {self.J}")
        return self.coeff(j, xi, omega)

    def delta_xi(self, j: int, l: int, xi, omega):
        if j < self.m:
            return np.zeros(
                np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1])
            )
        if self.delta_xi_fn is not None:
            return self.delta_xi_fn(j, l, xi, omega)
        fn = SurfaceFunction(eval=lambda x, w, _j=j: self.coeff(_j, x, w))
        return delta_derivative(self.M, fn, xi, l, omega=omega)

    def delta_omega(self, j: int, k: int, xi, omega):
        if j < self.m or self.M.codim == 1:
            return np.zeros(
                np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1])
            )
        if self.delta_omega_fn is not None:
            return self.delta_omega_fn(j, k, xi, omega)
        fn = SurfaceFunction(eval=lambda x, w, _j=j: self.coeff(_j, x, w))
        return delta_derivative_omega(self.M, fn, xi, omega, k)


def expansion_from_testfn(
    M: Submanifold, phi: ThickTestFunction, J: int
) -> Expansion:
    """Expansion view of a thick test function up to order J."""
    m = phi.leading_order
    if phi.analytic_coeffs is not None and (
        phi.max_coeff_order is None or J <= phi.max_coeff_order
    ):
        return Expansion(M=M, m=m, J=J, coeff=lambda j, xi, om: phi.analytic_coeffs(j, xi, om))
    if J - m > _MAX_FIT_RANGE:
        raise ExpansionUnavailable(
            f"order {J} needs fit range beyond {_MAX_FIT_RANGE} above the leading order"
        )

    def coeff(j, xi, omega):
        vals = extract_coeffs(M, phi, xi, omega, J)
        return vals[j - m]

    return Expansion(M=M, m=m, J=J, coeff=coeff)


def expand_derivative(
    M: Submanifold, coeffs: Expansion, i: int, J: Optional[int] = None
) -> Expansion:
    """Expansion of the ambient partial d/dx_i of a function with the given
    expansion, per the termwise derivative formula.

    The coefficient of rho^j in the derivative is

        (j+1) a_{j+1} theta_i  +  delta a_j / delta xi_i
        + sum_{k=1..d} [ delta a_{j+1}/delta omega_k (n_{k,i} - omega_k theta_i)
                         + delta a_j/delta omega_k sum_h omega_h n_h . delta n_k/delta x_i ]
        + sum_{k=m..j-1} sum_l b_{l,i,j-k} delta a_k / delta xi_l ,

    with orders running from m-1 up to J (default: one below the input top,
    the highest the input data can support).
    """
    m_out = coeffs.m - 1
    J_out = coeffs.J - 1 if J is None else J
    if J_out > coeffs.J - 1:
        raise OrderTooHigh(
            f"derivative expansion order {J_out} needs input coefficients beyond {coeffs.J}"
        )
    d = M.codim

    def out_coeff(j, xi, omega):
        xi = np.asarray(xi, dtype=float)
        omega = np.asarray(omega, dtype=float)
        nvecs = frame_vectors(M, xi)
        th = theta_vector(M, xi, omega)
        th_i = th[..., i]
        total = (j + 1) * coeffs.a(j + 1, xi, omega) * th_i
        total = total + coeffs.delta_xi(j, i, xi, omega)
        for k in range(coeffs.m, j):
            for l in range(M.ambient_dim):
                dk = coeffs.delta_xi(k, l, xi, omega)
                if np.all(dk == 0.0):
                    continue
                total = total + b_coeff(M, l, i, j - k, xi, omega) * dk
        if d > 1:
            dnk = frame_delta_derivatives(M, xi, i)          # (..., k, n)
            transport = np.einsum("...hn,...kn->...hk", nvecs, dnk)
            for k in range(d):
                dw_next = coeffs.delta_omega(j + 1, k, xi, omega)
                total = total + dw_next * (nvecs[..., k, i] - omega[..., k] * th_i)
                dw_same = coeffs.delta_omega(j, k, xi, omega)
                if np.any(dw_same != 0.0):
                    total = total + dw_same * np.einsum(
                        "...h,...hk->...k", omega, transport
                    )[..., k]
        return total

    return Expansion(M=M, m=m_out, J=J_out, coeff=out_coeff)


@dataclass(frozen=True)
class ExpansionCheck:
    kind: str
    axis: Optional[int]
    slope: float
    target: float
    passed: bool


@dataclass(frozen=True)
class ExpansionReport:
    checks: list
    passed: bool


def validate_strong_expansion(
    M: Submanifold,
    phi: ThickTestFunction,
    samples: int = 5,
    J: Optional[int] = None,
    seed: int = 0,
) -> ExpansionReport:
    """Check that the remainder after J terms decays like rho^(J+1), for phi
    and for its first partial derivatives.

    The decay exponent is measured as a log-log slope on a fresh geometric
    ladder (offset from the fit ladder); a slope at least J+1-0.2, or a
    remainder at rounding level, passes.  Failure flags functions outside
    the admissible class (e.g. logarithmic factors).
    """
    from .quadrature import sigma_rule

    rng = np.random.default_rng(seed)
    J = phi.leading_order + 3 if J is None else J
    nodes = sigma_rule(M, level=2).nodes
    idx = rng.choice(nodes.shape[0], size=samples, replace=False)
    checks = []

    def slope_check(fn, d_kind, axis):
        m = fn.leading_order
        Jn = J if d_kind == "phi" else J - 1
        target = Jn + 1.0
        for s in range(samples):
            xi = nodes[idx[s]]
            w = rng.standard_normal(M.codim)
            w /= np.linalg.norm(w)
            try:
                coeffs = extract_coeffs(M, fn, xi, w, Jn)
            except IllConditioned:
                checks.append(ExpansionCheck(d_kind, axis, np.nan, target, False))
                continue
            rho0 = M.tube_radius / 4.0
            if fn.cutoff_start is not None:
                rho0 = min(rho0, 0.9 * fn.cutoff_start)
            rho = (rho0 / 3.0) * 0.5 ** np.arange(8)
            if fn.min_rho > 0:
                rho = rho[rho >= fn.min_rho]
            pts = embed_points(
                M,
                np.broadcast_to(xi, (rho.size, xi.size)),
                np.broadcast_to(w, (rho.size, w.size)),
                rho,
            )
            vals = fn.eval(pts)
            partial_sum = sum(
                coeffs[j - m] * rho ** j for j in range(m, Jn + 1)
            )
            rem = np.abs(vals - partial_sum)
            mask = rem > 1e-13
            if not np.any(mask):
                checks.append(ExpansionCheck(d_kind, axis, np.inf, target, True))
                continue
            sl = np.polyfit(np.log(rho[mask]), np.log(rem[mask]), 1)[0]
            checks.append(
                ExpansionCheck(d_kind, axis, float(sl), target, sl >= target - 0.2)
            )

    slope_check(phi, "phi", None)
    for i in range(M.ambient_dim):
        slope_check(partial_derivative(phi, i), "dphi", i)
    return ExpansionReport(checks=checks, passed=all(c.passed for c in checks))
