"""Thick distributions along Sigma: finite parts, delta layers, pairings.

The functional pairing of the finite-part distribution attached to rho^lambda
splits into (i) the raw tube integral outside a collar of radius eta,
(ii) the integral over the collar with the divergent expansion orders
subtracted, and (iii) closed-form radial primitives for the subtracted
orders.  The resulting value does not depend on eta, which doubles as the
built-in self check: every pairing is recomputed at eta/2.

Thick delta layers of degree j pair a fiber density g against the j-th
expansion coefficient of the test function, normalized by the fiber sphere
measure.  Their distributional derivatives are materialized objects whose
pairing assembles the derivative-expansion coefficients; derivatives of
finite parts follow the closed differentiation rules (power rule plus a
delta layer at integer exponents).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .catalog import (
    Multiplier,
    density_theta,
    multiply_testfn,
    mult_product,
    mult_theta,
)
from .errors import (
    ExpansionUnavailable,
    NotConverged,
    OrderTooHigh,
    SupportExceedsTube,
)
from .expansion import (
    Expansion,
    ThickTestFunction,
    expand_derivative,
    expansion_from_testfn,
    extract_coeffs,
    taylor_coeffs_smooth,
)
from .geometry import Submanifold
from .quadrature import (
    QuadConfig,
    fp_radial,
    radial_panels,
    surface_grid,
    unit_sphere_measure,
)

_ETA_RTOL = 1e-7
_INT_SNAP = 1e-9
_TAIL_DEPTH = 8
_MAX_FIT_RANGE = 12


class ThickDistribution:
    """Base class; concrete variants implement their own pairing."""

    label = "T"


@dataclass(frozen=True)
class PfRhoLambda(ThickDistribution):
    """Finite part of rho^lambda, optionally weighted by a multiplier."""

    lam: float
    mult: Optional[Multiplier] = None

    @property
    def label(self):
        base = f"pf(rho^{self.lam:g})"
        return base if self.mult is None else f"{self.mult.label}*{base}"


@dataclass(frozen=True)
class PfPsi(ThickDistribution):
    """Finite-part embedding of a multiplier: Pf(psi) = psi * Pf(1)."""

    psi: Multiplier

    @property
    def label(self):
        return f"pf({self.psi.label})"


@dataclass(frozen=True)
class ThickDelta(ThickDistribution):
    """Degree-j delta layer: pairs g against the j-th expansion coefficient."""

    g: Callable
    degree: int
    g_label: str = "g"

    @property
    def label(self):
        return f"{self.g_label}*delta[{self.degree}]"


@dataclass(frozen=True)
class ThickDeltaDerivative(ThickDistribution):
    """Materialized partial derivatives of a delta layer.

    ``axes`` lists the differentiation axes in application order; the
    pairing assembles the derivative-expansion coefficients of the test
    function by iterating the termwise expansion.
    """

    g: Callable
    degree: int
    axes: tuple
    g_label: str = "g"

    @property
    def label(self):
        ax = ",".join(str(a + 1) for a in self.axes)
        return f"d/dx[{ax}]({self.g_label}*delta[{self.degree}])"


@dataclass(frozen=True)
class Multiplied(ThickDistribution):
    """Generic multiplier wrapper: pairs the inner object against psi*phi."""

    psi: Multiplier
    inner: ThickDistribution

    @property
    def label(self):
        return f"{self.psi.label}*({self.inner.label})"


@dataclass(frozen=True)
class LinearCombination(ThickDistribution):
    """Flat list of (coefficient, distribution) terms."""

    terms: tuple

    @property
    def label(self):
        return " + ".join(f"{c:g}*{t.label}" for c, t in self.terms)


def combination(terms) -> ThickDistribution:
    """Flatten nested combinations and drop zero coefficients."""
    flat = []
    for c, t in terms:
        if c == 0:
            continue
        if isinstance(t, LinearCombination):
            flat.extend((c * c2, t2) for c2, t2 in t.terms)
        else:
            flat.append((c, t))
    if len(flat) == 1 and flat[0][0] == 1:
        return flat[0][1]
    return LinearCombination(terms=tuple(flat))


@dataclass(frozen=True)
class PairingResult:
    """Pairing value with the eta self-check and diagnostics."""

    value: float
    eta_used: Optional[float] = None
    value_eta_half: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", True))


def _coeff_table(M, phi, grid, j_lo, j_hi):
    """Nodal coefficient arrays a_j, j = j_lo..j_hi, shape (orders, Ns, Nw)."""
    if j_hi < phi.leading_order:
        shape = (j_hi - j_lo + 1,) + grid.w2.shape
        return np.zeros(shape)
    vals = extract_coeffs(M, phi, grid.xi_grid, grid.omega_grid, j_hi)
    pad = []
    for j in range(j_lo, j_hi + 1):
        if j < phi.leading_order:
            pad.append(np.zeros(grid.w2.shape))
        else:
            pad.append(vals[j - phi.leading_order])
    return np.stack(pad)


def _available_top(phi: ThickTestFunction) -> float:
    if phi.analytic_coeffs is not None:
        return math.inf if phi.max_coeff_order is None else phi.max_coeff_order
    return phi.leading_order + _MAX_FIT_RANGE


def _pf_orders(lam, d, phi):
    """Subtraction cut jmax and the tail depth for the inner-zone series."""
    lam_re = lam.real if isinstance(lam, complex) else lam
    if abs(lam_re - round(lam_re)) < _INT_SNAP and (
        not isinstance(lam, complex) or abs(lam.imag) < _INT_SNAP
    ):
        jmax = -int(round(lam_re)) - d
    else:
        jmax = math.floor(-lam_re - d)
    top = _available_top(phi)
    if jmax > top:
        raise ExpansionUnavailable(
            f"finite part needs coefficients to order {jmax}, have {top}"
        )
    jtail = max(jmax, phi.leading_order - 1) + _TAIL_DEPTH
    jtail = int(min(jtail, top))
    return jmax, jtail


def _pf_value(M, lam, phi, eta, grid, coeffs, j_lo, jmax, jtail, radial_points):
    """One evaluation of the finite-part split at collar radius eta."""
    d = M.codim
    S = phi.support_radius
    eta1 = eta / 16.0

    def shell(rho, w_rho, subtract):
        pts = grid.points(rho)
        vals = phi.eval(pts)
        if subtract and jmax >= j_lo:
            acc = np.zeros_like(vals)
            for j in range(j_lo, jmax + 1):
                acc = acc + coeffs[j - j_lo][:, :, None] * rho**j
            vals = vals - acc
        rad = w_rho * rho ** (lam + d - 1)
        return np.einsum("sw,swp,p->", grid.w2, vals, rad)

    breaks = [eta, S]
    if phi.cutoff_start is not None and eta < phi.cutoff_start < S:
        breaks = [eta, phi.cutoff_start, S]
    rho_a, w_a = radial_panels(breaks, radial_points)
    outer = shell(rho_a, w_a, subtract=False)

    rho_b, w_b = radial_panels([eta1, eta], radial_points)
    collar = shell(rho_b, w_b, subtract=True)

    A = np.einsum("sw,jsw->j", grid.w2, coeffs)  # integrated coefficients
    fp_terms = 0.0
    for j in range(j_lo, jmax + 1):
        fp_terms = fp_terms + fp_radial(lam + j + d - 1, eta) * A[j - j_lo]
    tail = 0.0
    for j in range(max(jmax + 1, j_lo), jtail + 1):
        tail = tail + eta1 ** (lam + j + d) / (lam + j + d) * A[j - j_lo]
    return outer + collar + fp_terms + tail


def _pair_pf(M, lam, mult, phi, eta, config) -> PairingResult:
    phi_eff = multiply_testfn(M, mult, phi) if mult is not None else phi
    if phi_eff.support_radius > M.tube_radius + 1e-12:
        raise SupportExceedsTube(
            f"support radius {phi_eff.support_radius} exceeds tube {M.tube_radius}"
        )
    S = phi_eff.support_radius
    eta = 0.5 * S if eta is None else float(eta)
    if not 0 < eta < S:
        raise ValueError("eta must lie strictly inside the support")
    if isinstance(lam, complex) and abs(lam.imag) < 1e-15:
        lam = lam.real
    grid = surface_grid(M, config)
    jmax, jtail = _pf_orders(lam, M.codim, phi_eff)
    j_lo = phi_eff.leading_order
    coeffs = _coeff_table(M, phi_eff, grid, j_lo, jtail)
    v1 = _pf_value(M, lam, phi_eff, eta, grid, coeffs, j_lo, jmax, jtail, config.radial_points)
    v2 = _pf_value(M, lam, phi_eff, eta / 2, grid, coeffs, j_lo, jmax, jtail, config.radial_points)
    if not isinstance(lam, complex):
        v1, v2 = float(np.real(v1)), float(np.real(v2))
    diff = abs(v2 - v1)
    return PairingResult(
        value=v1,
        eta_used=eta,
        value_eta_half=v2,
        diagnostics={
            "converged": diff <= _ETA_RTOL * (1.0 + abs(v1)),
            "eta_half_diff": diff,
        },
    )


def _testfn_coeff_order(M, phi, j, grid):
    if j < phi.leading_order:
        return np.zeros(grid.w2.shape)
    if j > _available_top(phi):
        raise ExpansionUnavailable(
            f"test function cannot supply coefficient order {j}"
        )
    return _coeff_table(M, phi, grid, j, j)[0]


def _pair_delta(M, T: ThickDelta, phi, config) -> PairingResult:
    grid = surface_grid(M, config)
    aj = _testfn_coeff_order(M, phi, T.degree, grid)
    gv = T.g(grid.xi_grid, grid.omega_grid)
    value = float(
        np.einsum("sw,sw,sw->", grid.w2, gv * np.ones(grid.w2.shape), aj)
        / unit_sphere_measure(M.codim)
    )
    return PairingResult(value=value)


def _pair_delta_derivative(M, T: ThickDeltaDerivative, phi, config) -> PairingResult:
    grid = surface_grid(M, config)
    p = len(T.axes)
    top_needed = T.degree + p
    if top_needed > _available_top(phi):
        raise ExpansionUnavailable(
            f"derivative pairing needs coefficients to order {top_needed}"
        )
    exp = expansion_from_testfn(M, phi, top_needed)
    for ax in reversed(T.axes):
        exp = expand_derivative(M, exp, ax)
    aji = exp.a(T.degree, grid.xi_grid, grid.omega_grid)
    gv = T.g(grid.xi_grid, grid.omega_grid)
    value = float(
        (-1.0) ** p
        * np.einsum("sw,sw,sw->", grid.w2, gv * np.ones(grid.w2.shape), aji)
        / unit_sphere_measure(M.codim)
    )
    return PairingResult(value=value)


def pair(
    M: Submanifold,
    T: ThickDistribution,
    phi: ThickTestFunction,
    eta: Optional[float] = None,
    config: Optional[QuadConfig] = None,
) -> PairingResult:
    """Dual pairing <T, phi>.

    Finite-part variants run the eta-split with a built-in recomputation at
    eta/2 (the ``converged`` diagnostic reports their agreement); delta
    layers integrate g times the matching expansion coefficient over
    Sigma x S^(d-1).  Multiplier weights and linear combinations reduce to
    these two cases.
    """
    config = config or QuadConfig()
    if phi.support_radius > M.tube_radius + 1e-12:
        raise SupportExceedsTube(
            f"support radius {phi.support_radius} exceeds tube {M.tube_radius}"
        )
    if isinstance(T, PfRhoLambda):
        return _pair_pf(M, T.lam, T.mult, phi, eta, config)
    if isinstance(T, PfPsi):
        return _pair_pf(M, 0.0, T.psi, phi, eta, config)
    if isinstance(T, ThickDelta):
        return _pair_delta(M, T, phi, config)
    if isinstance(T, ThickDeltaDerivative):
        return _pair_delta_derivative(M, T, phi, config)
    if isinstance(T, Multiplied):
        return pair(M, T.inner, multiply_testfn(M, T.psi, phi), eta=eta, config=config)
    if isinstance(T, LinearCombination):
        total, total_half, eta_used, conv = 0.0, 0.0, None, True
        for c, sub in T.terms:
            res = pair(M, sub, phi, eta=eta, config=config)
            total += c * res.value
            total_half += c * (
                res.value_eta_half if res.value_eta_half is not None else res.value
            )
            eta_used = res.eta_used or eta_used
            conv = conv and res.converged
        return PairingResult(
            value=total,
            eta_used=eta_used,
            value_eta_half=total_half if eta_used is not None else None,
            diagnostics={"converged": conv},
        )
    raise TypeError(f"unknown distribution {type(T).__name__}")


def _mult_on_delta(M, psi: Multiplier, T: ThickDelta) -> ThickDistribution:
    """Materialize psi * (g delta^[j]) as a combination of delta layers."""
    terms = []
    for s in range(psi.s_min, psi.s_max + 1):
        def g_s(xi, omega, _s=s, _g=T.g, _psi=psi):
            return _psi.coeff(_s, xi, omega) * _g(xi, omega)

        terms.append(
            (
                1.0,
                ThickDelta(
                    g=g_s,
                    degree=T.degree - s,
                    g_label=f"{psi.label}[{s}]*{T.g_label}",
                ),
            )
        )
    return combination(terms)


def apply_multiplier(M: Submanifold, psi: Multiplier, T: ThickDistribution) -> ThickDistribution:
    """The multiplier action psi*T (transpose of multiplication on tests)."""
    if getattr(psi, "label", "") == "0":
        return LinearCombination(terms=())
    if isinstance(T, PfRhoLambda):
        new_mult = psi if T.mult is None else mult_product(psi, T.mult)
        return PfRhoLambda(lam=T.lam, mult=new_mult)
    if isinstance(T, PfPsi):
        return PfPsi(psi=mult_product(psi, T.psi))
    if isinstance(T, ThickDelta):
        return _mult_on_delta(M, psi, T)
    if isinstance(T, Multiplied):
        return Multiplied(psi=mult_product(psi, T.psi), inner=T.inner)
    if isinstance(T, LinearCombination):
        return combination([(c, apply_multiplier(M, psi, t)) for c, t in T.terms])
    return Multiplied(psi=psi, inner=T)


def derivative(M: Submanifold, T: ThickDistribution, i: int) -> ThickDistribution:
    """Distributional partial derivative of T along axis i.

    Finite parts follow the closed rule: lambda * theta_i * Pf(rho^(lambda-1))
    for non-integer lambda, plus |S^(d-1)| theta_i delta^[1-d-k] at integer
    exponents k.  Pf(psi) picks up Pf(d psi/dx_i) plus the same boundary
    layer weighted by psi.  Delta layers materialize their derivative;
    combinations and multiplier weights follow the Leibniz rule.
    """
    d = M.codim
    fiber = unit_sphere_measure(d)
    if isinstance(T, PfRhoLambda):
        lam = T.lam
        lam_re = lam.real if isinstance(lam, complex) else lam
        theta_i = mult_theta(M, i)
        new_mult = theta_i if T.mult is None else mult_product(T.mult, theta_i)
        terms = []
        if T.mult is not None:
            if T.mult.partial is None:
                raise OrderTooHigh(
                    f"multiplier {T.mult.label} ships no derivative"
                )
            dm = T.mult.partial(i)
            if not getattr(dm, "label", "") == "0":
                terms.append((1.0, PfRhoLambda(lam=lam, mult=dm)))
        is_int = abs(lam_re - round(lam_re)) < _INT_SNAP and not isinstance(lam, complex)
        if is_int:
            k = int(round(lam_re))
            if k != 0:
                terms.append((float(k), PfRhoLambda(lam=k - 1, mult=new_mult)))
            boundary = ThickDelta(
                g=density_theta(M, i), degree=1 - d - k, g_label=f"theta{i + 1}"
            )
            if T.mult is not None:
                boundary = apply_multiplier(M, T.mult, boundary)
            terms.append((fiber, boundary))
        else:
            terms.append((lam, PfRhoLambda(lam=lam - 1, mult=new_mult)))
        return combination(terms)
    if isinstance(T, PfPsi):
        if T.psi.partial is None:
            raise OrderTooHigh(f"multiplier {T.psi.label} ships no derivative")
        dpsi = T.psi.partial(i)
        terms = []
        if not getattr(dpsi, "label", "") == "0":
            terms.append((1.0, PfPsi(psi=dpsi)))
        boundary = ThickDelta(
            g=density_theta(M, i), degree=1 - d, g_label=f"theta{i + 1}"
        )
        terms.append((fiber, apply_multiplier(M, T.psi, boundary)))
        return combination(terms)
    if isinstance(T, ThickDelta):
        return ThickDeltaDerivative(
            g=T.g, degree=T.degree, axes=(i,), g_label=T.g_label
        )
    if isinstance(T, ThickDeltaDerivative):
        return ThickDeltaDerivative(
            g=T.g, degree=T.degree, axes=T.axes + (i,), g_label=T.g_label
        )
    if isinstance(T, Multiplied):
        return leibniz(M, T.psi, T.inner, i)
    if isinstance(T, LinearCombination):
        return combination([(c, derivative(M, t, i)) for c, t in T.terms])
    raise TypeError(f"unknown distribution {type(T).__name__}")


def leibniz(M: Submanifold, psi: Multiplier, T: ThickDistribution, i: int) -> ThickDistribution:
    """Product rule (d/dx_i)(psi T) = (d psi/dx_i) T + psi (d/dx_i T)."""
    if psi.partial is None:
        raise OrderTooHigh(f"multiplier {psi.label} ships no derivative")
    dpsi = psi.partial(i)
    terms = []
    if not getattr(dpsi, "label", "") == "0":
        terms.append((1.0, apply_multiplier(M, dpsi, T)))
    terms.append((1.0, apply_multiplier(M, psi, derivative(M, T, i))))
    return combination(terms)


def _smooth_thick_view(M, phi: ThickTestFunction) -> ThickTestFunction:
    """Coefficient view of a smooth field via normal-frame Taylor data."""
    if phi.leading_order < 0:
        raise ValueError("smooth projection route requires leading order >= 0")

    def coeffs(j, xi, omega, _f=phi.eval):
        if j < 0:
            return np.zeros(
                np.broadcast_shapes(np.shape(xi)[:-1], np.shape(omega)[:-1])
            )
        return taylor_coeffs_smooth(M, _f, xi, omega, j)[j]

    return ThickTestFunction(
        leading_order=0,
        eval=phi.eval,
        support_radius=phi.support_radius,
        analytic_coeffs=coeffs,
        max_coeff_order=3,
        cutoff_start=phi.cutoff_start,
        label=f"{phi.label}|smooth",
    )


def project_pair(
    M: Submanifold,
    T: ThickDistribution,
    phi: ThickTestFunction,
    config: Optional[QuadConfig] = None,
) -> float:
    """Pairing of the classical projection of T against a smooth field.

    Route (a) pairs T against the smooth field's Taylor-coefficient view.
    For plain delta layers the multilayer formula provides an independent
    route (fiber moments of g against normal-frame derivatives of phi,
    integrated over Sigma); both must agree to 1e-4.  Degrees j < 0 project
    to zero.
    """
    config = config or QuadConfig()
    thick_view = _smooth_thick_view(M, phi)
    value = pair(M, T, thick_view, config=config).value
    if isinstance(T, ThickDelta):
        j = T.degree
        if j < 0:
            route_b = 0.0
        elif j > 3:
            raise OrderTooHigh("multilayer route limited to degree <= 3")
        else:
            from .tangent import multi_indices, normal_derivative

            grid = surface_grid(M, config)
            gv = T.g(grid.xi_grid, grid.omega_grid) * np.ones(grid.w2.shape)
            route_b = 0.0
            for alpha in multi_indices(M.codim, j):
                mono = np.prod(
                    grid.omega ** np.asarray(alpha, dtype=float), axis=-1
                )
                h_alpha = np.einsum("w,sw,w->s", grid.w_omega, gv, mono)
                dn = normal_derivative(M, phi.eval, grid.xi, alpha)
                wfac = 1.0
                for a in alpha:
                    wfac /= math.factorial(a)
                route_b += wfac * float(np.dot(grid.w_xi, h_alpha * dn))
            route_b /= unit_sphere_measure(M.codim)
        if abs(value - route_b) >= 1e-4:
            raise NotConverged(
                f"projection routes disagree: {value:.8e} vs {route_b:.8e}"
            )
    return value


def residue(
    M: Submanifold,
    k: int,
    phi: ThickTestFunction,
    config: Optional[QuadConfig] = None,
    cross_check: bool = True,
) -> float:
    """Residue pairing <Res at lambda=k of Pf(rho^lambda), phi>
    = |S^(d-1)| <delta^[-k-d], phi>.

    With ``cross_check`` the value is compared against the numerical limit
    (lambda-k) <Pf(rho^lambda), phi> extrapolated from lambda = k +/- 1e-3.
    """
    config = config or QuadConfig()
    d = M.codim
    from .catalog import density_one

    value = unit_sphere_measure(d) * pair(
        M, ThickDelta(g=density_one, degree=-k - d, g_label="1"), phi, config=config
    ).value
    if cross_check:
        eps = 1e-3
        vp = pair(M, PfRhoLambda(lam=k + eps), phi, config=config).value
        vm = pair(M, PfRhoLambda(lam=k - eps), phi, config=config).value
        est = 0.5 * (eps * vp - eps * vm)
        if abs(est - value) > 1e-3 * (1.0 + abs(value)):
            raise NotConverged(
                f"residue mismatch: formula {value:.8e} vs limit {est:.8e}"
            )
    return value
