"""Closed-form transforms of the (log-price, quadratic-variation, variance) triple.

Implemented here:

* ``partial_transform_g``  - the partial transform of the triple transition
  density (Fourier in the price and quadratic-variation arguments, density
  in the variance argument),
* ``joint_cf_h``           - joint characteristic function of (X, I),
* ``partial_transform_g1`` - the (X, V) partial transform (eta = 0 slice),
* ``transition_density_v`` - transition density of the instantaneous variance,
* ``cir_transition_density_u`` - transition density of the reciprocal
  variance U = 1/V (an inhomogeneous CIR process),
* ``conditional_cf_integrated_variance`` - CF of int V dt given endpoints,
* ``bivariate_cf_phi``     - the two-date joint CF, by quadrature over the
  intermediate variance.

Everything is assembled in log space: the dynamic range of the density
factors spans hundreds of orders of magnitude and the Bessel argument
z = (2/C) sqrt(A/(v v')) explodes as the time step shrinks, so products are
only ever formed as ``exp(sum of logs)`` with the exponentially scaled
Bessel inside.

A deliberate transcription guard: plain ``kappa`` drives the density order
``1 + 2 kappa / eps^2`` and the probabilistic-route exponent, while
``kappa_tilde = kappa - i omega rho eps`` appears only inside g's power and
the exponent c.  The two are kept in separate named variables everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import specfun
from .errors import (
    DeltaRegimeError,
    OverflowSignalError,
    ThreeHalvesError,
)
from .model import ModelParams, _drift_a_vec, coef_A, coef_C

# Below this separation g and the V-density are Dirac-like; no finite
# evaluation is meaningful.
SMALL_DT_DELTA = 1e-10

_LOG_OVERFLOW = 709.0


@dataclass(frozen=True)
class TransformPoint:
    """A complex (omega, eta) Fourier point; contours are always explicit."""

    omega: complex
    eta: complex = 0.0

    def __post_init__(self):
        om = complex(self.omega)
        et = complex(self.eta)
        if not (np.isfinite(om.real) and np.isfinite(om.imag)
                and np.isfinite(et.real) and np.isfinite(et.imag)):
            raise ThreeHalvesError("TransformPoint components must be finite")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "eta", et)


@dataclass(frozen=True)
class TransformCoefficients:
    """Symbol block of the closed-form transform at one (omega, eta) point."""

    kappa_tilde: complex
    c: complex
    a: complex
    A: float
    C: float


def _kappa_tilde(omega, params: ModelParams):
    return params.kappa - 1j * np.asarray(omega, dtype=complex) * params.rho * params.epsilon


def _c_exponent(omega, eta, params: ModelParams):
    """Principal-branch exponent c(omega, eta); Re(c) >= 0 by construction."""
    omega = np.asarray(omega, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    b0 = 0.5 + _kappa_tilde(omega, params) / params.eps2
    return np.sqrt(b0 * b0 + (1j * omega + omega * omega - 2j * eta) / params.eps2)


def coefficients(point: TransformPoint, params: ModelParams, t: float,
                 t_prime: float) -> TransformCoefficients:
    """Assemble (kappa_tilde, c, a, A, C) for one transform point.

    For real (omega, eta) the branch analysis guarantees
    Re(c) > 1/2 + kappa/eps^2 strictly; this is verified here.  On complex
    contours the bound need not hold and is not enforced.
    """
    om, et = point.omega, point.eta
    kt = complex(_kappa_tilde(om, params))
    c = complex(_c_exponent(om, et, params))
    a = complex(_drift_a_vec(om, et, params))
    A = coef_A(params.theta, t, t_prime)
    C = coef_C(params.theta, params.epsilon, t, t_prime)
    if om.imag == 0.0 and et.imag == 0.0 and (om, et) != (0.0, 0.0):
        bound = 0.5 + params.kappa / params.eps2
        if not c.real > bound - 1e-12:
            raise ThreeHalvesError(
                f"branch violation: Re(c)={c.real} <= 1/2 + kappa/eps^2={bound} "
                f"at real point (omega={om}, eta={et})"
            )
    return TransformCoefficients(kappa_tilde=kt, c=c, a=a, A=A, C=C)


def _require_dt(t: float, t_prime: float) -> float:
    dt = t_prime - t
    if dt < SMALL_DT_DELTA:
        raise DeltaRegimeError(
            f"t'-t={dt} below {SMALL_DT_DELTA}: transition kernel is Dirac-like"
        )
    return dt


def _exp_checked(logv, what: str):
    logv = np.asarray(logv)
    if np.any(logv.real > _LOG_OVERFLOW):
        raise OverflowSignalError(f"{what} overflows double precision")
    # Underflow returns an exact 0: the value is genuinely below the
    # representable range (density tail), which is what integrators need.
    return np.exp(logv)


# ---------------------------------------------------------------------------
# The partial transform g and its relatives.
# ---------------------------------------------------------------------------


def _log_g_vec(t, v, t_prime, omega, eta, v_prime, params: ModelParams):
    """log g(t, v; t', omega, eta, v') with numpy broadcasting.

    g = e^{a(t'-t)} (A/C) exp(-(A v + v')/(C v v')) v'^{-2}
        (A v / v')^{1/2 + kt/eps^2} I_{2c}((2/C) sqrt(A/(v v'))).
    """
    dt = _require_dt(t, t_prime)
    A = coef_A(params.theta, t, t_prime)
    C = coef_C(params.theta, params.epsilon, t, t_prime)
    v = np.asarray(v, dtype=float)
    v_prime = np.asarray(v_prime, dtype=float)
    omega = np.asarray(omega, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    if np.any(v <= 0.0) or np.any(v_prime <= 0.0):
        raise ThreeHalvesError("variance arguments must be positive")

    kt = _kappa_tilde(omega, params)
    c = _c_exponent(omega, eta, params)
    a = _drift_a_vec(omega, eta, params)
    z = (2.0 / C) * np.sqrt(A / (v * v_prime))

    log_i = specfun._log_bessel_i_vec(2.0 * c, z)
    lv = np.log(v)
    lvp = np.log(v_prime)
    log_g = (
        a * dt
        + np.log(A)
        - np.log(C)
        - (A * v + v_prime) / (C * v * v_prime)
        - 2.0 * lvp
        + (0.5 + kt / params.eps2) * (np.log(A) + lv - lvp)
        + log_i
    )
    return log_g


def partial_transform_g(t: float, v: float, t_prime: float,
                        point: TransformPoint, v_prime: float,
                        params: ModelParams) -> complex:
    """Partial transform of the triple transition density (scalar form)."""
    log_g = _log_g_vec(t, v, t_prime, point.omega, point.eta,
                       v_prime, params)
    return complex(np.ravel(_exp_checked(log_g, "partial_transform_g"))[0])


def partial_transform_g1(t: float, v: float, t_prime: float, omega: complex,
                         v_prime: float, params: ModelParams) -> complex:
    """The (X, V) partial transform: g at eta = 0."""
    return partial_transform_g(t, v, t_prime, TransformPoint(omega, 0.0),
                               v_prime, params)


def transition_density_v(t: float, v: float, t_prime: float, v_prime: float,
                         params: ModelParams) -> float:
    """Transition density of the instantaneous variance (g at omega=eta=0)."""
    val = partial_transform_g(t, v, t_prime, TransformPoint(0.0, 0.0),
                              v_prime, params)
    if abs(val.imag) > 1e-12 * max(abs(val.real), 1e-300):
        raise ThreeHalvesError("variance density came out non-real")
    return max(val.real, 0.0)


def _log_density_v_vec(t, v, t_prime, v_prime, params: ModelParams):
    """Vectorized log of the V-transition density (real orders throughout)."""
    return _log_g_vec(t, v, t_prime, 0.0, 0.0, v_prime, params).real


def cir_transition_density_u(t: float, u: float, t_prime: float,
                             u_prime: float, params: ModelParams) -> float:
    """Transition density of U = 1/V, an inhomogeneous CIR process.

    p_U(u'|u) = (A/C) exp(-(A u' + u)/C) (A u'/u)^{1/2 + kappa/eps^2}
                I_{1 + 2 kappa/eps^2}((2/C) sqrt(A u u')).

    Related to the V-density by p_V(v'|v) = (1/v'^2) p_U(1/v' | 1/v).
    """
    _require_dt(t, t_prime)
    if u <= 0.0 or u_prime <= 0.0:
        raise ThreeHalvesError("CIR state must be positive")
    A = coef_A(params.theta, t, t_prime)
    C = coef_C(params.theta, params.epsilon, t, t_prime)
    order = 1.0 + 2.0 * params.kappa / params.eps2
    z = (2.0 / C) * np.sqrt(A * u * u_prime)
    log_p = (
        np.log(A) - np.log(C)
        - (A * u_prime + u) / C
        + (0.5 + params.kappa / params.eps2) * (np.log(A) + np.log(u_prime) - np.log(u))
        + specfun._log_bessel_i_vec(order, z)
    )
    return float(np.ravel(_exp_checked(log_p, "cir_transition_density_u").real)[0])


def conditional_cf_integrated_variance(xi: complex, t: float, t_prime: float,
                                       v: float, v_prime: float,
                                       params: ModelParams) -> complex:
    """CF of int_t^{t'} V ds conditional on both variance endpoints.

    A ratio of Bessel functions sharing one argument; both are evaluated in
    log space so the (huge) shared exponential scale cancels analytically:

        I_nuhat(z) / I_b1(z),  nuhat = sqrt((1 + 2k/e^2)^2 - 8 i xi / e^2),
        b1 = 1 + 2 kappa/eps^2,  z = (2/C) sqrt(A/(v v')).
    """
    _require_dt(t, t_prime)
    if v <= 0.0 or v_prime <= 0.0:
        raise ThreeHalvesError("variance endpoints must be positive")
    xi = complex(xi)
    A = coef_A(params.theta, t, t_prime)
    C = coef_C(params.theta, params.epsilon, t, t_prime)
    b1 = 1.0 + 2.0 * params.kappa / params.eps2
    nuhat = np.sqrt(complex(b1 * b1) - 8j * xi / params.eps2)
    z = (2.0 / C) * np.sqrt(A / (v * v_prime))
    log_num = specfun._log_bessel_i_vec(nuhat, z)
    log_den = specfun._log_bessel_i_vec(b1, z)
    return complex(np.ravel(_exp_checked(
        log_num - log_den, "conditional_cf_integrated_variance"))[0])


def _conditional_cf_vec(xi, t, t_prime, v, v_prime, params: ModelParams):
    """Vectorized conditional CF of integrated variance (arrays broadcast)."""
    _require_dt(t, t_prime)
    xi = np.asarray(xi, dtype=complex)
    A = coef_A(params.theta, t, t_prime)
    C = coef_C(params.theta, params.epsilon, t, t_prime)
    b1 = 1.0 + 2.0 * params.kappa / params.eps2
    nuhat = np.sqrt(b1 * b1 - 8j * xi / params.eps2)
    z = (2.0 / C) * np.sqrt(A / (np.asarray(v, float) * np.asarray(v_prime, float)))
    log_num = specfun._log_bessel_i_vec(nuhat, z)
    log_den = specfun._log_bessel_i_vec(b1 + np.zeros_like(nuhat), z)
    return _exp_checked(log_num - log_den, "conditional_cf_integrated_variance")


# ---------------------------------------------------------------------------
# Probabilistic factorization of g (the paper-independent second route).
# ---------------------------------------------------------------------------


def xi_for_factorization(omega, eta, params: ModelParams):
    """Map (omega, eta) to the xi argument of the conditional CF.

    Chosen so that i*xi equals the coefficient of int V ds in the
    conditional-expectation exponent of the rewritten log-price dynamics:

        i xi = i omega [rho eps (kappa/eps^2 + 1/2) - 1/2]
               - (1 - rho^2) omega^2 / 2 + i eta.
    """
    omega = np.asarray(omega, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    slope = params.rho * params.epsilon * (params.kappa / params.eps2 + 0.5) - 0.5
    return omega * slope + 0.5j * (1.0 - params.rho**2) * omega * omega + eta


def partial_transform_g_factorized(t: float, v: float, t_prime: float,
                                   point: TransformPoint, v_prime: float,
                                   params: ModelParams) -> complex:
    """g assembled from its probabilistic factorization.

    Product of (i) the deterministic prefactor of the rewritten dynamics,
    (ii) the conditional CF of integrated variance at the mapped xi, and
    (iii) the V-transition density.  Agrees with ``partial_transform_g``
    pointwise; the two routes share no algebra beyond the Bessel kernel, so
    the agreement is the package's primary formula-transcription check.

    Only meaningful without jumps (the factorization rewrites the pure
    diffusion dynamics).
    """
    if params.jumps is not None and params.jumps.lam > 0.0:
        raise ThreeHalvesError("factorized route is defined for the no-jump model")
    om, et = point.omega, point.eta
    dt = _require_dt(t, t_prime)
    A = coef_A(params.theta, t, t_prime)
    xi = complex(xi_for_factorization(om, et, params))
    pref = np.exp(1j * om * (params.r - params.q) * dt) * (
        v_prime / (A * v)
    ) ** (1j * om * params.rho / params.epsilon)
    cf = conditional_cf_integrated_variance(xi, t, t_prime, v, v_prime, params)
    dens = transition_density_v(t, v, t_prime, v_prime, params)
    return complex(pref * cf * dens)


# ---------------------------------------------------------------------------
# Joint characteristic function h of (X, I).
# ---------------------------------------------------------------------------


def _log_h_vec(t, v, t_prime, omega, eta, params: ModelParams):
    """log h(t, v; t', omega, eta) with numpy broadcasting.

    h = e^{a dt} [Gamma(bt - at)/Gamma(bt)] x^{at} M(at, bt, -x),
    x = 1/(C v), at = -1/2 - kt/eps^2 + c, bt = 1 + 2c.

    Two regimes: for moderate x the Kummer transformation plus the Taylor
    series (positive argument, no cancellation); for large x the algebraic
    asymptotic branch, in which the Gamma ratio and the power cancel
    analytically, leaving log h = a dt + log(asymptotic sum).
    """
    dt = t_prime - t
    omega = np.asarray(omega, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    v = np.asarray(v, dtype=float)
    if dt == 0.0:
        shape = np.broadcast_shapes(omega.shape, eta.shape, v.shape)
        return np.zeros(shape, dtype=complex)
    if dt < 0.0:
        raise ThreeHalvesError("t_prime must be >= t")
    if np.any(v <= 0.0):
        raise ThreeHalvesError("variance must be positive")

    C = coef_C(params.theta, params.epsilon, t, t_prime)
    kt = _kappa_tilde(omega, params)
    c = _c_exponent(omega, eta, params)
    a = _drift_a_vec(omega, eta, params)
    alpha_t = -0.5 - kt / params.eps2 + c
    beta_t = 1.0 + 2.0 * c
    x = 1.0 / (C * v)

    alpha_t, beta_t, x, a = np.broadcast_arrays(
        np.atleast_1d(alpha_t), np.atleast_1d(beta_t),
        np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(a)
    )
    out = np.empty(x.shape, dtype=complex)

    m1 = np.abs(alpha_t)
    m2 = np.abs(alpha_t - beta_t + 1.0)
    mx = np.maximum(m1, m2)
    asym = x > np.maximum(specfun.KUMMER_ASYM_MIN_X,
                          specfun.KUMMER_ASYM_ORDER_FACTOR * mx * mx + 50.0)

    if np.any(asym):
        out[asym] = specfun._log_kummer_asym_sum(
            alpha_t[asym], beta_t[asym], x[asym]
        )
    rest = ~asym
    if np.any(rest):
        at = alpha_t[rest]
        bt = beta_t[rest]
        xr = x[rest]
        logm, lost = specfun._log_kummer_taylor(bt - at, bt, xr.astype(complex))
        if np.any(lost > 23.0):
            raise ThreeHalvesError(
                "joint CF Taylor branch lost more than 10 digits; "
                "contour outside the supported strip"
            )
        out[rest] = (
            specfun._log_gamma_vec(bt - at)
            - specfun._log_gamma_vec(bt)
            + at * np.log(xr)
            - xr
            + logm
        )
    return a * dt + out


def joint_cf_h(t: float, v: float, t_prime: float, point: TransformPoint,
               params: ModelParams) -> complex:
    """Joint characteristic function of (X, I): E_t[e^{i w X' + i e I'}] factor.

    The full expectation is e^{i w X_t + i e I_t} * h; this returns h.
    Exactly 1 at t = t_prime (terminal condition).
    """
    if t_prime == t:
        return 1.0 + 0.0j
    log_h = _log_h_vec(t, v, t_prime, point.omega, point.eta, params)
    return complex(np.ravel(_exp_checked(log_h, "joint_cf_h"))[0])


# ---------------------------------------------------------------------------
# Bivariate (two-date) characteristic function.
# ---------------------------------------------------------------------------


def bivariate_cf_phi(t: float, state: Tuple[float, float, float], t1: float,
                     t2: float, w: Tuple[complex, complex],
                     e: Tuple[complex, complex], params: ModelParams,
                     cfg) -> complex:
    """Joint CF of ((X_{t1}, I_{t1}), (X_{t2}, I_{t2})) from state (x, y, v).

    Phi = e^{i(w1+w2)x + i(e1+e2)y}
          int_0^inf g(t, v; t1, w1+w2, e1+e2, v') h(t1, v'; t2, w2, e2) dv'.

    Degenerate cases are taken analytically: at t1 == t2 the inner h is 1
    and the integral collapses to h(t, v; t1, w1+w2, e1+e2).
    """
    from .quadrature import integrate_semi_infinite

    x, y, v = state
    w1, w2 = complex(w[0]), complex(w[1])
    e1, e2 = complex(e[0]), complex(e[1])
    if not t < t1 <= t2:
        raise ThreeHalvesError("need t < t1 <= t2")
    pref = np.exp(1j * (w1 + w2) * x + 1j * (e1 + e2) * y)
    if t1 == t2:
        return complex(
            pref * joint_cf_h(t, v, t1, TransformPoint(w1 + w2, e1 + e2), params)
        )

    def integrand(vp):
        lg = _log_g_vec(t, v, t1, w1 + w2, e1 + e2, vp, params)
        lh = _log_h_vec(t1, vp, t2, w2, e2, params)
        return _exp_checked(lg + lh, "bivariate_cf_phi integrand")

    value, _err = integrate_semi_infinite(integrand, cfg)
    return complex(pref * value)
