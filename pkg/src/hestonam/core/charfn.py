"""
Joint characteristic function of (log-price, variance) under risk-neutral
Heston dynamics, and the Fourier-inversion exercise probabilities P_1, P_2.

    f2(x, v, tau, phi, psi) = E[exp(i phi X_tau + i psi V_tau) | X_0 = x, V_0 = v]
                            = exp(i phi x + A(tau) + B(tau) v)

with B solving B' = xi^2/2 B^2 + (rho xi u - beta) B + (u^2 - u)/2, B(0) = i psi,
A' = (r - q) u + alpha B, A(0) = 0, u = i phi.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import norm

from ..data.models import MarketParams, ModelParams, QuadratureSpec
from ..exceptions import CharacteristicFunctionError, QuadratureError
from .diagnostics import Diagnostics

logger = logging.getLogger(__name__)

CLAMP_TOLERANCE = 1e-6
MAX_PHI_HALVINGS = 4
_SERIES_RADIUS = 1e-4
_MIN_UNWRAP_STEPS = 64
_MAX_UNWRAP_STEPS = 8192


@dataclass(frozen=True)
class CfArgs:
    """Arguments of the joint transform."""

    x: float
    v: float
    tau: float
    phi: complex
    psi: float = 0.0

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        if self.v < 0:
            raise ValueError(f"v must be non-negative, got {self.v}")


def _log1p(z: np.ndarray) -> np.ndarray:
    """Complex log(1 + z), accurate for tiny |z|."""
    small = np.abs(z) < _SERIES_RADIUS
    out = np.log(1.0 + np.where(small, 0.0, z))
    zs = np.where(small, z, 0.0)
    series = zs - zs**2 / 2 + zs**3 / 3
    return np.where(small, series, out)


def _unwrapped_log_ratio(ginv: np.ndarray, d: np.ndarray, tau: float) -> np.ndarray:
    """
    log((Ginv - e^{-d tau}) / (Ginv - 1)), continued from 0 at tau = 0 by
    following the argument along a tau grid.
    """
    turns = float(np.max(np.abs(d.imag))) * tau / math.pi if d.size else 0.0
    n_sub = int(min(_MAX_UNWRAP_STEPS, max(_MIN_UNWRAP_STEPS, math.ceil(8 * turns) + 1)))
    s = np.linspace(0.0, tau, n_sub)
    w = (ginv[:, None] - np.exp(-d[:, None] * s[None, :])) / (ginv[:, None] - 1.0)
    angle = np.unwrap(np.angle(w), axis=1)[:, -1]
    return np.log(np.abs(w[:, -1])) + 1j * angle


def affine_exponents(
    phi: np.ndarray,
    psi: np.ndarray,
    tau: float,
    m: ModelParams,
    mkt: MarketParams,
) -> tuple[np.ndarray, np.ndarray]:
    """
    A(tau) and B(tau) of the exponential-affine transform, elementwise in (phi, psi).

    phi may be complex (phi - i inside f1).
    """
    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    phi, psi = np.broadcast_arrays(phi, psi)
    u = 1j * phi
    b_init = 1j * psi
    alpha, beta = m.alpha, m.beta
    carry = (mkt.r - mkt.q) * u * tau

    if m.xi == 0.0:
        c = 0.5 * (u * u - u)
        if abs(beta) < 1e-12:
            b = b_init + c * tau
            int_b = b_init * tau + 0.5 * c * tau * tau
        else:
            decay = math.exp(-beta * tau)
            b = c / beta + (b_init - c / beta) * decay
            int_b = c / beta * tau + (b_init - c / beta) * (1.0 - decay) / beta
        return carry + alpha * int_b, b

    xi2 = m.xi**2
    bb = beta - m.rho * m.xi * u
    d = np.sqrt(bb * bb + xi2 * (u - u * u))
    r_minus = (u * u - u) / (bb + d)
    gap = b_init - r_minus
    den = xi2 * b_init - (bb + d)
    e = np.exp(-d * tau)

    b = r_minus - 2.0 * d * gap * e / (den - xi2 * gap * e)

    g = xi2 * gap / den
    log_ratio = np.empty_like(g)
    inside = np.abs(g) <= 1.0
    if inside.any():
        gi = g[inside]
        log_ratio[inside] = _log1p(gi * (1.0 - e[inside]) / (1.0 - gi))
    if (~inside).any():
        ginv = den[~inside] / (xi2 * gap[~inside])
        log_ratio[~inside] = _unwrapped_log_ratio(ginv, d[~inside], tau)

    int_b = r_minus * tau - (2.0 / xi2) * log_ratio
    return carry + alpha * int_b, b


def cf_f2(phi, psi, x: float, v: float, tau: float, m: ModelParams, mkt: MarketParams) -> np.ndarray:
    """Vectorized f2 over arrays of phi and psi."""
    a, b = affine_exponents(phi, psi, tau, m, mkt)
    with np.errstate(over="ignore", invalid="ignore"):
        value = np.exp(1j * np.asarray(phi, dtype=complex) * x + a + b * v)
    _check_finite(value, phi, psi, tau)
    return value


def cf_f1(phi, psi, x: float, v: float, tau: float, m: ModelParams, mkt: MarketParams) -> np.ndarray:
    """Vectorized f1 = e^{-x} e^{-(r-q) tau} f2(phi - i, psi)."""
    shifted = np.asarray(phi, dtype=complex) - 1j
    a, b = affine_exponents(shifted, psi, tau, m, mkt)
    with np.errstate(over="ignore", invalid="ignore"):
        value = np.exp(1j * shifted * x + a + b * v - x - (mkt.r - mkt.q) * tau)
    _check_finite(value, phi, psi, tau)
    return value


def _check_finite(value: np.ndarray, phi, psi, tau: float) -> None:
    bad = ~np.isfinite(value)
    if np.any(bad):
        i = int(np.flatnonzero(np.ravel(bad))[0])
        phi_bad = complex(np.ravel(np.broadcast_to(phi, value.shape))[i])
        psi_bad = float(np.real(np.ravel(np.broadcast_to(psi, value.shape))[i]))
        raise CharacteristicFunctionError(phi_bad, psi_bad, tau)


def joint_cf_f2(args: CfArgs, m: ModelParams, mkt: MarketParams) -> complex:
    """E[exp(i phi X_tau + i psi V_tau)] for one argument tuple."""
    return complex(cf_f2(np.array([args.phi]), np.array([args.psi]), args.x, args.v, args.tau, m, mkt)[0])


def f1_from_f2(args: CfArgs, m: ModelParams, mkt: MarketParams) -> complex:
    """Share-measure transform f1 for one argument tuple."""
    return complex(cf_f1(np.array([args.phi]), np.array([args.psi]), args.x, args.v, args.tau, m, mkt)[0])


def _inversion_integral(
    j: int, x: float, v: float, tau: float, log_k: float, psi_slope: float,
    m: ModelParams, mkt: MarketParams, phi_min: float, phi_max: float, n_phi: int,
) -> float:
    phi = np.linspace(phi_min, phi_max, n_phi)
    transform = cf_f1 if j == 1 else cf_f2
    f = transform(phi, psi_slope * phi, x, v, tau, m, mkt)
    integrand = np.real(np.exp(-1j * phi * log_k) * f / (1j * phi))
    # The integrand is even in phi; the first cell [0, phi_min] takes its edge value.
    return float(trapezoid(integrand, phi) + phi_min * integrand[0])


def probability_pj(
    j: int,
    s: float,
    v: float,
    tau: float,
    k_eff: float,
    psi_slope: float,
    m: ModelParams,
    mkt: MarketParams,
    quad: QuadratureSpec,
    diagnostics: Optional[Diagnostics] = None,
) -> float:
    """
    P_j = 1/2 + (1/pi) int_0^inf Re(e^{-i phi ln K} f_j(ln s, v, tau, phi, psi_slope phi) / (i phi)) dphi.

    P_2 is the risk-neutral probability that ln S_tau + psi_slope V_tau exceeds
    ln k_eff, P_1 the same event under the share measure. The result is
    clamped to [0, 1]; an excess above 1e-6 is reported as a warning.

    Raises:
        QuadratureError: If the transform overflows even after halving phi_max four times
    """
    if j not in (1, 2):
        raise ValueError(f"j must be 1 or 2, got {j}")
    if not (s > 0 and k_eff > 0 and tau > 0):
        raise ValueError(f"s, k_eff and tau must be positive, got {s}, {k_eff}, {tau}")

    x = math.log(s)
    log_k = math.log(k_eff)
    phi_max = quad.phi_max
    for attempt in range(MAX_PHI_HALVINGS + 1):
        try:
            integral = _inversion_integral(
                j, x, v, tau, log_k, psi_slope, m, mkt, quad.phi_min, phi_max, quad.n_phi
            )
            break
        except CharacteristicFunctionError as e:
            if not e.recoverable or attempt == MAX_PHI_HALVINGS:
                raise QuadratureError(
                    f"P_{j} could not be evaluated at tau={tau}",
                    details=e.user_message(),
                ) from e
            phi_max /= 2.0
            logger.debug(f"Transform overflow, retrying P_{j} with phi_max={phi_max}")
            if phi_max <= quad.phi_min:
                raise QuadratureError(f"P_{j} integration range collapsed at tau={tau}") from e

    p = 0.5 + integral / math.pi
    clamped = min(1.0, max(0.0, p))
    excess = abs(p - clamped)
    if excess > CLAMP_TOLERANCE:
        message = f"P_{j} outside [0, 1] by {excess:.2e} (tau={tau:.4g}, K={k_eff:.6g}); quadrature is inaccurate"
        if diagnostics is not None:
            diagnostics.warn(message, logger)
        else:
            logger.warning(message)
    return clamped


def short_horizon_probability(
    j: int,
    s: float,
    v: float,
    tau: float,
    k_eff: float,
    psi_slope: float,
    m: ModelParams,
    mkt: MarketParams,
) -> float:
    """
    Gaussian small-tau limit of P_j.

    Uses the local mean and variance of Y = ln S_tau + psi_slope V_tau; tends
    to the indicator of ln s + psi_slope v > ln k_eff (1/2 on the boundary).
    """
    x = math.log(s)
    drift = (mkt.r - mkt.q - 0.5 * v) + psi_slope * (m.alpha - m.beta * v)
    spread = 1.0 + 2.0 * m.rho * m.xi * psi_slope + (m.xi * psi_slope) ** 2
    var_y = max(v * tau * spread, 0.0)
    mean_y = x + psi_slope * v + drift * tau
    if j == 1:
        mean_y += v * tau * (1.0 + m.rho * m.xi * psi_slope)
    distance = mean_y - math.log(k_eff)
    if var_y == 0.0:
        return 1.0 if distance > 0 else (0.5 if distance == 0 else 0.0)
    return float(norm.cdf(distance / math.sqrt(var_y)))


def integrated_variance(v: float, tau: float, m: ModelParams) -> float:
    """int_0^tau V(s) ds along the deterministic path V' = alpha - beta V, V(0) = v."""
    alpha, beta = m.alpha, m.beta
    if abs(beta) < 1e-12:
        return v * tau + 0.5 * alpha * tau * tau
    level = alpha / beta
    return level * tau + (v - level) * (1.0 - math.exp(-beta * tau)) / beta


def lognormal_probability(j: int, s: float, k: float, tau: float, w: float, mkt: MarketParams) -> float:
    """Black-Scholes N(d1) (j=1) or N(d2) (j=2) with total variance w."""
    d2 = (math.log(s / k) + (mkt.r - mkt.q) * tau - 0.5 * w) / math.sqrt(w)
    return float(norm.cdf(d2 + math.sqrt(w) if j == 1 else d2))
