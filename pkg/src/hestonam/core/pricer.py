"""
Semi-analytic American call under Heston: the European value plus the
early-exercise premium integrated against a fitted exercise boundary.

All values are in discounted price space.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import norm

from ..data.models import MarketParams, ModelParams, OptionKind, OptionSpec, QuadratureSpec
from .charfn import probability_pj, short_horizon_probability
from .diagnostics import Diagnostics
from .lsm import BoundaryCurve

logger = logging.getLogger(__name__)

# exp(-TAIL_EXPONENT) bounds the neglected Fourier tail
TAIL_EXPONENT = 25.0
MAX_PHI_STRETCH = 8.0
MIN_VARIANCE = 1e-4
PREMIUM_NOISE = 1e-6


@dataclass(frozen=True)
class PriceResult:
    """European value, premium and their sum; price == european_part + premium_part."""

    price: float
    european_part: float
    premium_part: float
    diagnostics: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "european": self.european_part,
            "premium": self.premium_part,
            "warnings": list(self.diagnostics),
        }


def _horizon_quadrature(quad: QuadratureSpec, v: float, u: float, spread: float) -> Optional[QuadratureSpec]:
    """
    Stretch the phi grid so the transform tail at phi_max is negligible.

    Returns None when the horizon is too short for any admissible grid.
    """
    var_y = max(v, MIN_VARIANCE) * u * max(spread, 0.1)
    needed = math.sqrt(2.0 * TAIL_EXPONENT / var_y)
    if needed <= quad.phi_max:
        return quad
    if needed > MAX_PHI_STRETCH * quad.phi_max:
        return None
    scale = needed / quad.phi_max
    return quad.model_copy(update={"phi_max": needed, "n_phi": int(math.ceil(quad.n_phi * scale))})


def exercise_probability(
    j: int,
    s: float,
    v: float,
    u: float,
    k_eff: float,
    psi_slope: float,
    m: ModelParams,
    mkt: MarketParams,
    quad: QuadratureSpec,
    diagnostics: Optional[Diagnostics] = None,
) -> float:
    """P_j by Fourier inversion, or its Gaussian short-horizon limit when u is too small to invert."""
    spread = 1.0 + 2.0 * m.rho * m.xi * psi_slope + (m.xi * psi_slope) ** 2
    local = _horizon_quadrature(quad, v, u, spread)
    if local is None:
        return short_horizon_probability(j, s, v, u, k_eff, psi_slope, m, mkt)
    return probability_pj(j, s, v, u, k_eff, psi_slope, m, mkt, local, diagnostics)


def european_call_heston(
    s: float,
    v: float,
    tau: float,
    k: float,
    m: ModelParams,
    mkt: MarketParams,
    quad: QuadratureSpec,
    diagnostics: Optional[Diagnostics] = None,
) -> float:
    """s e^{-q tau} P_1 - k e^{-r tau} P_2 with psi = 0."""
    if not (s > 0 and k > 0 and tau > 0):
        raise ValueError(f"s, k and tau must be positive, got {s}, {k}, {tau}")
    p1 = exercise_probability(1, s, v, tau, k, 0.0, m, mkt, quad, diagnostics)
    p2 = exercise_probability(2, s, v, tau, k, 0.0, m, mkt, quad, diagnostics)
    return s * math.exp(-mkt.q * tau) * p1 - k * math.exp(-mkt.r * tau) * p2


def european_put_heston(
    s: float,
    v: float,
    tau: float,
    k: float,
    m: ModelParams,
    mkt: MarketParams,
    quad: QuadratureSpec,
    diagnostics: Optional[Diagnostics] = None,
) -> float:
    """European put from the call through put-call parity on the same P_j."""
    call = european_call_heston(s, v, tau, k, m, mkt, quad, diagnostics)
    return call - s * math.exp(-mkt.q * tau) + k * math.exp(-mkt.r * tau)


def endpoint_horizon(tau: float) -> float:
    """Horizon used in place of zero at the last node of the premium integral."""
    return max(1e-6, tau / 1e3)


def early_exercise_premium(
    s: float,
    v: float,
    tau: float,
    opt: OptionSpec,
    boundary: Optional[BoundaryCurve],
    m: ModelParams,
    mkt: MarketParams,
    quad: QuadratureSpec,
    diagnostics: Optional[Diagnostics] = None,
    tau_tolerance: float = 1e-8,
) -> float:
    """
    int_0^tau [q s e^{-q(tau-xi)} P_1 - r K e^{-r(tau-xi)} P_2](tau - xi; e^{b0(xi)}, -b1(xi)) dxi.

    The trapezoid runs over quad.n_time nodes (defaulting to the number of
    boundary knots). The node at xi = tau uses the horizon endpoint_horizon(tau).

    Args:
        boundary: Fitted curve, or None when no exercise region exists
        tau_tolerance: How far tau may exceed the last boundary knot; the last
            knot is held constant over that stretch

    Returns:
        Premium value; 0 with a diagnostic when boundary is None
    """
    if opt.kind != OptionKind.CALL:
        raise ValueError("The semi-analytic premium is only available for calls")
    if diagnostics is None:
        diagnostics = Diagnostics()
    if boundary is None:
        diagnostics.warn("No exercise boundary: premium set to 0 (European-equivalent)", logger)
        return 0.0
    if tau > boundary.max_tau + tau_tolerance:
        raise ValueError(f"tau={tau} lies beyond the boundary's last knot {boundary.max_tau}")
    if tau <= 0:
        return 0.0

    n_time = quad.resolved_n_time(len(boundary.taus))
    xis = np.linspace(0.0, tau, n_time)
    b0, b1 = boundary.coefficients_at(xis)

    values = np.empty(n_time)
    for i, xi in enumerate(xis):
        u = tau - xi
        k_eff = math.exp(float(b0[i]))
        slope = -float(b1[i])
        if i == n_time - 1:
            u = endpoint_horizon(tau)
            p1 = short_horizon_probability(1, s, v, u, k_eff, slope, m, mkt)
            p2 = short_horizon_probability(2, s, v, u, k_eff, slope, m, mkt)
        else:
            p1 = exercise_probability(1, s, v, u, k_eff, slope, m, mkt, quad, diagnostics) if mkt.q > 0 else 0.0
            p2 = exercise_probability(2, s, v, u, k_eff, slope, m, mkt, quad, diagnostics) if mkt.r > 0 else 0.0
        values[i] = (
            mkt.q * s * math.exp(-mkt.q * u) * p1
            - mkt.r * opt.strike * math.exp(-mkt.r * u) * p2
        )
        logger.debug(f"Premium node xi={xi:.5g}: K_eff={k_eff:.6g}, P1={p1:.6g}, P2={p2:.6g}")

    return float(trapezoid(values, xis))


def american_call(
    s: float,
    v: float,
    tau: float,
    opt: OptionSpec,
    boundary: Optional[BoundaryCurve],
    m: ModelParams,
    mkt: MarketParams,
    quad: QuadratureSpec,
    tau_tolerance: float = 1e-8,
) -> PriceResult:
    """
    European value plus early-exercise premium, floored at intrinsic.

    When the floor binds the premium is raised so the decomposition stays exact,
    and a diagnostic is recorded.
    """
    if opt.kind != OptionKind.CALL:
        raise ValueError("The semi-analytic price is only available for calls")
    diagnostics = Diagnostics()
    european = european_call_heston(s, v, tau, opt.strike, m, mkt, quad, diagnostics)
    premium = early_exercise_premium(s, v, tau, opt, boundary, m, mkt, quad, diagnostics, tau_tolerance)

    total = european + premium
    if premium < -PREMIUM_NOISE * max(abs(total), s * PREMIUM_NOISE):
        diagnostics.warn(f"Negative early-exercise premium {premium:.6g} exceeds quadrature noise", logger)

    intrinsic = max(s - opt.strike, 0.0)
    if total < intrinsic:
        diagnostics.warn(
            f"Price {total:.6g} below intrinsic {intrinsic:.6g}; floored (boundary or quadrature quality)",
            logger,
        )
        premium = intrinsic - european
        total = european + premium

    return PriceResult(
        price=total, european_part=european, premium_part=premium, diagnostics=tuple(diagnostics)
    )


def black_scholes_price(
    s: float,
    k: float,
    tau: float,
    sigma: float,
    mkt: MarketParams,
    kind: OptionKind = OptionKind.CALL,
) -> float:
    """Closed-form European price with continuous dividend yield."""
    if not (s > 0 and k > 0 and tau > 0 and sigma > 0):
        raise ValueError("s, k, tau and sigma must be positive")
    w = sigma * math.sqrt(tau)
    d1 = (math.log(s / k) + (mkt.r - mkt.q + 0.5 * sigma**2) * tau) / w
    d2 = d1 - w
    if kind == OptionKind.CALL:
        return s * math.exp(-mkt.q * tau) * norm.cdf(d1) - k * math.exp(-mkt.r * tau) * norm.cdf(d2)
    return k * math.exp(-mkt.r * tau) * norm.cdf(-d2) - s * math.exp(-mkt.q * tau) * norm.cdf(-d1)
