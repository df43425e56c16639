"""
Cox-Ross-Rubinstein tree for constant-volatility American and European options.
"""

import logging
import math

import numpy as np

from ..data.models import MarketParams, OptionSpec

logger = logging.getLogger(__name__)

MIN_LEVELS = 100


def _tree_factors(sigma: float, dt: float, carry: float) -> tuple[float, float, float]:
    """(up, down, p); re-centred on the forward when the CRR probability leaves [0, 1]."""
    up = math.exp(sigma * math.sqrt(dt))
    down = 1.0 / up
    growth = math.exp(carry * dt)
    p = (growth - down) / (up - down)
    if 0.0 <= p <= 1.0:
        return up, down, p

    logger.debug(f"CRR probability {p:.6g} outside [0, 1]; centring the tree on the forward")
    up = math.exp(carry * dt + sigma * math.sqrt(dt))
    down = math.exp(carry * dt - sigma * math.sqrt(dt))
    p = (growth - down) / (up - down)
    return up, down, p


def binomial_american(
    s: float,
    sigma: float,
    opt: OptionSpec,
    mkt: MarketParams,
    n_levels: int = 2000,
    american: bool = True,
) -> float:
    """
    Backward induction on a recombining tree with continuous dividend yield.

    Args:
        s: Spot price
        sigma: Constant volatility
        opt: Contract (call or put)
        mkt: Rates and dividend yield
        n_levels: Time steps in the tree
        american: Apply the exercise max at every node; False gives the European price

    Returns:
        Option value at the root
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if n_levels < MIN_LEVELS:
        raise ValueError(f"n_levels must be at least {MIN_LEVELS}, got {n_levels}")

    dt = opt.maturity / n_levels
    up, down, p = _tree_factors(sigma, dt, mkt.r - mkt.q)
    discount = math.exp(-mkt.r * dt)
    log_up, log_down = math.log(up), math.log(down)

    def node_prices(level: int) -> np.ndarray:
        j = np.arange(level + 1)
        return s * np.exp(j * log_up + (level - j) * log_down)

    values = opt.intrinsic(node_prices(n_levels))
    for level in range(n_levels - 1, -1, -1):
        values = discount * (p * values[1:] + (1.0 - p) * values[:-1])
        if american:
            values = np.maximum(values, opt.intrinsic(node_prices(level)))
    return float(values[0])
