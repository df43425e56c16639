"""
Euler-scheme simulation of correlated Heston price and variance paths.

Each path draws its shocks from its own counter-based Philox substream, keyed
by the run seed and offset by the path index, so a path's trajectory never
depends on how paths are split between workers.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np
import pandas as pd

from ..data.models import MarketParams, Measure, ModelParams, OptionSpec, SimGrid, check_feller
from ..exceptions import PathBlowUpError
from .diagnostics import Diagnostics

logger = logging.getLogger(__name__)

# Paths per work unit; even so antithetic pairs never straddle two blocks.
BLOCK_SIZE = 4096
PATH_DUMP_MAX_CELLS = 1_000_000


@dataclass(frozen=True)
class PathSet:
    """Simulated trajectories on a uniform grid; arrays are read-only."""

    times: np.ndarray
    prices: np.ndarray
    variances: np.ndarray
    measure: Measure

    @property
    def n_paths(self) -> int:
        return self.prices.shape[0]

    @property
    def n_steps(self) -> int:
        return self.prices.shape[1] - 1

    @property
    def maturity(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return self.maturity / self.n_steps


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Philox generator for one path: key = seed, counter block = path index."""
    return np.random.Generator(np.random.Philox(key=seed, counter=path_index << 128))


def path_normals(seed: int, path_index: int, n_steps: int) -> np.ndarray:
    """Standard-normal pairs (dW1/sqrt(dt), dW2/sqrt(dt)) for every step of one path."""
    return path_generator(seed, path_index).standard_normal((n_steps, 2))


def gaussian_pair_stream(seed: int, path_index: int, chunk: int = 1024) -> Iterator[tuple[float, float]]:
    """
    Endless stream of independent standard-normal pairs for one path.

    The first n pairs equal ``path_normals(seed, path_index, n)``; consumers
    scale them by sqrt(dt).
    """
    rng = path_generator(seed, path_index)
    while True:
        for z1, z2 in rng.standard_normal((chunk, 2)):
            yield float(z1), float(z2)


def _block_normals(seed: int, start: int, stop: int, n_steps: int, antithetic: bool) -> np.ndarray:
    z = np.empty((stop - start, n_steps, 2))
    for i in range(start, stop):
        if antithetic and i % 2 == 1:
            z[i - start] = -z[i - start - 1]
        else:
            z[i - start] = path_normals(seed, i, n_steps)
    return z


def _simulate_block(
    m: ModelParams,
    mkt: MarketParams,
    s0: float,
    grid: SimGrid,
    measure: Measure,
    antithetic: bool,
    start: int,
    stop: int,
) -> tuple[np.ndarray, np.ndarray]:
    n_steps = grid.n_steps
    dt = grid.dt
    sqdt = math.sqrt(dt)
    z = _block_normals(grid.seed, start, stop, n_steps, antithetic)

    if measure == Measure.RISK_NEUTRAL:
        price_drift = mkt.r - mkt.q
        var_level, var_speed = m.alpha, m.beta
    else:
        price_drift = mkt.mu
        var_level, var_speed = m.kappa * m.theta, m.kappa
    rho_perp = math.sqrt(max(1.0 - m.rho**2, 0.0))

    prices = np.empty((stop - start, n_steps + 1))
    variances = np.empty((stop - start, n_steps + 1))
    prices[:, 0] = s0
    variances[:, 0] = m.v0

    s = prices[:, 0].copy()
    v = variances[:, 0].copy()
    for n in range(n_steps):
        sv = np.sqrt(v)
        dw1 = z[:, n, 0] * sqdt
        dw2 = z[:, n, 1] * sqdt
        s_next = s + price_drift * s * dt + sv * s * dw1
        v_next = v + (var_level - var_speed * v) * dt + m.xi * sv * (m.rho * dw1 + rho_perp * dw2)
        s = s_next
        # Full truncation: only max(V, 0) is stored and fed back.
        v = np.maximum(v_next, 0.0)
        prices[:, n + 1] = s
        variances[:, n + 1] = v

    return prices, variances


def _check_prices(prices: np.ndarray, offset: int) -> None:
    bad = ~(np.isfinite(prices) & (prices > 0))
    if bad.any():
        row, step = np.argwhere(bad)[0]
        raise PathBlowUpError(int(row) + offset, int(step), float(prices[row, step]))


def simulate_paths(
    m: ModelParams,
    mkt: MarketParams,
    s0: float,
    grid: SimGrid,
    measure: Measure = Measure.RISK_NEUTRAL,
    antithetic: bool = False,
    workers: int = 1,
    diagnostics: Optional[Diagnostics] = None,
) -> PathSet:
    """
    Simulate Heston paths with the two-line Euler recursion in price levels.

    Under RISK_NEUTRAL the price drifts at r - q and the variance at
    alpha - beta V; under PHYSICAL at mu and kappa (theta - V).

    Args:
        m: Heston parameters
        mkt: Rates, dividend yield and physical drift
        s0: Initial price
        grid: Paths, steps, maturity and seed
        measure: Drift convention
        antithetic: Odd paths reuse the negated shocks of the preceding even path
        workers: Thread count; the result does not depend on it
        diagnostics: Optional collector for the Feller warning

    Returns:
        Immutable PathSet

    Raises:
        PathBlowUpError: If a price becomes non-finite or non-positive
    """
    if not s0 > 0:
        raise ValueError(f"s0 must be positive, got {s0}")
    if not check_feller(m):
        message = (
            f"Feller condition violated (2*kappa*theta={2 * m.kappa * m.theta:.6g} < "
            f"xi^2={m.xi**2:.6g}); variance truncation is active"
        )
        if diagnostics is not None:
            diagnostics.warn(message, logger)
        else:
            logger.warning(message)

    blocks = [(start, min(start + BLOCK_SIZE, grid.n_paths)) for start in range(0, grid.n_paths, BLOCK_SIZE)]
    logger.debug(
        f"Simulating {grid.n_paths} paths x {grid.n_steps} steps in {len(blocks)} blocks "
        f"on {workers} worker(s)"
    )

    prices = np.empty((grid.n_paths, grid.n_steps + 1))
    variances = np.empty((grid.n_paths, grid.n_steps + 1))

    def run(block):
        start, stop = block
        return _simulate_block(m, mkt, s0, grid, measure, antithetic, start, stop)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(block) for block in blocks]

    for (start, stop), (block_prices, block_variances) in zip(blocks, results):
        _check_prices(block_prices, start)
        prices[start:stop] = block_prices
        variances[start:stop] = block_variances

    times = grid.times()
    for array in (times, prices, variances):
        array.setflags(write=False)
    return PathSet(times=times, prices=prices, variances=variances, measure=measure)


def european_mc(paths: PathSet, opt: OptionSpec, mkt: MarketParams) -> tuple[float, float]:
    """Discounted terminal payoff estimate and its standard error."""
    discounted = math.exp(-mkt.r * paths.maturity) * opt.intrinsic(paths.prices[:, -1])
    stderr = float(discounted.std(ddof=1) / math.sqrt(paths.n_paths)) if paths.n_paths > 1 else 0.0
    return float(discounted.mean()), stderr


def paths_frame(paths: PathSet) -> pd.DataFrame:
    """Long-format table with columns path, step, time, S, V."""
    n_paths, n_cols = paths.prices.shape
    return pd.DataFrame({
        "path": np.repeat(np.arange(n_paths), n_cols),
        "step": np.tile(np.arange(n_cols), n_paths),
        "time": np.tile(paths.times, n_paths),
        "S": paths.prices.ravel(),
        "V": paths.variances.ravel(),
    })


def dump_paths_csv(
    paths: PathSet,
    destination: Union[str, Path],
    max_cells: int = PATH_DUMP_MAX_CELLS,
) -> Path:
    """
    Write every simulated point to CSV.

    Raises:
        ValueError: If n_paths * (n_steps + 1) exceeds max_cells
    """
    cells = paths.prices.size
    if cells > max_cells:
        raise ValueError(
            f"Path dump of {cells} points exceeds the limit of {max_cells}; "
            "reduce sim.n_paths or sim.n_steps"
        )
    destination = Path(destination).expanduser()
    destination.parent.mkdir(parents=True, exist_ok=True)
    paths_frame(paths).to_csv(destination, index=False, float_format="%.10g")
    logger.info(f"Wrote {cells} path points to {destination}")
    return destination
