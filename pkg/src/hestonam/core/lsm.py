"""
Least-squares Monte Carlo valuation and early-exercise boundary extraction.

Backward induction regresses discounted realized cashflows of in-the-money
paths on a four-term Laguerre basis. The fitted continuation surfaces are then
inverted per variance level to find critical prices, and ln(critical price)
is fitted linearly in variance at every exercise date.
"""

import json
import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.laguerre import lagval
from scipy.optimize import bisect

from ..data.models import MarketParams, Measure, ModelParams, OptionKind, OptionSpec, SimGrid
from ..exceptions import NoExerciseRegionError, RegressionError
from .diagnostics import Diagnostics
from .simulate import PathSet, simulate_paths

logger = logging.getLogger(__name__)

N_BASIS = 4
RIDGE_CONDITION = 1e12
RIDGE = 1e-10
SEARCH_OFFSET = 1e-6
SEARCH_RTOL = 1e-8
N_SEEDS = 64
DECILES = 10
MIN_ITM_PER_LEVEL = 100

_L1 = (0.0, 1.0)
_L2 = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class RegressionFit:
    """Continuation-value regression at one exercise date."""

    step_index: int
    coefficients: tuple[float, ...]
    n_samples: int
    condition_diag: float
    strike: float
    theta: float
    degenerate: bool = False

    def continuation(self, s, v):
        """Fitted discounted continuation value at (s, v)."""
        return basis_eval(s, v, self.strike, self.theta) @ np.asarray(self.coefficients)


@dataclass(frozen=True)
class LsmValuation:
    """Price, standard error and the per-path exercise policy."""

    price: float
    stderr: float
    fits: tuple[RegressionFit, ...]
    exercise_step: np.ndarray
    cashflow: np.ndarray

    def usable_fits(self) -> list[RegressionFit]:
        return [fit for fit in self.fits if not fit.degenerate]


@dataclass(frozen=True)
class BoundaryPointCloud:
    """Critical prices found at one exercise date."""

    step_index: int
    tau: float
    points: tuple[tuple[float, float], ...] = ()
    unbounded_levels: tuple[float, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.points


@dataclass(frozen=True)
class BoundaryCurve:
    """ln b(V, tau) = b0(tau) + V b1(tau), knots interpolated linearly in tau."""

    taus: tuple[float, ...]
    b0: tuple[float, ...]
    b1: tuple[float, ...]
    strike: float
    kind: OptionKind = OptionKind.CALL
    params_hash: str = ""

    def __post_init__(self):
        if not len(self.taus) == len(self.b0) == len(self.b1):
            raise ValueError("taus, b0 and b1 must have equal lengths")
        if not self.taus:
            raise ValueError("a boundary needs at least one knot")
        if np.any(np.diff(self.taus) <= 0):
            raise ValueError("taus must be strictly increasing")

    @property
    def max_tau(self) -> float:
        return self.taus[-1]

    def coefficients_at(self, tau):
        """(b0, b1) at tau; constant beyond the first and last knots."""
        return np.interp(tau, self.taus, self.b0), np.interp(tau, self.taus, self.b1)

    def evaluate(self, v, tau):
        """Critical price b(V, tau)."""
        b0, b1 = self.coefficients_at(tau)
        return np.exp(b0 + np.asarray(v) * b1)

    def to_dict(self) -> dict:
        return {
            "taus": [float(t) for t in self.taus],
            "b0": [float(b) for b in self.b0],
            "b1": [float(b) for b in self.b1],
            "strike": float(self.strike),
            "kind": self.kind.value,
            "params_hash": self.params_hash,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "BoundaryCurve":
        return cls(
            taus=tuple(float(t) for t in data["taus"]),
            b0=tuple(float(b) for b in data["b0"]),
            b1=tuple(float(b) for b in data["b1"]),
            strike=float(data["strike"]),
            kind=OptionKind(str(data.get("kind", "call")).lower()),
            params_hash=str(data.get("params_hash", "")),
        )

    @classmethod
    def from_json(cls, text: str) -> "BoundaryCurve":
        return cls.from_dict(json.loads(text))


def basis_eval(s, v, strike: float, theta: float) -> np.ndarray:
    """
    Regression basis [1, L1(s/K), L2(s/K), L1((s/K)(v/theta))].

    Works elementwise; the basis index is the last axis.
    """
    x = np.asarray(s, dtype=float) / strike
    y = np.asarray(v, dtype=float) / theta
    return np.stack(
        [np.ones_like(x * y), lagval(x, _L1) + 0.0 * y, lagval(x, _L2) + 0.0 * y, lagval(x * y, _L1)],
        axis=-1,
    )


def fit_continuation(
    s: np.ndarray,
    v: np.ndarray,
    target: np.ndarray,
    strike: float,
    theta: float,
    step_index: int,
) -> RegressionFit:
    """
    Solve the normal equations of the basis regression.

    A ridge of RIDGE times the mean diagonal is added when the condition
    estimate exceeds RIDGE_CONDITION. Too few samples or a singular system
    give a fit flagged degenerate.
    """
    n = len(target)
    if n < N_BASIS:
        return RegressionFit(step_index, (0.0,) * N_BASIS, n, math.inf, strike, theta, degenerate=True)

    x = basis_eval(s, v, strike, theta)
    gram = x.T @ x
    rhs = x.T @ target
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > RIDGE_CONDITION:
        gram = gram + RIDGE * float(np.trace(gram)) / N_BASIS * np.eye(N_BASIS)
    try:
        coefficients = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        return RegressionFit(step_index, (0.0,) * N_BASIS, n, cond, strike, theta, degenerate=True)
    if not np.all(np.isfinite(coefficients)):
        return RegressionFit(step_index, (0.0,) * N_BASIS, n, cond, strike, theta, degenerate=True)
    return RegressionFit(step_index, tuple(float(c) for c in coefficients), n, cond, strike, theta)


def lsm_backward_induction(
    paths: PathSet,
    opt: OptionSpec,
    mkt: MarketParams,
    theta: float,
    diagnostics: Optional[Diagnostics] = None,
) -> LsmValuation:
    """
    Longstaff-Schwartz valuation on risk-neutral paths.

    Every path holds one cashflow: the payoff at maturity, replaced by the
    intrinsic value at the earliest date where intrinsic exceeds the fitted
    continuation. Exercise is considered at t_1 ... t_{N-1}; never at t_0.

    Args:
        paths: Risk-neutral PathSet
        opt: Contract
        mkt: Rates (discounting at r)
        theta: Long-run variance used to scale the variance basis term

    Returns:
        LsmValuation

    Raises:
        RegressionError: If every date with in-the-money paths is degenerate
    """
    if paths.measure != Measure.RISK_NEUTRAL:
        raise ValueError("LSM pricing requires risk-neutral paths")

    n_steps = paths.n_steps
    dt = paths.dt
    prices = paths.prices
    variances = paths.variances

    cashflow = opt.intrinsic(prices[:, -1]).astype(float)
    exercise_step = np.full(paths.n_paths, n_steps, dtype=np.int64)

    fits = []
    active_dates = 0
    for k in range(n_steps - 1, 0, -1):
        intrinsic = opt.intrinsic(prices[:, k])
        itm = np.flatnonzero(intrinsic > 0)
        if itm.size:
            active_dates += 1
        target = cashflow[itm] * np.exp(-mkt.r * (exercise_step[itm] - k) * dt)
        fit = fit_continuation(prices[itm, k], variances[itm, k], target, opt.strike, theta, k)
        fits.append(fit)
        if fit.degenerate:
            if itm.size and diagnostics is not None:
                diagnostics.warn(
                    f"Degenerate continuation regression at step {k} ({fit.n_samples} in-the-money paths)",
                    logger,
                )
            continue

        continuation = fit.continuation(prices[itm, k], variances[itm, k])
        exercise = itm[intrinsic[itm] > continuation]
        cashflow[exercise] = intrinsic[exercise]
        exercise_step[exercise] = k
        logger.debug(f"Step {k}: {itm.size} ITM paths, {exercise.size} exercised, cond={fit.condition_diag:.3g}")

    if active_dates and all(fit.degenerate for fit in fits if fit.n_samples > 0):
        raise RegressionError(
            "Every exercise date produced a degenerate regression",
            details=f"{active_dates} dates had in-the-money paths; increase sim.n_paths",
        )

    discounted = cashflow * np.exp(-mkt.r * exercise_step * dt)
    price = float(discounted.mean())
    stderr = float(discounted.std(ddof=1) / math.sqrt(paths.n_paths)) if paths.n_paths > 1 else 0.0
    fits.sort(key=lambda fit: fit.step_index)
    for array in (exercise_step, discounted):
        array.setflags(write=False)
    return LsmValuation(price, stderr, tuple(fits), exercise_step, discounted)


def _search_interval(opt: OptionSpec, cap: float) -> tuple[float, float]:
    if opt.kind == OptionKind.CALL:
        if not cap > opt.strike:
            raise ValueError(f"call search cap must exceed the strike, got {cap}")
        return opt.strike * (1.0 + SEARCH_OFFSET), cap
    if not 0 < cap < opt.strike:
        raise ValueError(f"put search cap must lie in (0, strike), got {cap}")
    return opt.strike * (1.0 - SEARCH_OFFSET), cap


def critical_price(fit: RegressionFit, v_level: float, opt: OptionSpec, cap: float) -> Optional[float]:
    """
    Exercise threshold at variance v_level, or None when unbounded.

    For a call this is the smallest s in [K(1+1e-6), cap] with
    intrinsic(s) >= continuation(s, v); for a put the largest s in
    [cap, K(1-1e-6)]. The nearest sign change among 64 equispaced seeds is
    refined by bisection to a relative tolerance of 1e-8.
    """
    if fit.degenerate:
        raise ValueError(f"fit at step {fit.step_index} is degenerate")
    near, far = _search_interval(opt, cap)

    def gap(s: float) -> float:
        return float(opt.intrinsic(s) - fit.continuation(s, v_level))

    if gap(near) >= 0:
        return near
    seeds = np.linspace(near, far, N_SEEDS)
    gaps = np.asarray(opt.intrinsic(seeds)) - fit.continuation(seeds, np.full_like(seeds, v_level))
    hits = np.flatnonzero(gaps >= 0)
    if not hits.size:
        return None
    i = int(hits[0])
    if i == 0 or gaps[i] == 0:
        return float(seeds[i])
    lo, hi = sorted((float(seeds[i - 1]), float(seeds[i])))
    return float(bisect(gap, lo, hi, xtol=1e-14 * opt.strike, rtol=SEARCH_RTOL))


def variance_levels(variances: np.ndarray, itm_variances: np.ndarray) -> list[float]:
    """
    Decile midpoints of the simulated variance that are backed by at least
    MIN_ITM_PER_LEVEL in-the-money paths, without duplicates.
    """
    edges = np.quantile(variances, np.linspace(0.0, 1.0, DECILES + 1))
    mids = np.quantile(variances, (np.arange(DECILES) + 0.5) / DECILES)
    bins = np.searchsorted(edges[1:-1], itm_variances, side="right")
    counts = np.bincount(bins, minlength=DECILES)
    levels = []
    for level, count in zip(mids, counts):
        level = max(float(level), 0.0)
        if count >= MIN_ITM_PER_LEVEL and level not in levels:
            levels.append(level)
    return levels


def extract_boundary(
    paths: PathSet,
    fits: Sequence[RegressionFit],
    opt: OptionSpec,
    cap: Optional[float] = None,
    diagnostics: Optional[Diagnostics] = None,
) -> list[BoundaryPointCloud]:
    """
    Critical prices per exercise date and variance decile.

    The search cap defaults to the largest (call) or smallest (put) simulated
    price at that date. A date keeps its points only if at least two levels,
    or its single distinct level, are bounded.
    """
    clouds = []
    for fit in fits:
        k = fit.step_index
        tau = paths.maturity - float(paths.times[k])
        if fit.degenerate:
            clouds.append(BoundaryPointCloud(k, tau))
            continue

        s_k = paths.prices[:, k]
        v_k = paths.variances[:, k]
        itm = opt.intrinsic(s_k) > 0
        levels = variance_levels(v_k, v_k[itm])
        if opt.kind == OptionKind.CALL:
            date_cap = float(s_k.max()) if cap is None else cap
            no_room = date_cap <= opt.strike * (1.0 + SEARCH_OFFSET)
        else:
            date_cap = float(s_k.min()) if cap is None else cap
            no_room = date_cap >= opt.strike * (1.0 - SEARCH_OFFSET)

        points, unbounded = [], []
        for level in levels:
            s_star = None if no_room else critical_price(fit, level, opt, date_cap)
            if s_star is None:
                unbounded.append(level)
            else:
                points.append((level, s_star))

        if not points or len(points) < min(2, len(levels)):
            points = []
        clouds.append(BoundaryPointCloud(k, tau, tuple(points), tuple(unbounded)))

    n_unbounded = sum(len(c.unbounded_levels) for c in clouds)
    if n_unbounded and diagnostics is not None:
        diagnostics.warn(f"{n_unbounded} variance levels have no critical price below the search cap", logger)
    return clouds


def _anchor(opt: OptionSpec, mkt: MarketParams) -> Optional[float]:
    """b(V, 0+) for the contract, or None when the limit is not finite."""
    if opt.kind == OptionKind.CALL:
        if mkt.q > 0:
            return max(opt.strike, mkt.r / mkt.q * opt.strike)
        return None
    if mkt.q == 0:
        return opt.strike
    if mkt.r > 0:
        return opt.strike * min(1.0, mkt.r / mkt.q)
    return None


def fit_boundary(
    clouds: Sequence[BoundaryPointCloud],
    opt: OptionSpec,
    mkt: MarketParams,
    params_hash: str = "",
) -> BoundaryCurve:
    """
    Least-squares fit of ln b = b0 + V b1 at every non-empty date.

    A date with one distinct level gets b1 = 0. The tau = 0 knot carries the
    analytic expiry limit with b1 = 0, or copies the nearest fitted knot when
    that limit is infinite.

    Raises:
        NoExerciseRegionError: If every cloud is empty
    """
    knots = []
    for cloud in sorted(clouds, key=lambda c: c.tau):
        if cloud.empty or cloud.tau <= 0:
            continue
        v = np.array([p[0] for p in cloud.points])
        y = np.log([p[1] for p in cloud.points])
        if np.unique(v).size == 1:
            b0, b1 = float(y.mean()), 0.0
        else:
            design = np.column_stack([np.ones_like(v), v])
            (b0, b1), *_ = np.linalg.lstsq(design, y, rcond=None)
        knots.append((cloud.tau, float(b0), float(b1)))

    if not knots:
        raise NoExerciseRegionError()

    anchor = _anchor(opt, mkt)
    if anchor is None:
        knots.insert(0, (0.0, knots[0][1], knots[0][2]))
    else:
        knots.insert(0, (0.0, math.log(anchor), 0.0))

    taus, b0, b1 = zip(*knots)
    logger.info(f"Fitted boundary with {len(knots)} knots up to tau={taus[-1]:.4g}")
    return BoundaryCurve(taus=taus, b0=b0, b1=b1, strike=opt.strike, kind=opt.kind, params_hash=params_hash)


@dataclass(frozen=True)
class StabilityEntry:
    n_paths: int
    n_steps: int
    price: float
    stderr: float

    @property
    def label(self) -> str:
        """Sample size as thousands of paths over time steps, e.g. 10/10."""
        return f"{self.n_paths / 1000:g}/{self.n_steps}"


@dataclass(frozen=True)
class StabilityReport:
    """LSM prices across discretizations and their pairwise agreement."""

    entries: tuple[StabilityEntry, ...]
    agreement: tuple[tuple[int, int, bool], ...]

    @property
    def consistent(self) -> bool:
        return all(ok for _, _, ok in self.agreement)


def lsm_stability(
    m: ModelParams,
    mkt: MarketParams,
    s0: float,
    opt: OptionSpec,
    configs: Sequence[tuple[int, int]],
    seed: int,
    antithetic: bool = False,
    workers: int = 1,
    n_sigma: float = 3.0,
) -> StabilityReport:
    """
    Price the same contract on several (n_paths, n_steps) grids.

    Two entries agree when their prices differ by at most n_sigma combined
    standard errors.
    """
    entries = []
    for n_paths, n_steps in configs:
        grid = SimGrid(n_paths=n_paths, n_steps=n_steps, maturity=opt.maturity, seed=seed)
        paths = simulate_paths(m, mkt, s0, grid, antithetic=antithetic, workers=workers)
        valuation = lsm_backward_induction(paths, opt, mkt, m.theta)
        entries.append(StabilityEntry(n_paths, n_steps, valuation.price, valuation.stderr))
        logger.info(f"LSM {n_paths}x{n_steps}: {valuation.price:.6f} +/- {valuation.stderr:.6f}")

    agreement = []
    for i, j in combinations(range(len(entries)), 2):
        a, b = entries[i], entries[j]
        ok = abs(a.price - b.price) <= n_sigma * math.hypot(a.stderr, b.stderr)
        agreement.append((i, j, ok))
    return StabilityReport(tuple(entries), tuple(agreement))
