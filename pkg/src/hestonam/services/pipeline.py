"""
End-to-end pricing runs: simulate, value by LSM, fit the boundary, price
semi-analytically and compare against the tree oracle.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import pandas as pd

from ..core.binomial import binomial_american
from ..core.charfn import integrated_variance
from ..core.diagnostics import Diagnostics
from ..core.lsm import (
    BoundaryCurve,
    BoundaryPointCloud,
    LsmValuation,
    StabilityReport,
    extract_boundary,
    fit_boundary,
    lsm_backward_induction,
    lsm_stability,
)
from ..core.pricer import PriceResult, american_call, european_put_heston
from ..core.simulate import PathSet, simulate_paths
from ..data.models import Measure, OptionKind, RunConfig
from ..data.store import BoundaryStore
from ..exceptions import HestonAmError, NoExerciseRegionError, StoreError

logger = logging.getLogger(__name__)

DEFAULT_MATURITIES = (0.02, 0.08, 0.15)
DEFAULT_SPOTS = (80.0, 90.0, 100.0, 120.0)
DEFAULT_SWEEP = ((10_000, 10), (50_000, 10), (100_000, 10))
BENCH_COLUMNS = ["T", "S", "lsm_price", "lsm_stderr", "semi_analytic_price", "oracle_price", "abs_diff"]
PUT_NOTE = "semi-analytic: unavailable for puts; priced by LSM"
EUROPEAN_NOTE = "European-equivalent: no early-exercise region, premium is 0"


@dataclass
class BoundaryFit:
    """A fitted boundary together with the LSM run that produced it."""

    curve: BoundaryCurve
    clouds: list[BoundaryPointCloud]
    valuation: LsmValuation


@dataclass
class BenchRow:
    """One (maturity, spot) line of the comparison table."""

    T: float
    S: float
    lsm_price: Optional[float] = None
    lsm_stderr: Optional[float] = None
    semi_analytic_price: Optional[float] = None
    oracle_price: Optional[float] = None
    abs_diff: Optional[float] = None
    error: Optional[str] = None


class PricingPipeline:
    """Runs the pricing stages for one validated configuration."""

    def __init__(
        self,
        config: RunConfig,
        store: Optional[BoundaryStore] = None,
        status_callback: Optional[Callable[[str], None]] = None,
    ):
        self.config = config
        self.store = store
        self.status_callback = status_callback
        self.diagnostics = Diagnostics()

    def _status(self, message: str) -> None:
        logger.info(message)
        if self.status_callback:
            self.status_callback(message)

    def simulate(self, measure: Measure = Measure.RISK_NEUTRAL) -> PathSet:
        """Simulate paths for the configured contract."""
        cfg = self.config
        self._status(f"Simulating {cfg.sim.n_paths} paths x {cfg.sim.n_steps} steps")
        return simulate_paths(
            cfg.model,
            cfg.market.params(),
            cfg.market.spot,
            cfg.sim.grid(cfg.option.maturity),
            measure=measure,
            antithetic=cfg.sim.antithetic,
            workers=cfg.sim.workers,
            diagnostics=self.diagnostics,
        )

    def value(self, paths: PathSet) -> LsmValuation:
        cfg = self.config
        self._status("Running LSM backward induction")
        return lsm_backward_induction(
            paths, cfg.option, cfg.market.params(), cfg.model.theta, self.diagnostics
        )

    def fit(self, paths: PathSet, valuation: LsmValuation) -> BoundaryFit:
        """
        Extract and fit the exercise boundary from an LSM run.

        Raises:
            NoExerciseRegionError: If no date yields a bounded critical price
        """
        self._check_exercise_region()
        cfg = self.config
        self._status("Fitting the exercise boundary")
        clouds = extract_boundary(paths, valuation.fits, cfg.option, diagnostics=self.diagnostics)
        curve = fit_boundary(clouds, cfg.option, cfg.market.params(), cfg.params_hash())
        return BoundaryFit(curve=curve, clouds=clouds, valuation=valuation)

    def boundary(self) -> BoundaryFit:
        """Simulate, value and fit; store the result when a store is attached."""
        self._check_exercise_region()
        paths = self.simulate()
        result = self.fit(paths, self.value(paths))
        if self.store is not None:
            self._store_boundary(result.curve)
        return result

    def _store_boundary(self, curve: BoundaryCurve) -> None:
        try:
            self.store.put(curve)
        except StoreError as e:
            if not e.recoverable:
                raise
            self.diagnostics.warn(f"Boundary not cached: {e.message}", logger)

    def _check_exercise_region(self) -> None:
        cfg = self.config
        if cfg.option.kind == OptionKind.CALL and cfg.market.q == 0:
            raise NoExerciseRegionError(
                details="A call on an asset paying no dividends (q = 0) is never exercised early; "
                "price it as European",
            )

    def _cached_boundary(self) -> Optional[BoundaryCurve]:
        if self.store is None:
            return None
        curve = self.store.get(self.config.params_hash())
        if curve is not None:
            self._status(f"Reusing stored boundary {curve.params_hash}")
        return curve

    def price(self, boundary: Optional[BoundaryCurve] = None) -> PriceResult:
        """
        Price the configured contract.

        Calls use the semi-analytic formula with the given, stored or freshly
        fitted boundary. Puts are priced by LSM; their European part comes from
        put-call parity.
        """
        cfg = self.config
        mkt = cfg.market.params()
        opt = cfg.option
        s, v, tau = cfg.market.spot, cfg.model.v0, opt.maturity

        if opt.kind == OptionKind.PUT:
            paths = self.simulate()
            valuation = self.value(paths)
            european = european_put_heston(s, v, tau, opt.strike, cfg.model, mkt, cfg.quad, self.diagnostics)
            self.diagnostics.warn(PUT_NOTE, logger)
            return PriceResult(
                price=valuation.price,
                european_part=european,
                premium_part=valuation.price - european,
                diagnostics=tuple(self.diagnostics.messages),
            )

        if boundary is not None:
            if not math.isclose(boundary.strike, opt.strike):
                self.diagnostics.warn(
                    f"Boundary was fitted for strike {boundary.strike:g}, pricing strike {opt.strike:g}", logger
                )
        else:
            boundary = self._cached_boundary()
        if boundary is None:
            try:
                boundary = self.boundary().curve
            except NoExerciseRegionError:
                self.diagnostics.warn(EUROPEAN_NOTE, logger)

        self._status("Evaluating the semi-analytic price")
        result = american_call(
            s, v, tau, opt, boundary, cfg.model, mkt, cfg.quad, tau_tolerance=self._tau_tolerance(boundary)
        )
        self.diagnostics.extend(result.diagnostics)
        return replace(result, diagnostics=tuple(self.diagnostics.messages))

    def _tau_tolerance(self, boundary: Optional[BoundaryCurve]) -> float:
        # The latest exercise date is one step after the valuation date.
        step = self.config.option.maturity / self.config.sim.n_steps * (1.0 + 1e-9)
        if boundary is None:
            return step
        gap = self.config.option.maturity - boundary.max_tau
        if gap > step:
            self.diagnostics.warn(
                f"Boundary knots end at tau={boundary.max_tau:.6g}; "
                f"held constant up to tau={self.config.option.maturity:g}",
                logger,
            )
        return max(step, gap * (1.0 + 1e-9))

    def oracle_price(self) -> Optional[float]:
        """Tree price with the deterministic-variance volatility; only when xi == 0."""
        cfg = self.config
        if cfg.model.xi != 0.0:
            return None
        w = integrated_variance(cfg.model.v0, cfg.option.maturity, cfg.model)
        if not w > 0:
            return None
        sigma = math.sqrt(w / cfg.option.maturity)
        return binomial_american(cfg.market.spot, sigma, cfg.option, cfg.market.params())

    def bench_row(self) -> BenchRow:
        """LSM, semi-analytic and oracle prices for the configured (T, S)."""
        cfg = self.config
        row = BenchRow(T=cfg.option.maturity, S=cfg.market.spot)
        try:
            paths = self.simulate()
            valuation = self.value(paths)
            row.lsm_price, row.lsm_stderr = valuation.price, valuation.stderr
            if cfg.option.kind == OptionKind.CALL:
                boundary = self._cached_boundary()
                if boundary is None:
                    try:
                        boundary = self.fit(paths, valuation).curve
                    except NoExerciseRegionError:
                        self.diagnostics.warn(EUROPEAN_NOTE, logger)
                result = american_call(
                    cfg.market.spot, cfg.model.v0, cfg.option.maturity, cfg.option, boundary,
                    cfg.model, cfg.market.params(), cfg.quad, tau_tolerance=self._tau_tolerance(boundary),
                )
                self.diagnostics.extend(result.diagnostics)
                row.semi_analytic_price = result.price
                row.abs_diff = abs(row.lsm_price - row.semi_analytic_price)
            row.oracle_price = self.oracle_price()
        except (HestonAmError, ValueError) as e:
            message = e.message if isinstance(e, HestonAmError) else str(e)
            logger.error(f"Benchmark row T={row.T}, S={row.S} failed: {message}")
            row = BenchRow(T=row.T, S=row.S, error=message)
        return row


def run_benchmark(
    config: RunConfig,
    maturities: Sequence[float] = DEFAULT_MATURITIES,
    spots: Sequence[float] = DEFAULT_SPOTS,
    store: Optional[BoundaryStore] = None,
    status_callback: Optional[Callable[[str], None]] = None,
) -> tuple[list[BenchRow], list[str]]:
    """
    One BenchRow per (maturity, spot); failed rows carry their error and the run continues.

    Returns:
        Rows in maturity-major order and the collected warnings
    """
    rows = []
    diagnostics = Diagnostics()
    for maturity in maturities:
        for spot in spots:
            cfg = config.with_overrides(option={"maturity": maturity}, market={"spot": spot})
            pipeline = PricingPipeline(cfg, store=store, status_callback=status_callback)
            rows.append(pipeline.bench_row())
            diagnostics.extend(f"T={maturity:g}, S={spot:g}: {m}" for m in pipeline.diagnostics)
    return rows, diagnostics.messages


def run_stability(
    config: RunConfig,
    sweep: Sequence[tuple[int, int]] = DEFAULT_SWEEP,
) -> StabilityReport:
    """LSM price stability of the configured contract across path/step counts."""
    return lsm_stability(
        config.model,
        config.market.params(),
        config.market.spot,
        config.option,
        sweep,
        seed=config.sim.seed,
        antithetic=config.sim.antithetic,
        workers=config.sim.workers,
    )


def bench_frame(rows: Sequence[BenchRow]) -> pd.DataFrame:
    """Benchmark table; an error column is appended only when a row failed."""
    frame = pd.DataFrame(
        [[getattr(row, column) for column in BENCH_COLUMNS] for row in rows],
        columns=BENCH_COLUMNS,
        dtype=float,
    )
    if any(row.error for row in rows):
        frame["error"] = [row.error or "" for row in rows]
    return frame


def cloud_frame(clouds: Sequence[BoundaryPointCloud]) -> pd.DataFrame:
    """Point cloud table with columns step, tau, v_level, critical_price ('unbounded' when none)."""
    records = []
    for cloud in sorted(clouds, key=lambda c: c.step_index):
        for level, s_star in cloud.points:
            records.append((cloud.step_index, f"{cloud.tau:.10g}", f"{level:.10g}", f"{s_star:.10g}"))
        for level in cloud.unbounded_levels:
            records.append((cloud.step_index, f"{cloud.tau:.10g}", f"{level:.10g}", "unbounded"))
    return pd.DataFrame(records, columns=["step", "tau", "v_level", "critical_price"])
