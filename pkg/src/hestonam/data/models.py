"""
Pydantic models for hestonam parameter validation.

Every symbol used by the simulation, regression and Fourier code is read from
these models. All of them are frozen, so a validated value can be shared
between worker threads without copying.
"""

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SEED_LIMIT = 2**64


class OptionKind(str, Enum):
    """Exercise right of the contract."""
    CALL = "call"
    PUT = "put"


class Measure(str, Enum):
    """Probability measure used to drive simulated paths."""
    RISK_NEUTRAL = "risk_neutral"
    PHYSICAL = "physical"


class OutputFormat(str, Enum):
    """Serialization of primary CLI output."""
    CSV = "csv"
    JSON = "json"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class ModelParams(_Frozen):
    """Heston dynamics: mean reversion, long-run variance, vol-of-vol, correlation."""

    model_config = ConfigDict(
        frozen=True, extra="forbid", allow_inf_nan=False, populate_by_name=True
    )

    kappa: float = Field(2.0, gt=0, description="mean-reversion rate (1/year)")
    theta: float = Field(0.04, gt=0, description="long-run variance")
    xi: float = Field(0.3, ge=0, description="volatility of variance")
    rho: float = Field(-0.5, ge=-1, le=1, description="price/variance correlation")
    v0: float = Field(0.04, ge=0, description="initial variance")
    lambda_: float = Field(0.0, alias="lambda", description="volatility risk premium")

    @property
    def alpha(self) -> float:
        return derived_coefficients(self)[0]

    @property
    def beta(self) -> float:
        return derived_coefficients(self)[1]


class MarketParams(_Frozen):
    """Rates and drift. Negative carry is rejected."""

    r: float = Field(0.05, ge=0, description="risk-free rate (1/year)")
    q: float = Field(0.0, ge=0, description="continuous dividend yield (1/year)")
    mu: float = Field(0.05, description="physical drift, used only under Measure.PHYSICAL")


class MarketConfig(MarketParams):
    """Market block of a run configuration; adds the spot price."""

    spot: float = Field(100.0, gt=0, description="current asset price S0")

    def params(self) -> MarketParams:
        return MarketParams(r=self.r, q=self.q, mu=self.mu)


class OptionSpec(_Frozen):
    """Strike, maturity and exercise right."""

    strike: float = Field(100.0, gt=0)
    maturity: float = Field(0.5, gt=0, description="years")
    kind: OptionKind = OptionKind.CALL

    @field_validator("kind", mode="before")
    @classmethod
    def normalize_kind(cls, v):
        """Accept 'Call', 'PUT' etc."""
        if isinstance(v, str):
            return v.strip().lower()
        return v

    def intrinsic(self, s):
        """Immediate exercise value, elementwise for arrays."""
        if self.kind == OptionKind.CALL:
            return np.maximum(s - self.strike, 0.0)
        return np.maximum(self.strike - s, 0.0)


class SimGrid(_Frozen):
    """Discretization of the Euler scheme."""

    n_paths: int = Field(..., ge=1)
    n_steps: int = Field(..., ge=1)
    maturity: float = Field(..., gt=0)
    seed: int = Field(0, ge=0, lt=SEED_LIMIT)

    @property
    def dt(self) -> float:
        return self.maturity / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.maturity, self.n_steps + 1)


class QuadratureSpec(_Frozen):
    """Trapezoid grids for the Fourier integral and the premium time integral."""

    phi_min: float = Field(1e-8, gt=0)
    phi_max: float = Field(100.0, gt=0)
    n_phi: int = Field(2000, ge=16)
    n_time: Optional[int] = Field(None, ge=4, description="defaults to the number of exercise dates")

    @model_validator(mode="after")
    def check_range(self) -> "QuadratureSpec":
        if not self.phi_min < self.phi_max:
            raise ValueError("phi_min must be smaller than phi_max")
        return self

    def resolved_n_time(self, fallback: int) -> int:
        """Time nodes to use when none were configured."""
        if self.n_time is not None:
            return self.n_time
        return max(4, int(fallback))


class SimSettings(_Frozen):
    """Simulation block of a run configuration."""

    n_paths: int = Field(100_000, ge=1)
    n_steps: int = Field(50, ge=1)
    seed: int = Field(2024, ge=0, lt=SEED_LIMIT)
    antithetic: bool = False
    workers: int = Field(1, ge=1, le=256)

    def grid(self, maturity: float) -> SimGrid:
        return SimGrid(
            n_paths=self.n_paths, n_steps=self.n_steps, maturity=maturity, seed=self.seed
        )


class OutputSettings(_Frozen):
    """Where and how primary results are written."""

    format: OutputFormat = OutputFormat.JSON
    path: Optional[Path] = None

    @field_validator("path")
    @classmethod
    def expand_path(cls, v: Optional[Path]) -> Optional[Path]:
        """Expand user paths."""
        if v is None:
            return v
        return Path(v).expanduser()


class RunConfig(_Frozen):
    """Complete validated configuration of one CLI run."""

    model: ModelParams = Field(default_factory=ModelParams)
    market: MarketConfig = Field(default_factory=MarketConfig)
    option: OptionSpec = Field(default_factory=OptionSpec)
    sim: SimSettings = Field(default_factory=SimSettings)
    quad: QuadratureSpec = Field(default_factory=QuadratureSpec)
    output: OutputSettings = Field(default_factory=OutputSettings)

    def params_hash(self) -> str:
        """Stable digest of everything that determines a fitted boundary."""
        payload = {
            "model": self.model.model_dump(mode="json", by_alias=True),
            "market": self.market.model_dump(mode="json"),
            "option": self.option.model_dump(mode="json"),
            "sim": self.sim.model_dump(mode="json", exclude={"workers"}),
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def with_overrides(self, **sections) -> "RunConfig":
        """Return a copy where the given blocks have selected fields replaced."""
        data = self.model_dump(by_alias=True)
        for section, updates in sections.items():
            data[section].update({k: v for k, v in updates.items() if v is not None})
        return RunConfig.model_validate(data)


def derived_coefficients(m: ModelParams) -> tuple[float, float]:
    """Return (alpha, beta) = (kappa * theta, kappa + lambda)."""
    return m.kappa * m.theta, m.kappa + m.lambda_


def check_feller(m: ModelParams) -> bool:
    """True iff 2 kappa theta >= xi^2; a violation is a warning, never an error."""
    return 2.0 * m.kappa * m.theta >= m.xi**2
