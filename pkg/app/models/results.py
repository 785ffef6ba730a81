import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.params import SimConfig, SystemParams

Z_95 = 1.96


class CoverageEstimate(BaseModel):
    """Monte Carlo estimate of a probability or a mean count."""
    model_config = ConfigDict(frozen=True)

    estimate: float
    trials: int = Field(ge=1)
    stderr: float = Field(ge=0)
    half_width: float = Field(ge=0)

    @classmethod
    def from_bernoulli(cls, outcomes) -> "CoverageEstimate":
        outcomes = np.asarray(outcomes, dtype=bool)
        trials = int(outcomes.size)
        p = float(outcomes.mean())
        stderr = math.sqrt(p * (1.0 - p) / trials)
        return cls(estimate=p, trials=trials, stderr=stderr, half_width=Z_95 * stderr)

    @classmethod
    def from_samples(cls, values) -> "CoverageEstimate":
        values = np.asarray(values, dtype=float)
        trials = int(values.size)
        stderr = float(values.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
        return cls(estimate=float(values.mean()), trials=trials, stderr=stderr, half_width=Z_95 * stderr)

    @classmethod
    def from_ratio(cls, numerator, denominator) -> "CoverageEstimate":
        """Conditional frequency P(A | B) from paired Bernoulli outcomes."""
        numerator = np.asarray(numerator, dtype=bool)
        denominator = np.asarray(denominator, dtype=bool)
        hits = int(denominator.sum())
        if hits == 0:
            return cls(estimate=0.0, trials=max(1, numerator.size), stderr=0.0, half_width=0.0)
        p = float((numerator & denominator).sum()) / hits
        stderr = math.sqrt(p * (1.0 - p) / hits)
        return cls(estimate=p, trials=hits, stderr=stderr, half_width=Z_95 * stderr)

    def scaled(self, factor: float) -> "CoverageEstimate":
        return CoverageEstimate(
            estimate=self.estimate * factor,
            trials=self.trials,
            stderr=self.stderr * abs(factor),
            half_width=self.half_width * abs(factor),
        )

    def agrees_with(self, value: float, sigmas: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.estimate - value) <= max(floor, sigmas * self.stderr)


class JointCoverageEstimate(BaseModel):
    joint: CoverageEstimate
    marginal1: CoverageEstimate
    marginal2: CoverageEstimate
    conditional: CoverageEstimate


class CoverageCurve(BaseModel):
    swept: str
    params: SystemParams
    points: List[Tuple[float, float]]

    @field_validator("points")
    @classmethod
    def _check_points(cls, points):
        xs = [x for x, _ in points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("curve abscissas must be strictly increasing")
        if any(not 0.0 <= p <= 1.0 for _, p in points):
            raise ValueError("curve probabilities must lie in [0, 1]")
        return points


class NullClusterFraction(BaseModel):
    value: float
    threshold_distance: float
    effective_radius: float
    assumes_poisson_receivers: bool = True


class Throughput(BaseModel):
    value: float
    unit: Literal["nats", "bits"]
    mean_covered: float


class RateOptimum(BaseModel):
    threshold: float
    threshold_db: float
    throughput: float
    flat: bool = False


class MobilityComparison(BaseModel):
    static: float
    mobile: float


class ResultRow(BaseModel):
    sweep_param: str
    sweep_value: float
    metric: str
    analytic: Optional[float] = None
    simulated: Optional[float] = None
    stderr: Optional[float] = None
    trials: Optional[int] = None

    @model_validator(mode="after")
    def _needs_a_value(self):
        if self.analytic is None and self.simulated is None:
            raise ValueError(f"row {self.metric}@{self.sweep_value} has neither analytic nor simulated value")
        return self


class SweepSpec(BaseModel):
    """Swept parameter and its values; dB values are already linear here, `db` only drives labelling."""
    model_config = ConfigDict(frozen=True)

    param: Literal["detection_threshold", "distance", "tau_m", "cluster_radius", "lambda_m", "alpha"]
    values: Tuple[float, ...]
    db: bool = False
    distances: Tuple[float, ...] = (50.0, 150.0, 250.0)

    @field_validator("values")
    @classmethod
    def _nonempty(cls, values):
        if not values:
            raise ValueError("a sweep needs at least one value")
        return values

    @property
    def label(self) -> str:
        return f"{self.param}_db" if self.db else self.param

    def display(self, value: float) -> float:
        if not self.db:
            return value
        return 10.0 * math.log10(value)


class OutputSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: Optional[str] = None
    mode: Literal["analytic", "sim", "both"] = "analytic"
    bounds: bool = False
    unit: Literal["nats", "bits"] = "nats"


class OptimizeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    realizations: int = Field(default=50, ge=1)
    bin_width: float = Field(default=25.0, gt=0)
    extent: float = Field(default=5000.0, gt=0)
    max_distance: float = Field(default=1000.0, gt=0)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    system: SystemParams
    sim: SimConfig
    sweep: Optional[SweepSpec] = None
    output: OutputSpec = OutputSpec()
    optimize: OptimizeSpec = OptimizeSpec()

