import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.config import settings
from app.core.units import db_to_linear, noise_power_watts

# baseline densities are quoted per disc of radius 500 m
BASELINE_AREA = math.pi * 500.0 ** 2
BASELINE_NOISE_PSD_DBM_HZ = -174.0
BASELINE_NOISE_FIGURE_DB = 9.0
BASELINE_BANDWIDTH_HZ = 10e6


class PathLossModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    intercept: float = Field(default=1.0, gt=0)
    alpha: float = Field(gt=0)


class SystemParams(BaseModel):
    """Scalar parameters of the multicast D2D model, all in linear SI units."""
    model_config = ConfigDict(frozen=True)

    lambda_b: float = Field(gt=0, description="BS density, points per m^2")
    lambda_m: float = Field(gt=0, description="multicast transmitter density, points per m^2")
    lambda_r: float = Field(gt=0, description="receiver density inside a cluster, points per m^2")
    cluster_radius: float = Field(default=150.0, gt=0)
    detection_threshold: float = Field(gt=0, description="linear SINR threshold T")
    tau_m: int = Field(default=1, ge=1)
    alpha: float = 3.5
    pathloss_intercept: float = Field(default=1.0, gt=0)
    p_bs: float = Field(default=40.0, gt=0)
    p_d2d: float = Field(default=0.2, gt=0)
    noise_power: float = Field(ge=0)
    eta: float = Field(default=0.95, ge=0, le=1)
    budget: int = Field(default=2, ge=0)

    @field_validator("alpha")
    @classmethod
    def _alpha_above_two(cls, value: float) -> float:
        if not value > 2:
            raise ValueError("path-loss exponent must exceed 2")
        return value

    @classmethod
    def from_noise_spec(
        cls,
        noise_psd_dbm_hz: float = BASELINE_NOISE_PSD_DBM_HZ,
        noise_figure_db: float = BASELINE_NOISE_FIGURE_DB,
        bandwidth_hz: float = BASELINE_BANDWIDTH_HZ,
        **fields,
    ) -> "SystemParams":
        return cls(noise_power=noise_power_watts(noise_psd_dbm_hz, noise_figure_db, bandwidth_hz), **fields)

    @classmethod
    def baseline(cls, **overrides) -> "SystemParams":
        fields = dict(
            lambda_b=1.0 / BASELINE_AREA,
            lambda_m=5.0 / BASELINE_AREA,
            lambda_r=500.0 / BASELINE_AREA,
            alpha=3.5,
            detection_threshold=db_to_linear(-3.0),
            p_bs=40.0,
            p_d2d=0.2,
        )
        fields.update(overrides)
        if "noise_power" in fields:
            return cls(**fields)
        return cls.from_noise_spec(**fields)

    def replace(self, **changes) -> "SystemParams":
        # model_copy skips validation
        return SystemParams.model_validate({**self.model_dump(), **changes})

    def snr_inv(self) -> float:
        return self.noise_power / self.p_d2d

    def snr_c_inv(self) -> float:
        return self.noise_power / self.p_bs

    def path_loss_model(self) -> PathLossModel:
        return PathLossModel(intercept=self.pathloss_intercept, alpha=self.alpha)

    @property
    def n_max(self) -> float:
        """Mean number of receivers in a cluster, λ_r·π·R²."""
        return self.lambda_r * math.pi * self.cluster_radius ** 2


class QuadratureConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsabs: float = Field(default=1e-10, gt=0)
    epsrel: float = Field(default=1e-8, gt=0)
    limit: int = Field(default=200, ge=1)

    @classmethod
    def from_settings(cls) -> "QuadratureConfig":
        return cls(epsabs=settings.QUAD_EPSABS, epsrel=settings.QUAD_EPSREL, limit=settings.QUAD_LIMIT)


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    trials: int = Field(default_factory=lambda: settings.TRIALS, ge=1)
    window_radius: Optional[float] = Field(default=None, gt=0)
    rng_seed: int = Field(default_factory=lambda: settings.SEED, ge=0, lt=2 ** 64)
    mobility: Literal["static", "high-mobility"] = "static"
    assist: Literal["none", "nearest-bs"] = "none"
    min_link_distance: float = Field(default=1.0, gt=0)
    batch_size: int = Field(default_factory=lambda: settings.BATCH_SIZE, ge=1)
    threads: int = Field(default_factory=lambda: settings.THREADS, ge=1)
    # Off only for deliberately truncated fields (sparse-limit checks)
    strict_window: bool = True

    def _bs_matters(self) -> bool:
        return self.assist != "none"

    def minimum_window(self, params: SystemParams) -> float:
        """Interference-truncation guard: 5 mean spacings of each sampled field, and 4R."""
        radius = 4.0 * params.cluster_radius
        radius = max(radius, 5.0 / math.sqrt(math.pi * params.lambda_m))
        if self._bs_matters():
            radius = max(radius, 5.0 / math.sqrt(math.pi * params.lambda_b))
        return radius

    def default_window(self, params: SystemParams) -> float:
        radius = 4.0 * params.cluster_radius
        radius = max(radius, 10.0 / math.sqrt(math.pi * params.lambda_m))
        if self._bs_matters():
            radius = max(radius, 10.0 / math.sqrt(math.pi * params.lambda_b))
        return radius

    def resolve_window(self, params: SystemParams) -> float:
        if self.window_radius is None:
            return self.default_window(params)
        if self.strict_window and self.window_radius < self.minimum_window(params):
            raise ValueError(
                f"window_radius {self.window_radius:g} m is below the truncation guard "
                f"{self.minimum_window(params):g} m"
            )
        return self.window_radius
