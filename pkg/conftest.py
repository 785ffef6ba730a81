import math

import pytest

from app.models.params import SimConfig, SystemParams


@pytest.fixture
def baseline() -> SystemParams:
    return SystemParams.baseline()


@pytest.fixture
def noiseless(baseline) -> SystemParams:
    return baseline.replace(noise_power=0.0)


@pytest.fixture
def quick_sim() -> SimConfig:
    """Small, seeded Monte Carlo run for unit-level agreement checks."""
    return SimConfig(trials=4000, batch_size=1000, rng_seed=12345, threads=1)


def sigma_or(estimate, floor: float, sigmas: float = 4.0) -> float:
    return max(floor, sigmas * estimate.stderr)


def area(radius: float) -> float:
    return math.pi * radius ** 2
