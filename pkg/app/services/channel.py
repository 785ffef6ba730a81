"""Path loss and SINR arithmetic shared by the analytic engine and the simulator."""
from typing import Iterable, Tuple

import numpy as np

from app.models.params import PathLossModel


def path_loss(r, model: PathLossModel):
    """ℓ(r) = A·r^α. Accepts scalars or arrays; ℓ(0) = 0, so callers guard zero distances."""
    if np.ndim(r) == 0:
        if r < 0:
            raise ValueError(f"distance must be nonnegative, got {r}")
        return model.intercept * float(r) ** model.alpha
    return model.intercept * np.power(r, model.alpha)


def path_loss_inverse(y, model: PathLossModel):
    if np.ndim(y) == 0:
        if y < 0:
            raise ValueError(f"attenuation must be nonnegative, got {y}")
        return (float(y) / model.intercept) ** (1.0 / model.alpha)
    return np.power(np.asarray(y) / model.intercept, 1.0 / model.alpha)


def sinr(
    link_gain: float,
    signal_distance: float,
    interferer_terms: Iterable[Tuple[float, float]],
    snr_inv: float,
    model: PathLossModel,
) -> float:
    """SINR = (F₀/ℓ(d)) / (SNR⁻¹ + Σ Fⱼ/ℓ(dⱼ))."""
    if signal_distance <= 0:
        raise ValueError("signal_distance must be positive (ℓ(0) = 0 makes the path gain singular)")
    interference = 0.0
    for fading, distance in interferer_terms:
        if distance <= 0:
            raise ValueError("interferer distances must be positive")
        interference += fading / path_loss(distance, model)
    return (link_gain / path_loss(signal_distance, model)) / (snr_inv + interference)


def received_gain(fading: np.ndarray, distance: np.ndarray, model: PathLossModel) -> np.ndarray:
    """Vectorised F/ℓ(d) for the simulator's interference sums."""
    return fading / (model.intercept * np.power(distance, model.alpha))
