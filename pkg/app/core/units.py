import math


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0:
        return float("-inf")
    return 10.0 * math.log10(value)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def watts_to_dbm(value_w: float) -> float:
    return linear_to_db(value_w) + 30.0


def noise_power_watts(psd_dbm_hz: float, noise_figure_db: float, bandwidth_hz: float) -> float:
    """Thermal noise power over the band: PSD + NF + 10·log10(W), in watts."""
    return dbm_to_watts(psd_dbm_hz + noise_figure_db + 10.0 * math.log10(bandwidth_hz))
