import math

import numpy as np
import pytest

from app.core.units import db_to_linear, dbm_to_watts, linear_to_db, noise_power_watts, watts_to_dbm
from app.models.params import PathLossModel, SystemParams
from app.services.channel import path_loss, path_loss_inverse, received_gain, sinr


def test_path_loss_scalar_and_array():
    model = PathLossModel(intercept=2.0, alpha=4.0)
    assert path_loss(3.0, model) == pytest.approx(2.0 * 81.0)
    np.testing.assert_allclose(path_loss(np.array([1.0, 2.0]), model), [2.0, 32.0])


def test_path_loss_rejects_negative_distance():
    with pytest.raises(ValueError):
        path_loss(-1.0, PathLossModel(alpha=3.5))


def test_path_loss_inverse_recovers_distance():
    model = PathLossModel(intercept=1.5, alpha=3.5)
    for r in (1.0, 37.0, 2900.0):
        assert path_loss_inverse(path_loss(r, model), model) == pytest.approx(r, rel=1e-12)


def test_sinr_without_interferers_is_snr():
    model = PathLossModel(alpha=4.0)
    value = sinr(1.0, 10.0, [], snr_inv=1e-6, model=model)
    assert value == pytest.approx((1.0 / 1e4) / 1e-6)


def test_sinr_sums_interference():
    model = PathLossModel(alpha=2.5)
    value = sinr(2.0, 5.0, [(1.0, 10.0), (0.5, 20.0)], snr_inv=0.0, model=model)
    expected = (2.0 / 5.0 ** 2.5) / (1.0 / 10.0 ** 2.5 + 0.5 / 20.0 ** 2.5)
    assert value == pytest.approx(expected)


@pytest.mark.parametrize("bad", [0.0, -3.0])
def test_sinr_rejects_nonpositive_signal_distance(bad):
    with pytest.raises(ValueError, match="signal_distance"):
        sinr(1.0, bad, [], snr_inv=1.0, model=PathLossModel(alpha=3.0))


def test_sinr_rejects_interferer_on_receiver():
    with pytest.raises(ValueError):
        sinr(1.0, 5.0, [(1.0, 0.0)], snr_inv=1.0, model=PathLossModel(alpha=3.0))


def test_received_gain_vectorised():
    model = PathLossModel(alpha=2.0)
    np.testing.assert_allclose(received_gain(np.array([1.0, 4.0]), np.array([1.0, 2.0]), model), [1.0, 1.0])


def test_unit_conversions():
    assert db_to_linear(-3.0) == pytest.approx(0.501187, rel=1e-6)
    assert linear_to_db(db_to_linear(7.3)) == pytest.approx(7.3)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert watts_to_dbm(0.2) == pytest.approx(23.0103, rel=1e-5)
    assert linear_to_db(0.0) == -math.inf


def test_baseline_noise_power():
    # -174 dBm/Hz + 9 dB + 70 dB(10 MHz) = -95 dBm
    assert noise_power_watts(-174.0, 9.0, 10e6) == pytest.approx(10 ** (-12.5), rel=1e-9)
    params = SystemParams.baseline()
    assert params.noise_power == pytest.approx(10 ** (-12.5), rel=1e-9)
    assert params.snr_inv() == pytest.approx(10 ** (-12.5) / 0.2, rel=1e-9)
    assert params.snr_c_inv() == pytest.approx(10 ** (-12.5) / 40.0, rel=1e-9)


def test_baseline_densities():
    params = SystemParams.baseline()
    disc = math.pi * 500.0 ** 2
    assert params.lambda_b * disc == pytest.approx(1.0)
    assert params.lambda_m * disc == pytest.approx(5.0)
    assert params.lambda_r * disc == pytest.approx(500.0)
    assert params.alpha == 3.5
    assert params.detection_threshold == pytest.approx(db_to_linear(-3.0))
    assert params.n_max == pytest.approx(500.0 * (150.0 / 500.0) ** 2)


def test_params_reject_alpha_at_two():
    with pytest.raises(ValueError):
        SystemParams.baseline(alpha=2.0)


def test_replace_validates():
    params = SystemParams.baseline()
    with pytest.raises(ValueError):
        params.replace(lambda_m=-1.0)
    assert params.replace(tau_m=4).tau_m == 4
