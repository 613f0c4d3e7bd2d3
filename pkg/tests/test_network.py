import numpy as np
import pytest
from pydantic import ValidationError

from clickstats.datamodel import DetectorConfig
from clickstats.errors import ConfigurationError
from clickstats.network import custom_config, effective_click_weights, is_balanced, permuted, ring_resonator, uniform_splitter


def test_uniform_splitter():
    mux = uniform_splitter(4)
    np.testing.assert_array_equal(mux.weights, [0.25] * 4)
    assert mux.tail_loss == 0.0


def test_ring_weights_and_tail():
    mux = ring_resonator(0.6, 10)
    np.testing.assert_allclose(mux.weights[:3], [0.4, 0.36, 0.144], rtol=1e-14)
    np.testing.assert_allclose(mux.weights[2:] / mux.weights[1:-1], 0.4, rtol=1e-12)
    assert mux.tail_loss == pytest.approx(0.6 * 0.4**9, rel=1e-14)
    assert mux.weights.sum() + mux.tail_loss == pytest.approx(1.0, abs=1e-12)


def test_ring_second_pulse_overtakes_first_for_strong_coupling():
    mux = ring_resonator(0.7, 3)
    assert mux.weights[1] > mux.weights[0]


def test_single_pulse_ring_keeps_the_rest_as_loss():
    mux = ring_resonator(0.6, 1)
    np.testing.assert_allclose(mux.weights, [0.4])
    assert mux.tail_loss == pytest.approx(0.6)


@pytest.mark.parametrize("kappa, n_trc", [(0.0, 5), (1.0, 5), (1.5, 5), (0.6, 0)])
def test_ring_parameter_domain(kappa: float, n_trc: int):
    with pytest.raises(ConfigurationError):
        ring_resonator(kappa, n_trc)


def test_custom_weights_must_sum_to_one():
    assert custom_config([0.5, 0.3], tail_loss=0.2).n_modes == 2
    with pytest.raises(ConfigurationError):
        custom_config([0.5, 0.3], tail_loss=0.1)


def test_effective_weights_are_monotone_in_efficiency():
    mux = ring_resonator(0.6, 4)
    q_low, loss_low = effective_click_weights(mux, DetectorConfig(eta=[0.5, 1.0, 1.0, 1.0], nu=[0.0] * 4))
    q_high, loss_high = effective_click_weights(mux, DetectorConfig(eta=[0.8, 1.0, 1.0, 1.0], nu=[0.0] * 4))
    assert q_high[0] - q_low[0] == pytest.approx(0.3 * mux.weights[0])
    assert loss_low - loss_high == pytest.approx(0.3 * mux.weights[0])
    np.testing.assert_array_equal(q_high[1:], q_low[1:])


def test_effective_weights_need_matching_mode_counts():
    with pytest.raises(ConfigurationError):
        effective_click_weights(uniform_splitter(3), DetectorConfig.uniform(4))


def test_detector_from_loss():
    det = DetectorConfig.from_loss(0.2, [0.9, 0.5], nu=0.01)
    np.testing.assert_allclose(det.eta, [0.72, 0.4])
    np.testing.assert_allclose(det.nu, [0.01, 0.01])


@pytest.mark.parametrize("eta, nu", [([1.2], [0.0]), ([0.5], [-0.1]), ([0.5, 0.5], [0.0])])
def test_detector_domain(eta: list[float], nu: list[float]):
    with pytest.raises(ValidationError):
        DetectorConfig(eta=eta, nu=nu)


def test_is_balanced():
    assert is_balanced(uniform_splitter(5), DetectorConfig.uniform(5, eta=0.7, nu=0.1))
    assert not is_balanced(uniform_splitter(2), DetectorConfig(eta=[0.7, 0.8], nu=[0.0, 0.0]))
    assert not is_balanced(ring_resonator(0.6, 3), DetectorConfig.uniform(3))


def test_permuted_moves_weights_with_detectors():
    mux, det = permuted(ring_resonator(0.6, 3), DetectorConfig(eta=[0.1, 0.2, 0.3], nu=[0.0] * 3), [2, 0, 1])
    np.testing.assert_allclose(mux.weights, [0.144, 0.4, 0.36])
    np.testing.assert_allclose(det.eta, [0.3, 0.1, 0.2])
    with pytest.raises(ConfigurationError):
        permuted(mux, det, [0, 0, 1])
