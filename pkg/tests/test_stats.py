import math

import numpy as np
import pytest
from scipy.stats import binom

from clickstats import exact, sources, stats
from clickstats.datamodel import ClickStatistics, DetectorConfig, Provenance
from clickstats.errors import ConfigurationError, DegenerateStatisticsError
from clickstats.network import ring_resonator, uniform_splitter


def test_click_summary_uses_population_variance():
    summary = stats.click_summary(np.array([0.2, 0.5, 0.3]), np.array([0.3, 0.8]))
    assert summary.mean_c == pytest.approx(1.1)
    assert summary.var_c == pytest.approx(0.2 * 1.21 + 0.5 * 0.01 + 0.3 * 0.81)
    assert summary.m == pytest.approx(0.55)
    assert summary.sigma_sq == pytest.approx(0.0625)
    assert summary.provenance is Provenance.EXACT


def test_mandel_parameter():
    assert stats.mandel_q(2.0, 2.0) == 0.0
    assert stats.mandel_q(1.0, 0.0) == -1.0
    with pytest.raises(DegenerateStatisticsError) as excinfo:
        stats.mandel_q(0.0, 0.0)
    assert excinfo.value.guard == "mandel_mean"


def test_binomial_clicks_have_zero_witnesses():
    p = 0.3
    summary = stats.click_summary(binom.pmf(np.arange(7), 6, p), np.full(6, p))
    assert stats.binomial_q(summary) == pytest.approx(0.0, abs=1e-12)
    assert stats.poisson_binomial_q(summary) == pytest.approx(0.0, abs=1e-12)


def test_exactly_one_click_every_time():
    summary = stats.click_summary(np.array([0.0, 1.0, 0.0]), np.array([0.5, 0.5]))
    assert summary.mean_c == 1.0
    assert summary.var_c == 0.0
    assert stats.binomial_q(summary) == -1.0
    assert stats.poisson_binomial_q(summary) == -1.0


def test_no_clicks_is_degenerate():
    summary = stats.click_summary(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0]))
    with pytest.raises(DegenerateStatisticsError, match="no clicks observed") as excinfo:
        stats.binomial_q(summary)
    assert excinfo.value.guard == "no_clicks"


def test_saturation_is_degenerate():
    summary = stats.click_summary(np.array([0.0, 0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(DegenerateStatisticsError) as excinfo:
        stats.poisson_binomial_q(summary)
    assert excinfo.value.guard == "saturated"


def test_vanishing_poisson_binomial_denominator():
    # One mode always clicks, the other never does
    summary = stats.click_summary(np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(DegenerateStatisticsError) as excinfo:
        stats.poisson_binomial_q(summary)
    assert excinfo.value.guard == "poisson_binomial_denominator"
    assert excinfo.value.value == pytest.approx(0.0, abs=1e-15)


def test_click_statistics_reject_inconsistent_moments():
    with pytest.raises(ValueError):
        ClickStatistics(c=[0.5, 0.5], p=[0.5], mean_c=0.5, var_c=0.25, m=0.5, sigma_sq=0.5)


def test_report_takes_mandel_from_photon_statistics(ring10, ideal10):
    pnd = sources.thermal_pnd(1.0)
    report = stats.build_report(exact.exact_click_statistics(pnd, ring10, ideal10), pnd)
    assert report.q_m == pytest.approx(1.0, abs=1e-6)
    assert report.q_pb > 0.0
    assert report.n_modes == 10
    assert stats.build_report(exact.exact_click_statistics(pnd, ring10, ideal10)).q_m is None


def test_unbalance_makes_coherent_light_look_sub_binomial(ring10, ideal10):
    pnd = sources.coherent_pnd(2.0)
    report = stats.build_report(exact.exact_click_statistics(pnd, ring10, ideal10), pnd)
    assert report.q_b < 0.0
    assert report.q_pb == pytest.approx(0.0, abs=1e-9)


class TestSpatsClosedForms:
    def test_no_click_generating_function(self):
        assert stats.spats_no_click(0.0, 1.0) == 1.0
        assert stats.spats_no_click(1.0, 1.0) == 0.0
        assert stats.spats_no_click(0.5, 0.0) == 0.5

    def test_generating_function_matches_distribution(self):
        pnd = sources.spats_pnd(1.5, n_max=200)
        n = np.arange(pnd.n_max + 1)
        assert math.fsum((pnd.probs * 0.7**n).tolist()) == pytest.approx(stats.spats_no_click(0.3, 1.5), abs=1e-12)

    def test_mandel_root(self):
        assert stats.spats_qm_closed(1.0 / math.sqrt(2.0), 1.0) == pytest.approx(0.0, abs=1e-12)
        assert stats.spats_qm_closed(0.5, 1.0) < 0.0
        assert stats.spats_qm_closed(1.0, 0.5) == pytest.approx(0.5 * 0.5 / 1.5)

    def test_single_photon_through_two_modes(self):
        assert stats.spats_qb_closed(0.0, 1.0, 2) == pytest.approx(-1.0, abs=1e-15)

    @pytest.mark.parametrize("n_th", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("eta", [0.5, 1.0])
    @pytest.mark.parametrize("n_modes", [4, 8])
    def test_binomial_closed_form_matches_exact_engine(self, n_th: float, eta: float, n_modes: int):
        statistics = exact.exact_click_statistics(
            sources.spats_pnd(n_th, n_max=200), uniform_splitter(n_modes), DetectorConfig.uniform(n_modes, eta=eta)
        )
        assert stats.spats_qb_closed(n_th, eta, n_modes) == pytest.approx(stats.binomial_q(statistics), abs=1e-9)

    def test_parameter_domain(self):
        with pytest.raises(ConfigurationError):
            stats.spats_qb_closed(1.0, 0.5, 1)
        with pytest.raises(ConfigurationError):
            stats.spats_qb_closed(1.0, 0.0, 4)
        with pytest.raises(ConfigurationError):
            stats.spats_qm_closed(-0.1, 1.0)


def test_spats_window_where_only_poisson_binomial_detects_nonclassicality():
    """On a lossy ring with more than five pulses, some thermal means give Q_PB < 0 while Q_M > 0 and Q_B > 0."""
    mux = ring_resonator(0.6, 8)
    det = DetectorConfig.uniform(8, eta=0.5)
    window = []
    for n_th in np.round(np.arange(0.72, 1.2, 0.01), 2):
        q_pb = stats.poisson_binomial_q(exact.exact_click_statistics(sources.spats_pnd(float(n_th)), mux, det))
        if q_pb < 0.0 and stats.spats_qm_closed(n_th, 0.5) > 0.0 and stats.spats_qb_closed(n_th, 0.5, 8) > 0.0:
            window.append(n_th)
    assert window


def test_single_pulse_is_always_poisson_binomial():
    det = DetectorConfig.uniform(1, eta=0.7)
    for pnd in (
        sources.spats_pnd(1.0),
        sources.fock_pnd(2),
        sources.thermal_pnd(2.0),
        sources.coherent_pnd(1.5),
        sources.odd_coherent_for_mean(3.0),
    ):
        statistics = exact.exact_click_statistics(pnd, ring_resonator(0.6, 1), det)
        assert stats.poisson_binomial_q(statistics) == pytest.approx(0.0, abs=1e-12)
