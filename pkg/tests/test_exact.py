import math

import numpy as np
import pytest
from scipy.stats import binom

from clickstats import exact, sources
from clickstats.datamodel import DetectorConfig, MultiplexConfig
from clickstats.errors import ConfigurationError, DegenerateStatisticsError, EngineCapacityError
from clickstats.network import custom_config, effective_click_weights, permuted, ring_resonator, uniform_splitter
from clickstats.stats import binomial_q, mandel_q, poisson_binomial_q


def _oracle_configs() -> list[tuple[str, MultiplexConfig, DetectorConfig]]:
    configs = []
    for eta in (0.3, 0.7, 1.0):
        for nu in (0.0, 0.05):
            for n_modes in (1, 2, 3, 4):
                configs.append((f"uniform{n_modes}-eta{eta}-nu{nu}", uniform_splitter(n_modes), DetectorConfig.uniform(n_modes, eta, nu)))
                configs.append((f"ring{n_modes}-eta{eta}-nu{nu}", ring_resonator(0.6, n_modes), DetectorConfig.uniform(n_modes, eta, nu)))
    configs.append(
        ("custom3", custom_config([0.5, 0.3, 0.15], tail_loss=0.05), DetectorConfig(eta=[0.9, 0.8, 0.95], nu=[0.0, 0.01, 0.02]))
    )
    return configs


ORACLE_CONFIGS = _oracle_configs()


class TestConditionalTables:
    def test_one_photon_two_modes(self):
        tables = exact.conditional_tables(uniform_splitter(2), DetectorConfig.uniform(2), n_max=2)
        np.testing.assert_allclose(tables.c_given_n[:, 0], [1.0, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(tables.c_given_n[:, 1], [0.0, 1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(tables.c_given_n[:, 2], [0.0, 0.5, 0.5], atol=1e-15)

    def test_half_efficiency_loses_the_photon(self):
        tables = exact.conditional_tables(uniform_splitter(2), DetectorConfig.uniform(2, eta=0.5), n_max=1)
        np.testing.assert_allclose(tables.c_given_n[:, 1], [0.5, 0.5, 0.0], atol=1e-15)
        np.testing.assert_allclose(tables.p_given_n[:, 1], [0.25, 0.25], atol=1e-15)

    @pytest.mark.parametrize("name, mux, det", ORACLE_CONFIGS, ids=[config[0] for config in ORACLE_CONFIGS])
    def test_matches_brute_force(self, name: str, mux: MultiplexConfig, det: DetectorConfig):
        tables = exact.conditional_tables(mux, det, n_max=6)
        for n in range(7):
            c_column, p_column = exact.brute_force_tables(mux, det, n)
            np.testing.assert_allclose(tables.c_given_n[:, n], c_column, rtol=0.0, atol=1e-12, err_msg=f"{name} C(k|{n})")
            np.testing.assert_allclose(tables.p_given_n[:, n], p_column, rtol=0.0, atol=1e-12, err_msg=f"{name} P(j|{n})")

    def test_balanced_shortcut_matches_inclusion_exclusion(self):
        q = np.full(5, 0.15)
        nu = np.full(5, 0.03)
        np.testing.assert_allclose(
            exact._balanced_click_table(5, 0.15, 0.03, 8), exact._inclusion_exclusion_table(q, nu, 8), rtol=0.0, atol=1e-12
        )

    def test_mode_recursion_matches_inclusion_exclusion(self):
        mux = ring_resonator(0.6, 7)
        det = DetectorConfig(eta=np.linspace(0.4, 1.0, 7), nu=np.linspace(0.0, 0.06, 7))
        q, q_loss = effective_click_weights(mux, det)
        np.testing.assert_allclose(
            exact._mode_recursion_table(q, q_loss, det.nu, 12), exact._inclusion_exclusion_table(q, det.nu, 12), rtol=0.0, atol=1e-12
        )

    @pytest.mark.parametrize("n_modes", [14, 18, 20])
    def test_long_pulse_trains_keep_the_counting_identities(self, n_modes: int):
        tables = exact.conditional_tables(ring_resonator(0.6, n_modes), DetectorConfig.uniform(n_modes, eta=0.5, nu=0.01), n_max=30)
        k = np.arange(n_modes + 1)
        assert np.all(tables.c_given_n >= 0.0)
        np.testing.assert_allclose(tables.c_given_n.sum(axis=0), 1.0, rtol=0.0, atol=1e-12)
        np.testing.assert_allclose(tables.p_given_n.sum(axis=0), k @ tables.c_given_n, rtol=0.0, atol=1e-11)

    def test_long_pulse_train_matches_brute_force(self):
        mux = ring_resonator(0.6, 14)
        det = DetectorConfig.uniform(14, eta=0.7)
        tables = exact.conditional_tables(mux, det, n_max=4)
        for n in range(5):
            c_column, p_column = exact.brute_force_tables(mux, det, n)
            np.testing.assert_allclose(tables.c_given_n[:, n], c_column, rtol=0.0, atol=1e-12)
            np.testing.assert_allclose(tables.p_given_n[:, n], p_column, rtol=0.0, atol=1e-12)

    def test_expected_clicks_identity(self):
        mux = ring_resonator(0.6, 6)
        det = DetectorConfig(eta=np.linspace(0.5, 1.0, 6), nu=np.full(6, 0.02))
        tables = exact.conditional_tables(mux, det, n_max=10)
        k = np.arange(7)
        np.testing.assert_allclose(tables.p_given_n.sum(axis=0), k @ tables.c_given_n, rtol=0.0, atol=1e-12)

    def test_no_more_clicks_than_photons_without_dark_counts(self):
        tables = exact.conditional_tables(ring_resonator(0.6, 8), DetectorConfig.uniform(8, eta=0.9), n_max=8)
        for n in range(8):
            np.testing.assert_allclose(tables.c_given_n[n + 1 :, n], 0.0, atol=1e-12)

    def test_balanced_network_of_64_modes(self):
        tables = exact.conditional_tables(uniform_splitter(64), DetectorConfig.uniform(64, eta=0.8, nu=0.01), n_max=30)
        k = np.arange(65)
        np.testing.assert_allclose(tables.p_given_n.sum(axis=0), k @ tables.c_given_n, rtol=0.0, atol=1e-10)

    def test_mode_relabelling_leaves_click_counts_unchanged(self, unbalanced3):
        mux, det = unbalanced3
        shuffled_mux, shuffled_det = permuted(mux, det, [2, 0, 1])
        original = exact.conditional_tables(mux, det, n_max=5)
        shuffled = exact.conditional_tables(shuffled_mux, shuffled_det, n_max=5)
        np.testing.assert_allclose(original.c_given_n, shuffled.c_given_n, rtol=0.0, atol=1e-12)

    def test_mode_relabelling_leaves_summary_statistics_unchanged(self, unbalanced3):
        mux, det = unbalanced3
        pnd = sources.thermal_pnd(1.5)
        original = exact.exact_click_statistics(pnd, mux, det)
        shuffled = exact.exact_click_statistics(pnd, *permuted(mux, det, [1, 2, 0]))
        assert shuffled.mean_c == pytest.approx(original.mean_c, abs=1e-12)
        assert shuffled.var_c == pytest.approx(original.var_c, abs=1e-12)
        assert shuffled.sigma_sq == pytest.approx(original.sigma_sq, abs=1e-12)
        assert poisson_binomial_q(shuffled) == pytest.approx(poisson_binomial_q(original), abs=1e-10)

    def test_unbalanced_networks_are_capped(self):
        with pytest.raises(EngineCapacityError):
            exact.conditional_tables(ring_resonator(0.6, 21), DetectorConfig.uniform(21, eta=0.9), n_max=5)


class TestBruteForce:
    def test_vacuum(self):
        c_column, p_column = exact.brute_force_tables(uniform_splitter(3), DetectorConfig.uniform(3), 0)
        np.testing.assert_allclose(c_column, [1.0, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(p_column, 0.0)

    def test_single_mode_two_photons(self):
        c_column, _ = exact.brute_force_tables(custom_config([1.0]), DetectorConfig(eta=[0.3], nu=[0.0]), 2)
        assert c_column[1] == pytest.approx(0.51, abs=1e-15)

    def test_refuses_large_instances(self):
        with pytest.raises(EngineCapacityError):
            exact.brute_force_tables(uniform_splitter(10), DetectorConfig.uniform(10), 8)


def test_no_click_prob():
    q = np.array([0.5, 0.3])
    nu = np.array([0.0, 0.1])
    assert exact.no_click_prob(set(), 3, q, nu) == 1.0
    assert exact.no_click_prob({0}, 1, q, nu) == pytest.approx(0.5)
    assert exact.no_click_prob({0, 1}, 2, q, nu) == pytest.approx(0.2**2 * math.exp(-0.1))


class TestExactStatistics:
    def test_vacuum_never_clicks(self):
        statistics = exact.exact_click_statistics(sources.coherent_pnd(0.0), ring_resonator(0.6, 4), DetectorConfig.uniform(4))
        np.testing.assert_allclose(statistics.c, [1.0, 0.0, 0.0, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(statistics.p, 0.0, atol=1e-15)

    def test_coherent_marginals(self, unbalanced3):
        mux, det = unbalanced3
        det = DetectorConfig(eta=det.eta, nu=[0.0, 0.0, 0.0])
        statistics = exact.exact_click_statistics(sources.coherent_pnd(2.0), mux, det)
        q, _ = effective_click_weights(mux, det)
        np.testing.assert_allclose(statistics.p, 1.0 - np.exp(-2.0 * q), rtol=0.0, atol=1e-9)

    def test_coherent_light_is_poisson_binomial(self, ring10, ideal10):
        statistics = exact.exact_click_statistics(sources.coherent_pnd(2.0), ring10, ideal10)
        assert poisson_binomial_q(statistics) == pytest.approx(0.0, abs=1e-9)

    def test_coherent_behind_balanced_splitter_is_binomial(self):
        statistics = exact.exact_click_statistics(sources.coherent_pnd(1.5), uniform_splitter(6), DetectorConfig.uniform(6, eta=0.8))
        p = 1.0 - math.exp(-1.5 * 0.8 / 6)
        np.testing.assert_allclose(statistics.c, binom.pmf(np.arange(7), 6, p), rtol=0.0, atol=1e-12)

    def test_single_photon_mixture(self, ring10, ideal10):
        statistics = exact.exact_click_statistics(sources.fock_pnd(1), ring10, ideal10)
        assert statistics.c[0] == pytest.approx(ring10.tail_loss, abs=1e-12)
        assert statistics.c[1] == pytest.approx(1.0 - ring10.tail_loss, abs=1e-12)
        np.testing.assert_allclose(statistics.c[2:], 0.0, atol=1e-12)

    def test_mixture_needs_enough_photon_numbers(self, ring10, ideal10):
        tables = exact.conditional_tables(ring10, ideal10, n_max=5)
        with pytest.raises(ConfigurationError):
            exact.mix_tables(tables, sources.coherent_pnd(2.0))


OPERATOR_FORM_SOURCES = [
    ("coherent", lambda: sources.coherent_pnd(2.0)),
    ("thermal", lambda: sources.thermal_pnd(1.0)),
    ("fock", lambda: sources.fock_pnd(2)),
    ("odd-coherent", lambda: sources.odd_coherent_for_mean(2.0)),
    ("spats", lambda: sources.spats_pnd(1.0, n_max=60)),
]


class TestOperatorForm:
    @pytest.mark.parametrize("name, make_pnd", OPERATOR_FORM_SOURCES, ids=[source[0] for source in OPERATOR_FORM_SOURCES])
    @pytest.mark.parametrize("network", ["ring", "custom"])
    def test_agrees_with_click_statistics(self, name, make_pnd, network, unbalanced3):
        if network == "ring":
            mux, det = ring_resonator(0.6, 6), DetectorConfig.uniform(6, eta=0.7, nu=0.02)
        else:
            mux, det = unbalanced3
        pnd = make_pnd()
        statistics = exact.exact_click_statistics(pnd, mux, det)
        assert exact.qpb_operator_form(pnd, mux, det) == pytest.approx(poisson_binomial_q(statistics), abs=1e-9)

    def test_covariance_sums_to_click_variance(self, ring10, ideal10):
        pnd = sources.thermal_pnd(1.0)
        covariance = exact.click_covariance(pnd, ring10, ideal10)
        statistics = exact.exact_click_statistics(pnd, ring10, ideal10)
        np.testing.assert_allclose(covariance, covariance.T)
        assert covariance.sum() == pytest.approx(statistics.var_c, abs=1e-10)
        np.testing.assert_allclose(np.diag(covariance), statistics.p * (1.0 - statistics.p), atol=1e-12)

    def test_single_photon_never_double_clicks(self, ring10, ideal10):
        assert exact.joint_click_prob(0, 1, sources.fock_pnd(1), ring10, ideal10) == pytest.approx(0.0, abs=1e-15)

    def test_joint_click_needs_distinct_modes(self, ring10, ideal10):
        with pytest.raises(ConfigurationError):
            exact.joint_click_prob(2, 2, sources.fock_pnd(1), ring10, ideal10)

    def test_sign_structure(self, ring10, ideal10):
        assert exact.qpb_operator_form(sources.fock_pnd(1), ring10, ideal10) < 0.0
        assert exact.qpb_operator_form(sources.thermal_pnd(1.0), ring10, ideal10) > 0.0

    def test_vacuum_is_degenerate(self, ring10, ideal10):
        with pytest.raises(DegenerateStatisticsError):
            exact.qpb_operator_form(sources.coherent_pnd(0.0), ring10, ideal10)


@pytest.mark.parametrize("mean", [0.5, 1.0, 2.5, 5.0])
@pytest.mark.parametrize("eta", [0.3, 1.0])
def test_classical_light_is_never_sub_poisson_binomial(mean: float, eta: float, ring10):
    det = DetectorConfig.uniform(10, eta=eta)
    for pnd in (sources.coherent_pnd(mean), sources.thermal_pnd(mean)):
        assert poisson_binomial_q(exact.exact_click_statistics(pnd, ring10, det)) >= -1e-9


@pytest.mark.parametrize("value", [1, 2, 3])
def test_fock_and_odd_coherent_light_is_sub_poisson_binomial(value: int, ring10, ideal10):
    for pnd in (sources.fock_pnd(value), sources.odd_coherent_for_mean(float(value))):
        assert poisson_binomial_q(exact.exact_click_statistics(pnd, ring10, ideal10)) < 0.0


BALANCED_SOURCES = [
    ("coherent", lambda: sources.coherent_pnd(2.0)),
    ("thermal", lambda: sources.thermal_pnd(1.0)),
    ("fock", lambda: sources.fock_pnd(3)),
    ("odd-coherent", lambda: sources.odd_coherent_for_mean(2.0)),
    ("spats", lambda: sources.spats_pnd(1.0)),
]


@pytest.mark.parametrize("name, make_pnd", BALANCED_SOURCES, ids=[source[0] for source in BALANCED_SOURCES])
def test_balanced_splitter_reduces_to_binomial(name, make_pnd):
    statistics = exact.exact_click_statistics(make_pnd(), uniform_splitter(10), DetectorConfig.uniform(10, eta=0.8))
    assert statistics.sigma_sq <= 1e-15
    assert poisson_binomial_q(statistics) == pytest.approx(binomial_q(statistics), abs=1e-12)


def test_many_modes_approach_the_mandel_parameter():
    pnd = sources.thermal_pnd(1.0)
    q_m = mandel_q(*sources.moments(pnd))
    gaps = [
        abs(poisson_binomial_q(exact.exact_click_statistics(pnd, uniform_splitter(n_modes), DetectorConfig.uniform(n_modes))) - q_m)
        for n_modes in (8, 64)
    ]
    assert gaps[1] < gaps[0]
