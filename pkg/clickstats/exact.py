"""Exact click statistics from the on-off detection model.

An n-photon input routed photon by photon leaves a set T of modes dark with probability
(1 - sum_{j in T} q_j)^n * prod_{j in T} exp(-nu_j), where q_j = |u_j|^2 eta_j. For Fock-diagonal inputs this
is the normally ordered expectation of the no-click operators, so mixing over rho(n) reproduces the quantum
Poisson-binomial click distribution. Modes are indexed from 0.
"""

from itertools import product
from logging import Logger
from math import exp, expm1, fsum, prod
from time import perf_counter

import numpy as np
from scipy.special import comb
from scipy.stats import binom

from clickstats.config import get_settings
from clickstats.datamodel import (
    ClickStatistics,
    ConditionalTables,
    DetectorConfig,
    MultiplexConfig,
    PhotonNumberDistribution,
    Provenance,
)
from clickstats.errors import ConfigurationError, DegenerateStatisticsError, EngineCapacityError
from clickstats.logging import getLogger
from clickstats.metrics import engine_time_metric
from clickstats.network import effective_click_weights, is_balanced
from clickstats.stats import click_summary

logger: Logger = getLogger("clickstats.exact")

BRUTE_FORCE_LIMIT: int = 10**7


def no_click_prob(subset: set[int] | list[int], n: int, q: np.ndarray, nu: np.ndarray) -> float:
    """Probability that no mode in ``subset`` clicks, given exactly n input photons."""
    modes: list[int] = sorted(subset)
    if not modes:
        return 1.0
    base: float = max(0.0, 1.0 - fsum(float(q[j]) for j in modes))
    return base**n * exp(-fsum(float(nu[j]) for j in modes))


def _subset_sums(values: np.ndarray) -> np.ndarray:
    # Entry `mask` holds the sum over the modes whose bits are set in `mask`
    sums = np.zeros(1)
    for value in values:
        sums = np.concatenate((sums, sums + value))
    return sums


def _inclusion_exclusion_table(q: np.ndarray, nu: np.ndarray, n_max: int) -> np.ndarray:
    """C(k|n) as the signed sum over no-click subsets; loses digits to cancellation beyond about ten modes."""
    n_modes: int = len(q)
    sizes: np.ndarray = _subset_sums(np.ones(n_modes)).astype(np.int64)
    base: np.ndarray = np.clip(1.0 - _subset_sums(q), 0.0, 1.0)
    power: np.ndarray = np.exp(-_subset_sums(nu))

    # C(k|n) = sum_{r >= N-k} (-1)^(r-(N-k)) binom(r, N-k) s_r(n), s_r the no-click sum over subsets of size r
    r = np.arange(n_modes + 1)
    coefficients = np.zeros((n_modes + 1, n_modes + 1))
    for k in range(n_modes + 1):
        dark: int = n_modes - k
        coefficients[k, dark:] = (-1.0) ** (r[dark:] - dark) * comb(r[dark:], dark, exact=False)

    table = np.empty((n_modes + 1, n_max + 1))
    for n in range(n_max + 1):
        size_sums: np.ndarray = np.bincount(sizes, weights=power, minlength=n_modes + 1)
        for k in range(n_modes + 1):
            table[k, n] = fsum((coefficients[k] * size_sums).tolist())
        power = power * base
    return table


def _mode_recursion_table(q: np.ndarray, q_loss: float, nu: np.ndarray, n_max: int) -> np.ndarray:
    """C(k|n) placing the photons mode by mode; every term is nonnegative, so no digits cancel.

    F_j(r, k) is the probability that modes j..N-1 show k clicks while r photons are still unplaced. The photons
    absorbed by mode j follow binomial(r, q_j / R_j), R_j being the mass of mode j, the later modes and the loss
    channel. Photons left after the last mode are lost.
    """
    n_modes: int = len(q)
    remaining: np.ndarray = np.cumsum(np.append(q, q_loss)[::-1])[::-1][:n_modes]
    r = np.arange(n_max + 1)
    absorbed = r[:, None] - r[None, :]

    table = np.zeros((n_max + 1, n_modes + 1))
    table[:, 0] = 1.0
    for j in reversed(range(n_modes)):
        share: float = min(1.0, float(q[j] / remaining[j])) if remaining[j] > 0.0 else 0.0
        step: np.ndarray = binom.pmf(absorbed, r[:, None], share)
        empty: np.ndarray = np.diag(step).copy()
        np.fill_diagonal(step, 0.0)

        lit: np.ndarray = step @ table
        unlit: np.ndarray = empty[:, None] * table
        fire: float = -expm1(-float(nu[j]))
        table = (1.0 - fire) * unlit
        table[:, 1:] += lit[:, :-1] + fire * unlit[:, :-1]
    return table.T


def _balanced_click_table(n_modes: int, q: float, nu: float, n_max: int) -> np.ndarray:
    """Balanced shortcut: detected-photon binomial, occupancy chain, then dark counts on the empty modes.

    Equal to binom(N,k) sum_i (-1)^i binom(k,i) (1 - (N-k+i) q)^n exp(-(N-k+i) nu), without the cancellation.
    """
    detected_fraction: float = min(1.0, n_modes * q)
    j = np.arange(n_modes + 1, dtype=np.float64)

    occupancy = np.zeros((n_max + 1, n_modes + 1))
    occupancy[0, 0] = 1.0
    for d in range(1, n_max + 1):
        occupancy[d] = occupancy[d - 1] * j / n_modes
        occupancy[d, 1:] += occupancy[d - 1, :-1] * (n_modes - j[:-1]) / n_modes

    n = np.arange(n_max + 1)
    detected = binom.pmf(n[None, :], n[:, None], detected_fraction)
    photon_clicks: np.ndarray = detected @ occupancy

    fire: float = -np.expm1(-nu)
    dark = np.zeros((n_modes + 1, n_modes + 1))
    for occupied in range(n_modes + 1):
        dark[occupied, occupied:] = binom.pmf(np.arange(n_modes - occupied + 1), n_modes - occupied, fire)
    return np.clip((photon_clicks @ dark).T, 0.0, 1.0)


def conditional_tables(
    mux: MultiplexConfig,
    det: DetectorConfig,
    n_max: int,
    subset_cap: int | None = None,
) -> ConditionalTables:
    """C(k|n) and P(j|n) for n = 0..n_max."""
    cap: int = get_settings().subset_cap if subset_cap is None else subset_cap
    q, q_loss = effective_click_weights(mux, det)
    n_modes: int = mux.n_modes

    start_time: float = perf_counter()
    if is_balanced(mux, det):
        c_given_n = _balanced_click_table(n_modes, float(q[0]), float(det.nu[0]), n_max)
        method: str = "balanced"
    elif n_modes <= cap:
        c_given_n = _mode_recursion_table(q, q_loss, det.nu, n_max)
        method = "mode recursion"
    else:
        raise EngineCapacityError(
            f"exact engine is capped at N={cap} for unbalanced networks "
            f"(got N={n_modes}); use the Monte Carlo engine"
        )

    n = np.arange(n_max + 1)
    p_given_n = 1.0 - np.power(1.0 - q[:, None], n[None, :]) * np.exp(-det.nu)[:, None]
    elapsed: float = perf_counter() - start_time
    engine_time_metric.labels("exact").observe(elapsed)
    logger.debug(f"Conditional tables for N={n_modes}, n_max={n_max} via {method} took {elapsed:.4f} seconds.")

    return ConditionalTables(c_given_n=c_given_n, p_given_n=np.clip(p_given_n, 0.0, 1.0), provenance=Provenance.EXACT)


def brute_force_tables(mux: MultiplexConfig, det: DetectorConfig, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Column n of C(k|n) and P(j|n) by enumerating every placement of the n photons.

    Each photon lands in mode j with probability q_j or is lost; dark counts are folded in over all 2^N dark
    patterns. Meant as an independent check on small instances.
    """
    n_modes: int = mux.n_modes
    if (n_modes + 1) ** n > BRUTE_FORCE_LIMIT:
        raise EngineCapacityError(f"brute force needs (N+1)^n = {(n_modes + 1) ** n} outcomes, limit {BRUTE_FORCE_LIMIT}")

    q, q_loss = effective_click_weights(mux, det)
    outcome_probs: list[float] = [*q.tolist(), q_loss]

    occupied_probs = np.zeros(2**n_modes)
    for placement in product(range(n_modes + 1), repeat=n):
        mask: int = 0
        for mode in placement:
            if mode < n_modes:
                mask |= 1 << mode
        occupied_probs[mask] += prod(outcome_probs[mode] for mode in placement)

    fire: np.ndarray = -np.expm1(-det.nu)
    click_probs = np.zeros(2**n_modes)
    for dark_mask in range(2**n_modes):
        dark_prob: float = prod(fire[j] if dark_mask >> j & 1 else 1.0 - fire[j] for j in range(n_modes))
        if dark_prob == 0.0:
            continue
        for occupied_mask in np.flatnonzero(occupied_probs):
            click_probs[int(occupied_mask) | dark_mask] += occupied_probs[occupied_mask] * dark_prob

    masks = np.arange(2**n_modes)
    popcount = np.array([bin(mask).count("1") for mask in masks])
    c_column = np.bincount(popcount, weights=click_probs, minlength=n_modes + 1)
    p_column = np.array([click_probs[((masks >> j) & 1) == 1].sum() for j in range(n_modes)])
    return c_column, p_column


def mix_tables(tables: ConditionalTables, pnd: PhotonNumberDistribution) -> ClickStatistics:
    """c_k = sum_n C(k|n) rho(n) and p_j = sum_n P(j|n) rho(n), conditioned on n <= n_max."""
    if tables.n_max < pnd.n_max:
        raise ConfigurationError(f"tables cover n <= {tables.n_max} but the source extends to n_max={pnd.n_max}")
    weights: np.ndarray = pnd.conditioned
    columns: int = pnd.n_max + 1
    c: np.ndarray = tables.c_given_n[:, :columns] @ weights
    p: np.ndarray = tables.p_given_n[:, :columns] @ weights
    return click_summary(c, p, provenance=tables.provenance)


def exact_click_statistics(
    pnd: PhotonNumberDistribution,
    mux: MultiplexConfig,
    det: DetectorConfig,
    subset_cap: int | None = None,
) -> ClickStatistics:
    """Exact c_k, p_j and summary statistics for a photon-number distribution."""
    if pnd.tail_mass > 0.0:
        logger.debug(f"Excluding tail mass {pnd.tail_mass:.3e} beyond n_max={pnd.n_max} from the mixture.")
    return mix_tables(conditional_tables(mux, det, pnd.n_max, subset_cap), pnd)


def _no_click_moments(pnd: PhotonNumberDistribution, mux: MultiplexConfig, det: DetectorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Single-mode and pairwise no-click probabilities, mixed over rho(n)."""
    q, _ = effective_click_weights(mux, det)
    weights: np.ndarray = pnd.conditioned
    n = np.arange(pnd.n_max + 1)

    single_base: np.ndarray = 1.0 - q
    pair_base: np.ndarray = np.clip(1.0 - q[:, None] - q[None, :], 0.0, 1.0)
    single = (np.power(single_base[:, None], n[None, :]) @ weights) * np.exp(-det.nu)
    pair = (np.power(pair_base[:, :, None], n[None, None, :]) @ weights) * np.exp(-(det.nu[:, None] + det.nu[None, :]))
    return single, pair


def joint_click_prob(j: int, k: int, pnd: PhotonNumberDistribution, mux: MultiplexConfig, det: DetectorConfig) -> float:
    """Probability that modes j and k both click."""
    if j == k:
        raise ConfigurationError("joint click probability needs two distinct modes")
    if not (0 <= j < mux.n_modes and 0 <= k < mux.n_modes):
        raise ConfigurationError(f"mode indices must lie in [0, {mux.n_modes})")
    single, pair = _no_click_moments(pnd, mux, det)
    return max(0.0, fsum([1.0, -single[j], -single[k], pair[j, k]]))


def click_covariance(pnd: PhotonNumberDistribution, mux: MultiplexConfig, det: DetectorConfig) -> np.ndarray:
    """Normally ordered click covariance matrix.

    The diagonal holds p_j (1 - p_j), the off-diagonal joint(j, k) - p_j p_k, which simplifies to the
    no-click covariance. The matrix sums to <(dc)^2>.
    """
    single, pair = _no_click_moments(pnd, mux, det)
    covariance: np.ndarray = pair - np.outer(single, single)
    p: np.ndarray = 1.0 - single
    np.fill_diagonal(covariance, p * (1.0 - p))
    return covariance


def qpb_operator_form(
    pnd: PhotonNumberDistribution,
    mux: MultiplexConfig,
    det: DetectorConfig,
    epsilon: float | None = None,
) -> float:
    """Q_PB as the sum of pairwise click covariances over the sum of single-mode click variances."""
    eps: float = get_settings().denominator_epsilon if epsilon is None else epsilon
    covariance: np.ndarray = click_covariance(pnd, mux, det)
    variances: np.ndarray = np.diag(covariance)
    denominator: float = fsum(variances.tolist())
    if denominator <= eps:
        raise DegenerateStatisticsError(
            "operator_form_denominator", denominator, "sum of p_j(1 - p_j) vanishes; every p_j is 0 or 1"
        )
    off_diagonal: np.ndarray = covariance[~np.eye(mux.n_modes, dtype=bool)]
    numerator: float = fsum(off_diagonal.tolist())
    return numerator / denominator
