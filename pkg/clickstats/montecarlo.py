"""Monte Carlo click experiments.

Trials are grouped in fixed-size blocks. Block b draws from a Philox stream keyed by ``SeedSequence(seed,
spawn_key=(b,))``, so a table depends only on (seed, M, block size, configuration), never on how many
workers ran the blocks.
"""

from concurrent.futures import ProcessPoolExecutor
from enum import StrEnum
from logging import Logger
from math import fsum
from time import perf_counter

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from clickstats.config import get_settings
from clickstats.datamodel import (
    ClickStatistics,
    ClickTable,
    ConditionalTables,
    DetectorConfig,
    MultiplexConfig,
    PhotonNumberDistribution,
    Provenance,
)
from clickstats.errors import BootstrapUnavailableError, ConfigurationError, DegenerateStatisticsError
from clickstats.logging import getLogger
from clickstats.metrics import engine_time_metric, trials_metric
from clickstats.network import effective_click_weights
from clickstats.stats import click_summary

logger: Logger = getLogger("clickstats.montecarlo")


class BootstrapStatistic(StrEnum):
    QPB = "q_pb"
    QB = "q_b"
    MEAN_C = "mean_c"
    VAR_C = "var_c"
    M = "m"
    SIGMA_SQ = "sigma_sq"


# Statistics computable from f_k alone
COUNT_STATISTICS: frozenset[BootstrapStatistic] = frozenset({BootstrapStatistic.MEAN_C, BootstrapStatistic.VAR_C, BootstrapStatistic.QB})


def block_rng(seed: int, block: int) -> Generator:
    """Counter-based generator for one block of trials."""
    return Generator(Philox(SeedSequence(seed, spawn_key=(block,))))


def _detect(rng: Generator, photons: np.ndarray, q: np.ndarray, q_loss: float, nu: np.ndarray) -> np.ndarray:
    """Click matrix for a batch of trials with the given photon numbers."""
    routed: np.ndarray = rng.multinomial(photons, np.append(q, q_loss))
    clicks: np.ndarray = routed[:, : len(q)] > 0
    if np.any(nu > 0.0):
        clicks |= rng.random((len(photons), len(q))) < -np.expm1(-nu)
    return clicks


def simulate_trial(rng: Generator, n: int, mux: MultiplexConfig, det: DetectorConfig) -> np.ndarray:
    """One experiment with exactly n input photons; returns the click vector of the N modes."""
    if n < 0:
        raise ConfigurationError(f"photon number must be nonnegative, got {n}")
    q, q_loss = effective_click_weights(mux, det)
    return _detect(rng, np.array([n]), q, q_loss, det.nu)[0]


def _run_block(
    seed: int,
    block: int,
    size: int,
    sampling_probs: np.ndarray | None,
    fixed_n: int,
    q: np.ndarray,
    q_loss: float,
    nu: np.ndarray,
    keep_raw: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    rng: Generator = block_rng(seed, block)
    if sampling_probs is None:
        photons = np.full(size, fixed_n)
    else:
        photons = rng.choice(len(sampling_probs), size=size, p=sampling_probs)
    clicks = _detect(rng, photons, q, q_loss, nu)
    f = np.bincount(clicks.sum(axis=1), minlength=len(q) + 1)
    w = clicks.sum(axis=0)
    return f, w, clicks if keep_raw else None


def _run_blocks(
    n_trials: int,
    seed: int,
    sampling_probs: np.ndarray | None,
    fixed_n: int,
    q: np.ndarray,
    q_loss: float,
    nu: np.ndarray,
    keep_raw: bool,
    workers: int,
    block_size: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    n_blocks: int = -(-n_trials // block_size)
    sizes: list[int] = [min(block_size, n_trials - b * block_size) for b in range(n_blocks)]
    arguments = [(seed, b, sizes[b], sampling_probs, fixed_n, q, q_loss, nu, keep_raw) for b in range(n_blocks)]

    if workers > 1 and n_blocks > 1:
        with ProcessPoolExecutor(max_workers=min(workers, n_blocks)) as pool:
            results = list(pool.map(_run_block, *zip(*arguments)))
    else:
        results = [_run_block(*args) for args in arguments]

    # Integer reduction, independent of scheduling
    f = np.sum([result[0] for result in results], axis=0, dtype=np.int64)
    w = np.sum([result[1] for result in results], axis=0, dtype=np.int64)
    raw = np.concatenate([result[2] for result in results]) if keep_raw else None
    return f, w, raw


def run_experiment(
    pnd: PhotonNumberDistribution,
    mux: MultiplexConfig,
    det: DetectorConfig,
    n_trials: int | None = None,
    seed: int = 0,
    keep_raw: bool = False,
    workers: int | None = None,
    block_size: int | None = None,
) -> ClickTable:
    """Repeats the experiment M times and records f_k and w_j (and the raw click matrix on request).

    Photon numbers are drawn from rho(n) conditioned on n <= n_max; the redistributed tail mass is recorded.
    """
    settings = get_settings()
    n_trials = settings.default_trials if n_trials is None else n_trials
    if n_trials < 1:
        raise ConfigurationError(f"need at least one trial, got M={n_trials}")
    q, q_loss = effective_click_weights(mux, det)

    if pnd.tail_mass > 0.0:
        logger.warning(
            f"Sampling rho(n) renormalized over n <= {pnd.n_max}; tail mass {pnd.tail_mass:.3e} redistributed.",
            extra={"tail_mass": pnd.tail_mass, "n_max": pnd.n_max},
        )

    start_time: float = perf_counter()
    f, w, raw = _run_blocks(
        n_trials,
        seed,
        pnd.conditioned,
        0,
        q,
        q_loss,
        det.nu,
        keep_raw,
        settings.workers if workers is None else workers,
        settings.block_size if block_size is None else block_size,
    )
    elapsed: float = perf_counter() - start_time
    engine_time_metric.labels("mc").observe(elapsed)
    trials_metric.inc(n_trials)
    logger.info(f"Simulated {n_trials} trials over {mux.n_modes} modes in {elapsed:.3f} seconds.", extra={"seed": seed})

    return ClickTable(n_modes=mux.n_modes, n_trials=n_trials, f=f, w=w, seed=seed, raw=raw, tail_mass=pnd.tail_mass)


def estimate_statistics(table: ClickTable) -> ClickStatistics:
    """Plug-in estimates c_k = f_k / M and p_j = w_j / M with their summary statistics."""
    k = np.arange(table.n_modes + 1)
    mean_c: float = int(k @ table.f) / table.n_trials
    return click_summary(table.f / table.n_trials, table.w / table.n_trials, provenance=Provenance.MONTE_CARLO, mean_c=mean_c)


def estimate_conditional_tables(
    mux: MultiplexConfig,
    det: DetectorConfig,
    n_max: int,
    trials_per_n: int,
    seed: int = 0,
    workers: int | None = None,
    block_size: int | None = None,
) -> ConditionalTables:
    """Monte Carlo estimates of C(k|n) and P(j|n), one independent run of ``trials_per_n`` trials per n."""
    settings = get_settings()
    if trials_per_n < 1:
        raise ConfigurationError(f"need at least one trial per photon number, got {trials_per_n}")
    q, q_loss = effective_click_weights(mux, det)

    c_given_n = np.empty((mux.n_modes + 1, n_max + 1))
    p_given_n = np.empty((mux.n_modes, n_max + 1))
    for n in range(n_max + 1):
        f, w, _ = _run_blocks(
            trials_per_n,
            # Streams keyed by (seed, n) so every column is reproducible on its own
            int(SeedSequence(seed, spawn_key=(n,)).generate_state(1)[0]),
            None,
            n,
            q,
            q_loss,
            det.nu,
            False,
            settings.workers if workers is None else workers,
            settings.block_size if block_size is None else block_size,
        )
        c_given_n[:, n] = f / trials_per_n
        p_given_n[:, n] = w / trials_per_n
    trials_metric.inc(trials_per_n * (n_max + 1))
    return ConditionalTables(c_given_n=c_given_n, p_given_n=p_given_n, provenance=Provenance.HYBRID)


def total_variation(c_a: np.ndarray, c_b: np.ndarray) -> float:
    """Total-variation distance between two click-count distributions."""
    return 0.5 * fsum(np.abs(np.asarray(c_a) - np.asarray(c_b)).tolist())


def _batched_statistic(f: np.ndarray, w: np.ndarray, n_trials: int, statistic: BootstrapStatistic, epsilon: float) -> np.ndarray:
    """Evaluates a statistic for every resample row of f (R x (N+1)) and w (R x N); degenerate rows give NaN."""
    n_modes: int = f.shape[1] - 1
    k = np.arange(n_modes + 1)
    c = f / n_trials
    mean_c = c @ k
    var_c = c @ (k**2) - mean_c**2
    var_c = np.maximum(var_c, 0.0)

    if statistic is BootstrapStatistic.MEAN_C:
        return mean_c
    if statistic is BootstrapStatistic.VAR_C:
        return var_c
    if statistic is BootstrapStatistic.QB:
        denominator = mean_c * (n_modes - mean_c)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(denominator > 0.0, n_modes * var_c / denominator - 1.0, np.nan)

    p = w / n_trials
    m = p.mean(axis=1)
    sigma_sq = p.var(axis=1)
    if statistic is BootstrapStatistic.M:
        return m
    if statistic is BootstrapStatistic.SIGMA_SQ:
        return sigma_sq
    denominator = mean_c * (n_modes - mean_c) - n_modes**2 * sigma_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denominator > epsilon, n_modes * var_c / denominator - 1.0, np.nan)


def bootstrap_stderr(
    table: ClickTable,
    statistic: BootstrapStatistic | str,
    resamples: int | None = None,
    seed: int = 0,
) -> float:
    """Standard deviation of a statistic over nonparametric resamples of the M trials.

    Rows are resampled through their distinct click patterns: drawing M rows with replacement is a multinomial
    draw over the observed patterns with weights count / M. Without the raw matrix only statistics of f_k
    can be bootstrapped.
    """
    settings = get_settings()
    statistic = BootstrapStatistic(statistic)
    resamples = settings.bootstrap_resamples if resamples is None else resamples
    if resamples < 1:
        raise ConfigurationError(f"need at least one resample, got {resamples}")
    rng: Generator = Generator(Philox(SeedSequence(seed)))
    n_trials: int = table.n_trials

    if table.raw is None:
        if statistic not in COUNT_STATISTICS:
            raise BootstrapUnavailableError(f"{statistic.value} needs per-trial rows; rerun with keep_raw")
        f_resampled = rng.multinomial(n_trials, table.f / n_trials, size=resamples)
        w_resampled = np.zeros((resamples, table.n_modes))
    else:
        patterns, counts = np.unique(table.raw, axis=0, return_counts=True)
        pattern_resampled = rng.multinomial(n_trials, counts / n_trials, size=resamples)
        one_hot = np.eye(table.n_modes + 1, dtype=np.int64)[patterns.sum(axis=1)]
        f_resampled = pattern_resampled @ one_hot
        w_resampled = pattern_resampled @ patterns.astype(np.int64)

    values: np.ndarray = _batched_statistic(f_resampled, w_resampled, n_trials, statistic, settings.denominator_epsilon)
    finite: np.ndarray = values[np.isfinite(values)]
    if finite.size == 0:
        raise DegenerateStatisticsError(f"bootstrap_{statistic.value}", float("nan"), "every bootstrap resample was degenerate")
    if finite.size < values.size:
        logger.warning(f"Dropped {values.size - finite.size} degenerate bootstrap resamples of {statistic.value}.")
    return float(finite.std())
