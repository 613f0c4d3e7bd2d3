"""Engine dispatch and the parameter sweeps behind the ``sweep-*`` commands.

Every grid point is evaluated independently. Monte Carlo points draw from a seed derived from the root seed and
the point's position in the grid, so rows do not depend on the worker count. Rows are sorted by their grid
coordinates before they are returned.
"""

from concurrent.futures import ProcessPoolExecutor
from logging import Logger
from time import perf_counter
from typing import NamedTuple

import numpy as np
from numpy.random import SeedSequence

from clickstats import exact, montecarlo, network, sources, stats
from clickstats.config import EngineSpec, get_settings
from clickstats.datamodel import (
    ClickStatistics,
    ClickTable,
    DetectorConfig,
    EfficiencySweepRow,
    MultiplexConfig,
    PhotonNumberDistribution,
    QReport,
    SourceFamily,
    SpatsSweepRow,
    StateSweepRow,
)
from clickstats.errors import ConfigurationError, DegenerateStatisticsError
from clickstats.logging import getLogger
from clickstats.metrics import degenerate_metric, engine_time_metric, sweep_points_metric, trials_metric

logger: Logger = getLogger("clickstats.sweeps")

DEFAULT_KAPPA: float = 0.6
DEFAULT_MEANS: tuple[float, ...] = tuple(round(0.5 * i, 10) for i in range(1, 11))
DEFAULT_FOCK_NUMBERS: tuple[int, ...] = (1, 2, 3, 4, 5)
DEFAULT_EFFICIENCY_STATES: tuple[tuple[SourceFamily, float], ...] = tuple(
    (family, float(value)) for family in (SourceFamily.FOCK, SourceFamily.ODD_COHERENT) for value in (1, 2, 3)
)
DEFAULT_ETAS: tuple[float, ...] = tuple(round(0.1 * i, 10) for i in range(1, 11))
DEFAULT_N_TRCS: tuple[int, ...] = tuple(range(1, 21))
DEFAULT_SPATS_N_THS: tuple[float, ...] = tuple(round(0.05 * i, 10) for i in range(1, 61))
DEFAULT_SPATS_ETAS: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
DEFAULT_SPATS_N_TRCS: tuple[int, ...] = (1, 2, 5, 8, 10)


class Evaluation(NamedTuple):
    statistics: ClickStatistics
    report: QReport
    table: ClickTable | None


def point_seed(root_seed: int, index: int) -> int:
    """Seed of grid point ``index``, a pure function of the root seed and the index."""
    return int(SeedSequence(root_seed, spawn_key=(index,)).generate_state(1, dtype=np.uint64)[0] >> 1)


def run_engine(
    pnd: PhotonNumberDistribution,
    mux: MultiplexConfig,
    det: DetectorConfig,
    engine: EngineSpec,
    seed: int | None = None,
    workers: int | None = None,
) -> Evaluation:
    """Runs the selected engine on one configuration and evaluates the witnesses.

    The Monte Carlo engine also reports the bootstrap standard error of Q_PB; the click matrix it needs is
    returned only when ``engine.keep_raw`` is set.
    """
    seed = engine.seed if seed is None else seed
    match engine.kind:
        case "exact":
            statistics = exact.exact_click_statistics(pnd, mux, det)
            return Evaluation(statistics, stats.build_report(statistics, pnd), None)
        case "hybrid":
            tables = montecarlo.estimate_conditional_tables(mux, det, pnd.n_max, engine.trials_per_n, seed, workers)
            statistics = exact.mix_tables(tables, pnd)
            return Evaluation(statistics, stats.build_report(statistics, pnd), None)
        case "mc":
            table = montecarlo.run_experiment(pnd, mux, det, engine.trials, seed, keep_raw=True, workers=workers)
            statistics = montecarlo.estimate_statistics(table)
            # Witnesses first, so a degenerate run reports its own guard
            report = stats.build_report(statistics, pnd)
            stderr_pb = montecarlo.bootstrap_stderr(table, montecarlo.BootstrapStatistic.QPB, engine.bootstrap_resamples, seed)
            report = report.model_copy(update={"stderr_pb": stderr_pb})
            if not engine.keep_raw:
                table = table.model_copy(update={"raw": None})
            return Evaluation(statistics, report, table)
        case _:
            raise ConfigurationError(f"unknown engine {engine.kind!r}")


class PointResult(NamedTuple):
    report: QReport
    elapsed: float
    trials: int


def _ring_point(
    family: SourceFamily,
    parameter: float,
    kappa: float,
    eta: float,
    n_trc: int,
    engine: EngineSpec,
    seed: int,
    n_max: int | None,
) -> PointResult:
    start_time: float = perf_counter()
    pnd = sources.build(family, parameter, n_max)
    mux = network.ring_resonator(kappa, n_trc)
    det = DetectorConfig.uniform(mux.n_modes, eta)
    report: QReport = run_engine(pnd, mux, det, engine, seed, workers=1).report

    match engine.kind:
        case "mc":
            trials: int = engine.trials or get_settings().default_trials
        case "hybrid":
            trials = engine.trials_per_n * (pnd.n_max + 1)
        case _:
            trials = 0
    return PointResult(report, perf_counter() - start_time, trials)


def _evaluate_points(sweep: str, points: list[tuple], engine: EngineSpec, workers: int | None) -> list[QReport]:
    workers = get_settings().workers if workers is None else workers
    logger.info(f"Evaluating {len(points)} {sweep} points with the {engine.kind} engine on {workers} workers.")

    if workers > 1 and len(points) > 1:
        try:
            with ProcessPoolExecutor(max_workers=min(workers, len(points))) as pool:
                results: list[PointResult] = list(pool.map(_ring_point, *zip(*points)))
        except DegenerateStatisticsError as e:
            degenerate_metric.labels(e.guard).inc()
            raise
        # Metrics recorded inside worker processes are lost with them
        for result in results:
            engine_time_metric.labels(engine.kind).observe(result.elapsed)
            trials_metric.inc(result.trials)
    else:
        results = [_ring_point(*point) for point in points]

    sweep_points_metric.labels(sweep, engine.kind).inc(len(points))
    return [result.report for result in results]


def sweep_states(
    means: tuple[float, ...] | list[float] = DEFAULT_MEANS,
    fock_numbers: tuple[int, ...] | list[int] = DEFAULT_FOCK_NUMBERS,
    kappa: float = DEFAULT_KAPPA,
    eta: float = 1.0,
    n_trc: int = 10,
    engine: EngineSpec | None = None,
    seed: int = 0,
    workers: int | None = None,
    n_max: int | None = None,
) -> list[StateSweepRow]:
    """Q_PB and Q_B against the mean photon number for coherent, thermal, Fock and odd-coherent inputs."""
    engine = engine or EngineSpec()
    if not means and not fock_numbers:
        raise ConfigurationError("the state sweep needs a nonempty grid")

    grid: list[tuple[SourceFamily, float]] = []
    for family in (SourceFamily.COHERENT, SourceFamily.THERMAL, SourceFamily.ODD_COHERENT):
        for mean in means:
            if family is SourceFamily.ODD_COHERENT and mean < 1.0:
                logger.debug(f"Skipping odd-coherent point at mean {mean}, below the attainable minimum of 1.")
                continue
            grid.append((family, float(mean)))
    grid.extend((SourceFamily.FOCK, float(m)) for m in fock_numbers)

    points = [(family, value, kappa, eta, n_trc, engine, point_seed(seed, index), n_max) for index, (family, value) in enumerate(grid)]
    reports = _evaluate_points("states", points, engine, workers)
    rows = [
        StateSweepRow(state=family, mean_photon_number=value, q_pb=report.q_pb, stderr_pb=report.stderr_pb, q_b=report.q_b)
        for (family, value), report in zip(grid, reports)
    ]
    return sorted(rows, key=StateSweepRow.sort_key)


def sweep_efficiency(
    states: tuple[tuple[SourceFamily, float], ...] | list[tuple[SourceFamily, float]] = DEFAULT_EFFICIENCY_STATES,
    etas: tuple[float, ...] | list[float] = DEFAULT_ETAS,
    n_trcs: tuple[int, ...] | list[int] = DEFAULT_N_TRCS,
    kappa: float = DEFAULT_KAPPA,
    engine: EngineSpec | None = None,
    seed: int = 0,
    workers: int | None = None,
    n_max: int | None = None,
) -> list[EfficiencySweepRow]:
    """Q_PB over the (eta, N_trc) plane for each requested state."""
    engine = engine or EngineSpec()
    if not (states and etas and n_trcs):
        raise ConfigurationError("the efficiency sweep needs a nonempty grid")

    grid: list[tuple[SourceFamily, float, float, int]] = [
        (SourceFamily(family), float(value), float(eta), int(n_trc)) for family, value in states for eta in etas for n_trc in n_trcs
    ]
    points = [
        (family, value, kappa, eta, n_trc, engine, point_seed(seed, index), n_max) for index, (family, value, eta, n_trc) in enumerate(grid)
    ]
    reports = _evaluate_points("efficiency", points, engine, workers)
    rows = [
        EfficiencySweepRow(state=family, mean_photon_number=value, eta=eta, n_trc=n_trc, q_pb=report.q_pb, stderr_pb=report.stderr_pb)
        for (family, value, eta, n_trc), report in zip(grid, reports)
    ]
    return sorted(rows, key=EfficiencySweepRow.sort_key)


def sweep_spats(
    n_ths: tuple[float, ...] | list[float] = DEFAULT_SPATS_N_THS,
    etas: tuple[float, ...] | list[float] = DEFAULT_SPATS_ETAS,
    n_trcs: tuple[int, ...] | list[int] = DEFAULT_SPATS_N_TRCS,
    kappa: float = DEFAULT_KAPPA,
    engine: EngineSpec | None = None,
    seed: int = 0,
    workers: int | None = None,
    n_max: int | None = None,
) -> list[SpatsSweepRow]:
    """Q_PB of single-photon-added thermal states next to the closed-form Q_M and Q_B."""
    engine = engine or EngineSpec()
    if not (n_ths and etas and n_trcs):
        raise ConfigurationError("the SPATS sweep needs a nonempty grid")

    grid: list[tuple[float, float, int]] = [(float(n_th), float(eta), int(n_trc)) for eta in etas for n_trc in n_trcs for n_th in n_ths]
    points = [
        (SourceFamily.SPATS, n_th, kappa, eta, n_trc, engine, point_seed(seed, index), n_max) for index, (n_th, eta, n_trc) in enumerate(grid)
    ]
    reports = _evaluate_points("spats", points, engine, workers)
    rows = [
        SpatsSweepRow(
            n_th=n_th,
            eta=eta,
            n_trc=n_trc,
            q_pb=report.q_pb,
            stderr_pb=report.stderr_pb,
            q_m_closed=stats.spats_qm_closed(n_th, eta),
            q_b_closed=stats.spats_qb_closed(n_th, eta, n_trc) if n_trc >= 2 else None,
        )
        for (n_th, eta, n_trc), report in zip(grid, reports)
    ]
    return sorted(rows, key=SpatsSweepRow.sort_key)
