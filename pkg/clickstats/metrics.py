from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Histogram, Info, write_to_textfile

# Commands are short-lived, so metrics go to a text file for a node-exporter style collector
registry: CollectorRegistry = CollectorRegistry()

trials_metric: Counter = Counter(
    name="simulated_trials",
    documentation="Monte Carlo trials simulated",
    registry=registry,
)
sweep_points_metric: Counter = Counter(
    name="sweep_points",
    documentation="Sweep grid points evaluated",
    labelnames=["sweep", "engine"],
    registry=registry,
)
engine_time_metric: Histogram = Histogram(
    name="engine_time",
    documentation="Time taken to produce click statistics",
    labelnames=["engine"],
    unit="seconds",
    buckets=[0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 60.0],
    registry=registry,
)
degenerate_metric: Counter = Counter(
    name="degenerate_statistics",
    documentation="Witness evaluations rejected by a degenerate-statistics guard",
    labelnames=["guard"],
    registry=registry,
)
info_metric: Info = Info(
    name="app_info",
    documentation="Information about the clickstats installation",
    registry=registry,
)


def write_metrics(path: Path) -> None:
    """Write all metrics in the Prometheus text format."""
    from clickstats.version import get_version

    info_metric.info({"version": get_version()})
    write_to_textfile(str(path), registry)
