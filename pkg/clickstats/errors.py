"""Typed errors raised by clickstats.

Every numerical guard raises one of these instead of returning NaN or infinity. The CLI maps
:class:`ConfigurationError` to exit code 2 and :class:`DegenerateStatisticsError` to exit code 3.
"""


class ClickStatsError(ValueError):
    """Base class for all clickstats errors."""

    code: str = "ClickStatsError"


class ConfigurationError(ClickStatsError):
    """A configuration value or parameter lies outside its domain."""

    code = "ConfigurationError"


class TailToleranceError(ClickStatsError):
    """The probability mass beyond the truncation order exceeds the configured tolerance."""

    code = "TailToleranceError"

    def __init__(self, family: str, n_max: int, tail_mass: float, tolerance: float) -> None:
        self.family = family
        self.n_max = n_max
        self.tail_mass = tail_mass
        self.tolerance = tolerance
        super().__init__(
            f"{family} distribution truncated at n_max={n_max} leaves tail mass {tail_mass:.3e} "
            f"above tolerance {tolerance:.1e}; increase n_max"
        )

    def __reduce__(self):
        return self.__class__, (self.family, self.n_max, self.tail_mass, self.tolerance)


class DegenerateStatisticsError(ClickStatsError):
    """A witness cannot be evaluated because its denominator vanishes."""

    code = "DegenerateStatisticsError"

    def __init__(self, guard: str, value: float, reason: str) -> None:
        self.guard = guard
        self.value = value
        self.reason = reason
        super().__init__(f"{reason} [guard={guard}, value={value:.6g}]")

    # Worker processes send exceptions back pickled
    def __reduce__(self):
        return self.__class__, (self.guard, self.value, self.reason)


class EngineCapacityError(ClickStatsError):
    """The requested computation exceeds what the selected engine can enumerate."""

    code = "EngineCapacityError"


class BootstrapUnavailableError(ClickStatsError):
    """The requested statistic needs per-trial rows that were not retained."""

    code = "BootstrapUnavailableError"
