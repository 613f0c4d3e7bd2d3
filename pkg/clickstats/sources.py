"""Truncated photon-number distributions rho(n), n = 0..n_max, for the supported state families.

Distributions are never renormalized after truncation: the mass beyond ``n_max`` is carried in
``tail_mass`` and must stay below the configured tail tolerance. Terms are evaluated in log space
(``gammaln``) so that ``n_max`` can reach a few hundred without overflow.
"""

from collections.abc import Callable
from logging import Logger
from math import fsum, log, tanh

import numpy as np
from scipy.optimize import bisect
from scipy.special import gammaln, xlogy
from scipy.stats import poisson

from clickstats.config import Settings, get_settings
from clickstats.datamodel import PhotonNumberDistribution, SourceFamily
from clickstats.errors import ConfigurationError, TailToleranceError
from clickstats.logging import getLogger

logger: Logger = getLogger("clickstats.sources")

# Terms summed past n_max when a family has no closed-form tail
TAIL_WINDOW: int = 4096

Terms = Callable[[int], tuple[np.ndarray, float]]


def _truncate(
    family: SourceFamily,
    params: dict[str, float],
    terms: Terms,
    n_max: int | None,
    tail_tolerance: float | None,
    minimum_n_max: int = 0,
) -> PhotonNumberDistribution:
    settings: Settings = get_settings()
    tolerance: float = settings.tail_tolerance if tail_tolerance is None else tail_tolerance

    if n_max is not None:
        if n_max < 0:
            raise ConfigurationError(f"n_max must be nonnegative, got {n_max}")
        probs, tail = terms(n_max)
        if tail > tolerance:
            raise TailToleranceError(family.value, n_max, tail, tolerance)
        return PhotonNumberDistribution(probs=probs, family=family, params=params, tail_mass=tail)

    chosen: int = max(settings.default_n_max, minimum_n_max)
    probs, tail = terms(chosen)
    while tail > tolerance and chosen < settings.max_n_max:
        chosen = min(chosen + 10, settings.max_n_max)
        probs, tail = terms(chosen)
    if tail > tolerance:
        raise TailToleranceError(family.value, chosen, tail, tolerance)
    if chosen > settings.default_n_max:
        logger.info(
            f"Extended n_max to {chosen} for {family.value} source to keep tail mass below {tolerance:.1e}.",
            extra={"family": family.value, "n_max": chosen, "tail_mass": tail},
        )
    return PhotonNumberDistribution(probs=probs, family=family, params=params, tail_mass=tail)


def _series_tail(log_term: Callable[[np.ndarray], np.ndarray], n_max: int, probs: np.ndarray) -> float:
    """Sums the series beyond n_max; falls back to 1 - sum(probs) if the window is too short."""
    n = np.arange(n_max + 1, n_max + 1 + TAIL_WINDOW, dtype=np.float64)
    terms: np.ndarray = np.exp(log_term(n))
    if terms[-1] > 1e-20:
        return max(0.0, 1.0 - fsum(probs.tolist()))
    return fsum(terms.tolist())


def _check_mean(mean: float, family: str) -> None:
    if not mean >= 0.0:
        raise ConfigurationError(f"{family} mean photon number must be nonnegative, got {mean}")


def coherent_pnd(mean: float, n_max: int | None = None, tail_tolerance: float | None = None) -> PhotonNumberDistribution:
    """Poisson statistics rho(n) = exp(-mean) mean^n / n!."""
    _check_mean(mean, "coherent")

    def terms(order: int) -> tuple[np.ndarray, float]:
        n = np.arange(order + 1, dtype=np.float64)
        probs = np.exp(-mean + xlogy(n, mean) - gammaln(n + 1.0))
        return probs, float(poisson.sf(order, mean))

    return _truncate(SourceFamily.COHERENT, {"mean": mean}, terms, n_max, tail_tolerance)


def thermal_pnd(mean: float, n_max: int | None = None, tail_tolerance: float | None = None) -> PhotonNumberDistribution:
    """Bose-Einstein statistics rho(n) = mean^n / (1 + mean)^(n + 1)."""
    _check_mean(mean, "thermal")
    ratio: float = mean / (1.0 + mean)

    def terms(order: int) -> tuple[np.ndarray, float]:
        n = np.arange(order + 1, dtype=np.float64)
        probs = np.exp(xlogy(n, mean) - (n + 1.0) * np.log1p(mean))
        return probs, ratio ** (order + 1)

    return _truncate(SourceFamily.THERMAL, {"mean": mean}, terms, n_max, tail_tolerance)


def fock_pnd(m: int, n_max: int | None = None) -> PhotonNumberDistribution:
    """Point mass at n = m."""
    if m < 0:
        raise ConfigurationError(f"Fock photon number must be nonnegative, got {m}")
    if n_max is not None and m > n_max:
        raise ConfigurationError(f"Fock photon number {m} exceeds n_max={n_max}")

    def terms(order: int) -> tuple[np.ndarray, float]:
        probs = np.zeros(order + 1)
        probs[m] = 1.0
        return probs, 0.0

    return _truncate(SourceFamily.FOCK, {"m": float(m)}, terms, n_max, None, minimum_n_max=m)


def _log_sinh(x: float) -> float:
    return x + log(-np.expm1(-2.0 * x)) - log(2.0)


def odd_coherent_pnd(alpha_sq: float, n_max: int | None = None, tail_tolerance: float | None = None) -> PhotonNumberDistribution:
    """Odd-coherent state (|a> - |-a>)/sqrt(N-): rho(n) = |a|^2n / (n! sinh|a|^2) on odd n only."""
    if not alpha_sq > 0.0:
        raise ConfigurationError(f"odd-coherent |alpha|^2 must be positive, got {alpha_sq}")
    log_norm: float = _log_sinh(alpha_sq)

    def log_term(n: np.ndarray) -> np.ndarray:
        return np.where(n % 2 == 1, xlogy(n, alpha_sq) - gammaln(n + 1.0) - log_norm, -np.inf)

    def terms(order: int) -> tuple[np.ndarray, float]:
        probs = np.exp(log_term(np.arange(order + 1, dtype=np.float64)))
        return probs, _series_tail(log_term, order, probs)

    params: dict[str, float] = {"alpha_sq": alpha_sq, "mean": odd_coherent_mean(alpha_sq)}
    return _truncate(SourceFamily.ODD_COHERENT, params, terms, n_max, tail_tolerance)


def odd_coherent_mean(alpha_sq: float) -> float:
    """Mean photon number |a|^2 coth|a|^2 of the untruncated odd-coherent state."""
    return alpha_sq / tanh(alpha_sq)


def solve_odd_coherent_alpha(target_mean: float) -> float:
    """Finds |alpha|^2 whose odd-coherent state has the given mean photon number (> 1)."""
    if not target_mean > 1.0:
        raise ConfigurationError(f"odd-coherent mean photon number must exceed 1, got {target_mean}")

    lower, upper = 1e-9, max(10.0, 2.0 * target_mean)
    if odd_coherent_mean(lower) >= target_mean:
        raise ConfigurationError(f"odd-coherent mean {target_mean} is too close to its infimum 1 to resolve")

    alpha_sq: float = bisect(lambda a: odd_coherent_mean(a) - target_mean, lower, upper, xtol=1e-13, maxiter=500)
    logger.debug(f"Solved |alpha|^2={alpha_sq:.12g} for odd-coherent mean {target_mean}.")
    return alpha_sq


def odd_coherent_for_mean(mean: float, n_max: int | None = None, tail_tolerance: float | None = None) -> PhotonNumberDistribution:
    """Odd-coherent distribution indexed by its mean; mean = 1 gives the |alpha| -> 0 limit, a single photon."""
    if mean == 1.0:
        if n_max is not None and n_max < 1:
            raise ConfigurationError("the single-photon limit needs n_max >= 1")
        order: int = get_settings().default_n_max if n_max is None else n_max
        probs = np.zeros(max(order, 1) + 1)
        probs[1] = 1.0
        return PhotonNumberDistribution(
            probs=probs, family=SourceFamily.ODD_COHERENT, params={"alpha_sq": 0.0, "mean": 1.0}, tail_mass=0.0
        )
    return odd_coherent_pnd(solve_odd_coherent_alpha(mean), n_max, tail_tolerance)


def spats_pnd(n_th: float, n_max: int | None = None, tail_tolerance: float | None = None) -> PhotonNumberDistribution:
    """Single-photon-added thermal state: rho(n) = n / (n_th (n_th + 1)) * (n_th / (n_th + 1))^n."""
    _check_mean(n_th, "SPATS thermal")
    ratio: float = n_th / (1.0 + n_th)

    def terms(order: int) -> tuple[np.ndarray, float]:
        if n_th == 0.0:
            # Limit of the formula: a single photon
            probs = np.zeros(max(order, 1) + 1)
            probs[1] = 1.0
            return probs, 0.0
        n = np.arange(order + 1, dtype=np.float64)
        with np.errstate(divide="ignore"):
            log_probs = np.log(n) + (n - 1.0) * log(ratio) + 2.0 * np.log1p(-ratio)
        # Closed form of sum_{n > order} n (1 - x)^2 x^(n - 1)
        tail: float = ratio**order * ((order + 1) - order * ratio)
        return np.exp(log_probs), tail

    return _truncate(SourceFamily.SPATS, {"n_th": n_th}, terms, n_max, tail_tolerance, minimum_n_max=1)


def custom_pnd(probs: list[float] | np.ndarray, tail_tolerance: float | None = None) -> PhotonNumberDistribution:
    """User-supplied rho(n); whatever the entries leave below one becomes the tail mass."""
    values = np.asarray(probs, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ConfigurationError("a custom distribution needs at least one probability")
    if np.any(values < 0.0):
        raise ConfigurationError("custom probabilities must be nonnegative")
    total: float = fsum(values.tolist())
    if total > 1.0 + 1e-12:
        raise ConfigurationError(f"custom probabilities sum to {total:.15g} > 1")
    tail: float = max(0.0, 1.0 - total)
    tolerance: float = get_settings().tail_tolerance if tail_tolerance is None else tail_tolerance
    if tail > tolerance:
        raise TailToleranceError(SourceFamily.CUSTOM.value, values.size - 1, tail, tolerance)
    return PhotonNumberDistribution(probs=values, family=SourceFamily.CUSTOM, params={}, tail_mass=tail)


def build(family: SourceFamily | str, parameter: float, n_max: int | None = None) -> PhotonNumberDistribution:
    """Constructs a distribution from its family and single scalar parameter (mean, m or n_th)."""
    match SourceFamily(family):
        case SourceFamily.COHERENT:
            return coherent_pnd(parameter, n_max)
        case SourceFamily.THERMAL:
            return thermal_pnd(parameter, n_max)
        case SourceFamily.FOCK:
            if parameter != int(parameter):
                raise ConfigurationError(f"Fock photon number must be an integer, got {parameter}")
            return fock_pnd(int(parameter), n_max)
        case SourceFamily.ODD_COHERENT:
            return odd_coherent_for_mean(parameter, n_max)
        case SourceFamily.SPATS:
            return spats_pnd(parameter, n_max)
        case SourceFamily.CUSTOM:
            raise ConfigurationError("custom distributions are built from a probability list, use custom_pnd")


def moments(pnd: PhotonNumberDistribution) -> tuple[float, float]:
    """Mean and variance of the photon number over the truncated support."""
    n = np.arange(pnd.n_max + 1, dtype=np.float64)
    mean: float = fsum((n * pnd.probs).tolist())
    variance: float = fsum(((n - mean) ** 2 * pnd.probs).tolist())
    return mean, variance
