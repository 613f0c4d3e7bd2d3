"""Nonclassicality witnesses Q_M, Q_B and Q_PB, and closed forms for single-photon-added thermal states."""

from math import fsum

import numpy as np

from clickstats.config import get_settings
from clickstats.datamodel import ClickStatistics, PhotonNumberDistribution, Provenance, QReport
from clickstats.errors import ConfigurationError, DegenerateStatisticsError
from clickstats.metrics import degenerate_metric
from clickstats.sources import moments


def _degenerate(guard: str, value: float, reason: str) -> DegenerateStatisticsError:
    degenerate_metric.labels(guard).inc()
    return DegenerateStatisticsError(guard, value, reason)


def click_summary(
    c: np.ndarray,
    p: np.ndarray,
    provenance: Provenance = Provenance.EXACT,
    mean_c: float | None = None,
) -> ClickStatistics:
    """Builds <c>, <(dc)^2>, m and sigma^2 from c_k and p_j.

    ``mean_c`` may be passed when it is known exactly, e.g. from integer counts.
    """
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    p = np.clip(np.asarray(p, dtype=np.float64), 0.0, 1.0)
    k = np.arange(len(c), dtype=np.float64)

    if mean_c is None:
        mean_c = fsum((k * c).tolist())
    var_c: float = fsum(((k - mean_c) ** 2 * c).tolist())
    m: float = fsum(p.tolist()) / len(p)
    # Population variance, no Bessel correction
    sigma_sq: float = fsum(((p - m) ** 2).tolist()) / len(p)
    return ClickStatistics(c=c, p=p, mean_c=mean_c, var_c=var_c, m=m, sigma_sq=sigma_sq, provenance=provenance)


def mandel_q(mean_n: float, var_n: float) -> float:
    """Q_M = <(dn)^2> / <n> - 1."""
    if not mean_n > 0.0:
        raise _degenerate("mandel_mean", mean_n, "Mandel parameter is undefined for a zero mean photon number")
    return var_n / mean_n - 1.0


def _check_clicks(mean_c: float, n_modes: int) -> None:
    if not mean_c > 0.0:
        raise _degenerate("no_clicks", mean_c, "no clicks observed, <c> = 0")
    if not mean_c < n_modes:
        raise _degenerate("saturated", mean_c, f"every mode clicked in every trial, <c> = N = {n_modes}")


def binomial_q(stats: ClickStatistics, n_modes: int | None = None) -> float:
    """Q_B = N <(dc)^2> / (<c>(N - <c>)) - 1, valid for balanced multiplexing."""
    n: int = stats.n_modes if n_modes is None else n_modes
    _check_clicks(stats.mean_c, n)
    return n * stats.var_c / (stats.mean_c * (n - stats.mean_c)) - 1.0


def poisson_binomial_q(stats: ClickStatistics, n_modes: int | None = None, epsilon: float | None = None) -> float:
    """Q_PB = N <(dc)^2> / (<c>(N - <c>) - N^2 sigma^2) - 1, valid for arbitrary multiplexing."""
    n: int = stats.n_modes if n_modes is None else n_modes
    eps: float = get_settings().denominator_epsilon if epsilon is None else epsilon
    _check_clicks(stats.mean_c, n)

    denominator: float = stats.mean_c * (n - stats.mean_c) - n * n * stats.sigma_sq
    if denominator <= eps:
        raise _degenerate(
            "poisson_binomial_denominator",
            denominator,
            "Poisson-binomial denominator <c>(N - <c>) - N^2 sigma^2 vanishes; every p_j is 0 or 1",
        )
    return n * stats.var_c / denominator - 1.0


def build_report(
    stats: ClickStatistics,
    pnd: PhotonNumberDistribution | None = None,
    stderr_pb: float | None = None,
    n_modes: int | None = None,
) -> QReport:
    """Evaluates all witnesses; Q_M comes from the known photon statistics, never from clicks."""
    n: int = stats.n_modes if n_modes is None else n_modes
    q_b: float = binomial_q(stats, n)
    q_pb: float = poisson_binomial_q(stats, n)

    q_m: float | None = None
    if pnd is not None:
        mean_n, var_n = moments(pnd)
        if mean_n > 0.0:
            q_m = mandel_q(mean_n, var_n)
    return QReport(q_m=q_m, q_b=q_b, q_pb=q_pb, provenance=stats.provenance, stderr_pb=stderr_pb, n_modes=n)


def spats_no_click(lam: float | np.ndarray, n_th: float) -> float | np.ndarray:
    """I(lam) = (1 - lam) / (1 + lam n_th)^2, the SPATS probability that a fraction lam of the light stays dark."""
    return (1.0 - lam) / (1.0 + lam * n_th) ** 2


def spats_qm_closed(n_th: float, eta: float) -> float:
    """Q_M = eta (n_th^2 - 1/2) / (n_th + 1/2) of a SPATS after losses eta."""
    if n_th < 0.0 or not 0.0 <= eta <= 1.0:
        raise ConfigurationError(f"need n_th >= 0 and eta in [0, 1], got n_th={n_th}, eta={eta}")
    return eta * (n_th**2 - 0.5) / (n_th + 0.5)


def spats_qb_closed(n_th: float, eta: float, n_modes: int) -> float:
    """Q_B of a SPATS behind a balanced N-mode splitter with efficiency eta."""
    if n_modes < 2:
        raise ConfigurationError(f"the binomial closed form needs at least two modes, got {n_modes}")
    if n_th < 0.0 or not 0.0 < eta <= 1.0:
        raise ConfigurationError(f"need n_th >= 0 and eta in (0, 1], got n_th={n_th}, eta={eta}")

    single: float = float(spats_no_click(eta / n_modes, n_th))
    pair: float = float(spats_no_click(2.0 * eta / n_modes, n_th))
    if single <= 0.0 or single >= 1.0:
        raise _degenerate("spats_no_click", single, "SPATS no-click probability is 0 or 1")
    return (n_modes - 1) * (pair - single**2) / (single * (1.0 - single))
