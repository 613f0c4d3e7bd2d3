"""Multiplexing networks (intensity weights |u_j|^2) and their pairing with a detector array."""

from math import fsum

import numpy as np

from clickstats.datamodel import DetectorConfig, MultiplexConfig, NetworkScheme
from clickstats.errors import ConfigurationError


def uniform_splitter(n_modes: int) -> MultiplexConfig:
    """Balanced splitter: every mode receives 1/N of the intensity."""
    if n_modes < 1:
        raise ConfigurationError(f"a splitter needs at least one mode, got {n_modes}")
    return MultiplexConfig(weights=np.full(n_modes, 1.0 / n_modes), tail_loss=0.0, scheme=NetworkScheme.UNIFORM)


def ring_resonator(kappa: float, n_trc: int) -> MultiplexConfig:
    """Time-bin pulses of a ring resonator coupled to a waveguide, truncated to the first n_trc pulses.

    The first pulse carries 1 - kappa, pulse j >= 2 carries kappa^2 (1 - kappa)^(j - 2). The pulses that are
    not detected, kappa (1 - kappa)^(n_trc - 1) in total, are kept as ``tail_loss``.
    """
    if not 0.0 < kappa < 1.0:
        raise ConfigurationError(f"ring coupling kappa must lie in (0, 1), got {kappa}")
    if n_trc < 1:
        raise ConfigurationError(f"at least one ring output pulse must be detected, got n_trc={n_trc}")

    j = np.arange(2, n_trc + 1, dtype=np.float64)
    weights = np.concatenate(([1.0 - kappa], kappa**2 * (1.0 - kappa) ** (j - 2.0)))
    tail_loss: float = kappa * (1.0 - kappa) ** (n_trc - 1)
    return MultiplexConfig(weights=weights, tail_loss=tail_loss, scheme=NetworkScheme.RING, kappa=kappa)


def custom_config(weights: list[float] | np.ndarray, tail_loss: float = 0.0) -> MultiplexConfig:
    """Arbitrary weights; they are validated, never renormalized."""
    values = np.asarray(weights, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ConfigurationError("a custom network needs at least one weight")
    if np.any(values < 0.0) or tail_loss < 0.0:
        raise ConfigurationError("weights and tail_loss must be nonnegative")
    total: float = fsum(values.tolist()) + tail_loss
    if abs(total - 1.0) > 1e-9:
        raise ConfigurationError(f"weights plus tail_loss sum to {total:.12g}, expected 1")
    return MultiplexConfig(weights=values, tail_loss=tail_loss, scheme=NetworkScheme.CUSTOM)


def effective_click_weights(mux: MultiplexConfig, det: DetectorConfig) -> tuple[np.ndarray, float]:
    """Per-photon probabilities q_j = |u_j|^2 eta_j of a detection in mode j, and q_loss of no detection at all."""
    if mux.n_modes != det.n_modes:
        raise ConfigurationError(f"network has {mux.n_modes} modes but the detector array has {det.n_modes}")
    q: np.ndarray = mux.weights * det.eta
    q_loss: float = min(1.0, max(0.0, 1.0 - fsum(q.tolist())))
    return q, q_loss


def is_balanced(mux: MultiplexConfig, det: DetectorConfig) -> bool:
    """True when every mode has the same weight, efficiency and dark-count exponent."""
    return bool(np.ptp(mux.weights) <= 1e-15 and np.ptp(det.eta) <= 1e-15 and np.ptp(det.nu) <= 1e-15)


def permuted(mux: MultiplexConfig, det: DetectorConfig, order: list[int] | np.ndarray) -> tuple[MultiplexConfig, DetectorConfig]:
    """Relabels the modes; weights and detector entries move together."""
    index = np.asarray(order)
    if sorted(index.tolist()) != list(range(mux.n_modes)):
        raise ConfigurationError("order must be a permutation of the mode indices")
    return (
        MultiplexConfig(weights=mux.weights[index], tail_loss=mux.tail_loss, scheme=NetworkScheme.CUSTOM),
        DetectorConfig(eta=det.eta[index], nu=det.nu[index]),
    )
