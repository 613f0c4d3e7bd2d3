from enum import StrEnum
from math import fsum
from typing import Annotated, Any, Self

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, computed_field, model_validator


def _frozen_array(dtype: type) -> Any:
    def convert(value: Any) -> np.ndarray:
        array: np.ndarray = np.array(value, dtype=dtype)
        array.setflags(write=False)
        return array

    return convert


FloatArray = Annotated[np.ndarray, BeforeValidator(_frozen_array(np.float64)), PlainSerializer(lambda a: a.tolist(), return_type=list)]
IntArray = Annotated[np.ndarray, BeforeValidator(_frozen_array(np.int64)), PlainSerializer(lambda a: a.tolist(), return_type=list)]
BoolArray = Annotated[np.ndarray, BeforeValidator(_frozen_array(np.bool_)), PlainSerializer(lambda a: a.astype(int).tolist(), return_type=list)]

# Rounding slack when checking that probabilities stay in [0, 1]
PROBABILITY_SLACK: float = 1e-12


class ValueModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class SourceFamily(StrEnum):
    COHERENT = "coherent"
    THERMAL = "thermal"
    FOCK = "fock"
    ODD_COHERENT = "odd_coherent"
    SPATS = "spats"
    CUSTOM = "custom"


class NetworkScheme(StrEnum):
    UNIFORM = "uniform"
    RING = "ring"
    CUSTOM = "custom"


class Provenance(StrEnum):
    EXACT = "exact"
    MONTE_CARLO = "mc"
    HYBRID = "hybrid"


class ErrorMessage(BaseModel):
    error: str = Field(description="Short error code")
    detail: str = Field(description="Detailed error explanation")


class PhotonNumberDistribution(ValueModel):
    probs: FloatArray = Field(description="Probabilities rho(n) for n = 0..n_max, not renormalized after truncation")
    family: SourceFamily = Field(description="State family the distribution was built from")
    params: dict[str, float] = Field(default_factory=dict, description="Family parameters, e.g. {'mean': 2.0}")
    tail_mass: float = Field(ge=0.0, lt=1.0, description="Probability mass beyond n_max, 1 - sum(probs)")

    @computed_field
    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    @property
    def conditioned(self) -> np.ndarray:
        """Probabilities conditioned on n <= n_max, the distribution both engines actually use."""
        return self.probs / (1.0 - self.tail_mass)

    @model_validator(mode="after")
    def _check(self) -> Self:
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise ValueError("probs must be a nonempty vector")
        if np.any(self.probs < 0.0):
            raise ValueError("probs must be nonnegative")
        if abs(fsum(self.probs.tolist()) + self.tail_mass - 1.0) > PROBABILITY_SLACK:
            raise ValueError("probs and tail_mass must sum to one")
        return self


class MultiplexConfig(ValueModel):
    weights: FloatArray = Field(description="Intensity fractions |u_j|^2 of the tracked modes j = 1..N")
    tail_loss: float = Field(default=0.0, ge=0.0, description="Intensity fraction routed to untracked modes")
    scheme: NetworkScheme = Field(default=NetworkScheme.CUSTOM, description="How the weights were produced")
    kappa: float | None = Field(default=None, description="Ring coupling strength, set for the ring scheme only")

    @property
    def n_modes(self) -> int:
        return len(self.weights)

    @model_validator(mode="after")
    def _check(self) -> Self:
        if self.weights.ndim != 1 or self.weights.size == 0:
            raise ValueError("a multiplexing network needs at least one mode")
        if np.any(self.weights < 0.0):
            raise ValueError("weights must be nonnegative")
        if abs(fsum(self.weights.tolist()) + self.tail_loss - 1.0) > 1e-9:
            raise ValueError("weights and tail_loss must sum to one")
        return self


class DetectorConfig(ValueModel):
    eta: FloatArray = Field(description="Overall quantum efficiency per mode, (1 - loss) * detection efficiency")
    nu: FloatArray = Field(description="Dark-count exponent per mode; exp(-nu) is the no-photon no-click probability")

    @property
    def n_modes(self) -> int:
        return len(self.eta)

    @classmethod
    def uniform(cls, n_modes: int, eta: float = 1.0, nu: float = 0.0) -> "DetectorConfig":
        return cls(eta=np.full(n_modes, eta), nu=np.full(n_modes, nu))

    @classmethod
    def from_loss(cls, gamma: Any, xi: Any, nu: Any = 0.0) -> "DetectorConfig":
        """Builds a detector from channel losses gamma_j and detection efficiencies xi_j."""
        gamma_arr, xi_arr, nu_arr = np.broadcast_arrays(
            np.atleast_1d(np.asarray(gamma, dtype=np.float64)),
            np.atleast_1d(np.asarray(xi, dtype=np.float64)),
            np.atleast_1d(np.asarray(nu, dtype=np.float64)),
        )
        if np.any((gamma_arr < 0.0) | (gamma_arr > 1.0)) or np.any((xi_arr < 0.0) | (xi_arr > 1.0)):
            raise ValueError("losses and detection efficiencies must lie in [0, 1]")
        return cls(eta=(1.0 - gamma_arr) * xi_arr, nu=nu_arr)

    @model_validator(mode="after")
    def _check(self) -> Self:
        if self.eta.ndim != 1 or self.eta.shape != self.nu.shape:
            raise ValueError("eta and nu must be vectors of equal length")
        if np.any((self.eta < 0.0) | (self.eta > 1.0)):
            raise ValueError("eta must lie in [0, 1]")
        if np.any(self.nu < 0.0):
            raise ValueError("nu must be nonnegative")
        return self


class ConditionalTables(ValueModel):
    c_given_n: FloatArray = Field(description="C(k|n), rows k = 0..N, columns n = 0..n_max")
    p_given_n: FloatArray = Field(description="P(j|n), rows j = 1..N, columns n = 0..n_max")
    provenance: Provenance = Field(default=Provenance.EXACT)

    @property
    def n_modes(self) -> int:
        return self.p_given_n.shape[0]

    @property
    def n_max(self) -> int:
        return self.c_given_n.shape[1] - 1

    @model_validator(mode="after")
    def _check(self) -> Self:
        n_rows, n_cols = self.c_given_n.shape
        if self.p_given_n.shape != (n_rows - 1, n_cols):
            raise ValueError("C(k|n) needs one more row than P(j|n) and the same columns")
        for name, table in (("C(k|n)", self.c_given_n), ("P(j|n)", self.p_given_n)):
            if np.any(table < -PROBABILITY_SLACK) or np.any(table > 1.0 + PROBABILITY_SLACK):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        if np.any(np.abs(self.c_given_n.sum(axis=0) - 1.0) > 1e-9):
            raise ValueError("every column of C(k|n) must sum to one")
        return self


class ClickStatistics(ValueModel):
    c: FloatArray = Field(description="c_k, probability of exactly k clicks, k = 0..N")
    p: FloatArray = Field(description="p_j, click probability of mode j, j = 1..N")
    mean_c: float = Field(description="<c>, mean number of clicks")
    var_c: float = Field(ge=0.0, description="<(dc)^2>, variance of the number of clicks")
    m: float = Field(ge=0.0, le=1.0, description="Average of the p_j")
    sigma_sq: float = Field(ge=0.0, description="Population variance of the p_j")
    provenance: Provenance = Field(default=Provenance.EXACT)

    @property
    def n_modes(self) -> int:
        return len(self.p)

    @model_validator(mode="after")
    def _check(self) -> Self:
        if self.c.shape != (len(self.p) + 1,):
            raise ValueError("c must have one entry per click count 0..N")
        if abs(fsum(self.c.tolist()) - 1.0) > 1e-9:
            raise ValueError("c_k must sum to one")
        if self.sigma_sq > self.m * (1.0 - self.m) + PROBABILITY_SLACK:
            raise ValueError("sigma_sq cannot exceed m(1 - m)")
        return self


class ClickTable(ValueModel):
    n_modes: int = Field(ge=1, description="Number of detected modes N")
    n_trials: int = Field(ge=1, description="Number of repetitions M")
    f: IntArray = Field(description="f_k, trials with exactly k clicks, k = 0..N")
    w: IntArray = Field(description="w_j, clicks in mode j across all trials")
    seed: int = Field(description="Root seed of the run")
    raw: BoolArray | None = Field(default=None, description="M x N click matrix, only kept on request")
    tail_mass: float = Field(default=0.0, ge=0.0, description="Source tail mass redistributed by the photon-number sampler")

    @model_validator(mode="after")
    def _check(self) -> Self:
        if self.f.shape != (self.n_modes + 1,) or self.w.shape != (self.n_modes,):
            raise ValueError("f needs N + 1 entries and w needs N entries")
        if int(self.f.sum()) != self.n_trials:
            raise ValueError("f_k must sum to the number of trials")
        if int(self.w.sum()) != int(np.arange(self.n_modes + 1) @ self.f):
            raise ValueError("sum of w_j must equal sum of k * f_k")
        if np.any(self.w < 0) or np.any(self.w > self.n_trials) or np.any(self.f < 0):
            raise ValueError("counts must lie in [0, M]")
        if self.raw is not None and self.raw.shape != (self.n_trials, self.n_modes):
            raise ValueError("raw click matrix must be M x N")
        return self


class QReport(ValueModel):
    q_m: float | None = Field(default=None, description="Mandel parameter, from the known photon statistics only")
    q_b: float = Field(description="Binomial parameter")
    q_pb: float = Field(ge=-1.0 - PROBABILITY_SLACK, description="Poisson-binomial parameter")
    provenance: Provenance
    stderr_pb: float | None = Field(default=None, description="Bootstrap standard error of q_pb")
    n_modes: int = Field(ge=1, description="N used in the Q_B and Q_PB denominators")


class StateSweepRow(ValueModel):
    state: SourceFamily
    mean_photon_number: float
    q_pb: float
    stderr_pb: float | None = None
    q_b: float

    def sort_key(self) -> tuple[str, float]:
        return (self.state.value, self.mean_photon_number)


class EfficiencySweepRow(ValueModel):
    state: SourceFamily
    mean_photon_number: float = Field(description="Fock number m or odd-coherent mean")
    eta: float
    n_trc: int
    q_pb: float
    stderr_pb: float | None = None

    def sort_key(self) -> tuple[str, float, float, int]:
        return (self.state.value, self.mean_photon_number, self.eta, self.n_trc)


class SpatsSweepRow(ValueModel):
    n_th: float
    eta: float
    n_trc: int
    q_pb: float
    stderr_pb: float | None = None
    q_m_closed: float
    q_b_closed: float | None = Field(default=None, description="Undefined for a single mode")

    def sort_key(self) -> tuple[float, float, int]:
        return (self.eta, self.n_trc, self.n_th)
