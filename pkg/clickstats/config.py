from functools import lru_cache
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
import yaml
from pydantic import AliasChoices, BaseModel, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict, YamlConfigSettingsSource

from clickstats.errors import ClickStatsError, ConfigurationError


class Settings(BaseSettings):
    default_n_max: int = Field(
        default=30,
        ge=0,
        description="Truncation order n_max used when a source does not set one; grown automatically until the tail fits the tolerance.",
    )
    max_n_max: int = Field(
        default=400,
        ge=1,
        description="Upper bound for the automatic growth of n_max.",
    )
    tail_tolerance: float = Field(
        default=1e-6,
        gt=0.0,
        lt=1.0,
        description="Largest probability mass a truncated photon-number distribution may leave beyond n_max.",
    )
    subset_cap: int = Field(
        default=20,
        ge=1,
        le=24,
        description="Largest mode count the exact engine accepts for an unbalanced network.",
    )
    denominator_epsilon: float = Field(
        default=1e-12,
        gt=0.0,
        description="Smallest Q_PB denominator accepted before the statistics are declared degenerate.",
    )
    default_trials: int = Field(
        default=1_000_000,
        ge=1,
        description="Number of Monte Carlo repetitions M when an experiment does not set one.",
    )
    block_size: int = Field(
        default=65_536,
        ge=1,
        description="Trials per random-number block; each block owns a stream keyed by (seed, block index).",
    )
    bootstrap_resamples: int = Field(
        default=200,
        ge=1,
        description="Number of bootstrap resamples for Monte Carlo standard errors.",
    )
    workers: int = Field(
        default=1,
        ge=1,
        description="Default number of worker processes for Monte Carlo blocks and sweep points.",
    )
    log_config: Path | None = Field(
        default=None,
        description="Path to a logging dictConfig YAML file; the packaged logconf.yaml is used if unset.",
    )
    metrics_file: Path | None = Field(
        default=None,
        description="If set, Prometheus metrics are written to this file when a command finishes.",
    )

    # pydantic_settings configuration starts here
    model_config = SettingsConfigDict(
        env_prefix="CLICKSTATS_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_ignore_empty=True,
        env_nested_delimiter="__",
        yaml_file="clickstats.yaml",
        yaml_file_encoding="utf-8",
        extra="ignore",
    )

    # Environment beats the YAML file, which beats .env
    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (
            init_settings,
            env_settings,
            YamlConfigSettingsSource(settings_cls),
            dotenv_settings,
        )

    @model_validator(mode="after")
    def validate_n_max_range(self) -> "Settings":
        if self.max_n_max < self.default_n_max:
            raise ValueError("max_n_max must not be smaller than default_n_max")
        return self


@lru_cache
def get_settings() -> Settings:
    """Get the clickstats runtime settings."""
    return Settings()


# ---------------------------------------------------------------------------
# Experiment files
# ---------------------------------------------------------------------------

FloatOrList = float | list[float]


class CoherentSource(BaseModel):
    family: Literal["coherent"]
    mean: float = Field(ge=0.0, description="Mean photon number")
    n_max: int | None = Field(default=None, ge=0)


class ThermalSource(BaseModel):
    family: Literal["thermal"]
    mean: float = Field(ge=0.0, description="Mean photon number")
    n_max: int | None = Field(default=None, ge=0)


class FockSource(BaseModel):
    family: Literal["fock"]
    m: int = Field(ge=0, description="Photon number of the Fock state")
    n_max: int | None = Field(default=None, ge=0)


class OddCoherentSource(BaseModel):
    family: Literal["odd_coherent"]
    alpha_sq: float | None = Field(default=None, gt=0.0, description="|alpha|^2")
    mean: float | None = Field(default=None, ge=1.0, description="Mean photon number, alternative to alpha_sq")
    n_max: int | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def validate_parametrization(self) -> "OddCoherentSource":
        if (self.alpha_sq is None) == (self.mean is None):
            raise ValueError("set exactly one of alpha_sq and mean")
        return self


class SpatsSource(BaseModel):
    family: Literal["spats"]
    n_th: float = Field(ge=0.0, description="Mean thermal photon number")
    n_max: int | None = Field(default=None, ge=0)


class CustomSource(BaseModel):
    family: Literal["custom"]
    probs: list[float] = Field(min_length=1, description="rho(n) for n = 0..n_max")


SourceSpec = Annotated[
    CoherentSource | ThermalSource | FockSource | OddCoherentSource | SpatsSource | CustomSource,
    Field(discriminator="family"),
]


class UniformNetwork(BaseModel):
    scheme: Literal["uniform"]
    n_modes: int = Field(ge=1, validation_alias=AliasChoices("n_modes", "N"))


class RingNetwork(BaseModel):
    scheme: Literal["ring"]
    kappa: float = Field(gt=0.0, lt=1.0, description="Coupling strength of the ring resonator")
    n_trc: int = Field(ge=1, description="Number of detected output pulses")


class CustomNetwork(BaseModel):
    scheme: Literal["custom"]
    weights: list[float] = Field(min_length=1)
    tail_loss: float = Field(default=0.0, ge=0.0)


NetworkSpec = Annotated[UniformNetwork | RingNetwork | CustomNetwork, Field(discriminator="scheme")]


class DetectorSpec(BaseModel):
    eta: FloatOrList | None = Field(default=None, description="Overall efficiency, scalar (broadcast) or per mode")
    loss: FloatOrList | None = Field(default=None, description="Channel loss gamma, combined with detection_efficiency")
    detection_efficiency: FloatOrList | None = Field(default=None, description="Detector efficiency xi")
    nu: FloatOrList = Field(default=0.0, description="Dark-count exponent, scalar (broadcast) or per mode")

    @model_validator(mode="after")
    def validate_parametrization(self) -> "DetectorSpec":
        if self.eta is not None and (self.loss is not None or self.detection_efficiency is not None):
            raise ValueError("set either eta or loss/detection_efficiency, not both")
        return self


class EngineSpec(BaseModel):
    kind: Literal["exact", "mc", "hybrid"] = Field(default="exact", validation_alias=AliasChoices("kind", "engine"))
    trials: int | None = Field(default=None, ge=1, description="Monte Carlo repetitions M")
    seed: int = Field(default=0, ge=0, description="Root seed for the Monte Carlo engines")
    keep_raw: bool = Field(default=False, description="Keep the M x N click matrix")
    trials_per_n: int = Field(default=100_000, ge=1, description="Hybrid engine: trials per photon number n")
    bootstrap_resamples: int | None = Field(default=None, ge=1)


class ExperimentConfig(BaseModel):
    source: SourceSpec
    network: NetworkSpec
    detector: DetectorSpec = Field(default_factory=DetectorSpec)
    engine: EngineSpec = Field(default_factory=EngineSpec)

    def build_source(self):
        from clickstats import sources

        spec = self.source
        match spec:
            case CoherentSource():
                return sources.coherent_pnd(spec.mean, spec.n_max)
            case ThermalSource():
                return sources.thermal_pnd(spec.mean, spec.n_max)
            case FockSource():
                return sources.fock_pnd(spec.m, spec.n_max)
            case OddCoherentSource() if spec.alpha_sq is not None:
                return sources.odd_coherent_pnd(spec.alpha_sq, spec.n_max)
            case OddCoherentSource():
                return sources.odd_coherent_for_mean(spec.mean, spec.n_max)
            case SpatsSource():
                return sources.spats_pnd(spec.n_th, spec.n_max)
            case CustomSource():
                return sources.custom_pnd(spec.probs)

    def build_network(self):
        from clickstats import network

        spec = self.network
        match spec:
            case UniformNetwork():
                return network.uniform_splitter(spec.n_modes)
            case RingNetwork():
                return network.ring_resonator(spec.kappa, spec.n_trc)
            case CustomNetwork():
                return network.custom_config(spec.weights, spec.tail_loss)

    def build_detector(self, n_modes: int):
        from clickstats.datamodel import DetectorConfig

        spec = self.detector

        def per_mode(value: FloatOrList, field: str) -> np.ndarray:
            array = np.atleast_1d(np.asarray(value, dtype=np.float64))
            if array.size == 1:
                return np.full(n_modes, array[0])
            if array.size != n_modes:
                raise ConfigurationError(f"detector.{field} lists {array.size} values for {n_modes} modes")
            return array

        nu = per_mode(spec.nu, "nu")
        if spec.eta is not None:
            return DetectorConfig(eta=per_mode(spec.eta, "eta"), nu=nu)
        if spec.loss is not None or spec.detection_efficiency is not None:
            gamma = per_mode(spec.loss if spec.loss is not None else 0.0, "loss")
            xi = per_mode(spec.detection_efficiency if spec.detection_efficiency is not None else 1.0, "detection_efficiency")
            return DetectorConfig.from_loss(gamma, xi, nu)
        return DetectorConfig(eta=np.ones(n_modes), nu=nu)

    @model_validator(mode="after")
    def validate_buildable(self) -> "ExperimentConfig":
        # Surface every module invariant at load time, with the section it belongs to
        try:
            self.build_source()
        except (ClickStatsError, ValidationError) as e:
            raise ValueError(f"source: {_first_line(e)}") from e
        try:
            mux = self.build_network()
        except (ClickStatsError, ValidationError) as e:
            raise ValueError(f"network: {_first_line(e)}") from e
        try:
            self.build_detector(mux.n_modes)
        except (ClickStatsError, ValidationError, ValueError) as e:
            raise ValueError(f"detector: {_first_line(e)}") from e
        return self


def _first_line(error: Exception) -> str:
    if isinstance(error, ValidationError):
        first = error.errors()[0]
        return first["msg"].removeprefix("Value error, ")
    return str(error).splitlines()[0]


def _node_lines(node: yaml.Node, path: tuple[str, ...] = ()) -> dict[tuple[str, ...], int]:
    """Maps every mapping key path in a composed YAML document to its 1-based line."""
    lines: dict[tuple[str, ...], int] = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key_path = (*path, str(key_node.value))
            lines[key_path] = key_node.start_mark.line + 1
            lines.update(_node_lines(value_node, key_path))
    return lines


def _locate(loc: tuple[Any, ...], lines: dict[tuple[str, ...], int]) -> tuple[str, int | None]:
    # Discriminated unions insert their tag into the location; follow only parts present in the file
    path: tuple[str, ...] = ()
    for part in loc:
        candidate = (*path, str(part))
        if candidate in lines:
            path = candidate
    dotted: list[str] = list(path)
    if loc and (not path or path[-1] != str(loc[-1])):
        dotted.append(str(loc[-1]))
    return ".".join(dotted) or "<root>", lines.get(path)


def load_experiment(path: Path | str) -> ExperimentConfig:
    """Load and validate an experiment file, reporting problems as ``file:line: field: reason``."""
    path = Path(path)
    try:
        text: str = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"{path}: cannot read experiment file: {e.strerror}") from e

    try:
        document: Any = yaml.safe_load(text)
        root: yaml.Node | None = yaml.compose(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where: str = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigurationError(f"{where}: invalid YAML: {getattr(e, 'problem', e)}") from e

    if not isinstance(document, dict):
        raise ConfigurationError(f"{path}: expected a mapping with source, network, detector and engine sections")

    lines = _node_lines(root) if root is not None else {}
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as e:
        problems: list[str] = []
        for error in e.errors():
            field, line = _locate(error["loc"], lines)
            message: str = error["msg"].removeprefix("Value error, ")
            section: str = message.split(":", 1)[0]
            if field == "<root>" and (section,) in lines:
                field, line = section, lines[(section,)]
                message = message.split(":", 1)[1].strip()
            where = f"{path}:{line}" if line is not None else str(path)
            problems.append(f"{where}: {field}: {message}")
        raise ConfigurationError("\n".join(problems)) from e
