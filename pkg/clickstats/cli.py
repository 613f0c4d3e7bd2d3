"""Command-line front end.

Results go to standard output, logs and error messages to standard error. Exit codes: 0 on success, 2 for
configuration problems, 3 when a witness is degenerate.
"""

import json
import sys
from logging import Logger
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, ValidationError
from pydantic_settings import (
    BaseSettings,
    CliApp,
    CliSubCommand,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    SettingsError,
)

from clickstats import exact, export, montecarlo, stats, sweeps
from clickstats.config import EngineSpec, ExperimentConfig, get_settings, load_experiment
from clickstats.datamodel import ErrorMessage, QReport, SourceFamily
from clickstats.errors import ClickStatsError, DegenerateStatisticsError
from clickstats.logging import getLogger
from clickstats.metrics import write_metrics
from clickstats.version import get_version

logger: Logger = getLogger("clickstats.cli")

EngineKind = Literal["exact", "mc", "hybrid"]


def _engine(config: ExperimentConfig, engine: EngineKind | None, trials: int | None, seed: int | None, keep_raw: bool) -> EngineSpec:
    """The experiment file's engine section with command-line overrides applied."""
    overrides: dict = {"kind": engine, "trials": trials, "seed": seed}
    update = {key: value for key, value in overrides.items() if value is not None}
    if keep_raw:
        update["keep_raw"] = True
    return config.engine.model_copy(update=update)


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2))


class AnalyzeCommand(BaseModel):
    """Run one experiment file and print its click statistics and witnesses."""

    config: Path = Field(description="Experiment file (YAML)")
    engine: EngineKind | None = Field(default=None, description="Override the engine of the experiment file")
    trials: int | None = Field(default=None, ge=1, description="Monte Carlo repetitions M")
    seed: int | None = Field(default=None, ge=0, description="Root seed")
    keep_raw: bool = Field(default=False, description="Also write the raw click table next to --out")
    workers: int | None = Field(default=None, ge=1, description="Worker processes for Monte Carlo blocks")
    out: Path | None = Field(default=None, description="Write the witness report as a one-row CSV and the click statistics next to it")

    def cli_cmd(self) -> None:
        experiment: ExperimentConfig = load_experiment(self.config)
        engine: EngineSpec = _engine(experiment, self.engine, self.trials, self.seed, self.keep_raw)
        pnd = experiment.build_source()
        mux = experiment.build_network()
        det = experiment.build_detector(mux.n_modes)

        evaluation = sweeps.run_engine(pnd, mux, det, engine, workers=self.workers)
        _print_json(
            {
                "statistics": evaluation.statistics.model_dump(mode="json"),
                "report": evaluation.report.model_dump(mode="json"),
            }
        )
        if self.out is not None:
            export.write_rows([evaluation.report], self.out, QReport)
            export.write_click_statistics(evaluation.statistics, self.out.with_name(f"{self.out.stem}_statistics.csv"))
            if evaluation.table is not None and evaluation.table.raw is not None:
                export.write_click_table(evaluation.table, self.out.with_name(f"{self.out.stem}_table.csv"))
            logger.info(f"Report written to {self.out}.")


class TableCommand(BaseModel):
    """Simulate M trials and write the raw click table with its f_k / w_j footer."""

    config: Path = Field(description="Experiment file (YAML)")
    trials: int | None = Field(default=None, ge=1, description="Monte Carlo repetitions M")
    seed: int | None = Field(default=None, ge=0, description="Root seed")
    workers: int | None = Field(default=None, ge=1, description="Worker processes for Monte Carlo blocks")
    out: Path = Field(default=Path("click_table.csv"), description="Output CSV")

    def cli_cmd(self) -> None:
        experiment: ExperimentConfig = load_experiment(self.config)
        engine: EngineSpec = _engine(experiment, "mc", self.trials, self.seed, True)
        pnd = experiment.build_source()
        mux = experiment.build_network()
        det = experiment.build_detector(mux.n_modes)

        table = montecarlo.run_experiment(pnd, mux, det, engine.trials, engine.seed, keep_raw=True, workers=self.workers)
        export.write_click_table(table, self.out)
        logger.info(f"Click table with {table.n_trials} rows written to {self.out}.")


class CrosscheckCommand(BaseModel):
    """Compare the exact and the Monte Carlo engine on one experiment file."""

    config: Path = Field(description="Experiment file (YAML)")
    trials: int | None = Field(default=None, ge=1, description="Monte Carlo repetitions M")
    seed: int | None = Field(default=None, ge=0, description="Root seed")
    workers: int | None = Field(default=None, ge=1, description="Worker processes for Monte Carlo blocks")

    def cli_cmd(self) -> None:
        experiment: ExperimentConfig = load_experiment(self.config)
        pnd = experiment.build_source()
        mux = experiment.build_network()
        det = experiment.build_detector(mux.n_modes)

        exact_stats = exact.exact_click_statistics(pnd, mux, det)
        exact_report = stats.build_report(exact_stats, pnd)
        engine: EngineSpec = _engine(experiment, "mc", self.trials, self.seed, False)
        simulated = sweeps.run_engine(pnd, mux, det, engine, workers=self.workers)

        difference: float = simulated.report.q_pb - exact_report.q_pb
        stderr_pb: float | None = simulated.report.stderr_pb
        _print_json(
            {
                "total_variation": montecarlo.total_variation(exact_stats.c, simulated.statistics.c),
                "q_pb_exact": exact_report.q_pb,
                "q_pb_mc": simulated.report.q_pb,
                "stderr_pb": stderr_pb,
                "deviation_in_stderr": difference / stderr_pb if stderr_pb else None,
            }
        )


class SweepOptions(BaseModel):
    engine: EngineKind = Field(default="exact", description="Engine evaluating every grid point")
    trials: int | None = Field(default=None, ge=1, description="Monte Carlo repetitions M per point")
    trials_per_n: int = Field(default=100_000, ge=1, description="Hybrid engine: trials per photon number")
    seed: int = Field(default=0, ge=0, description="Root seed; point seeds derive from it")
    workers: int | None = Field(default=None, ge=1, description="Worker processes evaluating grid points")
    kappa: float = Field(default=sweeps.DEFAULT_KAPPA, gt=0.0, lt=1.0, description="Ring coupling strength")
    n_max: int | None = Field(default=None, ge=0, description="Truncation order; grown automatically when unset")

    def engine_spec(self) -> EngineSpec:
        return EngineSpec(kind=self.engine, trials=self.trials, seed=self.seed, trials_per_n=self.trials_per_n)

    def finish(self, rows: list, out: Path, kind: str) -> None:
        export.write_rows(rows, out, export.ROW_MODELS[kind])
        script: Path = export.write_plot_script(out, kind)
        logger.info(f"Wrote {len(rows)} rows to {out} and the plot script {script}.")


class SweepStatesCommand(SweepOptions):
    """Q_PB against the mean photon number for coherent, thermal, Fock and odd-coherent light."""

    means: list[float] = Field(default=list(sweeps.DEFAULT_MEANS), description="Mean photon numbers of the continuous families")
    fock_numbers: list[int] = Field(default=list(sweeps.DEFAULT_FOCK_NUMBERS), description="Fock photon numbers")
    eta: float = Field(default=1.0, ge=0.0, le=1.0, description="Quantum efficiency of every mode")
    n_trc: int = Field(default=10, ge=1, description="Number of detected pulses")
    out: Path = Field(default=Path("sweep_states.csv"), description="Output CSV")

    def cli_cmd(self) -> None:
        rows = sweeps.sweep_states(
            self.means, self.fock_numbers, self.kappa, self.eta, self.n_trc, self.engine_spec(), self.seed, self.workers, self.n_max
        )
        self.finish(rows, self.out, "states")


class SweepEfficiencyCommand(SweepOptions):
    """Q_PB over efficiency and number of detected pulses for Fock and odd-coherent states."""

    fock_numbers: list[int] = Field(default=[1, 2, 3], description="Fock photon numbers")
    odd_means: list[float] = Field(default=[1.0, 2.0, 3.0], description="Odd-coherent mean photon numbers")
    etas: list[float] = Field(default=list(sweeps.DEFAULT_ETAS), description="Quantum efficiencies")
    n_trcs: list[int] = Field(default=list(sweeps.DEFAULT_N_TRCS), description="Numbers of detected pulses")
    out: Path = Field(default=Path("sweep_efficiency.csv"), description="Output CSV")

    def cli_cmd(self) -> None:
        states = [(SourceFamily.FOCK, float(m)) for m in self.fock_numbers]
        states += [(SourceFamily.ODD_COHERENT, mean) for mean in self.odd_means]
        rows = sweeps.sweep_efficiency(states, self.etas, self.n_trcs, self.kappa, self.engine_spec(), self.seed, self.workers, self.n_max)
        self.finish(rows, self.out, "efficiency")


class SweepSpatsCommand(SweepOptions):
    """Q_PB of single-photon-added thermal states against the closed-form Q_M and Q_B."""

    n_ths: list[float] = Field(default=list(sweeps.DEFAULT_SPATS_N_THS), description="Thermal mean photon numbers")
    etas: list[float] = Field(default=list(sweeps.DEFAULT_SPATS_ETAS), description="Quantum efficiencies")
    n_trcs: list[int] = Field(default=list(sweeps.DEFAULT_SPATS_N_TRCS), description="Numbers of detected pulses")
    out: Path = Field(default=Path("sweep_spats.csv"), description="Output CSV")

    def cli_cmd(self) -> None:
        rows = sweeps.sweep_spats(self.n_ths, self.etas, self.n_trcs, self.kappa, self.engine_spec(), self.seed, self.workers, self.n_max)
        self.finish(rows, self.out, "spats")


class VersionCommand(BaseModel):
    """Print the installed version."""

    def cli_cmd(self) -> None:
        print(get_version())


class ClickStatsCli(BaseSettings):
    """Click statistics of light behind multiplexed on-off detectors."""

    metrics_file: Path | None = Field(default=None, description="Write Prometheus metrics to this file on exit")

    analyze: CliSubCommand[AnalyzeCommand]
    table: CliSubCommand[TableCommand]
    sweep_states: CliSubCommand[SweepStatesCommand]
    sweep_efficiency: CliSubCommand[SweepEfficiencyCommand]
    sweep_spats: CliSubCommand[SweepSpatsCommand]
    crosscheck: CliSubCommand[CrosscheckCommand]
    version: CliSubCommand[VersionCommand]

    model_config = SettingsConfigDict(
        cli_prog_name="clickstats",
        cli_kebab_case=True,
        cli_implicit_flags=True,
        cli_use_class_docs_for_groups=True,
    )

    # Only the command line feeds this model; runtime settings live in config.Settings
    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)

    def cli_cmd(self) -> None:
        metrics_file: Path | None = self.metrics_file or get_settings().metrics_file
        try:
            CliApp.run_subcommand(self)
        finally:
            if metrics_file is not None:
                write_metrics(metrics_file)
                logger.debug(f"Metrics written to {metrics_file}.")


def _report_error(error: str, detail: str) -> None:
    print(ErrorMessage(error=error, detail=detail).model_dump_json(), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    """Entry point of the ``clickstats`` command; returns the process exit code."""
    try:
        CliApp.run(ClickStatsCli, cli_args=argv if argv is not None else sys.argv[1:])
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except DegenerateStatisticsError as e:
        _report_error(e.code, str(e))
        return 3
    except ClickStatsError as e:
        _report_error(e.code, str(e))
        return 2
    except ValidationError as e:
        _report_error("ValidationError", "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()))
        return 2
    except SettingsError as e:
        _report_error("UsageError", str(e))
        return 2
    return 0
