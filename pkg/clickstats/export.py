"""CSV output for sweeps, click statistics and click tables, plus the companion plot scripts.

Floats are written with 17 significant digits so that every value re-parses to the same double.
Missing values are empty fields.
"""

from pathlib import Path
from textwrap import dedent
from typing import TypeVar

import numpy as np
import pandas as pd
from pydantic import ValidationError

from clickstats.datamodel import ClickStatistics, ClickTable, EfficiencySweepRow, SpatsSweepRow, StateSweepRow, ValueModel
from clickstats.errors import ConfigurationError

FLOAT_FORMAT: str = "%.17g"

Row = TypeVar("Row", StateSweepRow, EfficiencySweepRow, SpatsSweepRow)

ROW_MODELS: dict[str, type[ValueModel]] = {
    "states": StateSweepRow,
    "efficiency": EfficiencySweepRow,
    "spats": SpatsSweepRow,
}


def write_rows(rows: list[Row], path: Path | str, model: type[Row] | None = None) -> Path:
    """Writes sweep rows with a header row; the column order follows the row model's fields."""
    path = Path(path)
    if model is None:
        if not rows:
            raise ConfigurationError("cannot infer the columns of an empty sweep, pass the row model")
        model = type(rows[0])
    columns: list[str] = list(model.model_fields)
    frame = pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=columns)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    return path


def read_rows(path: Path | str, model: type[Row]) -> list[Row]:
    """Reads a sweep CSV back into validated row models."""
    frame = pd.read_csv(path, keep_default_na=False, na_values=[""], float_precision="round_trip")
    missing: set[str] = {name for name, field in model.model_fields.items() if field.is_required()} - set(frame.columns)
    if missing:
        raise ConfigurationError(f"{path}: missing columns {sorted(missing)}")

    records = frame.astype(object).where(frame.notna(), None).to_dict(orient="records")
    try:
        return [model.model_validate(record) for record in records]
    except ValidationError as e:
        raise ConfigurationError(f"{path}: invalid row: {e.errors()[0]['msg']}") from e


def write_click_table(table: ClickTable, path: Path | str) -> Path:
    """One row per trial with a 0/1 column per mode, followed by a ``#`` footer with f_k, w_j, M and the seed."""
    path = Path(path)
    raw = table.raw if table.raw is not None else np.zeros((0, table.n_modes), dtype=bool)
    frame = pd.DataFrame(raw.astype(np.int8), columns=[f"mode_{j}" for j in range(1, table.n_modes + 1)])

    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    with path.open("a", encoding="utf-8") as file:
        file.write("#f," + ",".join(str(value) for value in table.f.tolist()) + "\n")
        file.write("#w," + ",".join(str(value) for value in table.w.tolist()) + "\n")
        file.write(f"#trials,{table.n_trials}\n")
        file.write(f"#seed,{table.seed}\n")
        file.write(f"#tail_mass,{table.tail_mass:.17g}\n")
    return path


def read_click_table(path: Path | str) -> ClickTable:
    path = Path(path)
    footer: dict[str, list[str]] = {}
    with path.open(encoding="utf-8") as file:
        for line in file:
            if line.startswith("#"):
                key, *values = line[1:].rstrip("\n").split(",")
                footer[key] = values
    for key in ("f", "w", "trials", "seed"):
        if key not in footer:
            raise ConfigurationError(f"{path}: click table footer lacks #{key}")

    frame = pd.read_csv(path, comment="#", dtype=np.int8)
    raw: np.ndarray | None = frame.to_numpy(dtype=bool) if len(frame) else None
    try:
        return ClickTable(
            n_modes=len(frame.columns),
            n_trials=int(footer["trials"][0]),
            f=[int(value) for value in footer["f"]],
            w=[int(value) for value in footer["w"]],
            seed=int(footer["seed"][0]),
            raw=raw,
            tail_mass=float(footer.get("tail_mass", ["0"])[0]),
        )
    except ValidationError as e:
        raise ConfigurationError(f"{path}: inconsistent click table: {e.errors()[0]['msg']}") from e


def write_click_statistics(statistics: ClickStatistics, path: Path | str) -> Path:
    """Rows k = 0..N with c_k and p_k (empty for k = 0), then a ``#`` footer with the summary statistics."""
    path = Path(path)
    p_column: list[float | None] = [None, *statistics.p.tolist()]
    frame = pd.DataFrame({"k": np.arange(statistics.n_modes + 1), "c": statistics.c, "p": p_column})

    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    with path.open("a", encoding="utf-8") as file:
        for key in ("mean_c", "var_c", "m", "sigma_sq"):
            file.write(f"#{key},{getattr(statistics, key):.17g}\n")
        file.write(f"#provenance,{statistics.provenance.value}\n")
    return path


def read_click_statistics(path: Path | str) -> ClickStatistics:
    path = Path(path)
    footer: dict[str, str] = {}
    with path.open(encoding="utf-8") as file:
        for line in file:
            if line.startswith("#"):
                key, _, value = line[1:].rstrip("\n").partition(",")
                footer[key] = value
    frame = pd.read_csv(path, comment="#", keep_default_na=False, na_values=[""], float_precision="round_trip")
    try:
        return ClickStatistics(
            c=frame["c"].to_numpy(),
            p=frame["p"].to_numpy()[1:],
            mean_c=float(footer["mean_c"]),
            var_c=float(footer["var_c"]),
            m=float(footer["m"]),
            sigma_sq=float(footer["sigma_sq"]),
            provenance=footer.get("provenance", "exact"),
        )
    except KeyError as e:
        raise ConfigurationError(f"{path}: click statistics lack {e.args[0]}") from e
    except ValidationError as e:
        raise ConfigurationError(f"{path}: inconsistent click statistics: {e.errors()[0]['msg']}") from e


_PLOT_BODIES: dict[str, str] = {
    "states": """
        fig, ax = plt.subplots()
        for state, group in data.groupby("state"):
            ax.errorbar(group["mean_photon_number"], group["q_pb"], yerr=group["stderr_pb"], marker="o", label=state)
        coherent = data[data["state"] == "coherent"]
        ax.plot(coherent["mean_photon_number"], coherent["q_b"], "k--", label="Q_B (coherent)")
        ax.axhline(0.0, color="grey", linewidth=0.5)
        ax.set_xlabel("mean photon number")
        ax.set_ylabel("Q_PB")
        ax.legend()
    """,
    "efficiency": """
        states = list(data.groupby(["state", "mean_photon_number"]))
        fig, axes = plt.subplots(1, len(states), figsize=(4 * len(states), 3.5), squeeze=False)
        for ax, ((state, mean), group) in zip(axes[0], states):
            grid = group.pivot(index="eta", columns="n_trc", values="q_pb")
            image = ax.pcolormesh(grid.columns, grid.index, grid.values, shading="nearest", cmap="RdBu")
            ax.contour(grid.columns, grid.index, grid.values, levels=[0.0], colors="k")
            ax.set_title(f"{state} {mean:g}")
            ax.set_xlabel("N_trc")
            ax.set_ylabel("eta")
            fig.colorbar(image, ax=ax)
    """,
    "spats": """
        fig, ax = plt.subplots()
        for (eta, n_trc), group in data.groupby(["eta", "n_trc"]):
            ax.plot(group["n_th"], group["q_pb"], label=f"Q_PB eta={eta:g} N_trc={n_trc}")
        first = data[(data["eta"] == data["eta"].max()) & (data["n_trc"] == data["n_trc"].max())]
        ax.plot(first["n_th"], first["q_m_closed"], "k--", label="Q_M")
        ax.plot(first["n_th"], first["q_b_closed"], "k:", label="Q_B")
        ax.axhline(0.0, color="grey", linewidth=0.5)
        ax.set_xlabel("thermal mean photon number")
        ax.legend(fontsize="small")
    """,
}


def write_plot_script(csv_path: Path | str, kind: str) -> Path:
    """Writes ``<csv stem>_plot.py`` next to a sweep CSV; running it with matplotlib renders the figure."""
    if kind not in _PLOT_BODIES:
        raise ConfigurationError(f"no plot script for sweep kind {kind!r}")
    csv_path = Path(csv_path)
    script_path: Path = csv_path.with_name(f"{csv_path.stem}_plot.py")
    script: str = (
        "import matplotlib.pyplot as plt\n"
        "import pandas as pd\n\n"
        f"data = pd.read_csv({csv_path.name!r})\n"
        + dedent(_PLOT_BODIES[kind])
        + f"fig.tight_layout()\nfig.savefig({csv_path.stem + '.png'!r}, dpi=200)\n"
    )
    script_path.write_text(script, encoding="utf-8")
    return script_path
