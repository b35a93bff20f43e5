"""Read aggregate learning-curve CSVs and draw mean-steps-vs-episode figures.

The input schema is the harness aggregate CSV: one row per evaluation episode
with columns agent, mode, scenario, episode, mean_steps, stddev, n_seeds.
Input files are only ever read. Output is deterministic for fixed input and
options (fixed figure geometry, no timestamps in metadata).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "phasegrid-plots"  # deterministic SVG ids

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

REQUIRED_COLUMNS = ("agent", "mode", "scenario", "episode", "mean_steps", "stddev", "n_seeds")

FIGSIZE = (8.0, 4.8)
DPI = 150


class SchemaError(ValueError):
    """The CSV does not match the aggregate learning-curve schema."""


@dataclass(frozen=True)
class CurveSelection:
    """What to plot: input CSV plus optional agent/mode/scenario filters."""

    input_csv: str | Path
    output: str | Path
    agent: str | None = None
    mode: str | None = None
    scenario: str | None = None
    log_y: bool = False


def read_aggregate(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [col for col in REQUIRED_COLUMNS if col not in header]
        if missing:
            raise SchemaError(f"{path} is missing column(s) {missing}")
        rows = []
        for line, row in enumerate(reader, start=2):
            try:
                rows.append(
                    {
                        "agent": row["agent"],
                        "mode": row["mode"],
                        "scenario": row["scenario"],
                        "episode": int(row["episode"]),
                        "mean_steps": float(row["mean_steps"]),
                        "stddev": float(row["stddev"]),
                        "n_seeds": int(row["n_seeds"]),
                    }
                )
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{line}: {exc}") from None
    if not rows:
        raise SchemaError(f"{path} contains no data rows")
    return rows


def select_rows(rows: list[dict], selection: CurveSelection) -> list[dict]:
    filters = {"agent": selection.agent, "mode": selection.mode, "scenario": selection.scenario}
    picked = [
        row for row in rows
        if all(value is None or row[key] == value for key, value in filters.items())
    ]
    if not picked:
        raise SchemaError(
            f"no curves match filters {dict((k, v) for k, v in filters.items() if v)}"
        )
    return picked


def build_figure(rows: list[dict], selection: CurveSelection):
    """One line per (agent, scenario), mean steps against training episode."""
    picked = select_rows(rows, selection)
    curves: dict[tuple[str, str, str], list[dict]] = {}
    for row in picked:
        curves.setdefault((row["agent"], row["mode"], row["scenario"]), []).append(row)

    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    for (agent, mode, scenario), entries in sorted(curves.items()):
        entries.sort(key=lambda row: row["episode"])
        episodes = [row["episode"] for row in entries]
        means = [row["mean_steps"] for row in entries]
        (line,) = ax.plot(episodes, means, label=f"{agent} {scenario} ({mode})")
        lower = [row["mean_steps"] - row["stddev"] for row in entries]
        upper = [row["mean_steps"] + row["stddev"] for row in entries]
        ax.fill_between(episodes, lower, upper, alpha=0.2, color=line.get_color())
    ax.set_xlabel("training episode")
    ax.set_ylabel("mean steps per episode")
    if selection.log_y:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    return fig


def render(selection: CurveSelection) -> Path:
    """Render the selection to an image file; format follows the suffix."""
    rows = read_aggregate(selection.input_csv)
    fig = build_figure(rows, selection)
    output = Path(selection.output)
    if output.parent != Path(""):
        output.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if output.suffix == ".svg" else None
    try:
        fig.savefig(output, metadata=metadata)
    finally:
        plt.close(fig)
    return output
