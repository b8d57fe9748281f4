"""Scenario data model, CSV ingestion and validation, anomaly baselining and
training-set assembly.

File format (UTF-8 CSV with a header row):

    year,
    emission:<agent> | cumulative_emission:<agent>   (one per agent),
    concentration:<agent>                            (optional per agent),
    tas_global                                       (optional)

``emission:`` columns hold annual fluxes; agents whose input mode is
cumulative are accumulated at ingestion.  ``cumulative_emission:`` columns
are stored as-is, and are what ``save_scenario`` writes for cumulative
agents so that a save/load round trip is exact.  Spatial temperature cubes
live in a companion long-format CSV ``<stem>_spatial.csv`` with columns
lat, lon, year, tas.  Floats are written with full round-trip precision.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ebm import TimeGrid
from .errors import (
    EmptyWindow,
    GridError,
    GridMismatch,
    ParseError,
    SchemaError,
    UnknownScenario,
)

EMISSION_MODES = ("emission", "cumulative_emission")


@dataclass
class AgentSpec:
    """Name, input mode and unit label of one atmospheric agent."""

    name: str
    input_mode: str = "emission"
    unit: str = ""

    def __post_init__(self):
        if self.input_mode not in EMISSION_MODES:
            raise ValueError(f"unknown input mode '{self.input_mode}'")


@dataclass
class SpatialGrid:
    """Ordered latitude/longitude axes in degrees."""

    latitudes: np.ndarray
    longitudes: np.ndarray

    def __post_init__(self):
        self.latitudes = np.atleast_1d(np.asarray(self.latitudes, dtype=float))
        self.longitudes = np.atleast_1d(np.asarray(self.longitudes, dtype=float))
        if self.latitudes.size == 0 or self.longitudes.size == 0:
            raise ValueError("spatial grid axes must be nonempty")
        if np.any(self.latitudes < -90) or np.any(self.latitudes > 90):
            raise ValueError("latitudes must lie in [-90, 90]")
        if np.any(self.longitudes < 0) or np.any(self.longitudes >= 360):
            raise ValueError("longitudes must lie in [0, 360)")
        for axis in (self.latitudes, self.longitudes):
            if axis.size > 1 and not (
                np.all(np.diff(axis) > 0) or np.all(np.diff(axis) < 0)
            ):
                raise ValueError("grid axes must be strictly monotone")

    @property
    def shape(self) -> tuple[int, int]:
        return self.latitudes.size, self.longitudes.size


@dataclass
class Scenario:
    """One named emission/temperature record on an annual grid.

    ``emissions`` holds model-ready series: agents with cumulative input mode
    store accumulated emissions.  Temperatures are anomalies in kelvin.
    ``spatial_temperature`` has shape (n_steps, n_lat, n_lon).
    """

    name: str
    grid: TimeGrid
    emissions: dict[str, np.ndarray]
    concentrations: dict[str, np.ndarray] | None = None
    global_temperature: np.ndarray | None = None
    spatial_temperature: np.ndarray | None = None
    spatial_grid: SpatialGrid | None = None

    def __post_init__(self):
        n = self.grid.n_steps
        for name, series in self.emissions.items():
            if np.asarray(series).size != n:
                raise GridMismatch(f"emission series '{name}' does not match the grid")
        if self.concentrations:
            for name, series in self.concentrations.items():
                if np.asarray(series).size != n:
                    raise GridMismatch(
                        f"concentration series '{name}' does not match the grid"
                    )
        if self.global_temperature is not None and np.asarray(self.global_temperature).size != n:
            raise GridMismatch("global temperature series does not match the grid")
        if self.spatial_temperature is not None:
            if self.spatial_grid is None:
                raise GridMismatch("spatial temperature requires a spatial grid")
            expected = (n, *self.spatial_grid.shape)
            if self.spatial_temperature.shape != expected:
                raise GridMismatch(
                    f"spatial cube has shape {self.spatial_temperature.shape}, expected {expected}"
                )

    @property
    def agent_names(self) -> list[str]:
        return list(self.emissions.keys())

    def emission_matrix(self, agents: list[str] | None = None) -> np.ndarray:
        """Stacked (n_steps, n_agents) emission inputs in the given agent order."""
        names = agents if agents is not None else self.agent_names
        return np.column_stack([np.asarray(self.emissions[a], dtype=float) for a in names])


@dataclass
class Standardization:
    """Per-agent affine map applied to emission inputs before kernel evaluation."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.std = np.atleast_1d(np.asarray(self.std, dtype=float))
        if self.mean.size != self.std.size:
            raise ValueError("mean and std must have equal length")
        if np.any(self.std <= 0):
            raise ValueError("std entries must be positive")

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    @classmethod
    def from_rows(cls, x: np.ndarray) -> "Standardization":
        """Fit over stacked training rows; constant columns keep unit scale."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean=mean, std=std)


@dataclass
class TrainingSet:
    """Stacked multi-scenario training data for Gaussian-process inference.

    ``index`` locates each row as a (scenario name, year) pair;
    ``boundaries`` records the contiguous [start, stop) slice of each
    scenario in declared order.
    """

    temperatures: np.ndarray
    emissions: np.ndarray
    times: np.ndarray
    index: list[tuple[str, int]]
    boundaries: list[tuple[str, int, int]]
    standardization: Standardization | None = None

    @property
    def n(self) -> int:
        return self.temperatures.size

    def rows_for(self, name: str) -> slice:
        for scen, start, stop in self.boundaries:
            if scen == name:
                return slice(start, stop)
        raise UnknownScenario(f"scenario '{name}' is not in the training set")


def _parse_float(text: str, path, line: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"{path}: line {line}, column '{column}': cannot parse '{text}' as a number"
        ) from None


def _parse_year(text: str, path, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(
            f"{path}: line {line}, column 'year': cannot parse '{text}' as an integer"
        ) from None


def _grid_from_years(years: list[int], path) -> TimeGrid:
    if not years:
        raise SchemaError(f"{path}: file contains no data rows")
    if len(years) > 1:
        steps = np.diff(years)
        if np.any(steps != steps[0]) or steps[0] <= 0:
            bad = int(np.argmax(steps != steps[0])) if np.any(steps != steps[0]) else 0
            raise GridError(
                f"{path}: years are not uniformly spaced "
                f"(gap between {years[bad]} and {years[bad + 1]})"
            )
        step = float(steps[0])
    else:
        step = 1.0
    return TimeGrid(start_year=years[0], n_steps=len(years), step=step)


def spatial_companion_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_spatial" + path.suffix)


def load_scenario(
    path,
    agents: list[AgentSpec],
    name: str | None = None,
    spatial_path=None,
) -> Scenario:
    """Load and validate one scenario CSV.

    The spatial companion file is read when ``spatial_path`` is given or when
    ``<stem>_spatial.csv`` exists next to the main file.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if "year" not in header:
            raise SchemaError(f"{path}: missing required column 'year'")

        known = {"year", "tas_global"}
        emission_col: dict[str, tuple[str, bool]] = {}
        for spec in agents:
            raw = f"emission:{spec.name}"
            cum = f"cumulative_emission:{spec.name}"
            if cum in header:
                emission_col[spec.name] = (cum, True)
            elif raw in header:
                emission_col[spec.name] = (raw, False)
            else:
                raise SchemaError(
                    f"{path}: missing column '{raw}' (or '{cum}') for agent '{spec.name}'"
                )
            known.update({raw, cum, f"concentration:{spec.name}"})
        unknown = [h for h in header if h not in known]
        if unknown:
            raise SchemaError(f"{path}: unknown columns {unknown}")

        col_of = {h: i for i, h in enumerate(header)}
        years: list[int] = []
        data: dict[str, list[float]] = {h: [] for h in header if h != "year"}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: line {line_no}: expected {len(header)} fields, found {len(row)}"
                )
            years.append(_parse_year(row[col_of["year"]], path, line_no))
            for h in data:
                data[h].append(_parse_float(row[col_of[h]], path, line_no, h))

    grid = _grid_from_years(years, path)

    emissions: dict[str, np.ndarray] = {}
    for spec in agents:
        col, already_cumulative = emission_col[spec.name]
        series = np.asarray(data[col], dtype=float)
        if spec.input_mode == "cumulative_emission" and not already_cumulative:
            series = np.cumsum(series) * grid.step
        emissions[spec.name] = series

    concentrations = {
        spec.name: np.asarray(data[f"concentration:{spec.name}"], dtype=float)
        for spec in agents
        if f"concentration:{spec.name}" in data
    }

    tas = np.asarray(data["tas_global"], dtype=float) if "tas_global" in data else None

    spatial_grid = None
    cube = None
    if spatial_path is not None:
        companion = Path(spatial_path)
        if not companion.exists():
            raise SchemaError(f"{companion}: spatial file not found")
        spatial_grid, cube = _load_spatial(companion, grid)
    else:
        companion = spatial_companion_path(path)
        if companion.exists():
            spatial_grid, cube = _load_spatial(companion, grid)

    return Scenario(
        name=name if name is not None else path.stem,
        grid=grid,
        emissions=emissions,
        concentrations=concentrations or None,
        global_temperature=tas,
        spatial_temperature=cube,
        spatial_grid=spatial_grid,
    )


def _load_spatial(path: Path, grid: TimeGrid) -> tuple[SpatialGrid, np.ndarray]:
    rows: dict[tuple[float, float, int], float] = {}
    lats: set[float] = set()
    lons: set[float] = set()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = [h.strip() for h in next(reader)]
        if header != ["lat", "lon", "year", "tas"]:
            raise SchemaError(f"{path}: expected columns lat, lon, year, tas")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            lat = _parse_float(row[0], path, line_no, "lat")
            lon = _parse_float(row[1], path, line_no, "lon")
            year = _parse_year(row[2], path, line_no)
            tas = _parse_float(row[3], path, line_no, "tas")
            rows[(lat, lon, year)] = tas
            lats.add(lat)
            lons.add(lon)
    sgrid = SpatialGrid(latitudes=sorted(lats), longitudes=sorted(lons))
    years = grid.years().astype(int)
    cube = np.empty((grid.n_steps, *sgrid.shape))
    for a, year in enumerate(years):
        for i, lat in enumerate(sgrid.latitudes):
            for j, lon in enumerate(sgrid.longitudes):
                key = (lat, lon, int(year))
                if key not in rows:
                    raise SchemaError(f"{path}: missing cell ({lat}, {lon}, {year})")
                cube[a, i, j] = rows[key]
    return sgrid, cube


def save_scenario(scenario: Scenario, path, agents: list[AgentSpec]) -> None:
    """Write a scenario back to CSV; exact inverse of load_scenario."""
    path = Path(path)
    header = ["year"]
    for spec in agents:
        prefix = "cumulative_emission" if spec.input_mode == "cumulative_emission" else "emission"
        header.append(f"{prefix}:{spec.name}")
    conc_agents = list(scenario.concentrations.keys()) if scenario.concentrations else []
    header.extend(f"concentration:{name}" for name in conc_agents)
    if scenario.global_temperature is not None:
        header.append("tas_global")

    years = scenario.grid.years().astype(int)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for a, year in enumerate(years):
            row = [str(int(year))]
            row.extend(repr(float(scenario.emissions[s.name][a])) for s in agents)
            row.extend(
                repr(float(scenario.concentrations[name][a])) for name in conc_agents
            )
            if scenario.global_temperature is not None:
                row.append(repr(float(scenario.global_temperature[a])))
            writer.writerow(row)

    if scenario.spatial_temperature is not None:
        with open(spatial_companion_path(path), "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["lat", "lon", "year", "tas"])
            for i, lat in enumerate(scenario.spatial_grid.latitudes):
                for j, lon in enumerate(scenario.spatial_grid.longitudes):
                    for a, year in enumerate(years):
                        writer.writerow(
                            [
                                repr(float(lat)),
                                repr(float(lon)),
                                str(int(year)),
                                repr(float(scenario.spatial_temperature[a, i, j])),
                            ]
                        )


def to_anomaly(series: np.ndarray, grid: TimeGrid, window: tuple[int, int]) -> np.ndarray:
    """Subtract the mean of the series over the year window [start, end], inclusive."""
    series = np.asarray(series, dtype=float)
    years = grid.years()
    start, end = window
    mask = (years >= start) & (years <= end)
    if not np.any(mask):
        raise EmptyWindow(f"baseline window {start}-{end} does not overlap the grid")
    return series - series[mask].mean()


def default_baseline(grid: TimeGrid, length: int = 50) -> tuple[int, int]:
    """First ``length`` years of the grid, the documented default baseline."""
    years = grid.years().astype(int)
    return int(years[0]), int(years[min(length, grid.n_steps) - 1])


def assemble_training_set(
    scenarios: list[Scenario],
    holdout: tuple[str, ...] = (),
    agents: list[str] | None = None,
) -> tuple[TrainingSet, list[Scenario]]:
    """Stack training scenarios in declared order, excluding holdouts.

    Standardization constants are fit on the stacked training rows only.
    Returns the training set and the held-out scenarios.
    """
    names = [s.name for s in scenarios]
    for h in holdout:
        if h not in names:
            raise UnknownScenario(f"holdout '{h}' is not among scenarios {names}")
    held = [s for s in scenarios if s.name in holdout]
    kept = [s for s in scenarios if s.name not in holdout]

    if agents is None:
        agents = scenarios[0].agent_names if scenarios else []
    steps = {s.grid.step for s in scenarios}
    if len(steps) > 1:
        raise GridMismatch(f"scenarios have inconsistent steps: {sorted(steps)}")
    for s in scenarios:
        if set(s.agent_names) != set(agents):
            raise SchemaError(
                f"scenario '{s.name}' has agents {s.agent_names}, expected {agents}"
            )

    temps: list[np.ndarray] = []
    rows: list[np.ndarray] = []
    times: list[np.ndarray] = []
    index: list[tuple[str, int]] = []
    boundaries: list[tuple[str, int, int]] = []
    cursor = 0
    for s in kept:
        if s.global_temperature is None:
            raise SchemaError(f"training scenario '{s.name}' has no tas_global series")
        n = s.grid.n_steps
        temps.append(np.asarray(s.global_temperature, dtype=float))
        rows.append(s.emission_matrix(agents))
        times.append(s.grid.years())
        index.extend((s.name, int(y)) for y in s.grid.years().astype(int))
        boundaries.append((s.name, cursor, cursor + n))
        cursor += n

    if kept:
        temperatures = np.concatenate(temps)
        emissions = np.vstack(rows)
        stacked_times = np.concatenate(times)
        standardization = Standardization.from_rows(emissions)
    else:
        temperatures = np.empty(0)
        emissions = np.empty((0, len(agents)))
        stacked_times = np.empty(0)
        standardization = None

    train = TrainingSet(
        temperatures=temperatures,
        emissions=emissions,
        times=stacked_times,
        index=index,
        boundaries=boundaries,
        standardization=standardization,
    )
    return train, held
