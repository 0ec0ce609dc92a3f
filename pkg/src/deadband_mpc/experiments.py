"""Experiment orchestration: config files, sweeps, repetitions, CSV output.

Config files are flat `key = value` text with `#` comments and comma lists;
unspecified keys fall back to the reference scenario defaults. Every run
writes a trajectory CSV and an actuation CSV; an experiment additionally
writes an aggregate summary table. All CSVs are UTF-8 with `\n` endings and
floats printed to 17 significant digits so parsing them reproduces the
in-memory values exactly.

CSV schemas (column order is part of the contract):

* trajectory: t,rx,ry,rz,vx,vy,vz
* actuation:  k,s1..sM,solve_time,iterations,status
* summary:    axis,value,solver,fuel_s,mission_time_s,acc_solve_time_s,
              mean_ms,p95_ms,p99_ms
"""

from __future__ import annotations

import concurrent.futures
import math
import os
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .scenario import LvlhState, ScenarioConfig, SolverId
from .simulation import SimResult, run_closed_loop

#: Environment variable overriding the parent directory of relative output dirs.
OUTPUT_ROOT_ENV = "DEADBAND_MPC_OUTPUT_ROOT"

TRAJECTORY_HEADER = ("t", "rx", "ry", "rz", "vx", "vy", "vz")
SUMMARY_HEADER = (
    "axis",
    "value",
    "solver",
    "fuel_s",
    "mission_time_s",
    "acc_solve_time_s",
    "mean_ms",
    "p95_ms",
    "p99_ms",
)


class ConfigError(ValueError):
    """A config file could not be parsed or violates a scenario invariant."""


class SweepAxis(str, Enum):
    NONE = "none"
    H_MIN = "h_min"
    HORIZON = "horizon"
    SOLVER_CROSS_PRODUCT = "solver_cross_product"


@dataclass(frozen=True)
class TimingStats:
    """Nearest-rank percentile summary of solve-time samples (seconds)."""

    mean: float
    p95: float
    p99: float
    max: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("TimingStats needs at least one sample")
        if not (self.p95 <= self.p99 <= self.max):
            raise ValueError("percentiles must be ordered: p95 <= p99 <= max")


def summarize_timing(samples) -> TimingStats:
    """Mean, nearest-rank p95/p99, and max of a non-empty sample set."""
    data = np.sort(np.asarray(samples, dtype=float))
    if data.size == 0:
        raise ValueError("summarize_timing requires at least one sample")

    def nearest_rank(p: float) -> float:
        rank = max(1, math.ceil(p / 100.0 * data.size))
        return float(data[rank - 1])

    return TimingStats(
        mean=float(data.mean()),
        p95=nearest_rank(95.0),
        p99=nearest_rank(99.0),
        max=float(data[-1]),
        count=int(data.size),
    )


@dataclass(frozen=True)
class ExperimentSpec:
    """A base scenario plus the axis swept over it."""

    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    sweep_axis: SweepAxis = SweepAxis.NONE
    sweep_values: tuple[float, ...] = ()
    repetitions: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        axis = SweepAxis(self.sweep_axis)
        object.__setattr__(self, "sweep_axis", axis)
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        if axis is SweepAxis.NONE:
            if self.sweep_values:
                raise ConfigError("sweep_values given but sweep_axis is none")
        elif not self.sweep_values:
            raise ConfigError(f"sweep_axis = {axis.value} requires sweep_values")
        for value in self.sweep_values:
            self._config_for(axis, value)  # raises ConfigError on invalid values

    def _config_for(self, axis: SweepAxis, value: float) -> ScenarioConfig:
        try:
            if axis is SweepAxis.NONE:
                return self.base
            if axis is SweepAxis.H_MIN:
                return replace(self.base, min_activation=value)
            if value != int(value) or value < 1:
                raise ValueError(f"horizon sweep value must be a positive integer, got {value}")
            return replace(self.base, horizon=int(value))
        except ValueError as exc:
            raise ConfigError(f"invalid sweep value {value!r} for axis {axis.value}: {exc}") from exc

    def solvers(self) -> tuple[SolverId, ...]:
        if self.sweep_axis is SweepAxis.SOLVER_CROSS_PRODUCT:
            return (SolverId.STANDARD, SolverId.PROJECTED, SolverId.RELAXED)
        return (self.base.solver_id,)

    def jobs(self) -> list[tuple[float, SolverId, ScenarioConfig]]:
        """(value, solver, config) triples, one per (sweep value x solver)."""
        values = self.sweep_values if self.sweep_axis is not SweepAxis.NONE else (0.0,)
        out = []
        for value in values:
            cfg_v = self._config_for(self.sweep_axis, value)
            for solver in self.solvers():
                out.append((value, solver, replace(cfg_v, solver_id=solver)))
        return out


# --- config file parsing ---

_SCALAR_KEYS = {
    "gravitational_constant": "gravitational_constant",
    "earth_mass": "earth_mass",
    "target_orbit_radius": "target_orbit_radius",
    "chaser_mass": "chaser_mass",
    "min_activation": "min_activation",
    "sampling_period": "sampling_period",
    "sim_duration": "sim_duration",
    "linearization_point": "linearization_point",
    "qp_tolerance": "qp_tolerance",
    "qp_regularization_scale": "qp_regularization_scale",
    "bnb_gap_tolerance": "bnb_gap_tolerance",
    "rk_max_step": "rk_max_step",
    "initial_state_jitter": "initial_state_jitter",
}
_INT_KEYS = {
    "horizon": "horizon",
    "qp_max_iterations": "qp_max_iterations",
    "bnb_node_budget": "bnb_node_budget",
    "rng_seed": "rng_seed",
}


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"key '{key}': expected a number, got {text!r}") from exc


def _parse_float_list(key: str, text: str, length: int | None = None) -> list[float]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    values = [_parse_float(key, p) for p in parts]
    if length is not None and len(values) != length:
        raise ConfigError(f"key '{key}': expected {length} comma-separated values, got {len(values)}")
    return values


def load_config(path) -> ExperimentSpec:
    """Parse a flat key = value config file into an ExperimentSpec.

    Unknown keys, malformed values, and scenario-invariant violations raise
    ConfigError naming the offending key. An empty file yields the full
    default scenario (relaxed solver, horizon 10).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc

    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        raw[key] = value

    scenario_kwargs: dict = {}
    experiment: dict = {}
    thrust_rows: dict[int, list[float]] = {}

    for key, value in raw.items():
        if key in _SCALAR_KEYS:
            scenario_kwargs[_SCALAR_KEYS[key]] = _parse_float(key, value)
        elif key in _INT_KEYS:
            number = _parse_float(key, value)
            if number != int(number):
                raise ConfigError(f"key '{key}': expected an integer, got {value!r}")
            scenario_kwargs[_INT_KEYS[key]] = int(number)
        elif key == "solver":
            try:
                scenario_kwargs["solver_id"] = SolverId(value)
            except ValueError as exc:
                raise ConfigError(
                    f"key 'solver': unknown solver {value!r} "
                    f"(choose from {', '.join(s.value for s in SolverId)})"
                ) from exc
        elif key == "initial_state":
            vec = _parse_float_list(key, value, 6)
            scenario_kwargs["initial_state"] = LvlhState(np.array(vec[:3]), np.array(vec[3:]))
        elif key == "state_weight_diag":
            diag = _parse_float_list(key, value, 6)
            scenario_kwargs["state_weight"] = np.diag(diag)
        elif key.startswith("thrust_force_"):
            suffix = key.removeprefix("thrust_force_")
            if not suffix.isdigit() or int(suffix) < 1:
                raise ConfigError(f"key '{key}': thruster index must be a positive integer")
            thrust_rows[int(suffix)] = _parse_float_list(key, value, 3)
        elif key == "sweep_axis":
            name = value.replace("-", "_")
            try:
                experiment["sweep_axis"] = SweepAxis(name)
            except ValueError as exc:
                raise ConfigError(
                    f"key 'sweep_axis': unknown axis {value!r} "
                    f"(choose from {', '.join(a.value for a in SweepAxis)})"
                ) from exc
        elif key == "sweep_values":
            experiment["sweep_values"] = tuple(_parse_float_list(key, value))
        elif key == "repetitions":
            number = _parse_float(key, value)
            if number != int(number) or number < 1:
                raise ConfigError(f"key 'repetitions': expected a positive integer, got {value!r}")
            experiment["repetitions"] = int(number)
        elif key == "output_dir":
            experiment["output_dir"] = value
        else:
            raise ConfigError(f"unknown key '{key}'")

    if thrust_rows:
        expected = set(range(1, len(thrust_rows) + 1))
        if set(thrust_rows) != expected:
            raise ConfigError(
                "thrust_force_<i> keys must be contiguous from 1; "
                f"got indices {sorted(thrust_rows)}"
            )
        scenario_kwargs["thrust_forces"] = np.array(
            [thrust_rows[i] for i in sorted(thrust_rows)]
        )

    if "linearization_point" not in scenario_kwargs:
        h = scenario_kwargs.get("sampling_period", ScenarioConfig().sampling_period)
        scenario_kwargs["linearization_point"] = 0.5 * h

    try:
        base = ScenarioConfig(**scenario_kwargs)
        return ExperimentSpec(base=base, **experiment)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


# --- CSV output ---


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_trajectory_csv(path, times: np.ndarray, states: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TRAJECTORY_HEADER) + "\n")
        for t, row in zip(times, states):
            fh.write(",".join([_fmt(t)] + [_fmt(v) for v in row]) + "\n")


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != TRAJECTORY_HEADER:
            raise ValueError(f"{path}: expected trajectory header {TRAJECTORY_HEADER}, got {header}")
        data = np.array(
            [[float(v) for v in line.split(",")] for line in fh if line.strip()]
        ).reshape(-1, 7)
    return data[:, 0], data[:, 1:]


def actuation_header(m: int) -> tuple[str, ...]:
    return ("k", *[f"s{i + 1}" for i in range(m)], "solve_time", "iterations", "status")


def write_actuation_csv(path, result: SimResult) -> None:
    log = result.actuation
    m = log.pulses.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(actuation_header(m)) + "\n")
        for k in range(log.pulses.shape[0]):
            cells = [str(k)]
            cells += [_fmt(v) for v in log.pulses[k]]
            cells += [_fmt(log.solve_times[k]), str(int(log.iterations[k])), log.statuses[k].value]
            fh.write(",".join(cells) + "\n")


def read_actuation_csv(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "k" or header[-3:] != ["solve_time", "iterations", "status"]:
            raise ValueError(f"{path}: not an actuation CSV (header {header})")
        m = len(header) - 4
        ks, pulses, solve_times, iters, statuses = [], [], [], [], []
        for line in fh:
            if not line.strip():
                continue
            cells = line.strip().split(",")
            ks.append(int(cells[0]))
            pulses.append([float(v) for v in cells[1 : 1 + m]])
            solve_times.append(float(cells[1 + m]))
            iters.append(int(cells[2 + m]))
            statuses.append(cells[3 + m])
    return {
        "k": np.array(ks, dtype=int),
        "pulses": np.array(pulses).reshape(len(ks), m),
        "solve_time": np.array(solve_times),
        "iterations": np.array(iters, dtype=int),
        "status": statuses,
    }


def resolve_output_dir(spec_output: str) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    path = Path(spec_output)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _echo_config(spec: ExperimentSpec, out_dir: Path) -> None:
    cfg = spec.base
    lines = ["# resolved experiment configuration"]
    skip = {"thrust_forces", "state_weight", "initial_state", "solver_id"}
    for f in fields(cfg):
        if f.name in skip:
            continue
        lines.append(f"{f.name} = {getattr(cfg, f.name)!r}".replace("'", ""))
    lines.append(f"solver = {cfg.solver_id.value}")
    x0 = cfg.initial_state.as_vector()
    lines.append("initial_state = " + ", ".join(_fmt(v) for v in x0))
    weight = cfg.state_weight
    lines.append("state_weight_diag = " + ", ".join(_fmt(v) for v in np.diag(weight)))
    if np.any(weight != np.diag(np.diag(weight))):
        lines.append("# note: state weight has off-diagonal terms not expressible here")
    for i, row in enumerate(cfg.thrust_forces, start=1):
        lines.append(f"thrust_force_{i} = " + ", ".join(_fmt(v) for v in row))
    lines.append(f"sweep_axis = {spec.sweep_axis.value}")
    if spec.sweep_values:
        lines.append("sweep_values = " + ", ".join(f"{v:g}" for v in spec.sweep_values))
    lines.append(f"repetitions = {spec.repetitions}")
    lines.append(f"output_dir = {spec.output_dir}")
    (out_dir / "resolved_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> int:
    """Execute every (sweep value x solver x repetition) run and write CSVs.

    Returns 0 on success, 3 if any run failed; failures are recorded in
    failures.txt and leave nan metrics in their summary row rather than
    aborting the batch. Runs execute on a thread pool when threads > 1 and
    are merged in job order, so outputs are independent of thread count.
    """
    out_dir = resolve_output_dir(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(spec, out_dir)

    jobs = []  # (value, solver, rep, cfg)
    for value, solver, cfg in spec.jobs():
        for rep in range(spec.repetitions):
            jobs.append((value, solver, rep, replace(cfg, rng_seed=cfg.rng_seed + rep)))

    def execute(job):
        _, _, _, cfg = job
        return run_closed_loop(cfg)

    results: list[SimResult | Exception] = []
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(execute, job) for job in jobs]
            for future in futures:
                try:
                    results.append(future.result())
                except Exception as exc:  # noqa: BLE001 - recorded, not silenced
                    results.append(exc)
    else:
        for job in jobs:
            try:
                results.append(execute(job))
            except Exception as exc:  # noqa: BLE001
                results.append(exc)

    failures: list[str] = []
    by_cell: dict[tuple[float, str], dict[int, SimResult]] = {}
    for (value, solver, rep, _cfg), outcome in zip(jobs, results):
        stem = f"run_{spec.sweep_axis.value}={value:g}_{solver.value}_{rep}"
        if isinstance(outcome, Exception):
            failures.append(f"{stem}: {outcome!r}")
            continue
        write_trajectory_csv(out_dir / f"{stem}_trajectory.csv", outcome.times, outcome.states)
        write_actuation_csv(out_dir / f"{stem}_actuation.csv", outcome)
        by_cell.setdefault((value, solver.value), {})[rep] = outcome

    rows = []
    for value, solver, cfg in spec.jobs():
        cell = by_cell.get((value, solver.value), {})
        if 0 in cell:
            first = cell[0]
            pooled = np.concatenate([r.solve_times for r in cell.values()]) * 1e3
            stats = summarize_timing(pooled)
            mission = math.nan if first.mission_time is None else first.mission_time
            rows.append(
                (
                    spec.sweep_axis.value,
                    value,
                    solver.value,
                    first.fuel,
                    mission,
                    float(first.solve_times.sum()),
                    stats.mean,
                    stats.p95,
                    stats.p99,
                )
            )
        else:
            rows.append(
                (spec.sweep_axis.value, value, solver.value, *([math.nan] * 6))
            )

    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SUMMARY_HEADER) + "\n")
        for axis, value, solver, *metrics in rows:
            fh.write(",".join([axis, f"{value:g}", solver] + [_fmt(v) for v in metrics]) + "\n")

    if failures:
        (out_dir / "failures.txt").write_text("\n".join(failures) + "\n", encoding="utf-8")
        return 3
    return 0
