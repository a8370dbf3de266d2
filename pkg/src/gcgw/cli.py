"""Batch command-line harness: expectation tables, simulations, parameter
sweeps and figure-style presets, all emitted as CSV.

Configuration is a flat ``key = value`` text file; command-line flags
override file values, which override the built-in defaults. Every command
is deterministic given its config and seed. Exit codes: 0 success, 2
configuration error, 3 numerical non-convergence, 4 population-cap
truncation.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import meanfield, simulate, singletype
from .errors import ConvergenceError, PopulationCapError
from .kernel import (
    MutationKernel,
    build_point_mutation_kernel,
    load_kernel_csv,
)
from .params import (
    MODES,
    NEGATIVE_ONLY,
    POSITIVE_NEGATIVE,
    POSITIVE_ONLY,
    ModelParams,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_TRUNCATION = 4

THREADS_ENV = "GCGW_THREADS"

FIGURE_IDS = (
    "fig2",
    "fig3a",
    "fig3b",
    "fig7",
    "fig8",
    "fig9a",
    "fig9b",
    "fig9c",
    "fig11a",
    "fig11b",
    "fig16",
    "fig17",
)

SWEEP_QUANTITIES = (
    "extinction",
    "extinction_multitype",
    "gc_size",
    "gc_affinity",
    "selected_at_t",
    "selected_cumulative",
    "rho",
    "optimal_rs",
)

FLOAT_SWEEP_PARAMS = ("selection_rate", "death_rate", "division_rate")
INT_SWEEP_PARAMS = ("selection_threshold", "initial_class", "t_max")


class ConfigError(ValueError):
    """Invalid configuration file, flag value or combination."""


_CONFIG_TYPES = {
    "mode": str,
    "max_class": int,
    "death_rate": float,
    "division_rate": float,
    "selection_rate": float,
    "selection_threshold": int,
    "initial_class": int,
    "initial_count": int,
    "initial_vector": str,
    "kernel": str,
    "schedule": str,
    "t_max": int,
    "runs": int,
    "seed": int,
    "cap": int,
    "threads": int,
    "quantity": str,
    "sweep_param": str,
    "sweep_start": float,
    "sweep_stop": float,
    "sweep_step": float,
    "opt_grid_step": float,
    "out": str,
}

_DEFAULTS = {
    "mode": POSITIVE_NEGATIVE,
    "max_class": 10,
    "death_rate": 0.1,
    "division_rate": 0.9,
    "selection_rate": 0.1,
    "selection_threshold": 3,
    "initial_class": 3,
    "initial_count": 1,
    "initial_vector": None,
    "kernel": "point",
    "schedule": None,
    "t_max": 15,
    "runs": 1,
    "seed": 0,
    "cap": simulate.DEFAULT_POPULATION_CAP,
    "threads": 1,
    "quantity": None,
    "sweep_param": None,
    "sweep_start": None,
    "sweep_stop": None,
    "sweep_step": None,
    "opt_grid_step": 1e-3,
    "out": None,
}


def fmt(value) -> str:
    """One CSV cell: blanks for missing values, 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    """Format everything first, then write in one go (no partial files)."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(cell) for cell in row))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def parse_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, value.strip())
    return values


def _coerce(key: str, raw: str):
    kind = _CONFIG_TYPES[key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from exc
    return raw


@dataclass
class Experiment:
    """Fully resolved settings for one command invocation."""

    params: ModelParams
    kernel: MutationKernel
    schedule: tuple | None
    initial_gc: np.ndarray
    t_max: int
    runs: int
    seed: int
    cap: int
    threads: int
    quantity: str | None
    sweep_param: str | None
    sweep_start: float | None
    sweep_stop: float | None
    sweep_step: float | None
    opt_grid_step: float
    out: str | None

    @property
    def z0(self) -> int:
        return int(self.initial_gc.sum())

    @property
    def initial_class(self) -> int:
        nonzero = np.nonzero(self.initial_gc)[0]
        return int(nonzero[0]) if nonzero.size else 0

    def initial_state(self) -> meanfield.InitialState:
        return meanfield.state_from_gc_counts(self.params, self.initial_gc)

    def initial_population(self) -> simulate.PopulationState:
        return simulate.PopulationState(gc_counts=self.initial_gc)


def _merge_settings(args: argparse.Namespace) -> dict:
    settings = dict(_DEFAULTS)
    env_threads = os.environ.get(THREADS_ENV)
    if env_threads is not None:
        try:
            settings["threads"] = int(env_threads)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env_threads!r}") from exc
    config_path = getattr(args, "config", None)
    if config_path:
        settings.update(parse_config_file(config_path))
    for key in _CONFIG_TYPES:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            settings[key] = flag_value
    return settings


def build_experiment(args: argparse.Namespace) -> Experiment:
    settings = _merge_settings(args)
    if settings["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {settings['mode']!r}")
    try:
        params = ModelParams(
            max_class=settings["max_class"],
            death_rate=settings["death_rate"],
            division_rate=settings["division_rate"],
            selection_rate=settings["selection_rate"],
            selection_threshold=settings["selection_threshold"],
            mode=settings["mode"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    kernel_spec = settings["kernel"]
    if kernel_spec == "point":
        kernel = build_point_mutation_kernel(params.max_class)
    else:
        try:
            kernel = load_kernel_csv(kernel_spec)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load kernel {kernel_spec!r}: {exc}") from exc
        if kernel.max_class != params.max_class:
            raise ConfigError(
                f"kernel file covers classes 0..{kernel.max_class} but max_class is "
                f"{params.max_class}"
            )

    if settings["initial_vector"] is not None:
        try:
            initial_gc = np.array(
                [int(x) for x in str(settings["initial_vector"]).split(",")], dtype=np.int64
            )
        except ValueError as exc:
            raise ConfigError("initial_vector must be comma-separated integers") from exc
        if initial_gc.shape[0] != params.n_classes or initial_gc.min() < 0:
            raise ConfigError(
                f"initial_vector needs {params.n_classes} nonnegative entries"
            )
    else:
        a0, z0 = settings["initial_class"], settings["initial_count"]
        if not 0 <= a0 <= params.max_class:
            raise ConfigError(f"initial_class {a0} out of range [0, {params.max_class}]")
        if z0 < 0:
            raise ConfigError("initial_count must be nonnegative")
        initial_gc = np.zeros(params.n_classes, dtype=np.int64)
        initial_gc[a0] = z0

    schedule = None
    if settings["schedule"] is not None:
        schedule = _parse_schedule(str(settings["schedule"]), params)

    for key, minimum in (("t_max", 0), ("runs", 1), ("seed", 0), ("cap", 1), ("threads", 1)):
        if settings[key] < minimum:
            raise ConfigError(f"{key} must be at least {minimum}, got {settings[key]}")
    if settings["opt_grid_step"] <= 0:
        raise ConfigError("opt_grid_step must be positive")

    return Experiment(
        params=params,
        kernel=kernel,
        schedule=schedule,
        initial_gc=initial_gc,
        t_max=settings["t_max"],
        runs=settings["runs"],
        seed=settings["seed"],
        cap=settings["cap"],
        threads=settings["threads"],
        quantity=settings["quantity"],
        sweep_param=settings["sweep_param"],
        sweep_start=settings["sweep_start"],
        sweep_stop=settings["sweep_stop"],
        sweep_step=settings["sweep_step"],
        opt_grid_step=settings["opt_grid_step"],
        out=settings["out"],
    )


def _parse_schedule(spec: str, params: ModelParams) -> tuple:
    """Parse ``t_end:selection_rate`` segments separated by commas."""
    segments = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(f"schedule segment {chunk!r} must look like 't_end:selection_rate'")
        t_part, _, rs_part = chunk.partition(":")
        try:
            t_end = int(t_part)
            rate = float(rs_part)
        except ValueError as exc:
            raise ConfigError(f"schedule segment {chunk!r}: cannot parse numbers") from exc
        try:
            segments.append((t_end, replace(params, selection_rate=rate)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if not segments:
        raise ConfigError("schedule must contain at least one segment")
    return tuple(segments)


def _require_out(experiment: Experiment) -> str:
    if not experiment.out:
        raise ConfigError("an output path is required (--out or config key 'out')")
    return experiment.out


# ---------------------------------------------------------------------------
# expect


def _expect_rows(experiment: Experiment):
    params, kernel = experiment.params, experiment.kernel
    if experiment.schedule is not None:
        header = (
            ["t"]
            + [f"class_{k}" for k in range(params.n_classes)]
            + (["dead"] if params.mode == NEGATIVE_ONLY else ["selected", "dead"])
            + ["gc_size"]
        )
        initial = experiment.initial_state()
        rows = []
        for t in range(experiment.t_max + 1):
            vector = meanfield.scheduled_expected_state(
                initial, kernel, experiment.schedule, t
            )
            gc_size = float(vector[: params.n_classes].sum())
            rows.append([t, *vector.tolist(), gc_size])
        return header, rows

    initial = experiment.initial_state()
    has_selected = params.mode != NEGATIVE_ONLY
    header = ["t"] + [f"class_{k}" for k in range(params.n_classes)]
    header += ["selected", "dead"] if has_selected else ["dead"]
    header += ["gc_size", "gc_mean_affinity"]
    if has_selected:
        header += ["selected_at_t", "selected_affinity_at_t", "selected_affinity_cumulative"]
    rows = []
    for t in range(experiment.t_max + 1):
        report = meanfield.expectation_report(initial, params, kernel, t)
        row = [t, *report.per_type.tolist(), report.gc_size, report.gc_mean_affinity]
        if has_selected:
            row += [
                report.selected_at_t,
                report.selected_affinity_at_t,
                report.selected_affinity_cumulative,
            ]
        rows.append(row)
    return header, rows


def cmd_expect(experiment: Experiment) -> int:
    out = _require_out(experiment)
    header, rows = _expect_rows(experiment)
    write_csv(out, header, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _run_config(experiment: Experiment) -> simulate.RunConfig:
    schedule = experiment.schedule
    if schedule is None:
        schedule = ((max(experiment.t_max, 1), experiment.params),)
    return simulate.RunConfig(
        schedule=schedule,
        kernel=experiment.kernel,
        initial=experiment.initial_population(),
        t_max=experiment.t_max,
        seed=experiment.seed,
        population_cap=experiment.cap,
    )


def cmd_simulate(experiment: Experiment) -> int:
    out = _require_out(experiment)
    config = _run_config(experiment)
    if experiment.runs == 1:
        trajectory = simulate.run_trajectory(config)
        status = "truncated" if trajectory.truncated else "ok"
        header = simulate.trajectory_csv_header(experiment.params.n_classes) + ["status"]
        rows = [row + [status] for row in simulate.trajectory_rows(trajectory)]
        write_csv(out, header, rows)
        return EXIT_TRUNCATION if trajectory.truncated else EXIT_OK
    stats = simulate.run_ensemble(config, experiment.runs, n_jobs=experiment.threads)
    write_csv(
        out,
        simulate.ensemble_csv_header(experiment.params.n_classes),
        simulate.ensemble_rows(stats),
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _sweep_grid(experiment: Experiment):
    param = experiment.sweep_param
    if param is None:
        raise ConfigError("sweep requires sweep_param (and sweep_start/stop/step)")
    if param not in FLOAT_SWEEP_PARAMS + INT_SWEEP_PARAMS:
        raise ConfigError(
            f"unknown sweep_param {param!r}; choose from "
            f"{FLOAT_SWEEP_PARAMS + INT_SWEEP_PARAMS}"
        )
    for key in ("sweep_start", "sweep_stop", "sweep_step"):
        if getattr(experiment, key) is None:
            raise ConfigError(f"sweep requires {key}")
    start, stop, step = (
        experiment.sweep_start,
        experiment.sweep_stop,
        experiment.sweep_step,
    )
    if step <= 0 or stop < start:
        raise ConfigError("sweep grid must have step > 0 and stop >= start")
    if param in INT_SWEEP_PARAMS:
        values = list(range(int(start), int(stop) + 1, max(1, int(step))))
    else:
        values = list(np.arange(start, stop + step / 2.0, step))
    if not values:
        raise ConfigError("sweep grid is empty")
    return param, values


def _experiment_at(experiment: Experiment, param: str, value) -> Experiment:
    updated = experiment
    if param in FLOAT_SWEEP_PARAMS:
        updated = replace(
            updated, params=replace(experiment.params, **{param: float(value)})
        )
    elif param == "selection_threshold":
        updated = replace(
            updated, params=replace(experiment.params, selection_threshold=int(value))
        )
    elif param == "t_max":
        updated = replace(updated, t_max=int(value))
    elif param == "initial_class":
        gc = np.zeros(experiment.params.n_classes, dtype=np.int64)
        gc[int(value)] = max(experiment.z0, 1)
        updated = replace(updated, initial_gc=gc)
    return updated


def _sweep_value(experiment: Experiment, quantity: str):
    params, kernel = experiment.params, experiment.kernel
    if quantity == "extinction":
        return singletype.extinction_probability(params, max(experiment.z0, 1))
    if quantity == "extinction_multitype":
        q = meanfield.multitype_extinction_probability(params, kernel)
        return float(q[experiment.initial_class])
    if quantity == "rho":
        mean = meanfield.build_mean_matrix(params, kernel)
        return meanfield.spectral_bounds(mean).rho
    if quantity == "optimal_rs":
        step = experiment.opt_grid_step
        grid = np.arange(step, 1.0 + step / 2.0, step)
        return meanfield.empirical_optimal_selection_rate(
            params, kernel, experiment.initial_state(), experiment.t_max, grid
        )
    report = meanfield.expectation_report(
        experiment.initial_state(), params, kernel, experiment.t_max
    )
    if quantity == "gc_size":
        return report.gc_size
    if quantity == "gc_affinity":
        return report.gc_mean_affinity
    if quantity == "selected_at_t":
        return report.selected_at_t
    if quantity == "selected_cumulative":
        return report.selected_cumulative
    raise ConfigError(f"unknown quantity {quantity!r}; choose from {SWEEP_QUANTITIES}")


def cmd_sweep(experiment: Experiment) -> int:
    out = _require_out(experiment)
    if experiment.quantity is None:
        raise ConfigError("sweep requires a quantity (--quantity or config key)")
    if experiment.quantity not in SWEEP_QUANTITIES:
        raise ConfigError(
            f"unknown quantity {experiment.quantity!r}; choose from {SWEEP_QUANTITIES}"
        )
    param, values = _sweep_grid(experiment)
    rows = []
    for value in values:
        point = _experiment_at(experiment, param, value)
        rows.append([value, _sweep_value(point, experiment.quantity)])
    write_csv(out, [param, experiment.quantity], rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce presets


def _table1(mode: str = POSITIVE_NEGATIVE, **overrides) -> ModelParams:
    base = dict(
        max_class=10,
        death_rate=0.1,
        division_rate=0.9,
        selection_rate=0.1,
        selection_threshold=3,
        mode=mode,
    )
    base.update(overrides)
    return ModelParams(**base)


def _reproduce_fig2(seed: int):
    params = _table1()
    kernel = build_point_mutation_kernel(params.max_class)
    grid = np.round(np.arange(0.0, 0.601, 0.02), 10)
    analytic = [
        singletype.extinction_probability(replace(params, selection_rate=float(r)), 1)
        for r in grid
    ]
    initial = simulate.PopulationState(gc_counts=_single_gc(params.n_classes, 3, 1))
    empirical = simulate.empirical_extinction_curve(
        params, kernel, grid, initial, t_max=100, n_runs=400, seed=seed
    )
    rows = [[r, a, e] for r, a, e in zip(grid, analytic, empirical)]
    return [("fig2.csv", ["selection_rate", "extinction_analytic", "extinction_empirical"], rows)]


def _single_gc(n_classes: int, initial_class: int, count: int) -> np.ndarray:
    gc = np.zeros(n_classes, dtype=np.int64)
    gc[initial_class] = count
    return gc


def _reproduce_fig3(time_axis: bool):
    params = _table1()
    kernel = build_point_mutation_kernel(params.max_class)
    founders = (0, 5, 10)
    if time_axis:
        header = ["t"] + [f"gc_affinity_a0_{a}" for a in founders]
        rows = []
        for t in range(0, 31):
            row = [t]
            for a0 in founders:
                initial = meanfield.single_clone_state(params, a0)
                row.append(meanfield.expectation_report(initial, params, kernel, t).gc_mean_affinity)
            rows.append(row)
        return [("fig3b.csv", header, rows)]
    header = ["selection_threshold"] + [f"gc_affinity_a0_{a}" for a in founders]
    rows = []
    for thr in range(0, params.max_class + 1):
        p = replace(params, selection_threshold=thr)
        row = [thr]
        for a0 in founders:
            initial = meanfield.single_clone_state(p, a0)
            row.append(meanfield.expectation_report(initial, p, kernel, 15).gc_mean_affinity)
        rows.append(row)
    return [("fig3a.csv", header, rows)]


def _rho_for(params: ModelParams, kernel: MutationKernel) -> float:
    return meanfield.spectral_bounds(meanfield.build_mean_matrix(params, kernel)).rho


def _reproduce_fig7():
    kernel = build_point_mutation_kernel(10)
    rows = []
    for thr in range(0, 11):
        rows.append(
            [
                thr,
                _rho_for(_table1(mode=POSITIVE_ONLY, selection_threshold=thr), kernel),
                _rho_for(_table1(mode=NEGATIVE_ONLY, selection_threshold=thr), kernel),
            ]
        )
    header = ["selection_threshold", "rho_positive_only", "rho_negative_only"]
    return [("fig7.csv", header, rows)]


def _reproduce_fig8():
    kernel = build_point_mutation_kernel(10)
    rows = []
    for rate in np.round(np.arange(0.0, 1.0001, 0.02), 10):
        rows.append(
            [
                rate,
                _rho_for(_table1(mode=POSITIVE_ONLY, selection_rate=float(rate)), kernel),
                _rho_for(_table1(mode=NEGATIVE_ONLY, selection_rate=float(rate)), kernel),
            ]
        )
    header = ["selection_rate", "rho_positive_only", "rho_negative_only"]
    return [("fig8.csv", header, rows)]


def _selected_curve(mode: str, grid, founders, t: int, **overrides):
    rows = []
    for rate in grid:
        params = _table1(mode=mode, selection_rate=float(rate), **overrides)
        kernel = build_point_mutation_kernel(params.max_class)
        row = [rate]
        for a0 in founders:
            initial = meanfield.single_clone_state(params, a0)
            row.append(
                meanfield.expectation_report(initial, params, kernel, t).selected_at_t
            )
        rows.append(row)
    return rows


def _reproduce_fig9(panel: str, seed: int):
    founders = (0, 3, 5, 10)
    if panel == "a":
        grid = np.round(np.arange(0.0, 0.9001, 0.005), 10)
        rows = _selected_curve(POSITIVE_NEGATIVE, grid, founders, 15)
        header = ["selection_rate"] + [f"selected_at_t_a0_{a}" for a in founders]
        return [("fig9a.csv", header, rows)]
    if panel == "b":
        kernel = build_point_mutation_kernel(10)
        rows = []
        for thr in range(0, 11):
            params = _table1(selection_threshold=thr)
            row = [thr]
            for a0 in founders:
                initial = meanfield.single_clone_state(params, a0)
                row.append(
                    meanfield.expectation_report(initial, params, kernel, 15).selected_at_t
                )
            rows.append(row)
        header = ["selection_threshold"] + [f"selected_at_t_a0_{a}" for a in founders]
        return [("fig9b.csv", header, rows)]
    # panel c: analytic cumulative selected vs ensemble mean/std
    params = _table1(max_class=7, selection_rate=0.3)
    kernel = build_point_mutation_kernel(params.max_class)
    initial = meanfield.single_clone_state(params, 3)
    analytic = [
        meanfield.expectation_report(initial, params, kernel, t).selected_cumulative
        for t in range(0, 16)
    ]
    config = simulate.RunConfig.constant(
        params,
        kernel,
        simulate.PopulationState(gc_counts=_single_gc(params.n_classes, 3, 1)),
        t_max=15,
        seed=seed,
    )
    stats = simulate.run_ensemble(config, 4000)
    rows = [
        [t, analytic[t], stats.selected_mean[t], stats.selected_std[t]]
        for t in range(0, 16)
    ]
    header = [
        "t",
        "selected_cumulative_analytic",
        "selected_cumulative_mean",
        "selected_cumulative_std",
    ]
    return [("fig9c.csv", header, rows)]


def _reproduce_fig11(panel: str):
    if panel == "a":
        founders = (0, 3, 5, 10)
        grid = np.round(np.arange(0.0, 1.0001, 0.005), 10)
        rows = _selected_curve(POSITIVE_ONLY, grid, founders, 15)
        header = ["selection_rate"] + [f"selected_at_t_a0_{a}" for a in founders]
        return [("fig11a.csv", header, rows)]
    founders = (0, 5, 10)
    kernel = build_point_mutation_kernel(10)
    step = 0.002
    grid = np.arange(step, 1.0 + step / 2.0, step)
    rows = []
    for t in range(1, 16):
        row = [t, meanfield.optimal_selection_rate(t)]
        for a0 in founders:
            params = _table1(mode=POSITIVE_ONLY, selection_threshold=5)
            initial = meanfield.single_clone_state(params, a0)
            row.append(
                meanfield.empirical_optimal_selection_rate(params, kernel, initial, t, grid)
            )
        rows.append(row)
    header = ["t", "optimal_rs_exact"] + [f"optimal_rs_a0_{a}" for a in founders]
    return [("fig11b.csv", header, rows)]


_FIG16_ASSUMPTIONS = """\
Assumed parameters for the fig16 preset (not all are stated with the figure):
  max_class = 10, death_rate = 0.1, division_rate = 0.9,
  selection_threshold = 3, initial_class = 3, single founder, t = 30.
The selection-rate grid is 0.05..0.30 in steps of 0.05; 0.15 is the value
named in the figure text as making the two pool sizes comparable. Columns
compare the cumulative selected pool of the positive-only model with the
in-center pool of the negative-only model at the same selection rate.
"""


def _reproduce_fig16():
    rows = []
    for rate in np.round(np.arange(0.05, 0.3001, 0.05), 10):
        pos = _table1(mode=POSITIVE_ONLY, selection_rate=float(rate))
        neg = _table1(mode=NEGATIVE_ONLY, selection_rate=float(rate))
        kernel = build_point_mutation_kernel(10)
        pos_report = meanfield.expectation_report(
            meanfield.single_clone_state(pos, 3), pos, kernel, 30
        )
        neg_report = meanfield.expectation_report(
            meanfield.single_clone_state(neg, 3), neg, kernel, 30
        )
        rows.append(
            [
                rate,
                pos_report.selected_cumulative,
                neg_report.gc_size,
                pos_report.selected_affinity_cumulative,
                neg_report.gc_mean_affinity,
            ]
        )
    header = [
        "selection_rate",
        "selected_until_t_positive_only",
        "gc_size_negative_only",
        "selected_affinity_positive_only",
        "gc_affinity_negative_only",
    ]
    return [
        ("fig16.csv", header, rows),
        ("assumptions.txt", None, _FIG16_ASSUMPTIONS),
    ]


def fig17_schedule(params: ModelParams) -> tuple:
    return (
        (5, replace(params, selection_rate=0.0)),
        (15, replace(params, selection_rate=0.1)),
        (30, replace(params, selection_rate=0.3)),
    )


def _reproduce_fig17():
    params = _table1(death_rate=0.005, division_rate=0.3, selection_threshold=3)
    kernel = build_point_mutation_kernel(params.max_class)
    schedule = fig17_schedule(params)
    initial = meanfield.single_clone_state(params, 5, clone_count=100)
    header = (
        ["t"]
        + [f"class_{k}" for k in range(params.n_classes)]
        + ["selected", "dead", "gc_size"]
    )
    rows = []
    for t in range(0, 31):
        vector = meanfield.scheduled_expected_state(initial, kernel, schedule, t)
        rows.append([t, *vector.tolist(), float(vector[: params.n_classes].sum())])
    return [("fig17.csv", header, rows)]


def cmd_reproduce(figure: str, out_dir: str, seed: int) -> int:
    handlers = {
        "fig2": lambda: _reproduce_fig2(seed),
        "fig3a": lambda: _reproduce_fig3(time_axis=False),
        "fig3b": lambda: _reproduce_fig3(time_axis=True),
        "fig7": _reproduce_fig7,
        "fig8": _reproduce_fig8,
        "fig9a": lambda: _reproduce_fig9("a", seed),
        "fig9b": lambda: _reproduce_fig9("b", seed),
        "fig9c": lambda: _reproduce_fig9("c", seed),
        "fig11a": lambda: _reproduce_fig11("a"),
        "fig11b": lambda: _reproduce_fig11("b"),
        "fig16": _reproduce_fig16,
        "fig17": _reproduce_fig17,
    }
    if figure not in handlers:
        raise ConfigError(f"unknown figure id {figure!r}; available: {', '.join(FIGURE_IDS)}")
    outputs = handlers[figure]()
    os.makedirs(out_dir, exist_ok=True)
    for name, header, payload in outputs:
        path = os.path.join(out_dir, name)
        if header is None:
            with open(path, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(payload)
        else:
            write_csv(path, header, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file (flags override it)")
    parser.add_argument("--out", help="output CSV path (required for expect/simulate/sweep)")
    parser.add_argument("--seed", type=int, help="master seed; default 0 (config key 'seed')")
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--max-class", dest="max_class", type=int, help="largest affinity class index")
    parser.add_argument("--death-rate", dest="death_rate", type=float)
    parser.add_argument("--division-rate", dest="division_rate", type=float)
    parser.add_argument("--selection-rate", dest="selection_rate", type=float)
    parser.add_argument("--selection-threshold", dest="selection_threshold", type=int)
    parser.add_argument("--initial-class", dest="initial_class", type=int)
    parser.add_argument("--initial-count", dest="initial_count", type=int)
    parser.add_argument(
        "--initial-vector",
        dest="initial_vector",
        help="comma-separated per-class founder counts (overrides initial_class/count)",
    )
    parser.add_argument(
        "--kernel", help="'point' for the built-in nearest-neighbour kernel, or a CSV path"
    )
    parser.add_argument(
        "--schedule",
        help="piecewise selection rate, e.g. '5:0.0,15:0.1,30:0.3' (t_end:rate segments)",
    )
    parser.add_argument("--t-max", dest="t_max", type=int)
    parser.add_argument("--runs", type=int)
    parser.add_argument("--cap", type=int, help="population cap per generation")
    parser.add_argument(
        "--threads",
        type=int,
        help=f"worker processes for ensembles (default 1 or ${THREADS_ENV})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcgw",
        description=(
            "Affinity-structured branching model of germinal-center maturation: "
            "exact expectation tables, stochastic simulation, parameter sweeps "
            "and figure-style presets, all written as CSV."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_expect = sub.add_parser(
        "expect", help="exact per-generation expectations (one CSV row per t)"
    )
    _add_common_flags(p_expect)

    p_sim = sub.add_parser(
        "simulate",
        help="stochastic runs: trajectory CSV for runs=1, ensemble mean/std CSV otherwise",
    )
    _add_common_flags(p_sim)

    p_sweep = sub.add_parser("sweep", help="one quantity across a parameter grid")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--quantity", choices=SWEEP_QUANTITIES)
    p_sweep.add_argument(
        "--sweep-param",
        dest="sweep_param",
        choices=FLOAT_SWEEP_PARAMS + INT_SWEEP_PARAMS,
    )
    p_sweep.add_argument("--sweep-start", dest="sweep_start", type=float)
    p_sweep.add_argument("--sweep-stop", dest="sweep_stop", type=float)
    p_sweep.add_argument("--sweep-step", dest="sweep_step", type=float)
    p_sweep.add_argument(
        "--opt-grid-step",
        dest="opt_grid_step",
        type=float,
        help="selection-rate grid step used by the optimal_rs quantity",
    )

    p_rep = sub.add_parser(
        "reproduce", help="emit the data behind a named figure preset into a directory"
    )
    p_rep.add_argument("figure", help=f"one of: {', '.join(FIGURE_IDS)}")
    p_rep.add_argument("--out", required=True, help="output directory for the preset files")
    p_rep.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "reproduce":
            return cmd_reproduce(args.figure, args.out, args.seed)
        experiment = build_experiment(args)
        if args.command == "expect":
            return cmd_expect(experiment)
        if args.command == "simulate":
            return cmd_simulate(experiment)
        if args.command == "sweep":
            return cmd_sweep(experiment)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"gcgw: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"gcgw: numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except PopulationCapError as exc:
        print(f"gcgw: population cap exceeded: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION


if __name__ == "__main__":
    sys.exit(main())
