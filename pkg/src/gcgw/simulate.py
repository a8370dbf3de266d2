"""Cell-level stochastic simulation of the maturation cycle.

Cells of one class are exchangeable, so the population is stored as
per-class counts and each generation is advanced with bulk binomial /
multinomial draws. This reproduces the per-cell law exactly and scales to
supercritical growth; a hard cap on outcome units per generation turns
runaway growth into an explicit truncation error.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import PopulationCapError
from .kernel import MutationKernel
from .params import (
    NEGATIVE_ONLY,
    POSITIVE_NEGATIVE,
    POSITIVE_ONLY,
    ModelParams,
    Schedule,
    params_at,
    validate_schedule,
)

DEFAULT_POPULATION_CAP = 10_000_000


@dataclass(frozen=True)
class PopulationState:
    """Integer counts per affinity class plus the absorbing tallies."""

    gc_counts: np.ndarray
    selected: int = 0
    dead: int = 0

    def __post_init__(self) -> None:
        counts = np.array(self.gc_counts, dtype=np.int64, copy=True)
        if counts.ndim != 1:
            raise ValueError("gc_counts must be a 1-D vector")
        if counts.min(initial=0) < 0 or self.selected < 0 or self.dead < 0:
            raise ValueError("population counts must be nonnegative")
        counts.flags.writeable = False
        object.__setattr__(self, "gc_counts", counts)

    @property
    def gc_size(self) -> int:
        return int(self.gc_counts.sum())

    def type_vector(self, mode: str) -> np.ndarray:
        """Counts laid out like the mean-field type vector for ``mode``."""
        if mode == NEGATIVE_ONLY:
            return np.concatenate([self.gc_counts, [self.dead]])
        return np.concatenate([self.gc_counts, [self.selected, self.dead]])


@dataclass(frozen=True)
class StepDetail:
    """Bookkeeping of one generation, for conservation checks and the
    pre-selection snapshot (population after death/division/mutation,
    before any selection test)."""

    deaths: int
    dividers: int
    preselection_counts: np.ndarray


@dataclass(frozen=True)
class RunConfig:
    """One simulation run: schedule, kernel, founders, horizon, seed, cap."""

    schedule: Schedule
    kernel: MutationKernel
    initial: PopulationState
    t_max: int
    seed: int
    population_cap: int = DEFAULT_POPULATION_CAP

    def __post_init__(self) -> None:
        if self.t_max < 0:
            raise ValueError("t_max must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if self.population_cap < 1:
            raise ValueError("population_cap must be positive")
        schedule = validate_schedule(self.schedule, self.t_max) if self.t_max > 0 else tuple(
            (int(t), p) for t, p in self.schedule
        )
        object.__setattr__(self, "schedule", schedule)
        n_classes = schedule[0][1].n_classes if schedule else None
        if n_classes is not None and self.initial.gc_counts.shape[0] != n_classes:
            raise ValueError("initial population does not match the schedule's class count")
        if n_classes is not None and self.kernel.n_classes != n_classes:
            raise ValueError("kernel does not match the schedule's class count")

    @staticmethod
    def constant(
        params: ModelParams,
        kernel: MutationKernel,
        initial: PopulationState,
        t_max: int,
        seed: int,
        population_cap: int = DEFAULT_POPULATION_CAP,
    ) -> "RunConfig":
        """Config with the same parameters for every generation."""
        return RunConfig(
            schedule=((max(t_max, 1), params),),
            kernel=kernel,
            initial=initial,
            t_max=t_max,
            seed=seed,
            population_cap=population_cap,
        )


@dataclass(frozen=True)
class Trajectory:
    """Per-generation states; ``states[t]`` is the population after t cycles.

    ``truncated`` marks a run abandoned at the population cap; the recorded
    states then stop at the last completed generation.
    """

    states: tuple[PopulationState, ...]
    truncated: bool = False
    preselection: tuple[np.ndarray, ...] | None = None

    @property
    def t_last(self) -> int:
        return len(self.states) - 1


def step_generation_detailed(
    state: PopulationState,
    params: ModelParams,
    kernel: MutationKernel,
    rng: np.random.Generator,
    population_cap: int = DEFAULT_POPULATION_CAP,
) -> tuple[PopulationState, StepDetail]:
    """Advance one generation and return the bookkeeping detail.

    Per cell, independently: death first; survivors divide or not; each
    daughter of a division draws its class from the kernel; every cell
    present after that (undivided survivors at their old class, daughters
    at their new one) faces the selection test independently.
    """
    counts = state.gc_counts
    n = counts.shape[0]
    if kernel.n_classes != n or params.n_classes != n:
        raise ValueError("state, params and kernel disagree on the class count")
    rd, rdiv, rs = params.death_rate, params.division_rate, params.selection_rate
    thr = params.selection_threshold

    deaths = rng.binomial(counts, rd)
    survivors = counts - deaths
    dividers = rng.binomial(survivors, rdiv)
    solo = survivors - dividers

    outcome_units = int(counts.sum() + dividers.sum())
    if outcome_units > population_cap:
        raise PopulationCapError(
            f"generation needs {outcome_units} outcome units, cap is {population_cap}",
            state=state,
        )

    daughters = np.zeros(n, dtype=np.int64)
    if dividers.any():
        draws = rng.multinomial(2 * dividers, kernel.entries)
        daughters = draws.sum(axis=0).astype(np.int64)

    preselection = solo + daughters
    tested_solo = rng.binomial(solo, rs)
    tested_daughters = rng.binomial(daughters, rs)
    tested = tested_solo + tested_daughters
    staying = preselection - tested

    passes = np.arange(n) <= thr
    gc_new = staying.astype(np.int64)
    dead_new = int(deaths.sum())
    selected_new = 0
    if params.mode == POSITIVE_NEGATIVE:
        selected_new = int(tested[passes].sum())
        dead_new += int(tested[~passes].sum())
    elif params.mode == POSITIVE_ONLY:
        selected_new = int(tested[passes].sum())
        gc_new[~passes] += tested[~passes]
    else:  # NEGATIVE_ONLY
        gc_new[passes] += tested[passes]
        dead_new += int(tested[~passes].sum())

    new_state = PopulationState(
        gc_counts=gc_new,
        selected=state.selected + selected_new,
        dead=state.dead + dead_new,
    )
    detail = StepDetail(
        deaths=int(deaths.sum()),
        dividers=int(dividers.sum()),
        preselection_counts=preselection,
    )
    return new_state, detail


def step_generation(
    state: PopulationState,
    params: ModelParams,
    kernel: MutationKernel,
    rng: np.random.Generator,
    population_cap: int = DEFAULT_POPULATION_CAP,
) -> PopulationState:
    """Advance one generation."""
    new_state, _ = step_generation_detailed(state, params, kernel, rng, population_cap)
    return new_state


def _rng_for_run(seed: int, run_index: int) -> np.random.Generator:
    # Per-run streams are hashed from (master seed, run index) so ensembles
    # are reproducible under any scheduling order.
    return np.random.default_rng(np.random.SeedSequence([seed, run_index]))


def _run_with_rng(
    config: RunConfig, rng: np.random.Generator, record_preselection: bool = False
) -> Trajectory:
    states = [config.initial]
    preselection = [] if record_preselection else None
    state = config.initial
    for t in range(1, config.t_max + 1):
        params = params_at(config.schedule, t)
        try:
            state, detail = step_generation_detailed(
                state, params, config.kernel, rng, config.population_cap
            )
        except PopulationCapError:
            return Trajectory(
                states=tuple(states),
                truncated=True,
                preselection=tuple(preselection) if preselection is not None else None,
            )
        states.append(state)
        if preselection is not None:
            preselection.append(detail.preselection_counts)
    return Trajectory(
        states=tuple(states),
        truncated=False,
        preselection=tuple(preselection) if preselection is not None else None,
    )


def run_trajectory(config: RunConfig, record_preselection: bool = False) -> Trajectory:
    """Simulate one run; deterministic given the config's seed."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    return _run_with_rng(config, rng, record_preselection)


@dataclass(frozen=True)
class EnsembleStats:
    """Across-run mean and standard deviation per generation.

    Standard deviations use the population convention (zero for a single
    run). ``extinction_frequency`` is the fraction of runs whose center is
    empty at the final generation.
    """

    n_runs: int
    t_max: int
    class_mean: np.ndarray
    class_std: np.ndarray
    selected_mean: np.ndarray
    selected_std: np.ndarray
    dead_mean: np.ndarray
    dead_std: np.ndarray
    gc_size_mean: np.ndarray
    gc_size_std: np.ndarray
    extinction_frequency: float


def _ensemble_run(args) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    config, run_index = args
    rng = _rng_for_run(config.seed, run_index)
    trajectory = _run_with_rng(config, rng)
    if trajectory.truncated:
        raise PopulationCapError(
            f"run {run_index} exceeded the population cap at generation "
            f"{trajectory.t_last + 1}",
            state=trajectory.states[-1],
            t=trajectory.t_last + 1,
        )
    classes = np.stack([s.gc_counts for s in trajectory.states]).astype(float)
    selected = np.array([s.selected for s in trajectory.states], dtype=float)
    dead = np.array([s.dead for s in trajectory.states], dtype=float)
    return classes, selected, dead


def run_ensemble(config: RunConfig, n_runs: int, n_jobs: int = 1) -> EnsembleStats:
    """Simulate ``n_runs`` independent runs and aggregate their statistics.

    Each run owns a private stream derived from ``(seed, run index)``; the
    aggregation is a deterministic reduction, so the result is byte-stable
    for a given config regardless of ``n_jobs``.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if n_jobs < 1:
        raise ValueError("n_jobs must be at least 1")
    jobs = [(config, k) for k in range(n_runs)]
    if n_jobs == 1:
        results = [_ensemble_run(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_ensemble_run, jobs, chunksize=max(1, n_runs // (4 * n_jobs))))
    classes = np.stack([r[0] for r in results])
    selected = np.stack([r[1] for r in results])
    dead = np.stack([r[2] for r in results])
    gc_size = classes.sum(axis=2)
    return EnsembleStats(
        n_runs=n_runs,
        t_max=config.t_max,
        class_mean=classes.mean(axis=0),
        class_std=classes.std(axis=0),
        selected_mean=selected.mean(axis=0),
        selected_std=selected.std(axis=0),
        dead_mean=dead.mean(axis=0),
        dead_std=dead.std(axis=0),
        gc_size_mean=gc_size.mean(axis=0),
        gc_size_std=gc_size.std(axis=0),
        extinction_frequency=float((gc_size[:, -1] == 0).mean()),
    )


def empirical_extinction_curve(
    params: ModelParams,
    kernel: MutationKernel,
    rs_grid,
    initial: PopulationState,
    t_max: int = 100,
    n_runs: int = 1000,
    seed: int = 0,
    survival_threshold: int = 100_000,
    population_cap: int = DEFAULT_POPULATION_CAP,
) -> np.ndarray:
    """Empirical extinction frequency for each selection rate in the grid.

    A run counts as extinct when its center empties before ``t_max``. Runs
    whose center reaches ``survival_threshold`` cells (or the population
    cap) are counted as surviving and stopped early; from that size the
    residual extinction probability is negligible against Monte Carlo
    error.
    """
    grid = np.asarray(rs_grid, dtype=float)
    frequencies = np.zeros(grid.size)
    for g, rate in enumerate(grid):
        point_params = replace(params, selection_rate=float(rate))
        extinct = 0
        for run in range(n_runs):
            rng = np.random.default_rng(np.random.SeedSequence([seed, g, run]))
            state = initial
            for _ in range(t_max):
                if state.gc_size == 0:
                    break
                if state.gc_size >= survival_threshold:
                    break
                try:
                    state = step_generation(state, point_params, kernel, rng, population_cap)
                except PopulationCapError:
                    break
            if state.gc_size == 0:
                extinct += 1
        frequencies[g] = extinct / n_runs
    return frequencies


def trajectory_csv_header(n_classes: int) -> list[str]:
    return ["t"] + [f"class_{k}" for k in range(n_classes)] + ["selected", "dead", "gc_size"]


def trajectory_rows(trajectory: Trajectory) -> list[list[int]]:
    rows = []
    for t, state in enumerate(trajectory.states):
        rows.append(
            [t, *state.gc_counts.tolist(), state.selected, state.dead, state.gc_size]
        )
    return rows


def ensemble_csv_header(n_classes: int) -> list[str]:
    header = ["t"]
    for k in range(n_classes):
        header += [f"class_{k}_mean", f"class_{k}_std"]
    header += [
        "selected_mean",
        "selected_std",
        "dead_mean",
        "dead_std",
        "gc_size_mean",
        "gc_size_std",
    ]
    return header


def ensemble_rows(stats: EnsembleStats) -> list[list[float]]:
    rows = []
    for t in range(stats.t_max + 1):
        row: list[float] = [t]
        for k in range(stats.class_mean.shape[1]):
            row += [stats.class_mean[t, k], stats.class_std[t, k]]
        row += [
            stats.selected_mean[t],
            stats.selected_std[t],
            stats.dead_mean[t],
            stats.dead_std[t],
            stats.gc_size_mean[t],
            stats.gc_size_std[t],
        ]
        rows.append(row)
    return rows
