"""Block mean matrices of the multi-type process and derived expectations.

The per-generation expectations of every cell type are encoded in a block
matrix: an in-center block over the affinity classes, exit columns into the
absorbing tallies (selected pool and/or dead), and an identity block that
keeps the tallies cumulative. Expectations at time t follow from powers of
that matrix; a spectral shortcut through the mutation kernel's
eigendecomposition is available when it is well conditioned.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DecompositionError
from .kernel import MutationKernel, SpectralDecomposition
from .params import (
    NEGATIVE_ONLY,
    POSITIVE_NEGATIVE,
    POSITIVE_ONLY,
    ModelParams,
    Schedule,
    validate_schedule,
)
from .singletype import critical_selection_rate

IMAG_RESIDUE_TOL = 1e-9
SPECTRAL_RECON_TOL = 1e-8
RHO_TOL = 1e-10
RHO_MAX_ITER = 100_000
FIXED_POINT_TOL = 1e-12
FIXED_POINT_RESIDUAL_TOL = 1e-10
FIXED_POINT_MAX_ITER = 1_000_000

CERTAIN = "certain"
POSSIBLE_SURVIVAL = "possible-survival"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class MeanMatrices:
    """Expected offspring counts per parent type, as a block matrix.

    ``gc_block`` maps in-center classes to in-center classes; ``exit_block``
    holds the expected flow into the absorbing tallies (two columns
    selected/dead, or a single dead column for ``negative_only``). ``full``
    is the assembled square matrix including the identity on the tallies.
    """

    full: np.ndarray
    gc_block: np.ndarray
    exit_block: np.ndarray
    mode: str

    @property
    def n_gc(self) -> int:
        return self.gc_block.shape[0]

    @property
    def n_types(self) -> int:
        return self.full.shape[0]


@dataclass(frozen=True)
class InitialState:
    """Type-count vector seeding the expectation recursions.

    The absorbing tallies must be zero at time zero; only in-center classes
    may be populated.
    """

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 1:
            raise ValueError("initial counts must be a 1-D vector")
        if counts.min() < 0:
            raise ValueError("initial counts must be nonnegative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def single_clone_state(params: ModelParams, initial_class: int, clone_count: int = 1) -> InitialState:
    """All founding cells in one affinity class."""
    if not 0 <= initial_class <= params.max_class:
        raise ValueError(f"initial_class {initial_class} out of range [0, {params.max_class}]")
    if clone_count < 0:
        raise ValueError("clone_count must be nonnegative")
    counts = np.zeros(params.n_types, dtype=np.int64)
    counts[initial_class] = clone_count
    return InitialState(counts)


def state_from_gc_counts(params: ModelParams, gc_counts) -> InitialState:
    """Founding population given per-class counts."""
    gc = np.asarray(gc_counts, dtype=np.int64)
    if gc.shape != (params.n_classes,):
        raise ValueError(f"expected {params.n_classes} class counts, got shape {gc.shape}")
    counts = np.zeros(params.n_types, dtype=np.int64)
    counts[: params.n_classes] = gc
    return InitialState(counts)


def _check_kernel(params: ModelParams, kernel: MutationKernel) -> None:
    if kernel.max_class != params.max_class:
        raise ValueError(
            f"kernel covers classes 0..{kernel.max_class} but params expect "
            f"0..{params.max_class}"
        )


def _assemble(gc_block: np.ndarray, exit_block: np.ndarray, mode: str) -> MeanMatrices:
    n_gc = gc_block.shape[0]
    n_exit = exit_block.shape[1]
    full = np.zeros((n_gc + n_exit, n_gc + n_exit))
    full[:n_gc, :n_gc] = gc_block
    full[:n_gc, n_gc:] = exit_block
    full[n_gc:, n_gc:] = np.eye(n_exit)
    return MeanMatrices(full=full, gc_block=gc_block, exit_block=exit_block, mode=mode)


def build_mean_matrix(params: ModelParams, kernel: MutationKernel) -> MeanMatrices:
    """Mean matrix of the full maturation cycle (selection included)."""
    _check_kernel(params, kernel)
    q = kernel.entries
    n = params.n_classes
    thr = params.selection_threshold
    rd, rdiv, rs = params.death_rate, params.division_rate, params.selection_rate
    keep = 1.0 - rd
    # Kernel row mass landing at or below the selection threshold.
    mass_low = q[:, : thr + 1].sum(axis=1)
    mass_high = q[:, thr + 1 :].sum(axis=1)
    passes = np.arange(n) <= thr

    if params.mode == POSITIVE_NEGATIVE:
        gc = 2.0 * keep * rdiv * (1.0 - rs) * q + keep * (1.0 - rdiv) * (1.0 - rs) * np.eye(n)
        selected = 2.0 * keep * rdiv * rs * mass_low + np.where(passes, keep * (1.0 - rdiv) * rs, 0.0)
        dead = rd + 2.0 * keep * rdiv * rs * mass_high + np.where(passes, 0.0, keep * (1.0 - rdiv) * rs)
        exit_block = np.column_stack([selected, dead])
    elif params.mode == POSITIVE_ONLY:
        # Only cells at or below the threshold can be pulled out of the
        # center, so only those columns carry the survival factor.
        col_keep = np.where(passes, 1.0 - rs, 1.0)
        gc = 2.0 * keep * rdiv * q * col_keep[None, :] + keep * (1.0 - rdiv) * np.diag(col_keep)
        selected = 2.0 * keep * rdiv * rs * mass_low + np.where(passes, keep * (1.0 - rdiv) * rs, 0.0)
        dead = np.full(n, rd)
        exit_block = np.column_stack([selected, dead])
    else:  # NEGATIVE_ONLY
        col_keep = np.where(passes, 1.0, 1.0 - rs)
        gc = 2.0 * keep * rdiv * q * col_keep[None, :] + keep * (1.0 - rdiv) * np.diag(col_keep)
        dead = rd + 2.0 * keep * rdiv * rs * mass_high + np.where(passes, 0.0, keep * (1.0 - rdiv) * rs)
        exit_block = dead[:, None]
    return _assemble(gc, exit_block, params.mode)


def build_preselection_matrix(params: ModelParams, kernel: MutationKernel) -> MeanMatrices:
    """Mean matrix of the cycle stopped before the selection test.

    Depends only on death, division and the kernel; the exit flow is pure
    death. Shaped to match the mode's type count.
    """
    _check_kernel(params, kernel)
    q = kernel.entries
    n = params.n_classes
    rd, rdiv = params.death_rate, params.division_rate
    keep = 1.0 - rd
    gc = 2.0 * keep * rdiv * q + keep * (1.0 - rdiv) * np.eye(n)
    dead = np.full(n, rd)
    if params.mode == NEGATIVE_ONLY:
        exit_block = dead[:, None]
    else:
        exit_block = np.column_stack([np.zeros(n), dead])
    return _assemble(gc, exit_block, params.mode)


def _real_part(matrix: np.ndarray) -> np.ndarray | None:
    """Project a complex result back to the reals, or None if too complex."""
    residue = float(np.max(np.abs(matrix.imag))) if np.iscomplexobj(matrix) else 0.0
    if residue > IMAG_RESIDUE_TOL * max(1.0, float(np.max(np.abs(matrix.real)))):
        return None
    return np.ascontiguousarray(matrix.real)


def _spectral_power_series(gc_block: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray] | None:
    """(block**t, sum of block**k for k < t) via eigendecomposition, or None."""
    n = gc_block.shape[0]
    try:
        eigenvalues, right = np.linalg.eig(gc_block)
        left = np.linalg.inv(right)
    except np.linalg.LinAlgError:
        return None
    scale = max(1.0, float(np.max(np.abs(gc_block))))
    recon_error = float(np.max(np.abs(right @ np.diag(eigenvalues) @ left - gc_block)))
    if recon_error > SPECTRAL_RECON_TOL * scale:
        return None
    powered = eigenvalues**t
    near_one = np.abs(eigenvalues - 1.0) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        geometric = np.where(near_one, float(t), (1.0 - powered) / (1.0 - eigenvalues))
    power = _real_part(right @ np.diag(powered) @ left)
    series = _real_part(right @ np.diag(geometric) @ left)
    if power is None or series is None:
        return None
    return power, series


def gc_block_power_series(
    gc_block: np.ndarray, t: int, method: str = "auto"
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(gc_block**t, sum_{k<t} gc_block**k)``.

    ``method`` is ``"auto"`` (spectral shortcut when well conditioned,
    iterated products otherwise), ``"spectral"`` or ``"iterative"``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if method not in ("auto", "spectral", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    n = gc_block.shape[0]
    if t == 0:
        return np.eye(n), np.zeros((n, n))
    if method in ("auto", "spectral"):
        result = _spectral_power_series(gc_block, t)
        if result is not None:
            return result
        if method == "spectral":
            raise DecompositionError(
                "mean-matrix block is not reliably diagonalizable; use the iterative route"
            )
    power = np.eye(n)
    series = np.zeros((n, n))
    for _ in range(t):
        series = series + power
        power = power @ gc_block
    return power, series


def expected_state_at(
    initial: InitialState, mean: MeanMatrices, t: int, method: str = "auto"
) -> np.ndarray:
    """Expected count of every type after ``t`` generations."""
    counts = initial.counts.astype(float)
    if counts.shape[0] != mean.n_types:
        raise ValueError(
            f"initial state has {counts.shape[0]} types, mean matrix expects {mean.n_types}"
        )
    n_gc = mean.n_gc
    power, series = gc_block_power_series(mean.gc_block, t, method=method)
    gc = counts[:n_gc] @ power
    exits = counts[n_gc:] + counts[:n_gc] @ (series @ mean.exit_block)
    return np.concatenate([gc, exits])


@dataclass(frozen=True)
class ExpectationReport:
    """Exact expectations of the maturation process at one time point.

    Affinity fields are ``None`` when the corresponding pool is empty, and
    the selected-pool fields are ``None`` in ``negative_only`` mode where
    that pool does not exist.
    """

    t: int
    per_type: np.ndarray
    gc_size: float
    gc_mean_affinity: float | None
    selected_at_t: float | None
    selected_cumulative: float | None
    selected_affinity_at_t: float | None
    selected_affinity_cumulative: float | None


def expectation_report(
    initial: InitialState, params: ModelParams, kernel: MutationKernel, t: int
) -> ExpectationReport:
    """Evolve the expectation vector ``t`` generations and summarize it."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    mean = build_mean_matrix(params, kernel)
    pre = build_preselection_matrix(params, kernel)
    if initial.counts.shape[0] != mean.n_types:
        raise ValueError("initial state does not match the mode's type count")
    n_gc = mean.n_gc
    if initial.counts[n_gc:].any():
        raise ValueError("absorbing tallies must be zero in the initial state")
    thr = params.selection_threshold
    rs = params.selection_rate
    affinity = params.max_class - np.arange(n_gc)

    vector = initial.counts.astype(float)
    last_pre = None
    selected_affinity_mass = 0.0  # running numerator of the cumulative affinity
    for _ in range(t):
        last_pre = vector[:n_gc] @ pre.gc_block
        selected_affinity_mass += rs * float((affinity[: thr + 1] * last_pre[: thr + 1]).sum())
        vector = vector @ mean.full

    gc = vector[:n_gc]
    gc_size = float(gc.sum())
    gc_mean_affinity = float((affinity * gc).sum() / gc_size) if gc_size > 0.0 else None

    if params.mode == NEGATIVE_ONLY:
        return ExpectationReport(
            t=t,
            per_type=vector,
            gc_size=gc_size,
            gc_mean_affinity=gc_mean_affinity,
            selected_at_t=None,
            selected_cumulative=None,
            selected_affinity_at_t=None,
            selected_affinity_cumulative=None,
        )

    selected_cumulative = float(vector[n_gc])
    if last_pre is None:  # t == 0, nothing has been selected yet
        selected_at_t = 0.0
        selected_affinity_at_t = None
    else:
        eligible = float(last_pre[: thr + 1].sum())
        selected_at_t = rs * eligible
        selected_affinity_at_t = (
            float((affinity[: thr + 1] * last_pre[: thr + 1]).sum() / eligible)
            if eligible > 0.0
            else None
        )
    selected_affinity_cumulative = (
        selected_affinity_mass / selected_cumulative if selected_cumulative > 0.0 else None
    )
    return ExpectationReport(
        t=t,
        per_type=vector,
        gc_size=gc_size,
        gc_mean_affinity=gc_mean_affinity,
        selected_at_t=selected_at_t,
        selected_cumulative=selected_cumulative,
        selected_affinity_at_t=selected_affinity_at_t,
        selected_affinity_cumulative=selected_affinity_cumulative,
    )


def _require_decomposition(decomposition: SpectralDecomposition) -> None:
    if not decomposition.condition_flag:
        raise DecompositionError(
            "kernel eigendecomposition failed its reconstruction check; "
            "use the matrix-power route instead"
        )


def closed_form_expected_selected(
    params: ModelParams,
    decomposition: SpectralDecomposition,
    initial_class: int,
    t: int,
) -> float:
    """Expected newly selected cells at generation ``t`` from one founder.

    Direct evaluation through the kernel's eigenbasis, equivalent to the
    matrix-power route whenever the decomposition is well conditioned.
    """
    _require_decomposition(decomposition)
    if t < 1:
        raise ValueError("t must be at least 1")
    n = decomposition.eigenvalues.shape[0]
    if not 0 <= initial_class < n:
        raise ValueError(f"initial_class {initial_class} out of range [0, {n - 1}]")
    rd, rdiv, rs = params.death_rate, params.division_rate, params.selection_rate
    thr = params.selection_threshold
    lam = decomposition.eigenvalues
    weights = decomposition.left_basis[:, : thr + 1].sum(axis=1)
    modes = (2.0 * lam * rdiv + 1.0 - rdiv) ** t
    total = complex((decomposition.right_basis[initial_class, :] * modes * weights).sum())
    value = rs * (1.0 - rs) ** (t - 1) * (1.0 - rd) ** t * total
    if abs(value.imag) > IMAG_RESIDUE_TOL * max(1.0, abs(value.real)):
        raise DecompositionError("imaginary residue too large in spectral evaluation")
    return value.real


def closed_form_gc_affinity(
    params: ModelParams,
    decomposition: SpectralDecomposition,
    initial_class: int,
    t: int,
) -> float:
    """Mean affinity inside the center at generation ``t`` from one founder.

    Depends only on the kernel, the division rate and the founding class;
    selection and death cancel out of the ratio.
    """
    _require_decomposition(decomposition)
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = decomposition.eigenvalues.shape[0]
    if not 0 <= initial_class < n:
        raise ValueError(f"initial_class {initial_class} out of range [0, {n - 1}]")
    rdiv = params.division_rate
    lam = decomposition.eigenvalues
    class_index = np.arange(n)
    weights = decomposition.left_basis @ class_index
    modes = (2.0 * lam * rdiv + 1.0 - rdiv) ** t
    total = complex((decomposition.right_basis[initial_class, :] * modes * weights).sum())
    value = total / (1.0 + rdiv) ** t
    if abs(value.imag) > IMAG_RESIDUE_TOL * max(1.0, abs(value.real)):
        raise DecompositionError("imaginary residue too large in spectral evaluation")
    return params.max_class - value.real


def optimal_selection_rate(t_star: int) -> float:
    """Selection rate maximizing the expected selected output at ``t_star``."""
    if t_star < 1:
        raise ValueError("t_star must be a positive integer")
    return 1.0 / t_star


def empirical_optimal_selection_rate(
    params: ModelParams,
    kernel: MutationKernel,
    initial: InitialState,
    t: int,
    rs_grid,
) -> float:
    """Grid argmax of the exact expected selected output at generation ``t``.

    Ties break toward the smaller selection rate. Works for the two modes
    that have a selected pool.
    """
    if params.mode == NEGATIVE_ONLY:
        raise ValueError("negative_only mode has no selected pool to maximize")
    if t < 1:
        raise ValueError("t must be at least 1")
    grid = np.sort(np.asarray(rs_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("rs_grid must be nonempty")
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise ValueError("rs_grid values must lie in [0, 1]")
    best_rate = float(grid[0])
    best_value = -np.inf
    for rate in grid:
        candidate = replace(params, selection_rate=float(rate))
        report = expectation_report(initial, candidate, kernel, t)
        if report.selected_at_t > best_value:
            best_value = report.selected_at_t
            best_rate = float(rate)
    return best_rate


class SpectralBounds(NamedTuple):
    lower: float
    upper: float
    rho: float


def _power_iteration_rho(block: np.ndarray, tol: float = RHO_TOL, max_iter: int = RHO_MAX_ITER) -> float:
    """Spectral radius of a nonnegative block by shifted power iteration.

    Iterates on ``block + I`` so that kernels with period two cannot make
    the iteration oscillate; stops when the eigen-residual drops below
    ``tol``.
    """
    n = block.shape[0]
    shifted = block + np.eye(n)
    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(max_iter):
        y = shifted @ x
        lam = float(np.linalg.norm(y))
        x = y / lam
        residual = float(np.max(np.abs(shifted @ x - lam * x)))
        if residual <= tol:
            return lam - 1.0
    raise ConvergenceError(
        f"power iteration did not reach residual {tol:g} within {max_iter} iterations"
    )


def spectral_bounds(mean: MeanMatrices) -> SpectralBounds:
    """Row-sum sandwich and spectral radius of the in-center block."""
    row_sums = mean.gc_block.sum(axis=1)
    rho = _power_iteration_rho(mean.gc_block)
    return SpectralBounds(lower=float(row_sums.min()), upper=float(row_sums.max()), rho=rho)


@dataclass(frozen=True)
class ExtinctionClassification:
    """Criticality verdict for the in-center population.

    ``category`` is ``certain`` when the spectral radius is at most one,
    ``possible-survival`` when it exceeds one, and ``indeterminate`` when
    the radius could not be computed. For the single-sided selection modes
    the two closed-form sufficient conditions are also reported:
    ``division_bound_certain`` (division too weak to beat death, extinction
    certain for every selection rate) and ``selection_bound_survival``
    (selection pressure below the critical rate, survival possible).
    """

    category: str
    rho: float | None
    division_bound_certain: bool | None
    selection_bound_survival: bool | None


def extinction_classification(params: ModelParams, kernel: MutationKernel) -> ExtinctionClassification:
    mean = build_mean_matrix(params, kernel)
    try:
        rho = _power_iteration_rho(mean.gc_block)
    except ConvergenceError:
        rho = None
    if rho is None:
        category = INDETERMINATE
    elif rho <= 1.0 + RHO_TOL:
        category = CERTAIN
    else:
        category = POSSIBLE_SURVIVAL
    division_bound = None
    selection_bound = None
    if params.mode in (POSITIVE_ONLY, NEGATIVE_ONLY):
        rd = params.death_rate
        division_bound = True if rd >= 1.0 else params.division_rate <= rd / (1.0 - rd)
        critical = critical_selection_rate(rd, params.division_rate)
        selection_bound = critical is not None and params.selection_rate < critical
    return ExtinctionClassification(
        category=category,
        rho=rho,
        division_bound_certain=division_bound,
        selection_bound_survival=selection_bound,
    )


def multitype_extinction_probability(
    params: ModelParams,
    kernel: MutationKernel,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> np.ndarray:
    """Per-founding-class probability that the in-center lineage dies out.

    Iterates the per-type generating functions from zero; the sequence
    increases to the smallest fixed point. Cells removed to the absorbing
    tallies count as gone from the center.
    """
    _check_kernel(params, kernel)
    q = kernel.entries
    n = params.n_classes
    thr = params.selection_threshold
    rd, rdiv, rs = params.death_rate, params.division_rate, params.selection_rate
    keep = 1.0 - rd
    passes = np.arange(n) <= thr
    if params.mode == POSITIVE_NEGATIVE:
        removed = np.ones(n, dtype=bool)
    elif params.mode == POSITIVE_ONLY:
        removed = passes
    else:
        removed = ~passes

    def generating(u: np.ndarray) -> np.ndarray:
        # Value of one cell after its selection test: removed cells are gone
        # from the center whatever their tally, kept cells carry on.
        tested = np.where(removed, rs + (1.0 - rs) * u, u)
        mixed = q @ tested
        return rd + keep * (1.0 - rdiv) * tested + keep * rdiv * mixed * mixed

    u = np.zeros(n)
    for _ in range(max_iter):
        nxt = generating(u)
        if float(np.max(np.abs(nxt - u))) < tol:
            u = nxt
            break
        u = nxt
    else:
        raise ConvergenceError(
            f"extinction fixed point not reached within {max_iter} iterations"
        )
    residual = float(np.max(np.abs(generating(u) - u)))
    if residual > FIXED_POINT_RESIDUAL_TOL:
        raise ConvergenceError(f"fixed-point residual {residual:.3e} above tolerance")
    return u


def heuristic_selected_estimate(params: ModelParams, stationary: np.ndarray, t: int) -> float:
    """Stationary-mixing approximation of the expected selected output.

    Assumes the class distribution has already relaxed to the kernel's
    invariant vector; useful as a sanity estimate, not as an oracle.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    pi = np.asarray(stationary, dtype=float)
    if pi.shape != (params.n_classes,):
        raise ValueError(f"stationary vector must have length {params.n_classes}")
    rd, rdiv, rs = params.death_rate, params.division_rate, params.selection_rate
    mass = float(pi[: params.selection_threshold + 1].sum())
    return (1.0 - rd) ** t * (1.0 + rdiv) ** t * (1.0 - rs) ** (t - 1) * rs * mass


def scheduled_expected_state(
    initial: InitialState,
    kernel: MutationKernel,
    schedule,
    t: int,
    method: str = "iterative",
) -> np.ndarray:
    """Expected type counts at ``t`` under a piecewise-constant schedule.

    Defaults to iterated products, which keep expectations exactly
    nonnegative; the spectral shortcut is available through ``method``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    segments: Schedule = validate_schedule(schedule, t)
    vector = initial.counts.astype(float)
    if t == 0:
        return vector
    first_mean = build_mean_matrix(segments[0][1], kernel)
    if vector.shape[0] != first_mean.n_types:
        raise ValueError("initial state does not match the schedule's type count")
    n_gc = first_mean.n_gc
    if initial.counts[n_gc:].any():
        raise ValueError("absorbing tallies must be zero in the initial state")
    reached = 0
    for t_end, params in segments:
        steps = min(t, t_end) - reached
        if steps <= 0:
            continue
        mean = build_mean_matrix(params, kernel)
        power, series = gc_block_power_series(mean.gc_block, steps, method=method)
        gc = vector[:n_gc] @ power
        exits = vector[n_gc:] + vector[:n_gc] @ (series @ mean.exit_block)
        vector = np.concatenate([gc, exits])
        reached += steps
        if reached == t:
            break
    return vector
