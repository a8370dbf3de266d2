"""Shared fixtures and independent oracles for the test suite.

The oracles here recompute expected values by routes deliberately different
from the library implementation: fixed-point iteration of the generating
polynomial, dense matrix powers of the full mean matrix, and brute-force
enumeration of the one-generation outcome tree.
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np
import pytest

from gcgw import (
    ModelParams,
    MutationKernel,
    OffspringDistribution,
    pgf_eval,
)
from gcgw.params import NEGATIVE_ONLY, POSITIVE_NEGATIVE, POSITIVE_ONLY


@pytest.fixture
def table1_params() -> ModelParams:
    """Default simulation parameter set used throughout."""
    return ModelParams(
        max_class=10,
        death_rate=0.1,
        division_rate=0.9,
        selection_rate=0.1,
        selection_threshold=3,
    )


def iterate_pgf_extinction(
    dist: OffspringDistribution, tol: float = 1e-12, max_iter: int = 100_000
) -> float:
    """Extinction probability as the limit of pgf iterates from 0."""
    s = 0.0
    for _ in range(max_iter):
        nxt = pgf_eval(dist, s)
        if abs(nxt - s) < tol:
            return nxt
        s = nxt
    return s


def dense_expected_state(initial_counts, full_matrix, t: int) -> np.ndarray:
    """Expectations via a dense power of the full matrix (oracle route)."""
    power = np.linalg.matrix_power(full_matrix, t)
    return np.asarray(initial_counts, dtype=float) @ power


def random_stochastic_kernel(rng: np.random.Generator, n_classes: int) -> MutationKernel:
    """Strictly positive row-stochastic kernel with Dirichlet rows."""
    rows = rng.dirichlet(np.ones(n_classes), size=n_classes)
    return MutationKernel(rows)


def random_params(rng: np.random.Generator, mode: str, max_class: int | None = None) -> ModelParams:
    n = int(rng.integers(1, 11)) if max_class is None else max_class
    return ModelParams(
        max_class=n,
        death_rate=float(rng.uniform(0.02, 0.98)),
        division_rate=float(rng.uniform(0.02, 0.98)),
        selection_rate=float(rng.uniform(0.02, 0.98)),
        selection_threshold=int(rng.integers(0, n + 1)),
        mode=mode,
    )


def _single_cell_outcome(j: int, tested: bool, params: ModelParams):
    """Fate of one post-mutation cell of class ``j``: ('gc', j), 'sel' or 'dead'."""
    if not tested:
        return ("gc", j)
    passes = j <= params.selection_threshold
    if params.mode == POSITIVE_NEGATIVE:
        return "sel" if passes else "dead"
    if params.mode == POSITIVE_ONLY:
        return "sel" if passes else ("gc", j)
    return ("gc", j) if passes else "dead"


def enumerate_offspring_law(params: ModelParams, kernel: MutationKernel, founder_class: int) -> dict:
    """Exact one-generation outcome law of a single founder cell.

    Enumerates the full event tree: death; undivided survival then a
    selection test at the founder's class; or division into two daughters,
    each drawing a class from the kernel and then facing the test
    independently. Keys are ``(gc_counts_tuple, selected, dead)``.
    """
    n = params.n_classes
    rd, rdiv, rs = params.death_rate, params.division_rate, params.selection_rate
    law: dict = defaultdict(float)

    def add(prob: float, fates) -> None:
        if prob == 0.0:
            return
        gc = [0] * n
        sel = dead = 0
        for fate in fates:
            if fate == "sel":
                sel += 1
            elif fate == "dead":
                dead += 1
            else:
                gc[fate[1]] += 1
        law[(tuple(gc), sel, dead)] += prob

    add(rd, ["dead"])
    solo = (1.0 - rd) * (1.0 - rdiv)
    for tested, p_test in ((True, rs), (False, 1.0 - rs)):
        add(solo * p_test, [_single_cell_outcome(founder_class, tested, params)])
    divide = (1.0 - rd) * rdiv
    row = kernel.entries[founder_class]
    for j1 in range(n):
        for tested1, pt1 in ((True, rs), (False, 1.0 - rs)):
            for j2 in range(n):
                for tested2, pt2 in ((True, rs), (False, 1.0 - rs)):
                    prob = divide * row[j1] * pt1 * row[j2] * pt2
                    add(
                        prob,
                        [
                            _single_cell_outcome(j1, tested1, params),
                            _single_cell_outcome(j2, tested2, params),
                        ],
                    )
    return dict(law)


def law_mean_vector(law: dict, params: ModelParams) -> np.ndarray:
    """Expected type counts implied by an enumerated outcome law."""
    n = params.n_classes
    mean = np.zeros(params.n_types)
    for (gc, sel, dead), prob in law.items():
        mean[:n] += prob * np.asarray(gc)
        if params.mode == NEGATIVE_ONLY:
            mean[n] += prob * dead
        else:
            mean[n] += prob * sel
            mean[n + 1] += prob * dead
    return mean
