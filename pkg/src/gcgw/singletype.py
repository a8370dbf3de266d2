"""Scalar branching process for the total germinal-center population.

Tracks only the number of cells still in the center: each cell leaves at
most two descendants per generation, because a selection test removes the
tested cell from the center whatever its class. Class structure and the
fate of removed cells are handled by the multi-type layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .params import ModelParams

PROB_TOL = 1e-12
_LOG_FLOAT_MAX = 709.0


@dataclass(frozen=True)
class OffspringDistribution:
    """Law of the number of in-center descendants of one cell, one generation."""

    p0: float
    p1: float
    p2: float

    def __post_init__(self) -> None:
        for name in ("p0", "p1", "p2"):
            value = getattr(self, name)
            if not -PROB_TOL <= value <= 1.0 + PROB_TOL:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if abs(self.p0 + self.p1 + self.p2 - 1.0) > PROB_TOL:
            raise ValueError("offspring probabilities must sum to 1")

    @property
    def mean(self) -> float:
        return self.p1 + 2.0 * self.p2


def offspring_distribution(params: ModelParams) -> OffspringDistribution:
    """Offspring law induced by the death/division/selection rates.

    A cell dies, or survives and possibly divides; every survivor (and each
    daughter) stays in the center only if it is not picked for selection.
    The mode is irrelevant here: tested cells leave the center either way.
    """
    rd, rdiv, rs = params.death_rate, params.division_rate, params.selection_rate
    p0 = rd + (1.0 - rd) * rs * (1.0 - rdiv + rdiv * rs)
    p1 = (1.0 - rd) * (1.0 - rs) * (1.0 - rdiv + 2.0 * rdiv * rs)
    p2 = rdiv * (1.0 - rd) * (1.0 - rs) ** 2
    return OffspringDistribution(p0=p0, p1=p1, p2=p2)


def pgf_eval(dist: OffspringDistribution, s: float) -> float:
    """Evaluate the generating polynomial ``p0 + p1*s + p2*s**2``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"pgf argument must lie in [0, 1], got {s}")
    return dist.p0 + dist.p1 * s + dist.p2 * s * s


def growth_factor(params: ModelParams) -> float:
    """Expected in-center descendants per cell per generation."""
    return (1.0 - params.death_rate) * (1.0 + params.division_rate) * (1.0 - params.selection_rate)


def preselection_growth_factor(params: ModelParams) -> float:
    """Expected descendants per cell counted before the selection test."""
    return (1.0 - params.death_rate) * (1.0 + params.division_rate)


def expected_gc_size(params: ModelParams, initial_cells: int, t: int) -> float:
    """Expected center size after ``t`` generations from ``initial_cells``.

    Returns ``inf`` when the supercritical growth overflows double
    precision (evaluated in log space to detect that cleanly).
    """
    if initial_cells < 0:
        raise ValueError("initial_cells must be nonnegative")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0 or initial_cells == 0:
        return float(initial_cells)
    g = growth_factor(params)
    if g == 0.0:
        return 0.0
    if math.log(initial_cells) + t * math.log(g) > _LOG_FLOAT_MAX:
        return math.inf
    return initial_cells * g**t


def extinction_probability(params: ModelParams, initial_cells: int = 1) -> float:
    """Probability that the center eventually empties.

    The per-lineage probability is the smallest fixed point of the
    generating polynomial, available in closed form for a quadratic;
    ``initial_cells`` independent lineages multiply.
    """
    if initial_cells < 1:
        raise ValueError("initial_cells must be at least 1")
    dist = offspring_distribution(params)
    if dist.p2 <= 0.0:
        # Linear pgf: the only fixed point in [0, 1] is 1, except in the
        # deterministic one-offspring case where the lineage never dies.
        eta = 0.0 if dist.p0 == 0.0 else 1.0
    else:
        eta = min(1.0, dist.p0 / dist.p2)
    return eta**initial_cells


def critical_selection_rate(death_rate: float, division_rate: float) -> float | None:
    """Smallest selection rate that makes extinction certain.

    Returns ``None`` when no selection rate can rescue criticality, i.e.
    the population dies out for every selection rate because death and
    division alone cannot sustain it.
    """
    for name, value in (("death_rate", death_rate), ("division_rate", division_rate)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    product = (1.0 - death_rate) * (1.0 + division_rate)
    if product < 1.0:
        return None
    return 1.0 - 1.0 / product
