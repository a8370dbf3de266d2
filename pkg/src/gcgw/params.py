"""Model parameters shared by the analytic and simulation layers."""
from __future__ import annotations

from dataclasses import dataclass

POSITIVE_NEGATIVE = "positive_negative"
POSITIVE_ONLY = "positive_only"
NEGATIVE_ONLY = "negative_only"
MODES = (POSITIVE_NEGATIVE, POSITIVE_ONLY, NEGATIVE_ONLY)


@dataclass(frozen=True)
class ModelParams:
    """Per-generation event rates and the selection rule.

    Affinity classes are indexed ``0..max_class``; class 0 binds the target
    best, class ``max_class`` worst. ``selection_threshold`` is the largest
    class index that passes positive selection. ``mode`` picks what happens
    to a cell once it faces the selection test:

    * ``positive_negative`` -- passing cells leave for the selected pool,
      failing cells die.
    * ``positive_only`` -- passing cells leave for the selected pool,
      failing cells stay in place.
    * ``negative_only`` -- passing cells stay in place, failing cells die
      (there is no selected pool).
    """

    max_class: int
    death_rate: float
    division_rate: float
    selection_rate: float
    selection_threshold: int
    mode: str = POSITIVE_NEGATIVE

    def __post_init__(self) -> None:
        if self.max_class < 1:
            raise ValueError("max_class must be a positive integer")
        for name in ("death_rate", "division_rate", "selection_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not 0 <= self.selection_threshold <= self.max_class:
            raise ValueError(
                "selection_threshold must lie in {0,...,max_class}, got "
                f"{self.selection_threshold}"
            )
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def n_classes(self) -> int:
        """Number of affinity classes (``max_class + 1``)."""
        return self.max_class + 1

    @property
    def n_types(self) -> int:
        """Number of cell types tracked by the mean-field process.

        Affinity classes plus the absorbing tallies: selected and dead for
        the modes with a selected pool, dead alone for ``negative_only``.
        """
        if self.mode == NEGATIVE_ONLY:
            return self.max_class + 2
        return self.max_class + 3


Schedule = tuple[tuple[int, ModelParams], ...]


def validate_schedule(schedule, t_max: int) -> Schedule:
    """Check a piecewise-constant parameter schedule.

    ``schedule`` is a sequence of ``(t_end, params)`` segments; segment k
    applies to generations ``t_prev_end+1 .. t_end``. Segments must be
    contiguous (strictly increasing ``t_end``), cover ``[1, t_max]``, and
    agree on ``max_class`` and ``mode``.
    """
    segments = tuple((int(t_end), params) for t_end, params in schedule)
    if not segments:
        raise ValueError("schedule must contain at least one segment")
    prev_end = 0
    first = segments[0][1]
    for t_end, params in segments:
        if t_end <= prev_end:
            raise ValueError(
                f"schedule segments overlap or are out of order at t_end={t_end}"
            )
        if params.max_class != first.max_class or params.mode != first.mode:
            raise ValueError("all schedule segments must share max_class and mode")
        prev_end = t_end
    if t_max > prev_end:
        raise ValueError(
            f"schedule ends at t={prev_end} but must cover generations up to {t_max}"
        )
    return segments


def params_at(schedule: Schedule, t: int) -> ModelParams:
    """Parameters in force at generation ``t`` (1-based)."""
    for t_end, params in schedule:
        if t <= t_end:
            return params
    raise ValueError(f"generation {t} is beyond the end of the schedule")
