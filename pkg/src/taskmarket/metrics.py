"""Firm-level measurement: task scores, hiring concentration, winsorization
and instrument construction."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .model import DomainError, Occupation

TASKS = ("routine", "abstract", "manual")

# Qualitative task-intensity grid, "+" -> 1 and "-" -> 0, as
# (routine, abstract, manual).
TABLE3_ROWS = {
    "managers_professionals_technicians": (0.0, 1.0, 0.0),
    "production_craft": (1.0, 1.0, 0.0),
    "transport_construction_mechanics": (0.0, 0.0, 1.0),
    "machine_operators_assemblers": (1.0, 0.0, 1.0),
    "clerical_retail_sales": (1.0, 0.0, 0.0),
    "service": (0.0, 0.0, 1.0),
}

DEFAULT_CROSSWALK = {
    Occupation.MGMT: "managers_professionals_technicians",
    Occupation.PROF: "managers_professionals_technicians",
    Occupation.TECH: "managers_professionals_technicians",
    Occupation.AUX: "clerical_retail_sales",
    Occupation.PHYS: "machine_operators_assemblers",
}


class NotDistribution(ValueError):
    pass


@dataclass(frozen=True)
class TaskWeights:
    """Per-group (routine, abstract, manual) loadings."""

    weights: Mapping[Hashable, tuple[float, float, float]]

    def __post_init__(self):
        for group, w in self.weights.items():
            if len(w) != 3 or any(x < 0 or not math.isfinite(x) for x in w):
                raise DomainError(f"task weights for {group!r} must be three nonnegative numbers")

    def for_task(self, task: str) -> dict:
        i = TASKS.index(task)
        return {g: w[i] for g, w in self.weights.items()}

    @classmethod
    def default(cls, crosswalk: Mapping[Occupation, str] | None = None,
                rows: Mapping[str, Sequence[float]] | None = None) -> "TaskWeights":
        crosswalk = DEFAULT_CROSSWALK if crosswalk is None else crosswalk
        rows = TABLE3_ROWS if rows is None else rows
        return cls({occ: tuple(float(x) for x in rows[row]) for occ, row in crosswalk.items()})


def task_score(weights: Mapping[Hashable, float], counts: Mapping[Hashable, float]) -> float:
    """``log(1 + sum_j weight_j * count_j)`` over the groups in ``counts``."""
    total = 0.0
    for group, count in counts.items():
        if count < 0:
            raise DomainError(f"negative posting count for {group!r}")
        if group not in weights:
            raise DomainError(f"no task weight for group {group!r}")
        w = weights[group]
        if w < 0:
            raise DomainError(f"negative task weight for {group!r}")
        total += w * count
    return math.log1p(total)


def task_scores(tw: TaskWeights, counts: Mapping[Hashable, float]) -> dict[str, float]:
    return {task: task_score(tw.for_task(task), counts) for task in TASKS}


def hhi(shares: Sequence[float], atol: float = 1e-9) -> float:
    """Sum of squared shares, correctly rounded."""
    s = np.asarray(shares, dtype=float)
    if s.size == 0 or np.any(s < 0) or not abs(s.sum() - 1.0) <= atol:
        raise NotDistribution(f"shares must be nonnegative and sum to 1, got sum={s.sum()!r}")
    # exact rational sum, rounded once
    return float(sum(Fraction(float(x)) ** 2 for x in s))


def nearest_rank(sorted_values: Sequence[float], p: float) -> float:
    """The ceil(p*n)-th order statistic (1-indexed), at least the first."""
    n = len(sorted_values)
    # rounding guards against p*n landing a hair above an integer
    rank = max(1, math.ceil(round(p * n, 9)))
    return sorted_values[min(rank, n) - 1]


def winsorize(values: Sequence[float], p_lo: float = 0.01, p_hi: float = 0.99) -> list[float]:
    if len(values) == 0:
        raise ValueError("cannot winsorize an empty list")
    if not 0.0 <= p_lo < p_hi <= 1.0:
        raise ValueError("need 0 <= p_lo < p_hi <= 1")
    ordered = sorted(values)
    lo, hi = nearest_rank(ordered, p_lo), nearest_rank(ordered, p_hi)
    return [min(max(v, lo), hi) for v in values]


def leave_one_out_mean(rows: Iterable[tuple[Hashable, Hashable, float]]) -> list[tuple[Hashable, Hashable, float | None]]:
    """Peer mean within each group, excluding the unit itself.

    ``rows`` are ``(group, unit, value)``; singleton groups get ``None``.
    Output follows input order.
    """
    rows = list(rows)
    sums: dict = defaultdict(float)
    sizes: dict = defaultdict(int)
    seen = set()
    for group, unit, value in rows:
        if (group, unit) in seen:
            raise ValueError(f"duplicate unit {unit!r} in group {group!r}")
        seen.add((group, unit))
        sums[group] += value
        sizes[group] += 1
    out = []
    for group, unit, value in rows:
        n = sizes[group]
        out.append((group, unit, (sums[group] - value) / (n - 1) if n > 1 else None))
    return out


def lag_series(values: Mapping[tuple[Hashable, int], float], lag: int = 1) -> dict[tuple[Hashable, int], float | None]:
    """Value at ``(unit, t - lag)`` for every key ``(unit, t)``; ``None`` if absent."""
    if lag < 1:
        raise ValueError("lag must be a positive integer")
    return {(unit, t): values.get((unit, t - lag)) for unit, t in values}
