"""Fitness and cost functions.

Includes plain violation counts, weighted penalties, the preference-ordered
generic fitness family (with an overflow-free lexicographic comparator) and
the Carter proximity cost for exam timetables.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Mapping, Sequence, Tuple

if TYPE_CHECKING:
    from .core import Chromosome, ProblemAdapter
    from .timetabling import ConflictMatrix

#: proximity weight indexed by slot gap; gaps beyond 5 cost nothing
GAP_WEIGHTS = (0, 16, 8, 4, 2, 1)
MAX_GAP = 5


class HardViolationError(ValueError):
    pass


@dataclass(frozen=True)
class PreferenceHistogram:
    """Satisfied-constraint counts per preference level, most preferred first."""

    counts: Tuple[int, ...]
    L: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.L <= 0:
            raise ValueError("L must be positive")
        if len(self.counts) < 2:
            raise ValueError("need at least two preference levels (D > 0)")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")

    @property
    def D(self) -> int:
        return len(self.counts) - 1

    @property
    def base(self) -> int:
        return self.L * self.L + 2

    def __iter__(self):
        return iter(self.counts)


def violation_fitness(x: Mapping[int, int], problem: "ProblemAdapter") -> int:
    """Number of satisfied constraints of a complete assignment."""
    if len(x) != problem.m or any(c not in x for c in range(1, problem.m + 1)):
        raise ValueError("partial assignment")
    return sum(problem.satisfied(dict(x)))


def weighted_fitness(x: Mapping[int, int], w: Sequence, problem: "ProblemAdapter"):
    if len(w) != problem.m:
        raise ValueError(f"weight vector has length {len(w)}, expected {problem.m}")
    if any(wi < 0 for wi in w):
        raise ValueError("weights must be non-negative")
    if len(x) != problem.m:
        raise ValueError("partial assignment")
    sat = problem.satisfied(dict(x))
    return sum(wi * ci for wi, ci in zip(w, sat))


def partial_fitness(p: "Chromosome") -> int:
    return len(p)


def partial_cost(p: "Chromosome", m: int) -> int:
    if len(p) > m:
        raise ValueError(f"chromosome of length {len(p)} exceeds m={m}")
    return m - len(p)


def basic_pref_fitness(h: PreferenceHistogram) -> int:
    return sum(h.counts)


def weighted_pref_fitness(h: PreferenceHistogram, w: Sequence):
    if len(w) != len(h.counts):
        raise ValueError(f"expected {len(h.counts)} weights, got {len(w)}")
    return sum(wp * lp for wp, lp in zip(w, h.counts))


def pref_fitness_max(h: PreferenceHistogram) -> int:
    """Higher preferences dominate: sum of l_p * (L^2+2)^(D-p), exactly."""
    mu, D = h.base, h.D
    total = 0
    for p, lp in enumerate(h.counts):
        total += lp * mu ** (D - p)
    return total


def _check_bound(h: PreferenceHistogram) -> None:
    bound = h.L * h.L
    if any(lp > bound for lp in h.counts):
        raise ValueError("histogram exceeds bound")


def pref_fitness_min(h: PreferenceHistogram) -> int:
    """Fewer satisfactions at low preferences is better: sum (L^2-l_p)(L^2+2)^p."""
    _check_bound(h)
    mu, sq = h.base, h.L * h.L
    return sum((sq - lp) * mu ** p for p, lp in enumerate(h.counts))


def pref_fitness_combined(h: PreferenceHistogram) -> int:
    _check_bound(h)
    return h.base ** (h.D + 1) * sum(h.counts) + pref_fitness_min(h)


def pref_compare_lex(a: PreferenceHistogram, b: PreferenceHistogram, sense: str = "max") -> int:
    """Compare two histograms without big integers.

    Returns 1 if ``a`` is fitter, -1 if ``b`` is, 0 on a tie.  The ordering is
    the one induced by :func:`pref_fitness_max` (``sense="max"``) or
    :func:`pref_fitness_min` (``sense="min"``).
    """
    if len(a.counts) != len(b.counts) or a.L != b.L:
        raise ValueError("histograms have different dimensions")
    if sense == "max":
        ka, kb = a.counts, b.counts
    elif sense == "min":
        # smaller counts at the least preferred level win first
        ka = tuple(-c for c in reversed(a.counts))
        kb = tuple(-c for c in reversed(b.counts))
    else:
        raise ValueError(f"unknown sense {sense!r}")
    return (ka > kb) - (ka < kb)


# ---- timetabling cost ------------------------------------------------------


def _pairs(tt: Mapping[int, int], cm: "ConflictMatrix"):
    for i, j, n in cm.edge_list():
        si = tt.get(i)
        sj = tt.get(j)
        if si is None or sj is None:
            continue
        if si == sj:
            raise HardViolationError(f"hard violation: exams {i} and {j} share slot {si}")
        yield abs(si - sj), n


def proximity_numerator(tt: Mapping[int, int], cm: "ConflictMatrix") -> int:
    total = 0
    for gap, n in _pairs(tt, cm):
        if gap <= MAX_GAP:
            total += n * GAP_WEIGHTS[gap]
    return total


def proximity_cost(tt: Mapping[int, int], cm: "ConflictMatrix", n_students: int) -> Fraction:
    """Carter proximity cost as an exact rational.

    Unassigned exams are ignored, so partial timetables evaluate on the pairs
    they do place.
    """
    if n_students <= 0:
        raise ValueError("student count must be positive")
    return Fraction(proximity_numerator(tt, cm), n_students)


def gap_histogram(tt: Mapping[int, int], cm: "ConflictMatrix") -> Tuple[int, ...]:
    counts = [0] * MAX_GAP
    for gap, _ in _pairs(tt, cm):
        if gap <= MAX_GAP:
            counts[gap - 1] += 1
    return tuple(counts)


def preference_histogram(tt: Mapping[int, int], cm: "ConflictMatrix") -> PreferenceHistogram:
    """Conflicting pairs per slot gap 1..5 (each unordered pair once)."""
    # conflict-free instances still need L > 0
    return PreferenceHistogram(gap_histogram(tt, cm), max(1, cm.n_edges))


def generic_preferences(tt: Mapping[int, int], cm: "ConflictMatrix") -> PreferenceHistogram:
    """Timetable spread as satisfied constraints ordered by preference.

    Level 0 holds pairs more than five slots apart (most preferred), levels
    1..5 hold gaps 5..1, so the adjacent-slot count is the least preferred.
    """
    gaps = gap_histogram(tt, cm)
    placed = sum(1 for _ in _pairs(tt, cm))
    far = placed - sum(gaps)
    return PreferenceHistogram((far,) + tuple(reversed(gaps)), max(1, cm.n_edges))


def generic_key(gaps: Sequence[int]) -> Tuple[int, ...]:
    """Minimisation key for generic-fitness mode (gap-1 count most significant).

    Orders timetables exactly like :func:`pref_fitness_combined` applied to
    :func:`generic_preferences` when every conflicting pair is placed.
    """
    return tuple(gaps)
