"""Constraint-guided recombination operators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .core import Chromosome, ProblemAdapter
from .localsearch import kempe_chain_move

if TYPE_CHECKING:
    from .timetabling import Timetable, TimetablingProblem


class Nonduplicates(NamedTuple):
    marker: List[int]
    d1: List[int]
    d2: List[int]
    ops: int


def mark_nonduplicates(c1: Iterable[int], c2: Iterable[int], n: int) -> Nonduplicates:
    """Marker-vector split of two allele collections into their non-shared parts.

    Every value of ``c1`` adds 1 and every value of ``c2`` adds 10 to a zero
    vector of length ``n``; cells holding 1 or 10 are the non-duplicates.
    """
    marker = [0] * n
    ops = 0
    for v in c1:
        if not 0 <= v < n:
            raise ValueError(f"allele {v} outside [0, {n})")
        marker[v] += 1
        ops += 1
    for v in c2:
        if not 0 <= v < n:
            raise ValueError(f"allele {v} outside [0, {n})")
        marker[v] += 10
        ops += 1
    d1 = [i for i, a in enumerate(marker) if a == 1]
    d2 = [i for i, a in enumerate(marker) if a == 10]
    return Nonduplicates(marker, d1, d2, ops + n)


@dataclass
class FusionReport:
    offspring: Chromosome
    appended: int = 0
    rejected: int = 0
    marker_ops: int = 0
    compare_ops: int = 0
    candidates: int = 0

    @property
    def ops(self) -> int:
        return self.marker_ops + self.compare_ops


class BrokenInvariant(RuntimeError):
    pass


def _fuse_into(receiver: Chromosome, donor: Chromosome, nondup: set, problem: ProblemAdapter,
               active: Optional[Sequence[int]], marker_ops: int) -> FusionReport:
    child = receiver.copy()
    child.fitness = None
    rep = FusionReport(child, marker_ops=marker_ops)
    key_of, target_for, check, place = problem.key_of, problem.target_for, problem.check, problem.place
    candidates = appended = compare_ops = 0
    for cid, value in list(donor.genes.items()):
        if key_of(cid, value) not in nondup:
            continue
        candidates += 1
        target = target_for(child, cid, active)
        if target is None:
            continue
        ok, ops = check(child, target, value)
        compare_ops += ops
        if ok:
            place(child, target, value)
            appended += 1
    rep.candidates, rep.appended, rep.compare_ops = candidates, appended, compare_ops
    rep.rejected = candidates - appended
    return rep


def intermarriage_fuse(pi: Chromosome, pj: Chromosome, problem: ProblemAdapter,
                       active: Optional[Sequence[int]] = None,
                       validate: bool = False) -> Tuple[FusionReport, FusionReport]:
    """Fuse two feasible partial solutions into two offspring.

    Each offspring starts as a copy of one parent and receives, one at a time
    and in the other parent's gene order, every non-duplicate allele that is
    compatible with what it already holds.
    """
    if validate and not (problem.is_feasible(pi) and problem.is_feasible(pj)):
        raise BrokenInvariant("broken invariant: infeasible parent")
    n = problem.key_space()
    key_of = problem.key_of
    nd = mark_nonduplicates(
        (key_of(c, v) for c, v in pi.genes.items()),
        (key_of(c, v) for c, v in pj.genes.items()),
        n,
    )
    oi = _fuse_into(pi, pj, set(nd.d2), problem, active, nd.ops)
    oj = _fuse_into(pj, pi, set(nd.d1), problem, active, nd.ops)
    return oi, oj


def accept_offspring(child: Chromosome, parent: Chromosome) -> bool:
    """Strictly longer always wins; equal length only when it differs."""
    if len(child) > len(parent):
        return True
    return len(child) == len(parent) and child.digest != parent.digest


def influence_move(a: Sequence[int], b: Sequence[int], positions: Iterable[int]) -> List[int]:
    """Pull permutation ``a`` towards ``b`` at the given 0-based positions.

    For each position q, the value ``b[q]`` is removed from ``a`` and
    reinserted at q.
    """
    out = list(a)
    n = len(out)
    if len(b) != n or sorted(a) != sorted(b):
        raise ValueError("influence needs two permutations of the same values")
    for q in positions:
        if not 0 <= q < n:
            raise ValueError(f"position {q} out of range")
        v = b[q]
        out.remove(v)
        out.insert(q, v)
    return out


def kempe_crossover(a: "Timetable", b: "Timetable", exam: int, problem: "TimetablingProblem") -> "Timetable":
    """Move ``exam`` in ``a`` to the slot index it holds in ``b`` by a Kempe chain."""
    if exam not in a or exam not in b:
        raise KeyError(f"exam {exam} not in both timetables")
    target, current = b[exam], a[exam]
    if target == current:
        return dict(a)
    return kempe_chain_move(a, current, target, [exam], problem)


def influence_timetable(a: "Timetable", b: "Timetable", degree: int, problem: "TimetablingProblem", rng) -> "Timetable":
    """Influence ``a`` by ``degree`` differing exams of ``b`` via Kempe crossover."""
    diff = [e for e, s in b.items() if a.get(e) is not None and a[e] != s]
    if not diff:
        return dict(a)
    out = a
    for e in rng.sample(diff, min(degree, len(diff))):
        out = kempe_crossover(out, b, e, problem)
    return out if out is not a else dict(a)


def best_guided_exchange(pi, pj, pbest, degree: int, rng, problem: "Optional[TimetablingProblem]" = None):
    """Four influence steps: i by j, j by i, then both by the best.

    Permutations (lists) use :func:`influence_move` at ``degree`` random
    positions; timetables (dicts) use Kempe crossover so feasibility holds.
    """
    if isinstance(pi, dict):
        if problem is None:
            raise ValueError("timetable exchange needs the problem adapter")
        pi2 = influence_timetable(pi, pj, degree, problem, rng)
        pj2 = influence_timetable(pj, pi, degree, problem, rng)
        pi2 = influence_timetable(pi2, pbest, degree, problem, rng)
        pj2 = influence_timetable(pj2, pbest, degree, problem, rng)
        return pi2, pj2
    n = len(pi)

    def pick() -> List[int]:
        return rng.sample(range(n), min(degree, n))

    pi2 = influence_move(pi, pj, pick())
    pj2 = influence_move(pj, pi, pick())
    pi2 = influence_move(pi2, pbest, pick())
    pj2 = influence_move(pj2, pbest, pick())
    return pi2, pj2
