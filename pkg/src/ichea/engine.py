"""Incremental constraint-driven evolutionary search.

A run adds constraints batch by batch (largest degree first).  Inside an
increment the infeasible pool grows partial solutions by fusion and
mutation; members that hold every active constraint move to the feasible
pool, which is refined by reversible clonal hill-climbing.
"""

from __future__ import annotations

import logging
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .core import Chromosome, EngineConfig, Population, ProblemAdapter, batch_size, chunked
from .crossover import accept_offspring, intermarriage_fuse
from .localsearch import (
    OperatorKind,
    OperatorSequencer,
    RchcStats,
    RepairSet,
    community_influence_step,
    kempe_traditional,
    rchc_step,
)

logger = logging.getLogger(__name__)

WILDCARD = None


# ---- increments -------------------------------------------------------------------


@dataclass
class IncrementPlan:
    batches: List[List[int]]
    fraction: float = 0.05

    def __post_init__(self) -> None:
        if not self.batches or any(not b for b in self.batches):
            raise ValueError("increment plan needs non-empty batches")

    @classmethod
    def build(cls, order: Sequence[int], fraction: float) -> "IncrementPlan":
        size = batch_size(len(order), fraction)
        return cls(list(chunked(list(order), size)), fraction)

    @classmethod
    def for_problem(cls, problem: ProblemAdapter, fraction: float) -> "IncrementPlan":
        return cls.build(problem.ld_order(), fraction)

    def __len__(self) -> int:
        return len(self.batches)

    def active(self, i: int) -> List[int]:
        """Constraints of batches 0..i."""
        out: List[int] = []
        for b in self.batches[: i + 1]:
            out.extend(b)
        return out

    def span(self, i: int) -> Tuple[int, int]:
        """1-based positions in the overall order covered by batch i."""
        start = sum(len(b) for b in self.batches[:i]) + 1
        return start, start + len(self.batches[i]) - 1


def ld_order(cm) -> List[int]:
    from .timetabling import ld_order as _ld

    return _ld(cm)


def initialize_increment(batch: Sequence[int], pop_size: int, rng, problem: ProblemAdapter,
                         generation: int = 0) -> List[Chromosome]:
    """Random chromosomes over ``batch``; clashing genes are dropped as they are drawn."""
    if not batch:
        raise ValueError("empty batch")
    out = []
    for _ in range(pop_size):
        c = Chromosome()
        for constraint in batch:
            dom = problem.domain(constraint)
            value = dom[rng.randrange(len(dom))]
            ok, _ = problem.check(c, constraint, value)
            if ok:
                problem.place(c, constraint, value)
        c.improved_at = -generation - 1_000_000
        out.append(c)
    return out


# ---- survivor selection -------------------------------------------------------------


def survivor_curve(n: int, kappa: int, rho: float) -> Tuple[List[int], List[int]]:
    """Raw and de-duplicated survivor indices into a pool of n + kappa, best first.

    The exponent is scaled by n - 1 and the index range by n + kappa - 1 so
    that the first survivor is the best and the last is the pool's tail; the
    de-duplication steps past the previous *adjusted* index.
    """
    if n < 2:
        raise ValueError("need at least two survivors")
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if kappa == 0:
        ident = list(range(n))
        return ident, list(ident)
    f = [math.exp(-rho * (n - i) / (n - 1)) for i in range(1, n + 1)]
    f1 = f[0]
    top = n + kappa - 1
    raw = [math.floor(top * (fi - f1) / (1.0 - f1) + 1e-9) for fi in f]
    raw = [min(max(v, 0), top) for v in raw]
    out = [raw[0]]
    for v in raw[1:]:
        out.append(out[-1] + 1 if v <= out[-1] else v)
    return raw, out


def select_survivors(n: int, kappa: int, rho: float = 5.0) -> List[int]:
    return survivor_curve(n, kappa, rho)[1]


# ---- tabu regions --------------------------------------------------------------------


@dataclass(frozen=True)
class TabuPattern:
    slots: Tuple[Optional[int], ...]

    @property
    def wildcards(self) -> int:
        return sum(1 for v in self.slots if v is WILDCARD)

    def __len__(self) -> int:
        return len(self.slots)


class BestHistory:
    """The last ``t`` best solution vectors, newest first."""

    def __init__(self, t: int = 5) -> None:
        self.t = t
        self.items: List[Tuple[Optional[int], ...]] = []

    def push(self, vector: Sequence[Optional[int]]) -> None:
        self.items.insert(0, tuple(vector))
        del self.items[self.t:]

    def clear(self) -> None:
        self.items.clear()

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int) -> Tuple[Optional[int], ...]:
        return self.items[i]


def _intersect(a: Sequence[Optional[int]], b: Sequence[Optional[int]]) -> Tuple[Optional[int], ...]:
    if len(a) != len(b):
        raise ValueError("solution vectors differ in length")
    return tuple(x if (x is not WILDCARD and x == y) else WILDCARD for x, y in zip(a, b))


def tabu_intersect(history, depth: int) -> TabuPattern:
    """Positional intersection of the newest best with the next ``depth`` ones."""
    items = list(history.items if isinstance(history, BestHistory) else history)
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if len(items) < depth + 1:
        raise ValueError(f"insufficient history: need {depth + 1}, have {len(items)}")
    pat = tuple(items[0])
    for prev in items[1: depth + 1]:
        pat = _intersect(pat, prev)
    return TabuPattern(pat)


def is_tabu(s, pattern: TabuPattern) -> bool:
    if isinstance(s, Chromosome):
        get = s.genes.get
        vec = [get(c) for c in range(1, len(pattern) + 1)]
    else:
        vec = list(s)
        if len(vec) != len(pattern):
            raise ValueError("pattern length does not match solution dimension")
    return all(p is WILDCARD or p == v for p, v in zip(pattern.slots, vec))


# ---- results and snapshots -----------------------------------------------------------


@dataclass
class IncrementSnapshot:
    index: int
    span: Tuple[int, int]
    constraints: List[int]
    solutions: List[Dict[int, int]]


@dataclass
class IncrementStats:
    index: int
    batch: int
    active: int
    generations: int = 0
    first_feasible: Optional[int] = None
    best_cost: Optional[int] = None


@dataclass
class RunResult:
    best: Optional[Chromosome]
    feasible: bool
    cost: Optional[Fraction]
    generations: int
    trace: List[Tuple[int, int, int, Optional[int]]] = field(default_factory=list)
    increments: List[IncrementStats] = field(default_factory=list)
    snapshots: List[IncrementSnapshot] = field(default_factory=list)
    wall_time: float = 0.0
    histogram: Optional[Tuple[int, ...]] = None
    rchc: Dict[str, int] = field(default_factory=dict)
    resumed_from: Optional[int] = None
    steps_back: int = 0

    def summary(self) -> Dict[str, Any]:
        """Deterministic run report (no timings)."""
        return {
            "feasible": self.feasible,
            "cost": None if self.cost is None else round(float(self.cost), 4),
            "cost_exact": None if self.cost is None else f"{self.cost.numerator}/{self.cost.denominator}",
            "length": 0 if self.best is None else len(self.best),
            "generations": self.generations,
            "histogram": None if self.histogram is None else list(self.histogram),
            "increments": [vars(s) for s in self.increments],
            "trace": [list(t) for t in self.trace],
            "rchc": dict(self.rchc),
        }


def write_snapshot(snap: IncrementSnapshot, path: str | Path) -> None:
    lines = [f"# increment {snap.index} batch {snap.span[0]}..{snap.span[1]}",
             "# exams " + " ".join(str(c) for c in snap.constraints)]
    blocks = []
    for sol in snap.solutions:
        blocks.append("\n".join(f"{c} {sol[c]}" for c in sorted(sol)))
    Path(path).write_text("\n".join(lines) + "\n" + "\n\n".join(blocks) + "\n")


def read_snapshot(path: str | Path) -> IncrementSnapshot:
    text = Path(path).read_text().splitlines()
    if len(text) < 2 or not text[0].startswith("# increment ") or not text[1].startswith("# exams"):
        raise ValueError(f"{path}: not a snapshot file")
    head = text[0].split()
    try:
        index = int(head[2])
        lo, hi = head[4].split("..")
        span = (int(lo), int(hi))
        constraints = [int(t) for t in text[1].split()[2:]]
    except (IndexError, ValueError):
        raise ValueError(f"{path}: malformed snapshot header") from None
    solutions: List[Dict[int, int]] = []
    cur: Dict[int, int] = {}
    for lineno, line in enumerate(text[2:], 3):
        if not line.strip():
            if cur:
                solutions.append(cur)
                cur = {}
            continue
        try:
            c, v = (int(t) for t in line.split())
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected 'exam_id slot'") from None
        cur[c] = v
    if cur:
        solutions.append(cur)
    return IncrementSnapshot(index, span, constraints, solutions)


def snapshot_name(index: int) -> str:
    return f"increment_{index:03d}.txt"


def load_snapshots(directory: str | Path) -> List[IncrementSnapshot]:
    files = sorted(Path(directory).glob("increment_*.txt"))
    if not files:
        raise FileNotFoundError(f"no snapshots in {directory}")
    return sorted((read_snapshot(f) for f in files), key=lambda s: s.index)


# ---- engine ---------------------------------------------------------------------------


class _Search:
    def __init__(self, problem: ProblemAdapter, config: EngineConfig, rng, plan: IncrementPlan,
                 deadline: Optional[float]) -> None:
        self.problem = problem
        self.config = config
        self.rng = rng
        self.plan = plan
        self.deadline = deadline
        self.pop = Population()
        self.gen = 0
        self.history = BestHistory(config.tabu_history)
        self.sequencer = OperatorSequencer(config.stagnant_generations)
        self.repair = RepairSet(config.population_size)
        self.stats = RchcStats()
        self.trace: List[Tuple[int, int, int, Optional[int]]] = []
        self.snapshots: List[IncrementSnapshot] = []
        self.increments: List[IncrementStats] = []
        self.active: List[int] = []
        self.stall = 0
        self.best_len = -1
        self.best_key: Any = None
        self.pattern: Optional[TabuPattern] = None

    # -- budget ------------------------------------------------------------------

    def exhausted(self) -> bool:
        if self.config.max_generations is not None and self.gen >= self.config.max_generations:
            return True
        return self.deadline is not None and time.monotonic() >= self.deadline

    # -- helpers -----------------------------------------------------------------

    @property
    def cop_cap(self) -> int:
        return self.config.population_size // 2

    def fresh(self) -> Chromosome:
        return initialize_increment(self.active, 1, self.rng, self.problem, self.gen)[0]

    def complete(self, c: Chromosome) -> bool:
        return len(c) == len(self.active)

    def to_cop(self, c: Chromosome) -> Chromosome:
        c.rchc = self.config.new_rchc_state()
        if self.problem.is_cop:
            self.problem.score(c)
        return c

    def key(self, c: Chromosome):
        return self.problem.key(c) if self.problem.is_cop else 0

    def pattern_hit(self, c: Chromosome) -> bool:
        return self.pattern is not None and is_tabu(c, self.pattern)

    # -- phases ------------------------------------------------------------------

    def csp_generation(self) -> None:
        problem, rng, active = self.problem, self.rng, self.active
        pool = self.pop.csp_pool
        n = len(pool)
        if n < 2:
            return
        eligible = [k for k in range(n) if not self.pattern_hit(pool[k])]
        if len(eligible) < 2:
            eligible = list(range(n))
        rng.shuffle(eligible)
        d = max(2, n // 2)
        parents = eligible[: d - d % 2]
        offspring: List[Chromosome] = []
        for a, b in zip(parents[::2], parents[1::2]):
            pa, pb = pool[a], pool[b]
            ra, rb = intermarriage_fuse(pa, pb, problem, active)
            for child, parent in ((ra.offspring, pa), (rb.offspring, pb)):
                for _ in range(self.config.csp_mutation_steps):
                    problem.csp_mutate(child, active, rng)
                if accept_offspring(child, parent):
                    if len(child) > len(parent):
                        child.improved_at = self.gen
                    offspring.append(child)
        self.pop.csp_pool = self.survivors(pool + offspring, n)

    def survivors(self, merged: List[Chromosome], n: int) -> List[Chromosome]:
        seen = set()
        uniq = []
        for c in merged:
            if c.digest not in seen:
                seen.add(c.digest)
                uniq.append(c)
        uniq.sort(key=lambda c: (-len(c), c.digest))
        if len(uniq) <= n:
            return uniq
        # recently improved members are kept regardless of rank, up to half the pool
        delta = self.config.backtrack_stagnation
        keep = [c for c in uniq if self.gen - c.improved_at < delta][: n // 2]
        kept = {id(c) for c in keep}
        rest = [c for c in uniq if id(c) not in kept]
        need = n - len(keep)
        if need >= 2:
            chosen = [rest[i] for i in select_survivors(need, len(rest) - need, self.config.selection_rho)]
        else:
            chosen = rest[:need]
        out = keep + chosen
        out.sort(key=lambda c: (-len(c), c.digest))
        return out

    def migrate(self) -> None:
        csp, cop = self.pop.csp_pool, self.pop.cop_pool
        worst = None
        for k, c in enumerate(csp):
            if not self.complete(c):
                continue
            if len(cop) < self.cop_cap or not cop:
                cop.append(self.to_cop(c))
                worst = None
            elif self.problem.is_cop:
                self.to_cop(c)
                if worst is None:
                    worst = max(range(len(cop)), key=lambda j: (self.key(cop[j]), cop[j].digest))
                if self.key(c) < self.key(cop[worst]) and all(m.digest != c.digest for m in cop):
                    cop[worst] = c
                    worst = None
            csp[k] = self.fresh()
        self.balance()

    def balance(self) -> None:
        cop, csp = self.pop.cop_pool, self.pop.csp_pool
        if len(cop) > self.cop_cap and self.cop_cap > 0:
            cop.sort(key=lambda c: (self.key(c), c.digest))
            del cop[self.cop_cap:]
        while len(cop) + len(csp) < self.config.population_size:
            csp.append(self.fresh())

    def refill(self, survivors: List[Chromosome]) -> Optional[Chromosome]:
        # a dropped member is replaced by a Kempe-shaken copy of another feasible one
        if not survivors:
            return None
        src = survivors[self.rng.randrange(len(survivors))]
        genes = src.genes
        for _ in range(3):
            genes = kempe_traditional(genes, self.problem, self.rng)
        c = self.problem.derive(src, genes)
        c.rchc = self.config.new_rchc_state()
        return c

    def cop_generation(self) -> None:
        op = self.sequencer.current
        if op is OperatorKind.CommunityInfluence:
            self.pop.communities = []
            community_influence_step(self.pop, self.config.degree_of_influence, self.problem, self.rng,
                                     self.active, self.config, self.gen)
            self.balance()
        aspiration = self.best_key if self.pattern is not None else None
        self.pop.cop_pool = rchc_step(
            self.pop.cop_pool, self.problem, self.config, op, self.rng,
            generation=self.gen,
            pattern_tabu=self.pattern_hit if self.pattern is not None else None,
            aspiration=aspiration, refill=self.refill, repair=self.repair, stats=self.stats,
        )
        self.repair.clear()

    # -- progress ------------------------------------------------------------------

    def best_member(self) -> Optional[Chromosome]:
        if self.pop.cop_pool:
            return min(self.pop.cop_pool, key=lambda c: (self.key(c), c.digest))
        members = self.pop.csp_pool
        return max(members, key=lambda c: (len(c), -c.digest)) if members else None

    def track(self, increment: int) -> bool:
        best = self.best_member()
        if best is None:
            return False
        length = len(best)
        key = self.key(best) if self.pop.cop_pool else None
        improved = length > self.best_len or (
            length == self.best_len and key is not None and (self.best_key is None or key < self.best_key))
        if improved:
            self.best_len = length
            self.best_key = key
            self.history.push(self.problem.solution_vector(best))
            self.stall = 0
        else:
            self.stall += 1
        cost = best.fitness[0] if (key is not None and isinstance(best.fitness, tuple)) else None
        self.trace.append((self.gen, increment, length, cost))
        self.update_pattern()
        return improved

    def update_pattern(self) -> None:
        start = self.config.stall_generations
        if self.stall < start or len(self.history) < 2:
            self.pattern = None
            return
        depth = min(1 + (self.stall - start) // self.config.stagnant_generations, len(self.history) - 1)
        self.pattern = tabu_intersect(self.history, depth)

    def reset_progress(self) -> None:
        self.best_len, self.best_key, self.stall, self.pattern = -1, None, 0, None
        self.history.clear()

    # -- main loop -----------------------------------------------------------------

    def start_increment(self, i: int, seed_pool: Optional[List[Chromosome]]) -> None:
        batch = self.plan.batches[i]
        self.active = self.plan.active(i)
        n = self.config.population_size
        if seed_pool is not None:
            csp = [c.copy() for c in seed_pool[:n]]
            while len(csp) < n:
                csp.append(self.fresh())
        else:
            fresh = initialize_increment(batch, n, self.rng, self.problem, self.gen)
            olds = self.pop.cop_pool + self.pop.csp_pool
            if not olds:
                csp = fresh
            else:
                csp = []
                for k in range(n):
                    receiver = olds[k % len(olds)]
                    child = intermarriage_fuse(receiver, fresh[k], self.problem, self.active)[0].offspring
                    child.rchc = None
                    csp.append(child)
        for c in csp:
            c.fitness = None
        self.pop = Population(csp, [], [])
        self.reset_progress()
        self.migrate()

    def snapshot(self, i: int) -> None:
        sols = [dict(c.genes) for c in sorted(self.pop.cop_pool, key=lambda c: (self.key(c), c.digest))]
        self.snapshots.append(IncrementSnapshot(i, self.plan.span(i), list(self.active), sols))

    def run_increment(self, i: int, seed_pool: Optional[List[Chromosome]] = None) -> bool:
        """Returns False when the budget ran out before the increment finished."""
        final = i == len(self.plan) - 1
        self.start_increment(i, seed_pool)
        st = IncrementStats(i, len(self.plan.batches[i]), len(self.active))
        self.increments.append(st)
        opt_left = self.config.optimize_generations
        start_gen = self.gen
        while True:
            if self.pop.cop_pool and st.first_feasible is None:
                st.first_feasible = self.gen
            if self.pop.cop_pool:
                if not self.problem.is_cop or (not final and opt_left <= 0):
                    break
            if self.exhausted():
                st.generations = self.gen - start_gen
                self.finish_stats(st)
                if self.pop.cop_pool:
                    self.snapshot(i)
                return False
            self.gen += 1
            self.csp_generation()
            self.migrate()
            cop_best = self.best_key
            if self.pop.cop_pool and self.problem.is_cop:
                self.cop_generation()
                opt_left -= 1
            improved = self.track(i)
            if self.pop.cop_pool and self.problem.is_cop:
                self.sequencer.update(improved and (cop_best is None or self.best_key != cop_best))
        st.generations = self.gen - start_gen
        self.finish_stats(st)
        self.snapshot(i)
        logger.info("increment %d/%d: %d constraints, feasible at generation %s", i + 1, len(self.plan),
                    len(self.active), st.first_feasible)
        return True

    def finish_stats(self, st: IncrementStats) -> None:
        best = self.best_member()
        if best is not None and self.pop.cop_pool and isinstance(best.fitness, tuple):
            st.best_cost = best.fitness[0]


def _result(search: _Search, started: float) -> RunResult:
    problem = search.problem
    complete = [c for c in search.pop.cop_pool if len(c) == problem.m]
    feasible = bool(complete) and len(search.active) == problem.m
    if feasible:
        best = min(complete, key=lambda c: (search.key(c), c.digest))
    else:
        members = search.pop.cop_pool + search.pop.csp_pool
        best = max(members, key=lambda c: (len(c), -c.digest)) if members else None
    cost = None
    hist = None
    if best is not None and problem.is_cop:
        problem.score(best)
        cost = Fraction(best.fitness[0], problem.n_students)
        hist = best.fitness[1]
    stats = vars(search.stats).copy()
    stats["repaired_swaps"] = search.repair.repaired
    return RunResult(best, feasible, cost, search.gen, search.trace, search.increments, search.snapshots,
                     time.monotonic() - started, hist, stats)


def run(problem: ProblemAdapter, config: EngineConfig, rng: Optional[random.Random] = None, *,
        plan: Optional[IncrementPlan] = None, seed_pool: Optional[List[Chromosome]] = None,
        start_increment: int = 0) -> RunResult:
    """Solve ``problem``; the budget is ``max_generations`` and/or ``budget_secs``.

    ``seed_pool`` replaces the random population of ``start_increment``
    (used when resuming from stored partial solutions).
    """
    started = time.monotonic()
    rng = rng if rng is not None else random.Random(config.seed)
    plan = plan or IncrementPlan.for_problem(problem, config.increment_fraction)
    deadline = started + config.budget_secs if config.budget_secs is not None else None
    search = _Search(problem, config, rng, plan, deadline)
    for i in range(start_increment, len(plan)):
        ok = search.run_increment(i, seed_pool if i == start_increment else None)
        if not ok:
            break
    return _result(search, started)


# ---- what-if reuse ---------------------------------------------------------------------


@dataclass
class UnresolvedReport:
    constraints: List[int]
    steps: List[Tuple[int, List[int]]] = field(default_factory=list)

    def lines(self) -> List[str]:
        out = ["unresolved constraints: " + " ".join(map(str, self.constraints))]
        for index, f in self.steps:
            out.append(f"increment {index}: unsolved combination " + " ".join(map(str, f)))
        return out


def _strength(problem: ProblemAdapter, constraints: Iterable[int]) -> int:
    return sum(problem.strength(c) for c in constraints)


def extend_with(problem: ProblemAdapter, base: Chromosome, new: Sequence[int], node_limit: int) -> Optional[Chromosome]:
    """Place every constraint of ``new`` on top of ``base`` without moving base genes."""
    nodes = 0
    child = base.copy()

    def place(k: int) -> bool:
        nonlocal nodes
        if k == len(new):
            return True
        c = new[k]
        for v in problem.domain(c):
            nodes += 1
            if nodes > node_limit:
                return False
            if problem.check(child, c, v)[0]:
                problem.place(child, c, v)
                if place(k + 1):
                    return True
                problem.unplace(child, c)
        return False

    return child if place(0) else None


def whatif_add(snapshots: Sequence[IncrementSnapshot], problem: ProblemAdapter, new_constraints: Sequence[int],
               config: EngineConfig, rng: Optional[random.Random] = None):
    """Re-solve after adding constraints, reusing stored partial solutions.

    Starting from the newest snapshot, each stored solution is kept as it is
    and the new constraints are placed on top of it.  If any stored solution
    absorbs them, the run resumes from there with the remaining batches.
    Otherwise the unsolved combination is recorded (the snapshot's own batch
    if it is at least as constrained as the additions, else the additions)
    and the previous, less constrained snapshot is tried.
    """
    if not snapshots:
        raise ValueError("no snapshots stored")
    new = list(dict.fromkeys(new_constraints))
    if not new:
        raise ValueError("no constraints to add")
    for c in new:
        if not 1 <= c <= problem.m:
            raise ValueError(f"unknown constraint {c}")
    rng = rng if rng is not None else random.Random(config.seed)
    size = batch_size(problem.m, config.increment_fraction)
    # search effort per stored solution, scaled from the generation budget
    node_limit = config.whatif_generations * max(1, config.population_size) * 20
    ordered = sorted(snapshots, key=lambda s: s.index, reverse=True)
    report = UnresolvedReport(new)
    for pos, snap in enumerate(ordered):
        for c in snap.constraints:
            if not 1 <= c <= problem.m:
                raise ValueError(f"snapshot {snap.index} references unknown constraint {c}")
        kept = [c for c in snap.constraints if c not in new]
        seeds: List[Chromosome] = []
        for sol in snap.solutions:
            base = Chromosome()
            for k in kept:
                if k in sol and problem.check(base, k, sol[k])[0]:
                    problem.place(base, k, sol[k])
            if len(base) != len(kept):
                continue
            child = extend_with(problem, base, new, node_limit)
            if child is not None:
                seeds.append(child)
        active = kept + new
        if seeds:
            logger.info("what-if: absorbed at increment %d", snap.index)
            remaining = [c for c in problem.ld_order() if c not in set(active)]
            plan = IncrementPlan([active] + list(chunked(remaining, size)), config.increment_fraction)
            res = run(problem, config, rng, plan=plan, seed_pool=seeds)
            res.resumed_from = snap.index
            res.steps_back = pos
            return res
        older = ordered[pos + 1] if pos + 1 < len(ordered) else None
        before = set(older.constraints) if older is not None else set()
        latest = [c for c in snap.constraints if c not in before and c not in new]
        f = latest if latest and _strength(problem, latest) >= _strength(problem, new) else new
        report.steps.append((snap.index, f))
        logger.info("what-if: increment %d cannot absorb the additions; stepping back", snap.index)
    return report
