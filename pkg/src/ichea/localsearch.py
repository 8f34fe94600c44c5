"""Feasibility-preserving timetable operators and reversible clonal hill-climbing."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import Chromosome, Community, EngineConfig, Population

if TYPE_CHECKING:
    from .timetabling import Timetable, TimetablingProblem

MAX_SEEDS = 5


class OperatorKind(enum.IntEnum):
    KempeTraditional = 0
    KempeBoundary = 1
    SwapExams = 2
    MoveOrSwapSlot = 3
    RemovalReinsert = 4
    ClusterMutation = 5
    CommunityInfluence = 6
    KempeCrossover = 7


@dataclass
class RepairSet:
    """Infeasible swaps parked until a Kempe repair resolves them."""

    capacity: int = 100
    held: List[Tuple[dict, int, int, int, int]] = field(default_factory=list)
    repaired: int = 0
    discarded: int = 0

    def add(self, item) -> bool:
        if len(self.held) >= self.capacity:
            self.discarded += 1
            return False
        self.held.append(item)
        return True

    def clear(self) -> None:
        self.held.clear()


def kempe_chain_move(tt: "Timetable", I: int, J: int, seeds: Iterable[int], problem: "TimetablingProblem") -> "Timetable":
    """Swap slots I and J for the Kempe component holding ``seeds``.

    The component is the closure of the seeds in the conflict graph restricted
    to exams sitting in I or J, which is exactly what repeatedly bouncing
    conflicting exams between the two slots converges to.
    """
    seeds = list(seeds)
    if I == J:
        raise ValueError("Kempe move needs two distinct slots")
    if not 1 <= len(seeds) <= MAX_SEEDS:
        raise ValueError(f"need 1..{MAX_SEEDS} seeds, got {len(seeds)}")
    for s in seeds:
        if tt.get(s) != I:
            raise ValueError(f"seed {s} not in slot {I}")
    nb = problem.cm.neighbors
    get = tt.get
    comp = set(seeds)
    stack = list(seeds)
    while stack:
        e = stack.pop()
        other = J if get(e) == I else I
        for n in nb[e]:
            if n not in comp and get(n) == other:
                comp.add(n)
                stack.append(n)
    out = dict(tt)
    for e in comp:
        out[e] = J if tt[e] == I else I
    return out


def _random_seeds(tt: "Timetable", first: int, rng) -> List[int]:
    slot = tt[first]
    others = [e for e, s in tt.items() if s == slot and e != first]
    k = rng.randint(1, MAX_SEEDS)
    return [first] + (rng.sample(others, min(k - 1, len(others))) if k > 1 else [])


def kempe_traditional(tt: "Timetable", problem: "TimetablingProblem", rng) -> "Timetable":
    T = problem.n_slots
    if T < 2 or not tt:
        return dict(tt)
    exams = list(tt)
    e = exams[rng.randrange(len(exams))]
    I = tt[e]
    J = rng.randrange(T - 1)
    if J >= I:
        J += 1
    return kempe_chain_move(tt, I, J, _random_seeds(tt, e, rng), problem)


def boundary_targets(I: int, T: int) -> List[int]:
    return sorted({0, 1, T - 2, T - 1} - {I} & set(range(T)))


def hot_exams(tt: "Timetable", problem: "TimetablingProblem", fraction: float = 0.1) -> List[int]:
    """Exams with the largest proximity contribution (top ``fraction``)."""
    exams = sorted(tt)
    contrib = problem.exam_contributions(tt)
    k = max(1, math.ceil(fraction * len(exams)))
    ranked = sorted(exams, key=lambda e: (-contrib[e], e))
    return ranked[:k]


def boundary_kempe_move(tt: "Timetable", problem: "TimetablingProblem", rng) -> "Timetable":
    """Kempe move from a hot exam's slot to one of the outermost two slots at either end."""
    T = problem.n_slots
    if T < 2 or not tt:
        return dict(tt)
    hot = hot_exams(tt, problem)
    e = hot[rng.randrange(len(hot))]
    I = tt[e]
    targets = boundary_targets(I, T)
    J = targets[rng.randrange(len(targets))]
    return kempe_chain_move(tt, I, J, _random_seeds(tt, e, rng), problem)


def swap_exams(tt: "Timetable", problem: "TimetablingProblem", rng, repair: Optional[RepairSet] = None) -> "Timetable":
    """Exchange the slots of two exams, Kempe-repairing the swap if it clashes."""
    exams = list(tt)
    if len(exams) < 2:
        return dict(tt)
    a = exams[rng.randrange(len(exams))]
    pool = [e for e in exams if tt[e] != tt[a]]
    if not pool:
        return dict(tt)
    b = pool[rng.randrange(len(pool))]
    I, J = tt[a], tt[b]
    out = dict(tt)
    out[a], out[b] = J, I
    if problem.fits(out, a, J) and problem.fits(out, b, I):
        return out
    parked = repair is not None and repair.add((out, a, b, I, J))
    # Kempe moves keep the timetable clash-free, so only the placement needs checking
    fixed = kempe_chain_move(tt, I, J, [a], problem)
    if fixed[b] == J:
        fixed = kempe_chain_move(fixed, J, I, [b], problem)
    ok = fixed[a] == J and fixed[b] == I
    if parked:
        repair.held.pop()
        if ok:
            repair.repaired += 1
        else:
            repair.discarded += 1
    return fixed if ok else dict(tt)


def move_or_swap_slot(tt: "Timetable", n_slots: int, rng) -> "Timetable":
    """Swap two whole slots, or lift one slot out and reinsert it elsewhere."""
    T = n_slots
    if T < 2:
        return dict(tt)
    i = rng.randrange(T)
    j = rng.randrange(T)
    if rng.random() < 0.5:
        mapping = list(range(T))
        mapping[i], mapping[j] = j, i
    else:
        order = list(range(T))
        order.insert(j, order.pop(i))
        mapping = [0] * T
        for new, old in enumerate(order):
            mapping[old] = new
    return {e: mapping[s] for e, s in tt.items()}


def removal_reinsert(tt: "Timetable", problem: "TimetablingProblem", rng) -> "Timetable":
    T = problem.n_slots
    if T < 2 or not tt:
        return dict(tt)
    exams = list(tt)
    e = exams[rng.randrange(len(exams))]
    cur = tt[e]
    target = rng.randrange(T - 1)
    if target >= cur:
        target += 1
    if not problem.fits(tt, e, target):
        return dict(tt)
    out = dict(tt)
    out[e] = target
    return out


def cluster_mutation(tt: "Timetable", problem: "TimetablingProblem", rng) -> "Timetable":
    """Pull into a random slot one exam that clashes with nobody there."""
    T = problem.n_slots
    if not tt:
        return dict(tt)
    I = rng.randrange(T)
    cluster = [e for e, s in tt.items() if s != I and problem.fits(tt, e, I)]
    if not cluster:
        return dict(tt)
    e = cluster[rng.randrange(len(cluster))]
    out = dict(tt)
    out[e] = I
    return out


# ---- communities ----------------------------------------------------------------------


def build_communities(pop: Population, problem, config: EngineConfig) -> List[Community]:
    """Give each of the best feasible members its most similar infeasible neighbours."""
    if not pop.cop_pool or not pop.csp_pool:
        return []
    order = sorted(range(len(pop.cop_pool)), key=lambda k: (problem.key(pop.cop_pool[k]), pop.cop_pool[k].digest))
    anchors = order[: config.total_communities]
    A = np.stack([problem.slots_array(pop.cop_pool[k].genes) for k in anchors])
    M = np.stack([problem.slots_array(c.genes) for c in pop.csp_pool])
    sim = ((A[:, None, :] == M[None, :, :]) & (M[None, :, :] >= 0)).sum(axis=2)
    taken = set()
    out = []
    for row, a in enumerate(anchors):
        ranked = sorted(range(len(pop.csp_pool)), key=lambda j: (-int(sim[row, j]), j))
        members = []
        for j in ranked:
            if j in taken:
                continue
            members.append(j)
            taken.add(j)
            if len(members) == config.community_size:
                break
        out.append(Community(a, members, config.community_size))
    return out


def influence_partial(member: Chromosome, anchor: Chromosome, degree: int, problem, rng) -> bool:
    """Copy ``degree`` of the anchor's differing assignments into ``member``.

    Member genes that clash with a copied assignment are unplaced, so the
    member stays a feasible partial solution.  Returns True if it changed.
    """
    mg = member.genes
    diff = [e for e, s in anchor.genes.items() if mg.get(e) != s]
    if not diff:
        return False
    for e in rng.sample(diff, min(degree, len(diff))):
        slot = anchor.genes[e]
        for victim in problem.conflicts_in(mg, e, slot):
            member.drop_gene(victim)
        member.set_gene(e, slot)
    member.fitness = None
    return True


def community_influence_step(pop: Population, degree: int, problem, rng, active: Sequence[int],
                             config: EngineConfig, generation: int = 0) -> Population:
    """Influence each community's infeasible members by its anchor.

    Members that end up holding every active constraint move to the
    feasible pool.  Communities are rebuilt when missing.
    """
    if not pop.communities:
        pop.communities = build_communities(pop, problem, config)
    n_active = len(active)
    done: List[int] = []
    for com in pop.communities:
        if com.anchor >= len(pop.cop_pool):
            continue
        anchor = pop.cop_pool[com.anchor]
        for j in com.members:
            if j >= len(pop.csp_pool):
                continue
            member = pop.csp_pool[j]
            before = len(member)
            if influence_partial(member, anchor, degree, problem, rng) and len(member) > before:
                member.improved_at = generation
            if len(member) == n_active:
                done.append(j)
    if done:
        for j in sorted(set(done), reverse=True):
            c = pop.csp_pool.pop(j)
            c.rchc = config.new_rchc_state()
            problem.score(c)
            pop.cop_pool.append(c)
        pop.communities = []
    return pop


# ---- operator sequencing ------------------------------------------------------------


@dataclass
class OperatorSequencer:
    """Cycle to the next operator after ``s`` generations without improvement."""

    s: int = 5
    index: int = 0
    counter: int = 0
    order: Tuple[OperatorKind, ...] = tuple(OperatorKind)

    @property
    def current(self) -> OperatorKind:
        return self.order[self.index]

    def update(self, improved: bool) -> OperatorKind:
        if improved:
            self.counter = 0
        else:
            self.counter += 1
            if self.counter >= self.s:
                self.index = (self.index + 1) % len(self.order)
                self.counter = 0
        return self.current


def next_operator(state: OperatorSequencer, improved: bool) -> OperatorKind:
    return state.update(improved)


def clone_count(rank: int, pop_size: int, alpha: int = 1, cap: int = 5) -> int:
    """Clones for the individual at 1-based fitness rank ``rank``."""
    if rank < 1:
        raise ValueError("rank is 1-based")
    return min(cap, (alpha * pop_size) // rank)


# ---- mutation dispatch ----------------------------------------------------------------


def mutate(kind: OperatorKind, tt: "Timetable", problem: "TimetablingProblem", rng, *,
           best: Optional["Timetable"] = None, partner: Optional["Timetable"] = None,
           degree: int = 3, repair: Optional[RepairSet] = None) -> "Timetable":
    from .crossover import influence_timetable

    if kind is OperatorKind.KempeTraditional:
        return kempe_traditional(tt, problem, rng)
    if kind is OperatorKind.KempeBoundary:
        return boundary_kempe_move(tt, problem, rng)
    if kind is OperatorKind.SwapExams:
        return swap_exams(tt, problem, rng, repair)
    if kind is OperatorKind.MoveOrSwapSlot:
        return move_or_swap_slot(tt, problem.n_slots, rng)
    if kind is OperatorKind.RemovalReinsert:
        return removal_reinsert(tt, problem, rng)
    if kind is OperatorKind.ClusterMutation:
        return cluster_mutation(tt, problem, rng)
    if kind is OperatorKind.CommunityInfluence:
        # clone-level counterpart of the community step: pull towards the anchor
        if best is None or best is tt:
            return kempe_traditional(tt, problem, rng)
        return influence_timetable(tt, best, degree, problem, rng)
    if kind is OperatorKind.KempeCrossover:
        out = tt
        if partner is not None and partner is not tt:
            out = influence_timetable(out, partner, degree, problem, rng)
        if best is not None and best is not tt:
            out = influence_timetable(out, best, degree, problem, rng)
        if out is tt:
            return kempe_traditional(tt, problem, rng)
        return out
    raise ValueError(f"unknown operator {kind!r}")


# ---- reversible clonal hill-climbing ---------------------------------------------------


@dataclass
class RchcStats:
    improvements: int = 0
    reverts: int = 0
    removals: int = 0
    tabu_rejections: int = 0


def _tabu_hit(state, key, dig: int, strict: bool) -> bool:
    if not state.tabu:
        return False
    if strict:
        return any(entry[0] == key for entry in state.tabu)
    return (key, dig) in state.tabu


def rchc_step(pool: List[Chromosome], problem: "TimetablingProblem", config: EngineConfig,
              operator: OperatorKind, rng, *, generation: int = 0,
              pattern_tabu: Optional[Callable[[Chromosome], bool]] = None,
              aspiration=None,
              refill: Optional[Callable[[List[Chromosome]], Chromosome]] = None,
              repair: Optional[RepairSet] = None,
              mutator: Optional[Callable] = None,
              stats: Optional[RchcStats] = None) -> List[Chromosome]:
    """One clone-mutate-replace pass over a pool of feasible solutions.

    Members are visited best to worst.  A clone that beats its incumbent
    replaces it at once and the incumbent goes on the member's bounded
    history.  A member that has stalled for ``backtrack_stagnation``
    generations is marked tabu and reverted to its previous state; with no
    history left it is dropped and ``refill`` supplies a replacement.  The
    pool's current best member is never reverted.
    """
    if not pool:
        return pool
    stats = stats if stats is not None else RchcStats()
    key = problem.key
    order = sorted(range(len(pool)), key=lambda k: (key(pool[k]), pool[k].digest))
    best_idx = order[0]
    best_genes = pool[best_idx].genes
    out: List[Optional[Chromosome]] = list(pool)
    delta = config.backtrack_stagnation
    strict = config.tabu_strict
    removed: List[int] = []
    mut = mutator or mutate

    for rank, k in enumerate(order, 1):
        member = out[k]
        if member.rchc is None:
            member.rchc = config.new_rchc_state()
        st = member.rchc
        n_clones = clone_count(rank, config.population_size, config.clone_constant, config.max_clones)
        partner = None
        if len(pool) > 1:
            j = rng.randrange(len(pool) - 1)
            partner = pool[j if j < k else j + 1].genes
        improved = False
        reverted = False
        for _ in range(n_clones):
            genes = mut(operator, member.genes, problem, rng, best=best_genes, partner=partner,
                        degree=config.degree_of_influence, repair=repair)
            clone = problem.derive(member, genes)
            ck = key(clone)
            if _tabu_hit(st, ck, clone.digest, strict):
                stats.tabu_rejections += 1
                continue
            if pattern_tabu is not None and pattern_tabu(clone) and not (aspiration is not None and ck < aspiration):
                stats.tabu_rejections += 1
                continue
            if ck < key(member):
                snap = member.copy()
                snap.rchc = None
                st.history.append(snap)
                clone.rchc = st
                member = clone
                improved = True
                stats.improvements += 1
                continue
            if st.stagnation >= delta and k != best_idx:
                st.tabu.append((key(member), member.digest))
                if st.history:
                    prev = st.history.pop()
                    prev.rchc = st
                    member = prev
                    st.stagnation = 0
                    reverted = True
                    stats.reverts += 1
                else:
                    removed.append(k)
                    stats.removals += 1
                break
        if improved:
            st.stagnation = 0
            member.improved_at = generation
        elif not reverted:
            st.stagnation += 1
        out[k] = member

    survivors = [c for i, c in enumerate(out) if i not in set(removed)]
    if removed and refill is not None:
        for _ in removed:
            fresh = refill(survivors)
            if fresh is not None:
                survivors.append(fresh)
    return survivors
