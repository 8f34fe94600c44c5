from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ichea.core import Chromosome, EngineConfig
from ichea.engine import (
    BestHistory,
    IncrementPlan,
    IncrementSnapshot,
    TabuPattern,
    UnresolvedReport,
    initialize_increment,
    is_tabu,
    load_snapshots,
    read_snapshot,
    run,
    select_survivors,
    snapshot_name,
    survivor_curve,
    tabu_intersect,
    whatif_add,
    write_snapshot,
)
from ichea.nqueen import NQueensProblem, enumerate_solutions, rows_of
from ichea.timetabling import Instance, TimetablingProblem, hard_violations, random_instance

W = None


# ---- survivor selection -------------------------------------------------------------


def test_survivor_worked_example():
    raw, final = survivor_curve(10, 40, 5)
    assert raw == [0, 0, 0, 1, 2, 5, 8, 15, 27, 49]
    assert final == [0, 1, 2, 3, 4, 5, 8, 15, 27, 49]
    assert select_survivors(10, 40, 5) == final


def test_survivors_without_surplus_are_identity():
    assert select_survivors(7, 0) == list(range(7))
    with pytest.raises(ValueError):
        select_survivors(1, 3)
    with pytest.raises(ValueError):
        select_survivors(4, -1)


@given(st.integers(2, 200), st.integers(0, 400), st.floats(0.1, 20))
def test_survivor_properties(n, kappa, rho):
    idx = select_survivors(n, kappa, rho)
    assert len(idx) == n and idx[0] == 0
    assert all(a < b for a, b in zip(idx, idx[1:]))
    assert idx[-1] == n + kappa - 1


# ---- tabu regions ---------------------------------------------------------------------


def test_tabu_pattern_examples():
    assert tabu_intersect([(1, 2, 3), (1, 5, 3)], 1).slots == (1, W, 3)
    assert tabu_intersect([(1, 2), (1, 2)], 1).wildcards == 0
    assert tabu_intersect([(1, 2), (2, 1)], 1).wildcards == 2
    pat = TabuPattern((2, 5, W, 1, 3, W))
    assert is_tabu([2, 5, 4, 1, 3, 6], pat)
    assert not is_tabu([2, 5, 1, 4, 3, 6], pat)
    assert is_tabu([9, 9, 9], TabuPattern((W, W, W)))
    with pytest.raises(ValueError):
        is_tabu([1, 2], pat)
    with pytest.raises(ValueError, match="insufficient history"):
        tabu_intersect([(1, 2)], 1)
    assert is_tabu(Chromosome({1: 2, 2: 5, 3: 7, 4: 1, 5: 3, 6: 0}), pat)


@given(st.lists(st.lists(st.integers(0, 3), min_size=6, max_size=6), min_size=5, max_size=5))
def test_tabu_pattern_only_loses_positions(vectors):
    h = BestHistory(5)
    for v in reversed(vectors):
        h.push(v)
    counts = [tabu_intersect(h, d).wildcards for d in range(1, 5)]
    assert counts == sorted(counts)


def test_best_history_ring():
    h = BestHistory(3)
    for k in range(5):
        h.push([k])
    assert h.items == [(4,), (3,), (2,)]


# ---- increments -------------------------------------------------------------------------


def test_increment_plan_partitions_in_order():
    plan = IncrementPlan.build(list(range(1, 24)), 0.2)
    assert [len(b) for b in plan.batches] == [5, 5, 5, 5, 3]
    assert plan.active(1) == list(range(1, 11))
    assert plan.span(1) == (6, 10)
    with pytest.raises(ValueError):
        IncrementPlan([[1], []])


def test_initialize_increment():
    rng = random.Random(0)
    single = TimetablingProblem(Instance(3, 4, [(1, 2), (2, 3)]))
    assert all(len(c) == 1 for c in initialize_increment([2], 10, rng, single))
    free = TimetablingProblem(Instance(5, 3, [(e,) for e in range(1, 6)]))
    assert all(len(c) == 5 for c in initialize_increment([1, 2, 3, 4, 5], 10, rng, free))
    dense = TimetablingProblem(Instance(8, 8, [tuple(range(1, 9))]))
    pop = initialize_increment(list(range(1, 9)), 50, rng, dense)
    assert sum(len(c) for c in pop) / len(pop) < 8
    assert all(dense.is_feasible(c) for c in pop)
    with pytest.raises(ValueError):
        initialize_increment([], 3, rng, free)


# ---- whole runs -------------------------------------------------------------------------


def small_config(**kw):
    base = dict(population_size=20, max_generations=400, seed=3)
    base.update(kw)
    return EngineConfig(**base)


def test_conflict_free_instance_reaches_zero_cost():
    p = TimetablingProblem(Instance(10, 10, [(e,) for e in range(1, 11)]))
    res = run(p, small_config(mode="ichea", max_generations=60))
    assert res.feasible and res.cost == 0
    assert len(res.increments) == len(IncrementPlan.for_problem(p, 0.05))


def test_eight_queens_solutions_are_in_oracle():
    _, oracle = enumerate_solutions(8)
    for seed in range(5):
        res = run(NQueensProblem(8), small_config(seed=seed))
        assert res.feasible
        assert tuple(rows_of(res.best)) in oracle


def test_run_is_deterministic():
    p = TimetablingProblem(random_instance(20, 60, 8, random.Random(20)))
    a = run(p, small_config(max_generations=150))
    b = run(p, small_config(max_generations=150))
    assert a.summary() == b.summary()
    assert a.best.genes == b.best.genes


def test_timetable_run_is_feasible_and_consistent():
    p = TimetablingProblem(random_instance(30, 90, 9, random.Random(4)))
    res = run(p, small_config(max_generations=300, optimize_generations=5))
    assert res.feasible
    assert hard_violations(res.best.genes, p.cm) == 0
    assert res.cost == p.cost(res.best.genes)
    actives = [s.active for s in res.increments]
    assert actives == sorted(actives) and actives[-1] == p.m
    for snap in res.snapshots:
        for sol in snap.solutions:
            assert set(sol) == set(snap.constraints)
            assert p.is_feasible(Chromosome(sol))


def test_budget_exhaustion_reports_longest_partial():
    p = TimetablingProblem(random_instance(40, 200, 6, random.Random(1), planted=False))
    res = run(p, small_config(max_generations=3))
    assert not res.feasible
    assert res.best is not None and 0 < len(res.best) < p.m
    assert p.is_feasible(res.best)


def test_generic_mode_reports_histogram():
    p = TimetablingProblem(random_instance(20, 60, 8, random.Random(20)), fitness_mode="generic")
    res = run(p, small_config(fitness_mode="generic", max_generations=120, optimize_generations=2))
    assert res.feasible and len(res.histogram) == 5
    assert res.summary()["histogram"] == list(res.histogram)


# ---- snapshots and what-if -------------------------------------------------------------------


def test_snapshot_round_trip(tmp_path):
    snap = IncrementSnapshot(2, (6, 10), [3, 1, 2], [{1: 0, 2: 1, 3: 2}, {1: 2, 2: 0, 3: 1}])
    write_snapshot(snap, tmp_path / snapshot_name(2))
    text = (tmp_path / snapshot_name(2)).read_text()
    assert text.startswith("# increment 2 batch 6..10\n")
    assert read_snapshot(tmp_path / snapshot_name(2)) == snap
    assert load_snapshots(tmp_path)[0] == snap
    with pytest.raises(FileNotFoundError):
        load_snapshots(tmp_path / "none")


def chain_problem(extra_rows=()):
    # exams 1-2 conflict; exams 3, 4 conflict with 1 and 2 respectively
    rows = [(1, 2), (1, 3), (2, 4)] + list(extra_rows)
    return TimetablingProblem(Instance(5, 3, rows))


def test_whatif_trivial_addition_succeeds_from_newest():
    base = chain_problem()
    plan = IncrementPlan([[1, 2], [3, 4, 5]])
    res = run(base, small_config(max_generations=50), plan=plan)
    assert res.feasible and len(res.snapshots) == 2
    grown = TimetablingProblem(base.instance.with_extra_enrollment(6, []))
    out = whatif_add(res.snapshots, grown, [6], small_config(max_generations=50))
    assert out.feasible and out.resumed_from == 1 and out.steps_back == 0
    assert hard_violations(out.best.genes, grown.cm) == 0


def test_whatif_steps_back_once():
    # exam 5 now conflicts with 1, 2 and 3, which the stored full solution spreads over all slots
    grown = TimetablingProblem(Instance(5, 3, [(1, 2, 5), (1, 3, 5), (2, 4)]))
    snaps = [
        IncrementSnapshot(0, (1, 2), [1, 2], [{1: 0, 2: 1}]),
        IncrementSnapshot(1, (3, 5), [1, 2, 3, 4, 5], [{1: 0, 2: 1, 3: 2, 4: 0, 5: 0}]),
    ]
    out = whatif_add(snaps, grown, [5], small_config(mode="ichea", max_generations=80))
    assert not isinstance(out, UnresolvedReport)
    assert out.resumed_from == 0 and out.steps_back == 1
    assert out.feasible and hard_violations(out.best.genes, grown.cm) == 0


def test_whatif_unsatisfiable_reports_constraints():
    rows = [(1, 2), (1, 3), (2, 3), (4, 1, 2, 3)]
    p = TimetablingProblem(Instance(4, 3, rows))
    snaps = [IncrementSnapshot(0, (1, 3), [1, 2, 3], [{1: 0, 2: 1, 3: 2}])]
    out = whatif_add(snaps, p, [4], small_config())
    assert isinstance(out, UnresolvedReport)
    assert out.constraints == [4]
    assert out.steps and out.lines()[0] == "unresolved constraints: 4"


def test_whatif_errors():
    p = chain_problem()
    with pytest.raises(ValueError):
        whatif_add([], p, [1], small_config())
    with pytest.raises(ValueError):
        whatif_add([IncrementSnapshot(0, (1, 1), [1], [{1: 0}])], p, [9], small_config())
