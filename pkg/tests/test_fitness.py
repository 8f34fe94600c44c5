from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ichea.fitness import (
    HardViolationError,
    PreferenceHistogram,
    basic_pref_fitness,
    gap_histogram,
    generic_key,
    generic_preferences,
    partial_cost,
    partial_fitness,
    pref_compare_lex,
    pref_fitness_combined,
    pref_fitness_max,
    pref_fitness_min,
    preference_histogram,
    proximity_cost,
    violation_fitness,
    weighted_fitness,
    weighted_pref_fitness,
)
from ichea.core import Chromosome
from ichea.nqueen import NQueensProblem
from ichea.timetabling import Instance, TimetablingProblem, build_conflict_matrix

L, D = 4, 2
ALL = [PreferenceHistogram(c, L) for c in itertools.product(range(L * L + 1), repeat=D + 1)]


def lex_min_key(h):
    return tuple(-c for c in reversed(h.counts))


def test_max_form_orders_like_lexicographic():
    ranked = sorted(ALL, key=lambda h: h.counts)
    vals = [pref_fitness_max(h) for h in ranked]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_min_form_orders_like_reverse_lexicographic():
    ranked = sorted(ALL, key=lex_min_key)
    vals = [pref_fitness_min(h) for h in ranked]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_combined_form_puts_total_first():
    ranked = sorted(ALL, key=lambda h: (sum(h.counts), lex_min_key(h)))
    vals = [pref_fitness_combined(h) for h in ranked]
    assert all(a < b for a, b in zip(vals, vals[1:]))


@settings(max_examples=300)
@given(st.sampled_from(ALL), st.sampled_from(ALL))
def test_comparator_agrees_with_big_integer_forms(a, b):
    sign = lambda x: (x > 0) - (x < 0)
    assert pref_compare_lex(a, b, "max") == sign(pref_fitness_max(a) - pref_fitness_max(b))
    assert pref_compare_lex(a, b, "min") == sign(pref_fitness_min(a) - pref_fitness_min(b))


def test_worked_preference_examples():
    a, b = PreferenceHistogram((5, 4, 0, 1), 4), PreferenceHistogram((5, 3, 0, 2), 4)
    assert pref_fitness_max(a) > pref_fitness_max(b)
    c, d = PreferenceHistogram((3, 5, 2, 2), 4), PreferenceHistogram((5, 1, 3, 2), 4)
    assert pref_fitness_min(c) > pref_fitness_min(d)
    assert pref_compare_lex(c, d, "min") == 1


def test_simple_forms():
    h = PreferenceHistogram((1, 2, 3), 2)
    assert basic_pref_fitness(h) == 6
    assert weighted_pref_fitness(h, (3, 2, 1)) == 10
    with pytest.raises(ValueError):
        weighted_pref_fitness(h, (1, 1))
    with pytest.raises(ValueError):
        pref_fitness_min(PreferenceHistogram((5, 0), 2))
    for bad in [((1,), 2), ((1, 1), 0), ((1, -1), 2)]:
        with pytest.raises(ValueError):
            PreferenceHistogram(*bad)
    with pytest.raises(ValueError):
        pref_compare_lex(h, PreferenceHistogram((1, 2), 2))


def test_violation_and_weighted_fitness_on_queens():
    q = NQueensProblem(4)
    sol = {1: 2, 2: 4, 3: 1, 4: 3}
    assert violation_fitness(sol, q) == 4
    assert violation_fitness({1: 1, 2: 2, 3: 3, 4: 4}, q) == 0
    assert weighted_fitness(sol, [1, 2, 3, 4], q) == 10
    with pytest.raises(ValueError, match="partial assignment"):
        violation_fitness({1: 2}, q)
    with pytest.raises(ValueError):
        weighted_fitness(sol, [1, 2], q)
    with pytest.raises(ValueError):
        weighted_fitness(sol, [1, -1, 1, 1], q)


def test_partial_fitness_and_cost():
    c = Chromosome({1: 1, 2: 3})
    assert partial_fitness(c) == 2 and partial_cost(c, 5) == 3
    with pytest.raises(ValueError):
        partial_cost(c, 1)


def _cm(rows, n):
    return build_conflict_matrix(Instance(n, 10, [tuple(r) for r in rows]))


def test_proximity_single_term():
    cm = _cm([(1, 2)], 2)
    assert proximity_cost({1: 0, 2: 1}, cm, 1) == 16
    assert proximity_cost({1: 0, 2: 6}, cm, 1) == 0
    assert proximity_cost({1: 0, 2: 5}, cm, 3) == Fraction(1, 3)
    with pytest.raises(HardViolationError):
        proximity_cost({1: 2, 2: 2}, cm, 1)
    with pytest.raises(ValueError):
        proximity_cost({1: 0, 2: 1}, cm, 0)


def test_partial_timetable_ignores_unplaced():
    cm = _cm([(1, 2, 3)], 3)
    assert proximity_cost({1: 0, 2: 2}, cm, 1) == 8


def test_histograms():
    cm = _cm([(1, 2), (2, 3), (1, 3), (3, 4)], 4)
    tt = {1: 0, 2: 1, 3: 3, 4: 9}
    assert gap_histogram(tt, cm) == (1, 1, 1, 0, 0)
    h = preference_histogram(tt, cm)
    assert h.counts == (1, 1, 1, 0, 0) and h.L == 4
    g = generic_preferences(tt, cm)
    assert g.counts == (1, 0, 0, 1, 1, 1)
    assert generic_key(gap_histogram(tt, cm)) == (1, 1, 1, 0, 0)


def test_generic_key_matches_combined_form_on_complete_timetables():
    rng = random.Random(5)
    inst = Instance(8, 9, [tuple(rng.sample(range(1, 9), 3)) for _ in range(12)])
    p = TimetablingProblem(inst)
    cm = p.cm
    tts = []
    while len(tts) < 40:
        tt = {e: rng.randrange(9) for e in range(1, 9)}
        if all(tt[i] != tt[j] for i, j, _ in cm.edge_list()):
            tts.append(tt)
    for a, b in itertools.combinations(tts, 2):
        ka, kb = generic_key(gap_histogram(a, cm)), generic_key(gap_histogram(b, cm))
        fa, fb = pref_fitness_combined(generic_preferences(a, cm)), pref_fitness_combined(generic_preferences(b, cm))
        assert (ka < kb) == (fa > fb) and (ka == kb) == (fa == fb)
