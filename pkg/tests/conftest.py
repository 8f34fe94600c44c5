from __future__ import annotations

import random

import pytest

from ichea.timetabling import Instance, TimetablingProblem, random_instance


@pytest.fixture
def tt20():
    """20-exam random instance with a feasible timetable planted in 8 slots."""
    inst = random_instance(20, 60, 8, random.Random(20))
    return TimetablingProblem(inst)


def greedy_timetable(problem, rng=None):
    """First-fit colouring in LD order; a random order when ``rng`` is given."""
    order = problem.ld_order()
    for _ in range(200):
        tt = {}
        ok = True
        for e in order:
            slots = list(range(problem.n_slots))
            if rng is not None:
                rng.shuffle(slots)
            for s in slots:
                if problem.fits(tt, e, s):
                    tt[e] = s
                    break
            else:
                ok = False
                break
        if ok:
            return tt
        if rng is None:
            rng = random.Random(0)
        order = list(order)
        rng.shuffle(order)
    raise RuntimeError("no greedy timetable found")


def tiny_instance(rows, n_exams, n_slots):
    return Instance(n_exams, n_slots, [tuple(r) for r in rows], name="tiny")
