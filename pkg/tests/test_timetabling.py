from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ichea.core import Chromosome, digest
from ichea.fitness import GAP_WEIGHTS, proximity_cost
from ichea.timetabling import (
    Instance,
    InstanceFormatError,
    TimetablingProblem,
    build_conflict_matrix,
    hard_violations,
    ld_order,
    load_named_instance,
    locate_instance,
    parse_instance,
    random_instance,
    read_metadata,
    read_solution,
    write_solution,
)

from conftest import greedy_timetable


def oracle_cost(inst: Instance, tt) -> Fraction:
    """Per-student double loop, independent of the conflict matrix."""
    total = 0
    for exams in inst.enrollments:
        for a, b in itertools.combinations(exams, 2):
            gap = abs(tt[a] - tt[b])
            if 1 <= gap <= 5:
                total += 2 ** (5 - gap)
    return Fraction(total, inst.n_students)


def write_pair(tmp_path, crs: str, stu: str, stem="toy"):
    (tmp_path / f"{stem}.crs").write_text(crs)
    (tmp_path / f"{stem}.stu").write_text(stu)
    return tmp_path / f"{stem}.crs", tmp_path / f"{stem}.stu"


def test_parse_instance(tmp_path):
    crs, stu = write_pair(tmp_path, "1 2\n2 2\n\n3 1\n", "1 2\n\n2 1 3\n")
    inst = parse_instance(crs, stu, 4)
    assert inst.n_exams == 3 and inst.n_students == 2 and inst.name == "toy"
    assert inst.enrollments == [(1, 2), (2, 1, 3)]
    cm = build_conflict_matrix(inst)
    assert cm[1, 2] == 2 and cm[2, 1] == 2 and cm[1, 3] == 1 and cm[2, 3] == 1 and cm.n_edges == 3


def test_parse_dedups_repeated_exam_and_warns_on_counts(tmp_path, caplog):
    crs, stu = write_pair(tmp_path, "1 5\n2 1\n", "1 2 1\n")
    inst = parse_instance(crs, stu, 3)
    assert inst.enrollments == [(1, 2)]
    assert "disagree" in caplog.text


@pytest.mark.parametrize("crs,stu,msg", [
    ("1 1\nx 2\n", "1\n", "malformed"),
    ("1 1\n", "1 7\n", "out of range"),
    ("1 1\n", "\n\n", "no students"),
    ("", "1\n", "no exams"),
    ("1 1 1\n", "1\n", "expected"),
])
def test_parse_errors(tmp_path, crs, stu, msg):
    c, s = write_pair(tmp_path, crs, stu)
    with pytest.raises(InstanceFormatError, match=msg):
        parse_instance(c, s, 3)


def test_instance_validation():
    with pytest.raises(InstanceFormatError):
        Instance(2, 3, [(1, 3)])
    with pytest.raises(InstanceFormatError):
        Instance(2, 0, [(1,)])
    inst = Instance(2, 3, [(1,), (2,)])
    bigger = inst.with_extra_enrollment(3, [1, 2])
    assert bigger.n_exams == 3 and bigger.enrollments == [(1, 3), (2, 3)]
    with pytest.raises(InstanceFormatError):
        inst.with_extra_enrollment(5, [1])
    with pytest.raises(InstanceFormatError):
        inst.with_extra_enrollment(1, [9])


def test_dense_matrix_symmetric():
    inst = random_instance(15, 40, 6, random.Random(2))
    m = build_conflict_matrix(inst).matrix
    assert (m == m.T).all() and (np.diag(m) == 0).all()
    brute = np.zeros_like(m)
    for exams in inst.enrollments:
        for a, b in itertools.permutations(exams, 2):
            brute[a - 1, b - 1] += 1
    assert (brute == m).all()


def test_evaluator_matches_student_loop_oracle():
    rng = random.Random(11)
    for _ in range(50):
        inst = random_instance(10, 20, 7, rng)
        p = TimetablingProblem(inst)
        tt = greedy_timetable(p, rng)
        assert proximity_cost(tt, p.cm, inst.n_students) == oracle_cost(inst, tt)
        assert p.cost(tt) == oracle_cost(inst, tt)


def test_ld_order_against_sort_oracle():
    rng = random.Random(9)
    for _ in range(20):
        cm = build_conflict_matrix(random_instance(20, 30, 6, rng))
        deg = {e: int((cm.matrix[e - 1] > 0).sum()) for e in range(1, 21)}
        expected = sorted(deg, key=lambda e: (-deg[e], e))
        assert ld_order(cm) == expected
    star = build_conflict_matrix(Instance(4, 3, [(2, 1), (2, 3), (2, 4)]))
    assert ld_order(star)[0] == 2
    flat = build_conflict_matrix(Instance(3, 3, [(1,), (2,), (3,)]))
    assert ld_order(flat) == [1, 2, 3]


def test_hard_violations():
    cm = build_conflict_matrix(Instance(3, 3, [(1, 2), (2, 3)]))
    assert hard_violations({1: 0, 2: 0, 3: 0}, cm) == 2
    assert hard_violations({1: 0, 2: 1, 3: 0}, cm) == 0
    with pytest.raises(ValueError, match="unassigned"):
        hard_violations({1: 0}, cm)


def test_solution_round_trip(tmp_path):
    tt = {3: 1, 1: 0, 2: 4}
    write_solution(tt, tmp_path / "s.sol")
    assert (tmp_path / "s.sol").read_text() == "1 0\n2 4\n3 1\n"
    assert read_solution(tmp_path / "s.sol", 3, 5) == tt
    with pytest.raises(InstanceFormatError, match="incomplete"):
        read_solution(tmp_path / "s.sol", 4, 5)
    (tmp_path / "d.sol").write_text("1 0\n1 2\n")
    with pytest.raises(InstanceFormatError, match="duplicate"):
        read_solution(tmp_path / "d.sol")
    (tmp_path / "r.sol").write_text("1 9\n")
    with pytest.raises(InstanceFormatError, match="out of range"):
        read_solution(tmp_path / "r.sol", 1, 5)


def test_dataset_lookup(tmp_path, monkeypatch):
    meta = read_metadata()
    assert meta["sta83"] == 13 and meta["ute92"] == 10 and meta["hec92"] == 18 and meta["yor83"] == 21
    write_pair(tmp_path, "1 1\n2 1\n", "1 2\n", stem="sta-f-83")
    monkeypatch.setenv("ICHEA_DATA_DIR", str(tmp_path))
    crs, _ = locate_instance("sta83")
    assert crs.name == "sta-f-83.crs"
    inst = load_named_instance("STA83")
    assert inst.n_slots == 13
    with pytest.raises(FileNotFoundError):
        locate_instance("hec92")
    monkeypatch.delenv("ICHEA_DATA_DIR")
    with pytest.raises(FileNotFoundError, match="ICHEA_DATA_DIR"):
        locate_instance("sta83")


def test_csp_mutation_grows_feasibly(tt20):
    rng = random.Random(1)
    p = tt20
    active = list(range(1, p.m + 1))
    c = Chromosome()
    for _ in range(200):
        before = len(c)
        p.csp_mutate(c, active, rng)
        assert len(c) >= before and p.is_feasible(c)
    assert len(c) == p.m


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_delta_rescoring_matches_full_score(seed):
    rng = random.Random(seed)
    inst = random_instance(25, 80, 9, random.Random(seed % 7))
    p = TimetablingProblem(inst)
    parent = Chromosome(greedy_timetable(p, rng))
    p.score(parent)
    for _ in range(20):
        genes = dict(parent.genes)
        for e in rng.sample(list(genes), rng.randint(1, 4)):
            free = [s for s in range(p.n_slots) if p.fits(genes, e, s)]
            genes[e] = rng.choice(free)
        child = p.derive(parent, genes)
        assert child.fitness == p.full_score(genes)
        assert child.digest == digest(child)
        parent = child


def test_contributions_double_count_the_cost(tt20):
    p = tt20
    tt = greedy_timetable(p)
    assert p.exam_contributions(tt).sum() == 2 * p.full_score(tt)[0]


def test_generic_key_is_gap_histogram(tt20):
    p = TimetablingProblem(tt20.instance, fitness_mode="generic")
    c = Chromosome(greedy_timetable(p))
    assert p.key(c) == c.fitness[1]
    assert len(p.key(c)) == 5
    assert p.solution_vector(c)[0] == c.genes[1]


def test_weight_table():
    assert GAP_WEIGHTS == (0, 16, 8, 4, 2, 1)
