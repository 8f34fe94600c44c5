from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ichea.core import (
    Chromosome,
    ConstraintAssignment,
    EngineConfig,
    RchcState,
    batch_size,
    chunked,
    digest,
    read_config_file,
)


def test_digest_ignores_gene_order():
    a = Chromosome({1: 3, 2: 6, 4: 1})
    b = Chromosome({4: 1, 1: 3, 2: 6})
    assert a.digest == b.digest == digest(a)
    assert a.digest != Chromosome({1: 3, 2: 5, 4: 1}).digest


@given(st.dictionaries(st.integers(1, 50), st.integers(0, 40), max_size=30),
       st.lists(st.tuples(st.integers(1, 50), st.integers(0, 40)), max_size=20))
def test_incremental_digest_matches_recompute(genes, edits):
    c = Chromosome(genes)
    for k, v in edits:
        if k in c.genes and v % 3 == 0:
            c.drop_gene(k)
        else:
            c.set_gene(k, v)
        assert c.digest == digest(c)


def test_copy_is_independent():
    c = Chromosome({1: 2})
    c.rchc = RchcState()
    d = c.copy()
    d.set_gene(2, 5)
    assert len(c) == 1 and d.rchc is None
    assert c.copy(keep_state=True).rchc is not c.rchc


def test_assignments_keep_insertion_order():
    c = Chromosome({3: 1, 1: 4})
    assert c.assignments() == [ConstraintAssignment(3, 1), ConstraintAssignment(1, 4)]


def test_rchc_history_is_bounded():
    s = RchcState(history_depth=3)
    for k in range(5):
        s.history.append(k)
    assert list(s.history) == [2, 3, 4]


def test_config_defaults_follow_parameter_table():
    cfg = EngineConfig()
    assert (cfg.population_size, cfg.optimize_generations, cfg.degree_of_influence) == (100, 50, 3)
    assert (cfg.community_size, cfg.total_communities, cfg.stagnant_generations) == (4, 10, 5)
    assert (cfg.clone_constant, cfg.history_depth, cfg.backtrack_stagnation, cfg.tabu_history) == (1, 3, 5, 5)
    assert cfg.increment_fraction == 0.05 and cfg.selection_rho == 5.0
    assert EngineConfig(mode="ichea").optimize_generations == 0


@pytest.mark.parametrize("kwargs", [
    {"population_size": 0}, {"population_size": 2}, {"increment_fraction": 0.0},
    {"increment_fraction": 1.5}, {"mode": "ichea", "optimize_generations": 50},
    {"mode": "iichea", "optimize_generations": 0}, {"seed": -1}, {"seed": 1 << 64},
    {"budget_secs": None, "max_generations": None}, {"mode": "nope"}, {"fitness_mode": "x"},
])
def test_config_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        EngineConfig(**kwargs)


def test_config_file_round_trip(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\npopulation_size = 40\nmode = ichea\nincrement_fraction=0.1\ntabu_strict = yes\n")
    cfg = EngineConfig.from_mapping(read_config_file(f))
    assert cfg.population_size == 40 and cfg.mode == "ichea" and cfg.optimize_generations == 0
    assert cfg.increment_fraction == 0.1 and cfg.tabu_strict is True
    with pytest.raises(ValueError):
        EngineConfig.from_mapping({"bogus": "1"})
    (tmp_path / "bad.cfg").write_text("just words\n")
    with pytest.raises(ValueError):
        read_config_file(tmp_path / "bad.cfg")


def test_batching():
    assert batch_size(139, 0.05) == 7
    assert batch_size(100, 0.05) == 5
    assert batch_size(3, 0.05) == 1
    assert list(chunked([1, 2, 3, 4, 5], 2)) == [[1, 2], [3, 4], [5]]
