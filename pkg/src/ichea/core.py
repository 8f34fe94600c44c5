"""Problem-agnostic domain model: chromosomes, population, configuration."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence

MASK64 = (1 << 64) - 1


class ConstraintAssignment(NamedTuple):
    """One satisfied constraint and the concrete value that satisfies it."""

    constraint: int
    value: int


def _mix64(x: int) -> int:
    # splitmix64 finalizer
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def gene_hash(constraint: int, value: int) -> int:
    return _mix64(((constraint & 0xFFFFFFFF) << 32) | (value & 0xFFFFFFFF))


@dataclass
class RchcState:
    """Per-individual memory used by reversible clonal hill-climbing."""

    history_depth: int = 3
    tabu_capacity: int = 10
    history: deque = field(default=None)  # type: ignore[assignment]
    tabu: deque = field(default=None)  # type: ignore[assignment]
    stagnation: int = 0

    def __post_init__(self) -> None:
        if self.history is None:
            self.history = deque(maxlen=self.history_depth)
        if self.tabu is None:
            self.tabu = deque(maxlen=self.tabu_capacity)

    def copy(self) -> "RchcState":
        return RchcState(
            self.history_depth,
            self.tabu_capacity,
            deque(self.history, maxlen=self.history_depth),
            deque(self.tabu, maxlen=self.tabu_capacity),
            self.stagnation,
        )


class Chromosome:
    """Variable-length feasible partial solution.

    ``genes`` maps constraint id to value and keeps insertion order, which is
    the order alleles were appended.  Feasibility and the digest only depend
    on the gene set.  ``occupied`` is an adapter-owned index (N-Queens keeps
    row/diagonal ownership there); other adapters leave it ``None``.
    """

    __slots__ = ("genes", "fitness", "rchc", "occupied", "improved_at", "_digest")

    def __init__(self, genes: Optional[Dict[int, int]] = None) -> None:
        self.genes: Dict[int, int] = {}
        self.fitness: Any = None
        self.rchc: Optional[RchcState] = None
        self.occupied: Optional[Dict[Any, int]] = None
        self.improved_at = 0
        self._digest = 0
        if genes:
            for c, v in genes.items():
                self.genes[c] = v
                self._digest = (self._digest + gene_hash(c, v)) & MASK64

    def __len__(self) -> int:
        return len(self.genes)

    def __repr__(self) -> str:
        body = ", ".join(f"{c}:{v}" for c, v in self.genes.items())
        return f"Chromosome({{{body}}})"

    @property
    def digest(self) -> int:
        return self._digest

    def assignments(self) -> List[ConstraintAssignment]:
        return [ConstraintAssignment(c, v) for c, v in self.genes.items()]

    def set_gene(self, constraint: int, value: int) -> None:
        old = self.genes.get(constraint)
        if old is not None:
            self._digest = (self._digest - gene_hash(constraint, old)) & MASK64
        self.genes[constraint] = value
        self._digest = (self._digest + gene_hash(constraint, value)) & MASK64

    def drop_gene(self, constraint: int) -> int:
        value = self.genes.pop(constraint)
        self._digest = (self._digest - gene_hash(constraint, value)) & MASK64
        return value

    def replace_genes(self, genes: Dict[int, int]) -> None:
        self.genes = genes
        self._digest = digest_genes(genes)
        self.occupied = None

    def copy(self, keep_state: bool = False) -> "Chromosome":
        c = Chromosome.__new__(Chromosome)
        c.genes = dict(self.genes)
        c.fitness = self.fitness
        c._digest = self._digest
        c.occupied = dict(self.occupied) if self.occupied is not None else None
        c.improved_at = self.improved_at
        c.rchc = self.rchc.copy() if (keep_state and self.rchc is not None) else None
        return c


def digest_genes(genes: Dict[int, int]) -> int:
    total = 0
    for c, v in genes.items():
        total += gene_hash(c, v)
    return total & MASK64


def digest(c: Chromosome) -> int:
    """Order-insensitive 64-bit digest of a chromosome's gene set."""
    return digest_genes(c.genes)


@dataclass
class Community:
    anchor: int
    members: List[int] = field(default_factory=list)
    capacity: int = 4

    def __post_init__(self) -> None:
        if len(self.members) > self.capacity:
            raise ValueError("community over capacity")


@dataclass
class Population:
    csp_pool: List[Chromosome] = field(default_factory=list)
    cop_pool: List[Chromosome] = field(default_factory=list)
    communities: List[Community] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.csp_pool) + len(self.cop_pool)


MODES = ("ichea", "iichea")
FITNESS_MODES = ("weighted", "generic")


@dataclass
class EngineConfig:
    """Run parameters.  Defaults follow the published parameter table."""

    population_size: int = 100
    optimize_generations: Optional[int] = None
    degree_of_influence: int = 3
    community_size: int = 4
    total_communities: int = 10
    stagnant_generations: int = 5
    clone_constant: int = 1
    history_depth: int = 3
    backtrack_stagnation: int = 5
    tabu_history: int = 5
    increment_fraction: float = 0.05
    selection_rho: float = 5.0
    seed: int = 0
    mode: str = "iichea"
    fitness_mode: str = "weighted"
    budget_secs: Optional[float] = None
    max_generations: Optional[int] = 3000
    # not in the published table
    tabu_capacity: int = 10
    tabu_strict: bool = False
    max_clones: int = 5
    stall_generations: int = 25
    whatif_generations: int = 50
    csp_mutation_steps: int = 1

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.fitness_mode not in FITNESS_MODES:
            raise ValueError(f"unknown fitness mode {self.fitness_mode!r}")
        wanted = 0 if self.mode == "ichea" else 50
        if self.optimize_generations is None:
            self.optimize_generations = wanted
        if (self.optimize_generations == 0) != (self.mode == "ichea"):
            raise ValueError("optimize_generations must be 0 exactly when mode is ichea")
        for name in (
            "population_size", "degree_of_influence", "community_size",
            "total_communities", "stagnant_generations", "clone_constant",
            "history_depth", "backtrack_stagnation", "tabu_history",
            "tabu_capacity", "max_clones", "stall_generations", "csp_mutation_steps",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.population_size < 4:
            raise ValueError("population_size must be at least 4")
        if not 0.0 < self.increment_fraction <= 1.0:
            raise ValueError("increment_fraction must lie in (0, 1]")
        if self.selection_rho <= 0:
            raise ValueError("selection_rho must be positive")
        if self.budget_secs is None and self.max_generations is None:
            raise ValueError("need a wall-clock or generation budget")
        if self.seed < 0 or self.seed > MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def new_rchc_state(self) -> RchcState:
        return RchcState(self.history_depth, self.tabu_capacity)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_mapping(cls, values: Dict[str, Any]) -> "EngineConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs: Dict[str, Any] = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, cls)
        if "mode" in kwargs and "optimize_generations" not in kwargs:
            kwargs["optimize_generations"] = None
        return cls(**kwargs)


_FLOAT_KEYS = {"increment_fraction", "selection_rho", "budget_secs"}
_STR_KEYS = {"mode", "fitness_mode"}
_BOOL_KEYS = {"tabu_strict"}


def _coerce(key: str, raw: Any, cls: type) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text.lower() in ("none", ""):
        return None
    if key in _STR_KEYS:
        return text
    if key in _BOOL_KEYS:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if key in _FLOAT_KEYS:
        return float(text)
    return int(text)


def read_config_file(path: str | Path) -> Dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


class ProblemAdapter(ABC):
    """Contract a concrete problem implements for the engine.

    Constraints are identified by integers in ``[1, m]``.  ``compatible`` must
    depend only on the gene set of the chromosome, never on gene order.
    """

    #: "value" when duplicate alleles are detected by value (N-Queens rows),
    #: "id" when detected by constraint id (timetabling exams).
    nonduplicate_key = "id"
    is_cop = False

    @property
    @abstractmethod
    def m(self) -> int: ...

    @abstractmethod
    def domain(self, constraint: int) -> Sequence[int]: ...

    @abstractmethod
    def compatible(self, assignment: ConstraintAssignment, chromosome: Chromosome) -> bool: ...

    def strength(self, constraint: int) -> int:
        return 0

    @abstractmethod
    def satisfied(self, x: Dict[int, int]) -> List[int]:
        """Per-constraint 0/1 satisfaction of a full assignment, in id order."""

    # ---- engine hooks -------------------------------------------------------

    def key_space(self) -> int:
        """Marker-vector length used for non-duplicate detection."""
        return self.m

    def key_of(self, constraint: int, value: int) -> int:
        """0-based marker index of a gene."""
        return constraint - 1 if self.nonduplicate_key == "id" else value

    def target_for(self, receiver: Chromosome, constraint: int, active: Optional[set] = None) -> Optional[int]:
        """Constraint id a donor gene lands on in the receiver (None if no room)."""
        return constraint

    def check(self, chromosome: Chromosome, constraint: int, value: int) -> tuple[bool, int]:
        """Compatibility plus the number of elementary comparisons it cost."""
        return self.compatible(ConstraintAssignment(constraint, value), chromosome), max(1, len(chromosome))

    def place(self, chromosome: Chromosome, constraint: int, value: int) -> None:
        chromosome.set_gene(constraint, value)

    def unplace(self, chromosome: Chromosome, constraint: int) -> None:
        chromosome.drop_gene(constraint)

    def ld_order(self) -> List[int]:
        return list(range(1, self.m + 1))

    def is_feasible(self, chromosome: Chromosome) -> bool:
        """Full pairwise recheck of the feasible-partial invariant."""
        probe = Chromosome()
        for c, v in chromosome.genes.items():
            if not self.compatible(ConstraintAssignment(c, v), probe):
                return False
            self.place(probe, c, v)
        return True

    @abstractmethod
    def csp_mutate(self, chromosome: Chromosome, active: Sequence[int], rng) -> None:
        """In-place move that never shortens the chromosome."""

    def solution_vector(self, chromosome: Chromosome) -> List[Optional[int]]:
        return [chromosome.genes.get(c) for c in range(1, self.m + 1)]


def batch_size(m: int, fraction: float) -> int:
    return max(1, math.ceil(round(fraction * m, 9)))


def chunked(seq: Sequence[int], size: int) -> Iterable[List[int]]:
    for start in range(0, len(seq), size):
        yield list(seq[start:start + size])
