"""Toronto (Carter) uncapacitated exam timetabling adapter."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import MASK64, Chromosome, ConstraintAssignment, ProblemAdapter, digest_genes, gene_hash
from .fitness import GAP_WEIGHTS, MAX_GAP, HardViolationError

logger = logging.getLogger(__name__)

Timetable = Dict[int, int]

DATA_ENV = "ICHEA_DATA_DIR"


class InstanceFormatError(ValueError):
    pass


@dataclass
class Instance:
    n_exams: int
    n_slots: int
    enrollments: List[Tuple[int, ...]]
    name: str = ""
    declared_enrollment: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_exams <= 0:
            raise InstanceFormatError("no exams")
        if not self.enrollments:
            raise InstanceFormatError("no students")
        if self.n_slots <= 0:
            raise InstanceFormatError("slot count must be positive")
        for s, exams in enumerate(self.enrollments, 1):
            for e in exams:
                if not 1 <= e <= self.n_exams:
                    raise InstanceFormatError(f"student {s}: exam id {e} out of range [1, {self.n_exams}]")

    @property
    def n_students(self) -> int:
        return len(self.enrollments)

    def enrollment_counts(self) -> Dict[int, int]:
        counts = {e: 0 for e in range(1, self.n_exams + 1)}
        for exams in self.enrollments:
            for e in exams:
                counts[e] += 1
        return counts

    def with_extra_enrollment(self, exam: int, students: Sequence[int]) -> "Instance":
        """Copy of the instance with ``exam`` added to the given students' lists."""
        if not 1 <= exam <= self.n_exams + 1:
            raise InstanceFormatError(f"exam id {exam} is neither existing nor the next free id {self.n_exams + 1}")
        rows = [list(r) for r in self.enrollments]
        for s in students:
            if not 1 <= s <= len(rows):
                raise InstanceFormatError(f"unknown student {s}")
            if exam not in rows[s - 1]:
                rows[s - 1].append(exam)
        return Instance(max(self.n_exams, exam), self.n_slots, [tuple(r) for r in rows], self.name)


def _int_fields(line: str, path: Path, lineno: int) -> List[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError:
        raise InstanceFormatError(f"{path}:{lineno}: malformed line {line.strip()!r}") from None


def parse_instance(crs: str | Path, stu: str | Path, n_slots: int, name: str = "") -> Instance:
    """Read a ``.crs``/``.stu`` pair.

    Exam ids in ``stu`` must be declared in ``crs``.  Enrollment counts that
    disagree with the student file are logged, not rejected.
    """
    crs, stu = Path(crs), Path(stu)
    declared: Dict[int, int] = {}
    for lineno, line in enumerate(crs.read_text().splitlines(), 1):
        if not line.strip():
            continue
        vals = _int_fields(line, crs, lineno)
        if len(vals) != 2:
            raise InstanceFormatError(f"{crs}:{lineno}: expected 'exam_id enrollment'")
        exam, count = vals
        if exam <= 0 or count < 0:
            raise InstanceFormatError(f"{crs}:{lineno}: invalid exam id or enrollment")
        declared[exam] = count
    if not declared:
        raise InstanceFormatError(f"{crs}: no exams")
    n_exams = max(declared)

    enrollments: List[Tuple[int, ...]] = []
    for lineno, line in enumerate(stu.read_text().splitlines(), 1):
        if not line.strip():
            continue
        exams = _int_fields(line, stu, lineno)
        for e in exams:
            if e not in declared:
                raise InstanceFormatError(f"{stu}:{lineno}: exam id {e} out of range")
        # a student listed twice for one exam still sits it once
        enrollments.append(tuple(dict.fromkeys(exams)))
    if not enrollments:
        raise InstanceFormatError(f"{stu}: no students")

    inst = Instance(n_exams, n_slots, enrollments, name or crs.stem, declared)
    recount = inst.enrollment_counts()
    bad = [e for e, c in declared.items() if recount.get(e, 0) != c]
    if bad:
        logger.warning("%s: %d exams have enrollment counts that disagree with %s", crs.name, len(bad), stu.name)
    return inst


class ConflictMatrix:
    """Symmetric shared-student counts, stored sparsely.

    ``adj[e]`` maps each conflicting exam to the number of shared students
    (ids are 1-based; index 0 is unused).
    """

    def __init__(self, n_exams: int, adj: List[Dict[int, int]]) -> None:
        self.n = n_exams
        self.adj = adj
        ei, ej, w = [], [], []
        for i in range(1, n_exams + 1):
            for j, c in adj[i].items():
                if i < j:
                    ei.append(i)
                    ej.append(j)
                    w.append(c)
        self.ei = np.array(ei, dtype=np.int64)
        self.ej = np.array(ej, dtype=np.int64)
        self.w = np.array(w, dtype=np.int64)
        self.neighbors: List[Tuple[int, ...]] = [tuple(a) for a in adj]
        self.weighted_neighbors: List[Tuple[Tuple[int, int], ...]] = [tuple(a.items()) for a in adj]

    @property
    def n_edges(self) -> int:
        return len(self.w)

    def __getitem__(self, key: Tuple[int, int]) -> int:
        i, j = key
        return self.adj[i].get(j, 0)

    def degree(self, exam: int) -> int:
        return len(self.adj[exam])

    def edge_list(self):
        return zip(self.ei.tolist(), self.ej.tolist(), self.w.tolist())

    @property
    def matrix(self) -> np.ndarray:
        m = np.zeros((self.n, self.n), dtype=np.int64)
        m[self.ei - 1, self.ej - 1] = self.w
        m[self.ej - 1, self.ei - 1] = self.w
        return m


def build_conflict_matrix(inst: Instance) -> ConflictMatrix:
    adj: List[Dict[int, int]] = [dict() for _ in range(inst.n_exams + 1)]
    for exams in inst.enrollments:
        k = len(exams)
        for a in range(k):
            ea = exams[a]
            row = adj[ea]
            for b in range(a + 1, k):
                eb = exams[b]
                row[eb] = row.get(eb, 0) + 1
                adj[eb][ea] = adj[eb].get(ea, 0) + 1
    return ConflictMatrix(inst.n_exams, adj)


def hard_violations(tt: Mapping[int, int], cm: ConflictMatrix) -> int:
    missing = [e for e in range(1, cm.n + 1) if e not in tt]
    if missing:
        raise ValueError(f"unassigned exam {missing[0]}")
    return sum(1 for i, j, _ in cm.edge_list() if tt[i] == tt[j])


def write_solution(tt: Mapping[int, int], path: str | Path) -> None:
    lines = [f"{e} {tt[e]}" for e in sorted(tt)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_solution(path: str | Path, n_exams: Optional[int] = None, n_slots: Optional[int] = None) -> Timetable:
    path = Path(path)
    tt: Timetable = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        vals = _int_fields(line, path, lineno)
        if len(vals) != 2:
            raise InstanceFormatError(f"{path}:{lineno}: expected 'exam_id slot'")
        exam, slot = vals
        if exam in tt:
            raise InstanceFormatError(f"{path}:{lineno}: duplicate exam {exam}")
        if slot < 0 or (n_slots is not None and slot >= n_slots):
            raise InstanceFormatError(f"{path}:{lineno}: slot {slot} out of range")
        if n_exams is not None and not 1 <= exam <= n_exams:
            raise InstanceFormatError(f"{path}:{lineno}: exam {exam} out of range")
        tt[exam] = slot
    if n_exams is not None and len(tt) != n_exams:
        raise InstanceFormatError("incomplete solution")
    return tt


# ---- dataset lookup -----------------------------------------------------------


def bundled_metadata() -> Path:
    return Path(str(resources.files("ichea") / "data" / "instances.txt"))


def read_metadata(path: str | Path | None = None) -> Dict[str, int]:
    """``name T`` lines -> slot counts."""
    path = Path(path) if path is not None else bundled_metadata()
    out: Dict[str, int] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InstanceFormatError(f"{path}:{lineno}: expected 'name T'")
        out[parts[0].lower()] = int(parts[1])
    return out


def data_dir() -> Optional[Path]:
    root = os.environ.get(DATA_ENV)
    return Path(root) if root else None


def locate_instance(name: str, root: Optional[Path] = None) -> Tuple[Path, Path]:
    """Find ``.crs``/``.stu`` files for ``name`` (e.g. ``sta83`` or ``sta-f-83``)."""
    root = root or data_dir()
    if root is None:
        raise FileNotFoundError(f"dataset root not set; export {DATA_ENV} or pass file paths")
    stem = name.lower()
    candidates = [stem]
    if len(stem) == 5 and stem[:3].isalpha() and stem[3:].isdigit():
        candidates += [f"{stem[:3]}-f-{stem[3:]}", f"{stem[:3]}-s-{stem[3:]}"]
    for c in candidates:
        crs, stu = root / f"{c}.crs", root / f"{c}.stu"
        if crs.exists() and stu.exists():
            return crs, stu
    raise FileNotFoundError(f"no .crs/.stu pair for {name!r} under {root}")


def load_named_instance(name: str, metadata: Optional[Dict[str, int]] = None, root: Optional[Path] = None) -> Instance:
    metadata = metadata if metadata is not None else read_metadata()
    key = name.lower()
    if key not in metadata:
        raise KeyError(f"no slot count for {name!r} in metadata")
    crs, stu = locate_instance(name, root)
    return parse_instance(crs, stu, metadata[key], name=key)


# ---- problem adapter --------------------------------------------------------------------


class TimetablingProblem(ProblemAdapter):
    """Exams are constraints, timeslots are values."""

    nonduplicate_key = "id"
    is_cop = True

    def __init__(self, instance: Instance, cm: Optional[ConflictMatrix] = None, fitness_mode: str = "weighted") -> None:
        self.instance = instance
        self.cm = cm or build_conflict_matrix(instance)
        self.n_slots = instance.n_slots
        self.n_students = instance.n_students
        self.fitness_mode = fitness_mode
        T = self.n_slots
        # weight by absolute gap, padded so every gap in [0, T) indexes
        self._w = list(GAP_WEIGHTS) + [0] * max(0, T + 1 - len(GAP_WEIGHTS))
        self._wnp = np.array(self._w, dtype=np.int64)
        self._gap_ok = np.array([1 <= g <= MAX_GAP for g in range(len(self._w))])

    # -- contract -----------------------------------------------------------

    @property
    def m(self) -> int:
        return self.cm.n

    def domain(self, constraint: int) -> Sequence[int]:
        return range(self.n_slots)

    def compatible(self, assignment: ConstraintAssignment, chromosome: Chromosome) -> bool:
        return self.fits(chromosome.genes, assignment.constraint, assignment.value)

    def fits(self, genes: Mapping[int, int], exam: int, slot: int) -> bool:
        get = genes.get
        for n in self.cm.neighbors[exam]:
            if get(n) == slot:
                return False
        return True

    def check(self, chromosome: Chromosome, constraint: int, value: int) -> Tuple[bool, int]:
        get = chromosome.genes.get
        ops = 0
        for n in self.cm.neighbors[constraint]:
            ops += 1
            if get(n) == value:
                return False, ops
        return True, max(ops, 1)

    def strength(self, constraint: int) -> int:
        return self.cm.degree(constraint)

    def satisfied(self, x: Dict[int, int]) -> List[int]:
        out = []
        for e in range(1, self.m + 1):
            s = x[e]
            out.append(int(all(x.get(n) != s for n in self.cm.neighbors[e])))
        return out

    def ld_order(self) -> List[int]:
        return ld_order(self.cm)

    def conflicts_in(self, genes: Mapping[int, int], exam: int, slot: int) -> List[int]:
        get = genes.get
        return [n for n in self.cm.neighbors[exam] if get(n) == slot]

    # -- construction moves -------------------------------------------------

    def csp_mutate(self, chromosome: Chromosome, active: Sequence[int], rng) -> None:
        """Place one missing exam at its least-conflicting slot.

        Conflict-free slots are preferred (cheapest proximity first); otherwise
        a slot blocked by exactly one exam is taken and that exam is unplaced,
        so the length never decreases.
        """
        genes = chromosome.genes
        missing = [e for e in active if e not in genes]
        if not missing:
            return
        exam = missing[rng.randrange(len(missing))]
        best_free: List[int] = []
        best_cost = None
        single: List[Tuple[int, int]] = []
        wn = self.cm.weighted_neighbors[exam]
        blockers_by_slot: Dict[int, List[int]] = {}
        for n, _ in wn:
            s = genes.get(n)
            if s is not None:
                blockers_by_slot.setdefault(s, []).append(n)
        for slot in range(self.n_slots):
            blockers = blockers_by_slot.get(slot)
            if not blockers:
                cost = self._placement_cost(genes, wn, slot)
                if best_cost is None or cost < best_cost:
                    best_cost, best_free = cost, [slot]
                elif cost == best_cost:
                    best_free.append(slot)
            elif len(blockers) == 1:
                single.append((slot, blockers[0]))
        if best_free:
            chromosome.set_gene(exam, best_free[rng.randrange(len(best_free))])
        elif single:
            slot, victim = single[rng.randrange(len(single))]
            chromosome.drop_gene(victim)
            chromosome.set_gene(exam, slot)

    def _placement_cost(self, genes: Mapping[int, int], wn, slot: int) -> int:
        w = self._w
        total = 0
        for n, c in wn:
            s = genes.get(n)
            if s is not None:
                total += c * w[abs(s - slot)]
        return total

    # -- scoring --------------------------------------------------------------

    def slots_array(self, genes: Mapping[int, int]) -> np.ndarray:
        arr = np.full(self.m + 1, -1, dtype=np.int64)
        if genes:
            arr[np.fromiter(genes.keys(), dtype=np.int64, count=len(genes))] = np.fromiter(
                genes.values(), dtype=np.int64, count=len(genes)
            )
        return arr

    def full_score(self, genes: Mapping[int, int]) -> Tuple[int, Tuple[int, ...]]:
        """(proximity numerator, gap-1..5 pair counts) over placed pairs."""
        arr = self.slots_array(genes)
        si, sj = arr[self.cm.ei], arr[self.cm.ej]
        placed = (si >= 0) & (sj >= 0)
        gap = np.abs(si - sj)[placed]
        if np.any(gap == 0):
            raise HardViolationError("hard violation in scored timetable")
        w = self.cm.w[placed]
        cost = int((w * self._wnp[gap]).sum())
        hist = np.bincount(gap[gap <= MAX_GAP], minlength=MAX_GAP + 1)[1:MAX_GAP + 1]
        return cost, tuple(int(h) for h in hist)

    def rescore(self, parent: Chromosome, child: Chromosome) -> None:
        """Set ``child.fitness`` from ``parent.fitness`` via the changed exams."""
        pg, cg = parent.genes, child.genes
        moved = [e for e, s in cg.items() if pg.get(e) != s]
        if (len(cg) != len(pg) or len(moved) * 4 > len(cg) or parent.fitness is None
                or any(e not in pg for e in moved)):
            child.fitness = self.full_score(cg)
            return
        cost, hist = parent.fitness
        hist = list(hist)
        w = self._w
        moved_set = set(moved)
        for e in moved:
            so, sn = pg[e], cg[e]
            for n, c in self.cm.weighted_neighbors[e]:
                if n in moved_set:
                    if n < e:
                        continue
                    to, tn = pg.get(n), cg.get(n)
                else:
                    to = tn = cg.get(n)
                if to is None:
                    continue
                go, gn = abs(so - to), abs(sn - tn)
                if gn == 0:
                    raise HardViolationError(f"hard violation: exams {e} and {n}")
                cost += c * (w[gn] - w[go])
                if go <= MAX_GAP:
                    hist[go - 1] -= 1
                if gn <= MAX_GAP:
                    hist[gn - 1] += 1
        child.fitness = (cost, tuple(hist))

    def derive(self, parent: Chromosome, genes: Timetable) -> Chromosome:
        """Chromosome for ``genes`` with digest and fitness updated from ``parent``."""
        child = Chromosome.__new__(Chromosome)
        child.genes = genes
        child.occupied = None
        child.rchc = None
        child.improved_at = parent.improved_at
        pg = parent.genes
        if len(genes) == len(pg):
            d = parent.digest
            for e, s in genes.items():
                o = pg.get(e)
                if o != s:
                    if o is None:
                        d = digest_genes(genes)
                        break
                    d = (d - gene_hash(e, o) + gene_hash(e, s)) & MASK64
            child._digest = d
        else:
            child._digest = digest_genes(genes)
        child.fitness = None
        self.rescore(parent, child)
        return child

    def score(self, chromosome: Chromosome) -> None:
        chromosome.fitness = self.full_score(chromosome.genes)

    def key(self, chromosome: Chromosome):
        """Minimisation key for the active fitness mode."""
        if chromosome.fitness is None:
            self.score(chromosome)
        cost, hist = chromosome.fitness
        return hist if self.fitness_mode == "generic" else cost

    def exam_contributions(self, genes: Mapping[int, int]) -> np.ndarray:
        """Per-exam proximity contribution (each pair charged to both ends)."""
        arr = self.slots_array(genes)
        si, sj = arr[self.cm.ei], arr[self.cm.ej]
        placed = (si >= 0) & (sj >= 0)
        vals = np.where(placed, self.cm.w * self._wnp[np.abs(si - sj)], 0)
        out = np.bincount(self.cm.ei, weights=vals, minlength=self.m + 1)
        out += np.bincount(self.cm.ej, weights=vals, minlength=self.m + 1)
        return out

    def cost(self, genes: Mapping[int, int]) -> Fraction:
        return Fraction(self.full_score(genes)[0], self.n_students)

    def solution_vector(self, chromosome: Chromosome) -> List[Optional[int]]:
        get = chromosome.genes.get
        return [get(e) for e in range(1, self.m + 1)]


def ld_order(cm: ConflictMatrix) -> List[int]:
    """Exams by descending count of distinct conflicting exams, ties by id."""
    return sorted(range(1, cm.n + 1), key=lambda e: (-len(cm.adj[e]), e))


def random_instance(n_exams: int, n_students: int, n_slots: int, rng, max_per_student: int = 4,
                    planted: bool = True) -> Instance:
    """Small synthetic instance; ``planted`` guarantees a feasible timetable exists."""
    hidden = [rng.randrange(n_slots) for _ in range(n_exams + 1)]
    rows = []
    for _ in range(n_students):
        k = rng.randint(1, max(1, max_per_student))
        picks: List[int] = []
        used_slots = set()
        for e in rng.sample(range(1, n_exams + 1), min(n_exams, k * 3)):
            if planted and hidden[e] in used_slots:
                continue
            picks.append(e)
            used_slots.add(hidden[e])
            if len(picks) == k:
                break
        rows.append(tuple(picks))
    return Instance(n_exams, n_slots, rows, name="random")
