"""N-Queens adapter, exhaustive oracle and fusion operation counter.

Columns are constraint ids and rows are allele values, both 1-based.  A
donor row fused into a receiver lands on the receiver's lowest free column,
so ``<3,6>`` fused with ``<6,2,5>`` grows to ``<3,6,2,5>``.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .core import Chromosome, ConstraintAssignment, ProblemAdapter

QueenAssignment = ConstraintAssignment

ORACLE_MAX_N = 10


def _keys(col: int, row: int, n: int) -> Tuple[int, int, int]:
    # row, diagonal (col - row), anti-diagonal (col + row), packed into one int space
    return row, 3 * n + col - row, 6 * n + col + row


class NQueensProblem(ProblemAdapter):
    nonduplicate_key = "value"
    is_cop = False

    def __init__(self, n: int) -> None:
        if n < 1:
            raise ValueError("N must be positive")
        self.n = n
        self._rows = range(1, n + 1)
        # (receiver, columns, position) of the last lowest-free-column answer
        self._cursor: Optional[Tuple[Chromosome, Sequence[int], int]] = None

    @property
    def m(self) -> int:
        return self.n

    def domain(self, constraint: int) -> Sequence[int]:
        return self._rows

    def key_space(self) -> int:
        return self.n

    def key_of(self, constraint: int, value: int) -> int:
        return value - 1

    # -- occupancy index ---------------------------------------------------

    def index(self, chromosome: Chromosome) -> Dict[int, int]:
        occ = chromosome.occupied
        if occ is None:
            occ = {}
            n = self.n
            for c, r in chromosome.genes.items():
                for k in _keys(c, r, n):
                    occ[k] = c
            chromosome.occupied = occ
        return occ

    def place(self, chromosome: Chromosome, constraint: int, value: int) -> None:
        occ = self.index(chromosome)
        chromosome.set_gene(constraint, value)
        for k in _keys(constraint, value, self.n):
            occ[k] = constraint

    def unplace(self, chromosome: Chromosome, constraint: int) -> None:
        occ = self.index(chromosome)
        self._cursor = None
        row = chromosome.drop_gene(constraint)
        for k in _keys(constraint, row, self.n):
            occ.pop(k, None)

    # -- contract ---------------------------------------------------------------

    def compatible(self, assignment: ConstraintAssignment, chromosome: Chromosome) -> bool:
        col, row = assignment
        if col in chromosome.genes:
            raise ValueError(f"column {col} already holds a queen")
        occ = self.index(chromosome)
        return not any(k in occ for k in _keys(col, row, self.n))

    def check(self, chromosome: Chromosome, constraint: int, value: int) -> Tuple[bool, int]:
        occ = chromosome.occupied
        if occ is None:
            occ = self.index(chromosome)
        n = self.n
        if value in occ:
            return False, 1
        if 3 * n + constraint - value in occ:
            return False, 2
        return 6 * n + constraint + value not in occ, 3

    def target_for(self, receiver: Chromosome, constraint: int, active: Optional[Iterable[int]] = None) -> Optional[int]:
        cols = active if active is not None else self._rows
        start = 0
        cur = self._cursor
        if cur is not None and cur[0] is receiver and cur[1] is cols:
            # columns only fill up between calls, so resume where the last scan stopped
            start = cur[2]
        elif not isinstance(cols, (list, tuple, range)):
            cols = sorted(cols)
        genes = receiver.genes
        for i in range(start, len(cols)):
            if cols[i] not in genes:
                self._cursor = (receiver, cols, i)
                return cols[i]
        self._cursor = (receiver, cols, len(cols))
        return None

    def satisfied(self, x: Dict[int, int]) -> List[int]:
        cols = sorted(x)
        out = []
        for a in cols:
            ok = 1
            for b in cols:
                if a != b and (x[a] == x[b] or abs(a - b) == abs(x[a] - x[b])):
                    ok = 0
                    break
            out.append(ok)
        return out

    def csp_mutate(self, chromosome: Chromosome, active: Sequence[int], rng) -> None:
        """Min-conflict insertion into a random free column.

        A row attacked by nobody is taken outright; a row attacked by a single
        queen evicts that queen, so the length never drops.
        """
        genes = chromosome.genes
        free = [c for c in active if c not in genes]
        if not free:
            return
        col = free[rng.randrange(len(free))]
        occ = self.index(chromosome)
        n = self.n
        best: List[Tuple[int, Set[int]]] = []
        best_k = 2
        for row in self._rows:
            attackers = {occ[k] for k in _keys(col, row, n) if k in occ}
            k = len(attackers)
            if k < best_k:
                best_k, best = k, [(row, attackers)]
            elif k == best_k:
                best.append((row, attackers))
        if not best:
            return
        row, attackers = best[rng.randrange(len(best))]
        for victim in attackers:
            self.unplace(chromosome, victim)
        self.place(chromosome, col, row)


def queen_compatible(a: QueenAssignment, c: Chromosome) -> bool:
    """True iff the queen attacks no queen already in ``c``."""
    col, row = a
    if col in c.genes:
        raise ValueError(f"column {col} already holds a queen")
    for c2, r2 in c.genes.items():
        if r2 == row or abs(c2 - col) == abs(r2 - row):
            return False
    return True


def from_rows(rows: Sequence[int]) -> Chromosome:
    """Chromosome with the i-th row placed in column i+1."""
    return Chromosome({i: r for i, r in enumerate(rows, 1)})


def rows_of(c: Chromosome) -> List[int]:
    return [c.genes[k] for k in sorted(c.genes)]


def enumerate_solutions(n: int) -> Tuple[int, Set[Tuple[int, ...]]]:
    """All full placements by backtracking, rows listed by column."""
    if n > ORACLE_MAX_N:
        raise ValueError("oracle scale exceeded")
    if n < 1:
        raise ValueError("N must be positive")
    found: Set[Tuple[int, ...]] = set()
    rows: List[int] = []

    def extend(col: int, used: int, d1: int, d2: int) -> None:
        if col == n:
            found.add(tuple(rows))
            return
        for r in range(n):
            a, b = col - r + n, col + r
            if used >> r & 1 or d1 >> a & 1 or d2 >> b & 1:
                continue
            rows.append(r + 1)
            extend(col + 1, used | 1 << r, d1 | 1 << a, d2 | 1 << b)
            rows.pop()

    extend(0, 0, 0, 0)
    return len(found), found


def is_full_solution(c: Chromosome, n: int) -> bool:
    if sorted(c.genes) != list(range(1, n + 1)):
        return False
    return all(NQueensProblem(n).satisfied(dict(c.genes)))


def fusion_bound(l1: int, l2: int, nd1: int, nd2: int, n: int) -> int:
    return (l1 + l2 + n) + n * (nd1 + nd2)


def count_fusion_ops(pi: Chromosome, pj: Chromosome, n: int) -> int:
    """Elementary operations spent fusing ``pi`` and ``pj`` both ways."""
    from .crossover import intermarriage_fuse

    ri, rj = intermarriage_fuse(pi, pj, NQueensProblem(n))
    return ri.marker_ops + ri.compare_ops + rj.compare_ops
