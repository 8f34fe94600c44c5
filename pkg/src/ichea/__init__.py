"""Incremental constraint-driven evolutionary search for CSPs and exam timetabling."""

from .core import Chromosome, ConstraintAssignment, EngineConfig, Population, ProblemAdapter
from .engine import IncrementPlan, RunResult, UnresolvedReport, run, select_survivors, whatif_add
from .nqueen import NQueensProblem
from .timetabling import Instance, TimetablingProblem, build_conflict_matrix, parse_instance

__version__ = "0.1.0"

__all__ = [
    "Chromosome",
    "ConstraintAssignment",
    "EngineConfig",
    "IncrementPlan",
    "Instance",
    "NQueensProblem",
    "Population",
    "ProblemAdapter",
    "RunResult",
    "TimetablingProblem",
    "UnresolvedReport",
    "build_conflict_matrix",
    "parse_instance",
    "run",
    "select_survivors",
    "whatif_add",
]
