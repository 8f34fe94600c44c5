"""Command-line front end: solve, evaluate, bench, nqueen, whatif."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .core import EngineConfig, read_config_file
from .engine import RunResult, UnresolvedReport, load_snapshots, run, snapshot_name, whatif_add, write_snapshot
from .fitness import HardViolationError, proximity_cost
from .timetabling import (
    Instance,
    InstanceFormatError,
    TimetablingProblem,
    build_conflict_matrix,
    data_dir,
    hard_violations,
    locate_instance,
    parse_instance,
    read_metadata,
    read_solution,
    write_solution,
)

logger = logging.getLogger("ichea")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---- shared plumbing ----------------------------------------------------------------


def _fmt(x) -> str:
    return f"{float(x):.4f}"


def instance_paths(given: Sequence[str], root: Optional[Path]) -> Tuple[Path, Path, str]:
    """Resolve ``--instance``: a name under the data root, a ``.crs`` path, or ``crs stu``."""
    if len(given) == 2:
        crs, stu = Path(given[0]), Path(given[1])
    elif len(given) == 1:
        p = Path(given[0])
        if p.suffix in (".crs", ".stu") or p.exists():
            crs, stu = p.with_suffix(".crs"), p.with_suffix(".stu")
        else:
            crs, stu = locate_instance(given[0], root)
            return crs, stu, given[0].lower()
    else:
        raise UsageError("--instance takes a name, a .crs path, or 'crs stu'")
    for f in (crs, stu):
        if not f.exists():
            raise FileNotFoundError(f"missing instance file {f}")
    return crs, stu, crs.stem


def load_instance(args) -> Instance:
    root = Path(args.data_dir) if args.data_dir else data_dir()
    crs, stu, name = instance_paths(args.instance, root)
    slots = args.slots
    if slots is None:
        meta = read_metadata(args.metadata) if args.metadata else read_metadata()
        key = name.lower()
        short = key.replace("-f-", "").replace("-s-", "") if len(key) == 8 else key
        slots = meta.get(key, meta.get(short))
        if slots is None:
            raise UsageError(f"no slot count known for {name!r}; pass --slots")
    return parse_instance(crs, stu, slots, name)


def build_config(args, **overrides) -> EngineConfig:
    values: Dict[str, Any] = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    flags = {
        "mode": getattr(args, "mode", None),
        "fitness_mode": getattr(args, "fitness", None),
        "seed": getattr(args, "seed", None),
        "budget_secs": getattr(args, "budget_secs", None),
        "max_generations": getattr(args, "generations", None),
    }
    for k, v in flags.items():
        if v is not None:
            values[k] = v
    if flags["budget_secs"] is not None and flags["max_generations"] is None:
        # a wall-clock budget alone means no generation cap
        values["max_generations"] = None
    values.update(overrides)
    if "mode" in values and "optimize_generations" not in values:
        values["optimize_generations"] = None
    return EngineConfig.from_mapping(values)


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", nargs="+", required=True, metavar="NAME|PATH",
                   help="instance name under the data root, a .crs path, or 'crs stu'")
    p.add_argument("--slots", type=int, default=None, help="number of timeslots T")
    p.add_argument("--data-dir", default=None, help="dataset root (default $ICHEA_DATA_DIR)")
    p.add_argument("--metadata", default=None, help="'name T' slot-count file")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="flat 'key = value' engine config file")
    p.add_argument("--mode", choices=("ichea", "iichea"), default=None)
    p.add_argument("--fitness", choices=("weighted", "generic"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--budget-secs", type=float, default=None)
    p.add_argument("--generations", type=int, default=None, help="generation budget (deterministic)")


# ---- solve ------------------------------------------------------------------------------


def run_summary(res: RunResult, inst: Instance, cfg: EngineConfig) -> Dict[str, Any]:
    out = {"instance": inst.name, "exams": inst.n_exams, "students": inst.n_students, "slots": inst.n_slots,
           "config": cfg.to_dict()}
    out.update(res.summary())
    if res.histogram is not None:
        out["preference_histogram"] = {f"l{d}": n for d, n in enumerate(res.histogram)}
    return out


def cmd_solve(args) -> int:
    inst = load_instance(args)
    cfg = build_config(args)
    problem = TimetablingProblem(inst, fitness_mode=cfg.fitness_mode)
    res = run(problem, cfg)
    out = Path(args.out or f"{inst.name}.sol")
    out.parent.mkdir(parents=True, exist_ok=True)
    if res.best is not None:
        write_solution(res.best.genes, out)
    summary_path = Path(args.summary) if args.summary else out.with_suffix(".json")
    summary_path.write_text(json.dumps(run_summary(res, inst, cfg), indent=2, sort_keys=True) + "\n")
    if args.snapshots:
        d = Path(args.snapshots)
        d.mkdir(parents=True, exist_ok=True)
        for snap in res.snapshots:
            write_snapshot(snap, d / snapshot_name(snap.index))
    if args.plot:
        from .plotting import convergence_plot

        convergence_plot(res.trace, inst.n_students, args.plot, title=f"{inst.name} ({cfg.mode})")
    if not res.feasible:
        print(f"{inst.name}: no feasible timetable within budget (best partial holds {len(res.best or [])} "
              f"of {inst.n_exams} exams)")
        return EXIT_FAIL
    print(f"{inst.name}: feasible, cost {_fmt(res.cost)} after {res.generations} generations -> {out}")
    return EXIT_OK


# ---- evaluate -----------------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    inst = load_instance(args)
    try:
        tt = read_solution(args.solution, inst.n_exams, inst.n_slots)
    except (OSError, InstanceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cm = build_conflict_matrix(inst)
    violations = hard_violations(tt, cm)
    print(f"hard violations: {violations}")
    if violations:
        return EXIT_FAIL
    print(f"proximity cost: {_fmt(proximity_cost(tt, cm, inst.n_students))}")
    return EXIT_OK


# ---- bench -----------------------------------------------------------------------------------

BENCH_COLUMNS = ("instance", "mode", "best", "median", "worst", "SD", "SR", "trials", "error")


def _bench_trial(job: Tuple[str, str, str, int, Dict[str, Any], str]) -> Dict[str, Any]:
    crs, stu, name, slots, cfg_values, mode = job
    cfg = EngineConfig.from_mapping(cfg_values)
    inst = parse_instance(crs, stu, slots, name)
    problem = TimetablingProblem(inst, fitness_mode=cfg.fitness_mode)
    t0 = time.monotonic()
    res = run(problem, cfg)
    cost = res.cost if res.feasible else None
    return {"instance": name, "mode": mode, "seed": cfg.seed, "feasible": res.feasible,
            "cost": None if cost is None else [cost.numerator, cost.denominator],
            "wall_secs": round(time.monotonic() - t0, 3)}


def bench_row(name: str, mode: str, trials: List[Dict[str, Any]]) -> Dict[str, Any]:
    costs = sorted(Fraction(*t["cost"]) for t in trials if t["feasible"])
    row: Dict[str, Any] = {"instance": name, "mode": mode, "trials": len(trials), "error": ""}
    row["SR"] = f"{len(costs) / len(trials):.4f}" if trials else ""
    if costs:
        row["best"] = _fmt(costs[0])
        row["median"] = _fmt(statistics.median_low(costs))
        row["worst"] = _fmt(costs[-1])
        row["SD"] = _fmt(statistics.pstdev([float(c) for c in costs]))
    else:
        row.update(best="", median="", worst="", SD="")
    return row


def cmd_bench(args) -> int:
    suite = read_metadata(args.suite)
    root = Path(args.data_dir) if args.data_dir else data_dir()
    if root is None:
        root = Path(args.suite).parent
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for m in modes:
        if m not in ("ichea", "iichea"):
            raise UsageError(f"unknown mode {m!r}")
    base_seed = args.seed if args.seed is not None else 0
    seeds = [base_seed + k for k in range(args.trials)]
    jobs = []
    rows: Dict[Tuple[str, str], Dict[str, Any]] = {}
    for name, slots in suite.items():
        try:
            crs, stu = locate_instance(name, root)
        except FileNotFoundError as exc:
            for mode in modes:
                rows[(name, mode)] = {"instance": name, "mode": mode, "best": "", "median": "", "worst": "",
                                      "SD": "", "SR": "", "trials": 0, "error": str(exc)}
            continue
        for mode in modes:
            for s in seeds:
                cfg = build_config(args, seed=s, mode=mode)
                jobs.append((str(crs), str(stu), name, slots, cfg.to_dict(), mode))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_trial, jobs))
    else:
        results = [_bench_trial(j) for j in jobs]

    by_key: Dict[Tuple[str, str], List[Dict[str, Any]]] = {}
    for r in results:
        by_key.setdefault((r["instance"], r["mode"]), []).append(r)
    for key, trials in by_key.items():
        rows[key] = bench_row(key[0], key[1], trials)
    ordered = [rows[(n, m)] for n in suite for m in modes if (n, m) in rows]

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        for row in ordered:
            w.writerow(row)
    report = {"seeds": seeds, "rows": ordered, "trials": results}
    out.with_suffix(".json").write_text(json.dumps(report, indent=2) + "\n")
    from .plotting import bench_plot

    bench_plot({k: [float(Fraction(*t["cost"])) for t in v if t["feasible"]] for k, v in by_key.items()},
               out.with_suffix(".png"))
    for row in ordered:
        print(",".join(str(row[c]) for c in BENCH_COLUMNS))
    return EXIT_OK


# ---- nqueen ----------------------------------------------------------------------------------


def cmd_nqueen(args) -> int:
    from .nqueen import ORACLE_MAX_N, NQueensProblem, enumerate_solutions, rows_of

    n = args.n
    if n < 1:
        raise UsageError("--n must be positive")
    oracle = None
    if n <= ORACLE_MAX_N:
        count, oracle = enumerate_solutions(n)
        if count == 0:
            print(f"no solution exists for N={n}")
            return EXIT_FAIL
    cfg = build_config(args)
    res = run(NQueensProblem(n), cfg)
    if not res.feasible:
        print(f"no placement found within budget (best partial: {len(res.best or [])} queens)")
        return EXIT_FAIL
    rows = rows_of(res.best)
    print(" ".join(map(str, rows)))
    if oracle is not None:
        ok = tuple(rows) in oracle
        print(f"oracle check: {'member of' if ok else 'NOT in'} the {len(oracle)}-solution set")
        if not ok:
            return EXIT_FAIL
    return EXIT_OK


# ---- whatif ----------------------------------------------------------------------------------


def _parse_students(text: str) -> List[int]:
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"--students expects integers, got {text!r}") from None


def cmd_whatif(args) -> int:
    inst = load_instance(args)
    students = _parse_students(args.students)
    new_inst = inst.with_extra_enrollment(args.add_exam, students)
    snaps = load_snapshots(args.snapshots)
    cfg = build_config(args)
    problem = TimetablingProblem(new_inst, fitness_mode=cfg.fitness_mode)
    res = whatif_add(snaps, problem, [args.add_exam], cfg)
    if isinstance(res, UnresolvedReport):
        for line in res.lines():
            print(line)
        return EXIT_FAIL
    if not res.feasible:
        print("no feasible timetable within budget")
        return EXIT_FAIL
    out = Path(args.out or f"{inst.name}-whatif.sol")
    write_solution(res.best.genes, out)
    print(f"feasible with exam {args.add_exam} added, cost {_fmt(res.cost)} -> {out}")
    return EXIT_OK


# ---- entry point -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ichea", description="Incremental constraint-driven evolutionary solver")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an exam timetabling instance")
    _add_instance_args(p)
    _add_run_args(p)
    p.add_argument("--out", default=None, help="solution file (default <instance>.sol)")
    p.add_argument("--summary", default=None, help="run summary JSON (default next to --out)")
    p.add_argument("--snapshots", default=None, help="directory for per-increment snapshots")
    p.add_argument("--plot", default=None, help="write a convergence figure (PNG)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="check a solution and print its proximity cost")
    _add_instance_args(p)
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="repeated seeded trials per instance and mode")
    p.add_argument("--suite", required=True, help="'name T' lines naming the instances")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--modes", default="ichea,iichea")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="bench.csv", help="CSV path; JSON and PNG are written alongside")
    p.add_argument("--config", default=None)
    p.add_argument("--fitness", choices=("weighted", "generic"), default=None)
    p.add_argument("--seed", type=int, default=None, help="first seed; trial k uses seed + k")
    p.add_argument("--budget-secs", type=float, default=None)
    p.add_argument("--generations", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("nqueen", help="place N non-attacking queens")
    p.add_argument("--n", type=int, required=True)
    _add_run_args(p)
    p.set_defaults(func=cmd_nqueen)

    p = sub.add_parser("whatif", help="add an exam to stored partial solutions and re-solve")
    _add_instance_args(p)
    _add_run_args(p)
    p.add_argument("--snapshots", required=True)
    p.add_argument("--add-exam", type=int, required=True)
    p.add_argument("--students", required=True, help="comma-separated 1-based student numbers")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_whatif)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, InstanceFormatError, KeyError, ValueError, OSError) as exc:
        if isinstance(exc, HardViolationError):
            raise
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
