"""Per-problem evaluation rows and summary statistics.

The summary follows the benchmark conventions: success rate per algorithm,
mean path-time ratio against the oracle over each algorithm's successes, and
mean collision checks over the intersection of all algorithms' successes.
Paths are re-validated independently before they count as successes.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from typing import Optional

from .baselines import dijkstra_h_plan
from .model import GnnModel
from .planners import plan, plan_with_backtracking
from .roadmap import ProblemInstance
from .sipp import sipp_search, validate_path
from .world import CollisionLedger

ALGORITHMS = ("sipp", "dijkstra-h", "dijkstra-h-bt", "gnn-te", "gnn-te-bt")

CSV_COLUMNS = ("problem_id", "algo", "success", "arrival_s", "checks", "wall_ms", "seed")


@dataclass
class MetricsRow:
    problem_id: int
    algo: str
    success: bool
    arrival_s: Optional[float]  # present iff success
    checks: int
    wall_ms: float
    seed: int


def run_algorithm(
    problem: ProblemInstance,
    problem_id: int,
    algo: str,
    model: Optional[GnnModel] = None,
    top_k: int = 5,
) -> MetricsRow:
    world = problem.world()
    ledger = CollisionLedger()
    t0 = time.perf_counter()
    if algo == "sipp":
        path = sipp_search(problem, world, ledger)
    elif algo == "dijkstra-h":
        path = dijkstra_h_plan(problem, world, ledger)
    elif algo == "dijkstra-h-bt":
        path = dijkstra_h_plan(problem, world, ledger, with_backtracking=True, top_k=top_k)
    elif algo == "gnn-te":
        if model is None:
            raise ValueError("gnn-te requires a model")
        path = plan(problem, model, world, ledger)
    elif algo == "gnn-te-bt":
        if model is None:
            raise ValueError("gnn-te-bt requires a model")
        path = plan_with_backtracking(problem, model, world, ledger, top_k=top_k)
    else:
        raise ValueError(f"unknown algorithm {algo!r}; have {ALGORITHMS}")
    wall_ms = (time.perf_counter() - t0) * 1000.0
    success = path is not None and validate_path(path, problem, world)
    return MetricsRow(
        problem_id=problem_id,
        algo=algo,
        success=success,
        # Arrival times are grid multiples by construction; snap away the
        # ulp-level drift from summing dt in different orders.
        arrival_s=round(path.arrival / problem.grid.dt) * problem.grid.dt if success else None,
        checks=ledger.checks,
        wall_ms=wall_ms,
        seed=problem.seed,
    )


def write_rows(path, rows: list[MetricsRow]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for r in sorted(rows, key=lambda r: (r.problem_id, r.algo)):
            writer.writerow([
                r.problem_id, r.algo, int(r.success),
                "" if r.arrival_s is None else f"{r.arrival_s:.17g}",
                r.checks, f"{r.wall_ms:.3f}", r.seed,
            ])


def read_rows(path) -> list[MetricsRow]:
    out = []
    with open(path, newline="") as f:
        for rec in csv.DictReader(f):
            out.append(MetricsRow(
                problem_id=int(rec["problem_id"]),
                algo=rec["algo"],
                success=bool(int(rec["success"])),
                arrival_s=float(rec["arrival_s"]) if rec["arrival_s"] else None,
                checks=int(rec["checks"]),
                wall_ms=float(rec["wall_ms"]),
                seed=int(rec["seed"]),
            ))
    return out


def summarize(rows: list[MetricsRow]) -> dict:
    algos = sorted({r.algo for r in rows})
    by_algo: dict[str, dict[int, MetricsRow]] = {a: {} for a in algos}
    for r in rows:
        by_algo[r.algo][r.problem_id] = r
    problem_ids = sorted({r.problem_id for r in rows})

    success_rate = {
        a: sum(1 for r in by_algo[a].values() if r.success) / len(by_algo[a])
        for a in algos if by_algo[a]
    }

    # path-time ratio against the oracle, over each algorithm's success cases
    ratio: dict[str, Optional[float]] = {}
    sipp_rows = by_algo.get("sipp", {})
    for a in algos:
        ratios = []
        for pid, r in by_algo[a].items():
            s = sipp_rows.get(pid)
            if r.success and s is not None and s.success:
                ratios.append(100.0 * r.arrival_s / s.arrival_s)
        ratio[a] = sum(ratios) / len(ratios) if ratios else None

    # mean collision checks over the common success set of all algorithms
    common = [
        pid for pid in problem_ids
        if all(pid in by_algo[a] and by_algo[a][pid].success for a in algos)
    ]
    checks = {
        a: (sum(by_algo[a][pid].checks for pid in common) / len(common)) if common else None
        for a in algos
    }

    return {
        "problems": len(problem_ids),
        "algorithms": algos,
        "success_rate": success_rate,
        "path_time_ratio": ratio,
        "collision_checks_common": checks,
        "common_success_count": len(common),
    }
