"""Benchmark harness CLI: problem generation, hard-instance mining, training,
evaluation, rendering, and the SIPP-vs-oracle equivalence check.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import imitation, metrics
from .baselines import dijkstra_h_plan
from .envs import PRESETS, get_env
from .model import GnnModel, ModelConfig, obstacle_size_of
from .render import render_svg
from .roadmap import (
    ProblemInstance,
    SamplingBudgetExhausted,
    generate_problem,
    read_problems,
    write_problems,
)
from .sipp import TimedPath, sipp_search, time_expanded_oracle
from .world import CollisionLedger

ABLATION_FLAGS = ("global_obstacle_encoding", "local_obstacle_encoding", "temporal_encoding")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DYNOPLAN_THREADS", "1")))
    except ValueError:
        return 1


def _env_from_args(args) -> "EnvSpec":
    overrides = {}
    if args.vertices is not None:
        overrides["vertex_count"] = args.vertices
    if args.knn is not None:
        overrides["k"] = args.knn
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    try:
        return get_env(args.env, **overrides)
    except KeyError as e:
        raise UsageError(str(e)) from e


def _gen_one(env, base_seed: int, index: int, require_solvable: bool):
    for attempt in range(50):
        seed = base_seed * 1_000_000 + index + attempt * 100_000_000
        rng = np.random.default_rng(seed)
        try:
            problem = generate_problem(env, rng, seed=seed)
        except SamplingBudgetExhausted as e:
            print(f"problem {index}: generation failed ({e}), retrying", file=sys.stderr)
            continue
        if not require_solvable:
            return problem
        if sipp_search(problem, problem.world(), CollisionLedger()) is not None:
            return problem
    raise DataError(f"could not generate problem {index} after 50 attempts")


def cmd_gen(args) -> int:
    env = _env_from_args(args)
    problems = []
    for i in range(args.count):
        problems.append(_gen_one(env, args.seed, i, args.require_solvable))
    write_problems(args.out, problems)
    print(f"wrote {len(problems)} problems to {args.out}")
    return 0


def cmd_mine_hard(args) -> int:
    problems = read_problems(args.problems)
    hard = []
    for i, p in enumerate(problems):
        world = p.world()
        if dijkstra_h_plan(p, world, CollisionLedger()) is not None:
            continue
        if sipp_search(p, world, CollisionLedger()) is None:
            continue
        hard.append(p)
    write_problems(args.out, hard)
    print(f"mined {len(hard)} hard problems (of {len(problems)}) to {args.out}")
    return 0


def _parse_ablations(spec: str) -> dict:
    flags = {}
    for name in filter(None, (s.strip() for s in spec.split(","))):
        if name not in ABLATION_FLAGS:
            raise UsageError(f"unknown ablation flag {name!r}; have {ABLATION_FLAGS}")
        flags[name] = False
    return flags


def cmd_train(args) -> int:
    problems = read_problems(args.problems)
    if not problems:
        raise DataError("no problems to train on")
    cfg_kwargs = _parse_ablations(args.ablate) if args.ablate else {}
    cfg = ModelConfig(top_k=args.top_k, loops=args.loops, **cfg_kwargs)
    n_dof = problems[0].ego_arm.n_dof
    obstacle_size = obstacle_size_of(problems[0])
    rng = np.random.default_rng(args.seed)
    if args.init_model:
        model = GnnModel.load(args.init_model)
    else:
        model = GnnModel.fresh(n_dof, obstacle_size, cfg, rng)

    dataset = []
    skipped = 0
    for p in problems:
        samples = imitation.demonstrate(p)
        if samples is None:
            skipped += 1
            continue
        dataset.append(imitation.DatasetEntry(p, samples))
    if skipped:
        print(f"skipped {skipped} unsolvable problems", file=sys.stderr)

    run = imitation.TrainRun(seed=args.seed, epochs_bc=args.epochs_bc,
                             epochs_dagger=args.epochs_dagger, lr=args.lr)
    log_rows = []

    def log(epoch, loss):
        log_rows.append((epoch, loss))
        print(f"epoch {epoch}: loss {loss:.4f}")

    optimizer = imitation.train_bc(dataset, model, run, rng, log=log)
    for _ in range(args.dagger_rounds):
        added = imitation.dagger_round(model, dataset, rng, run, optimizer, log=log)
        print(f"dagger round aggregated {added} samples")

    model.save(args.out)
    if args.log_csv:
        with open(args.log_csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "mean_loss"])
            w.writerows(log_rows)
    print(f"saved model to {args.out}")
    return 0


def cmd_eval(args) -> int:
    problems = read_problems(args.problems)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    for a in algos:
        if a not in metrics.ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r}; have {metrics.ALGORITHMS}")
    model = None
    if any(a.startswith("gnn") for a in algos):
        if not args.model:
            raise UsageError("--model is required when evaluating gnn-te")
        try:
            model = GnnModel.load(args.model)
        except (ValueError, OSError) as e:
            raise DataError(f"cannot load model: {e}") from e

    tasks = [(pid, p, a) for pid, p in enumerate(problems) for a in algos]

    def work(task):
        pid, p, a = task
        return metrics.run_algorithm(p, pid, a, model=model, top_k=args.top_k)

    n_threads = _threads()
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            rows = list(pool.map(work, tasks))
    else:
        rows = [work(t) for t in tasks]

    metrics.write_rows(args.out, rows)
    summary = metrics.summarize(rows)
    summary_path = args.summary or (str(args.out) + ".summary.json")
    with open(summary_path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_render(args) -> int:
    problems = read_problems(args.problems)
    if not 0 <= args.index < len(problems):
        raise DataError(f"problem index {args.index} out of range")
    problem = problems[args.index]
    if args.path_json:
        with open(args.path_json) as f:
            path = TimedPath.from_json(f.read())
    else:
        path = sipp_search(problem, problem.world(), CollisionLedger())
        if path is None:
            raise DataError("no oracle path to render; supply --path-json")
    svg = render_svg(problem, path, panels=args.panels)
    with open(args.out, "w") as f:
        f.write(svg)
    print(f"wrote {args.out}")
    return 0


def cmd_oracle_check(args) -> int:
    env = _env_from_args(args)
    mismatches = 0
    for i in range(args.count):
        problem = _gen_one(env, args.seed, i, require_solvable=False)
        world = problem.world()
        sipp = sipp_search(problem, world, CollisionLedger())
        oracle = time_expanded_oracle(problem, world)
        ok = (sipp is None) == (oracle is None) and (
            sipp is None or abs(sipp.arrival - oracle.arrival) < 1e-9
        )
        if not ok:
            mismatches += 1
            s = "fail" if sipp is None else f"{sipp.arrival:.3f}"
            o = "fail" if oracle is None else f"{oracle.arrival:.3f}"
            print(f"problem {i}: MISMATCH sipp={s} oracle={o}")
    print(f"oracle check: {args.count - mismatches}/{args.count} match")
    return 0 if mismatches == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynoplan")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_env_flags(p):
        p.add_argument("--env", default="2Arms", help=f"preset: {sorted(PRESETS)}")
        p.add_argument("--vertices", type=int, default=None)
        p.add_argument("--knn", type=int, default=None)
        p.add_argument("--horizon", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen", help="generate a problem set (JSONL)")
    add_env_flags(p)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--require-solvable", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("mine-hard", help="keep problems where Dijkstra-H fails and SIPP succeeds")
    p.add_argument("--problems", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_mine_hard)

    p = sub.add_parser("train", help="imitation training (BC + DAgger)")
    p.add_argument("--problems", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs-bc", type=int, default=200)
    p.add_argument("--epochs-dagger", type=int, default=100)
    p.add_argument("--dagger-rounds", type=int, default=1)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--loops", type=int, default=3)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--ablate", default="", help=f"comma list of {ABLATION_FLAGS} to disable")
    p.add_argument("--init-model", default=None)
    p.add_argument("--log-csv", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="run algorithms, write metrics CSV + summary JSON")
    p.add_argument("--problems", required=True)
    p.add_argument("--algos", default="sipp,dijkstra-h")
    p.add_argument("--model", default=None)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--summary", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("render", help="render an SVG snapshot strip")
    p.add_argument("--problems", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--path-json", default=None)
    p.add_argument("--panels", type=int, default=6)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("oracle-check", help="SIPP vs time-expanded oracle equivalence")
    add_env_flags(p)
    p.add_argument("--count", type=int, default=20)
    p.set_defaults(fn=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
