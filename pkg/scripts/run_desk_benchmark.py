#!/usr/bin/env python3
"""Desk-scale end-to-end experiment: generate train/test problem sets, train
the GNN planner by imitation, and compare it against SIPP and Dijkstra-H.

All stages are driven through the `dynoplan` CLI so the script doubles as a
usage example. Results land in the chosen output directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from dynoplan.cli import main as dynoplan


def run(argv: list[str]) -> None:
    print("+ dynoplan " + " ".join(argv), flush=True)
    rc = dynoplan(argv)
    if rc != 0:
        sys.exit(rc)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--env", default="2Arms")
    ap.add_argument("--out-dir", default="benchmark_out")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--train-count", type=int, default=200)
    ap.add_argument("--test-count", type=int, default=100)
    ap.add_argument("--epochs-bc", type=int, default=60)
    ap.add_argument("--epochs-dagger", type=int, default=30)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_set = str(out / "train.jsonl")
    test_set = str(out / "test.jsonl")
    model = str(out / "model.bin")

    env_flags = ["--env", args.env]
    run(["gen", *env_flags, "--seed", str(args.seed), "--count", str(args.train_count),
         "--require-solvable", "--out", train_set])
    run(["gen", *env_flags, "--seed", str(args.seed + 1), "--count", str(args.test_count),
         "--out", test_set])
    run(["train", "--problems", train_set, "--seed", str(args.seed),
         "--epochs-bc", str(args.epochs_bc), "--epochs-dagger", str(args.epochs_dagger),
         "--log-csv", str(out / "train_log.csv"), "--out", model])
    run(["eval", "--problems", test_set, "--model", model,
         "--algos", "sipp,dijkstra-h,dijkstra-h-bt,gnn-te,gnn-te-bt",
         "--out", str(out / "metrics.csv"), "--summary", str(out / "summary.json")])
    run(["render", "--problems", test_set, "--index", "0", "--out", str(out / "example.svg")])
    print(f"done; see {out}/summary.json")


if __name__ == "__main__":
    os.environ.setdefault("DYNOPLAN_THREADS", "1")
    main()
