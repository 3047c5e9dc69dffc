"""CLI and metrics-harness tests, driven through cli.main with argv lists."""

import csv
import json

import numpy as np
import pytest

from dynoplan import metrics
from dynoplan.cli import main
from dynoplan.envs import get_env
from dynoplan.render import render_svg
from dynoplan.roadmap import generate_problem, read_problems
from dynoplan.sipp import sipp_search
from dynoplan.world import CollisionLedger

TINY = ["--env", "2Arms", "--vertices", "12", "--knn", "4", "--horizon", "25"]


def _gen(tmp_path, name="probs.jsonl", count=4, seed=3, extra=()):
    out = tmp_path / name
    rc = main(["gen", *TINY, "--seed", str(seed), "--count", str(count),
               *extra, "--out", str(out)])
    assert rc == 0
    return out


def test_gen_writes_problems(tmp_path):
    out = _gen(tmp_path)
    problems = read_problems(out)
    assert len(problems) == 4
    assert all(p.graph.n_vertices == 12 for p in problems)


def test_gen_deterministic_bytes(tmp_path):
    a = _gen(tmp_path, "a.jsonl", seed=5)
    b = _gen(tmp_path, "b.jsonl", seed=5)
    assert a.read_bytes() == b.read_bytes()
    c = _gen(tmp_path, "c.jsonl", seed=6)
    assert a.read_bytes() != c.read_bytes()


def test_gen_require_solvable(tmp_path):
    out = _gen(tmp_path, "solv.jsonl", count=3, extra=("--require-solvable",))
    for p in read_problems(out):
        assert sipp_search(p, p.world(), CollisionLedger()) is not None


def test_usage_errors_return_1(tmp_path):
    assert main(["gen", "--env", "NoSuchEnv", "--out", str(tmp_path / "x")]) == 1
    assert main(["nonsense-command"]) == 1
    out = _gen(tmp_path)
    assert main(["eval", "--problems", str(out), "--algos", "bogus",
                 "--out", str(tmp_path / "m.csv")]) == 1
    assert main(["eval", "--problems", str(out), "--algos", "gnn-te",
                 "--out", str(tmp_path / "m.csv")]) == 1  # missing --model


def test_data_errors_return_2(tmp_path):
    missing = str(tmp_path / "missing.jsonl")
    assert main(["eval", "--problems", missing, "--out", str(tmp_path / "m.csv")]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    assert main(["eval", "--problems", str(bad), "--out", str(tmp_path / "m.csv")]) == 2
    out = _gen(tmp_path)
    assert main(["render", "--problems", str(out), "--index", "99",
                 "--out", str(tmp_path / "x.svg")]) == 2


def test_eval_csv_schema(tmp_path):
    probs = _gen(tmp_path, count=3)
    out = tmp_path / "metrics.csv"
    rc = main(["eval", "--problems", str(probs), "--algos", "sipp,dijkstra-h",
               "--out", str(out)])
    assert rc == 0
    with open(out) as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["problem_id", "algo", "success", "arrival_s",
                             "checks", "wall_ms", "seed"]
    assert len(rows) == 6  # 3 problems x 2 algorithms
    with open(str(out) + ".summary.json") as f:
        summary = json.load(f)
    assert set(summary["success_rate"]) == {"sipp", "dijkstra-h"}


def test_eval_rows_roundtrip(tmp_path):
    probs = _gen(tmp_path, count=2)
    out = tmp_path / "m.csv"
    assert main(["eval", "--problems", str(probs), "--algos", "sipp",
                 "--out", str(out)]) == 0
    rows = metrics.read_rows(out)
    assert all(r.algo == "sipp" for r in rows)
    for r in rows:
        assert (r.arrival_s is not None) == r.success
        assert r.checks > 0 and r.wall_ms >= 0


def test_train_then_eval_gnn(tmp_path):
    probs = _gen(tmp_path, "train.jsonl", count=4, extra=("--require-solvable",))
    model = tmp_path / "model.bin"
    log = tmp_path / "log.csv"
    rc = main(["train", "--problems", str(probs), "--seed", "0",
               "--epochs-bc", "2", "--epochs-dagger", "1", "--log-csv", str(log),
               "--out", str(model)])
    assert rc == 0
    assert model.exists()
    with open(log) as f:
        lines = list(csv.reader(f))
    assert lines[0] == ["epoch", "mean_loss"]
    assert len(lines) == 1 + 3  # 2 BC epochs + 1 DAgger epoch

    out = tmp_path / "m.csv"
    rc = main(["eval", "--problems", str(probs), "--model", str(model),
               "--algos", "sipp,gnn-te,gnn-te-bt", "--out", str(out)])
    assert rc == 0
    rows = metrics.read_rows(out)
    assert {r.algo for r in rows} == {"sipp", "gnn-te", "gnn-te-bt"}


def test_train_records_ablation(tmp_path):
    probs = _gen(tmp_path, "t.jsonl", count=2, extra=("--require-solvable",))
    model = tmp_path / "abl.bin"
    rc = main(["train", "--problems", str(probs), "--epochs-bc", "1",
               "--dagger-rounds", "0", "--ablate", "temporal_encoding",
               "--out", str(model)])
    assert rc == 0
    from dynoplan.model import GnnModel

    m = GnnModel.load(model)
    assert m.config.temporal_encoding is False
    # unknown ablation flag is a usage error
    rc = main(["train", "--problems", str(probs), "--epochs-bc", "1",
               "--ablate", "bogus_flag", "--out", str(model)])
    assert rc == 1


def test_oracle_check_command():
    rc = main(["oracle-check", *TINY, "--seed", "2", "--count", "3"])
    assert rc == 0


def test_mine_hard_structure(tmp_path):
    probs = _gen(tmp_path, count=12, seed=9)
    out = tmp_path / "hard.jsonl"
    assert main(["mine-hard", "--problems", str(probs), "--out", str(out)]) == 0
    from dynoplan.baselines import dijkstra_h_plan

    for p in read_problems(out):
        assert dijkstra_h_plan(p, p.world(), CollisionLedger()) is None
        assert sipp_search(p, p.world(), CollisionLedger()) is not None


def test_render_command_and_svg(tmp_path):
    probs = _gen(tmp_path, count=4, extra=("--require-solvable",))
    out = tmp_path / "snap.svg"
    rc = main(["render", "--problems", str(probs), "--index", "0",
               "--panels", "4", "--out", str(out)])
    assert rc == 0
    svg = out.read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count("t=") >= 4  # one time label per panel


def test_render_svg_deterministic(tmp_path):
    env = get_env("2Arms", vertex_count=12, k=4, horizon=25)
    p = generate_problem(env, np.random.default_rng(1), seed=1)
    path = sipp_search(p, p.world(), CollisionLedger())
    if path is None:
        pytest.skip("instance unsolvable at this seed")
    assert render_svg(p, path) == render_svg(p, path)


def test_summarize_metrics():
    rows = [
        metrics.MetricsRow(0, "sipp", True, 2.0, 100, 1.0, 0),
        metrics.MetricsRow(0, "dijkstra-h", True, 3.0, 10, 1.0, 0),
        metrics.MetricsRow(1, "sipp", True, 2.0, 200, 1.0, 1),
        metrics.MetricsRow(1, "dijkstra-h", False, None, 5, 1.0, 1),
    ]
    s = metrics.summarize(rows)
    assert s["success_rate"]["sipp"] == 1.0
    assert s["success_rate"]["dijkstra-h"] == 0.5
    assert s["path_time_ratio"]["dijkstra-h"] == pytest.approx(150.0)
    assert s["common_success_count"] == 1
    assert s["collision_checks_common"]["sipp"] == 100.0
