"""Acceptance suite. One PASS/FAIL line is printed per criterion even under
pytest's output capture (via capfd.disabled()).

Criteria 5-8 share a module-scoped desk-scale experiment: 200 training
problems, behavior cloning plus one DAgger round, then a 100-problem held-out
evaluation. That fixture dominates the suite's runtime (on the order of an
hour and a half on one laptop core).
"""

import time

import numpy as np
import pytest

from dynoplan import imitation, metrics, nn
from dynoplan.baselines import dijkstra_h_plan
from dynoplan.cli import main as cli_main
from dynoplan.envs import get_env
from dynoplan.imitation import DatasetEntry, TrainRun, dagger_round, demonstrate, train_bc
from dynoplan.model import (
    GnnModel,
    ModelConfig,
    build_graph_features,
    encode,
    obstacle_size_of,
    priorities_at,
)
from dynoplan.planners import plan, plan_with_backtracking
from dynoplan.roadmap import ProblemInstance, RoadmapGraph, generate_problem
from dynoplan.sipp import (
    compute_safe_intervals,
    sipp_search,
    time_expanded_oracle,
    validate_path,
)
from dynoplan.world import CollisionLedger, point_collision_query

TINY_ENV = get_env("2Arms", vertex_count=12, k=4, horizon=25)
DESK_SEED = 20260826


def _report(capfd, num, ok, detail):
    with capfd.disabled():
        print(f"[ACCEPTANCE {num}] {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    assert ok, f"criterion {num} failed: {detail}"


def _tiny(seed, env=TINY_ENV):
    return generate_problem(env, np.random.default_rng(seed), seed=seed)


# -- criterion 1: SIPP arrival equals the time-expanded oracle, exactly ------------


def test_criterion_1_sipp_optimality(capfd):
    t0 = time.perf_counter()
    mismatches = 0
    solved = 0
    for i in range(200):
        p = _tiny(1000 + i)
        sipp = sipp_search(p, p.world(), CollisionLedger())
        oracle = time_expanded_oracle(p, p.world())
        if (sipp is None) != (oracle is None):
            mismatches += 1
        elif sipp is not None:
            solved += 1
            if sipp.arrival != oracle.arrival:  # exact, zero tolerance
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 120.0
    _report(capfd, 1, ok,
            f"200 instances, {solved} solved, {mismatches} mismatches, {elapsed:.1f}s")


# -- criterion 2: safe intervals partition the free steps exactly ------------------


def test_criterion_2_safe_interval_partition(capfd):
    rng = np.random.default_rng(2)
    bad = 0
    pairs = 0
    problems = [_tiny(2000 + i) for i in range(10)]
    while pairs < 100:
        p = problems[pairs % len(problems)]
        world = p.world()
        v = int(rng.integers(p.graph.n_vertices))
        ivs = compute_safe_intervals(v, p.graph.vertices[v], world, CollisionLedger())
        covered = set()
        for iv in ivs:
            covered |= set(range(iv.start, iv.end + 1))
        free = {
            s for s in range(p.grid.horizon + 1)
            if not point_collision_query(p.graph.vertices[v], s * p.grid.dt,
                                         world, CollisionLedger())
        }
        if covered != free or any(b.start <= a.end + 1 for a, b in zip(ivs, ivs[1:])):
            bad += 1
        pairs += 1
    _report(capfd, 2, bad == 0, f"100 (vertex, world) pairs, {bad} partition mismatches")


# -- criterion 3: finite-difference gradient check ----------------------------------


def test_criterion_3_gradient_correctness(capfd):
    eps = 1e-5
    worst = 0.0
    checked = 0
    skipped = 0
    rng = np.random.default_rng(3)
    env = get_env("2Arms", vertex_count=10, k=3, horizon=15)
    graphs = 0
    seed = 0
    while graphs < 20:
        p = _tiny(3000 + seed, env=env)
        seed += 1
        samples = demonstrate(p)
        if not samples:
            continue
        graphs += 1
        entry = DatasetEntry(p, samples)
        model = GnnModel.fresh(p.ego_arm.n_dof, obstacle_size_of(p), ModelConfig(),
                               np.random.default_rng(100 + graphs))
        loss = imitation._problem_loss(entry, model)
        nn.backward(loss)
        named = model.params.named_tensors()
        for name, t in named.items():
            flat = t.value.reshape(-1)
            grad = (np.zeros_like(t.value) if t.grad is None else t.grad).reshape(-1)
            picks = rng.choice(flat.size, size=min(3, flat.size), replace=False)
            for j in picks:
                def loss_at(delta, j=j, flat=flat):
                    orig = flat[j]
                    flat[j] = orig + delta
                    with nn.no_grad():
                        out = float(imitation._problem_loss(entry, model).value[0, 0])
                    flat[j] = orig
                    return out

                fd = (loss_at(eps) - loss_at(-eps)) / (2 * eps)
                fd_half = (loss_at(eps / 2) - loss_at(-eps / 2)) / eps
                # Central differences are invalid across ReLU/max kinks; a
                # smooth point has matching estimates at eps and eps/2.
                if abs(fd - fd_half) > 1e-7 + 1e-3 * abs(fd):
                    skipped += 1
                    continue
                ad = grad[j]
                denom = max(abs(ad), abs(fd_half))
                if denom > 1e-6:
                    worst = max(worst, abs(ad - fd_half) / denom)
                checked += 1
    _report(capfd, 3, worst < 1e-4,
            f"20 graphs, {checked} sampled elements across every block "
            f"({skipped} skipped at kinks), max rel err {worst:.2e}")


# -- criterion 4: permutation invariance -------------------------------------------


def _relabel(p: ProblemInstance, perm: np.ndarray) -> ProblemInstance:
    n = p.graph.n_vertices
    inv = np.empty(n, dtype=int)
    inv[perm] = np.arange(n)
    adjacency = [[] for _ in range(n)]
    for old_v, nbrs in enumerate(p.graph.adjacency):
        adjacency[perm[old_v]] = sorted(int(perm[u]) for u in nbrs)
    graph = RoadmapGraph(vertices=p.graph.vertices[inv],
                         goal_index=int(perm[p.graph.goal_index]),
                         adjacency=adjacency)
    return ProblemInstance(
        ego_arm=p.ego_arm, obstacle_arms=p.obstacle_arms, statics=p.statics,
        graph=graph, trajectory=p.trajectory, grid=p.grid, speed=p.speed,
        seed=p.seed, env_name=p.env_name,
    )


def test_criterion_4_permutation_invariance(capfd):
    rng = np.random.default_rng(4)
    worst = 0.0
    env = get_env("2Arms", vertex_count=10, k=3, horizon=15)
    for trial in range(50):
        p = _tiny(4000 + trial, env=env)
        model = GnnModel.fresh(p.ego_arm.n_dof, obstacle_size_of(p), ModelConfig(),
                               np.random.default_rng(trial))
        perm = rng.permutation(p.graph.n_vertices)
        q = _relabel(p, perm)
        gf_p, gf_q = build_graph_features(p), build_graph_features(q)
        t = float(rng.uniform(0.0, p.grid.end_time))
        with nn.no_grad():
            _, y_p, o_p = encode(gf_p, model.config, model.params)
            _, y_q, o_q = encode(gf_q, model.config, model.params)
        for v in range(p.graph.n_vertices):
            pri_p = priorities_at(p, gf_p, model, y_p, o_p, v, t)
            pri_q = dict(
                (u, s)
                for s, u in priorities_at(q, gf_q, model, y_q, o_q, int(perm[v]), t)
            )
            for s, u in pri_p:
                worst = max(worst, abs(s - pri_q[int(perm[u])]))
    _report(capfd, 4, worst < 1e-5,
            f"50 graphs relabeled, max priority deviation {worst:.2e}")


# -- criteria 5-8: the desk-scale experiment ----------------------------------------


@pytest.fixture(scope="module")
def desk():
    t0 = time.perf_counter()
    env = get_env("2Arms")  # 300 vertices, k=50, T=50
    rng = np.random.default_rng(DESK_SEED)

    train_problems = [
        generate_problem(env, np.random.default_rng(DESK_SEED + i), seed=DESK_SEED + i)
        for i in range(200)
    ]
    test_problems = [
        generate_problem(env, np.random.default_rng(DESK_SEED + 10_000 + i),
                         seed=DESK_SEED + 10_000 + i)
        for i in range(100)
    ]

    dataset = []
    for p in train_problems:
        samples = demonstrate(p)
        if samples:
            dataset.append(DatasetEntry(p, samples))

    model = GnnModel.fresh(env.ego_arm.n_dof,
                           obstacle_size_of(train_problems[0]),
                           ModelConfig(), np.random.default_rng(DESK_SEED))
    run = TrainRun(seed=DESK_SEED, epochs_bc=60, epochs_dagger=30)
    opt = train_bc(dataset, model, run, rng)
    dagger_round(model, dataset, rng, run, opt)

    rows = []
    for pid, p in enumerate(test_problems):
        for algo in ("sipp", "dijkstra-h", "gnn-te"):
            rows.append(metrics.run_algorithm(p, pid, algo, model=model))
    elapsed = time.perf_counter() - t0
    return {
        "model": model,
        "test_problems": test_problems,
        "rows": rows,
        "elapsed": elapsed,
        "n_demos": len(dataset),
    }


def test_criterion_5_learning_at_desk_scale(desk, capfd):
    summary = metrics.summarize(desk["rows"])
    sr = summary["success_rate"]
    common = summary["collision_checks_common"]
    ratio = summary["path_time_ratio"].get("gnn-te", float("inf"))
    check_frac = (
        common["gnn-te"] / common["sipp"] if common.get("sipp") else float("inf")
    )
    ok = (
        sr["gnn-te"] >= sr["dijkstra-h"]
        and check_frac <= 0.10
        and ratio <= 200.0
        and desk["elapsed"] < 7200.0
    )
    _report(
        capfd, 5, ok,
        f"success gnn-te {sr['gnn-te']:.2f} vs dijkstra-h {sr['dijkstra-h']:.2f} "
        f"(sipp {sr['sipp']:.2f}); checks gnn/sipp {100 * check_frac:.1f}% on "
        f"{summary['common_success_count']} common; ratio {ratio:.1f}%; "
        f"{desk['n_demos']} demos; {desk['elapsed']:.0f}s",
    )


def test_criterion_6_hard_set(capfd, desk):
    model = desk["model"]
    hard = []
    for p in desk["test_problems"]:
        if dijkstra_h_plan(p, p.world(), CollisionLedger()) is not None:
            continue
        if sipp_search(p, p.world(), CollisionLedger()) is None:
            continue
        hard.append(p)
    # structure holds by construction; re-verify anyway
    structure_ok = all(
        dijkstra_h_plan(p, p.world(), CollisionLedger()) is None
        and sipp_search(p, p.world(), CollisionLedger()) is not None
        for p in hard
    )
    bt_wins = sum(
        1 for p in hard
        if plan_with_backtracking(p, model, p.world(), CollisionLedger(), top_k=5)
        is not None
    )
    ok = structure_ok and len(hard) > 0 and bt_wins > 0
    rate = 100.0 * bt_wins / len(hard) if hard else 0.0
    _report(capfd, 6, ok,
            f"{len(hard)} hard instances mined; gnn-te backtracking solves "
            f"{bt_wins} ({rate:.1f}%)")


def test_criterion_7_backtracking_conservative(capfd, desk):
    model = desk["model"]
    compared = 0
    violations = 0
    for p in desk["test_problems"]:
        l1 = CollisionLedger()
        p1 = plan(p, model, p.world(), l1)
        if p1 is None:
            continue
        l2 = CollisionLedger()
        p2 = plan_with_backtracking(p, model, p.world(), l2)
        compared += 1
        if p2 is None or p2.steps != p1.steps or l2.checks != l1.checks:
            violations += 1
    _report(capfd, 7, compared > 0 and violations == 0,
            f"{compared} greedy successes, {violations} path/ledger deviations")


def test_criterion_8_ratio_lower_bound(capfd, desk):
    sipp_arrival = {
        r.problem_id: r.arrival_s for r in desk["rows"]
        if r.algo == "sipp" and r.success
    }
    checked = 0
    violations = 0
    for r in desk["rows"]:
        if r.algo == "sipp" or not r.success:
            continue
        if r.problem_id not in sipp_arrival:
            continue
        checked += 1
        if r.arrival_s < sipp_arrival[r.problem_id] - 1e-9:
            violations += 1
    _report(capfd, 8, checked > 0 and violations == 0,
            f"{checked} non-oracle successes, {violations} beat the optimum")


# -- criterion 9: byte-identical generation and training -----------------------------


def test_criterion_9_determinism(capfd, tmp_path):
    tiny = ["--env", "2Arms", "--vertices", "12", "--knn", "4", "--horizon", "25"]
    g1, g2 = tmp_path / "g1.jsonl", tmp_path / "g2.jsonl"
    for out in (g1, g2):
        assert cli_main(["gen", *tiny, "--seed", "9", "--count", "4",
                         "--require-solvable", "--out", str(out)]) == 0
    gen_same = g1.read_bytes() == g2.read_bytes()

    m1, m2 = tmp_path / "m1.bin", tmp_path / "m2.bin"
    l1, l2 = tmp_path / "l1.csv", tmp_path / "l2.csv"
    for model, log in ((m1, l1), (m2, l2)):
        assert cli_main(["train", "--problems", str(g1), "--seed", "5",
                         "--epochs-bc", "2", "--epochs-dagger", "1",
                         "--dagger-rounds", "1", "--log-csv", str(log),
                         "--out", str(model)]) == 0
    train_same = m1.read_bytes() == m2.read_bytes() and l1.read_bytes() == l2.read_bytes()
    _report(capfd, 9, gen_same and train_same,
            f"gen byte-identical: {gen_same}; train byte-identical: {train_same}")
