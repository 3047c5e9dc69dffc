"""Roadmap sampling, k-NN graph construction, and problem instances.

Vertex 0 is the start and vertex 1 the goal by convention; both are sampled
fresh per problem and treated as ordinary graph vertices by the planners.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .envs import EnvSpec
from .geometry import PlanarArm, RectObstacle, fk_points, pose_hits_rect, poses_collide
from .world import DynamicWorld, ObstacleTrajectory, TimeGrid, generate_trajectory

PROBLEM_SCHEMA = "dynoplan-problem/1"

START_INDEX = 0
GOAL_INDEX = 1


class SamplingBudgetExhausted(RuntimeError):
    """Rejection sampling gave up; the environment is over-constrained."""


@dataclass
class RoadmapGraph:
    vertices: np.ndarray  # (|V|, n) joint configurations
    goal_index: int
    adjacency: list[list[int]]  # sorted neighbor lists, symmetric, no self-loops

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def goal_flag(self) -> np.ndarray:
        flag = np.zeros(self.n_vertices)
        flag[self.goal_index] = 1.0
        return flag

    def edge_list(self) -> list[tuple[int, int]]:
        """Canonical undirected edges (i < j), sorted."""
        return [(i, j) for i in range(self.n_vertices) for j in self.adjacency[i] if i < j]


def sample_free_configs(
    arm: PlanarArm,
    statics: Sequence[RectObstacle],
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Uniform configs over [-pi, pi)^n that are collision-free wrt statics."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out = np.empty((count, arm.n_dof))
    rejections = 0
    budget = 1000 * count
    got = 0
    while got < count:
        q = rng.uniform(-math.pi, math.pi, arm.n_dof)
        if any(pose_hits_rect(fk_points(arm, q), r) for r in statics):
            rejections += 1
            if rejections > budget:
                raise SamplingBudgetExhausted(
                    f"{rejections} rejections for {count} samples"
                )
            continue
        out[got] = q
        got += 1
    return out


def build_knn_graph(vertices: np.ndarray, k: int, goal_index: int = GOAL_INDEX) -> RoadmapGraph:
    """Symmetrized-union k-NN graph; distance ties break by lower vertex index."""
    n = vertices.shape[0]
    if k < 1 or n < 2:
        raise ValueError("need k >= 1 and at least 2 vertices")
    d2 = np.sum((vertices[:, None, :] - vertices[None, :, :]) ** 2, axis=-1)
    adjacency: list[set[int]] = [set() for _ in range(n)]
    idx = np.arange(n)
    for i in range(n):
        order = np.lexsort((idx, d2[i]))  # distance first, index as tie-break
        picked = 0
        for j in order:
            if j == i:
                continue
            adjacency[i].add(int(j))
            adjacency[int(j)].add(i)
            picked += 1
            if picked == k:
                break
    return RoadmapGraph(
        vertices=np.asarray(vertices, dtype=np.float64),
        goal_index=goal_index,
        adjacency=[sorted(s) for s in adjacency],
    )


@dataclass
class ProblemInstance:
    ego_arm: PlanarArm
    obstacle_arms: list[PlanarArm]
    statics: list[RectObstacle]
    graph: RoadmapGraph
    trajectory: ObstacleTrajectory
    grid: TimeGrid
    speed: float
    seed: int
    env_name: str = ""

    @property
    def start(self) -> int:
        return START_INDEX

    @property
    def goal(self) -> int:
        return self.graph.goal_index

    def world(self) -> DynamicWorld:
        return DynamicWorld(
            ego_arm=self.ego_arm,
            statics=self.statics,
            trajectory=self.trajectory,
            grid=self.grid,
            speed=self.speed,
        )

    def goal_tail_start(self) -> int:
        """First step from which the goal must stay collision-free."""
        return self.grid.horizon // 2


def _config_free_at(
    ego: PlanarArm,
    q: np.ndarray,
    statics: Sequence[RectObstacle],
    traj: ObstacleTrajectory,
    steps: Iterable[int],
) -> bool:
    pose = fk_points(ego, q)
    if any(pose_hits_rect(pose, r) for r in statics):
        return False
    for step in steps:
        t = step * traj.grid.dt
        for i, arm in enumerate(traj.arms):
            if poses_collide(pose, fk_points(arm, traj.config_at(i, t))):
                return False
    return True


def generate_problem(env: EnvSpec, rng: np.random.Generator, seed: int = 0) -> ProblemInstance:
    """One random problem: trajectory, free samples, start/goal, k-NN graph."""
    grid = TimeGrid(dt=env.dt, horizon=env.horizon)
    traj = generate_trajectory(env.obstacle_arms, env.statics, grid, env.speed, rng)
    tail = grid.horizon // 2

    budget = 1000
    for _ in range(budget):
        start = sample_free_configs(env.ego_arm, env.statics, 1, rng)[0]
        if _config_free_at(env.ego_arm, start, env.statics, traj, [0]):
            break
    else:
        raise SamplingBudgetExhausted("no feasible start configuration")
    for _ in range(budget):
        goal = sample_free_configs(env.ego_arm, env.statics, 1, rng)[0]
        if _config_free_at(env.ego_arm, goal, env.statics, traj, range(tail, grid.horizon + 1)):
            break
    else:
        raise SamplingBudgetExhausted("no feasible goal configuration")

    interior = sample_free_configs(env.ego_arm, env.statics, env.vertex_count - 2, rng)
    vertices = np.vstack([start[None, :], goal[None, :], interior])
    graph = build_knn_graph(vertices, env.k)
    return ProblemInstance(
        ego_arm=env.ego_arm,
        obstacle_arms=list(env.obstacle_arms),
        statics=list(env.statics),
        graph=graph,
        trajectory=traj,
        grid=grid,
        speed=env.speed,
        seed=seed,
        env_name=env.name,
    )


# ---------------------------------------------------------------------------
# JSONL serialization (schema "dynoplan-problem/1"); floats are emitted with
# %.17g so a round-trip restores every field bit-for-bit.


def _fmt(x: float) -> float:
    return float(f"{x:.17g}")


def _arm_obj(arm: PlanarArm) -> dict:
    return {
        "base": [_fmt(arm.base[0]), _fmt(arm.base[1])],
        "link_lengths": [_fmt(l) for l in arm.link_lengths],
    }


def _arm_from(obj: dict) -> PlanarArm:
    return PlanarArm(base=tuple(obj["base"]), link_lengths=tuple(obj["link_lengths"]))


def problem_to_obj(p: ProblemInstance) -> dict:
    return {
        "schema": PROBLEM_SCHEMA,
        "seed": p.seed,
        "env": p.env_name,
        "speed": _fmt(p.speed),
        "time_grid": {"dt": _fmt(p.grid.dt), "T": p.grid.horizon},
        "ego_arm": _arm_obj(p.ego_arm),
        "obstacle_arms": [_arm_obj(a) for a in p.obstacle_arms],
        "statics": [
            {
                "center": [_fmt(r.center[0]), _fmt(r.center[1])],
                "half_extents": [_fmt(r.half_extents[0]), _fmt(r.half_extents[1])],
            }
            for r in p.statics
        ],
        "graph": {
            "vertices": [[_fmt(x) for x in row] for row in p.graph.vertices],
            "goal_index": p.graph.goal_index,
            "edges": [[i, j] for i, j in p.graph.edge_list()],
        },
        "trajectory": [[[_fmt(x) for x in q] for q in c] for c in p.trajectory.configs],
    }


def problem_from_obj(obj: dict) -> ProblemInstance:
    if obj.get("schema") != PROBLEM_SCHEMA:
        raise ValueError(f"unsupported problem schema {obj.get('schema')!r}")
    grid = TimeGrid(dt=obj["time_grid"]["dt"], horizon=obj["time_grid"]["T"])
    ego = _arm_from(obj["ego_arm"])
    obstacle_arms = [_arm_from(a) for a in obj["obstacle_arms"]]
    statics = [
        RectObstacle(center=tuple(r["center"]), half_extents=tuple(r["half_extents"]))
        for r in obj["statics"]
    ]
    vertices = np.asarray(obj["graph"]["vertices"], dtype=np.float64)
    n = vertices.shape[0]
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for i, j in obj["graph"]["edges"]:
        adjacency[i].append(j)
        adjacency[j].append(i)
    graph = RoadmapGraph(
        vertices=vertices,
        goal_index=obj["graph"]["goal_index"],
        adjacency=[sorted(a) for a in adjacency],
    )
    traj = ObstacleTrajectory(
        obstacle_arms, [np.asarray(c, dtype=np.float64) for c in obj["trajectory"]], grid
    )
    return ProblemInstance(
        ego_arm=ego,
        obstacle_arms=obstacle_arms,
        statics=statics,
        graph=graph,
        trajectory=traj,
        grid=grid,
        speed=obj["speed"],
        seed=obj["seed"],
        env_name=obj.get("env", ""),
    )


def write_problems(path, problems: Iterable[ProblemInstance]) -> None:
    with open(path, "w") as f:
        for p in problems:
            f.write(json.dumps(problem_to_obj(p), separators=(",", ":")))
            f.write("\n")


def read_problems(path) -> list[ProblemInstance]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(problem_from_obj(json.loads(line)))
    return out
