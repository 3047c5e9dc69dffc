"""Greedy edge-priority rollout shared by the learned planner and the
Dijkstra-distance baseline, with an optional depth-first backtracking mode.

The backtracking search explores candidates in exactly the greedy order, so
whenever the plain rollout succeeds both return the identical path and spend
the identical number of collision checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import nn
from .model import GnnModel, GraphFeatures, build_graph_features, priorities_at
from .roadmap import ProblemInstance
from .sipp import TimedPath
from .world import CollisionLedger, DynamicWorld, edge_motion_free, travel_time

# candidate_order(vertex, time) -> neighbors in descending preference
CandidateOrder = Callable[[int, float], list[int]]


@dataclass
class RolloutResult:
    path: Optional[TimedPath]
    trace: list[tuple[int, float]]  # every (vertex, arrival) the rollout visited


def greedy_rollout(
    problem: ProblemInstance,
    world: DynamicWorld,
    ledger: CollisionLedger,
    order_fn: CandidateOrder,
    backtrack: bool = False,
    top_k: int = 5,
    goal_delta: float = 0.0,
) -> RolloutResult:
    """Follow the ordered candidates with collision gating; no waiting.

    Without backtracking the search dies at the first vertex whose candidate
    list exhausts. With backtracking it pops back and tries the next-best
    alternative, bounded to top_k collision-free expansions per node, with a
    visited (vertex, arrival-step) set to prevent re-expansion.
    """
    graph = problem.graph
    verts = graph.vertices
    goal = problem.goal
    dt = world.grid.dt
    horizon_t = world.grid.end_time
    trace: list[tuple[int, float]] = [(problem.start, 0.0)]

    def at_goal(v: int) -> bool:
        if v == goal:
            return True
        return float(np.sum((verts[v] - verts[goal]) ** 2)) <= goal_delta

    if at_goal(problem.start):
        return RolloutResult(TimedPath([(problem.start, 0.0)]), trace)

    @dataclass
    class _Node:
        vertex: int
        t: float
        candidates: list[int]
        next_idx: int = 0
        expanded: int = 0

    def make_node(v: int, t: float) -> _Node:
        return _Node(v, t, order_fn(v, t))

    start_node = make_node(problem.start, 0.0)
    stack = [start_node]
    path: list[tuple[int, float]] = [(problem.start, 0.0)]
    visited: set[tuple[int, int]] = {(problem.start, 0)}

    while stack:
        node = stack[-1]
        advanced = False
        while node.next_idx < len(node.candidates):
            if backtrack and node.expanded >= top_k:
                break
            u = node.candidates[node.next_idx]
            node.next_idx += 1
            t2 = node.t + travel_time(verts[node.vertex], verts[u], world.speed, dt)
            step2 = int(round(t2 / dt))
            if backtrack and (u, step2) in visited:
                continue
            if not edge_motion_free(verts[node.vertex], verts[u], node.t, world, ledger):
                continue
            if t2 > horizon_t + 1e-9:
                if backtrack:
                    continue  # dead branch; alternatives may be shorter
                trace.append((u, t2))
                return RolloutResult(None, trace)
            node.expanded += 1
            path.append((u, t2))
            trace.append((u, t2))
            if at_goal(u):
                return RolloutResult(TimedPath(list(path)), trace)
            if backtrack:
                visited.add((u, step2))
            stack.append(make_node(u, t2))
            advanced = True
            break
        if advanced:
            continue
        if not backtrack:
            return RolloutResult(None, trace)
        stack.pop()
        if path:
            path.pop()
    return RolloutResult(None, trace)


# -- learned planner ---------------------------------------------------------------


def _gnn_order_fn(
    problem: ProblemInstance, gf: GraphFeatures, model: GnnModel, y, obs
) -> CandidateOrder:
    def order(v: int, t: float) -> list[int]:
        scored = priorities_at(problem, gf, model, y, obs, v, t)
        scored.sort(key=lambda su: (-su[0], su[1]))
        return [u for _, u in scored]

    return order


def plan(
    problem: ProblemInstance,
    model: GnnModel,
    world: DynamicWorld,
    ledger: CollisionLedger,
    gf: Optional[GraphFeatures] = None,
    return_trace: bool = False,
):
    """Greedy argmax-priority rollout; returns a TimedPath or None."""
    if gf is None:
        gf = build_graph_features(problem)
    with nn.no_grad():
        _, y, obs = _encode_for_inference(gf, model)
        result = greedy_rollout(
            problem, world, ledger,
            _gnn_order_fn(problem, gf, model, y, obs),
            backtrack=False, goal_delta=model.config.goal_delta,
        )
    return result if return_trace else result.path


def plan_with_backtracking(
    problem: ProblemInstance,
    model: GnnModel,
    world: DynamicWorld,
    ledger: CollisionLedger,
    top_k: Optional[int] = None,
    gf: Optional[GraphFeatures] = None,
):
    if gf is None:
        gf = build_graph_features(problem)
    k = model.config.top_k if top_k is None else top_k
    if k < 1:
        raise ValueError("top_k must be >= 1")
    with nn.no_grad():
        _, y, obs = _encode_for_inference(gf, model)
        result = greedy_rollout(
            problem, world, ledger,
            _gnn_order_fn(problem, gf, model, y, obs),
            backtrack=True, top_k=k, goal_delta=model.config.goal_delta,
        )
    return result.path


def _encode_for_inference(gf: GraphFeatures, model: GnnModel):
    from .model import encode

    return encode(gf, model.config, model.params)
