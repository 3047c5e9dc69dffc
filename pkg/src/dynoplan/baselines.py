"""Dijkstra-distance greedy baseline and its backtracking variant."""

from __future__ import annotations

import heapq
import math
from typing import Optional

import numpy as np

from .planners import greedy_rollout
from .roadmap import ProblemInstance, RoadmapGraph
from .sipp import TimedPath
from .world import CollisionLedger, DynamicWorld, travel_time


def goal_distances(graph: RoadmapGraph, speed: float, dt: float) -> np.ndarray:
    """Exact shortest travel time (seconds) from every vertex to the goal."""
    n = graph.n_vertices
    dist = np.full(n, math.inf)
    dist[graph.goal_index] = 0.0
    heap = [(0.0, graph.goal_index)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v] + 1e-15:
            continue
        for u in graph.adjacency[v]:
            nd = d + travel_time(graph.vertices[v], graph.vertices[u], speed, dt)
            if nd < dist[u] - 1e-15:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def dijkstra_h_plan(
    problem: ProblemInstance,
    world: DynamicWorld,
    ledger: CollisionLedger,
    with_backtracking: bool = False,
    top_k: int = 5,
) -> Optional[TimedPath]:
    """Greedy descent on the goal-distance field with collision gating.

    Candidate edges are tried in ascending (distance, vertex index) order;
    time bookkeeping and ledger semantics match the learned planner exactly.
    """
    dist = goal_distances(problem.graph, world.speed, world.grid.dt)
    order_cache: dict[int, list[int]] = {}

    def order(v: int, _t: float) -> list[int]:
        if v not in order_cache:
            order_cache[v] = sorted(problem.graph.adjacency[v],
                                    key=lambda u: (dist[u], u))
        return order_cache[v]

    result = greedy_rollout(
        problem, world, ledger, order,
        backtrack=with_backtracking, top_k=top_k,
    )
    return result.path
