"""Safe-interval construction and SIPP search, plus an independent
time-expanded brute-force planner used only for verification.

All times are multiples of the grid step: travel times round up to the grid
and departures are scanned on grid steps, so SIPP arrivals can be compared
with the time-expanded oracle for exact equality.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .roadmap import ProblemInstance
from .world import (
    CollisionLedger,
    DynamicWorld,
    edge_motion_free,
    point_collision_query,
    travel_time,
)

ORACLE_STATE_GUARD = 10**6


@dataclass(frozen=True)
class SafeInterval:
    vertex: int
    start: int  # inclusive grid steps
    end: int


@dataclass
class TimedPath:
    """Ordered (vertex, arrival seconds) pairs; waits are implicit."""

    steps: list[tuple[int, float]]

    @property
    def arrival(self) -> float:
        return self.steps[-1][1]

    def to_json(self) -> str:
        return json.dumps([{"v": v, "t": t} for v, t in self.steps])

    @classmethod
    def from_json(cls, text: str) -> "TimedPath":
        return cls([(int(e["v"]), float(e["t"])) for e in json.loads(text)])


def compute_safe_intervals(
    vertex: int, config: Sequence[float], world: DynamicWorld, ledger: CollisionLedger
) -> list[SafeInterval]:
    """Query every grid step and merge maximal runs of collision-free steps."""
    T = world.grid.horizon
    dt = world.grid.dt
    intervals: list[SafeInterval] = []
    run_start: Optional[int] = None
    for step in range(T + 1):
        free = not point_collision_query(config, step * dt, world, ledger)
        if free and run_start is None:
            run_start = step
        elif not free and run_start is not None:
            intervals.append(SafeInterval(vertex, run_start, step - 1))
            run_start = None
    if run_start is not None:
        intervals.append(SafeInterval(vertex, run_start, T))
    return intervals


@dataclass(order=True)
class _QueueEntry:
    f: float
    arrival: float
    vertex: int
    interval: int


def sipp_search(
    problem: ProblemInstance,
    world: DynamicWorld,
    ledger: CollisionLedger,
    start_vertex: Optional[int] = None,
    start_time: float = 0.0,
) -> Optional[TimedPath]:
    """Minimal-arrival-time search over (vertex, safe interval) states.

    Waiting inside a safe interval is free; departures are scanned on the
    grid; the heuristic is straight-line configuration distance over speed.
    Returns None when the open list exhausts.
    """
    graph = problem.graph
    verts = graph.vertices
    goal = problem.goal
    start = problem.start if start_vertex is None else start_vertex
    dt = world.grid.dt
    speed = world.speed

    intervals: dict[int, list[SafeInterval]] = {}

    def get_intervals(v: int) -> list[SafeInterval]:
        if v not in intervals:
            intervals[v] = compute_safe_intervals(v, verts[v], world, ledger)
        return intervals[v]

    def heuristic(v: int) -> float:
        return float(np.linalg.norm(verts[v] - verts[goal])) / speed

    start_step = int(round(start_time / dt))
    start_iv = None
    for idx, iv in enumerate(get_intervals(start)):
        if iv.start <= start_step <= iv.end:
            start_iv = idx
            break
    if start_iv is None:
        return None

    best: dict[tuple[int, int], float] = {(start, start_iv): start_time}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    heap = [_QueueEntry(start_time + heuristic(start), start_time, start, start_iv)]
    closed: set[tuple[int, int]] = set()

    while heap:
        entry = heapq.heappop(heap)
        v, iv_idx = entry.vertex, entry.interval
        key = (v, iv_idx)
        if key in closed:
            continue
        closed.add(key)
        g = best[key]
        if v == goal:
            return _reconstruct(parent, best, key)
        interval = get_intervals(v)[iv_idx]
        g_step = int(round(g / dt))
        for u in graph.adjacency[v]:
            delta = travel_time(verts[v], verts[u], speed, dt)
            d_steps = int(round(delta / dt))
            for u_idx, u_iv in enumerate(get_intervals(u)):
                ukey = (u, u_idx)
                if ukey in closed:
                    continue
                lo = max(g_step, u_iv.start - d_steps)
                hi = min(interval.end, u_iv.end - d_steps)
                arrived = None
                for s in range(lo, hi + 1):
                    if edge_motion_free(verts[v], verts[u], s * dt, world, ledger):
                        arrived = (s + d_steps) * dt
                        break
                if arrived is None:
                    continue
                if arrived < best.get(ukey, math.inf) - 1e-12:
                    best[ukey] = arrived
                    parent[ukey] = key
                    heapq.heappush(
                        heap, _QueueEntry(arrived + heuristic(u), arrived, u, u_idx)
                    )
    return None


def _reconstruct(parent, best, key) -> TimedPath:
    steps = [(key[0], best[key])]
    while key in parent:
        key = parent[key]
        steps.append((key[0], best[key]))
    return TimedPath(steps[::-1])


def time_expanded_oracle(
    problem: ProblemInstance, world: DynamicWorld, start_vertex: Optional[int] = None
) -> Optional[TimedPath]:
    """Dijkstra over (vertex, step) with unit wait edges; verification only."""
    graph = problem.graph
    verts = graph.vertices
    T = world.grid.horizon
    dt = world.grid.dt
    n = graph.n_vertices
    if n * T > ORACLE_STATE_GUARD:
        raise ValueError(f"oracle guard exceeded: {n} vertices x {T} steps")
    start = problem.start if start_vertex is None else start_vertex
    goal = problem.goal
    scratch = CollisionLedger()

    safe = np.zeros((n, T + 1), dtype=bool)
    for v in range(n):
        for step in range(T + 1):
            safe[v, step] = not point_collision_query(verts[v], step * dt, world, scratch)

    edge_free_cache: dict[tuple[int, int, int], bool] = {}

    def edge_free(v: int, u: int, step: int) -> bool:
        key = (v, u, step)
        if key not in edge_free_cache:
            edge_free_cache[key] = edge_motion_free(
                verts[v], verts[u], step * dt, world, scratch
            )
        return edge_free_cache[key]

    d_steps = {}
    for v in range(n):
        for u in graph.adjacency[v]:
            d_steps[(v, u)] = int(round(travel_time(verts[v], verts[u], world.speed, dt) / dt))

    reached = [[False] * (T + 1) for _ in range(n)]
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    if not safe[start, 0]:
        return None
    reached[start][0] = True
    for t in range(T + 1):
        # settle zero-duration moves (duplicate-coordinate vertices) at this step
        frontier = [v for v in range(n) if reached[v][t]]
        while frontier:
            v = frontier.pop()
            for u in graph.adjacency[v]:
                if d_steps[(v, u)] == 0 and not reached[u][t] and edge_free(v, u, t):
                    reached[u][t] = True
                    parent[(u, t)] = (v, t)
                    frontier.append(u)
        if reached[goal][t]:
            return _oracle_path(parent, goal, t, dt, start)
        if t == T:
            break
        for v in range(n):
            if not reached[v][t]:
                continue
            if safe[v, t] and safe[v, t + 1] and not reached[v][t + 1]:
                reached[v][t + 1] = True
                parent[(v, t + 1)] = (v, t)
            for u in graph.adjacency[v]:
                d = d_steps[(v, u)]
                if d == 0:
                    continue
                ta = t + d
                if ta <= T and not reached[u][ta] and edge_free(v, u, t):
                    reached[u][ta] = True
                    parent[(u, ta)] = (v, t)
    return None


def _oracle_path(parent, goal: int, t: int, dt: float, start: int) -> TimedPath:
    chain = [(goal, t)]
    key = (goal, t)
    while key in parent:
        key = parent[key]
        chain.append(key)
    chain.reverse()
    # Collapse waits: keep the first arrival at each vertex visit.
    steps: list[tuple[int, float]] = []
    for v, step in chain:
        if steps and steps[-1][0] == v:
            continue
        steps.append((v, step * dt))
    return TimedPath(steps)


def validate_path(
    path: Optional[TimedPath],
    problem: ProblemInstance,
    world: DynamicWorld,
    start_vertex: Optional[int] = None,
    start_time: float = 0.0,
) -> bool:
    """Independent checker: adjacency, timing, waits, sweeps, goal, horizon."""
    if path is None or not path.steps:
        return False
    graph = problem.graph
    verts = graph.vertices
    dt = world.grid.dt
    scratch = CollisionLedger()
    start = problem.start if start_vertex is None else start_vertex

    v0, t0 = path.steps[0]
    if v0 != start or abs(t0 - start_time) > 1e-9:
        return False
    if path.steps[-1][0] != problem.goal:
        return False
    if path.arrival > world.grid.end_time + 1e-9:
        return False
    for (v, tv), (u, tu) in zip(path.steps, path.steps[1:]):
        if tu <= tv + 1e-12:
            return False
        if u not in graph.adjacency[v]:
            return False
        delta = travel_time(verts[v], verts[u], world.speed, dt)
        depart = tu - delta
        if depart < tv - 1e-9:
            return False
        # waiting at v must keep it free at every grid step of the wait
        s0 = int(round(tv / dt))
        s1 = int(round(depart / dt))
        for s in range(s0, s1 + 1):
            if point_collision_query(verts[v], s * dt, world, scratch):
                return False
        if not edge_motion_free(verts[v], verts[u], depart, world, scratch):
            return False
    return True
