"""The timed environment: obstacle trajectories, collision queries with
authoritative counting, travel times, and edge-motion validation.

The collision ledger counts point-in-time world queries; it is the headline
cost metric, so every planner query goes through `point_collision_query` and
nothing else increments the counter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import PlanarArm, RectObstacle, fk_points, pose_hits_rect, poses_collide

# Max-joint displacement between successive interpolation samples of an edge.
EDGE_RESOLUTION_RAD = 0.05


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    horizon: int  # number of steps T; trajectory covers steps 0..T

    def __post_init__(self):
        if self.dt <= 0 or self.horizon < 1:
            raise ValueError("need dt > 0 and horizon >= 1")

    @property
    def end_time(self) -> float:
        return self.horizon * self.dt


class CollisionLedger:
    """Monotone counter of point collision queries."""

    __slots__ = ("checks",)

    def __init__(self):
        self.checks = 0

    def merge(self, other: "CollisionLedger") -> None:
        self.checks += other.checks


class ObstacleTrajectory:
    """Per-arm joint configurations at grid steps 0..T.

    Continuous-time poses interpolate linearly in joint space; beyond the
    horizon the final configuration is held.
    """

    def __init__(self, arms: Sequence[PlanarArm], configs: Sequence[np.ndarray], grid: TimeGrid):
        self.arms = list(arms)
        self.configs = [np.asarray(c, dtype=np.float64) for c in configs]
        self.grid = grid
        for arm, c in zip(self.arms, self.configs):
            if c.shape != (grid.horizon + 1, arm.n_dof):
                raise ValueError("trajectory must have T+1 configs per arm")

    def config_at(self, arm_idx: int, t: float) -> np.ndarray:
        c = self.configs[arm_idx]
        s = t / self.grid.dt
        if s >= self.grid.horizon:
            return c[-1]
        if s <= 0:
            return c[0]
        lo = int(s)
        frac = s - lo
        if frac == 0.0:
            return c[lo]
        return c[lo] * (1.0 - frac) + c[lo + 1] * frac

    def shifted(self, offset_steps: int) -> "ObstacleTrajectory":
        """View of this trajectory starting `offset_steps` later, clamped at T."""
        idx = np.minimum(np.arange(self.grid.horizon + 1) + offset_steps, self.grid.horizon)
        return ObstacleTrajectory(self.arms, [c[idx] for c in self.configs], self.grid)


def obstacle_pose_at(traj: ObstacleTrajectory, t: float) -> list[list[tuple[float, float]]]:
    """Workspace joint positions of every obstacle arm at continuous time t."""
    return [fk_points(arm, traj.config_at(i, t)) for i, arm in enumerate(traj.arms)]


def workspace_obstacle_feature(traj: ObstacleTrajectory, step: int) -> np.ndarray:
    """Flat vector of all obstacle joint positions at a grid step."""
    if step < 0 or step > traj.grid.horizon:
        raise ValueError(f"step {step} outside [0, {traj.grid.horizon}]")
    parts = []
    for i, arm in enumerate(traj.arms):
        for x, y in fk_points(arm, traj.configs[i][step]):
            parts.append(x)
            parts.append(y)
    return np.asarray(parts, dtype=np.float64)


@dataclass
class DynamicWorld:
    """Immutable collision environment shared by all planners."""

    ego_arm: PlanarArm
    statics: list[RectObstacle]
    trajectory: ObstacleTrajectory
    grid: TimeGrid
    speed: float  # joint-space speed of the ego arm, rad/s

    def __post_init__(self):
        if self.speed <= 0:
            raise ValueError("speed must be positive")


def point_collision_query(
    ego_q: Sequence[float], t: float, world: DynamicWorld, ledger: CollisionLedger
) -> bool:
    """One counted (config, time) query: ego vs moving arms and statics."""
    ledger.checks += 1
    pose = fk_points(world.ego_arm, ego_q)
    traj = world.trajectory
    for i, arm in enumerate(traj.arms):
        if poses_collide(pose, fk_points(arm, traj.config_at(i, t))):
            return True
    for rect in world.statics:
        if pose_hits_rect(pose, rect):
            return True
    return False


def travel_time(v_i: Sequence[float], v_j: Sequence[float], speed: float, dt: float) -> float:
    """Euclidean config distance over speed, rounded up to the grid."""
    if speed <= 0:
        raise ValueError("speed must be positive")
    dist = math.sqrt(sum((a - b) ** 2 for a, b in zip(v_i, v_j)))
    if dist == 0.0:
        return 0.0
    steps = math.ceil(dist / speed / dt - 1e-9)
    return max(steps, 1) * dt


def edge_sample_count(v_i: Sequence[float], v_j: Sequence[float]) -> int:
    """Number of interpolation points a full edge sweep costs."""
    max_disp = max((abs(a - b) for a, b in zip(v_i, v_j)), default=0.0)
    return int(math.ceil(max_disp / EDGE_RESOLUTION_RAD - 1e-9)) + 1


def edge_motion_free(
    v_i: Sequence[float],
    v_j: Sequence[float],
    depart_t: float,
    world: DynamicWorld,
    ledger: CollisionLedger,
) -> bool:
    """Sweep the straight joint-space motion v_i -> v_j departing at depart_t.

    Samples are evenly spaced including both endpoints; short-circuits on the
    first colliding sample so the ledger reflects the queries actually made.
    """
    m = edge_sample_count(v_i, v_j)
    if m == 1:
        return not point_collision_query(v_i, depart_t, world, ledger)
    duration = travel_time(v_i, v_j, world.speed, world.grid.dt)
    vi = np.asarray(v_i, dtype=np.float64)
    vj = np.asarray(v_j, dtype=np.float64)
    for k in range(m):
        s = k / (m - 1)
        q = vi * (1.0 - s) + vj * s
        if point_collision_query(q, depart_t + s * duration, world, ledger):
            return False
    return True


def _static_free(arm: PlanarArm, q: Sequence[float], statics: Sequence[RectObstacle]) -> bool:
    pose = fk_points(arm, q)
    return not any(pose_hits_rect(pose, r) for r in statics)


def generate_trajectory(
    arms: Sequence[PlanarArm],
    statics: Sequence[RectObstacle],
    grid: TimeGrid,
    speed: float,
    rng: np.random.Generator,
    max_tries: int = 200,
) -> ObstacleTrajectory:
    """Random-waypoint motion at constant joint speed, static-free per step."""
    all_configs = []
    for arm in arms:
        n = arm.n_dof
        for _ in range(max_tries):
            q0 = rng.uniform(-math.pi, math.pi, n)
            if _static_free(arm, q0, statics):
                break
        else:
            raise RuntimeError("could not place obstacle arm clear of statics")
        configs = [q0]
        target = None
        tries = 0
        while len(configs) < grid.horizon + 1:
            cur = configs[-1]
            if target is None or np.linalg.norm(target - cur) < 1e-12:
                target = rng.uniform(-math.pi, math.pi, n)
            gap = target - cur
            dist = float(np.linalg.norm(gap))
            step_len = min(speed * grid.dt, dist)
            nxt = cur + gap / dist * step_len if dist > 0 else cur.copy()
            if _static_free(arm, nxt, statics):
                configs.append(nxt)
                tries = 0
            else:
                target = None  # pick a new waypoint away from the static
                tries += 1
                if tries > max_tries:
                    raise RuntimeError("obstacle trajectory generation budget exhausted")
        all_configs.append(np.stack(configs))
    return ObstacleTrajectory(arms, all_configs, grid)
