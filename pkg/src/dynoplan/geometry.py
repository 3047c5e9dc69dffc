"""Planar N-link arm kinematics and exact 2D collision primitives.

Links are zero-width segments. Angles compose serially: joint i's angle is
relative to the direction of link i-1. All predicates are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

# Absolute epsilon for the collinearity decision in orientation tests.
COLLINEAR_EPS = 1e-12

Point = tuple[float, float]


@dataclass(frozen=True)
class PlanarArm:
    """A planar serial chain anchored at `base` with positive link lengths."""

    base: Point
    link_lengths: tuple[float, ...]

    def __post_init__(self):
        if not self.link_lengths or any(l <= 0.0 for l in self.link_lengths):
            raise ValueError("link lengths must be positive")

    @property
    def n_dof(self) -> int:
        return len(self.link_lengths)

    @property
    def reach(self) -> float:
        return sum(self.link_lengths)


@dataclass(frozen=True)
class WorkspacePose:
    """Joint positions base..end-effector; joints[i+1]-joints[i] has link length i."""

    joints: tuple[Point, ...]


@dataclass(frozen=True)
class RectObstacle:
    """Axis-aligned rectangle given by center and positive half extents."""

    center: Point
    half_extents: Point

    def __post_init__(self):
        if self.half_extents[0] <= 0.0 or self.half_extents[1] <= 0.0:
            raise ValueError("half extents must be positive")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        hx, hy = self.half_extents
        return cx - hx, cy - hy, cx + hx, cy + hy


def fk_points(arm: PlanarArm, q: Sequence[float]) -> list[Point]:
    """Joint positions as a plain list; hot path used by collision queries."""
    if len(q) != arm.n_dof:
        raise ValueError(f"config has {len(q)} angles, arm has {arm.n_dof} links")
    x, y = arm.base
    pts = [(x, y)]
    theta = 0.0
    for length, angle in zip(arm.link_lengths, q):
        theta += angle
        x += length * math.cos(theta)
        y += length * math.sin(theta)
        pts.append((x, y))
    return pts


def forward_kinematics(arm: PlanarArm, q: Sequence[float]) -> WorkspacePose:
    return WorkspacePose(tuple(fk_points(arm, q)))


def _orient(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the cross product (b-a) x (c-a); 0 within COLLINEAR_EPS."""
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if v > COLLINEAR_EPS:
        return 1
    if v < -COLLINEAR_EPS:
        return -1
    return 0


def _on_segment(ax, ay, bx, by, px, py) -> bool:
    """p collinear with a-b assumed; is p inside the segment's bounding box."""
    return (
        min(ax, bx) - COLLINEAR_EPS <= px <= max(ax, bx) + COLLINEAR_EPS
        and min(ay, by) - COLLINEAR_EPS <= py <= max(ay, by) + COLLINEAR_EPS
    )


def segments_intersect(a1: Point, a2: Point, b1: Point, b2: Point) -> bool:
    """True iff the closed segments a1-a2 and b1-b2 share any point."""
    ax, ay = a1
    bx, by = a2
    cx, cy = b1
    dx, dy = b2
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    if o1 != o2 and o3 != o4:
        return True
    # Collinear overlap, including degenerate zero-length segments.
    if o1 == 0 and _on_segment(ax, ay, bx, by, cx, cy):
        return True
    if o2 == 0 and _on_segment(ax, ay, bx, by, dx, dy):
        return True
    if o3 == 0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return True
    if o4 == 0 and _on_segment(cx, cy, dx, dy, bx, by):
        return True
    return False


def poses_collide(pose_a: Sequence[Point], pose_b: Sequence[Point]) -> bool:
    """Any-link-vs-any-link intersection between two joint-position chains."""
    for i in range(len(pose_a) - 1):
        a1 = pose_a[i]
        a2 = pose_a[i + 1]
        for j in range(len(pose_b) - 1):
            if segments_intersect(a1, a2, pose_b[j], pose_b[j + 1]):
                return True
    return False


def arms_collide(
    arm_a: PlanarArm, q_a: Sequence[float], arm_b: PlanarArm, q_b: Sequence[float]
) -> bool:
    return poses_collide(fk_points(arm_a, q_a), fk_points(arm_b, q_b))


def segment_hits_rect(p1: Point, p2: Point, rect: RectObstacle) -> bool:
    """Closed segment vs closed rectangle, containment included."""
    x0, y0, x1, y1 = rect.bounds
    # Either endpoint inside covers full containment.
    if x0 <= p1[0] <= x1 and y0 <= p1[1] <= y1:
        return True
    if x0 <= p2[0] <= x1 and y0 <= p2[1] <= y1:
        return True
    corners = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    for i in range(4):
        if segments_intersect(p1, p2, corners[i], corners[(i + 1) % 4]):
            return True
    return False


def pose_hits_rect(pose: Sequence[Point], rect: RectObstacle) -> bool:
    for i in range(len(pose) - 1):
        if segment_hits_rect(pose[i], pose[i + 1], rect):
            return True
    return False


def arm_collides_rect(arm: PlanarArm, q: Sequence[float], rect: RectObstacle) -> bool:
    return pose_hits_rect(fk_points(arm, q), rect)
