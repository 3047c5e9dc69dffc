"""Deterministic SVG snapshot strips of a planned trajectory."""

from __future__ import annotations

import numpy as np

from .roadmap import ProblemInstance
from .sipp import TimedPath
from .world import travel_time

PANEL_PX = 240
MARGIN_PX = 14


def ego_config_at(problem: ProblemInstance, path: TimedPath, t: float) -> np.ndarray:
    """Ego configuration along the path at time t: lerp moves, hold waits."""
    verts = problem.graph.vertices
    steps = path.steps
    if t <= steps[0][1]:
        return verts[steps[0][0]]
    for (v, tv), (u, tu) in zip(steps, steps[1:]):
        if t > tu:
            continue
        delta = travel_time(verts[v], verts[u], problem.speed, problem.grid.dt)
        depart = tu - delta
        if t <= depart:
            return verts[v]
        s = (t - depart) / delta
        return verts[v] * (1.0 - s) + verts[u] * s
    return verts[steps[-1][0]]


def _workspace_bounds(problem: ProblemInstance) -> tuple[float, float, float, float]:
    xs, ys = [], []
    for arm in [problem.ego_arm] + problem.obstacle_arms:
        bx, by = arm.base
        xs += [bx - arm.reach, bx + arm.reach]
        ys += [by - arm.reach, by + arm.reach]
    for r in problem.statics:
        x0, y0, x1, y1 = r.bounds
        xs += [x0, x1]
        ys += [y0, y1]
    pad = 0.2
    return min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad


def _polyline(points, color, width, tx) -> str:
    pts = " ".join(f"{tx(x, y)[0]:.2f},{tx(x, y)[1]:.2f}" for x, y in points)
    return (
        f'<polyline points="{pts}" fill="none" stroke="{color}" '
        f'stroke-width="{width}" stroke-linecap="round"/>'
    )


def render_svg(problem: ProblemInstance, path: TimedPath, panels: int = 6) -> str:
    """A strip of `panels` time slices from t=0 to the path arrival."""
    from .geometry import fk_points

    if not path.steps:
        raise ValueError("cannot render an empty path")
    panels = max(panels, 1)
    x0, y0, x1, y1 = _workspace_bounds(problem)
    span = max(x1 - x0, y1 - y0)
    scale = (PANEL_PX - 2 * MARGIN_PX) / span
    width = panels * PANEL_PX
    height = PANEL_PX

    arrival = path.arrival
    times = [arrival * i / (panels - 1) if panels > 1 else 0.0 for i in range(panels)]

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    goal_cfg = problem.graph.vertices[problem.goal]
    start_cfg = problem.graph.vertices[problem.start]
    for p_idx, t in enumerate(times):
        ox = p_idx * PANEL_PX

        def tx(wx, wy, ox=ox):
            return (ox + MARGIN_PX + (wx - x0) * scale,
                    PANEL_PX - MARGIN_PX - (wy - y0) * scale)

        parts.append(
            f'<rect x="{ox}" y="0" width="{PANEL_PX}" height="{PANEL_PX}" '
            f'fill="none" stroke="#cccccc"/>'
        )
        for r in problem.statics:
            rx0, ry0, rx1, ry1 = r.bounds
            px, py = tx(rx0, ry1)
            parts.append(
                f'<rect x="{px:.2f}" y="{py:.2f}" width="{(rx1 - rx0) * scale:.2f}" '
                f'height="{(ry1 - ry0) * scale:.2f}" fill="#888888"/>'
            )
        for marker_cfg, color in ((start_cfg, "#2ca02c"), (goal_cfg, "#d62728")):
            ee = fk_points(problem.ego_arm, marker_cfg)[-1]
            mx, my = tx(*ee)
            parts.append(f'<circle cx="{mx:.2f}" cy="{my:.2f}" r="4" fill="{color}"/>')
        for i, arm in enumerate(problem.obstacle_arms):
            cfg = problem.trajectory.config_at(i, t)
            parts.append(_polyline(fk_points(arm, cfg), "#1f77b4", 4, tx))
        ego_cfg = ego_config_at(problem, path, t)
        parts.append(_polyline(fk_points(problem.ego_arm, ego_cfg), "#111111", 4, tx))
        parts.append(
            f'<text x="{ox + 6}" y="14" font-size="11" fill="#333333">'
            f"t={t:.2f}s</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts)
