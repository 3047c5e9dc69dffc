"""Named environment presets for the planar multi-arm benchmarks."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .geometry import PlanarArm, RectObstacle


@dataclass(frozen=True)
class EnvSpec:
    name: str
    ego_arm: PlanarArm
    obstacle_arms: tuple[PlanarArm, ...]
    statics: tuple[RectObstacle, ...]
    horizon: int  # steps T
    dt: float
    speed: float
    vertex_count: int  # graph size including start and goal
    k: int


_EGO = PlanarArm(base=(0.0, 0.0), link_lengths=(1.0, 1.0))
_OBS_RIGHT = PlanarArm(base=(2.0, 0.0), link_lengths=(1.0, 1.0))
_OBS_LEFT = PlanarArm(base=(-2.0, 0.0), link_lengths=(1.0, 1.0))
# Placed below the ego arm, outside the obstacle arms' reach.
_STATIC = (RectObstacle(center=(0.0, -1.7), half_extents=(0.5, 0.25)),)

PRESETS: dict[str, EnvSpec] = {
    "2Arms": EnvSpec(
        name="2Arms",
        ego_arm=_EGO,
        obstacle_arms=(_OBS_RIGHT,),
        statics=_STATIC,
        horizon=50,
        dt=0.2,
        speed=1.0,
        vertex_count=300,
        k=50,
    ),
    "3Arms": EnvSpec(
        name="3Arms",
        ego_arm=_EGO,
        obstacle_arms=(_OBS_RIGHT, _OBS_LEFT),
        statics=_STATIC,
        horizon=50,
        dt=0.2,
        speed=1.0,
        vertex_count=300,
        k=50,
    ),
}


def get_env(name: str, **overrides) -> EnvSpec:
    if name not in PRESETS:
        raise KeyError(f"unknown environment {name!r}; have {sorted(PRESETS)}")
    spec = PRESETS[name]
    return replace(spec, **overrides) if overrides else spec
