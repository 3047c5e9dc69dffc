"""Dynamic motion planning on sampled roadmaps with a learned edge-priority planner."""

__version__ = "0.1.0"
