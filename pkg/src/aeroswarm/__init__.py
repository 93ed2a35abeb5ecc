"""Multi-drone autonomy stack with a deterministic SITL simulator.

Layered architecture: simulated aerial platforms at the bottom, basic
robotic functions (state estimation, motion control) above them, then
skill behaviors, mission interpretation, and operator-facing services,
all connected through an in-process message bus.
"""

__version__ = "0.1.0"
