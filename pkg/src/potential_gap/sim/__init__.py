"""Deterministic 2-D simulation: worlds, range sensor, robot kinematics."""

from potential_gap.sim.dynamics import (HOLONOMIC_1ST, MODELS, NONHOLONOMIC_1ST, NONHOLONOMIC_2ND,
                                        RobotModel, RobotState, clamp, integrate_twist, step)
from potential_gap.sim.sensor import (SensorModel, bumper_check, obstacle_distance, raycast,
                                      raycast_with_flag)
from potential_gap.sim.world import (KINDS, World, WorldGenerationError, dumps, flood_fill,
                                     generate_world, load, loads, save)

__all__ = [
    "HOLONOMIC_1ST", "NONHOLONOMIC_1ST", "NONHOLONOMIC_2ND", "MODELS", "RobotModel", "RobotState",
    "clamp", "integrate_twist", "step", "SensorModel", "raycast", "raycast_with_flag",
    "bumper_check", "obstacle_distance", "KINDS", "World", "WorldGenerationError", "generate_world",
    "load", "loads", "save", "dumps", "flood_fill",
]
