"""Robot kinematics: holonomic and unicycle models with exact constant-twist steps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from potential_gap.core import Pose2, Twist2

HOLONOMIC_1ST = "holonomic_1st"
NONHOLONOMIC_1ST = "nonholonomic_1st"
NONHOLONOMIC_2ND = "nonholonomic_2nd"
MODELS = (HOLONOMIC_1ST, NONHOLONOMIC_1ST, NONHOLONOMIC_2ND)


@dataclass(frozen=True)
class RobotModel:
    kind: str = HOLONOMIC_1ST
    r_ins: float = 0.2
    v_max: float = 0.5
    omega_max: float = 1.5
    a_max: float = 1.0
    alpha_max: float = 2.0

    def __post_init__(self):
        if self.kind not in MODELS:
            raise ValueError(f"unknown robot model {self.kind!r}")
        if min(self.r_ins, self.v_max, self.omega_max, self.a_max, self.alpha_max) <= 0:
            raise ValueError("robot limits must be positive")

    @property
    def holonomic(self) -> bool:
        return self.kind == HOLONOMIC_1ST


@dataclass(frozen=True)
class RobotState:
    pose: Pose2 = field(default_factory=Pose2)
    velocity: Twist2 = field(default_factory=Twist2)


def _clip(v: float, lim: float) -> float:
    return max(-lim, min(lim, v))


def clamp(model: RobotModel, cmd: Twist2) -> Twist2:
    """Respect the model's velocity limits (and drop lateral motion for unicycles)."""
    if model.holonomic:
        speed = math.hypot(cmd.v_x, cmd.v_y)
        k = model.v_max / speed if speed > model.v_max else 1.0
        return Twist2(cmd.v_x * k, cmd.v_y * k, _clip(cmd.omega, model.omega_max))
    return Twist2(_clip(cmd.v_x, model.v_max), 0.0, _clip(cmd.omega, model.omega_max))


def integrate_twist(pose: Pose2, twist: Twist2, dt: float) -> Pose2:
    """Exact pose after holding the body-frame ``twist`` for ``dt``."""
    th = twist.omega * dt
    if abs(th) < 1e-12:
        dx, dy = twist.v_x * dt, twist.v_y * dt
    else:
        s, c = math.sin(th), math.cos(th)
        w = twist.omega
        dx = (twist.v_x * s - twist.v_y * (1.0 - c)) / w
        dy = (twist.v_x * (1.0 - c) + twist.v_y * s) / w
    return pose.compose(Pose2(dx, dy, th))


def step(model: RobotModel, state: RobotState, command: Twist2, dt: float) -> RobotState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    target = clamp(model, command)
    if model.kind == NONHOLONOMIC_2ND:
        v0 = state.velocity
        nu = v0.v_x + _clip(target.v_x - v0.v_x, model.a_max * dt)
        om = v0.omega + _clip(target.omega - v0.omega, model.alpha_max * dt)
        target = Twist2(nu, 0.0, om)
    return RobotState(integrate_twist(state.pose, target, dt), target)
