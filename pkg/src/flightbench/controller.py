"""Cascaded angle -> rate -> torque PID used by the firmware inner loop."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimator import AttitudeEstimate


@dataclass
class PID:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    i_limit: float = math.inf
    out_limit: float = math.inf
    integral: float = 0.0
    _prev_meas: float | None = None

    def step(self, setpoint: float, measured: float, dt: float) -> float:
        err = setpoint - measured
        self.integral = min(max(self.integral + self.ki * err * dt, -self.i_limit), self.i_limit)
        deriv = 0.0
        if self.kd and self._prev_meas is not None:
            # derivative on measurement: no kick on setpoint steps
            deriv = -(measured - self._prev_meas) / dt
        self._prev_meas = measured
        out = self.kp * err + self.integral + self.kd * deriv
        return min(max(out, -self.out_limit), self.out_limit)

    def reset(self) -> None:
        self.integral = 0.0
        self._prev_meas = None


@dataclass(frozen=True)
class ControllerGains:
    roll_angle_p: float = 10.0
    pitch_angle_p: float = 10.0
    roll_rate: tuple[float, float, float] = (0.6, 0.3, 0.0)
    pitch_rate: tuple[float, float, float] = (0.6, 0.3, 0.0)
    yaw_rate: tuple[float, float, float] = (0.3, 0.1, 0.0)
    i_limit: float = 0.2
    torque_limit: float = 1.0
    max_rate: float = math.radians(360.0)

    def __post_init__(self):
        vals = [self.roll_angle_p, self.pitch_angle_p, *self.roll_rate, *self.pitch_rate, *self.yaw_rate,
                self.i_limit, self.torque_limit, self.max_rate]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("controller gains must be finite")
        if self.torque_limit <= 0 or self.i_limit <= 0 or self.max_rate <= 0:
            raise ValueError("controller limits must be positive")

    @classmethod
    def from_params(cls, p) -> ControllerGains:
        return cls(
            roll_angle_p=p["ROLL_ANGLE_P"],
            pitch_angle_p=p["PITCH_ANGLE_P"],
            roll_rate=(p["ROLL_RATE_P"], p["ROLL_RATE_I"], p["ROLL_RATE_D"]),
            pitch_rate=(p["PITCH_RATE_P"], p["PITCH_RATE_I"], p["PITCH_RATE_D"]),
            yaw_rate=(p["YAW_RATE_P"], p["YAW_RATE_I"], p["YAW_RATE_D"]),
            i_limit=p["RATE_I_LIMIT"],
            torque_limit=p["TORQUE_LIMIT"],
        )


@dataclass(frozen=True)
class AttitudeSetpoint:
    """Roll/pitch angles (rad) or rates (rad/s) plus yaw rate and body Fz."""

    roll: float = 0.0
    pitch: float = 0.0
    yaw_rate: float = 0.0
    fz: float = 0.0
    rate_mode: bool = False


class AttitudeController:
    def __init__(self, gains: ControllerGains = ControllerGains()):
        self.gains = gains
        self._make_loops()

    def _make_loops(self):
        g = self.gains
        self.rate_pids = [
            PID(*k, i_limit=g.i_limit, out_limit=g.torque_limit) for k in (g.roll_rate, g.pitch_rate, g.yaw_rate)
        ]

    def set_gains(self, gains: ControllerGains) -> None:
        if gains != self.gains:
            self.gains = gains
            self._make_loops()

    def reset(self) -> None:
        for pid in self.rate_pids:
            pid.reset()

    def step(self, est: AttitudeEstimate, sp: AttitudeSetpoint, dt: float) -> np.ndarray:
        """Returns the control input [0, 0, Fz, Qx, Qy, Qz]."""
        g = self.gains
        if sp.rate_mode:
            rate_sp = (sp.roll, sp.pitch, sp.yaw_rate)
        else:
            roll, pitch, _ = est.euler()
            lim = g.max_rate
            rate_sp = (
                min(max(g.roll_angle_p * (sp.roll - roll), -lim), lim),
                min(max(g.pitch_angle_p * (sp.pitch - pitch), -lim), lim),
                sp.yaw_rate,
            )
        q = [pid.step(s, m, dt) for pid, s, m in zip(self.rate_pids, rate_sp, est.rate)]
        return np.array([0.0, 0.0, sp.fz, q[0], q[1], q[2]])


def attitude_rate_controller(est: AttitudeEstimate, sp: AttitudeSetpoint, gains: ControllerGains,
                             dt: float, state: AttitudeController | None = None) -> np.ndarray:
    """Functional entry point; pass ``state`` to keep integrators across calls."""
    ctl = state if state is not None else AttitudeController(gains)
    ctl.set_gains(gains)
    return ctl.step(est, sp, dt)
