"""Companion-computer side: offboard setpoint programs and the PID angle controller.

The companion only talks to the firmware through serial bytes; it never holds
a reference to firmware objects. By default it closes its loops on the truth
state handed to it by the simulator; with ``use_estimate`` it runs its own
filter on the IMU stream the firmware publishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import protocol as proto
from . import rotation as rot
from .controller import PID
from .estimator import ComplementaryFilter

PROGRAMS = ("triangle_roll", "step_attitude", "hover", "scripted")


def triangle_wave(t: float, amplitude: float, period: float) -> float:
    """0 at t=0, +amplitude at period/4, -amplitude at 3 period/4."""
    s = (t / period) % 1.0
    if s < 0.25:
        return 4.0 * amplitude * s
    if s < 0.75:
        return amplitude * (2.0 - 4.0 * s)
    return amplitude * (4.0 * s - 4.0)


@dataclass(frozen=True)
class OffboardProgram:
    kind: str = "hover"
    amplitude: float = 0.0  # rad
    period: float = 4.0  # s
    rate: float = 400.0  # Hz
    mode: str = "passthrough"
    start: float = 0.0  # s; setpoint is level before this
    script: tuple[tuple[float, float, float, float], ...] = ()  # (t, roll, pitch, yaw), held

    def __post_init__(self):
        if self.kind not in PROGRAMS:
            raise ValueError(f"unknown offboard program {self.kind!r}")
        if self.rate <= 0 or self.period <= 0:
            raise ValueError("program rate and period must be positive")
        if self.mode not in ("passthrough", "setpoint"):
            raise ValueError(f"unknown offboard mode {self.mode!r}")

    def setpoint(self, t: float) -> tuple[float, float, float]:
        """Desired (roll, pitch, yaw) in rad at time ``t``."""
        if t < self.start or self.kind == "hover":
            return 0.0, 0.0, 0.0
        tt = t - self.start
        if self.kind == "triangle_roll":
            return triangle_wave(tt, self.amplitude, self.period), 0.0, 0.0
        if self.kind == "step_attitude":
            return self.amplitude, 0.0, 0.0
        out = (0.0, 0.0, 0.0)
        for ts, r, p, y in self.script:
            if ts <= tt:
                out = (r, p, y)
        return out


@dataclass(frozen=True)
class CompanionGains:
    angle_p: float = 10.0
    rate_p: float = 0.6
    rate_i: float = 0.3
    rate_d: float = 0.0
    yaw_p: float = 3.0
    yaw_rate_p: float = 0.3
    yaw_rate_i: float = 0.1
    alt_p: float = 4.0
    alt_d: float = 3.0
    alt_i: float = 0.5
    i_limit: float = 0.3
    torque_limit: float = 1.5
    tilt_limit: float = math.radians(45.0)


@dataclass
class VehicleView:
    """What the companion knows about the vehicle."""

    q: rot.Quat
    w: tuple[float, float, float]
    p: tuple[float, float, float] = (0.0, 0.0, 0.0)
    v_ned: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class CompanionController:
    """Cascaded PID angle controller producing [0, 0, Fz, Qx, Qy, Qz].

    ``thrust_sign`` maps upward thrust onto the mixer's Fz convention: -1 for
    physically-derived NED mixers, +1 for the simplified ones.
    """

    mass: float
    g: float = 9.80665
    gains: CompanionGains = field(default_factory=CompanionGains)
    thrust_sign: float = -1.0
    z_setpoint: float | None = None

    def __post_init__(self):
        g = self.gains
        mk = lambda kp, ki: PID(kp, ki, 0.0, i_limit=g.i_limit, out_limit=g.torque_limit)  # noqa: E731
        self.roll_pid = mk(g.rate_p, g.rate_i)
        self.pitch_pid = mk(g.rate_p, g.rate_i)
        self.yaw_pid = mk(g.yaw_rate_p, g.yaw_rate_i)
        self.roll_pid.kd = self.pitch_pid.kd = g.rate_d
        self.alt_int = 0.0

    def step(self, view: VehicleView, sp: tuple[float, float, float], dt: float) -> np.ndarray:
        g = self.gains
        roll, pitch, yaw = rot.to_euler(view.q)
        yaw_err = math.remainder(sp[2] - yaw, 2 * math.pi)
        rate_sp = (g.angle_p * (sp[0] - roll), g.angle_p * (sp[1] - pitch), g.yaw_p * yaw_err)
        qx = self.roll_pid.step(rate_sp[0], view.w[0], dt)
        qy = self.pitch_pid.step(rate_sp[1], view.w[1], dt)
        qz = self.yaw_pid.step(rate_sp[2], view.w[2], dt)

        if self.z_setpoint is None:
            self.z_setpoint = view.p[2]
        z_err = self.z_setpoint - view.p[2]
        self.alt_int = min(max(self.alt_int + g.alt_i * z_err * dt, -2.0), 2.0)
        az = g.alt_p * z_err - g.alt_d * view.v_ned[2] + self.alt_int  # NED, down positive
        tilt = max(math.cos(roll) * math.cos(pitch), math.cos(g.tilt_limit))
        thrust = max(self.mass * (self.g - az) / tilt, 0.0)
        return np.array([0.0, 0.0, self.thrust_sign * thrust, qx, qy, qz])


def companion_controller_step(view: VehicleView, setpoint, controller: CompanionController, dt: float) -> np.ndarray:
    return controller.step(view, setpoint, dt)


class Companion:
    """Runs the offboard program and ships commands over a serial endpoint."""

    def __init__(self, link, program: OffboardProgram, controller: CompanionController,
                 use_estimate: bool = False, filter_alpha: float = 0.002):
        self.link = link
        self.program = program
        self.controller = controller
        self.use_estimate = use_estimate
        self.filter = ComplementaryFilter(filter_alpha)
        self.decoder = proto.StreamDecoder()
        self._last_imu_t: float | None = None
        self._gyro = (0.0, 0.0, 0.0)
        self.sent = 0
        self.heartbeats = 0
        self._seq = 0
        self.last_setpoint = (0.0, 0.0, 0.0)
        self.last_u = np.zeros(6)

    def _drain(self) -> None:
        for msg in self.decoder.feed(self.link.read(0.0)):
            if isinstance(msg, proto.ImuData):
                if self._last_imu_t is not None and msg.t > self._last_imu_t:
                    self.filter.update(msg.gyro, msg.accel, msg.t - self._last_imu_t)
                self._last_imu_t = msg.t
                self._gyro = msg.gyro
            elif isinstance(msg, proto.Heartbeat):
                self.heartbeats += 1

    def step(self, t: float, truth, dt: float) -> np.ndarray:
        """One companion cycle; ``truth`` needs ``p``, ``v`` (body), ``q``, ``w``."""
        self._drain()
        v_ned = rot.rotate(truth.q, truth.v)
        if self.use_estimate:
            view = VehicleView(self.filter.q, self._gyro, truth.p, v_ned)
        else:
            view = VehicleView(truth.q, truth.w, truth.p, v_ned)
        sp = self.program.setpoint(t)
        if self.program.mode == "passthrough":
            u = self.controller.step(view, sp, dt)
        else:
            u = np.array([0.0, 0.0, self.controller.step(view, sp, dt)[2], sp[0], sp[1], 0.0])
        self.link.send(proto.encode(proto.OffboardCommand(tuple(u), self.program.mode), self._seq))
        self._seq = (self._seq + 1) & 0xFF
        self.sent += 1
        self.last_setpoint = sp
        self.last_u = u
        return u
