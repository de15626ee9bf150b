"""Lockstep time manager wiring every simulation module together."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import rotation as rot
from ..allocation import (
    MOTOR_RATE,
    SERVO_RATE,
    ChannelKind,
    MixerConfig,
    OutputChannelConfig,
    StoredAs,
    custom_params,
    load_predefined,
)
from ..companion import Companion, CompanionController
from ..estimator import AttitudeEstimate
from ..firmware import Firmware
from ..motor import general_mixer
from ..params import ParamStore
from ..transport import inproc_pair
from .board import sil_board_bind
from .clock import SimClock
from .dynamics import RigidBodyState, Wrench, dynamics_step
from .forces import ForceModel, Propulsion, Vehicle
from .logger import TrajectoryLogger
from .scenario import ScenarioConfig
from .sensors import Sensors

TICK_ORDER = ("rc", "companion", "serial", "firmware", "forces", "dynamics", "sensors", "logger")
QUAT_TOL = 1e-9


class InvariantViolation(RuntimeError):
    pass


@dataclass
class ScenarioResult:
    trajectory: Path | None
    rms_error: float  # rad, roll tracking
    max_error: float  # rad
    command_rate: float  # Hz, offboard commands sent
    ticks: int
    max_quat_drift: float
    events: list

    def summary(self) -> str:
        return (f"ticks={self.ticks} roll_rms_deg={math.degrees(self.rms_error):.4f} "
                f"roll_max_deg={math.degrees(self.max_error):.4f} "
                f"command_rate_hz={self.command_rate:.1f} quat_drift={self.max_quat_drift:.3e}")


def general_mixer_config(vehicle: Vehicle) -> MixerConfig:
    """Physically-derived forward mixer for ``vehicle``; motor channels from the motor list."""
    M = general_mixer(vehicle.motors, vehicle.env.rho)
    kinds = [ChannelKind.AUX] * 10
    for m in vehicle.motors:
        kinds[m.channel] = ChannelKind.MOTOR
    headers = tuple(OutputChannelConfig(k, MOTOR_RATE if k is ChannelKind.MOTOR else SERVO_RATE) for k in kinds)
    return MixerConfig("general", M, StoredAs.FORWARD_M, headers)


def scenario_params(cfg: ScenarioConfig) -> ParamStore:
    """Firmware parameters implied by a scenario."""
    params = ParamStore()

    def select(which: str, name: str | None, prefix: str):
        if name is None:
            return
        if name == "general":
            params.update(custom_params(general_mixer_config(cfg.vehicle), prefix))
            params.set(which, "custom")
        elif name == "custom":
            params.set(which, "custom")
        else:
            load_predefined(name)  # fail early on unknown names
            params.set(which, name)

    select("PRIMARY_MIXER", cfg.primary_mixer, "PRI")
    select("SECONDARY_MIXER", cfg.secondary_mixer, "SEC")
    params.set("USE_MOTOR_PARAM", int(cfg.use_motor_param))
    params.update(cfg.params)
    return params


def motor_list(vehicle: Vehicle):
    """Motor descriptors in ascending channel order (what the output stage expects)."""
    return sorted(vehicle.motors, key=lambda m: m.channel)


class Simulation:
    """One scenario run. Call :meth:`time_manager_step` per tick or :meth:`run`."""

    def __init__(self, cfg: ScenarioConfig, trajectory=None, force_model: ForceModel | None = None,
                 record_trace: bool = False):
        self.cfg = cfg
        self.clock = SimClock(cfg.dynamics_rate)
        self.vehicle = cfg.vehicle
        self.state = RigidBodyState(p=cfg.initial_p, q=rot.from_euler(*cfg.initial_rpy))
        self.force_model = force_model if force_model is not None else Propulsion(cfg.vehicle)

        comp_end, fw_end = inproc_pair(clock=lambda: self.clock.t, delay=cfg.serial_delay)
        self.firmware = Firmware(scenario_params(cfg), motor_list(cfg.vehicle), cfg.vehicle.env)
        self.board, self.node = sil_board_bind(self.firmware, self.clock, fw_end,
                                               stream_imu=cfg.companion_use_estimate)
        self.companion = None
        if cfg.program is not None:
            ctl = CompanionController(cfg.vehicle.mass, cfg.vehicle.env.g, cfg.companion_gains, cfg.thrust_sign)
            self.companion = Companion(comp_end, cfg.program, ctl, cfg.companion_use_estimate)
        self._comp_end = comp_end

        self.sensors = Sensors(cfg.vehicle.mass, cfg.sensors, cfg.seed)
        self.wrench = Wrench()
        self.board.imu = self.sensors.imu(self.state, self.wrench, 0.0)

        self._own_stream = None
        if trajectory is None:
            trajectory = io.StringIO()
        elif isinstance(trajectory, (str, Path)):
            self._own_stream = open(trajectory, "w", newline="")
            trajectory = self._own_stream
        self.logger = TrajectoryLogger(trajectory)
        self.trajectory_stream = trajectory

        self.record_trace = record_trace
        self.trace: list[tuple] = []
        self.errors: list[float] = []
        self.setpoints: list[tuple[float, float, float]] = []  # (t, roll_sp, roll)
        self.max_quat_drift = 0.0

    def _roll_setpoint(self, rc) -> float:
        if self.companion is not None:
            return self.companion.last_setpoint[0]
        return rc.roll * self.firmware.params["RC_MAX_ANGLE"]

    def time_manager_step(self) -> tuple[str, ...]:
        """Advance exactly one tick; returns the modules dispatched, in order."""
        clk = self.clock
        k, t, dt = clk.tick_count, clk.t, clk.dt
        done = []

        rc = self.cfg.rc(t)
        self.board.rc = rc
        done.append("rc")

        if self.companion is not None and k % self.cfg.divider == 0:
            self.companion.step(t, self.state, dt * self.cfg.divider)
            done.append("companion")
        done.append("serial")  # delivery happens inside the link on the sim clock

        if self.cfg.firmware_truth_attitude:
            self.firmware.inject_attitude(AttitudeEstimate(self.state.q, self.state.w))
        outputs = self.node.step(dt)
        done.append("firmware")

        roll_sp = self._roll_setpoint(rc)
        roll = self.state.euler()[0]
        self.errors.append(roll_sp - roll)
        self.setpoints.append((t, roll_sp, roll))

        self.wrench = self.force_model(outputs, self.state, dt)
        done.append("forces")
        self.state = dynamics_step(self.state, self.wrench, self.vehicle.body, dt)
        t_next = clk.advance()
        done.append("dynamics")
        self.board.imu = self.sensors.imu(self.state, self.wrench, t_next)
        done.append("sensors")
        self.logger.log(t_next, self.state, outputs, self.firmware.last_u)
        done.append("logger")

        self._check()
        trace = tuple(done)
        if self.record_trace:
            self.trace.append((k, trace, self.state.as_tuple()))
        return trace

    def _check(self) -> None:
        s = self.state
        if not all(math.isfinite(c) for c in s.as_tuple()):
            raise InvariantViolation(f"non-finite state at t={self.clock.t}")
        drift = abs(rot.qnorm(s.q) - 1.0)
        self.max_quat_drift = max(self.max_quat_drift, drift)
        if drift > QUAT_TOL:
            raise InvariantViolation(f"quaternion norm drift {drift:.3e} at t={self.clock.t}")

    @property
    def n_ticks(self) -> int:
        return round(self.cfg.duration * self.cfg.dynamics_rate)

    def run(self) -> ScenarioResult:
        try:
            for _ in range(self.n_ticks):
                self.time_manager_step()
        finally:
            self.trajectory_stream.flush()
            if self._own_stream is not None:
                self._own_stream.close()
        err = np.asarray(self.errors)
        sent = self.companion.sent if self.companion is not None else 0
        return ScenarioResult(
            trajectory=Path(self._own_stream.name) if self._own_stream is not None else None,
            rms_error=float(np.sqrt(np.mean(err**2))) if err.size else 0.0,
            max_error=float(np.max(np.abs(err))) if err.size else 0.0,
            command_rate=sent / self.cfg.duration,
            ticks=self.clock.tick_count,
            max_quat_drift=self.max_quat_drift,
            events=list(self.firmware.events),
        )


def run_scenario(cfg: ScenarioConfig, trajectory=None) -> ScenarioResult:
    return Simulation(cfg, trajectory).run()
