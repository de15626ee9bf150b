"""Flight-controller core: arming, command muxing, inner loop, mixer pipeline.

:class:`Firmware` is a single-threaded state machine advanced only by
:meth:`Firmware.tick`. :class:`FirmwareNode` binds it to a board (clock, RC,
IMU, serial port, outputs) and handles the serial message traffic, so the
same core runs unchanged against the simulator or a benchmark harness.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from . import protocol as proto
from .allocation import (
    ChannelKind,
    MixerConfig,
    MixerValidationError,
    OverrideState,
    blend_mixers,
    load_custom,
    load_predefined,
    mix,
    output_stage,
)
from .controller import AttitudeController, AttitudeSetpoint, ControllerGains
from .estimator import AttitudeEstimate, ComplementaryFilter
from .motor import Environment, MotorDescriptor
from .params import UNSET, ParamError, ParamStore

log = logging.getLogger(__name__)


class ControlSource(str, enum.Enum):
    RC = "rc"
    OFFBOARD = "offboard"
    MIXED = "mixed"


@dataclass(frozen=True)
class RcChannels:
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    throttle: float = 0.0
    attitude_override: bool = False
    throttle_override: bool = False
    arm: bool = False
    valid: bool = True

    def sane(self) -> bool:
        sticks = (self.roll, self.pitch, self.yaw, self.throttle)
        return (
            all(math.isfinite(s) for s in sticks)
            and all(-1.0 <= s <= 1.0 for s in sticks[:3])
            and 0.0 <= self.throttle <= 1.0
        )


@dataclass(frozen=True)
class ImuSample:
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]
    t: float = 0.0

    def finite(self) -> bool:
        return all(math.isfinite(v) for v in (*self.accel, *self.gyro, self.t))


@dataclass
class FirmwareState:
    armed: bool = False
    failsafe: bool = False
    control_source: ControlSource = ControlSource.RC
    offboard_mode: str = "passthrough"
    last_offboard_age: float = math.inf
    overrides: OverrideState = OverrideState()


@dataclass(frozen=True)
class FirmwareEvent:
    tick: int
    t: float
    kind: str
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        items = " ".join(f"{k}={v}" for k, v in self.detail.items())
        return f"tick={self.tick} t={self.t:.6f} event={self.kind} {items}".rstrip()


def resolve_overrides(rc: RcChannels, offboard_age: float, armed: bool = True,
                      timeout: float = 0.1, deadband: float = 0.05) -> OverrideState:
    """RC pilot takeover flags plus whether the offboard stream is in charge.

    Any attitude stick beyond ``deadband`` grabs attitude even without the
    switch. A stale (or absent) offboard stream is never active.
    """
    stick = max(abs(rc.roll), abs(rc.pitch), abs(rc.yaw))
    return OverrideState(
        attitude_override=bool(rc.attitude_override or stick > deadband),
        throttle_override=bool(rc.throttle_override),
        offboard_active=bool(armed and offboard_age <= timeout),
    )


def _resolve_mixer(params: ParamStore, selector: str, prefix: str) -> MixerConfig:
    name = params[selector]
    if name == "custom":
        return load_custom(params.view(), prefix, name=f"custom_{prefix.lower()}")
    return load_predefined(name)


class Firmware:
    def __init__(self, params: ParamStore | None = None, motors: Sequence[MotorDescriptor] = (),
                 env: Environment = Environment()):
        self.params = params if params is not None else ParamStore()
        self.motors = list(motors)
        self.env = env
        self.state = FirmwareState()
        self.tick_count = 0
        self.time = 0.0
        self.events: list[FirmwareEvent] = []
        self.filter = ComplementaryFilter(self.params["FILTER_ALPHA"])
        self.controller = AttitudeController(ControllerGains.from_params(self.params))
        self.estimate = AttitudeEstimate()
        self._truth: AttitudeEstimate | None = None
        self._offboard: proto.OffboardCommand | None = None
        self._blend_cache: dict[OverrideState, MixerConfig] = {}
        self._param_rev = -1
        self._mixer_rev = -1
        self.last_u = np.zeros(6)
        self.last_tau = np.zeros(10)
        self.last_outputs = np.zeros(10)
        self.mixer_name = ""
        self.reload_mixers()

    # -- configuration -----------------------------------------------------

    def reload_mixers(self) -> None:
        """Rebuild primary/secondary mixers from parameters; raises on invalid values."""
        p = self.params
        primary = _resolve_mixer(p, "PRIMARY_MIXER", "PRI")
        if p["SECONDARY_MIXER"] == UNSET:
            secondary = primary
        else:
            secondary = _resolve_mixer(p, "SECONDARY_MIXER", "SEC")
        use_motor = bool(p["USE_MOTOR_PARAM"])
        if use_motor and len(self.motors) < len(primary.motor_channels()):
            raise MixerValidationError("USE_MOTOR_PARAM needs a motor descriptor per motor channel",
                                       ["USE_MOTOR_PARAM"])
        self.primary, self.secondary = primary, secondary
        self.use_motor_param = use_motor
        self._blend_cache.clear()
        self._param_rev = p.revision
        self._mixer_rev = p.mixer_revision

    def inject_attitude(self, est: AttitudeEstimate | None) -> None:
        """Test hook: use ``est`` instead of the filter output (None restores the filter)."""
        self._truth = est

    def _log(self, kind: str, **detail) -> None:
        ev = FirmwareEvent(self.tick_count, self.time, kind, detail)
        self.events.append(ev)
        log.debug(ev.line())

    def _sync_params(self) -> None:
        if self.params.revision == self._param_rev:
            return
        p = self.params
        self.filter.alpha = p["FILTER_ALPHA"]
        self.controller.set_gains(ControllerGains.from_params(p))
        self._param_rev = p.revision
        if p.mixer_revision == self._mixer_rev:
            return
        try:
            self.reload_mixers()
            self._log("mixer_reload", primary=self.primary.name, secondary=self.secondary.name)
        except (MixerValidationError, ValueError, ParamError) as exc:
            self._mixer_rev = p.mixer_revision
            self._log("mixer_reload_failed", error=str(exc))

    # -- main loop ---------------------------------------------------------

    def tick(self, dt: float, rc: RcChannels, offboard: proto.OffboardCommand | None = None,
             imu: ImuSample | None = None) -> np.ndarray:
        """Advance one control step and return the 10 channel outputs."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        st = self.state
        p = self.params
        self._sync_params()

        # estimator
        imu_ok = imu is None or imu.finite()
        if imu is not None and imu_ok:
            self.estimate = self.filter.update(imu.gyro, imu.accel, dt)
        est = self._truth if self._truth is not None else self.estimate

        # failsafe and arming
        failsafe = not (rc.valid and rc.sane() and imu_ok)
        if failsafe != st.failsafe:
            st.failsafe = failsafe
            self._log("failsafe_enter" if failsafe else "failsafe_exit")
            if failsafe and st.armed:
                st.armed = False
                self._log("disarm", reason="failsafe")
        if not failsafe:
            if not st.armed and rc.arm and rc.throttle < p["ARM_THR_MAX"]:
                st.armed = True
                self._log("arm")
            elif st.armed and not rc.arm:
                st.armed = False
                self._log("disarm", reason="switch")

        # offboard stream bookkeeping
        if offboard is not None and proto.is_finite_command(offboard):
            self._offboard = offboard
            st.last_offboard_age = 0.0
            st.offboard_mode = offboard.mode
        else:
            if offboard is not None:
                self._log("offboard_rejected", reason="non-finite")
            st.last_offboard_age += dt

        ov = resolve_overrides(rc, st.last_offboard_age, st.armed and not failsafe,
                               p["OFFBOARD_TIMEOUT"], p["RC_ATT_DEADBAND"])
        if ov != st.overrides:
            st.overrides = ov
            self._log("override", attitude=ov.attitude_override, throttle=ov.throttle_override,
                      offboard=ov.offboard_active)

        u = self._compose_input(rc, ov, est, dt) if st.armed and not failsafe else np.zeros(6)
        source = (ControlSource.RC if not ov.offboard_active
                  else ControlSource.OFFBOARD if not (ov.attitude_override or ov.throttle_override)
                  else ControlSource.MIXED)
        if source != st.control_source:
            st.control_source = source
            self._log("control_source", source=source.value)

        mixer = self._blend_cache.get(ov)
        if mixer is None:
            mixer = self._blend_cache[ov] = blend_mixers(self.primary, self.secondary, ov)
        if mixer.name != self.mixer_name:
            self.mixer_name = mixer.name
            self._log("mixer_source", mixer=mixer.name)

        tau = mix(mixer, u)
        out = output_stage(tau, mixer, self.motors, self.use_motor_param, env=self.env)
        if not st.armed or failsafe:
            for c, kind in enumerate(mixer.kinds):
                if kind in (ChannelKind.MOTOR, ChannelKind.SERVO):
                    out[c] = 0.0

        self.last_u, self.last_tau, self.last_outputs = u, tau, out
        self.tick_count += 1
        self.time += dt
        return out

    def _compose_input(self, rc: RcChannels, ov: OverrideState, est: AttitudeEstimate, dt: float) -> np.ndarray:
        p = self.params
        rc_sp = AttitudeSetpoint(
            roll=rc.roll * p["RC_MAX_ANGLE"],
            pitch=rc.pitch * p["RC_MAX_ANGLE"],
            yaw_rate=rc.yaw * p["RC_MAX_YAWRATE"],
            fz=rc.throttle * p["THR_SCALE"],
        )
        rc_force = np.array([0.0, 0.0, rc_sp.fz])
        if not ov.offboard_active:
            return self.controller.step(est, rc_sp, dt)

        cmd = self._offboard
        off = np.array(cmd.u, dtype=float)
        force = rc_force if ov.throttle_override else off[:3]
        if ov.attitude_override:
            torque = self.controller.step(est, rc_sp, dt)[3:]
        elif cmd.mode == "passthrough":
            # bypasses the inner loop entirely
            self.controller.reset()
            torque = off[3:]
        else:
            sp = AttitudeSetpoint(roll=off[3], pitch=off[4], yaw_rate=off[5])
            torque = self.controller.step(est, sp, dt)[3:]
        return np.concatenate([force, torque])


# ---------------------------------------------------------------------------
# board binding


class Board(Protocol):
    def clock(self) -> float: ...

    def read_rc(self) -> RcChannels: ...

    def read_imu(self) -> ImuSample | None: ...

    def serial_read(self) -> bytes: ...

    def serial_write(self, data: bytes) -> None: ...

    def write_outputs(self, outputs: np.ndarray) -> None: ...


class FirmwareNode:
    """Serial message handling around :class:`Firmware`.

    Offboard commands feed the next tick (the newest one wins); with
    ``SERIAL_ECHO`` set each is sent straight back, byte for byte. Param
    requests/writes are answered immediately.
    """

    def __init__(self, firmware: Firmware, board: Board, stream_imu: bool = False,
                 heartbeat_period: float = 1.0):
        self.fw = firmware
        self.board = board
        self.decoder = proto.StreamDecoder()
        self.stream_imu = stream_imu
        self.heartbeat_period = heartbeat_period
        self._next_heartbeat = 0.0
        self._seq = 0
        self.echoed = 0

    def send(self, msg: proto.Message) -> None:
        self.board.serial_write(proto.encode(msg, self._seq))
        self._seq = (self._seq + 1) & 0xFF

    def handle(self, msg: proto.Message) -> proto.OffboardCommand | None:
        fw = self.fw
        if isinstance(msg, proto.OffboardCommand):
            if fw.params["SERIAL_ECHO"]:
                self.send(msg)
                self.echoed += 1
            return msg
        if isinstance(msg, proto.ParamRequest):
            try:
                self.send(proto.ParamValue(msg.name, fw.params[msg.name]))
            except ParamError:
                self.send(proto.Ack(msg.msg_id, proto.ACK_UNKNOWN_PARAM))
        elif isinstance(msg, proto.ParamValue):
            try:
                fw.params.set(msg.name, msg.value)
                status = proto.ACK_OK
            except TypeError:
                status = proto.ACK_BAD_VALUE
            except ParamError:
                status = proto.ACK_UNKNOWN_PARAM
            self.send(proto.Ack(msg.msg_id, status))
        elif isinstance(msg, proto.EchoRequest):
            self.send(proto.EchoReply(msg.data))
        return None

    def step(self, dt: float) -> np.ndarray:
        board = self.board
        offboard = None
        for msg in self.decoder.feed(board.serial_read()):
            cmd = self.handle(msg)
            if cmd is not None:
                offboard = cmd
        imu = board.read_imu()
        out = self.fw.tick(dt, board.read_rc(), offboard, imu)
        board.write_outputs(out)
        now = board.clock()
        if self.stream_imu and imu is not None:
            self.send(proto.ImuData(imu.t, imu.accel, imu.gyro))
        if self.heartbeat_period and now >= self._next_heartbeat:
            self.send(proto.Heartbeat())
            self._next_heartbeat = now + self.heartbeat_period
        return out
