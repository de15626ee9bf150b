"""Scenario files (YAML) and motor parameter files."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from ..companion import PROGRAMS, CompanionGains, OffboardProgram
from ..motor import Environment, MotorDescriptor, MotorGeometry, MotorParams, PropellerParams
from .dynamics import MassProperties
from .forces import Vehicle
from .rc import RcKeyframe, RcScript
from .sensors import SensorNoise

BUNDLED = ("quad_triangle_roll", "quad_step_roll", "quad_hover_estimate", "quad_override_toggle")

MOTOR_FIELDS = ("r", "e_hat", "d", "theta", "C_T", "C_Q", "D", "R", "K_Q", "K_V", "i0", "V_max")


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<scenario>"):
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    vehicle: Vehicle
    duration: float
    seed: int = 0
    dynamics_rate: int = 400
    offboard_rate: int = 400
    primary_mixer: str = "general"
    secondary_mixer: str | None = None
    use_motor_param: bool = True
    params: dict = field(default_factory=dict)
    rc: RcScript = field(default_factory=RcScript)
    program: OffboardProgram | None = None
    companion_gains: CompanionGains = field(default_factory=CompanionGains)
    companion_use_estimate: bool = False
    thrust_sign: float = -1.0
    sensors: SensorNoise = field(default_factory=SensorNoise)
    firmware_truth_attitude: bool = True
    initial_p: tuple[float, float, float] = (0.0, 0.0, -10.0)
    initial_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    serial_delay: float = 0.0  # s, each way

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.dynamics_rate <= 0 or self.offboard_rate <= 0:
            raise ValueError("rates must be positive")
        if self.dynamics_rate % self.offboard_rate:
            raise ValueError("offboard rate must divide the dynamics rate")

    @property
    def divider(self) -> int:
        return self.dynamics_rate // self.offboard_rate


# ---------------------------------------------------------------------------
# line-aware YAML helpers


class _Doc:
    def __init__(self, text: str, source: str):
        self.source = source
        try:
            self.node = yaml.compose(text)
            self.data = yaml.safe_load(text)
        except yaml.MarkedYAMLError as exc:
            mark = exc.problem_mark
            raise ScenarioError(f"YAML parse error: {exc.problem}", mark.line + 1 if mark else None,
                                source) from None

    def line(self, *path) -> int | None:
        node = self.node
        last = node.start_mark.line + 1 if node is not None else None
        for key in path:
            if isinstance(node, yaml.MappingNode):
                for k, v in node.value:
                    if k.value == key:
                        node = v
                        last = k.start_mark.line + 1
                        break
                else:
                    return last
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                node = node.value[key]
                last = node.start_mark.line + 1
            else:
                return last
        return last

    def error(self, msg: str, *path) -> ScenarioError:
        return ScenarioError(msg, self.line(*path), self.source)


def _num(doc: _Doc, d: dict, key: str, path: tuple, default=None, positive=False, integer=False):
    if key not in d:
        if default is None:
            raise doc.error(f"missing required field '{key}'", *path)
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise doc.error(f"'{key}' must be a number, got {v!r}", *path, key)
    if integer and int(v) != v:
        raise doc.error(f"'{key}' must be an integer", *path, key)
    if not math.isfinite(v) or (positive and v <= 0):
        raise doc.error(f"'{key}' must be {'positive' if positive else 'finite'}", *path, key)
    return int(v) if integer else float(v)


def _vec(doc: _Doc, v, n: int, path: tuple):
    if not isinstance(v, (list, tuple)) or len(v) != n or not all(
            isinstance(c, (int, float)) and not isinstance(c, bool) for c in v):
        raise doc.error(f"expected a list of {n} numbers", *path)
    return tuple(float(c) for c in v)


def _motor(doc: _Doc, rec: dict, defaults: dict, path: tuple, index: int) -> MotorDescriptor:
    if not isinstance(rec, dict):
        raise doc.error("motor record must be a mapping", *path)
    m = {**defaults, **rec}
    unknown = set(m) - set(MOTOR_FIELDS) - {"channel", "theta_deg", "arm"}
    if unknown:
        raise doc.error(f"unknown motor fields: {', '.join(sorted(unknown))}", *path)
    if "theta_deg" in m:
        m["theta"] = math.radians(m.pop("theta_deg"))
    theta = _num(doc, m, "theta", path, default=0.0)
    if "r" not in m:
        if "arm" not in m:
            raise doc.error("motor needs 'r' or 'arm'", *path)
        arm = _num(doc, m, "arm", path, positive=True)
        m["r"] = [arm * math.cos(theta), arm * math.sin(theta), 0.0]
    try:
        geom = MotorGeometry(
            r=_vec(doc, m["r"], 3, path + ("r",)),
            e_hat=_vec(doc, m.get("e_hat", [0.0, 0.0, -1.0]), 3, path + ("e_hat",)),
            d=int(_num(doc, m, "d", path, default=1, integer=True)),
            theta=theta,
        )
        prop = PropellerParams(*(_num(doc, m, k, path) for k in ("C_T", "C_Q", "D")))
        motor = MotorParams(*(_num(doc, m, k, path) for k in ("R", "K_Q", "K_V", "i0", "V_max")))
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise doc.error(str(exc), *path) from None
    channel = int(_num(doc, m, "channel", path, default=index, integer=True))
    return MotorDescriptor(geom, prop, motor, channel)


def _motors(doc: _Doc, recs, defaults, path) -> list[MotorDescriptor]:
    if not isinstance(recs, list) or not recs:
        raise doc.error("'motors' must be a non-empty list", *path)
    return [_motor(doc, r, defaults, path + (i,), i) for i, r in enumerate(recs)]


def load_motor_file(path: str | Path) -> list[MotorDescriptor]:
    """Motor parameter file: YAML with ``motors: [...]`` and optional ``defaults: {...}``."""
    path = Path(path)
    doc = _Doc(path.read_text(), str(path))
    data = doc.data
    if isinstance(data, list):
        data = {"motors": data}
    if not isinstance(data, dict):
        raise doc.error("motor file must be a mapping or a list")
    return _motors(doc, data.get("motors"), data.get("defaults", {}) or {}, ("motors",))


def parse_scenario(text: str, source: str = "<scenario>", base_dir: Path | None = None) -> ScenarioConfig:
    doc = _Doc(text, source)
    d = doc.data
    if not isinstance(d, dict):
        raise doc.error("scenario must be a mapping")
    known = {"name", "duration", "seed", "rates", "vehicle", "initial", "mixers", "params", "rc",
             "offboard", "companion", "sensors", "firmware", "serial"}
    for k in d:
        if k not in known:
            raise doc.error(f"unknown top-level key '{k}'", k)

    duration = _num(doc, d, "duration", (), positive=True)
    seed = _num(doc, d, "seed", (), default=0, integer=True)
    rates = d.get("rates", {}) or {}
    dyn_rate = _num(doc, rates, "dynamics", ("rates",), default=400, positive=True, integer=True)
    off_rate = _num(doc, rates, "offboard", ("rates",), default=400, positive=True, integer=True)
    if dyn_rate % off_rate:
        raise doc.error("offboard rate must divide the dynamics rate", "rates")

    v = d.get("vehicle")
    if not isinstance(v, dict):
        raise doc.error("missing 'vehicle' mapping", "vehicle")
    mass = _num(doc, v, "mass", ("vehicle",), positive=True)
    inertia = v.get("inertia")
    if not isinstance(inertia, list) or len(inertia) != 3:
        raise doc.error("'inertia' must be a 3x3 list", "vehicle", "inertia")
    J = tuple(_vec(doc, row, 3, ("vehicle", "inertia", i)) for i, row in enumerate(inertia))
    env_d = v.get("environment", {}) or {}
    try:
        env = Environment(_num(doc, env_d, "rho", ("vehicle",), default=1.225),
                          _num(doc, env_d, "g", ("vehicle",), default=9.80665))
        body = MassProperties(mass, J, env.g)
    except ValueError as exc:
        raise doc.error(str(exc), "vehicle") from None
    if "motor_file" in v:
        mf = Path(v["motor_file"])
        if not mf.is_absolute() and base_dir is not None:
            mf = base_dir / mf
        motors = load_motor_file(mf)
    else:
        motors = _motors(doc, v.get("motors"), v.get("motor_defaults", {}) or {}, ("vehicle", "motors"))
    try:
        vehicle = Vehicle(body, tuple(motors), _num(doc, v, "drag", ("vehicle",), default=0.0),
                          _num(doc, v, "motor_tau", ("vehicle",), default=0.0), env)
    except ValueError as exc:
        raise doc.error(str(exc), "vehicle") from None

    init = d.get("initial", {}) or {}
    p0 = _vec(doc, init.get("p", [0.0, 0.0, -10.0]), 3, ("initial", "p"))
    rpy = tuple(math.radians(a) for a in _vec(doc, init.get("rpy_deg", [0, 0, 0]), 3, ("initial", "rpy_deg")))

    mx = d.get("mixers", {}) or {}
    primary = mx.get("primary", "general")
    secondary = mx.get("secondary")
    use_motor = bool(mx.get("use_motor_param", primary == "general"))

    params = d.get("params", {}) or {}
    if not isinstance(params, dict):
        raise doc.error("'params' must be a mapping", "params")

    frames = []
    rc = d.get("rc", []) or []
    if not isinstance(rc, list):
        raise doc.error("'rc' must be a list of keyframes", "rc")
    for i, f in enumerate(rc):
        if not isinstance(f, dict) or "t" not in f:
            raise doc.error("rc keyframe needs a 't' field", "rc", i)
        try:
            frames.append(RcKeyframe(**f))
        except TypeError as exc:
            raise doc.error(f"bad rc keyframe: {exc}", "rc", i) from None

    program = None
    off = d.get("offboard")
    if off:
        kind = off.get("program", "hover")
        if kind not in PROGRAMS:
            raise doc.error(f"unknown offboard program '{kind}'", "offboard", "program")
        try:
            program = OffboardProgram(
                kind=kind,
                amplitude=math.radians(float(off.get("amplitude_deg", 0.0))),
                period=float(off.get("period", 4.0)),
                rate=float(off_rate),
                mode=off.get("mode", "passthrough"),
                start=float(off.get("start", 0.0)),
                script=tuple(tuple(math.radians(a) if j else a for j, a in enumerate(s))
                             for s in off.get("script", [])),
            )
        except (ValueError, TypeError) as exc:
            raise doc.error(str(exc), "offboard") from None

    comp = d.get("companion", {}) or {}
    gains_d = comp.get("gains", {}) or {}
    try:
        gains = CompanionGains(**{k: float(x) for k, x in gains_d.items()})
    except TypeError as exc:
        raise doc.error(f"bad companion gains: {exc}", "companion", "gains") from None

    sens = d.get("sensors", {}) or {}
    try:
        noise = SensorNoise(
            gyro_sigma=float(sens.get("gyro_sigma", 0.0)),
            accel_sigma=float(sens.get("accel_sigma", 0.0)),
            gyro_bias=tuple(sens.get("gyro_bias", (0.0, 0.0, 0.0))),
            accel_bias=tuple(sens.get("accel_bias", (0.0, 0.0, 0.0))),
        )
    except (TypeError, ValueError) as exc:
        raise doc.error(f"bad sensors block: {exc}", "sensors") from None

    fw = d.get("firmware", {}) or {}
    serial = d.get("serial", {}) or {}
    return ScenarioConfig(
        name=str(d.get("name", Path(source).stem)),
        vehicle=vehicle,
        duration=duration,
        seed=seed,
        dynamics_rate=dyn_rate,
        offboard_rate=off_rate,
        primary_mixer=primary,
        secondary_mixer=secondary,
        use_motor_param=use_motor,
        params=dict(params),
        rc=RcScript(frames),
        program=program,
        companion_gains=gains,
        companion_use_estimate=bool(comp.get("use_estimate", False)),
        thrust_sign=float(comp.get("thrust_sign", -1.0 if use_motor else 1.0)),
        sensors=noise,
        firmware_truth_attitude=bool(fw.get("truth_attitude", True)),
        initial_p=p0,
        initial_rpy=rpy,
        serial_delay=float(serial.get("delay_ms", 0.0)) / 1e3,
    )


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("flightbench") / "scenarios" / f"{name}.yaml"))


def load_scenario(path_or_name: str | Path, **overrides: Any) -> ScenarioConfig:
    """Load a scenario by file path or bundled name; keyword overrides replace fields."""
    p = Path(path_or_name)
    if not p.exists() and str(path_or_name) in BUNDLED:
        p = bundled_path(str(path_or_name))
    if not p.exists():
        raise ScenarioError(f"no such scenario file or bundled scenario: {path_or_name}", None, str(path_or_name))
    cfg = parse_scenario(p.read_text(), str(p), p.parent)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg
