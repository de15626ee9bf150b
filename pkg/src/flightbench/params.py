"""Typed parameter store with defaults, revision counter and text dump/load."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from .allocation import (
    DEFAULT_RATE,
    DEFAULT_TYPE,
    N_INPUTS,
    N_OUTPUTS,
    PREDEFINED,
    header_params,
    matrix_param,
    stored_param,
)

Value = Union[int, float, str]

MIXER_CHOICES = PREDEFINED + ("custom",)
UNSET = "unset"


class ParamError(KeyError):
    pass


class UnknownParamError(ParamError):
    pass


class ParamTypeError(ParamError, TypeError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: type
    default: Value
    choices: tuple[str, ...] | None = None
    doc: str = ""


def _specs() -> list[ParamSpec]:
    s = [
        ParamSpec("PRIMARY_MIXER", str, "quadrotor_x", MIXER_CHOICES, "mixer used by the RC pilot"),
        ParamSpec("SECONDARY_MIXER", str, UNSET, MIXER_CHOICES + (UNSET,),
                  "mixer used by the companion; 'unset' copies the primary"),
        ParamSpec("USE_MOTOR_PARAM", int, 0, doc="1: motor-channel mixer outputs are omega^2"),
        ParamSpec("SERIAL_ECHO", int, 0, doc="1: echo every offboard command back"),
        ParamSpec("OFFBOARD_TIMEOUT", float, 0.1, doc="s before an offboard stream is stale"),
        ParamSpec("RC_ATT_DEADBAND", float, 0.05, doc="stick deflection that grabs attitude"),
        ParamSpec("ARM_THR_MAX", float, 0.05, doc="throttle must be below this to arm"),
        ParamSpec("FILTER_ALPHA", float, 0.02, doc="complementary filter accel blend per update"),
        ParamSpec("RC_MAX_ANGLE", float, math.radians(30.0)),
        ParamSpec("RC_MAX_YAWRATE", float, math.radians(90.0)),
        ParamSpec("THR_SCALE", float, 1.0, doc="Fz = throttle * THR_SCALE (sign per mixer family)"),
        ParamSpec("TORQUE_LIMIT", float, 1.0, doc="saturation of each torque output"),
        ParamSpec("ROLL_ANGLE_P", float, 10.0),
        ParamSpec("PITCH_ANGLE_P", float, 10.0),
        ParamSpec("ROLL_RATE_P", float, 0.6),
        ParamSpec("ROLL_RATE_I", float, 0.3),
        ParamSpec("ROLL_RATE_D", float, 0.0),
        ParamSpec("PITCH_RATE_P", float, 0.6),
        ParamSpec("PITCH_RATE_I", float, 0.3),
        ParamSpec("PITCH_RATE_D", float, 0.0),
        ParamSpec("YAW_RATE_P", float, 0.3),
        ParamSpec("YAW_RATE_I", float, 0.1),
        ParamSpec("YAW_RATE_D", float, 0.0),
        ParamSpec("RATE_I_LIMIT", float, 0.2, doc="integrator clamp, torque units"),
    ]
    for prefix in ("PRI", "SEC"):
        for r in range(N_INPUTS):
            for c in range(N_OUTPUTS):
                s.append(ParamSpec(matrix_param(prefix, r, c), float, 0.0))
        for c in range(N_OUTPUTS):
            t, rate = header_params(prefix, c)
            s.append(ParamSpec(t, int, DEFAULT_TYPE))
            s.append(ParamSpec(rate, int, DEFAULT_RATE))
        s.append(ParamSpec(stored_param(prefix), int, 0, doc="0: forward M, 1: M-dagger"))
    return s


SPECS: dict[str, ParamSpec] = {p.name: p for p in _specs()}

MIXER_PARAMS = frozenset(
    n for n in SPECS if n.startswith("MIX_") or n in ("PRIMARY_MIXER", "SECONDARY_MIXER", "USE_MOTOR_PARAM")
)


def coerce(spec: ParamSpec, value) -> Value:
    """Validate ``value`` against ``spec``; ints widen to floats, nothing else converts."""
    if spec.type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParamTypeError(f"{spec.name} expects a real, got {value!r}")
        return float(value)
    if spec.type is int:
        if isinstance(value, bool):
            return int(value)
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ParamTypeError(f"{spec.name} expects an integer, got {value!r}")
        return value
    if not isinstance(value, str):
        raise ParamTypeError(f"{spec.name} expects one of {spec.choices}, got {value!r}")
    if spec.choices and value not in spec.choices:
        raise ParamTypeError(f"{spec.name} must be one of {spec.choices}, got {value!r}")
    return value


def parse_text(spec: ParamSpec, text: str) -> Value:
    if spec.type is float:
        return float(text)
    if spec.type is int:
        return int(text)
    return text


class ParamStore:
    def __init__(self, values: dict[str, Value] | None = None):
        self._values: dict[str, Value] = {n: p.default for n, p in SPECS.items()}
        self.revision = 0
        self._mixer_revision = 0
        if values:
            self.update(values)

    def get(self, name: str) -> Value:
        try:
            return self._values[name]
        except KeyError:
            raise UnknownParamError(f"unknown parameter {name}") from None

    def set(self, name: str, value) -> Value:
        spec = SPECS.get(name)
        if spec is None:
            raise UnknownParamError(f"unknown parameter {name}")
        v = coerce(spec, value)
        self._values[name] = v
        self.revision += 1
        if name in MIXER_PARAMS:
            self._mixer_revision = self.revision
        return v

    def update(self, values) -> None:
        for k, v in dict(values).items():
            self.set(k, v)

    __getitem__ = get

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def items(self):
        return self._values.items()

    @property
    def mixer_revision(self) -> int:
        return self._mixer_revision

    def view(self) -> dict[str, Value]:
        return dict(self._values)

    def dump(self) -> str:
        return "".join(f"{n} {_fmt(v)}\n" for n, v in self._values.items())

    def load(self, lines: Iterable[str]) -> None:
        """Apply ``name value`` lines; blank lines and ``#`` comments are skipped."""
        for lineno, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParamError(f"line {lineno}: expected 'name value', got {line!r}")
            name, text = parts
            spec = SPECS.get(name)
            if spec is None:
                raise UnknownParamError(f"line {lineno}: unknown parameter {name}")
            try:
                self.set(name, parse_text(spec, text))
            except ValueError as exc:
                raise ParamTypeError(f"line {lineno}: {exc}") from None


def _fmt(v: Value) -> str:
    return repr(v) if isinstance(v, float) else str(v)
