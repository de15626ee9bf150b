"""Control allocation: tau = pinv(M) @ u over 6 inputs and 10 output channels.

Mixers are stored in "parameter layout": ``matrix[r, c]`` couples input ``r``
(Fx, Fy, Fz, Qx, Qy, Qz) with output channel ``c``. For a forward mixer that
is M itself; for an inverse-stored mixer it is the transpose of M-dagger.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .motor import Environment, MotorDescriptor, omega_to_throttle, simplified_mixer_column

log = logging.getLogger(__name__)

N_INPUTS = 6
N_OUTPUTS = 10
FORCE_COLS = slice(0, 3)
TORQUE_COLS = slice(3, 6)

PREDEFINED = ("quadrotor_x", "hexarotor_x", "fixedwing_standard", "fixedwing_vtail", "passthrough")


class InvalidMatrixError(ValueError):
    pass


class UnknownMixerError(KeyError):
    pass


class MixerValidationError(ValueError):
    def __init__(self, message: str, params: Sequence[str] = ()):
        super().__init__(message)
        self.params = list(params)


class ChannelKind(enum.IntEnum):
    MOTOR = 0
    SERVO = 1
    GPIO = 2
    AUX = 3


class StoredAs(enum.Enum):
    FORWARD_M = "forward_M"
    INVERSE_MDAGGER = "inverse_Mdagger"


@dataclass(frozen=True)
class OutputChannelConfig:
    kind: ChannelKind
    rate: int

    def __post_init__(self):
        if int(self.rate) <= 0:
            raise ValueError(f"channel rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class OverrideState:
    attitude_override: bool = False
    throttle_override: bool = False
    offboard_active: bool = False


def pseudoinverse(M, sv_tolerance: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values at or below ``sv_tolerance`` are treated as zero. The
    default tolerance is ``sigma_max * 64 * eps``. Subnormal singular values
    are always dropped since their reciprocals overflow.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise InvalidMatrixError(f"expected a 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidMatrixError("matrix contains non-finite entries")
    if sv_tolerance is not None and sv_tolerance < 0:
        raise ValueError("sv_tolerance must be >= 0")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if sv_tolerance is None:
        sv_tolerance = (s[0] if s.size else 0.0) * 64 * np.finfo(float).eps
    keep = s > max(sv_tolerance, np.finfo(float).tiny)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MixerConfig:
    name: str
    matrix: np.ndarray  # 6 x 10, parameter layout
    stored_as: StoredAs
    channels: tuple[OutputChannelConfig, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (N_INPUTS, N_OUTPUTS):
            raise InvalidMatrixError(f"mixer matrix must be 6x10, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidMatrixError(f"mixer {self.name!r} has non-finite entries")
        if len(self.channels) != N_OUTPUTS:
            raise InvalidMatrixError("mixer needs exactly 10 channel headers")
        object.__setattr__(self, "matrix", _readonly(m))
        object.__setattr__(self, "channels", tuple(self.channels))
        # eager so a forward mixer is inverted exactly once, at load
        _ = self.inverse

    @cached_property
    def inverse(self) -> np.ndarray:
        """M-dagger, 10 x 6."""
        if self.stored_as is StoredAs.INVERSE_MDAGGER:
            return _readonly(self.matrix.T)
        return _readonly(pseudoinverse(self.matrix))

    @cached_property
    def forward(self) -> np.ndarray:
        """M, 6 x 10."""
        if self.stored_as is StoredAs.FORWARD_M:
            return self.matrix
        return _readonly(pseudoinverse(self.inverse))

    @property
    def kinds(self) -> tuple[ChannelKind, ...]:
        return tuple(ch.kind for ch in self.channels)

    def motor_channels(self) -> list[int]:
        return [i for i, ch in enumerate(self.channels) if ch.kind is ChannelKind.MOTOR]


def mix(mixer: MixerConfig, u) -> np.ndarray:
    """Raw actuator commands ``tau = M-dagger @ u``; no saturation here."""
    u = np.asarray(u, dtype=float)
    if u.shape != (N_INPUTS,):
        raise ValueError(f"control input must have 6 entries, got shape {u.shape}")
    return mixer.inverse @ u


def blend_mixers(primary: MixerConfig, secondary: MixerConfig | None, ov: OverrideState) -> MixerConfig:
    """Effective mixer under RC overrides.

    Columns of M-dagger are picked per input group: force columns from the
    primary iff throttle override, torque columns from the primary iff
    attitude override, everything from the primary when offboard is inactive.
    Headers always come from the primary.
    """
    if secondary is None:
        secondary = primary
    if not ov.offboard_active or (ov.attitude_override and ov.throttle_override):
        src_f = src_q = primary
    else:
        src_f = primary if ov.throttle_override else secondary
        src_q = primary if ov.attitude_override else secondary
    if src_f is src_q and src_f.channels == primary.channels:
        return src_f
    inv = np.empty((N_OUTPUTS, N_INPUTS))
    inv[:, FORCE_COLS] = src_f.inverse[:, FORCE_COLS]
    inv[:, TORQUE_COLS] = src_q.inverse[:, TORQUE_COLS]
    return MixerConfig(f"blend({src_f.name},{src_q.name})", inv.T, StoredAs.INVERSE_MDAGGER, primary.channels)


# ---------------------------------------------------------------------------
# predefined mixers

MOTOR_RATE = 490
SERVO_RATE = 50


def _headers(kinds: Sequence[ChannelKind]) -> tuple[OutputChannelConfig, ...]:
    kinds = list(kinds) + [ChannelKind.AUX] * (N_OUTPUTS - len(kinds))
    return tuple(
        OutputChannelConfig(k, MOTOR_RATE if k is ChannelKind.MOTOR else SERVO_RATE) for k in kinds
    )


def _multirotor(name: str, thetas_deg: Sequence[float], dirs: Sequence[int]) -> MixerConfig:
    M = np.zeros((N_INPUTS, N_OUTPUTS))
    for i, (th, d) in enumerate(zip(thetas_deg, dirs)):
        M[:, i] = simplified_mixer_column(math.radians(th), d)
    return MixerConfig(name, M, StoredAs.FORWARD_M, _headers([ChannelKind.MOTOR] * len(dirs)))


def _inverse_stored(name: str, inv_rows: Mapping[int, Sequence[float]], kinds) -> MixerConfig:
    inv = np.zeros((N_OUTPUTS, N_INPUTS))
    for out, row in inv_rows.items():
        inv[out, : len(row)] = row
    return MixerConfig(name, inv.T, StoredAs.INVERSE_MDAGGER, _headers(kinds))


def load_predefined(name: str) -> MixerConfig:
    """Hard-coded mixer by name.

    Multirotors use the simplified geometric columns; fixed-wing mixers are
    given directly as M-dagger with inputs (aileron, elevator, rudder,
    throttle) in slots 0..3.
    """
    S, M_ = ChannelKind.SERVO, ChannelKind.MOTOR
    if name == "quadrotor_x":
        return _multirotor(name, [45, 135, 225, 315], [1, -1, 1, -1])
    if name == "hexarotor_x":
        return _multirotor(name, [30, 90, 150, 210, 270, 330], [1, -1, 1, -1, 1, -1])
    if name == "fixedwing_vtail":
        # outputs: aileron, left ruddervator, right ruddervator, throttle
        rows = {0: [1, 0, 0, 0], 1: [0, -0.5, 0.5, 0], 2: [0, 0.5, 0.5, 0], 3: [0, 0, 0, 1]}
        return _inverse_stored(name, rows, [S, S, S, M_])
    if name == "fixedwing_standard":
        # outputs: aileron, elevator, throttle, rudder
        rows = {0: [1, 0, 0, 0], 1: [0, 1, 0, 0], 2: [0, 0, 0, 1], 3: [0, 0, 1, 0]}
        return _inverse_stored(name, rows, [S, S, M_, S])
    if name == "passthrough":
        rows = {i: [1.0 if j == i else 0.0 for j in range(N_INPUTS)] for i in range(N_INPUTS)}
        return _inverse_stored(name, rows, [S] * N_INPUTS)
    raise UnknownMixerError(name)


# ---------------------------------------------------------------------------
# custom mixers from parameters

def matrix_param(prefix: str, r: int, c: int) -> str:
    return f"MIX_{prefix}_{r}_{c}"


def header_params(prefix: str, c: int) -> tuple[str, str]:
    return f"MIX_{prefix}_OUT{c}_TYPE", f"MIX_{prefix}_OUT{c}_RATE"


def stored_param(prefix: str) -> str:
    return f"MIX_{prefix}_STORED"


DEFAULT_MATRIX_VALUE = 0.0
DEFAULT_TYPE = int(ChannelKind.AUX)
DEFAULT_RATE = SERVO_RATE


def custom_params(mixer: MixerConfig, prefix: str = "PRI") -> dict[str, float | int]:
    """Inverse of :func:`load_custom`: encode a mixer as its 80 (+1) parameters."""
    out: dict[str, float | int] = {}
    for r in range(N_INPUTS):
        for c in range(N_OUTPUTS):
            out[matrix_param(prefix, r, c)] = float(mixer.matrix[r, c])
    for c, ch in enumerate(mixer.channels):
        t, rate = header_params(prefix, c)
        out[t] = int(ch.kind)
        out[rate] = int(ch.rate)
    out[stored_param(prefix)] = 1 if mixer.stored_as is StoredAs.INVERSE_MDAGGER else 0
    return out


def load_custom(params: Mapping[str, float | int], prefix: str = "PRI", name: str = "custom") -> MixerConfig:
    """Build a mixer from ``MIX_{prefix}_*`` parameters.

    Missing parameters take the module defaults and are reported with a
    warning. ``MIX_{prefix}_STORED`` selects forward (0, default) or inverse (1)
    interpretation of the matrix parameters.
    """
    missing: list[str] = []
    bad: list[str] = []

    def get(key, default):
        if key not in params:
            missing.append(key)
            return default
        return params[key]

    M = np.empty((N_INPUTS, N_OUTPUTS))
    for r in range(N_INPUTS):
        for c in range(N_OUTPUTS):
            key = matrix_param(prefix, r, c)
            try:
                v = float(get(key, DEFAULT_MATRIX_VALUE))
            except (TypeError, ValueError):
                v = math.nan
            if not math.isfinite(v):
                bad.append(key)
            M[r, c] = v

    channels = []
    for c in range(N_OUTPUTS):
        tkey, rkey = header_params(prefix, c)
        kind = get(tkey, DEFAULT_TYPE)
        rate = get(rkey, DEFAULT_RATE)
        try:
            kind = ChannelKind(int(kind))
        except (TypeError, ValueError):
            bad.append(tkey)
            kind = ChannelKind.AUX
        try:
            rate_ok = float(rate) > 0 and float(rate) == int(rate)
        except (TypeError, ValueError, OverflowError):
            rate_ok = False
        if not rate_ok:
            bad.append(rkey)
            rate = DEFAULT_RATE
        channels.append(OutputChannelConfig(kind, int(rate)))

    skey = stored_param(prefix)
    stored = get(skey, 0)
    if stored not in (0, 1):
        bad.append(skey)
    missing = [k for k in missing if k != skey]
    if bad:
        raise MixerValidationError(f"invalid mixer parameters: {', '.join(bad)}", bad)
    if missing:
        log.warning("custom mixer %s: %d parameters missing, using defaults: %s",
                    prefix, len(missing), ", ".join(missing))
    stored_as = StoredAs.INVERSE_MDAGGER if stored == 1 else StoredAs.FORWARD_M
    return MixerConfig(name, M, stored_as, tuple(channels))


# ---------------------------------------------------------------------------
# output post-processing

def output_stage(
    tau,
    mixer: MixerConfig,
    motors: Sequence[MotorDescriptor] = (),
    use_motor_param: bool = False,
    aux_values=None,
    env: Environment = Environment(),
) -> np.ndarray:
    """Turn raw mixer outputs into final channel commands.

    ``motors`` lists one descriptor per motor channel in ascending channel
    order (only consulted when ``use_motor_param``). Motor channels end in
    [0, 1], servos in [-1, 1]; gpio/aux channels carry ``aux_values``.
    """
    tau = np.asarray(tau, dtype=float)
    out = np.zeros(N_OUTPUTS)
    aux = np.zeros(N_OUTPUTS) if aux_values is None else np.asarray(aux_values, dtype=float)
    motor_idx = 0
    for c, ch in enumerate(mixer.channels):
        kind = ch.kind
        if kind is ChannelKind.MOTOR:
            v = tau[c]
            if use_motor_param:
                m = motors[motor_idx]
                omega = math.sqrt(max(0.0, v)) if math.isfinite(v) else 0.0
                v = omega_to_throttle(omega, m.motor, m.prop, env.rho)
            motor_idx += 1
            out[c] = min(max(v, 0.0), 1.0) if math.isfinite(v) else 0.0
        elif kind is ChannelKind.SERVO:
            v = tau[c]
            out[c] = min(max(v, -1.0), 1.0) if math.isfinite(v) else 0.0
        else:
            out[c] = aux[c]
    return out


def moore_penrose_residuals(M, P) -> dict[str, float]:
    """Relative residuals of the four Moore-Penrose conditions for ``P ~ pinv(M)``.

    Each is ``||lhs - rhs||_inf / max(||rhs||_inf, tiny)`` so physically scaled
    mixers (entries ~1e-5) and unit mixers report comparable numbers.
    """
    M = np.asarray(M, dtype=float)
    P = np.asarray(P, dtype=float)
    MP = M @ P
    PM = P @ M

    def rel(lhs, rhs):
        scale = max(float(np.linalg.norm(rhs, np.inf)), np.finfo(float).tiny)
        return float(np.linalg.norm(lhs - rhs, np.inf)) / scale

    return {
        "MPM=M": rel(MP @ M, M),
        "PMP=P": rel(PM @ P, P),
        "(MP)^T=MP": rel(MP.T, MP),
        "(PM)^T=PM": rel(PM.T, PM),
    }


def rank(M, tol: float | None = None) -> int:
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if not s.size or s[0] == 0:
        return 0
    if tol is None:
        tol = s[0] * 64 * np.finfo(float).eps
    return int(np.sum(s > tol))
