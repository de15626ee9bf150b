"""Motor and propeller model.

Per-motor thrust/torque, general-form mixing columns built from geometry and
propeller coefficients, the simplified geometric columns used by the
predefined multirotor mixers, and the steady-state voltage/throttle maps.

Sign convention: ``d = +1`` means the propeller's drag reaction torque acts
along ``-e_hat``. For an upward-thrusting motor in NED (``e_hat = -k``) that is
a positive body yaw torque, which is what the simplified column's last entry
encodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FOUR_PI_SQ = 4.0 * math.pi**2


@dataclass(frozen=True)
class MotorGeometry:
    r: tuple[float, float, float]
    e_hat: tuple[float, float, float] = (0.0, 0.0, -1.0)
    d: int = 1
    theta: float = 0.0  # rad from body +x

    def __post_init__(self):
        e = np.asarray(self.e_hat, dtype=float)
        if e.shape != (3,) or abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValueError(f"e_hat must be a unit 3-vector, got {self.e_hat}")
        if self.d not in (-1, 1):
            raise ValueError(f"spin direction must be -1 or +1, got {self.d}")
        if len(self.r) != 3:
            raise ValueError("r must be a 3-vector")

    @classmethod
    def planar(cls, arm: float, theta: float, d: int) -> MotorGeometry:
        """Upward-thrusting motor at distance ``arm`` and angle ``theta`` in the body xy-plane."""
        return cls(r=(arm * math.cos(theta), arm * math.sin(theta), 0.0), d=d, theta=theta)


@dataclass(frozen=True)
class PropellerParams:
    C_T: float
    C_Q: float
    D: float

    def __post_init__(self):
        if not (self.C_T > 0 and self.C_Q > 0 and self.D > 0):
            raise ValueError("propeller coefficients and diameter must be positive")


@dataclass(frozen=True)
class MotorParams:
    R: float
    K_Q: float
    K_V: float
    i0: float
    V_max: float

    def __post_init__(self):
        if min(self.R, self.K_Q, self.K_V, self.i0, self.V_max) <= 0:
            raise ValueError("motor parameters must be strictly positive")


@dataclass(frozen=True)
class Environment:
    rho: float = 1.225
    g: float = 9.80665

    def __post_init__(self):
        if self.rho <= 0 or self.g <= 0:
            raise ValueError("rho and g must be positive")


@dataclass(frozen=True)
class MotorDescriptor:
    """Everything known about one motor channel."""

    geometry: MotorGeometry
    prop: PropellerParams
    motor: MotorParams
    channel: int = field(default=-1)


def thrust_coefficient(prop: PropellerParams, rho: float) -> float:
    """Thrust per unit omega squared, ``C_T rho D^4 / 4pi^2``."""
    return prop.C_T * rho * prop.D**4 / FOUR_PI_SQ


def drag_torque_coefficient(prop: PropellerParams, rho: float) -> float:
    """Propeller drag torque per unit omega squared, ``C_Q rho D^5 / 4pi^2``."""
    return prop.C_Q * rho * prop.D**5 / FOUR_PI_SQ


def thrust_torque(omega: float, geom: MotorGeometry, prop: PropellerParams, rho: float):
    """Body force and torque produced by one motor spinning at ``omega`` rad/s."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    e = np.asarray(geom.e_hat, dtype=float)
    w2 = omega * omega
    F = thrust_coefficient(prop, rho) * w2 * e
    Q = np.cross(np.asarray(geom.r, dtype=float), F) - drag_torque_coefficient(prop, rho) * w2 * geom.d * e
    return F, Q


def general_mixer_column(geom: MotorGeometry, prop: PropellerParams, rho: float) -> np.ndarray:
    """Column mapping omega^2 of one motor to its [F; Q] contribution."""
    e = np.asarray(geom.e_hat, dtype=float)
    r = np.asarray(geom.r, dtype=float)
    torque_dir = np.cross(r, e) - (prop.C_Q * prop.D * geom.d / prop.C_T) * e
    return thrust_coefficient(prop, rho) * np.concatenate([e, torque_dir])


def general_mixer(motors, rho: float, n_outputs: int = 10) -> np.ndarray:
    """6 x n forward mixing matrix from a list of MotorDescriptors.

    A motor with ``channel >= 0`` lands in that column, otherwise motors fill
    columns in list order.
    """
    M = np.zeros((6, n_outputs))
    for i, m in enumerate(motors):
        col = m.channel if m.channel >= 0 else i
        M[:, col] = general_mixer_column(m.geometry, m.prop, rho)
    return M


def simplified_mixer_column(theta: float, d: int) -> np.ndarray:
    return np.array([0.0, 0.0, 1.0, -math.sin(theta), math.cos(theta), float(d)])


def omega_to_voltage(omega: float, motor: MotorParams, prop: PropellerParams, rho: float) -> float:
    """Steady-state input voltage that holds the motor at ``omega``."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    a = motor.R * drag_torque_coefficient(prop, rho) / motor.K_Q
    return a * omega * omega + motor.i0 * motor.R + motor.K_V * omega


def omega_to_throttle(omega: float, motor: MotorParams, prop: PropellerParams, rho: float) -> float:
    v = omega_to_voltage(omega, motor, prop, rho)
    return min(max(v / motor.V_max, 0.0), 1.0)


def throttle_to_omega(delta: float, motor: MotorParams, prop: PropellerParams, rho: float) -> float:
    """Inverse of the steady-state voltage map; 0 below the no-load intercept."""
    c = delta * motor.V_max - motor.i0 * motor.R
    if c <= 0:
        return 0.0
    a = motor.R * drag_torque_coefficient(prop, rho) / motor.K_Q
    # positive root of a w^2 + K_V w - c = 0, cancellation-free form
    return 2.0 * c / (motor.K_V + math.sqrt(motor.K_V**2 + 4.0 * a * c))


def motor_torque(v_in: float, omega: float, motor: MotorParams) -> float:
    """Electrical torque ``K_Q((V - K_V w)/R - i0)``."""
    return motor.K_Q * ((v_in - motor.K_V * omega) / motor.R - motor.i0)


def propeller_torque(omega: float, prop: PropellerParams, rho: float) -> float:
    return drag_torque_coefficient(prop, rho) * omega * omega
