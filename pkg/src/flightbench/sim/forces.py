"""Forces-and-moments module: channel commands -> body wrench."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from ..motor import Environment, MotorDescriptor, thrust_torque, throttle_to_omega
from .dynamics import MassProperties, RigidBodyState, Wrench


@dataclass(frozen=True)
class Vehicle:
    body: MassProperties
    motors: tuple[MotorDescriptor, ...]
    drag: float = 0.0  # linear drag coefficient, N per m/s
    motor_tau: float = 0.0  # first-order motor lag, s; 0 = steady state
    env: Environment = field(default_factory=Environment)

    def __post_init__(self):
        object.__setattr__(self, "motors", tuple(self.motors))
        chans = [m.channel for m in self.motors]
        if any(c < 0 or c > 9 for c in chans) or len(set(chans)) != len(chans):
            raise ValueError("each motor needs a unique channel in 0..9")
        if self.drag < 0 or self.motor_tau < 0:
            raise ValueError("drag and motor_tau must be non-negative")

    @property
    def mass(self) -> float:
        return self.body.mass


def forces_and_moments(channels: Sequence[float], state: RigidBodyState, vehicle: Vehicle,
                       omegas: Sequence[float] | None = None) -> Wrench:
    """Steady-state propulsion wrench plus linear drag.

    ``omegas`` (one per motor, same order as ``vehicle.motors``) overrides the
    steady-state throttle-to-speed map, e.g. when a motor lag is modelled.
    """
    rho = vehicle.env.rho
    F = np.zeros(3)
    Q = np.zeros(3)
    for i, m in enumerate(vehicle.motors):
        if omegas is None:
            omega = throttle_to_omega(float(channels[m.channel]), m.motor, m.prop, rho)
        else:
            omega = omegas[i]
        f, q = thrust_torque(omega, m.geometry, m.prop, rho)
        F += f
        Q += q
    c = vehicle.drag
    F -= c * np.asarray(state.v)
    return Wrench(tuple(F.tolist()), tuple(Q.tolist()))


class ForceModel(Protocol):
    def __call__(self, channels: Sequence[float], state: RigidBodyState, dt: float) -> Wrench: ...


class Propulsion:
    """Default force model; tracks motor speeds when ``vehicle.motor_tau > 0``."""

    def __init__(self, vehicle: Vehicle):
        self.vehicle = vehicle
        self.omegas = [0.0] * len(vehicle.motors)

    def __call__(self, channels, state, dt):
        v = self.vehicle
        if v.motor_tau <= 0:
            return forces_and_moments(channels, state, v)
        a = 1.0 - math.exp(-dt / v.motor_tau)
        for i, m in enumerate(v.motors):
            target = throttle_to_omega(float(channels[m.channel]), m.motor, m.prop, v.env.rho)
            self.omegas[i] += a * (target - self.omegas[i])
        return forces_and_moments(channels, state, v, self.omegas)


class ConstantWrench:
    """Stand-in force model used to check the module boundary."""

    def __init__(self, wrench: Wrench):
        self.wrench = wrench

    def __call__(self, channels, state, dt):
        return self.wrench
