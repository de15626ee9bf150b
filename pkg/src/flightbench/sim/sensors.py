"""Simulated IMU (plus trivial baro/mag stubs) from the truth state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rotation as rot
from ..firmware import ImuSample
from .dynamics import RigidBodyState, Wrench

MAG_NED = (0.2, 0.0, 0.45)  # gauss, roughly mid-latitude


@dataclass(frozen=True)
class SensorNoise:
    gyro_sigma: float = 0.0
    accel_sigma: float = 0.0
    gyro_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    accel_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    baro_sigma: float = 0.0


class Sensors:
    def __init__(self, mass: float, noise: SensorNoise = SensorNoise(), seed: int = 0):
        self.mass = mass
        self.noise = noise
        self.rng = np.random.default_rng(seed)
        self.last: ImuSample | None = None

    def imu(self, state: RigidBodyState, wrench: Wrench, t: float) -> ImuSample:
        """Gyro = rate + bias + noise; accel = non-gravitational specific force + bias + noise."""
        n = self.noise
        gn = self.rng.normal(0.0, n.gyro_sigma, 3) if n.gyro_sigma else np.zeros(3)
        an = self.rng.normal(0.0, n.accel_sigma, 3) if n.accel_sigma else np.zeros(3)
        gyro = tuple(float(state.w[i] + n.gyro_bias[i] + gn[i]) for i in range(3))
        accel = tuple(float(wrench.F[i] / self.mass + n.accel_bias[i] + an[i]) for i in range(3))
        self.last = ImuSample(accel, gyro, t)
        return self.last

    def baro(self, state: RigidBodyState) -> float:
        """Altitude above the origin, m."""
        noise = self.rng.normal(0.0, self.noise.baro_sigma) if self.noise.baro_sigma else 0.0
        return -state.p[2] + noise

    def mag(self, state: RigidBodyState):
        return rot.rotate_inv(state.q, MAG_NED)


def sensors_step(state: RigidBodyState, wrench: Wrench, mass: float, sensors: Sensors, t: float = 0.0) -> ImuSample:
    return sensors.imu(state, wrench, t)
