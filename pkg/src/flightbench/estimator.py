"""Attitude estimation for the firmware core."""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import rotation as rot

STANDARD_G = 9.80665


@dataclass(frozen=True)
class AttitudeEstimate:
    q: rot.Quat = rot.IDENTITY
    rate: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def euler(self) -> tuple[float, float, float]:
        return rot.to_euler(self.q)


class ComplementaryFilter:
    """First-order complementary filter on the unit quaternion.

    Each update integrates the gyro, then rotates the estimate a fraction
    ``alpha`` of the way toward the tilt implied by the accelerometer. Accel
    samples far from 1 g (free fall, hard manoeuvres) are ignored.
    """

    def __init__(self, alpha: float = 0.02, q0: rot.Quat = rot.IDENTITY):
        self.alpha = alpha
        self.q = q0
        self.rate = (0.0, 0.0, 0.0)

    def update(self, gyro, accel, dt: float) -> AttitudeEstimate:
        if dt <= 0:
            raise ValueError("dt must be positive")
        gx, gy, gz = gyro
        q = rot.qmul(self.q, rot.from_rotvec((gx * dt, gy * dt, gz * dt)))
        ax, ay, az = accel
        an = math.sqrt(ax * ax + ay * ay + az * az)
        if self.alpha > 0 and 0.5 * STANDARD_G < an < 1.5 * STANDARD_G:
            meas = (-ax / an, -ay / an, -az / an)
            est = rot.rotate_inv(q, (0.0, 0.0, 1.0))
            axis = (
                meas[1] * est[2] - meas[2] * est[1],
                meas[2] * est[0] - meas[0] * est[2],
                meas[0] * est[1] - meas[1] * est[0],
            )
            dot = max(-1.0, min(1.0, sum(m * e for m, e in zip(meas, est))))
            q = rot.qmul(q, rot.from_axis_angle(axis, self.alpha * math.acos(dot)))
        self.q = rot.qnormalize(q)
        self.rate = (gx, gy, gz)
        return AttitudeEstimate(self.q, self.rate)

    def reset(self, q: rot.Quat = rot.IDENTITY) -> None:
        self.q = q
