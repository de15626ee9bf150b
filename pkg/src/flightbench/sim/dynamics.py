"""Rigid-body 6-DOF dynamics: body-frame Newton-Euler, NED gravity, RK4."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import rotation as rot


@dataclass(frozen=True)
class RigidBodyState:
    """Truth state. ``q`` rotates body vectors into NED; ``v`` and ``w`` are body frame."""

    p: tuple[float, float, float] = (0.0, 0.0, 0.0)
    v: tuple[float, float, float] = (0.0, 0.0, 0.0)
    q: rot.Quat = rot.IDENTITY
    w: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def as_tuple(self) -> tuple[float, ...]:
        return (*self.p, *self.v, *self.q, *self.w)

    @classmethod
    def from_tuple(cls, x) -> RigidBodyState:
        x = tuple(float(c) for c in x)
        return cls(x[0:3], x[3:6], x[6:10], x[10:13])

    def velocity_ned(self) -> tuple[float, float, float]:
        return rot.rotate(self.q, self.v)

    def euler(self) -> tuple[float, float, float]:
        return rot.to_euler(self.q)


@dataclass(frozen=True)
class Wrench:
    """Body-frame force (N) and torque (N m), gravity excluded."""

    F: tuple[float, float, float] = (0.0, 0.0, 0.0)
    Q: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (*self.F, *self.Q)):
            raise ValueError("wrench must be finite")


@dataclass(frozen=True)
class MassProperties:
    mass: float
    inertia: tuple[tuple[float, ...], ...]
    g: float = 9.80665

    def __post_init__(self):
        J = np.asarray(self.inertia, dtype=float)
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if J.shape != (3, 3) or not np.allclose(J, J.T) or np.any(np.linalg.eigvalsh(J) <= 0):
            raise ValueError("inertia must be symmetric positive definite")
        object.__setattr__(self, "inertia", tuple(tuple(float(c) for c in row) for row in J))
        object.__setattr__(self, "_J_inv", tuple(tuple(float(c) for c in row) for row in np.linalg.inv(J)))


def _matvec(M, v):
    return (
        M[0][0] * v[0] + M[0][1] * v[1] + M[0][2] * v[2],
        M[1][0] * v[0] + M[1][1] * v[1] + M[1][2] * v[2],
        M[2][0] * v[0] + M[2][1] * v[1] + M[2][2] * v[2],
    )


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def derivative(x, F, Q, body: MassProperties):
    """Time derivative of the 13-element state tuple."""
    v = x[3:6]
    q = x[6:10]
    w = x[10:13]
    pdot = rot.rotate(q, v)
    g_body = rot.rotate_inv(q, (0.0, 0.0, body.g))
    wxv = _cross(w, v)
    m = body.mass
    vdot = tuple(F[i] / m + g_body[i] - wxv[i] for i in range(3))
    qw, qx, qy, qz = q
    wx, wy, wz = w
    qdot = (
        0.5 * (-qx * wx - qy * wy - qz * wz),
        0.5 * (qw * wx + qy * wz - qz * wy),
        0.5 * (qw * wy - qx * wz + qz * wx),
        0.5 * (qw * wz + qx * wy - qy * wx),
    )
    Jw = _matvec(body.inertia, w)
    gyro = _cross(w, Jw)
    wdot = _matvec(body._J_inv, tuple(Q[i] - gyro[i] for i in range(3)))
    return (*pdot, *vdot, *qdot, *wdot)


def dynamics_step(state: RigidBodyState, wrench: Wrench, body: MassProperties, dt: float) -> RigidBodyState:
    """One RK4 step with the wrench held constant; quaternion renormalised after."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    F, Q = wrench.F, wrench.Q
    x = state.as_tuple()
    k1 = derivative(x, F, Q, body)
    k2 = derivative(tuple(a + 0.5 * dt * b for a, b in zip(x, k1)), F, Q, body)
    k3 = derivative(tuple(a + 0.5 * dt * b for a, b in zip(x, k2)), F, Q, body)
    k4 = derivative(tuple(a + dt * b for a, b in zip(x, k3)), F, Q, body)
    xn = tuple(a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4))
    return RigidBodyState(xn[0:3], xn[3:6], rot.qnormalize(xn[6:10]), xn[10:13])


def rotational_energy(state: RigidBodyState, body: MassProperties) -> float:
    Jw = _matvec(body.inertia, state.w)
    return 0.5 * sum(a * b for a, b in zip(state.w, Jw))


def angular_momentum_ned(state: RigidBodyState, body: MassProperties):
    return rot.rotate(state.q, _matvec(body.inertia, state.w))
