import math
import sys

import pytest

from flightbench.motor import MotorDescriptor, MotorGeometry, MotorParams, PropellerParams

# constants used by the voltage / output-stage reference cases
REF_MOTOR = MotorParams(R=0.1, K_Q=0.01, K_V=0.01, i0=1.0, V_max=12.0)
REF_PROP = PropellerParams(C_T=0.1, C_Q=0.01, D=0.2)
RHO = 1.225

# the bundled scenarios' airframe
QUAD_MOTOR = MotorParams(R=0.1, K_Q=0.0104, K_V=0.0104, i0=0.5, V_max=11.1)
QUAD_PROP = PropellerParams(C_T=0.1, C_Q=0.005, D=0.254)
QUAD_THETAS = (45.0, 135.0, 225.0, 315.0)
QUAD_DIRS = (1, -1, 1, -1)


def quad_motors(arm=0.25, prop=QUAD_PROP, motor=QUAD_MOTOR):
    return [
        MotorDescriptor(MotorGeometry.planar(arm, math.radians(th), d), prop, motor, channel=i)
        for i, (th, d) in enumerate(zip(QUAD_THETAS, QUAD_DIRS))
    ]


@pytest.fixture
def quad():
    return quad_motors()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "VERDICTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.VERDICTS:
        terminalreporter.write_line(line)
