"""Software-in-the-loop flight-stack workbench.

Pseudoinverse control allocation with primary/secondary blending, a firmware
core with arming and RC overrides, a framed serial protocol with an RTT echo
benchmark, and a lockstep 6-DOF multirotor simulator.
"""

__version__ = "0.1.0"
