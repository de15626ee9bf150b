"""Lockstep multirotor simulator: clock, RC, SIL board, forces, dynamics, sensors, logger."""

from .clock import SimClock
from .dynamics import MassProperties, RigidBodyState, Wrench, dynamics_step
from .forces import ConstantWrench, Propulsion, Vehicle, forces_and_moments
from .rc import RcKeyframe, RcScript, rc_script_step
from .runner import InvariantViolation, ScenarioResult, Simulation, run_scenario
from .scenario import ScenarioConfig, ScenarioError, load_motor_file, load_scenario, parse_scenario
from .sensors import SensorNoise, Sensors, sensors_step

__all__ = [
    "ConstantWrench", "InvariantViolation", "MassProperties", "Propulsion", "RcKeyframe", "RcScript",
    "RigidBodyState", "ScenarioConfig", "ScenarioError", "ScenarioResult", "SensorNoise", "Sensors",
    "SimClock", "Simulation", "Vehicle", "Wrench", "dynamics_step", "forces_and_moments",
    "load_motor_file", "load_scenario", "parse_scenario", "rc_script_step", "run_scenario", "sensors_step",
]
