"""
Simulation harness: analytic trajectories, IMU synthesis, scheme comparison
runs, self-verification suites and the ``simkit`` command line.
"""

from .compare import RunReport, run_compare
from .config import RunConfig, load_config, parse_config
from .sensors import BiasModel, ImuStream, SensorErrorSpec, synthesize_imu
from .trajectories import Coning, ConstantTwist, GreatCircle, Static, Trajectory, truth_state
from .verify import run_verify

__all__ = [
    "RunReport",
    "run_compare",
    "RunConfig",
    "load_config",
    "parse_config",
    "BiasModel",
    "ImuStream",
    "SensorErrorSpec",
    "synthesize_imu",
    "Coning",
    "ConstantTwist",
    "GreatCircle",
    "Static",
    "Trajectory",
    "truth_state",
    "run_verify",
]
