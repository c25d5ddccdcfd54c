"""Simulator and controller for a four-actuator vectored-buoyancy vehicle."""
from .control import (ControllerConfig, PidGains, VbcController, allocate_open_loop, build_B,
                      compute_trim)
from .environment import EnvironmentParams
from .errors import ConfigError, DomainError, SimulationFault
from .missions import (SetpointSchedule, depth_hold_mission, run_mission, sawtooth_mission,
                       yaw_prp_mission)
from .sim import DragModel, Plant, RigidBodyState
from .vehicle import VehicleGeometry, neutral_trim

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ControllerConfig", "DomainError", "DragModel", "EnvironmentParams",
    "PidGains", "Plant", "RigidBodyState", "SetpointSchedule", "SimulationFault",
    "VbcController", "VehicleGeometry", "allocate_open_loop", "build_B", "compute_trim",
    "depth_hold_mission", "neutral_trim", "run_mission", "sawtooth_mission", "yaw_prp_mission",
]
