"""Path-tracking laboratory for Ackermann-steered vehicles.

Bicycle plant models, five lateral controllers (pure pursuit, Stanley, PID,
LQR, MPC), two longitudinal controllers, system identification, planar EKF
localization, and a deterministic benchmark harness.
"""

from .accel import NUMBA_ACTIVE, backend_name
from .models import (ActuatorModel, PathFrameState, SimState, VehicleParams,
                     actuate, slip_angles, step_dynamic, step_kinematic,
                     step_path_frame)
from .course import (Course, PathPoint, TrackingError, gen_circle,
                     gen_lane_change, gen_sine, gen_straight, lookahead_point,
                     nearest_point, tracking_errors)
from .harness import ScenarioConfig, parse_config, run_scenario, run_sweep

__version__ = "0.1.0"
__all__ = [
    "NUMBA_ACTIVE", "backend_name", "__version__",
    "ActuatorModel", "PathFrameState", "SimState", "VehicleParams",
    "actuate", "slip_angles", "step_dynamic", "step_kinematic",
    "step_path_frame",
    "Course", "PathPoint", "TrackingError", "gen_circle", "gen_lane_change",
    "gen_sine", "gen_straight", "lookahead_point", "nearest_point",
    "tracking_errors",
    "ScenarioConfig", "parse_config", "run_scenario", "run_sweep",
]
