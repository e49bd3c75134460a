"""Bicycle plant models and the steering-actuator imperfection layer.

Conventions used throughout the package:

* positive steering angle = counterclockwise yaw,
* kinematic state (x, y) is the rear axle, dynamic state (x, y) is the CG,
* headings are kept wrapped to (-pi, pi].

The dynamic model is the 2-state linear lateral model; it is singular as
v_x -> 0 and refuses to run below ``V_MIN`` (0.5 m/s).  The yaw-moment input
coefficient uses l_f*c_f/I_z (moment over inertia), which is the
dimensionally consistent choice.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import DomainError, SingularModelError

# Below this longitudinal speed the dynamic model matrices (~1/v_x) are
# refused; the harness falls back to the kinematic model.
V_MIN = 0.5


@dataclass(frozen=True)
class VehicleParams:
    """Geometric/inertial/tire constants shared by models and controllers."""

    wheelbase: float = 2.258          # L [m]
    l_f: float = 1.05                 # CG to front axle [m]
    l_r: float = 1.208                # CG to rear axle [m]
    mass: float = 850.0               # [kg]
    inertia_z: float = 1100.0         # yaw inertia [kg m^2]
    c_f: float = 42000.0              # front cornering stiffness [N/rad]
    c_r: float = 42000.0              # rear cornering stiffness [N/rad]
    delta_max: float = 0.524          # steering limit [rad]
    delta_rate_max: float = 1.0       # steering rate limit [rad/s]
    throttle_min: float = 0.0
    throttle_max: float = 1.0

    def __post_init__(self):
        if abs(self.wheelbase - (self.l_f + self.l_r)) > 1e-9:
            raise DomainError("wheelbase must equal l_f + l_r")
        for name in ("wheelbase", "mass", "inertia_z", "c_f", "c_r"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be strictly positive")
        if not (0.0 < self.delta_max < math.pi / 2):
            raise DomainError("delta_max must lie in (0, pi/2)")
        if self.throttle_max <= self.throttle_min:
            raise DomainError("throttle range must be non-empty")

    def clamp_delta(self, delta: float) -> float:
        return min(max(delta, -self.delta_max), self.delta_max)


@dataclass(frozen=True)
class SimState:
    """Planar pose plus velocities of the simulated plant.

    v_y and omega_z stay 0 for the kinematic variant.
    """

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    v_x: float = 0.0
    v_y: float = 0.0
    omega_z: float = 0.0
    delta: float = 0.0


@dataclass(frozen=True)
class PathFrameState:
    """Tracking-error state (e_cg, e_cg_dot, theta_e, theta_e_dot)."""

    e_cg: float = 0.0
    e_cg_dot: float = 0.0
    theta_e: float = 0.0
    theta_e_dot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.e_cg, self.e_cg_dot, self.theta_e, self.theta_e_dot])


@dataclass(frozen=True)
class ActuatorModel:
    """Steering-column imperfections: deadband, rate limit, first-order lag.

    Zero values disable the corresponding effect; a disabled model is an
    identity pass-through.
    """

    deadband: float = 0.0             # [rad]
    rate_limit: float = 0.0           # [rad/s], 0 = unlimited
    lag_tau: float = 0.0              # [s], 0 = no lag
    enabled: bool = False

    def __post_init__(self):
        if self.deadband < 0.0 or self.rate_limit < 0.0 or self.lag_tau < 0.0:
            raise DomainError("actuator model fields must be non-negative")


def _check_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise DomainError("non-finite input to plant step")


def step_kinematic(state: SimState, v: float, delta_dot: float, dt: float,
                   params: VehicleParams, method: str = "rk4") -> SimState:
    """Advance the kinematic bicycle one step.

    Integrates xdot = v cos(theta), ydot = v sin(theta),
    thetadot = v tan(delta)/L, deltadot = delta_dot; the steering angle is
    clamped to +-delta_max.
    """
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    _check_finite(state.x, state.y, state.theta, state.delta, v, delta_dot)
    x, y, theta, delta = kernels.kinematic_step(
        state.x, state.y, state.theta, state.delta, v, delta_dot, dt,
        params.wheelbase, params.delta_max, method == "rk4")
    return replace(state, x=x, y=y, theta=theta, delta=delta, v_x=v)


def dynamic_matrices(params: VehicleParams, v_x: float):
    """Entries of the 2x2 lateral model (states v_y, omega_z; input delta).

    Raises SingularModelError below V_MIN and DomainError if the matrix is
    not Hurwitz (cannot happen for physically positive parameters at the
    speeds this package targets, but is checked at construction).
    """
    if v_x <= V_MIN:
        raise SingularModelError(
            f"dynamic model needs v_x > {V_MIN} m/s (got {v_x})")
    cf, cr, m, iz = params.c_f, params.c_r, params.mass, params.inertia_z
    lf, lr = params.l_f, params.l_r
    a11 = -(cf + cr) / (m * v_x)
    a12 = (lr * cr - lf * cf) / (m * v_x) - v_x
    a21 = (lr * cr - lf * cf) / (iz * v_x)
    a22 = -(lf * lf * cf + lr * lr * cr) / (iz * v_x)
    b1 = cf / m
    b2 = lf * cf / iz
    trace = a11 + a22
    det = a11 * a22 - a12 * a21
    if not (trace < 0.0 and det > 0.0):
        raise DomainError("lateral dynamics matrix is not Hurwitz for these "
                          "parameters at this speed")
    return a11, a12, a21, a22, b1, b2


def step_dynamic(state: SimState, delta: float, params: VehicleParams,
                 dt: float, method: str = "rk4") -> SimState:
    """Advance the dynamic bicycle: 2-state lateral model plus planar pose."""
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    _check_finite(state.x, state.y, state.theta, state.v_y, state.omega_z, delta)
    a11, a12, a21, a22, b1, b2 = dynamic_matrices(params, state.v_x)
    d = params.clamp_delta(delta)
    x, y, theta, v_y, omega_z = kernels.dynamic_step(
        state.x, state.y, state.theta, state.v_y, state.omega_z,
        state.v_x, d, dt, a11, a12, a21, a22, b1, b2, method == "rk4")
    return replace(state, x=x, y=y, theta=theta, v_y=v_y, omega_z=omega_z, delta=d)


def dynamic_steady_state(params: VehicleParams, v_x: float, delta: float):
    """(v_y, omega_z) equilibrium under a constant steering angle: -A^-1 B d."""
    a11, a12, a21, a22, b1, b2 = dynamic_matrices(params, v_x)
    det = a11 * a22 - a12 * a21
    vy = -(a22 * b1 - a12 * b2) * delta / det
    wz = -(-a21 * b1 + a11 * b2) * delta / det
    return vy, wz


def path_frame_matrices(params: VehicleParams, v_x: float):
    """Matrices of the 4-state error model xdot = A x + B delta + C omega_p.

    States are (e_cg, e_cg_dot, theta_e, theta_e_dot); rows 1 and 3 are shift
    rows, and the steering input enters theta_e_ddot as l_f*c_f/I_z.
    """
    dynamic_matrices(params, v_x)  # shares the singularity / Hurwitz checks
    cf, cr, m, iz = params.c_f, params.c_r, params.mass, params.inertia_z
    lf, lr = params.l_f, params.l_r
    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, -(cf + cr) / (m * v_x), (cf + cr) / m, (lr * cr - lf * cf) / (m * v_x)],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, (lr * cr - lf * cf) / (iz * v_x), (lf * cf - lr * cr) / iz,
         -(lf * lf * cf + lr * lr * cr) / (iz * v_x)],
    ])
    B = np.array([0.0, cf / m, 0.0, lf * cf / iz])
    C = np.array([0.0, (lr * cr - lf * cf) / (m * v_x) - v_x, 0.0,
                  -(lf * lf * cf + lr * lr * cr) / (iz * v_x)])
    return A, B, C


def step_path_frame(state: PathFrameState, delta: float, omega_p: float,
                    v_x: float, params: VehicleParams, dt: float,
                    method: str = "rk4") -> PathFrameState:
    """Advance the 4-state path-frame error model xdot = A x + B d + C w_p."""
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    A, B, C = path_frame_matrices(params, v_x)
    out = kernels.path_frame_step(state.as_array(), A, B, C,
                                  delta, omega_p, dt, method == "rk4")
    return PathFrameState(float(out[0]), float(out[1]), float(out[2]), float(out[3]))


def slip_angles(state: SimState, delta: float, params: VehicleParams):
    """Front/rear tire slip angles (alpha_f, alpha_r)."""
    if state.v_x <= V_MIN:
        raise SingularModelError(
            f"slip angles need v_x > {V_MIN} m/s (got {state.v_x})")
    alpha_r = math.atan((state.v_y - params.l_r * state.omega_z) / state.v_x)
    alpha_f = math.atan((state.v_y + params.l_f * state.omega_z) / state.v_x) - delta
    return alpha_f, alpha_r


def lateral_forces(alpha_f: float, alpha_r: float, params: VehicleParams):
    """Linear tire law: F = -c * alpha, per axle."""
    return -params.c_f * alpha_f, -params.c_r * alpha_r


def actuate(cmd_delta: float, prev_delta: float, model: ActuatorModel,
            dt: float) -> float:
    """Apply deadband, rate limiting, then first-order lag to a steering command."""
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    if not model.enabled:
        return cmd_delta
    target = cmd_delta
    if model.deadband > 0.0 and abs(cmd_delta - prev_delta) < model.deadband:
        target = prev_delta
    step = target - prev_delta
    if model.lag_tau > 0.0:
        step *= 1.0 - math.exp(-dt / model.lag_tau)
    if model.rate_limit > 0.0:
        limit = model.rate_limit * dt
        step = min(max(step, -limit), limit)
    return prev_delta + step
