"""Geometric and feedback steering laws: pure pursuit, Stanley, PID steering.

Steering sign convention: positive delta yaws the vehicle counterclockwise.
Cross-track errors from :mod:`acktrack.course` are positive with the vehicle
left of the path, so the stabilizing direction is negative delta for
positive error.
"""

import math
from dataclasses import dataclass, field

from .course import lookahead_point, nearest_point, reference_offset, signed_offset
from .errors import DomainError
from .kernels import wrap_angle
from .longitudinal import PidGains, PidState, pid_step
from .models import SimState, VehicleParams

# Lookahead distances shorter than this are unstable and get floored.
MIN_LOOKAHEAD = 1.0


@dataclass(frozen=True)
class PurePursuitConfig:
    k: float = 0.35       # lookahead velocity gain [s]
    d: float = 2.5        # lookahead offset [m]
    variant: str = "linear"   # linear: L_d = k v + d; eq27: fixed d; eq28: sqrt(k) v

    def __post_init__(self):
        if self.k < 0.0:
            raise DomainError("lookahead gain must be non-negative")
        if self.variant == "linear" and self.d <= 0.0:
            raise DomainError("linear lookahead needs d > 0")
        if self.variant not in ("linear", "eq27", "eq28"):
            raise DomainError(f"unknown pure-pursuit variant {self.variant!r}")

    def lookahead(self, v_x: float) -> float:
        if self.variant == "eq27":
            ld = self.d
        elif self.variant == "eq28":
            ld = math.sqrt(self.k) * v_x
        else:
            ld = self.k * v_x + self.d
        return max(ld, MIN_LOOKAHEAD)


def pure_pursuit_law(e_ld: float, lookahead: float, params: VehicleParams) -> float:
    """delta = atan(2 L e_ld / l_d^2), clamped to the steering limit."""
    return params.clamp_delta(math.atan2(2.0 * params.wheelbase * e_ld,
                                         lookahead * lookahead))


def pure_pursuit(state: SimState, course, cfg: PurePursuitConfig,
                 params: VehicleParams, state_at: str = "rear_axle",
                 hint: int | None = None):
    """Pure-pursuit steering command; returns (delta, nearest_index).

    Raises EndOfCourse when the goal point would lie past an open course.
    """
    if state.v_x < 0.0:
        raise DomainError("pure pursuit needs v_x >= 0")
    off = reference_offset(state_at, "rear_axle", params)
    rx = state.x + off * math.cos(state.theta)
    ry = state.y + off * math.sin(state.theta)
    ld = cfg.lookahead(state.v_x)
    _, e_ld, _ = lookahead_point(course, (rx, ry, state.theta), ld, hint)
    _, near = nearest_point(course, (rx, ry), hint)
    return pure_pursuit_law(e_ld, ld, params), near


@dataclass(frozen=True)
class StanleyConfig:
    k: float = 2.5        # cross-track gain [1/s]
    v_eps: float = 0.1    # softening constant [m/s]

    def __post_init__(self):
        if self.k <= 0.0 or self.v_eps < 0.0:
            raise DomainError("need k > 0 and v_eps >= 0")


def stanley_law(theta_e: float, e_fa: float, v_x: float,
                cfg: StanleyConfig) -> float:
    """delta = theta_e + atan(k e_fa / v); e_fa here uses the law's own sign
    (positive when the path lies to the left of the front axle)."""
    return theta_e + math.atan2(cfg.k * e_fa, v_x + cfg.v_eps)


def stanley(state: SimState, course, cfg: StanleyConfig, params: VehicleParams,
            state_at: str = "rear_axle", hint: int | None = None):
    """Stanley steering command from the front-axle geometry; returns
    (delta, front_axle_nearest_index).

    Both law inputs are expressed in the law's own frame: its heading error
    is path-heading-minus-vehicle-heading, and its cross-track error is
    positive when the path lies to the left of the front axle.  Both are the
    negatives of this package's geometric conventions.
    """
    off = reference_offset(state_at, "front_axle", params)
    fx = state.x + off * math.cos(state.theta)
    fy = state.y + off * math.sin(state.theta)
    _, idx = nearest_point(course, (fx, fy), hint)
    e_fa = -signed_offset(course, idx, fx, fy)
    theta_e = wrap_angle(course.headings[idx] - state.theta)
    delta = stanley_law(theta_e, e_fa, state.v_x, cfg)
    return params.clamp_delta(wrap_angle(delta)), idx


@dataclass
class SteeringPid:
    """PID on cross-track error with zero reference; owns its loop state."""

    gains: PidGains = field(default_factory=lambda: PidGains(1.5, 0.0, 0.02))
    state: PidState = field(default_factory=PidState)

    def reset(self):
        self.state = PidState()

    def step(self, e_cg: float, dt: float, delta_max: float) -> float:
        """Positive cross-track (vehicle left of path) yields negative delta."""
        delta, self.state = pid_step(self.gains, self.state,
                                     setpoint=0.0, measured=e_cg, dt=dt,
                                     out_lo=-delta_max, out_hi=delta_max)
        return delta
