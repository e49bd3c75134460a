"""Benchmark course generators and geometric path queries.

Courses are immutable sampled paths with per-point heading, curvature and
arc length.  Sign convention for cross-track errors: positive when the
vehicle is to the left of the path tangent.
"""

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EndOfCourse
from .kernels import wrap_angle
from .models import SimState, VehicleParams

# Arc length of path searched ahead of the hint index before giving up on
# monotone progress (avoids snapping backward on self-approaching geometry).
HINT_WINDOW_M = 5.0


@dataclass(frozen=True)
class PathPoint:
    x: float
    y: float
    theta_p: float   # path heading [rad]
    kappa: float     # curvature [1/m]
    s: float         # arc length from start [m]


@dataclass(frozen=True)
class TrackingError:
    e_cg: float          # signed cross-track at CG [m]
    e_fa: float          # signed cross-track at front axle [m]
    theta_e: float       # heading error [rad]
    omega_p: float       # path yaw rate = kappa * v_x [rad/s]
    index: int           # nearest path index for the requested reference
    e_ld: float = 0.0    # lookahead lateral offset, set by lookahead queries


@dataclass(frozen=True)
class Course:
    xs: np.ndarray
    ys: np.ndarray
    headings: np.ndarray
    curvatures: np.ndarray
    s: np.ndarray
    closed: bool = False
    nominal_spacing: float = field(default=0.25)

    def __post_init__(self):
        n = len(self.xs)
        if n < 2:
            raise DomainError("a course needs at least 2 points")
        gaps = np.hypot(np.diff(self.xs), np.diff(self.ys))
        if np.any(gaps <= 0.0) or np.any(gaps > 2.0 * self.nominal_spacing):
            raise DomainError("course point spacing out of (0, 2*nominal] range")
        if np.any(np.diff(self.s) <= 0.0):
            raise DomainError("arc length must be strictly increasing")
        chord = np.arctan2(np.diff(self.ys), np.diff(self.xs))
        diff = self.headings[:-1] - chord
        mis = np.abs(np.arctan2(np.sin(diff), np.cos(diff)))
        if np.any(mis > 0.1):
            raise DomainError("stored headings inconsistent with chord direction")

    @property
    def n(self) -> int:
        return len(self.xs)

    @property
    def total_length(self) -> float:
        if self.closed:
            back = math.hypot(self.xs[0] - self.xs[-1], self.ys[0] - self.ys[-1])
            return float(self.s[-1] + back)
        return float(self.s[-1])

    def point(self, i: int) -> PathPoint:
        return PathPoint(float(self.xs[i]), float(self.ys[i]),
                         float(self.headings[i]), float(self.curvatures[i]),
                         float(self.s[i]))


def _assemble(xs, ys, headings, kappas, closed, spacing) -> Course:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ds = np.hypot(np.diff(xs), np.diff(ys))
    s = np.concatenate(([0.0], np.cumsum(ds)))
    return Course(xs, ys, np.asarray(headings, dtype=float),
                  np.asarray(kappas, dtype=float), s, closed, spacing)


def gen_straight(length: float, spacing: float = 0.25) -> Course:
    """Straight course along +x from the origin."""
    if not (length > spacing > 0.0):
        raise DomainError("need length > spacing > 0")
    n = int(round(length / spacing)) + 1
    xs = np.arange(n) * spacing
    zeros = np.zeros(n)
    return _assemble(xs, zeros, zeros, zeros, False, spacing)


def gen_circle(radius: float, spacing: float = 0.25) -> Course:
    """Closed counterclockwise circle centered at (0, radius), starting at origin."""
    if radius <= 0.0 or spacing <= 0.0:
        raise DomainError("need radius > 0 and spacing > 0")
    n = max(8, int(round(2.0 * math.pi * radius / spacing)))
    ang = -math.pi / 2.0 + 2.0 * math.pi * np.arange(n) / n
    xs = radius * np.cos(ang)
    ys = radius + radius * np.sin(ang)
    headings = np.array([wrap_angle(a + math.pi / 2.0) for a in ang])
    kappas = np.full(n, 1.0 / radius)
    return _assemble(xs, ys, headings, kappas, True, spacing)


def _curve_course(y_of_x, dy_dx, d2y_dx2, x_end, spacing) -> Course:
    """Sample y(x) with steps shortened so arc spacing stays near nominal."""
    xs = [0.0]
    x = 0.0
    while x < x_end:
        slope = dy_dx(x)
        x = min(x + spacing / math.hypot(1.0, slope), x_end)
        xs.append(x)
    xs = np.asarray(xs)
    ys = np.array([y_of_x(x) for x in xs])
    d1 = np.array([dy_dx(x) for x in xs])
    d2 = np.array([d2y_dx2(x) for x in xs])
    headings = np.arctan(d1)
    kappas = d2 / (1.0 + d1 ** 2) ** 1.5
    return _assemble(xs, ys, headings, kappas, False, spacing)


def gen_lane_change(approach: float, transition: float, offset: float,
                    exit_len: float, spacing: float = 0.25) -> Course:
    """Straight approach, quintic-smoothstep lateral shift, straight exit.

    The smoothstep is C2 continuous, so curvature is zero at both ends of
    the transition and antisymmetric about its midpoint.
    """
    if min(approach, transition, exit_len, spacing) <= 0.0:
        raise DomainError("all lane-change lengths must be positive")
    total = approach + transition + exit_len

    def y_of_x(x):
        if x <= approach:
            return 0.0
        if x >= approach + transition:
            return offset
        u = (x - approach) / transition
        return offset * u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)

    def dy_dx(x):
        if x <= approach or x >= approach + transition:
            return 0.0
        u = (x - approach) / transition
        return offset / transition * 30.0 * u ** 2 * (1.0 - u) ** 2

    def d2y_dx2(x):
        if x <= approach or x >= approach + transition:
            return 0.0
        u = (x - approach) / transition
        return offset / transition ** 2 * 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)

    return _curve_course(y_of_x, dy_dx, d2y_dx2, total, spacing)


def gen_sine(amplitude: float, wavelength: float, length: float,
             spacing: float = 0.25) -> Course:
    """y = A sin(2 pi x / wavelength) over [0, length]."""
    if amplitude < 0.0 or wavelength <= 0.0 or length <= 0.0 or spacing <= 0.0:
        raise DomainError("sine course parameters must be positive")
    w = 2.0 * math.pi / wavelength
    return _curve_course(
        lambda x: amplitude * math.sin(w * x),
        lambda x: amplitude * w * math.cos(w * x),
        lambda x: -amplitude * w * w * math.sin(w * x),
        length, spacing)


def nearest_point(course: Course, position, hint: int | None = None):
    """Nearest course point to (x, y); global search unless a hint is given.

    With a hint the search is limited to a forward arc window so progress
    along the course is monotone.  Returns (PathPoint, index).
    """
    px, py = position
    if hint is None:
        d2 = (course.xs - px) ** 2 + (course.ys - py) ** 2
        idx = int(np.argmin(d2))
        return course.point(idx), idx
    window = max(2, int(math.ceil(HINT_WINDOW_M / course.nominal_spacing)))
    if course.closed:
        idxs = (hint + np.arange(window + 1)) % course.n
    else:
        stop = min(hint + window + 1, course.n)
        idxs = np.arange(hint, stop)
    d2 = (course.xs[idxs] - px) ** 2 + (course.ys[idxs] - py) ** 2
    idx = int(idxs[int(np.argmin(d2))])
    return course.point(idx), idx


def signed_offset(course: Course, index: int, px: float, py: float) -> float:
    """Perpendicular distance from (px, py) to the tangent line at index;
    positive on the left of the tangent."""
    tp = course.headings[index]
    dx = px - course.xs[index]
    dy = py - course.ys[index]
    return float(math.cos(tp) * dy - math.sin(tp) * dx)


def reference_offset(state_at: str, reference: str, params: VehicleParams) -> float:
    """Longitudinal distance from the state's attachment point to a reference
    point, along the heading.  Attachments: 'rear_axle' or 'cg'."""
    pos = {"rear_axle": 0.0, "cg": params.l_r, "front_axle": params.wheelbase}
    if state_at not in ("rear_axle", "cg") or reference not in pos:
        raise DomainError(f"unknown reference frame: {state_at!r}/{reference!r}")
    return pos[reference] - pos[state_at]


def tracking_errors(course: Course, state: SimState, params: VehicleParams,
                    reference: str = "cg", state_at: str = "rear_axle",
                    hint: int | None = None) -> TrackingError:
    """Signed tracking errors of the vehicle against the course.

    ``state_at`` names the point the state's (x, y) is attached to;
    ``reference`` picks which point's nearest-path index drives theta_e and
    omega_p.  e_cg and e_fa are always both computed.
    """
    def point_at(offset):
        return (state.x + offset * math.cos(state.theta),
                state.y + offset * math.sin(state.theta))

    cg_xy = point_at(reference_offset(state_at, "cg", params))
    fa_xy = point_at(reference_offset(state_at, "front_axle", params))
    ref_xy = point_at(reference_offset(state_at, reference, params))

    _, ref_idx = nearest_point(course, ref_xy, hint)
    if reference == "cg":
        e_cg = signed_offset(course, ref_idx, *cg_xy)
        _, fa_idx = nearest_point(course, fa_xy, hint)
        e_fa = signed_offset(course, fa_idx, *fa_xy)
    elif reference == "front_axle":
        e_fa = signed_offset(course, ref_idx, *fa_xy)
        _, cg_idx = nearest_point(course, cg_xy, hint)
        e_cg = signed_offset(course, cg_idx, *cg_xy)
    else:
        _, cg_idx = nearest_point(course, cg_xy, hint)
        e_cg = signed_offset(course, cg_idx, *cg_xy)
        _, fa_idx = nearest_point(course, fa_xy, hint)
        e_fa = signed_offset(course, fa_idx, *fa_xy)
    theta_e = wrap_angle(state.theta - course.headings[ref_idx])
    omega_p = float(course.curvatures[ref_idx]) * state.v_x
    return TrackingError(e_cg, e_fa, theta_e, omega_p, ref_idx)


def lookahead_point(course: Course, pose, l_d: float, hint: int | None = None):
    """Goal point at arc distance >= l_d ahead of the nearest point.

    ``pose`` is (x, y, theta) of the rear axle.  Returns
    (PathPoint, e_ld, goal_index) where e_ld is the goal's lateral offset in
    the vehicle heading frame (positive left).  Raises EndOfCourse when an
    open course ends before l_d.
    """
    if l_d <= 0.0:
        raise DomainError("lookahead distance must be positive")
    x, y, theta = pose
    _, near = nearest_point(course, (x, y), hint)
    target = course.s[near] + l_d
    if course.closed:
        total = course.total_length
        target = math.fmod(target, total)
        gi = int(np.searchsorted(course.s, target))
        if gi >= course.n:
            gi = 0
    else:
        if target > course.s[-1]:
            raise EndOfCourse("course ends before the lookahead distance")
        gi = int(np.searchsorted(course.s, target))
    gx, gy = course.xs[gi], course.ys[gi]
    dx, dy = gx - x, gy - y
    e_ld = float(-math.sin(theta) * dx + math.cos(theta) * dy)
    return course.point(gi), e_ld, gi


def to_csv(course: Course) -> str:
    """Serialize as CSV (columns s, x, y, theta_p, kappa)."""
    buf = io.StringIO()
    buf.write(f"# closed: {'true' if course.closed else 'false'}\n")
    buf.write("s,x,y,theta_p,kappa\n")
    for i in range(course.n):
        buf.write(f"{course.s[i]:.9g},{course.xs[i]:.9g},{course.ys[i]:.9g},"
                  f"{course.headings[i]:.9g},{course.curvatures[i]:.9g}\n")
    return buf.getvalue()


def from_csv(text: str, nominal_spacing: float = 0.25) -> Course:
    closed = False
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "closed:" in line:
                closed = line.split("closed:")[1].strip().lower() == "true"
            continue
        if line.startswith("s,"):
            continue
        rows.append([float(v) for v in line.split(",")])
    arr = np.asarray(rows)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise DomainError("course CSV needs columns s,x,y,theta_p,kappa")
    return Course(arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 0],
                  closed, nominal_spacing)
