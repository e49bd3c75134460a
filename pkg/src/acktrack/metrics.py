"""Per-run summary statistics: peak/steady-state/RMS cross-track error,
convergence distance, steering effort, and velocity step-response metrics.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Steady-state window: final fraction of travelled distance.
STEADY_STATE_WINDOW = 0.2
DEFAULT_CONVERGENCE_THRESHOLD = 0.05


@dataclass
class RunRecord:
    """Uniform time series of one scenario run plus metadata.

    All channels share the time base; ``s`` is distance travelled from
    integrated speed.  Optional solver diagnostics (MPC) ride along in
    ``extra`` keyed by column name.
    """

    t: np.ndarray
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    v_x: np.ndarray
    v_y: np.ndarray
    omega_z: np.ndarray
    delta_cmd: np.ndarray
    delta_act: np.ndarray
    throttle: np.ndarray
    e_cg: np.ndarray
    e_fa: np.ndarray
    theta_e: np.ndarray
    meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    diverged: bool = False
    completed: bool = True

    CHANNELS = ("t", "s", "x", "y", "theta", "v_x", "v_y", "omega_z",
                "delta_cmd", "delta_act", "throttle", "e_cg", "e_fa", "theta_e")

    def __post_init__(self):
        n = len(self.t)
        for name in self.CHANNELS:
            if len(getattr(self, name)) != n:
                raise DomainError(f"channel {name} length mismatch")
        for name, col in self.extra.items():
            if len(col) != n:
                raise DomainError(f"extra channel {name} length mismatch")


@dataclass(frozen=True)
class MetricsSummary:
    peak_abs_error: float
    steady_state_error: float
    rms_error: float
    distance_to_converge: float   # inf when never converging
    steering_total_variation: float
    rise_time: float = math.inf
    overshoot_pct: float = 0.0
    settling_time: float = math.inf
    velocity_sse_pct: float = 0.0


def _interp_crossing(t: np.ndarray, v: np.ndarray, level: float) -> float:
    """First time v crosses level from below, linearly interpolated."""
    if v[0] >= level:
        return float(t[0])
    above = np.nonzero(v >= level)[0]
    if len(above) == 0:
        return math.inf
    i = above[0]
    t0, t1 = t[i - 1], t[i]
    v0, v1 = v[i - 1], v[i]
    if v1 == v0:
        return float(t1)
    return float(t0 + (level - v0) * (t1 - t0) / (v1 - v0))


def step_response_metrics(t: np.ndarray, v: np.ndarray, setpoint: float):
    """(rise time 10-90%, overshoot %, settling time 2%, steady-state error %).

    Rise time is inf when the response never reaches 90% of the setpoint;
    settling time is inf when the series never stays within the 2% band.
    """
    if setpoint <= 0.0:
        raise DomainError("setpoint must be positive")
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    t10 = _interp_crossing(t, v, 0.1 * setpoint)
    t90 = _interp_crossing(t, v, 0.9 * setpoint)
    rise = t90 - t10 if math.isfinite(t90) else math.inf
    overshoot = max(0.0, (float(np.max(v)) - setpoint) / setpoint * 100.0)
    band = 0.02 * setpoint
    outside = np.nonzero(np.abs(v - setpoint) > band)[0]
    if len(outside) == 0:
        settling = 0.0
    elif outside[-1] == len(v) - 1:
        settling = math.inf
    else:
        settling = float(t[outside[-1] + 1])
    tail = v[int(math.floor(0.9 * len(v))):]
    sse = abs(float(np.mean(tail)) - setpoint) / setpoint * 100.0
    return rise, overshoot, settling, sse


def summarize(record: RunRecord,
              convergence_threshold: float = DEFAULT_CONVERGENCE_THRESHOLD,
              velocity_setpoint: float | None = None) -> MetricsSummary:
    """Summary metrics of a run; the error channel is the CG cross-track."""
    if len(record.t) < 100:
        raise DomainError("need at least 100 samples to summarize")
    e = np.abs(record.e_cg)
    peak = float(np.max(e))
    s_total = float(record.s[-1])
    tail = record.s >= (1.0 - STEADY_STATE_WINDOW) * s_total
    steady = float(np.mean(e[tail]))
    rms = float(np.sqrt(np.mean(record.e_cg ** 2)))
    above = np.nonzero(e >= convergence_threshold)[0]
    if len(above) == 0:
        converge_s = 0.0
    elif above[-1] == len(e) - 1:
        converge_s = math.inf
    else:
        converge_s = float(record.s[above[-1] + 1])
    steering_tv = float(np.sum(np.abs(np.diff(record.delta_cmd))))
    if velocity_setpoint is None:
        velocity_setpoint = record.meta.get("target_speed")
    if velocity_setpoint:
        rise, overshoot, settling, sse = step_response_metrics(
            record.t, record.v_x, velocity_setpoint)
    else:
        rise, overshoot, settling, sse = math.inf, 0.0, math.inf, 0.0
    return MetricsSummary(peak, steady, rms, converge_s, steering_tv,
                          rise, overshoot, settling, sse)
