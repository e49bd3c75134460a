"""Plant excitation, 2nd-order identification, spec-driven PID tuning, and
cornering-stiffness least squares.

The simulator's "true" longitudinal plant is a first-order throttle-to-force
lag plus linear drag, which gives an effective 2nd-order throttle-to-velocity
response.  Identification fits the discrete ARX(2,1) form
v_k = a1 v_{k-1} + a2 v_{k-2} + b1 u_{k-1} and converts the poles back to
(gain, tau1, tau2).
"""

import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, ExcitationError, FitError
from .longitudinal import (AdaptivePidState, PidGains, PidState,
                           adaptive_pid_step, pid_step)
from .models import SimState, VehicleParams, dynamic_matrices, step_dynamic

# Velocity-control gain sets identified from square-wave and sine-wave
# excitation of the instrumented test vehicle; archived as reference
# constants for regression tests and the throttle-chatter comparison, not as
# tuning targets.
SQUARE_TUNED_GAINS = PidGains(0.63359, 0.00015, 26.31990)
SINE_TUNED_GAINS = PidGains(2.236, 0.00186, 49.35450)


@dataclass(frozen=True)
class LongitudinalPlant:
    """2nd-order lag: V(s)/U(s) = gain / ((tau1 s + 1)(tau2 s + 1))."""

    gain: float
    tau1: float
    tau2: float
    delay: float = 0.0
    r_squared: float = 1.0

    def __post_init__(self):
        if not (self.gain > 0.0 and self.tau1 >= self.tau2 > 0.0):
            raise DomainError("need gain > 0 and tau1 >= tau2 > 0")

    def arx_coefficients(self, dt: float):
        """Equivalent discrete ARX(2,1) coefficients (a1, a2, b1) at dt."""
        p1 = math.exp(-dt / self.tau1)
        p2 = math.exp(-dt / self.tau2)
        a1 = p1 + p2
        a2 = -p1 * p2
        b1 = self.gain * (1.0 - a1 - a2)
        return a1, a2, b1

    def simulate(self, u: np.ndarray, dt: float, v0: float = 0.0) -> np.ndarray:
        """Response of the ARX-equivalent discrete model to an input series."""
        a1, a2, b1 = self.arx_coefficients(dt)
        n = len(u)
        v = np.empty(n)
        v[0] = v0
        if n > 1:
            v[1] = v0
        for k in range(2, n):
            v[k] = a1 * v[k - 1] + a2 * v[k - 2] + b1 * u[k - 1]
        return v


@dataclass(frozen=True)
class IoRecord:
    """Uniformly sampled (time, throttle, velocity) series."""

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if not (len(self.t) == len(self.u) == len(self.v)):
            raise DomainError("record channels must have equal length")
        dts = np.diff(self.t)
        if np.any(dts <= 0.0):
            raise DomainError("time must be strictly increasing")
        if len(dts) and (np.max(dts) - np.min(dts)) > 1e-9 * max(1.0, np.max(dts)):
            raise DomainError("record must be uniformly sampled")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


def io_record_to_csv(record: IoRecord) -> str:
    buf = io.StringIO()
    buf.write("t,u,v\n")
    for i in range(len(record.t)):
        buf.write(f"{record.t[i]:.9g},{record.u[i]:.9g},{record.v[i]:.9g}\n")
    return buf.getvalue()


def io_record_from_csv(text: str) -> IoRecord:
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("t,"):
            continue
        rows.append([float(x) for x in line.split(",")])
    arr = np.asarray(rows)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DomainError("IoRecord CSV needs columns t,u,v")
    return IoRecord(arr[:, 0], arr[:, 1], arr[:, 2])


@dataclass
class ThrottlePlant:
    """Simulated longitudinal plant: throttle -> force lag -> velocity.

    m vdot = F - drag*v, taudot F = k_thrust*u - F.  Added payload enters
    through the mass.
    """

    mass: float = 850.0
    k_thrust: float = 2125.0     # [N per unit throttle]
    drag: float = 141.6667       # [N per m/s]
    tau_force: float = 0.4       # [s]
    velocity: float = 0.0
    force: float = 0.0

    def reset(self, velocity: float = 0.0):
        self.velocity = velocity
        self.force = self.drag * velocity

    def step(self, throttle: float, dt: float) -> float:
        throttle = min(max(throttle, 0.0), 1.0)
        self.force += dt * (self.k_thrust * throttle - self.force) / self.tau_force
        self.velocity += dt * (self.force - self.drag * self.velocity) / self.mass
        return self.velocity


def waveform_value(waveform: str, amplitude: float, period: float, t: float) -> float:
    if waveform == "square":
        return amplitude if (t % period) < 0.5 * period else 0.0
    if waveform == "sine":
        return 0.5 * amplitude * (1.0 - math.cos(2.0 * math.pi * t / period))
    raise DomainError(f"unknown waveform {waveform!r}")


def excite(plant: ThrottlePlant, waveform: str, amplitude: float,
           period: float, duration: float, dt: float = 0.05) -> IoRecord:
    """Schedule an excitation waveform and record the velocity response."""
    if duration < 3.0 * period:
        raise DomainError("duration must cover at least 3 periods")
    n = int(round(duration / dt))
    t = np.arange(n) * dt
    u = np.array([waveform_value(waveform, amplitude, period, ti) for ti in t])
    plant.reset()
    v = np.empty(n)
    v[0] = plant.velocity
    for k in range(1, n):
        v[k] = plant.step(u[k - 1], dt)
    return IoRecord(t, u, v)


def fit_arx2(record: IoRecord) -> LongitudinalPlant:
    """Least-squares ARX(2,1) fit; converts discrete poles to (K, tau1, tau2).

    Raises ExcitationError on a constant input and FitError when the poles
    are unstable or complex (no overdamped 2nd-order equivalent).
    """
    if len(record.t) < 50:
        raise DomainError("need at least 50 samples")
    if float(np.std(record.u)) < 1e-12:
        raise ExcitationError("constant input cannot excite the model")
    v, u = record.v, record.u
    phi = np.column_stack((v[1:-1], v[:-2], u[1:-1]))
    target = v[2:]
    sv = np.linalg.svd(phi, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise ExcitationError("regression matrix is rank deficient")
    theta, *_ = np.linalg.lstsq(phi, target, rcond=None)
    a1, a2, b1 = (float(x) for x in theta)
    resid = target - phi @ theta
    ss_tot = float(np.sum((target - np.mean(target)) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    disc = a1 * a1 + 4.0 * a2
    diagnostics = {"a1": a1, "a2": a2, "b1": b1, "r_squared": r2}
    if disc < 0.0:
        raise FitError("complex discrete poles, no overdamped equivalent",
                       diagnostics)
    p1 = 0.5 * (a1 + math.sqrt(disc))
    p2 = 0.5 * (a1 - math.sqrt(disc))
    if not (0.0 < p2 <= p1 < 1.0):
        raise FitError(f"poles ({p1:.4f}, {p2:.4f}) outside the stable "
                       "overdamped range", diagnostics)
    dt = record.dt
    tau1 = -dt / math.log(p1)
    tau2 = -dt / math.log(p2)
    gain = b1 / (1.0 - a1 - a2)
    return LongitudinalPlant(gain, tau1, tau2, 0.0, r2)


@dataclass(frozen=True)
class SpecReport:
    """Closed-loop verification against the velocity-control specs."""

    rise_time: float
    overshoot_pct: float
    settling_time: float
    sse_pct: float
    passed: bool


def verify_gains(plant: LongitudinalPlant, gains: PidGains, dt: float = 0.02,
                 setpoint: float = 1.0, duration: float = 40.0,
                 sse_limit: float = 2.0, overshoot_limit: float = 10.0) -> SpecReport:
    """Simulate the closed loop (throttle clamped to [0, 1]) and measure the
    step-response specs."""
    from .metrics import step_response_metrics

    n = int(round(duration / dt))
    a1, a2, b1 = plant.arx_coefficients(dt)
    v = np.zeros(n)
    state = PidState()
    u_applied = 0.0
    for k in range(2, n):
        v[k] = a1 * v[k - 1] + a2 * v[k - 2] + b1 * u_applied
        u_applied, state = pid_step(gains, state, setpoint, v[k], dt, 0.0, 1.0)
    t = np.arange(n) * dt
    rise, overshoot, settling, sse = step_response_metrics(t, v, setpoint)
    passed = (sse < sse_limit and overshoot < overshoot_limit
              and math.isfinite(rise))
    return SpecReport(rise, overshoot, settling, sse, passed)


def tune_pid_from_model(plant: LongitudinalPlant, rise_time: float = 2.0,
                        damping: float = 1.2, dt: float = 0.02):
    """Pole placement on the dominant 2nd-order closed loop.

    The desired characteristic polynomial is
    (s^2 + 2 zeta wn s + wn^2)(s + 5 zeta wn) with wn = 1.8/rise_time.
    Returns (PidGains in the discrete form used by pid_step, SpecReport).
    """
    if rise_time <= 0.0 or damping <= 0.0:
        raise DomainError("rise time and damping must be positive")
    wn = 1.8 / rise_time
    zeta = damping
    p3 = 5.0 * zeta * wn
    t1, t2, k = plant.tau1, plant.tau2, plant.gain
    k_d = max(0.0, (t1 * t2 * (2.0 * zeta * wn + p3) - (t1 + t2)) / k)
    k_p = max(0.0, (t1 * t2 * (wn * wn + 2.0 * zeta * wn * p3) - 1.0) / k)
    k_i_cont = t1 * t2 * wn * wn * p3 / k
    gains = PidGains(k_p, k_i_cont * dt, k_d)
    report = verify_gains(plant, gains, dt)
    return gains, report


# ---------------------------------------------------------------------------
# Cornering-stiffness least squares on the lateral dynamic model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LateralRunData:
    """Dynamic-model run channels needed by the stiffness estimator."""

    v_x: np.ndarray
    v_y: np.ndarray
    omega_z: np.ndarray
    delta: np.ndarray
    vy_dot: np.ndarray
    wz_dot: np.ndarray


def lateral_excitation_run(params: VehicleParams, v_x: float = 10.0,
                           duration: float = 20.0, dt: float = 0.01,
                           amplitude: float = 0.08, period: float = 4.0,
                           noise: float = 0.0, seed: int = 0) -> LateralRunData:
    """Sine-steer the dynamic model and record states with exact derivatives.

    ``noise`` adds zero-mean Gaussian disturbance of that relative magnitude
    to every recorded channel (for Monte-Carlo robustness studies).
    """
    a11, a12, a21, a22, b1, b2 = dynamic_matrices(params, v_x)
    n = int(round(duration / dt))
    state = SimState(v_x=v_x)
    rows = np.empty((n, 6))
    for k in range(n):
        d = amplitude * math.sin(2.0 * math.pi * k * dt / period)
        vy, wz = state.v_y, state.omega_z
        rows[k] = (v_x, vy, wz, d,
                   a11 * vy + a12 * wz + b1 * d,
                   a21 * vy + a22 * wz + b2 * d)
        state = step_dynamic(state, d, params, dt)
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        scale = np.maximum(np.std(rows, axis=0), 1e-12)
        rows = rows + rng.normal(0.0, noise, rows.shape) * scale
    return LateralRunData(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3],
                          rows[:, 4], rows[:, 5])


def estimate_cornering_stiffness(data: LateralRunData, mass: float,
                                 inertia_z: float, l_f: float, l_r: float):
    """Linear least squares for (c_f, c_r) from the lateral dynamics.

    Stacks the lateral-force and yaw-moment balances; raises ExcitationError
    when the steering history does not excite both unknowns.
    """
    if np.any(data.v_x <= 0.0):
        raise DomainError("stiffness estimation needs v_x > 0 throughout")
    alpha_f_lin = (data.v_y + l_f * data.omega_z) / data.v_x - data.delta
    alpha_r_lin = (data.v_y - l_r * data.omega_z) / data.v_x
    # m (vy_dot + v_x wz) = -c_f a_f - c_r a_r ; I_z wz_dot = -l_f c_f a_f + l_r c_r a_r
    rows_f = np.concatenate((-alpha_f_lin, -l_f * alpha_f_lin))
    rows_r = np.concatenate((-alpha_r_lin, l_r * alpha_r_lin))
    rhs = np.concatenate((mass * (data.vy_dot + data.v_x * data.omega_z),
                          inertia_z * data.wz_dot))
    phi = np.column_stack((rows_f, rows_r))
    sv = np.linalg.svd(phi, compute_uv=False)
    if sv[0] < 1e-12 or sv[-1] < 1e-8 * sv[0]:
        raise ExcitationError("steering history does not excite the "
                              "stiffness parameters")
    sol, *_ = np.linalg.lstsq(phi, rhs, rcond=None)
    return float(sol[0]), float(sol[1])


def velocity_step_response(gains: PidGains, adaptive: bool = False,
                           extra_mass: float = 0.0, setpoint: float = 1.0,
                           duration: float = 40.0, dt: float = 0.02,
                           gamma: float = 0.1, filter_tau: float = 0.5,
                           deriv_tau: float = 0.1):
    """Closed-loop velocity step on the throttle plant.

    Returns (t, v, throttle) arrays; with ``adaptive`` the modified-MIT-rule
    controller runs with equal learning rates ``gamma`` on all three gains.
    Setting gamma = 0 reproduces the plain PID trace exactly.
    """
    plant = ThrottlePlant(mass=850.0 + extra_mass)
    plant.reset()
    n = int(round(duration / dt))
    t = np.arange(n) * dt
    v = np.empty(n)
    u_arr = np.empty(n)
    pid_state = PidState()
    adapt = AdaptivePidState(gains, gamma, gamma, gamma, filter_tau) \
        if adaptive else None
    for k in range(n):
        v[k] = plant.velocity
        if adaptive:
            u, adapt, pid_state = adaptive_pid_step(
                adapt, pid_state, setpoint, v[k], dt, deriv_tau=deriv_tau)
        else:
            u, pid_state = pid_step(gains, pid_state, setpoint, v[k], dt,
                                    deriv_tau=deriv_tau)
        u_arr[k] = u
        plant.step(u, dt)
    return t, v, u_arr


# ---------------------------------------------------------------------------
# Throttle-chatter comparison task
# ---------------------------------------------------------------------------


def throttle_variation_task(gains: PidGains, dt: float = 0.05,
                            setpoint: float = 5.0, duration: float = 60.0,
                            meas_noise: float = 0.0, seed: int = 7,
                            deriv_tau: float = 0.1,
                            plant: ThrottlePlant | None = None) -> float:
    """Total variation of the throttle while tracking a velocity step.

    Gains whose derivative channel is too aggressive for the plant's force
    lag limit-cycle here, which shows up as a much larger total variation.
    """
    plant = plant or ThrottlePlant()
    plant.reset()
    rng = np.random.default_rng(seed)
    n = int(round(duration / dt))
    state = PidState()
    tv = 0.0
    u_prev = 0.0
    for _ in range(n):
        measured = plant.velocity
        if meas_noise > 0.0:
            measured += rng.normal(0.0, meas_noise)
        u, state = pid_step(gains, state, setpoint, measured, dt, 0.0, 1.0,
                            deriv_tau=deriv_tau)
        tv += abs(u - u_prev)
        u_prev = u
        plant.step(u, dt)
    return tv
