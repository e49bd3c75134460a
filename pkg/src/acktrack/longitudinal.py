"""Velocity control: discrete PID and the modified-MIT-rule adaptive PID.

The discrete PID is u = K_p e + K_i * sum(e) + K_d * (e - e_prev)/dt, with
conditional integration as anti-windup (the accumulator is frozen while the
output is saturated).  The adaptive variant nudges the gains each step from
filtered-error differences before running the same PID update, so with all
learning rates at zero its output trace is bit-identical to the plain PID.
"""

import math
from dataclasses import dataclass, field, replace

from .errors import DomainError


@dataclass(frozen=True)
class PidGains:
    k_p: float
    k_i: float
    k_d: float

    def __post_init__(self):
        for g in (self.k_p, self.k_i, self.k_d):
            if not math.isfinite(g) or g < 0.0:
                raise DomainError("PID gains must be finite and non-negative")


@dataclass(frozen=True)
class PidState:
    """Accumulator + previous error; deriv_filt holds the filtered D channel."""

    integral: float = 0.0
    prev_error: float = 0.0
    deriv_filt: float = 0.0
    primed: bool = False


def pid_step(gains: PidGains, state: PidState, setpoint: float, measured: float,
             dt: float, out_lo: float = 0.0, out_hi: float = 1.0,
             deriv_tau: float = 0.0):
    """One discrete PID update; returns (output, new_state).

    With deriv_tau > 0 the derivative channel is low-pass filtered, which is
    how noisy measurements are tamed; deriv_tau = 0 reproduces the raw
    difference quotient.
    """
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    e = setpoint - measured
    deriv = (e - state.prev_error) / dt if state.primed else 0.0
    if deriv_tau > 0.0:
        alpha = dt / (deriv_tau + dt)
        deriv = state.deriv_filt + alpha * (deriv - state.deriv_filt)
    integral = state.integral + e
    u_raw = gains.k_p * e + gains.k_i * integral + gains.k_d * deriv
    u = min(max(u_raw, out_lo), out_hi)
    if u != u_raw:
        # Saturated: hold the accumulator (conditional integration).
        integral = state.integral
    return u, PidState(integral, e, deriv, True)


@dataclass
class AdaptivePidState:
    """Mutable gain copy plus the filter states driving the MIT-rule updates."""

    gains: PidGains
    gamma_p: float = 0.1
    gamma_i: float = 0.1
    gamma_d: float = 0.1
    filter_tau: float = 0.5
    gain_bound_scale: float = 10.0
    e_m: float = 0.0
    d_raw: float = 0.0
    d_m: float = 0.0
    prev_error: float = 0.0
    primed: bool = False
    bounds: tuple = field(default=None)

    def __post_init__(self):
        if self.filter_tau <= 0.0:
            raise DomainError("filter time constant must be positive")
        if self.bounds is None:
            self.bounds = tuple(
                (0.0, self.gain_bound_scale * g if g > 0.0 else self.gain_bound_scale)
                for g in (self.gains.k_p, self.gains.k_i, self.gains.k_d))


def adaptive_pid_step(adapt: AdaptivePidState, pid_state: PidState,
                      setpoint: float, measured: float, dt: float,
                      out_lo: float = 0.0, out_hi: float = 1.0,
                      deriv_tau: float = 0.0):
    """Adaptive-gain PID update; returns (output, adapt_state, pid_state).

    Filter states are advanced first, then K_p += g_p |e - e_m|,
    K_i += g_i e_m, K_d += g_d |D - D_m| (clamped to bounds), then the
    ordinary PID step runs with the updated gains.
    """
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    e = setpoint - measured
    alpha = dt / (adapt.filter_tau + dt)
    e_m = adapt.e_m + alpha * (e - adapt.e_m)
    d_raw = (e - adapt.prev_error) / dt if adapt.primed else 0.0
    d_m = adapt.d_m + alpha * (d_raw - adapt.d_m)

    (lo_p, hi_p), (lo_i, hi_i), (lo_d, hi_d) = adapt.bounds
    k_p = min(max(adapt.gains.k_p + adapt.gamma_p * abs(e - e_m), lo_p), hi_p)
    k_i = min(max(adapt.gains.k_i + adapt.gamma_i * e_m, lo_i), hi_i)
    k_d = min(max(adapt.gains.k_d + adapt.gamma_d * abs(d_raw - d_m), lo_d), hi_d)
    gains = PidGains(k_p, k_i, k_d)

    u, pid_state = pid_step(gains, pid_state, setpoint, measured, dt,
                            out_lo, out_hi, deriv_tau)
    new_adapt = replace(adapt, gains=gains, e_m=e_m, d_raw=d_raw, d_m=d_m,
                        prev_error=e, primed=True)
    return u, new_adapt, pid_state
