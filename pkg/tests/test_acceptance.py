"""Acceptance suite: every benchmark criterion at its stated tolerance.

Run with ``pytest -s tests/test_acceptance.py`` to see one PASS line per
criterion.  Scenario runs are shared through module fixtures so the whole
suite stays fast.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from acktrack import kernels
from acktrack.estimation import SensorNoiseConfig, loop_closure_experiment
from acktrack.harness import (DEFAULT_PLANT, CourseSpec, ScenarioConfig,
                              record_to_csv, run_scenario)
from acktrack.lateral import PurePursuitConfig
from acktrack.longitudinal import PidGains
from acktrack.metrics import step_response_metrics, summarize
from acktrack.models import ActuatorModel, SimState, VehicleParams
from acktrack.optimal import LqrConfig, MpcConfig, discretize_zoh, \
    build_lateral_matrices, mpc_initial_state, mpc_solve, solve_dare
from acktrack.sysid import (IoRecord, LongitudinalPlant, SINE_TUNED_GAINS,
                            SQUARE_TUNED_GAINS, lateral_excitation_run,
                            estimate_cornering_stiffness, fit_arx2,
                            excite, ThrottlePlant, throttle_variation_task,
                            tune_pid_from_model, velocity_step_response)

KMPH = 1.0 / 3.6
SPEEDS = (10.0, 20.0, 35.0)
COURSES = ("straight", "circle", "lane_change", "sine")


def report(criterion, passed, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, detail


def scenario(controller, course, speed_kmph, **kw):
    return ScenarioConfig(
        name=f"{controller}_{course}_{speed_kmph:g}",
        controller=controller, plant=DEFAULT_PLANT[controller],
        course=CourseSpec(type=course), target_speed=speed_kmph * KMPH, **kw)


@pytest.fixture(scope="module")
def stanley_matrix():
    out = {}
    for course in COURSES:
        for speed in SPEEDS:
            rec = run_scenario(scenario("stanley", course, speed))
            out[(course, speed)] = (rec, summarize(rec))
    return out


@pytest.fixture(scope="module")
def mpc_matrix():
    out = {}
    for course in COURSES:
        for speed in SPEEDS:
            rec = run_scenario(scenario("mpc", course, speed))
            out[(course, speed)] = summarize(rec)
    return out


def test_criterion_1_pure_pursuit_straight_steady_state():
    rec = run_scenario(scenario("pure_pursuit", "straight", 10.0))
    m = summarize(rec)
    ok = rec.completed and m.steady_state_error <= 0.15
    report(1, ok, f"pure pursuit straight 10 kmph steady |e| = "
                  f"{m.steady_state_error:.4f} m (<= 0.15)")


def test_criterion_2_pure_pursuit_circle_lookahead_ordering():
    sse = {}
    for label, k in (("small", 0.1), ("large", 0.6)):
        cfg = scenario("pure_pursuit", "circle", 35.0,
                       pure_pursuit=PurePursuitConfig(k=k))
        sse[label] = summarize(run_scenario(cfg)).steady_state_error
    ok = sse["small"] <= 0.3 and sse["large"] >= 1.5 * sse["small"]
    report(2, ok, f"circle 35 kmph steady error small-k {sse['small']:.3f} m "
                  f"(<= 0.3), large-k {sse['large']:.3f} m "
                  f"(>= {1.5 * sse['small']:.3f})")


def test_criterion_3_stanley_error_bands(stanley_matrix):
    worst_curvy = 0.0
    for course in ("lane_change", "sine"):
        for speed in SPEEDS:
            worst_curvy = max(worst_curvy,
                              stanley_matrix[(course, speed)][1].peak_abs_error)
    circle_sse = [stanley_matrix[("circle", s)][1].steady_state_error
                  for s in SPEEDS]
    # The circle observation is one number per course in the source data;
    # the worst speed's steady error must land in the band, no speed above it.
    ok = (worst_curvy < 0.5
          and max(circle_sse) >= 0.1
          and max(circle_sse) <= 0.6)
    report(3, ok, f"stanley curvy-course peak {worst_curvy:.3f} m (< 0.5); "
                  f"circle steady errors "
                  f"{', '.join(f'{v:.3f}' for v in circle_sse)} m "
                  f"(worst in [0.1, 0.6])")


def test_criterion_4_steering_pid_speed_limits():
    rec35 = run_scenario(scenario("pid", "lane_change", 35.0))
    m35 = summarize(rec35)
    rec10 = run_scenario(scenario("pid", "lane_change", 10.0))
    m10 = summarize(rec10)
    high_fails = rec35.diverged or m35.peak_abs_error > 0.8
    ok = high_fails and (not rec10.diverged) and m10.peak_abs_error < 0.3
    report(4, ok, f"steering PID lane change: 35 kmph peak "
                  f"{m35.peak_abs_error:.2f} m / diverged={rec35.diverged} "
                  f"(fails as expected), 10 kmph peak "
                  f"{m10.peak_abs_error:.3f} m (< 0.3)")


def test_criterion_5_lqr_feedforward_benefit():
    details = []
    ok = True
    for speed in SPEEDS:
        sse = {}
        for mode in ("full", "none"):
            cfg = scenario("lqr", "circle", speed,
                           lqr=LqrConfig(feedforward=mode))
            sse[mode] = summarize(run_scenario(cfg)).steady_state_error
        ok = ok and sse["full"] <= 0.5 * sse["none"]
        details.append(f"{speed:g} kmph {sse['full']:.4f} vs {sse['none']:.4f}")
    report(5, ok, "LQR circle steady |e| with vs without feedforward "
                  "(>= 50% lower): " + "; ".join(details))


def test_criterion_6_mpc_robustness(mpc_matrix):
    ok = True
    details = []
    for course in COURSES:
        peaks = {s: mpc_matrix[(course, s)].peak_abs_error for s in SPEEDS}
        # floor the reference peak at 1 mm so the ratio is meaningful on the
        # straight course where both runs track essentially exactly
        ratio = peaks[35.0] / max(peaks[10.0], 1e-3)
        ok = ok and max(peaks.values()) <= 0.5 and ratio <= 3.0
        details.append(f"{course} max {max(peaks.values()):.3f} m ratio {ratio:.2f}")
    report(6, ok, "MPC bounded by 0.5 m with 35/10 kmph ratio <= 3: "
                  + "; ".join(details))


def test_criterion_7_dare_solver():
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    P, G = solve_dare(np.array([[1.0]]), np.array([[1.0]]),
                      np.array([[1.0]]), np.array([[1.0]]))
    scalar_err = abs(P[0, 0] - golden)

    params = VehicleParams()
    m = build_lateral_matrices(params, 10.0)
    A_d, B_d = discretize_zoh(m.A, m.B, 0.02)
    B2 = B_d.reshape(4, 1)
    Q = np.diag([1.0, 0.0, 0.0, 0.0])
    R = np.array([[1.0]])
    P4, _ = solve_dare(A_d, B2, Q, R, max_iter=20000, tol=1e-12)
    P_ref = Q.copy()
    for _ in range(10000):
        BtP = B2.T @ P_ref
        Gk = np.linalg.solve(R + BtP @ B2, BtP @ A_d)
        P_ref = Q + A_d.T @ P_ref @ (A_d - B2 @ Gk)
        P_ref = 0.5 * (P_ref + P_ref.T)
    matrix_err = float(np.max(np.abs(P4 - P_ref)))
    ok = scalar_err < 1e-8 and matrix_err < 1e-6
    report(7, ok, f"DARE golden-ratio error {scalar_err:.2e} (< 1e-8), "
                  f"matrix vs value-iteration oracle {matrix_err:.2e} (< 1e-6)")


def test_criterion_8_mpc_gradient_check():
    params = VehicleParams()
    rng = np.random.default_rng(0)
    w = (2000.0, 2000.0, 5.0, 200.0)
    worst = 0.0
    for _ in range(100):
        coeffs = rng.normal(0.0, 0.3, 4)
        state0 = rng.normal(0.0, 0.5, 5)
        u = rng.normal(0.0, 0.15, 9)
        v = rng.uniform(2.0, 12.0)
        g = kernels.mpc_grad(u, coeffs, state0, v, params.wheelbase, 0.1, *w)
        h = 1e-5
        for i in range(len(u)):
            up, um = u.copy(), u.copy()
            up[i] += h
            um[i] -= h
            fd = (kernels.mpc_cost(up, coeffs, state0, v, params.wheelbase, 0.1, *w)
                  - kernels.mpc_cost(um, coeffs, state0, v, params.wheelbase, 0.1, *w)) / (2 * h)
            worst = max(worst, abs(g[i] - fd) / max(abs(fd), abs(g[i]), 1e-8))

    from scipy.optimize import minimize_scalar
    cfg = MpcConfig(n_horizon=3, w_cte=100.0, w_psi=0.0, w_delta=0.0,
                    w_ddelta=0.0, max_iter=400, tol=1e-14)
    coeffs = np.array([0.8, 0.05, 0.0, 0.0])
    state0 = mpc_initial_state(coeffs)

    def cost_of_u0(u0):
        return kernels.mpc_cost(np.array([u0, 0.0]), coeffs, state0, 5.0,
                                params.wheelbase, cfg.dt, cfg.w_cte, 0.0,
                                0.0, 0.0)

    ref = minimize_scalar(cost_of_u0, bounds=(-0.436, 0.436),
                          method="bounded", options={"xatol": 1e-10}).x
    sol = mpc_solve(cfg, SimState(v_x=5.0), coeffs, params)
    one_step_err = abs(sol.deltas[0] - ref)
    ok = worst < 1e-4 and one_step_err < 1e-4
    report(8, ok, f"gradient vs finite differences worst rel err {worst:.2e} "
                  f"(< 1e-4); one-step solve vs scalar oracle {one_step_err:.2e}")


def test_criterion_9_adaptive_pid_mass_robustness():
    plant = fit_arx2(excite(ThrottlePlant(), "square", 0.5, 40.0, 180.0, 0.05))
    gains, _ = tune_pid_from_model(plant)
    res = {}
    for adaptive in (False, True):
        for extra in (0.0, 180.0):
            t, v, _ = velocity_step_response(gains, adaptive=adaptive,
                                             extra_mass=extra)
            rise, _, settle, _ = step_response_metrics(t, v, 1.0)
            res[(adaptive, extra)] = (rise, settle)
    d_rise_pid = abs(res[(False, 180.0)][0] - res[(False, 0.0)][0])
    d_rise_ad = abs(res[(True, 180.0)][0] - res[(True, 0.0)][0])
    d_set_pid = abs(res[(False, 180.0)][1] - res[(False, 0.0)][1])
    d_set_ad = abs(res[(True, 180.0)][1] - res[(True, 0.0)][1])

    t0, v0, u0 = velocity_step_response(gains, adaptive=False)
    t1, v1, u1 = velocity_step_response(gains, adaptive=True, gamma=0.0)
    identical = np.array_equal(v0, v1) and np.array_equal(u0, u1)
    ok = d_rise_ad < d_rise_pid and d_set_ad < d_set_pid and identical
    report(9, ok, f"+180 kg deltas adaptive vs simple: rise {d_rise_ad:.3f} "
                  f"< {d_rise_pid:.3f} s, settle {d_set_ad:.3f} "
                  f"< {d_set_pid:.3f} s; gamma=0 trace bit-identical="
                  f"{identical}")


def test_criterion_10_identification_round_trips():
    plant = LongitudinalPlant(3.0, 2.0, 0.5)
    dt = 0.05
    t = np.arange(2000) * dt
    u = 0.5 * (np.sin(2 * np.pi * t / 8.0) > 0)
    fit = fit_arx2(IoRecord(t, u, plant.simulate(u, dt)))
    arx_err = max(abs(fit.gain - 3.0) / 3.0, abs(fit.tau1 - 2.0) / 2.0,
                  abs(fit.tau2 - 0.5) / 0.5)

    params = VehicleParams()
    data = lateral_excitation_run(params)
    cf, cr = estimate_cornering_stiffness(data, params.mass, params.inertia_z,
                                          params.l_f, params.l_r)
    stiff_err = max(abs(cf - params.c_f) / params.c_f,
                    abs(cr - params.c_r) / params.c_r)

    tv_ratio = (throttle_variation_task(SINE_TUNED_GAINS)
                / throttle_variation_task(SQUARE_TUNED_GAINS))
    ok = arx_err < 1e-6 and stiff_err < 1e-3 and tv_ratio >= 2.0
    report(10, ok, f"ARX round-trip rel err {arx_err:.2e} (< 1e-6); "
                   f"stiffness rel err {stiff_err:.2e} (< 1e-3); "
                   f"throttle TV ratio sine/square {tv_ratio:.1f} (>= 2)")


def test_criterion_11_ekf_loop_closure():
    zero = SensorNoiseConfig(wheel_speed_std=0.0, wheel_radius_scale=1.0,
                             gyro_std=0.0, gyro_bias=0.0, heading_std=0.0,
                             seed=0)
    zero_ratio, _, _ = loop_closure_experiment(noise=zero)
    ratios = [loop_closure_experiment(noise=SensorNoiseConfig(seed=s))[0]
              for s in range(20)]
    med = float(np.median(ratios))
    ok = zero_ratio < 0.001 and 0.001 <= med <= 0.015
    report(11, ok, f"loop closure: zero-noise ratio {100 * zero_ratio:.4f}% "
                   f"(< 0.1%), calibrated median over 20 seeds "
                   f"{100 * med:.2f}% (in [0.1%, 1.5%], source value 0.51%)")


def test_criterion_12_numerics():
    from acktrack.models import step_kinematic
    params = VehicleParams()
    radius, v = 10.0, 1.0
    delta = math.atan(params.wheelbase / radius)
    errors = []
    for dt in (1.6, 0.8):
        n = int(round(2.0 * math.pi * radius / v / dt))
        s = SimState(delta=delta)
        for _ in range(n):
            s = step_kinematic(s, v, 0.0, dt, params, "rk4")
        ang = v * (n * dt) / radius
        ex = radius * math.sin(ang)
        ey = radius * (1.0 - math.cos(ang))
        errors.append(math.hypot(s.x - ex, s.y - ey))
    rk4_ratio = errors[0] / errors[1]

    cfg = scenario("stanley", "sine", 20.0)
    bitwise = record_to_csv(run_scenario(cfg)) == record_to_csv(run_scenario(cfg))

    from acktrack.estimation import circle_truth, run_filter, simulate_sensors
    truth = circle_truth(2800.0, 2.7778, 100.0)
    stream = simulate_sensors(truth, SensorNoiseConfig(seed=5))
    _, _, min_minor = run_filter(stream,
                                 (truth.x[0], truth.y[0], truth.theta[0]))
    psd_ok = len(truth.t) > 100000 and min_minor >= -1e-12
    ok = rk4_ratio >= 8.0 and bitwise and psd_ok
    report(12, ok, f"RK4 halving ratio {rk4_ratio:.1f} (>= 8); "
                   f"bit-identical rerun={bitwise}; covariance PSD over "
                   f"{len(truth.t)} EKF steps (min normalized minor "
                   f"{min_minor:.1e})")


def test_actuator_imperfection_note():
    # The deadband swallows the small corrections needed to finish
    # converging, so a residual cross-track error persists.
    base = replace(scenario("pure_pursuit", "straight", 10.0),
                   initial_offset=0.5)
    ideal = summarize(run_scenario(base)).steady_state_error
    lossy_cfg = replace(base, actuator=ActuatorModel(deadband=0.01,
                                                     enabled=True))
    lossy = summarize(run_scenario(lossy_cfg)).steady_state_error
    ok = lossy > ideal
    report("note", ok, f"0.01 rad deadband leaves pure-pursuit steady error "
                       f"{lossy:.4f} m vs ideal {ideal:.2e} m")
