"""Reproduction presets: canned scenario groups that regenerate the
benchmark figures at desk scale.

Each preset returns a list of (filename_stem, svg_text) plots plus
(filename, csv_text) data files.  All output is deterministic.
"""

import math
from dataclasses import replace

import numpy as np

from .estimation import SensorNoiseConfig, circle_truth, loop_closure_error, run_filter, simulate_sensors
from .harness import (DEFAULT_PLANT, CourseSpec, ScenarioConfig, SweepSpec,
                      record_to_csv, run_scenario, run_sweep, summary_csv,
                      sweep_scenarios)
from .longitudinal import PidGains
from .metrics import RunRecord
from .errors import ConfigError
from .svgplot import emit_plot, line_plot
from .sysid import (SQUARE_TUNED_GAINS, ThrottlePlant, excite, fit_arx2,
                    io_record_to_csv, tune_pid_from_model, velocity_step_response)

SPEEDS_KMPH = (10.0, 20.0, 35.0)

# Legend sweep points for the tuning figures.
PURE_PURSUIT_KS = (0.2, 0.35, 0.6)
STANLEY_KS = (1.5, 2.5, 5.0)
PID_KPS = (0.8, 1.5, 2.5)
LQR_Q1S = (0.5, 1.0, 5.0)

FIGURES = ("fig6", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13",
           "fig14", "fig15", "loop")


def _base(controller: str, course: str, speed_kmph: float,
          **kw) -> ScenarioConfig:
    return ScenarioConfig(
        name=f"{controller}_{course}_{speed_kmph:g}kmph",
        controller=controller,
        plant=DEFAULT_PLANT[controller],
        course=CourseSpec(type=course),
        target_speed=speed_kmph / 3.6,
        **kw)


def _controller_sweep_figure(controller: str, grid, label_fmt, sub_field,
                             courses=("straight", "circle", "lane_change", "sine")):
    """One error-vs-distance SVG per course x speed, one trace per grid value."""
    plots = []
    csvs = []
    for course in courses:
        for speed in SPEEDS_KMPH:
            records = []
            for value in grid:
                cfg = _base(controller, course, speed)
                sub = replace(getattr(cfg, sub_field), **value[1])
                cfg = replace(cfg, name=label_fmt(value[0]), **{sub_field: sub})
                records.append(run_scenario(cfg))
            stem = f"{controller}_{course}_{speed:g}kmph"
            plots.append((stem, emit_plot(records, "error_vs_distance")))
            for rec in records:
                csvs.append((f"{stem}_{rec.meta['name']}.csv", record_to_csv(rec)))
    return plots, csvs


def preset_fig6():
    """Longitudinal identification: square-wave response and tuned tracking."""
    record = excite(ThrottlePlant(), "square", 0.5, 40.0, 180.0, 0.05)
    plant = fit_arx2(record)
    gains, report = tune_pid_from_model(plant)
    t, v, u = velocity_step_response(gains, setpoint=5.0, duration=40.0)
    plots = [
        ("fig6_excitation", line_plot(
            [("throttle", record.t, record.u), ("velocity", record.t, record.v)],
            "square-wave excitation response", "t [s]", "throttle / velocity")),
        ("fig6_tracking", line_plot(
            [("velocity", t, v), ("reference", t, np.full_like(t, 5.0)),
             ("throttle", t, u)],
            "tuned velocity tracking", "t [s]", "v [m/s] / throttle")),
    ]
    csvs = [("fig6_excitation.csv", io_record_to_csv(record))]
    return plots, csvs


def _weight_change_figure(adaptive: bool, stem: str):
    gains, _ = tune_pid_from_model(
        fit_arx2(excite(ThrottlePlant(), "square", 0.5, 40.0, 180.0, 0.05)))
    series = []
    for extra, label in ((0.0, "unloaded"), (180.0, "loaded +180kg")):
        t, v, _ = velocity_step_response(gains, adaptive=adaptive,
                                         extra_mass=extra)
        series.append((label, t, v))
    kind = "adaptive PID" if adaptive else "simple PID"
    return [(stem, line_plot(series, f"{kind} unit step, mass change",
                             "t [s]", "v [m/s]"))], []


def preset_fig8():
    return _weight_change_figure(False, "fig8_simple_pid_mass")


def preset_fig9():
    return _weight_change_figure(True, "fig9_adaptive_pid_mass")


def preset_fig10():
    """Convergence checks: 1 m offset on the straight course at 10 kmph,
    plus the circle-course feedforward comparison for the optimal controller."""
    records = []
    for controller in ("pure_pursuit", "stanley", "pid"):
        cfg = replace(_base(controller, "straight", 10.0), initial_offset=1.0,
                      name=controller)
        records.append(run_scenario(cfg))
    plots = [("fig10_convergence", emit_plot(records, "error_vs_distance"))]
    csvs = [(f"fig10_{r.meta['name']}.csv", record_to_csv(r)) for r in records]

    ff_records = []
    for mode, label in (("full", "with feedforward"), ("none", "no feedforward")):
        cfg = _base("lqr", "circle", 10.0)
        cfg = replace(cfg, lqr=replace(cfg.lqr, feedforward=mode), name=label)
        ff_records.append(run_scenario(cfg))
    plots.append(("fig10_lqr_feedforward",
                  emit_plot(ff_records, "error_vs_distance")))
    csvs += [(f"fig10_lqr_{r.meta['name'].replace(' ', '_')}.csv",
              record_to_csv(r)) for r in ff_records]
    return plots, csvs


def preset_fig11():
    return _controller_sweep_figure(
        "pure_pursuit", [(k, {"k": k}) for k in PURE_PURSUIT_KS],
        lambda k: f"k={k:g}", "pure_pursuit")


def preset_fig12():
    return _controller_sweep_figure(
        "stanley", [(k, {"k": k}) for k in STANLEY_KS],
        lambda k: f"k={k:g}", "stanley")


def preset_fig13():
    return _controller_sweep_figure(
        "pid", [(kp, {"k_p": kp}) for kp in PID_KPS],
        lambda kp: f"k={kp:g}", "steering_pid")


def preset_fig14():
    return _controller_sweep_figure(
        "lqr", [(q1, {"q1": q1}) for q1 in LQR_Q1S],
        lambda q1: f"q1={q1:g}", "lqr")


def preset_fig15():
    """MPC runs on the curvature-rich courses."""
    plots = []
    csvs = []
    for course in ("lane_change", "sine"):
        records = []
        for speed in SPEEDS_KMPH:
            cfg = _base("mpc", course, speed)
            cfg = replace(cfg, name=f"{speed:g} kmph")
            records.append(run_scenario(cfg))
        stem = f"mpc_{course}"
        plots.append((stem, emit_plot(records, "error_vs_distance")))
        for rec, speed in zip(records, SPEEDS_KMPH):
            csvs.append((f"{stem}_{speed:g}kmph.csv", record_to_csv(rec)))
    return plots, csvs


def preset_loop():
    """EKF loop-closure: estimated vs true trajectory on a 235 m loop."""
    noise = SensorNoiseConfig(seed=3)
    truth = circle_truth(235.0, 10.0 / 3.6, noise.rate_hz)
    stream = simulate_sensors(truth, noise)
    means, _, _ = run_filter(stream, (truth.x[0], truth.y[0], truth.theta[0]))
    closure, length, ratio = loop_closure_error(means[:, :2], truth)
    title = (f"loop closure: {closure:.2f} m over {length:.0f} m "
             f"({100 * ratio:.2f}%)")
    plot = line_plot([("truth", truth.x, truth.y),
                      ("estimate", means[:, 0], means[:, 1])],
                     title, "x [m]", "y [m]", equal_axes=True)
    lines = ["t,x_true,y_true,theta_true,x_est,y_est,theta_est"]
    for i in range(len(truth.t)):
        lines.append(",".join(format(v, ".9g") for v in
                              (truth.t[i], truth.x[i], truth.y[i], truth.theta[i],
                               means[i, 0], means[i, 1], means[i, 2])))
    return [("loop_closure", plot)], [("loop_closure.csv", "\n".join(lines) + "\n")]


PRESET_BUILDERS = {
    "fig6": preset_fig6,
    "fig8": preset_fig8,
    "fig9": preset_fig9,
    "fig10": preset_fig10,
    "fig11": preset_fig11,
    "fig12": preset_fig12,
    "fig13": preset_fig13,
    "fig14": preset_fig14,
    "fig15": preset_fig15,
    "loop": preset_loop,
}


def build_preset(figure: str):
    """Returns (plots, csvs) lists of (name, text) for a repro figure."""
    if figure not in PRESET_BUILDERS:
        raise ConfigError(f"unknown figure {figure!r}; choose from "
                          f"{', '.join(FIGURES)}")
    return PRESET_BUILDERS[figure]()


def default_sweep() -> SweepSpec:
    """The full controller x course x speed benchmark matrix."""
    return SweepSpec()
