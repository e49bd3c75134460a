"""Scenario configuration, deterministic closed-loop execution, and sweeps.

A scenario couples one course, one plant model, one lateral controller and
one longitudinal mode at a constant target speed.  Everything a run does is
a pure function of (config, seed), so identical configs produce
byte-identical CSV output, serial or parallel.
"""

import concurrent.futures
import io
import math
import sys
from dataclasses import dataclass, field, fields, replace

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import course as course_mod
from .course import Course, nearest_point, signed_offset, tracking_errors
from .errors import ConfigError, EndOfCourse, SingularModelError
from .kernels import wrap_angle
from .lateral import PurePursuitConfig, StanleyConfig, SteeringPid, pure_pursuit, stanley
from .longitudinal import AdaptivePidState, PidGains, PidState, adaptive_pid_step, pid_step
from .metrics import RunRecord
from .models import (ActuatorModel, SimState, V_MIN, VehicleParams, actuate,
                     step_dynamic, step_kinematic)
from .optimal import LqrConfig, MpcConfig, fit_path_local, lqr_steering, mpc_solve, synthesize_lqr_gain
from .sysid import ThrottlePlant

DIVERGENCE_GUARD_M = 20.0

COURSE_TYPES = ("straight", "circle", "lane_change", "sine")
CONTROLLER_TYPES = ("pure_pursuit", "stanley", "pid", "lqr", "mpc")
LONGITUDINAL_TYPES = ("ideal", "pid", "adaptive_pid")
PLANT_TYPES = ("kinematic", "dynamic")

# Plant used by benchmark presets per controller: geometric pure pursuit and
# the kinematic-model MPC run on the kinematic plant; controllers whose
# findings concern behavior at speed run on the dynamic plant.
DEFAULT_PLANT = {"pure_pursuit": "kinematic", "stanley": "dynamic",
                 "pid": "dynamic", "lqr": "dynamic", "mpc": "kinematic"}


@dataclass(frozen=True)
class CourseSpec:
    type: str = "straight"
    length: float = 200.0
    radius: float = 30.0
    approach: float = 50.0
    transition: float = 30.0
    offset: float = 3.5
    exit: float = 50.0
    amplitude: float = 3.0
    wavelength: float = 50.0
    spacing: float = 0.25

    def build(self) -> Course:
        if self.type == "straight":
            return course_mod.gen_straight(self.length, self.spacing)
        if self.type == "circle":
            return course_mod.gen_circle(self.radius, self.spacing)
        if self.type == "lane_change":
            return course_mod.gen_lane_change(self.approach, self.transition,
                                              self.offset, self.exit, self.spacing)
        if self.type == "sine":
            return course_mod.gen_sine(self.amplitude, self.wavelength,
                                       self.length, self.spacing)
        raise ConfigError(f"unknown course type {self.type!r}")


@dataclass(frozen=True)
class LongitudinalSpec:
    type: str = "ideal"
    k_p: float = 1.79
    k_i: float = 0.013
    k_d: float = 0.70
    gamma_p: float = 0.1
    gamma_i: float = 0.1
    gamma_d: float = 0.1
    filter_tau: float = 0.5
    deriv_tau: float = 0.1
    extra_mass: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    course: CourseSpec = field(default_factory=CourseSpec)
    plant: str = "kinematic"
    integrator: str = "rk4"
    dt: float = 0.01
    control_every: int = 2
    controller: str = "pure_pursuit"
    pure_pursuit: PurePursuitConfig = field(default_factory=PurePursuitConfig)
    stanley: StanleyConfig = field(default_factory=StanleyConfig)
    steering_pid: PidGains = field(default_factory=lambda: PidGains(1.5, 0.0, 0.02))
    lqr: LqrConfig = field(default_factory=LqrConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    longitudinal: LongitudinalSpec = field(default_factory=LongitudinalSpec)
    actuator: ActuatorModel = field(default_factory=ActuatorModel)
    target_speed: float = 2.7778   # [m/s]
    initial_speed: float | None = None
    initial_offset: float = 0.0    # lateral offset left of the start [m]
    duration: float = 200.0        # wall-clock cap [s of simulated time]
    laps: float = 1.0              # closed-course stop after this many laps
    seed: int = 0

    def __post_init__(self):
        if self.plant not in PLANT_TYPES:
            raise ConfigError(f"unknown plant {self.plant!r}")
        if self.controller not in CONTROLLER_TYPES:
            raise ConfigError(f"unknown controller {self.controller!r}")
        if self.longitudinal.type not in LONGITUDINAL_TYPES:
            raise ConfigError(f"unknown longitudinal mode {self.longitudinal.type!r}")
        if self.course.type not in COURSE_TYPES:
            raise ConfigError(f"unknown course type {self.course.type!r}")
        if self.target_speed <= 0.0:
            raise ConfigError("target speed must be positive")
        if self.dt <= 0.0 or self.control_every < 1:
            raise ConfigError("need dt > 0 and control_every >= 1")


def parse_speed(value) -> float:
    """Accept plain m/s numbers or strings with a kmph/m/s suffix."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower()
    if text.endswith("kmph"):
        return float(text[:-4].strip()) / 3.6
    if text.endswith("km/h"):
        return float(text[:-4].strip()) / 3.6
    if text.endswith("m/s"):
        return float(text[:-3].strip())
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse speed {value!r}") from None


def _build_section(cls, data: dict, section: str, **overrides):
    known = {f.name: f for f in fields(cls)}
    kwargs = dict(overrides)
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section}]: {exc}") from exc


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a validated ScenarioConfig; unknown sections or keys are errors."""
    known_sections = {"vehicle", "course", "plant", "controller", "longitudinal",
                      "actuator", "run"}
    unknown = set(data) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    vehicle = _build_section(VehicleParams, data.get("vehicle", {}), "vehicle")
    course_spec = _build_section(CourseSpec, data.get("course", {}), "course")

    plant_sec = dict(data.get("plant", {}))
    plant = plant_sec.pop("model", "kinematic")
    integrator = plant_sec.pop("integrator", "rk4")
    dt = plant_sec.pop("dt", 0.01)
    if plant_sec:
        raise ConfigError(f"unknown key in [plant]: {sorted(plant_sec)}")

    ctrl_sec = dict(data.get("controller", {}))
    controller = ctrl_sec.pop("type", "pure_pursuit")
    ctrl_kwargs = {}
    sub_cfgs = {
        "pure_pursuit": PurePursuitConfig,
        "stanley": StanleyConfig,
        "lqr": LqrConfig,
        "mpc": MpcConfig,
    }
    if controller in sub_cfgs:
        ctrl_kwargs[controller] = _build_section(
            sub_cfgs[controller], ctrl_sec, f"controller ({controller})")
    elif controller == "pid":
        defaults = ScenarioConfig().steering_pid
        ctrl_kwargs["steering_pid"] = _build_section(
            PidGains, ctrl_sec, "controller (pid)",
            k_p=defaults.k_p, k_i=defaults.k_i, k_d=defaults.k_d)
    elif ctrl_sec:
        raise ConfigError(f"unknown key in [controller]: {sorted(ctrl_sec)}")

    longitudinal = _build_section(LongitudinalSpec, data.get("longitudinal", {}),
                                  "longitudinal")
    actuator = _build_section(ActuatorModel, data.get("actuator", {}), "actuator")

    run_sec = dict(data.get("run", {}))
    run_known = {"name", "target_speed", "initial_speed", "initial_offset",
                 "duration", "laps", "seed", "control_every"}
    unknown = set(run_sec) - run_known
    if unknown:
        raise ConfigError(f"unknown key in [run]: {sorted(unknown)}")
    target = parse_speed(run_sec.get("target_speed", 2.7778))
    initial_speed = run_sec.get("initial_speed")
    if initial_speed is not None:
        initial_speed = parse_speed(initial_speed)

    return ScenarioConfig(
        name=str(run_sec.get("name", "scenario")),
        vehicle=vehicle, course=course_spec, plant=plant,
        integrator=integrator, dt=float(dt),
        control_every=int(run_sec.get("control_every", 2)),
        controller=controller, longitudinal=longitudinal, actuator=actuator,
        target_speed=target, initial_speed=initial_speed,
        initial_offset=float(run_sec.get("initial_offset", 0.0)),
        duration=float(run_sec.get("duration", 200.0)),
        laps=float(run_sec.get("laps", 1.0)),
        seed=int(run_sec.get("seed", 0)),
        **ctrl_kwargs)


def parse_config(text: str) -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    return config_from_dict(data)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return format(v, ".17g")
    return '"' + str(v).replace('"', '\\"') + '"'


def serialize_config(cfg: ScenarioConfig) -> str:
    """Emit the full config as TOML; parse(serialize(cfg)) == cfg."""
    out = io.StringIO()

    def section(name, obj, skip=()):
        out.write(f"[{name}]\n")
        for f in fields(obj):
            if f.name in skip:
                continue
            v = getattr(obj, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                continue
            out.write(f"{f.name} = {_toml_value(v)}\n")
        out.write("\n")

    section("vehicle", cfg.vehicle)
    section("course", cfg.course)
    out.write("[plant]\n")
    out.write(f"model = {_toml_value(cfg.plant)}\n")
    out.write(f"integrator = {_toml_value(cfg.integrator)}\n")
    out.write(f"dt = {_toml_value(cfg.dt)}\n\n")
    out.write("[controller]\n")
    out.write(f"type = {_toml_value(cfg.controller)}\n")
    sub = {"pure_pursuit": cfg.pure_pursuit, "stanley": cfg.stanley,
           "lqr": cfg.lqr, "mpc": cfg.mpc, "pid": cfg.steering_pid}.get(cfg.controller)
    if sub is not None:
        for f in fields(sub):
            out.write(f"{f.name} = {_toml_value(getattr(sub, f.name))}\n")
    out.write("\n")
    section("longitudinal", cfg.longitudinal)
    section("actuator", cfg.actuator)
    out.write("[run]\n")
    out.write(f"name = {_toml_value(cfg.name)}\n")
    out.write(f"target_speed = {_toml_value(cfg.target_speed)}\n")
    if cfg.initial_speed is not None:
        out.write(f"initial_speed = {_toml_value(cfg.initial_speed)}\n")
    out.write(f"initial_offset = {_toml_value(cfg.initial_offset)}\n")
    out.write(f"duration = {_toml_value(cfg.duration)}\n")
    out.write(f"laps = {_toml_value(cfg.laps)}\n")
    out.write(f"seed = {_toml_value(cfg.seed)}\n")
    out.write(f"control_every = {_toml_value(cfg.control_every)}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Closed-loop execution
# ---------------------------------------------------------------------------


class _LateralController:
    """Per-run controller adapter owning hints and warm-start state."""

    def __init__(self, cfg: ScenarioConfig, course: Course):
        self.cfg = cfg
        self.course = course
        self.kind = cfg.controller
        self.hint = 0
        self.pid = SteeringPid(cfg.steering_pid) if self.kind == "pid" else None
        self.warm = None
        self.gain = None
        self.diag = None
        if self.kind == "lqr":
            self.gain = synthesize_lqr_gain(cfg.vehicle, max(cfg.target_speed, V_MIN + 0.1),
                                            cfg.lqr)
        self.state_at = "cg" if cfg.plant == "dynamic" else "rear_axle"

    def command(self, state: SimState, err, dt_control: float) -> float:
        cfg, params = self.cfg, self.cfg.vehicle
        self.hint = err.index
        self.diag = None
        if self.kind == "pure_pursuit":
            delta, self.hint = pure_pursuit(state, self.course, cfg.pure_pursuit,
                                            params, self.state_at, self.hint)
            return delta
        if self.kind == "stanley":
            delta, _ = stanley(state, self.course, cfg.stanley, params,
                               self.state_at, self.hint)
            return delta
        if self.kind == "pid":
            return self.pid.step(err.e_cg, dt_control, params.delta_max)
        if self.kind == "lqr":
            kappa = float(self.course.curvatures[err.index])
            if state.v_x > V_MIN:
                if cfg.plant == "dynamic":
                    e_dot = state.v_y + state.v_x * math.sin(err.theta_e)
                    om = state.omega_z
                else:
                    e_dot = state.v_x * math.sin(err.theta_e)
                    om = state.v_x * math.tan(state.delta) / params.wheelbase
                te_dot = om - kappa * state.v_x
                from .models import PathFrameState
                x = PathFrameState(err.e_cg, e_dot, err.theta_e, te_dot)
                return lqr_steering(x, self.gain, kappa, params,
                                    cfg.lqr.feedforward, state.v_x)
            # Below the model's validity: curvature feedforward only.
            return params.clamp_delta(params.wheelbase * kappa)
        if self.kind == "mpc":
            pose = (state.x, state.y, state.theta)
            coeffs = fit_path_local(self.course, pose, cfg.mpc.fit_window, self.hint)
            sol = mpc_solve(cfg.mpc, state, coeffs, params, self.warm)
            self.warm = sol.deltas
            self.diag = (sol.iterations, sol.cost, sol.converged)
            return float(sol.deltas[0])
        raise ConfigError(f"unknown controller {self.kind!r}")


class _SpeedLoop:
    """Longitudinal mode: ideal speed hold or PID/adaptive PID on the
    throttle plant."""

    def __init__(self, cfg: ScenarioConfig):
        spec = cfg.longitudinal
        self.kind = spec.type
        self.spec = spec
        self.target = cfg.target_speed
        v0 = cfg.initial_speed if cfg.initial_speed is not None else cfg.target_speed
        self.throttle = 0.0
        if self.kind == "ideal":
            self.v = self.target
            return
        self.plant = ThrottlePlant(mass=cfg.vehicle.mass + spec.extra_mass)
        self.plant.reset(v0)
        self.v = self.plant.velocity
        gains = PidGains(spec.k_p, spec.k_i, spec.k_d)
        self.pid_state = PidState()
        if self.kind == "adaptive_pid":
            self.adapt = AdaptivePidState(gains, spec.gamma_p, spec.gamma_i,
                                          spec.gamma_d, spec.filter_tau)
        else:
            self.gains = gains

    def control(self, dt_control: float):
        if self.kind == "ideal":
            return
        if self.kind == "adaptive_pid":
            self.throttle, self.adapt, self.pid_state = adaptive_pid_step(
                self.adapt, self.pid_state, self.target, self.plant.velocity,
                dt_control, deriv_tau=self.spec.deriv_tau)
        else:
            self.throttle, self.pid_state = pid_step(
                self.gains, self.pid_state, self.target, self.plant.velocity,
                dt_control, deriv_tau=self.spec.deriv_tau)

    def step_plant(self, dt: float):
        if self.kind == "ideal":
            return
        self.plant.step(self.throttle, dt)
        self.v = self.plant.velocity


def initial_state(cfg: ScenarioConfig, course: Course) -> SimState:
    p0 = course.point(0)
    nx, ny = -math.sin(p0.theta_p), math.cos(p0.theta_p)
    v0 = cfg.initial_speed if cfg.initial_speed is not None else cfg.target_speed
    return SimState(x=p0.x + cfg.initial_offset * nx,
                    y=p0.y + cfg.initial_offset * ny,
                    theta=p0.theta_p, v_x=v0)


def run_scenario(cfg: ScenarioConfig) -> RunRecord:
    """Closed-loop simulation of one scenario.

    Plant steps at cfg.dt; controllers run every cfg.control_every steps.
    Terminates on course completion, the duration cap, or the divergence
    guard (|e_cg| > 20 m).
    """
    course = cfg.course.build()
    params = cfg.vehicle
    state = initial_state(cfg, course)
    ctrl = _LateralController(cfg, course)
    speed = _SpeedLoop(cfg)
    state = replace(state, v_x=speed.v if speed.kind != "ideal" else state.v_x)

    dt = cfg.dt
    dt_control = dt * cfg.control_every
    n_max = int(round(cfg.duration / dt))
    rows = []
    mpc_rows = [] if cfg.controller == "mpc" else None
    gain_rows = [] if cfg.longitudinal.type == "adaptive_pid" else None
    delta_cmd = 0.0
    delta_target = 0.0
    err_hint = 0
    s_travel = 0.0
    diverged = False
    completed = False
    bootstrap_steps = 0
    use_rk4 = cfg.integrator == "rk4"
    state_at = ctrl.state_at

    for k in range(n_max + 1):
        err = tracking_errors(course, state, params, "cg", state_at, err_hint)
        err_hint = err.index

        if abs(err.e_cg) > DIVERGENCE_GUARD_M:
            diverged = True
            break

        if k % cfg.control_every == 0:
            try:
                delta_cmd = ctrl.command(state, err, dt_control)
            except EndOfCourse:
                completed = True
                break
            speed.control(dt_control)

        delta_target = actuate(delta_cmd, delta_target, cfg.actuator, dt)
        delta_target = params.clamp_delta(delta_target)

        rows.append((k * dt, s_travel, state.x, state.y, state.theta,
                     state.v_x, state.v_y, state.omega_z, delta_cmd,
                     state.delta, speed.throttle, err.e_cg, err.e_fa,
                     err.theta_e))
        if mpc_rows is not None:
            diag = ctrl.diag or (0, 0.0, True)
            mpc_rows.append((diag[0], diag[1], 1.0 if diag[2] else 0.0))
        if gain_rows is not None:
            g = speed.adapt.gains
            gain_rows.append((g.k_p, g.k_i, g.k_d))

        if k == n_max:
            break

        # Steering rate limit is a vehicle property, enforced at plant level.
        delta_dot = (delta_target - state.delta) / dt
        delta_dot = min(max(delta_dot, -params.delta_rate_max), params.delta_rate_max)

        speed.step_plant(dt)
        if cfg.plant == "dynamic" and state.v_x > V_MIN:
            new_delta = params.clamp_delta(state.delta + delta_dot * dt)
            state = step_dynamic(state, new_delta, params, dt,
                                 "rk4" if use_rk4 else "euler")
        else:
            # Kinematic stepping, also the bootstrap below the dynamic
            # model's validity range.
            if cfg.plant == "dynamic":
                bootstrap_steps += 1
            state = step_kinematic(state, state.v_x, delta_dot, dt, params,
                                   "rk4" if use_rk4 else "euler")
        if speed.kind != "ideal":
            state = replace(state, v_x=speed.v)
        s_travel += state.v_x * dt

        if course.closed:
            if s_travel >= cfg.laps * course.total_length:
                completed = True
                break
        else:
            if err.index >= course.n - 2:
                completed = True
                break

    cols = np.array(rows, dtype=float).T if rows else np.zeros((14, 0))
    extra = {}
    if mpc_rows is not None and rows:
        m = np.array(mpc_rows, dtype=float).T
        extra = {"mpc_iterations": m[0], "mpc_cost": m[1], "mpc_converged": m[2]}
    if gain_rows is not None and rows:
        g = np.array(gain_rows, dtype=float).T
        extra.update({"gain_k_p": g[0], "gain_k_i": g[1], "gain_k_d": g[2]})
    meta = {
        "name": cfg.name,
        "controller": cfg.controller,
        "course": cfg.course.type,
        "target_speed": cfg.target_speed,
        "plant": cfg.plant,
        "seed": cfg.seed,
    }
    if bootstrap_steps:
        meta["kinematic_bootstrap_steps"] = bootstrap_steps
    return RunRecord(*(cols[i] for i in range(14)), meta=meta, extra=extra,
                     diverged=diverged, completed=completed)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------


def record_to_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    for key in sorted(record.meta):
        buf.write(f"# {key}: {record.meta[key]}\n")
    buf.write(f"# diverged: {str(record.diverged).lower()}\n")
    buf.write(f"# completed: {str(record.completed).lower()}\n")
    extra_names = sorted(record.extra)
    buf.write(",".join(RunRecord.CHANNELS + tuple(extra_names)) + "\n")
    columns = [getattr(record, c) for c in RunRecord.CHANNELS]
    columns += [record.extra[name] for name in extra_names]
    for i in range(len(record.t)):
        buf.write(",".join(format(col[i], ".12g") for col in columns) + "\n")
    return buf.getvalue()


def csv_to_record(text: str) -> RunRecord:
    meta = {}
    diverged = False
    completed = True
    header = None
    data = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
            continue
        if header is None:
            header = line.split(",")
            continue
        data.append([float(v) for v in line.split(",")])
    diverged = meta.pop("diverged", "false") == "true"
    completed = meta.pop("completed", "true") == "true"
    if "target_speed" in meta:
        meta["target_speed"] = float(meta["target_speed"])
    arr = np.asarray(data, dtype=float)
    base = {name: arr[:, i] for i, name in enumerate(header[:14])}
    extra = {name: arr[:, 14 + j] for j, name in enumerate(header[14:])}
    return RunRecord(**base, meta=meta, extra=extra, diverged=diverged,
                     completed=completed)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian product of controllers x courses x speeds (x param grids)."""

    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    controllers: tuple = ("pure_pursuit", "stanley", "pid", "lqr", "mpc")
    courses: tuple = COURSE_TYPES
    speeds_kmph: tuple = (10.0, 20.0, 35.0)
    # Optional per-controller parameter grids: {controller: [(label, overrides)]}
    param_grids: dict = field(default_factory=dict)


def sweep_scenarios(spec: SweepSpec):
    """Expand a sweep into named ScenarioConfigs, deterministically ordered."""
    out = []
    for controller in spec.controllers:
        grid = spec.param_grids.get(controller, [("default", {})])
        for course_type in spec.courses:
            for speed in spec.speeds_kmph:
                for label, overrides in grid:
                    cfg = replace(
                        spec.base,
                        name=f"{controller}_{course_type}_{speed:g}kmph_{label}",
                        controller=controller,
                        course=replace(spec.base.course, type=course_type),
                        plant=DEFAULT_PLANT[controller],
                        target_speed=speed / 3.6,
                    )
                    if overrides:
                        sub_name = {"pid": "steering_pid"}.get(controller, controller)
                        sub = replace(getattr(cfg, sub_name), **overrides)
                        cfg = replace(cfg, **{sub_name: sub})
                    out.append(cfg)
    return out


def _run_one(cfg: ScenarioConfig):
    return cfg.name, run_scenario(cfg)


def run_sweep(scenarios, jobs: int = 1):
    """Execute scenarios (optionally in parallel); returns {name: RunRecord}.

    Individual failures are recorded as None entries; the sweep continues.
    The result ordering is deterministic regardless of execution order.
    """
    results = {}
    if jobs <= 1:
        for cfg in scenarios:
            try:
                results[cfg.name] = run_scenario(cfg)
            except Exception as exc:     # noqa: BLE001 - sweep must continue
                results[cfg.name] = exc
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_one, cfg): cfg.name for cfg in scenarios}
            for fut in concurrent.futures.as_completed(futures):
                name = futures[fut]
                try:
                    results[name] = fut.result()[1]
                except Exception as exc:  # noqa: BLE001
                    results[name] = exc
    return {name: results[name] for name in sorted(results)}


def summary_csv(results: dict) -> str:
    """One row per scenario, sorted by name; failed runs carry an error tag."""
    from .metrics import summarize

    buf = io.StringIO()
    buf.write("name,controller,course,speed_mps,completed,diverged,"
              "peak_abs_error,steady_state_error,rms_error,"
              "distance_to_converge,steering_total_variation\n")
    for name in sorted(results):
        rec = results[name]
        if not isinstance(rec, RunRecord):
            buf.write(f"{name},error,error,,false,false,,,,,\n")
            continue
        m = summarize(rec)
        conv = "inf" if math.isinf(m.distance_to_converge) else \
            format(m.distance_to_converge, ".6g")
        buf.write(
            f"{name},{rec.meta['controller']},{rec.meta['course']},"
            f"{rec.meta['target_speed']:.6g},"
            f"{str(rec.completed).lower()},{str(rec.diverged).lower()},"
            f"{m.peak_abs_error:.6g},{m.steady_state_error:.6g},"
            f"{m.rms_error:.6g},{conv},{m.steering_total_variation:.6g}\n")
    return buf.getvalue()
