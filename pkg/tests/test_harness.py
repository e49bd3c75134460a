import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from acktrack.cli import main as cli_main
from acktrack.errors import ConfigError
from acktrack.harness import (CourseSpec, ScenarioConfig, SweepSpec,
                              config_from_dict, csv_to_record, parse_config,
                              parse_speed, record_to_csv, run_scenario,
                              run_sweep, serialize_config, summary_csv,
                              sweep_scenarios)
from acktrack.longitudinal import PidGains
from acktrack.metrics import RunRecord, summarize
from acktrack.models import ActuatorModel
from acktrack.svgplot import emit_plot

EXAMPLE_TOML = """
[vehicle]
mass = 900.0

[course]
type = "circle"
radius = 25.0

[plant]
model = "dynamic"

[controller]
type = "stanley"
k = 3.0

[run]
name = "circle_stanley"
target_speed = "20 kmph"
seed = 7
"""


class TestConfig:
    def test_parse_and_fields(self):
        cfg = parse_config(EXAMPLE_TOML)
        assert cfg.vehicle.mass == 900.0
        assert cfg.course.type == "circle"
        assert cfg.course.radius == 25.0
        assert cfg.plant == "dynamic"
        assert cfg.controller == "stanley"
        assert cfg.stanley.k == 3.0
        assert cfg.target_speed == pytest.approx(20.0 / 3.6)
        assert cfg.seed == 7

    def test_kmph_parsing(self):
        assert parse_speed("10 kmph") == pytest.approx(2.77778, abs=1e-4)
        assert parse_speed("2.5 m/s") == 2.5
        assert parse_speed(3.0) == 3.0
        with pytest.raises(ConfigError):
            parse_speed("fast")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"vehicel": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"vehicle": {"wheel_base": 2.5}})
        with pytest.raises(ConfigError):
            config_from_dict({"run": {"speeed": 1.0}})

    def test_unknown_controller_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"controller": {"type": "stanley", "kk": 1.0}})

    def test_round_trip(self):
        cfg = parse_config(EXAMPLE_TOML)
        again = parse_config(serialize_config(cfg))
        assert again == cfg

    def test_round_trip_all_controllers(self):
        for controller in ("pure_pursuit", "stanley", "pid", "lqr", "mpc"):
            cfg = ScenarioConfig(controller=controller)
            assert parse_config(serialize_config(cfg)) == cfg

    def test_invalid_values_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"run": {"target_speed": -1.0}})
        with pytest.raises(ConfigError):
            config_from_dict({"controller": {"type": "teleport"}})


class TestRunScenario:
    @pytest.mark.parametrize("controller",
                             ["pure_pursuit", "stanley", "pid", "lqr", "mpc"])
    def test_straight_nominal_completes(self, controller):
        from acktrack.harness import DEFAULT_PLANT
        cfg = ScenarioConfig(controller=controller,
                             plant=DEFAULT_PLANT[controller],
                             target_speed=10.0 / 3.6)
        rec = run_scenario(cfg)
        assert rec.completed
        assert not rec.diverged
        assert summarize(rec).peak_abs_error < 0.1

    def test_determinism_bit_identical_csv(self):
        cfg = parse_config(EXAMPLE_TOML)
        a = record_to_csv(run_scenario(cfg))
        b = record_to_csv(run_scenario(cfg))
        assert a == b

    def test_csv_round_trip(self):
        cfg = ScenarioConfig(controller="mpc", target_speed=10.0 / 3.6,
                             course=CourseSpec(type="sine"))
        rec = run_scenario(cfg)
        back = csv_to_record(record_to_csv(rec))
        assert np.allclose(back.e_cg, rec.e_cg)
        assert back.meta["controller"] == "mpc"
        assert "mpc_iterations" in back.extra
        assert back.completed == rec.completed

    def test_divergence_guard_flags(self):
        # steering PID well past its stable speed range blows through the
        # 20 m guard instead of weaving within it
        cfg = ScenarioConfig(controller="pid", plant="dynamic",
                             course=CourseSpec(type="lane_change", exit=300.0),
                             target_speed=60.0 / 3.6)
        rec = run_scenario(cfg)
        assert rec.diverged
        assert not rec.completed

    def test_actuator_deadband_degrades_tracking(self):
        base = ScenarioConfig(controller="pure_pursuit",
                              course=CourseSpec(type="circle"),
                              target_speed=10.0 / 3.6)
        ideal = summarize(run_scenario(base))
        act = replace(base, actuator=ActuatorModel(deadband=0.01, enabled=True))
        lossy = summarize(run_scenario(act))
        assert lossy.steady_state_error > ideal.steady_state_error

    def test_longitudinal_pid_holds_speed(self):
        cfg = ScenarioConfig(
            controller="stanley", plant="dynamic",
            course=CourseSpec(type="circle"), target_speed=20.0 / 3.6,
            longitudinal=replace(ScenarioConfig().longitudinal, type="adaptive_pid"))
        rec = run_scenario(cfg)
        assert rec.completed
        tail = rec.v_x[len(rec.v_x) // 2:]
        assert np.all(np.abs(tail - 20.0 / 3.6) < 0.25)
        # adaptive gain trajectories ride along in the CSV
        assert "gain_k_p" in rec.extra
        assert np.all(np.diff(rec.extra["gain_k_p"]) >= 0.0)
        assert "gain_k_p" in record_to_csv(rec).splitlines()[8]

    def test_dynamic_startup_bootstraps_kinematically(self):
        cfg = ScenarioConfig(
            controller="stanley", plant="dynamic",
            course=CourseSpec(type="straight"), target_speed=10.0 / 3.6,
            initial_speed=0.0, duration=100.0,
            longitudinal=replace(ScenarioConfig().longitudinal, type="pid"))
        rec = run_scenario(cfg)
        assert rec.meta.get("kinematic_bootstrap_steps", 0) > 0
        assert not rec.diverged


class TestSweep:
    def test_cardinality(self):
        spec = SweepSpec()
        scenarios = sweep_scenarios(spec)
        assert len(scenarios) == 5 * 4 * 3

    def test_stanley_grid_points(self):
        spec = SweepSpec(controllers=("stanley",), courses=("sine",),
                         speeds_kmph=(10.0,),
                         param_grids={"stanley": [(f"k={k:g}", {"k": k})
                                                  for k in (1.5, 2.5, 5.0)]})
        scenarios = sweep_scenarios(spec)
        assert len(scenarios) == 3
        assert sorted(c.stanley.k for c in scenarios) == [1.5, 2.5, 5.0]

    def test_parallel_matches_serial(self):
        spec = SweepSpec(controllers=("pure_pursuit", "stanley"),
                         courses=("straight",), speeds_kmph=(10.0, 20.0))
        scenarios = sweep_scenarios(spec)
        serial = run_sweep(scenarios, jobs=1)
        parallel = run_sweep(scenarios, jobs=2)
        assert summary_csv(serial) == summary_csv(parallel)
        for name in serial:
            assert record_to_csv(serial[name]) == record_to_csv(parallel[name])

    def test_failed_run_recorded_and_sweep_continues(self):
        good = ScenarioConfig(name="a_good", target_speed=10.0 / 3.6)
        bad = replace(good, name="b_bad",
                      course=CourseSpec(type="circle", radius=30.0,
                                        spacing=-1.0))
        results = run_sweep([good, bad], jobs=1)
        assert isinstance(results["a_good"], RunRecord)
        assert not isinstance(results["b_bad"], RunRecord)
        text = summary_csv(results)
        assert "b_bad,error" in text


class TestPlots:
    def test_svg_deterministic_and_legend(self):
        cfg = ScenarioConfig(target_speed=10.0 / 3.6)
        rec = run_scenario(cfg)
        rec2 = run_scenario(replace(cfg, name="other"))
        svg_a = emit_plot([rec, rec2], "error_vs_distance")
        svg_b = emit_plot([rec, rec2], "error_vs_distance")
        assert svg_a == svg_b
        assert svg_a.count("<polyline") == 2
        assert "scenario" in svg_a and "other" in svg_a

    def test_empty_records_rejected(self):
        from acktrack.errors import DomainError
        with pytest.raises(DomainError):
            emit_plot([], "error_vs_distance")


class TestCli:
    def test_run_and_plot(self, tmp_path):
        config = tmp_path / "s.toml"
        config.write_text(EXAMPLE_TOML.replace('"circle"', '"straight"'))
        out = tmp_path / "out"
        assert cli_main(["run", "--config", str(config),
                         "--out", str(out)]) == 0
        csvs = list(out.glob("*.csv"))
        assert len(csvs) == 1
        svg = tmp_path / "plot.svg"
        assert cli_main(["plot", "--kind", "trajectory", "--out", str(svg),
                         str(csvs[0])]) == 0
        assert svg.read_text().startswith("<svg")

    def test_config_error_exit_code(self, tmp_path):
        config = tmp_path / "bad.toml"
        config.write_text("[vehicle]\nnot_a_key = 1\n")
        assert cli_main(["run", "--config", str(config),
                         "--out", str(tmp_path)]) == 1

    def test_usage_error_exit_code(self):
        assert cli_main(["run"]) == 1
        assert cli_main(["frobnicate"]) == 1

    def test_divergence_exit_code(self, tmp_path):
        config = tmp_path / "d.toml"
        config.write_text("""
[plant]
model = "dynamic"

[controller]
type = "pid"

[course]
type = "lane_change"
exit = 300.0

[run]
name = "diverging"
target_speed = "60 kmph"
""")
        assert cli_main(["run", "--config", str(config),
                         "--out", str(tmp_path / "o")]) == 2

    def test_repro_loop(self, tmp_path):
        out = tmp_path / "loop"
        assert cli_main(["repro", "--figure", "loop", "--out", str(out)]) == 0
        assert (out / "loop_closure.svg").exists()
        assert (out / "loop_closure.csv").exists()

    def test_seed_override(self, tmp_path):
        config = tmp_path / "s.toml"
        config.write_text(EXAMPLE_TOML)
        out = tmp_path / "o"
        assert cli_main(["run", "--config", str(config), "--out", str(out),
                         "--seed", "9"]) == 0
        text = (out / "circle_stanley.csv").read_text()
        assert "# seed: 9" in text
