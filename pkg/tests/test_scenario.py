import json

import numpy as np
import pytest

from conftest import SHORT_SCENARIO
from vacts_kit.errors import ConfigError, DivergenceError
from vacts_kit.model import bundled_path
from vacts_kit.scenario import (SUMMARY_SCHEMA, attitude_error_angles, load_scenario, parse_scenario, run_scenario,
                                write_result)
from vacts_kit.spatial import quat_from_axis_angle

STEP = """
[scenario]
initial_lengths = 1.4
payload_start = 0, 0, 1
ground = false
divergence_bound = {bound}

[phase.1]
type = step
duration = {duration}
offset = 0, 0, 0.05
"""


@pytest.fixture(scope="module")
def short_runs(prototype):
    sc = parse_scenario(SHORT_SCENARIO)
    return {
        "base": run_scenario(prototype, sc),
        "no_ff": run_scenario(prototype, sc.replace(tension_feedforward=False)),
        "noise": run_scenario(prototype, sc.with_noise(True)),
    }


def test_bundled_scenario_parses():
    sc = load_scenario(bundled_path("resize_hover.scn"))
    assert sc.name == "resize_hover"
    assert [p.kind for p in sc.phases] == ["takeoff", "move", "hover", "cable", "cable", "hover"]
    assert sc.duration == 26.0
    assert sc.phases[4].lengths == (1.0,)
    assert sc.phases[3].measure and not sc.phases[0].measure
    assert sc.noise.enabled is False


@pytest.mark.parametrize("text, field", [
    ("[phase.1]\ntype = hover\nduration = 1\n", "scenario"),
    ("[scenario]\ninitial_lengths = 1.4\n", "phase"),
    ("[scenario]\ninitial_lengths = 1.4\n[phase.1]\ntype = jump\nduration = 1\n", "phase.1.type"),
    ("[scenario]\ninitial_lengths = 1.4\n[phase.1]\ntype = hover\nduration = -1\n", "phase.1.duration"),
    ("[scenario]\ninitial_lengths = 1.4\n[phase.1]\ntype = move\nduration = 1\ntarget = 0, 0\n",
     "phase.1.target"),
    ("[scenario]\ninitial_lengths = 1.4 kg\n[phase.1]\ntype = hover\nduration = 1\n",
     "scenario.initial_lengths"),
    ("[scenario]\ninitial_lengths = 1.4\nattitude_model = magic\n[phase.1]\ntype = hover\nduration = 1\n",
     "scenario.attitude_model"),
    ("[scenario]\n[phase.1]\ntype = hover\nduration = 1\n", "scenario.initial_lengths"),
])
def test_parse_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as err:
        parse_scenario(text)
    assert err.value.field == field


def test_bad_gain_rejected():
    with pytest.raises(ConfigError):
        parse_scenario("[scenario]\ninitial_lengths = 1.4\n[gains]\nomega_c = 0\n[phase.1]\ntype = hover\nduration = 1\n")


def test_missing_scenario_file(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "none.scn")


def test_wrong_number_of_cable_lengths(prototype):
    sc = parse_scenario(SHORT_SCENARIO.replace("lengths = 1.35 m", "lengths = 1.2, 1.3 m"))
    with pytest.raises(ConfigError):
        run_scenario(prototype, sc)


def test_attitude_error_angles():
    q = np.array([[1.0, 0, 0, 0], quat_from_axis_angle([0, 1, 0], 0.2)])
    qd = np.array([[-1.0, 0, 0, 0], [1.0, 0, 0, 0]])
    assert np.allclose(attitude_error_angles(q, qd), [0.0, 0.2], atol=1e-7)


def test_short_resize_tracks(short_runs):
    r = short_runs["base"]
    s = r.summary
    assert s["schema"] == SUMMARY_SCHEMA
    assert s["completed"] and s["samples"] == 125 == len(r.rows)
    assert s["measured_samples"] == 125
    assert len(s["errors"]["cables"]) == 3
    for e in s["errors"]["cables"]:
        assert abs(e["mean"]) < 0.01
    assert s["payload_drift_max"] < 0.05
    assert s["slack_switches"] == 0
    assert s["max_constraint_gap"] < 1e-6
    assert np.all(r.column("tension_1") >= 0.0)
    assert not s["winch_saturated"]
    # the reference follows the quintic: ends at 1.35 m
    assert abs(r.column("length_ref_1")[-1] - 1.35) < 1e-12
    assert abs(r.column("length_1")[-1] - 1.35) < 0.01


def test_tension_feedforward_reduces_attitude_error(short_runs):
    with_ff = short_runs["base"].summary["attitude_error_rms"]
    without = short_runs["no_ff"].summary["attitude_error_rms"]
    assert with_ff < without


def test_noise_increases_scatter(short_runs):
    clean = short_runs["base"].summary["errors"]["payload"]["z"]["std"]
    noisy = short_runs["noise"].summary["errors"]["payload"]["z"]["std"]
    assert short_runs["noise"].summary["noise"] is True
    assert noisy > clean


def test_divergence_returns_partial_log(prototype):
    sc = parse_scenario(STEP.format(bound=0.01, duration=1.0))
    with pytest.raises(DivergenceError) as err:
        run_scenario(prototype, sc)
    partial = err.value.partial
    assert partial is not None and partial.summary["completed"] is False
    assert len(partial.rows) >= 0


def test_repeat_runs_identical(prototype):
    sc = parse_scenario(STEP.format(bound=1.0, duration=0.3))
    a, b = run_scenario(prototype, sc), run_scenario(prototype, sc)
    assert a.to_csv() == b.to_csv()
    assert a.summary_json() == b.summary_json()
    noisy = sc.with_noise(True, seed=5)
    assert run_scenario(prototype, noisy).to_csv() == run_scenario(prototype, noisy).to_csv()


def test_write_result(short_runs, tmp_path):
    paths = write_result(short_runs["base"], tmp_path / "out")
    header = paths["timeseries"].read_text().splitlines()[0].split(",")
    assert header[:2] == ["time", "phase"]
    assert "attitude_error_3" in header and header[-2:] == ["max_cable_gap", "ground_force"]
    summary = json.loads(paths["summary"].read_text())
    assert summary["scenario"] == "short_resize"
    assert "table" not in summary
    assert "cable 3" in short_runs["base"].error_table()
