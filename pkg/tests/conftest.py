import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vacts_kit.model import bundled_path, load_system, parse_system

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by test_acceptance.py, printed once at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def system_text(n=3, inclination=30.0, azimuths=None, payload_mass=1.0, quad_com="0, 0, -2 cm",
                winch_mass="150 g", mount="0, 0, -2 cm", exit_point="2, 2, 0 cm", rigid=False,
                attachments=None, owners=None, yaw_follows=True, length=1.4, payload_inertia="0.05, 0.05, 0.08",
                safety=0.7):
    """A Table-I-like system file with the knobs the tests turn."""
    owners = owners or list(range(1, n + 1))
    m = len(owners)
    if azimuths is None:
        azimuths = [((360.0 * i / m + 180.0) % 360.0) - 180.0 for i in range(m)]
    out = ["[system]", f"point_mass = {'false' if rigid else 'true'}", "",
           "[payload]", f"mass = {payload_mass} kg", f"inertia = {payload_inertia}", "position = 0, 0, 0", "",
           "[quadrotor]", "mass = 1.05 kg", f"com = {quad_com}", "inertia = 0.012, 0.012, 0.022",
           "arm_length = 0.2 m", "kf = 3.55e-6", "km = 5.4e-8", "thrust_min = 0", "thrust_max = 4.5", ""]
    for j in range(1, n + 1):
        own = [i for i, o in enumerate(owners) if o == j]
        yaw = azimuths[own[0]] if (yaw_follows and own) else 0.0
        out += [f"[quadrotor.{j}]", f"yaw = {yaw} deg", ""]
    out += ["[winch]", f"mass = {winch_mass}", "drum_radius = 2 cm", "drum_inertia = 1e-5",
            f"mount_translation = {mount}", f"exit_point = {exit_point}", "stall_torque = 6 kgcm",
            "max_rate = 6.5", f"safety = {safety}", ""]
    for i, o in enumerate(owners, start=1):
        out += [f"[winch.{i}]", f"owner = {o}", ""]
    out += ["[cable]", f"inclination = {inclination} deg", f"length = {length} m", ""]
    for i in range(m):
        out += [f"[cable.{i + 1}]", f"azimuth = {azimuths[i]} deg"]
        if attachments is not None:
            out.append("attachment = " + ", ".join(repr(float(v)) for v in attachments[i]))
        out.append("")
    return "\n".join(out)


# airborne resize slow enough to stay clear of the winch limit:
# 0.5 s hover, 1.4 m -> 1.35 m in 1.5 s, 0.5 s hover
SHORT_SCENARIO = """
[scenario]
name = short_resize
initial_lengths = 1.4 m
payload_start = 0, 0, 1.0 m
ground = false
seed = 3

[phase.1]
type = hover
duration = 0.5
measure = true

[phase.2]
type = cable
duration = 1.5
lengths = 1.35 m

[phase.3]
type = hover
duration = 0.5
measure = true
"""


def make_system(**kw):
    return parse_system(system_text(**kw))


def rigid_attachments(m, radius=0.2):
    return [[radius * math.cos(2 * math.pi * i / m), radius * math.sin(2 * math.pi * i / m), 0.0]
            for i in range(m)]


@pytest.fixture(scope="session")
def table1():
    return load_system(bundled_path("table1.sys"))


@pytest.fixture(scope="session")
def prototype():
    return load_system(bundled_path("prototype.sys"))


@pytest.fixture(scope="session")
def rigid3():
    """Rigid payload, three single-cable quadrotors (kinematics only: W has rank 3 < 6)."""
    return make_system(rigid=True, attachments=rigid_attachments(3))


@pytest.fixture(scope="session")
def rigid6():
    """Rigid payload held by six quadrotors, so the 6 x 6 wrench matrix is invertible."""
    # azimuths skewed against the attachment angles so the cables also twist the payload about z
    az = [40.0, 20.0, 160.0, 140.0, -80.0, -100.0]
    return make_system(n=6, rigid=True, azimuths=az, attachments=rigid_attachments(6))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
