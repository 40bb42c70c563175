import math

import numpy as np
import pytest

from conftest import make_system, system_text
from vacts_kit.control import (Controller, ControllerGains, TaskReference, attitude_command, attitude_error,
                               attitude_track, desired_thrust, moment_about_origin, task_error, tension_feedforward,
                               winch_rate)
from vacts_kit.dynamics import inverse_dynamics, payload_tensions
from vacts_kit.errors import ThrustDirectionError
from vacts_kit.kinematics import joints_from_task
from vacts_kit.model import CableCoord, Pose, parse_system, task_at_rest
from vacts_kit.spatial import quat_exp, quat_from_axis_angle, quat_multiply


def hover_task(position=(0.0, 0.0, 1.0)):
    cables = tuple(CableCoord(math.radians(a), math.radians(30.0), 1.4) for a in (0.0, 120.0, -120.0))
    return task_at_rest(Pose(np.array(position, dtype=float)), cables)


def test_zero_error_gives_hover_feedforward(table1):
    task = hover_task()
    joints = joints_from_task(table1, task)
    f, idm, e = desired_thrust(table1, task, joints, TaskReference.hold(task), ControllerGains())
    assert np.array_equal(e, np.zeros(12))
    assert np.allclose(f, idm.G_q, atol=1e-12)
    assert np.allclose(f, inverse_dynamics(table1, task, joints).G_q, atol=1e-12)


def test_z_error_uses_one_column(table1):
    task = hover_task()
    joints = joints_from_task(table1, task)
    gains = ControllerGains()
    ref = TaskReference.hold(task)
    ref = TaskReference(ref.position + [0.0, 0.0, 0.05], ref.cables)
    f, idm, e = desired_thrust(table1, task, joints, ref, gains)
    expected = idm.D_q[:, 2] * gains.k_p * 0.05
    assert np.allclose(f - idm.G_q, expected, atol=1e-12)
    assert np.count_nonzero(e) == 1


def test_azimuth_error_wraps(table1):
    task = hover_task()
    ref = TaskReference.hold(task)
    cab = ref.cables.copy()
    cab[0, 0] += 2 * math.pi - 0.1
    e, _ = task_error(table1, task, TaskReference(ref.position, cab))
    assert math.isclose(e[3], -0.1, abs_tol=1e-12)


def test_winch_rate_law():
    sys = parse_system(system_text(safety=1.0).replace("max_rate = 6.5", "max_rate = 20"))
    cmd = winch_rate(sys, 0, 1.3, 1.4, 0.0, 0.0, ControllerGains(k_c=2.0))
    assert math.isclose(cmd.rate, 10.0, rel_tol=1e-12) and not cmd.saturated
    assert winch_rate(sys, 0, 1.4, 1.4, 0.0, 3.0).rate == 0.0


def test_winch_rate_clamps(table1):
    w = table1.winches[0]
    cmd = winch_rate(table1, 0, 1.3, 1.4, 0.0, 0.0)
    assert math.isclose(cmd.raw_rate, 10.0, rel_tol=1e-12)
    assert math.isclose(cmd.rate, w.safety * w.max_rate) and cmd.saturated
    stall = winch_rate(table1, 0, 1.3, 1.4, 0.0, w.stall_torque / w.drum_radius)
    assert stall.rate == 0.0 and stall.limit == 0.0 and stall.saturated


def test_attitude_command_vertical():
    q, fz = attitude_command([0.0, 0.0, 15.0], 0.0)
    assert np.allclose(q, [1, 0, 0, 0], atol=1e-15)
    assert fz == 15.0


def test_attitude_command_tilted():
    f = np.array([1.888, 0.0, 15.042])
    q, fz = attitude_command(f, 0.0)
    pitch = math.atan2(1.888, 15.042)
    assert math.isclose(math.degrees(pitch), 7.154, abs_tol=5e-4)
    assert np.allclose(q, [math.cos(pitch / 2), 0.0, math.sin(pitch / 2), 0.0], atol=1e-12)
    assert math.isclose(fz, np.linalg.norm(f), rel_tol=1e-12)
    # projected on a level current attitude only the vertical part counts
    _, fz_level = attitude_command(f, 0.0, current_attitude=[1.0, 0, 0, 0])
    assert math.isclose(fz_level, 15.042, rel_tol=1e-12)


def test_attitude_command_keeps_yaw():
    R, _ = attitude_command([0.5, -0.3, 10.0], math.radians(120), return_matrix=True)
    x = R[:, 0]
    assert math.isclose(math.atan2(x[1], x[0]), math.radians(120), abs_tol=0.05)
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("f", [[0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
def test_reversed_thrust_rejected(f):
    with pytest.raises(ThrustDirectionError):
        attitude_command(f, 0.0)


def test_attitude_track_zero_error():
    I = np.diag([0.012, 0.015, 0.022])
    q = quat_exp([0.2, -0.1, 0.4])
    gains = ControllerGains()
    assert np.array_equal(attitude_track(I, q, np.zeros(3), q, gains), np.zeros(3))
    # with matching desired rate only the gyroscopic term survives
    w = np.array([0.3, -0.5, 1.0])
    M = attitude_track(I, q, w, q, gains, omega_des=w)
    assert np.allclose(M, np.cross(w, I @ w), atol=1e-15)


def test_attitude_error_small_angle():
    e = attitude_error(quat_from_axis_angle([1, 0, 0], 0.1), np.array([1.0, 0, 0, 0]))
    assert math.isclose(e[0], 2 * math.sin(0.05), rel_tol=1e-12)
    # q and -q give the same error
    assert np.allclose(attitude_error(-quat_exp([0.1, 0, 0]), [1.0, 0, 0, 0]), e)


def _rotational_step(gains, T=0.6, dt=1e-3, hold=5):
    """Rigid-body attitude under attitude_track held for ``hold`` steps, RK4 on (q, w)."""
    I = np.diag([0.0136, 0.0136, 0.022])
    q = quat_from_axis_angle([1, 0, 0], 0.1)
    w = np.zeros(3)
    target = np.array([1.0, 0, 0, 0])

    def deriv(q, w, M):
        qd = 0.5 * quat_multiply(q, np.concatenate([[0.0], w]))
        wd = np.linalg.solve(I, M - np.cross(w, I @ w))
        return qd, wd

    angles = []
    M = np.zeros(3)
    for k in range(int(round(T / dt))):
        if k % hold == 0:
            M = attitude_track(I, q, w, target, gains)
        k1 = deriv(q, w, M)
        k2 = deriv(q + 0.5 * dt * k1[0], w + 0.5 * dt * k1[1], M)
        k3 = deriv(q + 0.5 * dt * k2[0], w + 0.5 * dt * k2[1], M)
        k4 = deriv(q + dt * k3[0], w + dt * k3[1], M)
        q = q + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        w = w + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        q /= np.linalg.norm(q)
        angles.append(2 * math.atan2(q[1], q[0]))
    return np.array(angles)


def test_attitude_step_is_critically_damped():
    gains = ControllerGains()
    a = _rotational_step(gains)
    # no overshoot beyond 1 % of the step
    assert a.min() > -0.001
    # linear oracle: e(t) = e0 (1 + w t) exp(-w t)
    t = np.arange(1, a.size + 1) * 1e-3
    w = gains.omega_att
    lin = 0.1 * (1 + w * t) * np.exp(-w * t)
    assert np.abs(a - lin).max() < 5e-3


def test_moment_about_origin():
    m = moment_about_origin([0.01, 0.0, -0.02], [0.1, 0.2, 0.3], 10.0)
    assert np.allclose(m, [0.1, 0.2 - 0.1, 0.3], atol=1e-15)


def test_tension_feedforward_through_com():
    sys = make_system(quad_com="0, 0, 0", mount="0, 0, 0", exit_point="0, 0, 0")
    task = hover_task()
    t = payload_tensions(sys, task).tensions
    for j in range(3):
        assert np.abs(tension_feedforward(sys, j, [1.0, 0, 0, 0], task, t)).max() < 1e-15


def test_tension_feedforward_cross_product(prototype):
    task = hover_task()
    t = payload_tensions(prototype, task).tensions
    u = np.array([0.5, 0.0, math.cos(math.radians(30))])
    lever = np.array([0.0, 0.0, -0.064]) - prototype.quad_coms[0]
    M = tension_feedforward(prototype, 0, [1.0, 0, 0, 0], task, t)
    assert np.allclose(M, np.cross(lever, t[0] * u), atol=1e-12)


def test_controller_is_pure(table1):
    task = hover_task()
    joints = joints_from_task(table1, task)
    ctl = Controller(table1)
    ref = TaskReference.hold(task)
    ref = TaskReference(ref.position + [0.02, -0.01, 0.03], ref.cables)
    a = ctl.compute(0.0, task, joints, ref)
    b = ctl.compute(0.0, task, joints, ref)
    for name in ("thrust", "attitudes", "collective", "winch_rates", "tensions", "task_error"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_controller_at_hover(table1):
    task = hover_task()
    joints = joints_from_task(table1, task)
    out = Controller(table1).compute(0.0, task, joints, TaskReference.hold(task))
    idm = inverse_dynamics(table1, task, joints)
    assert np.allclose(out.thrust.reshape(-1), idm.G_q, atol=1e-12)
    assert np.array_equal(out.winch_rates, np.zeros(3))
    assert not out.winch_saturated.any() and not out.thrust_exceeded.any()


def test_gain_validation():
    with pytest.raises(ValueError):
        ControllerGains(omega_c=0.0)
    g = ControllerGains()
    assert g.k_p == 4.0 and g.k_d == 4.0
