import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_system
from oracles import symmetric_hover_tension, unit
from vacts_kit.checks import random_attitudes, random_task
from vacts_kit.dynamics import (drum_rate, gravity_vector, inverse_dynamics, length_rate, mix, payload_tensions,
                                quadrotor_wrench_balance, unmix, winch_torque, wrench_matrix)
from vacts_kit.errors import DegenerateConfigurationError
from vacts_kit.kinematics import joints_from_task, second_order
from vacts_kit.model import KGCM_TO_NM, CableCoord, Pose, task_at_rest

G = 9.81


def hover_task(theta=30.0, length=1.4, azimuths=(0.0, 120.0, -120.0), position=(0.0, 0.0, 1.0)):
    cables = tuple(CableCoord(math.radians(a), math.radians(theta), length) for a in azimuths)
    return task_at_rest(Pose(np.array(position, dtype=float)), cables)


@pytest.mark.parametrize("theta", [15.0, 30.0, 45.0, 60.0])
def test_symmetric_hover_tension(table1, theta):
    sol = payload_tensions(table1, hover_task(theta))
    assert np.abs(sol.tensions - symmetric_hover_tension(1.0, G, math.radians(theta))).max() < 1e-9
    assert sol.residual < 1e-9


def test_hover_tension_value(table1):
    sol = payload_tensions(table1, hover_task())
    assert np.allclose(sol.tensions, 3.7759, atol=5e-5)
    assert sol.null_space.shape[1] == 0


def test_external_support_removes_tension(table1):
    sol = payload_tensions(table1, hover_task(), external_wrench=[0.0, 0.0, 1.0 * G])
    assert np.abs(sol.tensions).max() < 1e-12


def test_generic_square_solve(table1, rng):
    for _ in range(20):
        task = random_task(table1, rng)
        acc = rng.normal(size=3)
        sol = payload_tensions(table1, task, acc)
        # independent route: build W from the closed-form unit vector and solve directly
        W = np.column_stack([unit(c.azimuth, c.inclination) for c in task.cables])
        t = np.linalg.solve(W, 1.0 * (acc - np.array([0, 0, -G])))
        assert np.allclose(sol.tensions, t, atol=1e-10)
        assert sol.residual < 1e-10


def test_rigid_payload_newton_euler_residual(rigid6, rng):
    for _ in range(20):
        task = random_task(rigid6, rng, rates=True)
        acc = rng.normal(size=6)
        sol = payload_tensions(rigid6, task, acc)
        assert sol.residual < 1e-9
        # sum of forces and moments rebuilt from attachment points
        R = task.payload.matrix
        force, moment = np.zeros(3), np.zeros(3)
        for i, c in enumerate(task.cables):
            pull = sol.tensions[i] * (R @ unit(c.azimuth, c.inclination))
            force += pull
            moment += np.cross(R @ rigid6.payload.attachments[i], pull)
        mp = rigid6.payload.mass
        Iw = R @ rigid6.payload.inertia @ R.T
        w = task.angular_velocity
        assert np.allclose(force + mp * np.array([0, 0, -G]), mp * acc[:3], atol=1e-9)
        assert np.allclose(moment, Iw @ acc[3:] + np.cross(w, Iw @ w), atol=1e-9)


def test_rank_deficient_rigid_rejected(rigid3):
    with pytest.raises(DegenerateConfigurationError):
        payload_tensions(rigid3, hover_task())


def test_winch_torque_at_stall(table1):
    t = 6 * KGCM_TO_NM / 0.02
    assert round(t, 2) == 29.42
    tau = winch_torque(table1, 0, t, 0.0, direction=[0.0, 0.0, 1.0])
    assert math.isclose(tau, table1.winches[0].stall_torque, rel_tol=1e-12)
    assert round(tau, 4) == 0.5884
    assert math.isclose(winch_torque(table1, 0, t), 0.5884, rel_tol=1e-4)


def test_winch_inertial_term(table1):
    assert math.isclose(winch_torque(table1, 0, 0.0, 10.0), 1e-4, rel_tol=1e-12)
    with pytest.raises(ValueError):
        winch_torque(table1, 0, -1.0)


def test_drum_rate_relation(table1):
    assert math.isclose(drum_rate(table1, 0, 0.02), 1.0)
    assert math.isclose(length_rate(table1, 0, 1.0), 0.02)


def test_quadrotor_force_table1(table1):
    task = hover_task()
    joints = joints_from_task(table1, task)
    t = payload_tensions(table1, task).tensions
    f, _ = quadrotor_wrench_balance(table1, 0, task, joints, t)
    assert np.allclose(f, [1.888, 0.0, 15.042], atol=5e-4)
    tc = symmetric_hover_tension(1.0, G, math.radians(30))
    exact = np.array([tc * 0.5, 0.0, 1.2 * G + tc * math.cos(math.radians(30))])
    assert np.allclose(f, exact, atol=1e-9)


def test_no_moment_when_cable_passes_through_com():
    sys = make_system(quad_com="0, 0, 0", mount="0, 0, 0", exit_point="0, 0, 0")
    task = hover_task()
    joints = joints_from_task(sys, task)
    t = payload_tensions(sys, task).tensions
    for j in range(3):
        _, m = quadrotor_wrench_balance(sys, j, task, joints, t)
        assert np.abs(m).max() < 1e-12


def test_compensation_moment_cross_product(prototype):
    task = hover_task()
    joints = joints_from_task(prototype, task)
    t = payload_tensions(prototype, task).tensions
    _, m = quadrotor_wrench_balance(prototype, 0, task, joints, t)
    # identity attitude: body and world axes agree
    mj, com = prototype.quad_masses[0], prototype.quad_coms[0]
    x_exit = np.array([0.0, 0.0, -0.064])
    expected = np.cross(com, -mj * np.array([0, 0, -G])) + np.cross(x_exit, t[0] * unit(0.0, math.radians(30)))
    assert np.allclose(m, expected, atol=1e-12)
    comp = np.cross(x_exit, t[0] * unit(0.0, math.radians(30)))
    assert abs(comp[1]) > 0.05 and abs(comp[2]) < 1e-15
    assert np.abs(m[:2]).max() > 0.05


def test_hover_inverse_dynamics_matches_balance(table1):
    task = hover_task()
    joints = joints_from_task(table1, task)
    idm = inverse_dynamics(table1, task, joints)
    assert np.array_equal(idm.f, idm.G_q)
    for j in range(3):
        f, _ = quadrotor_wrench_balance(table1, j, task, joints, idm.tensions)
        assert np.abs(idm.thrust_of(j) - f).max() < 1e-9


@pytest.mark.parametrize("fixture", ["table1", "rigid6"])
def test_inverse_dynamics_compositional(fixture, request):
    """D_q xdd + G_q equals the per-quadrotor balance driven by the kinematic accelerations."""
    sys = request.getfixturevalue(fixture)
    rng = np.random.default_rng(11)
    for _ in range(10):
        task = random_task(sys, rng, rates=True)
        att = random_attitudes(sys, rng)
        joints = joints_from_task(sys, task, att)
        xdd = rng.normal(size=(3 if sys.point_mass else 6) + 3 * sys.m)
        idm = inverse_dynamics(sys, task, joints, xdd)
        qdd, _ = second_order(sys, task, joints, xdd)
        sol = payload_tensions(sys, task, xdd)
        assert np.allclose(idm.tensions, sol.tensions, atol=1e-9)
        for j in range(sys.n):
            f, _ = quadrotor_wrench_balance(sys, j, task, joints, sol.tensions, accel=qdd[3 * j:3 * j + 3])
            assert np.abs(idm.thrust_of(j) - f).max() < 1e-8


def test_massless_payload_and_winches():
    sys = make_system(payload_mass=1e-12, winch_mass="0 g")
    task = hover_task()
    idm = inverse_dynamics(sys, task, joints_from_task(sys, task))
    assert np.allclose(idm.f, np.tile([0.0, 0.0, 1.05 * G], 3), atol=1e-9)
    assert np.allclose(gravity_vector(sys), idm.f, atol=1e-9)


def test_mixer_examples(table1):
    q = table1.quadrotors[0]
    assert np.allclose(unmix(q, [1, 1, 1, 1]), [4, 0, 0, 0], atol=1e-15)
    k = q.km / q.kf
    assert round(k, 7) == 0.0152113
    assert math.isclose(unmix(q, [1, 0, 1, 0])[3], -2 * k, rel_tol=1e-12)
    cmd = mix(table1, 0, 18.0, 0.0, 0.0, 0.0)
    assert np.allclose(cmd.thrusts, 4.5, atol=1e-12)
    assert not cmd.is_saturated
    assert mix(table1, 0, 18.1, 0.0, 0.0, 0.0).is_saturated


@given(st.tuples(*[st.floats(0.0, 4.5)] * 4))
def test_mixer_round_trip(fp):
    sys = make_system()
    w = unmix(sys.quadrotors[0], fp)
    back = mix(sys, 0, *w)
    assert np.abs(back.thrusts - np.array(fp)).max() < 1e-12
    assert np.allclose(back.rotor_rates ** 2 * sys.quadrotors[0].kf, np.array(fp), atol=1e-12)


def test_wrench_matrix_shapes(table1, rigid6):
    assert wrench_matrix(table1, hover_task()).shape == (3, 3)
    task = hover_task(azimuths=(40.0, 20.0, 160.0, 140.0, -80.0, -100.0))
    assert wrench_matrix(rigid6, task).shape == (6, 6)
