import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_system, system_text
from oracles import central_difference, unit
from vacts_kit.errors import ConfigError
from vacts_kit.kinematics import joint_jacobian
from vacts_kit.model import (CableCoord, KGCM_TO_NM, Pose, c_matrix, cable_unit_vector, dump_system, is_degenerate,
                             load_system, parse_system, resolve_config, systems_close)
from vacts_kit.spatial import parallel_axis

angles = st.tuples(st.floats(-math.pi, math.pi), st.floats(0.0, math.pi))


def test_table1_derived_masses(table1):
    assert table1.n == 3 and table1.m == 3
    assert table1.s == (1, 1, 1)
    assert np.allclose(table1.quad_masses, 1.2, atol=1e-12)
    assert math.isclose(table1.winches[0].stall_torque, 6 * KGCM_TO_NM, rel_tol=1e-12)
    assert round(table1.winches[0].stall_torque, 4) == 0.5884
    assert table1.payload.mass == 1.0
    assert table1.quadrotors[0].thrust_max == 4.5
    az = [math.degrees(c.azimuth) for c in table1.reference.cables]
    assert np.allclose(az, [0.0, 120.0, -120.0])


def test_coupled_owner_layout():
    sys = make_system(n=2, owners=[1, 2, 2], azimuths=[0.0, 120.0, -120.0])
    assert sys.m == 3 and sys.s == (1, 2)
    B = joint_jacobian(sys)
    expected = np.zeros((9, 6))
    expected[0:3, 0:3] = np.eye(3)
    expected[3:6, 3:6] = np.eye(3)
    expected[6:9, 3:6] = np.eye(3)
    assert np.array_equal(B, expected)


def test_fewer_cables_than_quadrotors_rejected():
    text = system_text(n=3, owners=[1, 2])
    with pytest.raises(ConfigError) as err:
        parse_system(text)
    assert "m=2" in str(err.value)


def test_unit_vector_examples():
    assert np.allclose(cable_unit_vector(CableCoord(0.0, 0.0, 1.0)), [0, 0, 1], atol=1e-15)
    assert np.allclose(cable_unit_vector(CableCoord(0.0, math.pi / 2, 1.0)), [1, 0, 0], atol=1e-15)
    u = cable_unit_vector(CableCoord(math.radians(120), math.radians(30), 1.0))
    assert np.allclose(u, [-0.25, 0.43301, 0.86603], atol=5e-6)


def test_c_matrix_equator():
    C = c_matrix(CableCoord(0.0, math.pi / 2, 1.0))
    assert np.allclose(C, [[0, 0], [1, 0], [0, -1]], atol=1e-15)


def test_c_matrix_finite_difference():
    fd = central_difference(lambda a: unit(a[0], a[1]), [0.3, 0.7], h=1e-6)
    assert np.abs(fd - c_matrix(CableCoord(0.3, 0.7, 1.0))).max() < 1e-6


def test_pole_is_degenerate():
    c = CableCoord(0.4, 0.0, 1.0)
    C = c_matrix(c)
    assert np.allclose(C[2], [0.0, 0.0])
    assert np.linalg.matrix_rank(C) < 2
    assert is_degenerate(c)
    assert is_degenerate(CableCoord(0.0, math.pi, 1.0))
    assert not is_degenerate(CableCoord(0.0, 0.3, 1.0))


@given(angles)
def test_unit_norm_and_tangency(a):
    c = CableCoord(a[0], a[1], 1.0)
    u = cable_unit_vector(c)
    assert abs(np.linalg.norm(u) - 1.0) < 1e-12
    assert np.abs(u @ c_matrix(c)).max() < 1e-12


def test_invalid_cable_coordinates():
    with pytest.raises(ValueError):
        CableCoord(0.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        CableCoord(0.0, -0.1, 1.0)


def test_pose_rejects_non_unit_quaternion():
    with pytest.raises(ValueError):
        Pose(np.zeros(3), [1.0, 0.1, 0.0, 0.0])


@pytest.mark.parametrize("name", ["table1", "prototype"])
def test_dump_parse_round_trip(name):
    sys = load_system(resolve_config(name))
    again = parse_system(dump_system(sys))
    assert systems_close(sys, again, 1e-12)


def test_round_trip_rigid(rigid6):
    assert systems_close(rigid6, parse_system(dump_system(rigid6)), 1e-12)


def test_composite_inertia(table1):
    q = table1.quadrotors[0]
    w = table1.winches[0]
    Rw = w.mount.matrix
    expected = (q.inertia + parallel_axis(q.mass, q.com) + Rw @ w.inertia @ Rw.T
                + parallel_axis(w.mass, w.com_in_quad))
    I = table1.quad_inertias[0]
    assert np.allclose(I, expected, atol=1e-12)
    assert np.abs(I - I.T).max() < 1e-12
    assert np.all(np.linalg.eigvalsh(table1.quad_inertias_com[0]) > 0)


def test_composite_com_weighted_by_mass(table1):
    q, w = table1.quadrotors[0], table1.winches[0]
    expected = (q.mass * q.com + w.mass * w.com_in_quad) / (q.mass + w.mass)
    assert np.allclose(table1.quad_coms[0], expected, atol=1e-15)


def test_exit_point_in_quadrotor_frame(prototype):
    assert np.allclose(prototype.exit_points, [[0.0, 0.0, -0.064]] * 3, atol=1e-15)


def test_parse_error_carries_line_number():
    text = system_text().replace("mass = 1.05 kg", "mass = heavy kg")
    with pytest.raises(ConfigError) as err:
        parse_system(text)
    assert err.value.line is not None
    assert "line" in str(err.value)


def test_bad_unit_rejected():
    with pytest.raises(ConfigError) as err:
        parse_system(system_text().replace("drum_radius = 2 cm", "drum_radius = 2 deg"))
    assert "drum_radius" in str(err.value)


def test_bounds_are_checked():
    with pytest.raises(ConfigError) as err:
        parse_system(system_text(safety=1.5))
    assert "safety" in str(err.value)


def test_corrupt_file(tmp_path):
    bad = tmp_path / "bad.sys"
    bad.write_text("[system\npoint_mass = yes\n")
    with pytest.raises(ConfigError):
        load_system(bad)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_system(tmp_path / "nope.sys")


def test_torque_units():
    a = make_system()
    b = parse_system(system_text().replace("stall_torque = 6 kgcm", "stall_torque = 0.588399 Nm"))
    assert math.isclose(a.winches[0].stall_torque, b.winches[0].stall_torque, rel_tol=1e-6)
