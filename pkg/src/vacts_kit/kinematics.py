"""Loop closure, first- and second-order kinematics.

Task vector ordering: payload linear velocity (3), payload angular velocity
(3, rigid payload only), then (azimuth, inclination, length) rates for each
cable. Joint vector: the ``Fj`` origin velocities of all quadrotors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError, InconsistentCouplingError
from .model import (
    CableCoord,
    JointState,
    Pose,
    SystemDescription,
    TaskState,
    c_matrix,
    c_matrix_dot,
    cable_unit_vector,
    is_degenerate,
)
from .spatial import skew

PINV_RCOND = 1e-10
COUPLING_TOL = 1e-6
MIN_CABLE_LENGTH = 1e-12


def pinv(M: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse, singular values below 1e-10 * sigma_max dropped."""
    return np.linalg.pinv(M, rcond=PINV_RCOND)


def matrix_rank(M: np.ndarray) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > PINV_RCOND * s[0]))


@dataclass(frozen=True, eq=False)
class KinematicMatrices:
    A: np.ndarray
    B: np.ndarray
    J: np.ndarray
    a: np.ndarray           # task-space bias, A^+ times the limb bias
    limb_bias: np.ndarray   # per-limb velocity bias (3m), omega_j x R_j x_I + R_j xdot_I
    A_pinv: np.ndarray
    B_pinv: np.ndarray
    rank: int
    b: np.ndarray | None = None

    @property
    def rank_deficient(self) -> bool:
        return self.rank < min(self.A.shape)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def _payload_side(sys: SystemDescription, task: TaskState, i: int) -> np.ndarray:
    c = task.cables[i]
    Rp = task.payload.matrix
    return task.payload.translation + Rp @ (sys.payload.attachments[i] + c.length * cable_unit_vector(c))


def _exit_offsets(sys, attitudes_R, i, exit_points=None) -> np.ndarray:
    x_I = sys.exit_points[i] if exit_points is None else exit_points[i]
    return attitudes_R[sys.winches[i].owner] @ x_I


def loop_closure_residual(sys: SystemDescription, task: TaskState, joints: JointState) -> np.ndarray:
    """Payload-side minus quadrotor-side position of every cable end (m x 3)."""
    Rs = joints.rotations
    out = np.empty((sys.m, 3))
    for i, w in enumerate(sys.winches):
        out[i] = _payload_side(sys, task, i) - (joints.positions[w.owner] + _exit_offsets(sys, Rs, i))
    return out


def quadrotor_positions_from_task(sys: SystemDescription, task: TaskState, attitudes=None,
                                  tol: float = COUPLING_TOL) -> np.ndarray:
    """Quadrotor frame origins implied by the task coordinates (n x 3)."""
    attitudes = _default_attitudes(sys, attitudes)
    Rs = [Pose(np.zeros(3), q).matrix for q in attitudes]
    out = np.empty((sys.n, 3))
    for j in range(sys.n):
        cand = [_payload_side(sys, task, i) - _exit_offsets(sys, Rs, i) for i in sys.cables_of(j)]
        if len(cand) > 1:
            gap = max(np.linalg.norm(c - cand[0]) for c in cand[1:])
            if gap > tol:
                raise InconsistentCouplingError(j + 1, gap)
        out[j] = np.mean(cand, axis=0)
    return out


def quadrotor_velocities_from_task(sys: SystemDescription, task: TaskState, attitudes=None,
                                   omegas=None, exit_velocity=None) -> np.ndarray:
    """Quadrotor frame-origin velocities consistent with the task rates (n x 3)."""
    attitudes = _default_attitudes(sys, attitudes)
    omegas = np.zeros((sys.n, 3)) if omegas is None else np.asarray(omegas, dtype=float).reshape(sys.n, 3)
    joints = JointState(np.zeros((sys.n, 3)), np.zeros((sys.n, 3)), attitudes, omegas)
    A = full_task_jacobian(sys, task)
    limb = _limb_bias(sys, joints, exit_velocity)
    xdot = task.rates(point_mass=False)
    lhs = A @ xdot - limb
    out = np.empty((sys.n, 3))
    for j in range(sys.n):
        out[j] = np.mean([lhs[3 * i:3 * i + 3] for i in sys.cables_of(j)], axis=0)
    return out


def joints_from_task(sys: SystemDescription, task: TaskState, attitudes=None, omegas=None) -> JointState:
    attitudes = _default_attitudes(sys, attitudes)
    omegas = np.zeros((sys.n, 3)) if omegas is None else omegas
    pos = quadrotor_positions_from_task(sys, task, attitudes)
    vel = quadrotor_velocities_from_task(sys, task, attitudes, omegas)
    return JointState(pos, vel, attitudes, omegas)


def _default_attitudes(sys, attitudes):
    if attitudes is None:
        return np.tile([1.0, 0.0, 0.0, 0.0], (sys.n, 1))
    return np.asarray(attitudes, dtype=float).reshape(sys.n, 4)


def task_from_tracking(sys: SystemDescription, payload_pose: Pose, joints: JointState,
                       payload_twist=None, exit_velocity=None) -> TaskState:
    """Recover cable coordinates and their rates from tracked payload and quadrotor states.

    At a pole the azimuth is set to 0 and its rate to 0.
    """
    twist = np.zeros(6) if payload_twist is None else np.asarray(payload_twist, dtype=float)
    Rp = payload_pose.matrix
    x_p = payload_pose.translation
    v_p, w_p = twist[:3], twist[3:]
    Rs = joints.rotations
    cables = []
    for i, wch in enumerate(sys.winches):
        j = wch.owner
        rI = Rs[j] @ sys.exit_points[i]
        p_I = joints.positions[j] + rI
        pdot_I = joints.velocities[j] + np.cross(joints.omegas[j], rI)
        if exit_velocity is not None:
            pdot_I = pdot_I + Rs[j] @ exit_velocity[i]
        rel = p_I - x_p
        v = Rp.T @ rel - sys.payload.attachments[i]
        vdot = Rp.T @ (pdot_I - v_p - np.cross(w_p, rel))
        length = float(np.linalg.norm(v))
        if length < MIN_CABLE_LENGTH:
            raise DegenerateConfigurationError(f"cable {i + 1} has zero length", cables=[i + 1])
        inclination = math.acos(max(-1.0, min(1.0, v[2] / length)))
        horiz = math.hypot(v[0], v[1])
        azimuth = math.atan2(v[1], v[0]) if horiz > 1e-8 * length else 0.0
        coord = CableCoord(azimuth, inclination, length)
        u = cable_unit_vector(coord)
        C = c_matrix(coord)
        ldot = float(u @ vdot)
        st = math.sin(inclination)
        phidot = float(C[:, 0] @ vdot) / (length * st * st) if not is_degenerate(coord) else 0.0
        thetadot = float(C[:, 1] @ vdot) / length
        cables.append(CableCoord(azimuth, inclination, length, phidot, thetadot, ldot))
    return TaskState(payload_pose, twist, tuple(cables))


# ---------------------------------------------------------------------------
# Jacobians
# ---------------------------------------------------------------------------

def _check_degenerate(task: TaskState):
    bad = [i + 1 for i, c in enumerate(task.cables) if is_degenerate(c)]
    if bad:
        raise DegenerateConfigurationError(f"cables {bad} sit at a pole (sin(theta) ~ 0)", cables=bad)


def full_task_jacobian(sys: SystemDescription, task: TaskState) -> np.ndarray:
    """A with the rotational payload columns always present (3m x (6 + 3m))."""
    m = sys.m
    A = np.zeros((3 * m, 6 + 3 * m))
    Rp = task.payload.matrix
    for i, c in enumerate(task.cables):
        u = cable_unit_vector(c)
        r = Rp @ (sys.payload.attachments[i] + c.length * u)
        rows = slice(3 * i, 3 * i + 3)
        A[rows, 0:3] = np.eye(3)
        A[rows, 3:6] = skew(r).T
        A[rows, 6 + 3 * i:8 + 3 * i] = c.length * (Rp @ c_matrix(c))
        A[rows, 8 + 3 * i] = Rp @ u
    return A


def task_jacobian(sys: SystemDescription, task: TaskState) -> np.ndarray:
    A = full_task_jacobian(sys, task)
    if sys.point_mass:
        A = np.delete(A, np.s_[3:6], axis=1)
    return A


def joint_jacobian(sys: SystemDescription) -> np.ndarray:
    """Stacked identity blocks: row block i picks the owner of cable i."""
    B = np.zeros((3 * sys.m, 3 * sys.n))
    for i, w in enumerate(sys.winches):
        B[3 * i:3 * i + 3, 3 * w.owner:3 * w.owner + 3] = np.eye(3)
    return B


def _limb_bias(sys, joints: JointState, exit_velocity=None) -> np.ndarray:
    Rs = joints.rotations
    out = np.zeros(3 * sys.m)
    for i, w in enumerate(sys.winches):
        j = w.owner
        term = np.cross(joints.omegas[j], Rs[j] @ sys.exit_points[i])
        if exit_velocity is not None:
            term = term + Rs[j] @ np.asarray(exit_velocity[i], dtype=float)
        out[3 * i:3 * i + 3] = term
    return out


def first_order(sys: SystemDescription, task: TaskState, joints: JointState,
                exit_velocity=None) -> KinematicMatrices:
    """A, B, the bias a and J = A^+ B at the given state.

    ``exit_velocity`` optionally gives the motion of each cable exit point in
    its owner's frame (m x 3); it is zero for a fixed guide hole.
    """
    _check_degenerate(task)
    A = task_jacobian(sys, task)
    B = joint_jacobian(sys)
    A_pinv = pinv(A)
    limb = _limb_bias(sys, joints, exit_velocity)
    return KinematicMatrices(
        A=A, B=B, J=A_pinv @ B, a=A_pinv @ limb, limb_bias=limb,
        A_pinv=A_pinv, B_pinv=pinv(B), rank=matrix_rank(A),
    )


def second_order_bias(sys: SystemDescription, task: TaskState, joints: JointState,
                      exit_velocity=None, exit_accel=None, omega_dots=None) -> np.ndarray:
    """b such that B qdd = A xdd_t + b."""
    Rp = task.payload.matrix
    w_p = np.zeros(3) if sys.point_mass else task.angular_velocity
    Rs = joints.rotations
    b = np.zeros(3 * sys.m)
    for i, c in enumerate(task.cables):
        u = cable_unit_vector(c)
        C = c_matrix(c)
        Cd = c_matrix_dot(c)
        ad = c.angles_rate
        r = Rp @ (sys.payload.attachments[i] + c.length * u)
        rel_rate = Rp @ (c.length * C @ ad + c.length_rate * u)
        payload_side = (np.cross(w_p, np.cross(w_p, r)) + 2.0 * np.cross(w_p, rel_rate)
                        + Rp @ (c.length * Cd @ ad + 2.0 * c.length_rate * C @ ad))
        j = sys.winches[i].owner
        rI = Rs[j] @ sys.exit_points[i]
        w_j = joints.omegas[j]
        quad_side = np.cross(w_j, np.cross(w_j, rI))
        if omega_dots is not None:
            quad_side = quad_side + np.cross(omega_dots[j], rI)
        if exit_velocity is not None:
            quad_side = quad_side + 2.0 * np.cross(w_j, Rs[j] @ exit_velocity[i])
        if exit_accel is not None:
            quad_side = quad_side + Rs[j] @ exit_accel[i]
        b[3 * i:3 * i + 3] = payload_side - quad_side
    return b


def second_order(sys: SystemDescription, task: TaskState, joints: JointState, task_accel=None,
                 exit_velocity=None, exit_accel=None, omega_dots=None):
    """Joint accelerations for a task acceleration: qdd = B^+ A xdd_t + B^+ b.

    Returns ``(qdd, km)`` where ``km`` carries A, B and b.
    """
    km = first_order(sys, task, joints, exit_velocity)
    b = second_order_bias(sys, task, joints, exit_velocity, exit_accel, omega_dots)
    km = KinematicMatrices(km.A, km.B, km.J, km.a, km.limb_bias, km.A_pinv, km.B_pinv, km.rank, b)
    xdd = np.zeros(km.A.shape[1]) if task_accel is None else np.asarray(task_accel, dtype=float)
    qdd = km.B_pinv @ (km.A @ xdd + b)
    return qdd, km
