"""Newton-Euler models of payload, winches and quadrotors, plus propeller mixing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import DegenerateConfigurationError
from .kinematics import KinematicMatrices, matrix_rank, pinv, second_order
from .model import (
    JointState,
    QuadrotorParams,
    SystemDescription,
    TaskState,
    cable_unit_vector,
    is_degenerate,
)


@dataclass(frozen=True, eq=False)
class TensionSolve:
    tensions: np.ndarray
    W: np.ndarray
    c: np.ndarray
    rhs: np.ndarray          # M_p xdd + c
    residual: float
    null_space: np.ndarray   # columns span N(W)

    @property
    def min_tension(self) -> float:
        return float(self.tensions.min())


@dataclass(frozen=True, eq=False)
class InverseDynamics:
    D_q: np.ndarray
    G_q: np.ndarray
    f: np.ndarray            # D_q xdd_t + G_q
    tensions: np.ndarray     # t(xdd_t) consistent with f
    kinematics: KinematicMatrices
    U: np.ndarray
    W_pinv: np.ndarray

    def thrust(self, task_accel) -> np.ndarray:
        return self.D_q @ np.asarray(task_accel, dtype=float) + self.G_q

    def thrust_of(self, j: int) -> np.ndarray:
        return self.f[3 * j:3 * j + 3]


@dataclass(frozen=True, eq=False)
class MixerCommand:
    thrusts: np.ndarray      # per propeller, N
    f_z: float
    moments: np.ndarray      # m_x, m_y, m_z in the body frame
    rotor_rates: np.ndarray  # rad/s
    saturated: tuple         # indices (0-based) of propellers outside [f_min, f_max]

    @property
    def is_saturated(self) -> bool:
        return bool(self.saturated)


# ---------------------------------------------------------------------------
# Payload
# ---------------------------------------------------------------------------

def cable_directions(task: TaskState) -> np.ndarray:
    """World-frame unit vectors from payload to quadrotor, one row per cable."""
    Rp = task.payload.matrix
    return np.array([Rp @ cable_unit_vector(c) for c in task.cables])


def wrench_matrix(sys: SystemDescription, task: TaskState) -> np.ndarray:
    """Maps tensions to the payload wrench: 3 x m for a point mass, 6 x m otherwise."""
    Rp = task.payload.matrix
    cols = []
    for i, c in enumerate(task.cables):
        u = cable_unit_vector(c)
        col = Rp @ u
        if not sys.point_mass:
            col = np.concatenate([col, Rp @ np.cross(sys.payload.attachments[i], u)])
        cols.append(col)
    return np.array(cols).T


def payload_mass_matrix(sys: SystemDescription, task: TaskState) -> np.ndarray:
    mp = sys.payload.mass
    if sys.point_mass:
        return mp * np.eye(3)
    Rp = task.payload.matrix
    M = np.zeros((6, 6))
    M[:3, :3] = mp * np.eye(3)
    M[3:, 3:] = Rp @ sys.payload.inertia @ Rp.T
    return M


def payload_bias(sys: SystemDescription, task: TaskState, external_wrench=None) -> np.ndarray:
    """c: gyroscopic term minus gravity wrench minus external wrench."""
    mp, g = sys.payload.mass, sys.gravity
    we = np.zeros(6) if external_wrench is None else np.asarray(external_wrench, dtype=float)
    if we.size == 3:
        we = np.concatenate([we, np.zeros(3)])
    if sys.point_mass:
        return -mp * g - we[:3]
    Rp = task.payload.matrix
    Iw = Rp @ sys.payload.inertia @ Rp.T
    w = task.angular_velocity
    c = np.zeros(6)
    c[:3] = -mp * g
    c[3:] = np.cross(w, Iw @ w) - np.cross(Rp @ sys.payload.com, mp * g)
    return c - we


def payload_tensions(sys: SystemDescription, task: TaskState, payload_accel=None,
                     external_wrench=None) -> TensionSolve:
    """Minimum-norm tensions t = W^+ (M_p xdd + c). Negative values are kept."""
    bad = [i + 1 for i, c in enumerate(task.cables) if is_degenerate(c)]
    if bad:
        raise DegenerateConfigurationError(f"cables {bad} sit at a pole", cables=bad)
    W = wrench_matrix(sys, task)
    rank = matrix_rank(W)
    if rank < W.shape[0]:
        raise DegenerateConfigurationError(
            f"wrench matrix rank {rank} < payload dof {W.shape[0]}", rank=rank)
    M = payload_mass_matrix(sys, task)
    acc = np.zeros(W.shape[0]) if payload_accel is None else np.asarray(payload_accel, dtype=float)[:W.shape[0]]
    c = payload_bias(sys, task, external_wrench)
    rhs = M @ acc + c
    t = pinv(W) @ rhs
    return TensionSolve(t, W, c, rhs, float(np.linalg.norm(W @ t - rhs)), null_space(W))


# ---------------------------------------------------------------------------
# Winches
# ---------------------------------------------------------------------------

def drum_rate(sys: SystemDescription, i: int, length_rate: float) -> float:
    return length_rate / sys.winches[i].drum_radius


def length_rate(sys: SystemDescription, i: int, drum_rate_: float) -> float:
    return drum_rate_ * sys.winches[i].drum_radius


def drum_torque_scalar(sys: SystemDescription, i: int, tension: float, drum_accel: float = 0.0) -> float:
    """Torque with the cable leaving the drum tangentially: I_xx wdot + r_d t."""
    w = sys.winches[i]
    return w.drum_inertia * drum_accel + w.drum_radius * tension


def cable_direction_in_winch(sys: SystemDescription, i: int, task: TaskState, joints: JointState) -> np.ndarray:
    w = sys.winches[i]
    u_world = task.payload.matrix @ cable_unit_vector(task.cables[i])
    return w.mount.matrix.T @ (joints.rotations[w.owner].T @ u_world)


def winch_torque(sys: SystemDescription, i: int, tension: float, drum_accel: float = 0.0,
                 direction=None) -> float:
    """Drum torque I_xx wdot + k . (x_I x t u), all in the winch frame.

    ``direction`` is the cable unit vector in the winch frame. Without it the
    cable is taken to leave the drum tangentially and the scalar form is used.
    """
    if tension < 0:
        raise ValueError("tension must be non-negative")
    w = sys.winches[i]
    if direction is None:
        return drum_torque_scalar(sys, i, tension, drum_accel)
    u = np.asarray(direction, dtype=float)
    return float(w.drum_inertia * drum_accel + np.cross(w.exit_point, tension * u)[0])


# ---------------------------------------------------------------------------
# Quadrotors
# ---------------------------------------------------------------------------

def quadrotor_wrench_balance(sys: SystemDescription, j: int, task: TaskState, joints: JointState,
                             tensions, accel=None, omega_dot=None):
    """Thrust force (world) and body moment (about the frame origin, body axes) quadrotor j needs.

    ``tensions`` is the full m-vector; only cables owned by j are used.
    ``accel`` is the frame-origin acceleration.
    """
    g = sys.gravity
    mj = sys.quad_masses[j]
    Ij = sys.quad_inertias[j]
    Rj = joints.rotations[j]
    Rp = task.payload.matrix
    acc = np.zeros(3) if accel is None else np.asarray(accel, dtype=float)
    wdot = np.zeros(3) if omega_dot is None else np.asarray(omega_dot, dtype=float)
    w = joints.omegas[j]
    Iw = Rj @ Ij @ Rj.T
    f = mj * acc - mj * g
    moment = Iw @ wdot + np.cross(w, Iw @ w) - np.cross(Rj @ sys.quad_coms[j], mj * g)
    for i in sys.cables_of(j):
        pull = tensions[i] * (Rp @ cable_unit_vector(task.cables[i]))
        f = f + pull
        moment = moment + np.cross(Rj @ sys.exit_points[i], pull)
    return f, Rj.T @ moment


def tension_matrix(sys: SystemDescription, task: TaskState) -> np.ndarray:
    """U: 3n x m, column i carries the cable direction in the owner's row block."""
    U = np.zeros((3 * sys.n, sys.m))
    dirs = cable_directions(task)
    for i, w in enumerate(sys.winches):
        U[3 * w.owner:3 * w.owner + 3, i] = dirs[i]
    return U


def quad_mass_matrix(sys: SystemDescription) -> np.ndarray:
    return np.kron(np.diag(sys.quad_masses), np.eye(3))


def gravity_vector(sys: SystemDescription) -> np.ndarray:
    """d: the weight each quadrotor must hold up, -m_j g stacked."""
    return np.concatenate([-mj * sys.gravity for mj in sys.quad_masses])


def inverse_dynamics(sys: SystemDescription, task: TaskState, joints: JointState, task_accel=None,
                     external_wrench=None, exit_velocity=None, exit_accel=None,
                     omega_dots=None) -> InverseDynamics:
    """f = D_q xdd_t + G_q."""
    _, km = second_order(sys, task, joints, None, exit_velocity, exit_accel, omega_dots)
    Mq = quad_mass_matrix(sys)
    U = tension_matrix(sys, task)
    W = wrench_matrix(sys, task)
    rank = matrix_rank(W)
    if rank < W.shape[0]:
        raise DegenerateConfigurationError(f"wrench matrix rank {rank} < payload dof {W.shape[0]}", rank=rank)
    W_pinv = pinv(W)
    Mp = payload_mass_matrix(sys, task)
    c = payload_bias(sys, task, external_wrench)
    pdof = Mp.shape[0]
    Mp_wide = np.zeros((pdof, km.A.shape[1]))
    Mp_wide[:, :pdof] = Mp
    D = Mq @ km.B_pinv @ km.A + U @ W_pinv @ Mp_wide
    G = Mq @ km.B_pinv @ km.b + U @ W_pinv @ c + gravity_vector(sys)
    xdd = np.zeros(km.A.shape[1]) if task_accel is None else np.asarray(task_accel, dtype=float)
    t = W_pinv @ (Mp_wide @ xdd + c)
    return InverseDynamics(D, G, D @ xdd + G, t, km, U, W_pinv)


# ---------------------------------------------------------------------------
# Propellers
# ---------------------------------------------------------------------------

def unmix(quad: QuadrotorParams, thrusts) -> np.ndarray:
    """Propeller thrusts -> (f_z, m_x, m_y, m_z)."""
    return quad.mixer_matrix @ np.asarray(thrusts, dtype=float)


def mix_params(quad: QuadrotorParams, f_z: float, m_x: float, m_y: float, m_z: float) -> MixerCommand:
    wrench = np.array([f_z, m_x, m_y, m_z], dtype=float)
    fp = np.linalg.solve(quad.mixer_matrix, wrench)
    tol = 1e-12 * max(1.0, quad.thrust_max)
    sat = tuple(int(k) for k in np.flatnonzero((fp < quad.thrust_min - tol) | (fp > quad.thrust_max + tol)))
    rates = np.sqrt(np.clip(fp, 0.0, None) / quad.kf)
    return MixerCommand(fp, float(f_z), wrench[1:], rates, sat)


def mix(sys: SystemDescription, j: int, f_z: float, m_x: float, m_y: float, m_z: float) -> MixerCommand:
    """Solve the 4x4 mixing relation of quadrotor j; saturation is reported, not raised."""
    return mix_params(sys.quadrotors[j], f_z, m_x, m_y, m_z)


def clip_to_box(quad: QuadrotorParams, thrusts) -> np.ndarray:
    return np.clip(np.asarray(thrusts, dtype=float), quad.thrust_min, quad.thrust_max)
