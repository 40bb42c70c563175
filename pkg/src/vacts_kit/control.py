"""Centralised feedback-linearisation controller, winch rate loop and attitude law."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ThrustDirectionError
from .model import JointState, SystemDescription, TaskState
from .spatial import (
    quat_conjugate,
    quat_from_matrix,
    quat_log,
    quat_multiply,
    quat_to_matrix,
)

THRUST_EPS = 1e-9


@dataclass(frozen=True)
class ControllerGains:
    """Task-space PD gains derived from a cutoff frequency and damping ratio.

    ``length_gain`` scales the PD gains of the cable-length slots; it is 0 by
    default because the winch loop owns the lengths. ``angle_gain`` does the
    same for the cable angle slots.
    """

    omega_c: float = 2.0
    zeta: float = 1.0
    k_c: float = 2.0
    omega_att: float = 20.0
    zeta_att: float = 1.0
    length_gain: float = 0.0
    angle_gain: float = 1.0
    payload_gain: float = 1.0
    kp: tuple | None = None   # explicit per-axis gains override the derived ones
    kd: tuple | None = None

    def __post_init__(self):
        for name in ("omega_c", "zeta", "k_c", "omega_att", "zeta_att"):
            if not getattr(self, name) > 0:
                raise ValueError(f"gain {name} must be > 0")

    @property
    def k_p(self) -> float:
        return self.omega_c ** 2

    @property
    def k_d(self) -> float:
        return 2.0 * self.zeta * self.omega_c

    def task_gains(self, sys: SystemDescription) -> tuple[np.ndarray, np.ndarray]:
        if self.kp is not None and self.kd is not None:
            return np.asarray(self.kp, dtype=float), np.asarray(self.kd, dtype=float)
        w = np.concatenate([np.full(sys.payload_dof, self.payload_gain)]
                           + [[self.angle_gain, self.angle_gain, self.length_gain]] * sys.m)
        return self.k_p * w, self.k_d * w

    def with_(self, **changes) -> "ControllerGains":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class TaskReference:
    """Desired payload pose/twist/acceleration and cable coordinates with two derivatives.

    ``cables``, ``cable_rates`` and ``cable_accels`` are m x 3 arrays of
    (azimuth, inclination, length).
    """

    position: np.ndarray
    cables: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    cable_rates: np.ndarray | None = None
    cable_accels: np.ndarray | None = None

    def __post_init__(self):
        cab = np.asarray(self.cables, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "cables", cab)
        for name in ("position", "velocity", "acceleration", "angular_velocity", "angular_acceleration"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "attitude", np.asarray(self.attitude, dtype=float))
        for name in ("cable_rates", "cable_accels"):
            v = getattr(self, name)
            object.__setattr__(self, name, np.zeros_like(cab) if v is None else np.asarray(v, dtype=float).reshape(cab.shape))

    @classmethod
    def hold(cls, task: TaskState) -> "TaskReference":
        return cls(np.array(task.payload.translation), task.cable_block(),
                   attitude=np.array(task.payload.rotation))


@dataclass(frozen=True, eq=False)
class WinchCommand:
    rate: float
    raw_rate: float
    limit: float
    saturated: bool


@dataclass(frozen=True, eq=False)
class ControlOutput:
    time: float
    thrust: np.ndarray           # n x 3, desired thrust vectors (world)
    attitudes: np.ndarray        # n x 4 desired attitude quaternions
    collective: np.ndarray       # n, projected on the current body z axis
    winch_rates: np.ndarray      # m, post-saturation drum rates
    raw_winch_rates: np.ndarray  # m, before saturation
    winch_limits: np.ndarray     # m, safety * omega_max(tau)
    winch_saturated: np.ndarray  # m bool
    tensions: np.ndarray         # m, model tension estimate
    thrust_exceeded: np.ndarray  # n bool, |f| above n_p * f_max
    task_error: np.ndarray
    feedforward_moments: np.ndarray | None = None  # n x 3 body-frame


# ---------------------------------------------------------------------------
# Task-space law
# ---------------------------------------------------------------------------

def _wrap(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def task_error(sys: SystemDescription, task: TaskState, ref: TaskReference) -> tuple[np.ndarray, np.ndarray]:
    """(x_t^d - x_t, xdot_t^d - xdot_t) with the rotation error as a quaternion logarithm."""
    e = [ref.position - task.payload.translation]
    ed = [ref.velocity - task.velocity]
    if not sys.point_mass:
        q_err = quat_multiply(ref.attitude, quat_conjugate(task.payload.rotation))
        e.append(quat_log(q_err))
        ed.append(ref.angular_velocity - task.angular_velocity)
    cab = task.cable_block()
    rates = np.array([[c.azimuth_rate, c.inclination_rate, c.length_rate] for c in task.cables])
    ce = ref.cables - cab
    ce[:, 0] = _wrap(ce[:, 0])
    e.append(ce.reshape(-1))
    ed.append((ref.cable_rates - rates).reshape(-1))
    return np.concatenate(e), np.concatenate(ed)


def reference_acceleration(sys: SystemDescription, ref: TaskReference) -> np.ndarray:
    head = [ref.acceleration] if sys.point_mass else [ref.acceleration, ref.angular_acceleration]
    return np.concatenate(head + [ref.cable_accels.reshape(-1)])


def commanded_acceleration(sys, task, ref, gains: ControllerGains, length_feedforward=None):
    """xdd^d + k_d e_dot + k_p e; ``length_feedforward`` replaces the length slots of xdd^d."""
    kp, kd = gains.task_gains(sys)
    e, ed = task_error(sys, task, ref)
    xdd = reference_acceleration(sys, ref)
    if length_feedforward is not None:
        slots = [sys.payload_dof + 3 * i + 2 for i in range(sys.m)]
        xdd = xdd.copy()
        xdd[slots] = length_feedforward
    return xdd + kd * ed + kp * e, e


def desired_thrust(sys: SystemDescription, task: TaskState, joints: JointState, ref: TaskReference,
                   gains: ControllerGains, external_wrench=None, length_feedforward=None):
    """f^d = D_q (xdd^d + k_d e_dot + k_p e) + G_q.

    Returns ``(f_d, inverse_dynamics_result, task_error)``.
    """
    from .dynamics import inverse_dynamics

    acc, e = commanded_acceleration(sys, task, ref, gains, length_feedforward)
    idm = inverse_dynamics(sys, task, joints, acc, external_wrench)
    return idm.f, idm, e


# ---------------------------------------------------------------------------
# Winch loop
# ---------------------------------------------------------------------------

def winch_rate(sys: SystemDescription, i: int, length: float, length_des: float, length_rate_des: float,
               tension: float, gains: ControllerGains | None = None) -> WinchCommand:
    """Drum rate (l_dot^d + k_c (l^d - l)) / r_d clamped to +-safety * omega_max(tau)."""
    if tension < 0:
        tension = 0.0
    k_c = (gains or ControllerGains()).k_c
    w = sys.winches[i]
    raw = (length_rate_des + k_c * (length_des - length)) / w.drum_radius
    limit = w.safety * w.max_speed(w.drum_radius * tension)
    rate = min(max(raw, -limit), limit)
    return WinchCommand(rate, raw, limit, abs(raw) > limit)


# ---------------------------------------------------------------------------
# Attitude
# ---------------------------------------------------------------------------

def attitude_command(f_des, yaw: float, current_attitude=None, return_matrix: bool = False):
    """Desired attitude aligning body z with the thrust vector at the given yaw.

    Returns ``(attitude, f_z)``, with f_z the thrust projected on the current
    body z axis (its norm when no current attitude is given).
    """
    f = np.asarray(f_des, dtype=float)
    norm = float(np.linalg.norm(f))
    if norm < THRUST_EPS:
        raise ThrustDirectionError("desired thrust is too small to define a direction")
    z = f / norm
    if z[2] <= 0.0:
        raise ThrustDirectionError(f"desired thrust {f.tolist()} points down or sideways; propellers cannot reverse")
    x_c = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    y = np.cross(z, x_c)
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    R = np.column_stack([x, y, z])
    if current_attitude is None:
        fz = norm
    else:
        fz = float(f @ quat_to_matrix(current_attitude)[:, 2])
    return (R if return_matrix else quat_from_matrix(R)), fz


def attitude_error(q, q_des) -> np.ndarray:
    """Body-frame rotation vector-like error, 2 sign(w) vec(q_des^-1 q)."""
    qe = quat_multiply(quat_conjugate(q_des), q)
    s = 1.0 if qe[0] >= 0 else -1.0
    return 2.0 * s * qe[1:]


def attitude_track(inertia, q, omega_body, q_des, gains: ControllerGains, omega_des=None,
                   feedforward=None) -> np.ndarray:
    """Body moment for a critically damped second-order attitude response.

    M = I(-2 zeta w (omega - omega_d) - w^2 e) + omega x I omega [+ feedforward]

    ``omega_des`` is expressed in the desired body frame.
    """
    I = np.asarray(inertia, dtype=float)
    w = np.asarray(omega_body, dtype=float)
    e = attitude_error(q, q_des)
    w_d = np.zeros(3) if omega_des is None else quat_to_matrix(q).T @ quat_to_matrix(q_des) @ omega_des
    M = I @ (-2.0 * gains.zeta_att * gains.omega_att * (w - w_d) - gains.omega_att ** 2 * e) + np.cross(w, I @ w)
    if feedforward is not None:
        M = M + np.asarray(feedforward, dtype=float)
    return M


def tension_feedforward(sys: SystemDescription, j: int, attitude, task: TaskState, tensions) -> np.ndarray:
    """Body moment cancelling the pull of quadrotor j's cables about its centre of mass."""
    from .model import cable_unit_vector

    R = quat_to_matrix(attitude)
    Rp = task.payload.matrix
    com = sys.quad_coms[j]
    M = np.zeros(3)
    for i in sys.cables_of(j):
        # the cable pulls the quadrotor along -u, toward the payload
        u = tensions[i] * (R.T @ Rp @ cable_unit_vector(task.cables[i]))
        M = M + np.cross(sys.exit_points[i] - com, u)
    return M


def moment_about_origin(com, moment_com, collective: float) -> np.ndarray:
    """Shift a body moment about the centre of mass to the frame origin.

    The collective thrust acts along body z through the origin, so the
    moment it leaves about the centre of mass is added back here.
    """
    return np.asarray(moment_com, dtype=float) + np.cross(np.asarray(com, dtype=float), [0.0, 0.0, collective])


# ---------------------------------------------------------------------------
# Full controller
# ---------------------------------------------------------------------------

class Controller:
    """Stateless apart from its configuration; ``compute`` is a pure function of its inputs."""

    def __init__(self, sys: SystemDescription, gains: ControllerGains | None = None,
                 saturation_feedforward: bool = True):
        self.sys = sys
        self.gains = gains or ControllerGains()
        self.saturation_feedforward = saturation_feedforward

    def compute(self, time: float, task: TaskState, joints: JointState, ref: TaskReference,
                external_wrench=None, weight_share: float = 1.0) -> ControlOutput:
        sys, gains = self.sys, self.gains
        # winch loop first so the length feed-forward knows which winches are pinned
        tension_guess = self._tension_estimate(task, joints, ref, external_wrench, None)
        wc = [winch_rate(sys, i, c.length, ref.cables[i, 2], ref.cable_rates[i, 2], tension_guess[i], gains)
              for i, c in enumerate(task.cables)]
        ff = ref.cable_accels[:, 2].copy()
        if self.saturation_feedforward:
            ff[[k for k, w in enumerate(wc) if w.saturated]] = 0.0
        ext = external_wrench
        if weight_share < 1.0:
            ext = self._weight_relief(weight_share, external_wrench)
        f, idm, e = desired_thrust(sys, task, joints, ref, gains, ext, ff)
        tensions = np.clip(idm.tensions, 0.0, None)
        thrust = f.reshape(sys.n, 3)
        atts, fz, exceeded = [], [], []
        for j in range(sys.n):
            q_d, fz_j = attitude_command(thrust[j], sys.quadrotors[j].yaw, joints.attitudes[j])
            atts.append(q_d)
            fz.append(fz_j)
            exceeded.append(np.linalg.norm(thrust[j]) > 4 * sys.quadrotors[j].thrust_max)
        ffm = np.array([tension_feedforward(sys, j, joints.attitudes[j], task, tensions) for j in range(sys.n)])
        return ControlOutput(
            time=time, thrust=thrust, attitudes=np.array(atts), collective=np.array(fz),
            winch_rates=np.array([w.rate for w in wc]), raw_winch_rates=np.array([w.raw_rate for w in wc]),
            winch_limits=np.array([w.limit for w in wc]),
            winch_saturated=np.array([w.saturated for w in wc]),
            tensions=tensions, thrust_exceeded=np.array(exceeded), task_error=e,
            feedforward_moments=ffm,
        )

    def _weight_relief(self, share, external_wrench):
        """External wrench emulating ground support of (1 - share) of the payload weight."""
        sys = self.sys
        we = np.zeros(6) if external_wrench is None else np.asarray(external_wrench, dtype=float).copy()
        if we.size == 3:
            we = np.concatenate([we, np.zeros(3)])
        we[:3] += -(1.0 - share) * sys.payload.mass * sys.gravity
        return we

    def _tension_estimate(self, task, joints, ref, external_wrench, ff):
        from .dynamics import payload_tensions
        from .errors import VactsError

        acc, _ = commanded_acceleration(self.sys, task, ref, self.gains, ff)
        try:
            return np.clip(payload_tensions(self.sys, task, acc[:self.sys.payload_dof], external_wrench).tensions,
                           0.0, None)
        except VactsError:
            return np.zeros(self.sys.m)
