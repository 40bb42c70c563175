"""Model invariant suite: loop closure, Jacobians against finite differences, mixer round trip."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import mix_params, unmix
from .errors import DegenerateConfigurationError
from .kinematics import (first_order, full_task_jacobian, loop_closure_residual, matrix_rank,
                         quadrotor_positions_from_task, task_from_tracking, task_jacobian)
from .model import CableCoord, JointState, Pose, SystemDescription, TaskState, c_matrix, cable_unit_vector, is_degenerate
from .spatial import quat_exp, quat_multiply

FD_STEP = 1e-5


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {self.value:.3e} (tol {self.tolerance:.0e}){' ' + self.detail if self.detail else ''}"


def random_task(sys: SystemDescription, rng, rates: bool = False) -> TaskState:
    """A random non-degenerate task state (inclinations kept away from the poles)."""
    pos = rng.uniform(-1.0, 1.0, 3) + np.array([0.0, 0.0, 1.0])
    rot = np.array([1.0, 0.0, 0.0, 0.0]) if sys.point_mass else quat_exp(rng.normal(0.0, 0.6, 3))
    cables = []
    for _ in range(sys.m):
        rr = rng.normal(0.0, 0.3, 3) if rates else np.zeros(3)
        cables.append(CableCoord(rng.uniform(-np.pi, np.pi), rng.uniform(0.2, 1.4), rng.uniform(0.5, 2.0),
                                 rr[0], rr[1], rr[2]))
    twist = np.zeros(6)
    if rates:
        twist[:3] = rng.normal(0.0, 0.3, 3)
        if not sys.point_mass:
            twist[3:] = rng.normal(0.0, 0.3, 3)
    return TaskState(Pose(pos, rot), twist, tuple(cables))


def random_attitudes(sys: SystemDescription, rng, spread: float = 0.3) -> np.ndarray:
    return np.array([quat_exp(rng.normal(0.0, spread, 3)) for _ in range(sys.n)])


def _rel(err: float, scale: float) -> float:
    return err / max(scale, 1e-12)


def check_loop_closure(sys: SystemDescription, samples: int = 100, seed: int = 0, tol: float = 1e-9) -> CheckResult:
    """Task -> quadrotor positions -> task recovers every coordinate."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        task = random_task(sys, rng)
        att = random_attitudes(sys, rng)
        pos = quadrotor_positions_from_task(sys, task, att)
        joints = JointState(pos, np.zeros_like(pos), att, np.zeros_like(pos))
        worst = max(worst, float(np.abs(loop_closure_residual(sys, task, joints)).max()))
        back = task_from_tracking(sys, task.payload, joints)
        a = np.array([[c.azimuth, c.inclination, c.length] for c in task.cables])
        b = np.array([[c.azimuth, c.inclination, c.length] for c in back.cables])
        d = a - b
        d[:, 0] = (d[:, 0] + np.pi) % (2 * np.pi) - np.pi
        worst = max(worst, float(np.abs(d).max()))
    return CheckResult("loop-closure round trip", bool(worst < tol), float(worst), tol)


def check_cable_jacobian(sys: SystemDescription, samples: int = 100, seed: int = 1, tol: float = 1e-5) -> CheckResult:
    """C_i = d u / d(azimuth, inclination) against central differences."""
    rng = np.random.default_rng(seed)
    h = FD_STEP
    worst = 0.0
    for _ in range(samples):
        phi, th = rng.uniform(-np.pi, np.pi), rng.uniform(0.2, np.pi - 0.2)
        c = CableCoord(phi, th, 1.0)
        fd = np.column_stack([
            (cable_unit_vector(CableCoord(phi + h, th, 1.0)) - cable_unit_vector(CableCoord(phi - h, th, 1.0))) / (2 * h),
            (cable_unit_vector(CableCoord(phi, th + h, 1.0)) - cable_unit_vector(CableCoord(phi, th - h, 1.0))) / (2 * h),
        ])
        C = c_matrix(c)
        worst = max(worst, _rel(np.linalg.norm(fd - C), np.linalg.norm(C)))
    return CheckResult("cable Jacobian C_i vs finite differences", bool(worst < tol), float(worst), tol, "relative")


def _attachment_points(sys: SystemDescription, payload: Pose, cables) -> np.ndarray:
    R = payload.matrix
    return np.concatenate([payload.translation + R @ (sys.payload.attachments[i] + c.length * cable_unit_vector(c))
                           for i, c in enumerate(cables)])


def check_task_jacobian(sys: SystemDescription, samples: int = 100, seed: int = 2, tol: float = 1e-5) -> CheckResult:
    """A against central differences of the cable-end positions in every task coordinate."""
    rng = np.random.default_rng(seed)
    h = FD_STEP
    worst = 0.0
    for _ in range(samples):
        task = random_task(sys, rng)
        A = full_task_jacobian(sys, task)
        fd = np.zeros_like(A)
        p, q = task.payload.translation, task.payload.rotation
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            fd[:, k] = (_attachment_points(sys, Pose(p + dp, q), task.cables)
                        - _attachment_points(sys, Pose(p - dp, q), task.cables)) / (2 * h)
            # world-frame rotation increment, matching the angular-velocity columns
            fd[:, 3 + k] = (_attachment_points(sys, Pose(p, quat_multiply(quat_exp(dp), q)), task.cables)
                            - _attachment_points(sys, Pose(p, quat_multiply(quat_exp(-dp), q)), task.cables)) / (2 * h)
        for i, c in enumerate(task.cables):
            for k in range(3):
                vals = [c.azimuth, c.inclination, c.length]
                plus, minus = list(vals), list(vals)
                plus[k] += h
                minus[k] -= h
                cp = list(task.cables)
                cm = list(task.cables)
                cp[i] = CableCoord(*plus)
                cm[i] = CableCoord(*minus)
                fd[:, 6 + 3 * i + k] = (_attachment_points(sys, task.payload, cp)
                                        - _attachment_points(sys, task.payload, cm)) / (2 * h)
        worst = max(worst, _rel(np.linalg.norm(fd - A), np.linalg.norm(A)))
    return CheckResult("task Jacobian A vs finite differences", bool(worst < tol), float(worst), tol, "relative")


def _trajectory(sys, task0: TaskState, att0, omegas, t: float):
    """Task and attitudes moving at constant rates from a starting point."""
    tw = task0.twist
    pos = task0.payload.translation + t * tw[:3]
    rot = task0.payload.rotation if sys.point_mass else quat_multiply(quat_exp(t * tw[3:]), task0.payload.rotation)
    cables = tuple(CableCoord(c.azimuth + t * c.azimuth_rate, c.inclination + t * c.inclination_rate,
                              c.length + t * c.length_rate) for c in task0.cables)
    att = np.array([quat_multiply(quat_exp(t * w), a) for w, a in zip(omegas, att0)])
    task = TaskState(Pose(pos, rot), np.zeros(6), cables)
    return task, att


def check_velocity_map(sys: SystemDescription, samples: int = 100, seed: int = 3, tol: float = 1e-5) -> CheckResult:
    """Velocity map against joint rates taken by central differences along a smooth trajectory.

    The task vector is redundant (3 + 3m or 6 + 3m entries for 3n joint
    coordinates), so J qdot + a is the minimum-norm task rate. Both it and
    the true task rate must reproduce the differenced joint motion through
    A xdot = B qdot + (limb bias).
    """
    rng = np.random.default_rng(seed)
    h = FD_STEP
    worst = 0.0
    for _ in range(samples):
        task0 = random_task(sys, rng, rates=True)
        att0 = random_attitudes(sys, rng)
        omegas = rng.normal(0.0, 0.5, (sys.n, 3))
        pos_p = quadrotor_positions_from_task(sys, *_trajectory(sys, task0, att0, omegas, h))
        pos_m = quadrotor_positions_from_task(sys, *_trajectory(sys, task0, att0, omegas, -h))
        pos0 = quadrotor_positions_from_task(sys, task0, att0)
        joints = JointState(pos0, (pos_p - pos_m) / (2 * h), att0, omegas)
        km = first_order(sys, task0, joints)
        target = km.B @ joints.joint_velocity() + km.limb_bias
        pred = km.J @ joints.joint_velocity() + km.a
        truth = task0.rates(sys.point_mass)
        scale = np.linalg.norm(target)
        worst = max(worst, _rel(np.linalg.norm(km.A @ pred - target), scale),
                    _rel(np.linalg.norm(km.A @ truth - target), scale))
    return CheckResult("J qdot + a vs finite differences", bool(worst < tol), float(worst), tol, "relative")


def check_mixer(sys: SystemDescription, samples: int = 100, seed: int = 4, tol: float = 1e-12) -> CheckResult:
    """Propeller thrusts -> (f_z, moments) -> thrusts round trip."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        quad = sys.quadrotors[rng.integers(sys.n)]
        thrusts = rng.uniform(quad.thrust_min, quad.thrust_max, 4)
        w = unmix(quad, thrusts)
        back = mix_params(quad, *w).thrusts
        worst = max(worst, float(np.abs(back - thrusts).max()) / max(1.0, float(np.abs(thrusts).max())))
    return CheckResult("mixer round trip", bool(worst < tol), float(worst), tol)


def check_reference(sys: SystemDescription) -> CheckResult:
    """The bundled reference configuration must be away from the poles and give a full-rank A."""
    if sys.reference is None:
        return CheckResult("reference configuration", True, 0.0, 0.0, "none given")
    bad = [i + 1 for i, c in enumerate(sys.reference.cables) if is_degenerate(c)]
    if bad:
        raise DegenerateConfigurationError(f"cables {bad} sit at a pole (inclination ~ 0 or pi); "
                                           "azimuth is undefined there", cables=bad)
    task = TaskState(sys.reference.payload, np.zeros(6), sys.reference.cables)
    A = task_jacobian(sys, task)
    rank = matrix_rank(A)
    if rank < min(A.shape):
        raise DegenerateConfigurationError(f"task Jacobian has rank {rank} < {min(A.shape)}", rank=rank)
    return CheckResult("reference configuration", True, float(rank), float(min(A.shape)), "full rank")


def run_checks(sys: SystemDescription, samples: int = 100, seed: int = 0) -> list[CheckResult]:
    """Run every check; raises DegenerateConfigurationError for a degenerate reference."""
    out = [check_reference(sys)]
    out.append(check_loop_closure(sys, samples, seed))
    out.append(check_cable_jacobian(sys, samples, seed + 1))
    out.append(check_task_jacobian(sys, samples, seed + 2))
    out.append(check_velocity_map(sys, samples, seed + 3))
    out.append(check_mixer(sys, samples, seed + 4))
    return out
