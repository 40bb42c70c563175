"""Multibody plant: rigid quadrotors, winches and a payload joined by taut cables.

The cables and the ground are unilateral constraints g(q) >= 0 whose
multipliers (tensions, normal force) are found from a small linear
complementarity problem at the start of each step. Constraint drift is
damped with Baumgarte terms and the state is advanced with fixed-step RK4.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import mix_params, unmix
from .errors import ConstraintSolveError
from .kinematics import joints_from_task
from .model import JointState, Pose, SystemDescription, TaskState
from .spatial import quat_normalize, quat_to_matrix

BAUMGARTE_POLE = 100.0
ACTIVE_TOL = 1e-6
IMPACT_SPEED = 1e-3
LCP_TOL = 1e-10


def _quats_to_matrices(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((q.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def _cross(a, b) -> np.ndarray:
    """Row-wise cross product; much cheaper than np.cross for tiny arrays."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def _quat_rates(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """0.5 q (x) [0, w] for stacked quaternions and body rates."""
    qw, qx, qy, qz = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    wx, wy, wz = w[:, 0], w[:, 1], w[:, 2]
    out = np.empty((q.shape[0], 4))
    out[:, 0] = -qx * wx - qy * wy - qz * wz
    out[:, 1] = qw * wx + qy * wz - qz * wy
    out[:, 2] = qw * wy - qx * wz + qz * wx
    out[:, 3] = qw * wz + qx * wy - qy * wx
    return 0.5 * out


@dataclass(frozen=True)
class Layout:
    n: int
    m: int
    rigid: bool

    # state vector offsets
    @property
    def quad_size(self) -> int:
        return 13

    @property
    def payload_start(self) -> int:
        return 13 * self.n

    @property
    def payload_size(self) -> int:
        return 13 if self.rigid else 6

    @property
    def winch_start(self) -> int:
        return self.payload_start + self.payload_size

    @property
    def size(self) -> int:
        return self.winch_start + 2 * self.m

    # generalized velocity layout
    @property
    def nv(self) -> int:
        return 6 * self.n + (6 if self.rigid else 3)


@dataclass(frozen=True, eq=False)
class PlantState:
    """Quadrotor COM position/velocity, attitude and body rates; payload COM
    (plus attitude and body rates when rigid); cable lengths and drum rates."""

    time: float
    y: np.ndarray
    layout: Layout
    candidates: tuple = ()

    def _quad(self, a, b):
        L = self.layout
        return self.y[: 13 * L.n].reshape(L.n, 13)[:, a:b]

    @property
    def quad_coms(self):
        return self._quad(0, 3)

    @property
    def quad_com_velocities(self):
        return self._quad(3, 6)

    @property
    def attitudes(self):
        return self._quad(6, 10)

    @property
    def body_rates(self):
        return self._quad(10, 13)

    @property
    def payload_com(self):
        s = self.layout.payload_start
        return self.y[s:s + 3]

    @property
    def payload_com_velocity(self):
        s = self.layout.payload_start
        return self.y[s + 3:s + 6]

    @property
    def payload_attitude(self):
        s = self.layout.payload_start
        return self.y[s + 6:s + 10] if self.layout.rigid else np.array([1.0, 0.0, 0.0, 0.0])

    @property
    def payload_body_rate(self):
        s = self.layout.payload_start
        return self.y[s + 10:s + 13] if self.layout.rigid else np.zeros(3)

    @property
    def lengths(self):
        s = self.layout.winch_start
        return self.y[s:s + self.layout.m]

    @property
    def drum_rates(self):
        s = self.layout.winch_start + self.layout.m
        return self.y[s:s + self.layout.m]

    def drum_angles(self, sys: SystemDescription) -> np.ndarray:
        return self.lengths / np.array([w.drum_radius for w in sys.winches])

    # views in the conventions used by kinematics -------------------------
    def payload_pose(self, sys: SystemDescription) -> Pose:
        q = self.payload_attitude
        R = quat_to_matrix(q)
        return Pose(self.payload_com - R @ sys.payload.com, quat_normalize(q))

    def payload_twist(self, sys: SystemDescription) -> np.ndarray:
        q = self.payload_attitude
        R = quat_to_matrix(q)
        w = R @ self.payload_body_rate
        v = self.payload_com_velocity - np.cross(w, R @ sys.payload.com)
        return np.concatenate([v, w])

    def joints(self, sys: SystemDescription) -> JointState:
        """Frame-origin positions/velocities, attitudes and world angular velocities."""
        q = self.attitudes
        R = _quats_to_matrices(q)
        xG = sys.quad_coms
        w_world = np.einsum("nij,nj->ni", R, self.body_rates)
        rG = np.einsum("nij,nj->ni", R, xG)
        pos = self.quad_coms - rG
        vel = self.quad_com_velocities - np.cross(w_world, rG)
        return JointState(pos, vel, q / np.linalg.norm(q, axis=1)[:, None], w_world,
                          self.drum_angles(sys), self.drum_rates.copy())


@dataclass(frozen=True, eq=False)
class PlantCommand:
    """Actuator inputs held constant over one step.

    ``thrust_vectors`` (n x 3, world) drive the ideal attitude model.
    ``collective`` and ``body_moments`` (about the frame origin, body axes)
    drive the full model. ``winch_rates`` are drum rate commands.
    """

    winch_rates: np.ndarray
    thrust_vectors: np.ndarray | None = None
    collective: np.ndarray | None = None
    body_moments: np.ndarray | None = None


@dataclass(frozen=True)
class PlantOptions:
    attitude_model: str = "full"        # "full" or "ideal" (rotation frozen, thrust vector applied directly)
    winch_time_constant: float = 0.02   # first-order drum-rate lag; 0 = rate follows command instantly
    baumgarte_pole: float = BAUMGARTE_POLE
    ground_height: float | None = None  # payload COM height of the floor, None = no floor
    cut_cables: tuple = ()              # cables forced slack
    mixer_saturation: bool = True
    winch_physical_limit: bool = True


@dataclass(frozen=True, eq=False)
class StepInfo:
    tensions: np.ndarray
    ground_force: float
    active: tuple
    actual_thrust: np.ndarray      # n x 3 world force from the propellers
    propeller_saturated: np.ndarray  # n bool
    winch_limited: np.ndarray      # m bool, physical speed limit hit


class Plant:
    def __init__(self, sys: SystemDescription, options: PlantOptions | None = None):
        self.sys = sys
        self.opt = options or PlantOptions()
        if self.opt.attitude_model not in ("full", "ideal"):
            raise ValueError(f"unknown attitude model {self.opt.attitude_model!r}")
        n, m = sys.n, sys.m
        self.layout = Layout(n, m, not sys.point_mass)
        self.masses = np.array(sys.quad_masses)
        self.I = np.array(sys.quad_inertias_com)
        self.I_inv = np.array([np.linalg.inv(I) for I in self.I])
        self.xG = np.array(sys.quad_coms)
        self.owner = np.array([w.owner for w in sys.winches], dtype=int)
        self.rho = np.array([sys.exit_points[i] - self.xG[w.owner] for i, w in enumerate(sys.winches)])
        self.sigma = np.array(sys.payload.attachments) - sys.payload.com
        self.rd = np.array([w.drum_radius for w in sys.winches])
        self.g = np.array(sys.gravity)
        self.mp = sys.payload.mass
        if self.layout.rigid:
            self.Ip = np.array(sys.payload.inertia)
            self.Ip_inv = np.linalg.inv(self.Ip)
        frozen = self.opt.attitude_model == "ideal"
        nv = self.layout.nv
        blocks = np.zeros((nv, nv))
        for j in range(n):
            blocks[6 * j:6 * j + 3, 6 * j:6 * j + 3] = np.eye(3) / self.masses[j]
            if not frozen:
                blocks[6 * j + 3:6 * j + 6, 6 * j + 3:6 * j + 6] = self.I_inv[j]
        p = 6 * n
        blocks[p:p + 3, p:p + 3] = np.eye(3) / self.mp
        if self.layout.rigid:
            blocks[p + 3:p + 6, p + 3:p + 6] = self.Ip_inv
        self.Minv = blocks
        self.has_ground = self.opt.ground_height is not None
        self.nc = m + (1 if self.has_ground else 0)

    # ------------------------------------------------------------------
    def initial_state(self, task: TaskState, attitudes=None, omegas_body=None, drum_rates=None,
                      time: float = 0.0) -> PlantState:
        """Plant state matching a task state (quadrotors placed by the loop closure)."""
        sys = self.sys
        n, m = sys.n, sys.m
        att = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)) if attitudes is None else np.asarray(attitudes, float).reshape(n, 4)
        wb = np.zeros((n, 3)) if omegas_body is None else np.asarray(omegas_body, float).reshape(n, 3)
        R = _quats_to_matrices(att)
        w_world = np.einsum("nij,nj->ni", R, wb)
        joints = joints_from_task(sys, task, att, w_world)
        rG = np.einsum("nij,nj->ni", R, self.xG)
        y = np.zeros(self.layout.size)
        Q = y[: 13 * n].reshape(n, 13)
        Q[:, 0:3] = joints.positions + rG
        Q[:, 3:6] = joints.velocities + _cross(w_world, rG)
        Q[:, 6:10] = att
        Q[:, 10:13] = wb
        s = self.layout.payload_start
        Rp = task.payload.matrix
        y[s:s + 3] = task.payload.translation + Rp @ sys.payload.com
        y[s + 3:s + 6] = task.velocity + _cross(task.angular_velocity, Rp @ sys.payload.com)
        if self.layout.rigid:
            y[s + 6:s + 10] = task.payload.rotation
            y[s + 10:s + 13] = Rp.T @ task.angular_velocity
        w0 = self.layout.winch_start
        y[w0:w0 + m] = [c.length for c in task.cables]
        if drum_rates is None:
            y[w0 + m:w0 + 2 * m] = [c.length_rate for c in task.cables] / self.rd
        else:
            y[w0 + m:w0 + 2 * m] = drum_rates
        return PlantState(time, y, self.layout, ())

    # ------------------------------------------------------------------
    def _actuation(self, y, cmd: PlantCommand):
        """Thrust force and body moment about the COM for each quadrotor.

        The force is in the world frame for the ideal model and in the body
        frame for the full model, where it turns with the body during a step.
        """
        sys, n = self.sys, self.sys.n
        if self.opt.attitude_model == "ideal":
            F = np.asarray(cmd.thrust_vectors, dtype=float).reshape(n, 3)
            return F, np.zeros((n, 3)), np.zeros(n, dtype=bool)
        fz = np.asarray(cmd.collective, dtype=float)
        mb = np.asarray(cmd.body_moments, dtype=float).reshape(n, 3)
        F = np.zeros((n, 3))
        M = np.empty((n, 3))
        sat = np.zeros(n, dtype=bool)
        for j in range(n):
            quad = sys.quadrotors[j]
            f_j, m_j = fz[j], mb[j]
            if self.opt.mixer_saturation:
                mc = mix_params(quad, f_j, *m_j)
                if mc.is_saturated:
                    sat[j] = True
                    w = unmix(quad, np.clip(mc.thrusts, quad.thrust_min, quad.thrust_max))
                    f_j, m_j = w[0], w[1:]
            F[j, 2] = f_j
            M[j] = m_j - np.cross(self.xG[j], F[j])
        return F, M, sat

    def _winch_targets(self, cmd: PlantCommand, tensions):
        rates = np.asarray(cmd.winch_rates, dtype=float).copy()
        limited = np.zeros(self.sys.m, dtype=bool)
        if self.opt.winch_physical_limit:
            for i, w in enumerate(self.sys.winches):
                lim = w.max_speed(w.drum_radius * max(tensions[i], 0.0))
                if abs(rates[i]) > lim:
                    rates[i] = np.sign(rates[i]) * lim
                    limited[i] = True
        return rates, limited

    # ------------------------------------------------------------------
    def _constraints(self, y, drum_target=None):
        """g, g_dot, the constraint Jacobian (nc x nv) and the velocity-product term of g_ddot."""
        L = self.layout
        n, m = L.n, L.m
        Q = y[: 13 * n].reshape(n, 13)
        xG, vG, q, wb = Q[:, 0:3], Q[:, 3:6], Q[:, 6:10], Q[:, 10:13]
        R = _quats_to_matrices(q)
        s = L.payload_start
        xC, vC = y[s:s + 3], y[s + 3:s + 6]
        if L.rigid:
            Rp = quat_to_matrix(y[s + 6:s + 10])
            wp = y[s + 10:s + 13]
        else:
            Rp = np.eye(3)
            wp = np.zeros(3)
        w0 = L.winch_start
        lengths = y[w0:w0 + m]
        wr = y[w0 + m:w0 + 2 * m]
        ldot = self.rd * wr
        tau = self.opt.winch_time_constant
        if drum_target is not None and tau > 0:
            lddot = self.rd * (drum_target - wr) / tau
        else:
            lddot = np.zeros(m)

        o = self.owner
        Ro = R[o]
        rho_w = np.einsum("mij,mj->mi", Ro, self.rho)
        sig_w = self.sigma @ Rp.T
        pI = xG[o] + rho_w
        pB = xC + sig_w
        d = pI - pB
        dist = np.linalg.norm(d, axis=1)
        e = d / dist[:, None]
        w_o = wb[o]
        vI = vG[o] + np.einsum("mij,mj->mi", Ro, _cross(w_o, self.rho))
        cen_I = np.einsum("mij,mj->mi", Ro, _cross(w_o, _cross(w_o, self.rho)))
        if L.rigid:
            vB = vC + (_cross(wp, self.sigma) @ Rp.T)
            cen_I = cen_I - _cross(wp, _cross(wp, self.sigma)) @ Rp.T
        else:
            vB = vC
        dv = vI - vB
        edv = np.einsum("mi,mi->m", e, dv)
        h_dist = (np.einsum("mi,mi->m", dv, dv) - edv ** 2) / dist + np.einsum("mi,mi->m", e, cen_I)

        nc = self.nc
        Jg = np.zeros((nc, L.nv))
        g = np.zeros(nc)
        gd = np.zeros(nc)
        hg = np.zeros(nc)
        e_body_q = np.einsum("mji,mj->mi", Ro, e)          # R_j^T e
        p = 6 * n
        # g = l - dist, so its Jacobian is minus that of dist
        rows = np.arange(m)
        ang = -_cross(self.rho, e_body_q)
        for k in range(3):
            Jg[rows, 6 * o + k] = -e[:, k]
            Jg[rows, 6 * o + 3 + k] = ang[:, k]
        Jg[:m, p:p + 3] = e
        if L.rigid:
            Jg[:m, p + 3:p + 6] = _cross(self.sigma, e @ Rp)
        g[:m] = lengths - dist
        gd[:m] = ldot - edv
        hg[:m] = lddot - h_dist
        if self.has_ground:
            Jg[m, p + 2] = 1.0
            g[m] = xC[2] - self.opt.ground_height
            gd[m] = vC[2]
        return g, gd, Jg, hg

    def _free_accel(self, y, F, M):
        L = self.layout
        n = L.n
        Q = y[: 13 * n].reshape(n, 13)
        wb = Q[:, 10:13]
        a = np.zeros(L.nv)
        if self.opt.attitude_model == "full":
            F = np.einsum("nij,nj->ni", _quats_to_matrices(Q[:, 6:10]), F)
        lin = F / self.masses[:, None] + self.g
        gyro = _cross(wb, np.einsum("nij,nj->ni", self.I, wb))
        ang = np.einsum("nij,nj->ni", self.I_inv, M - gyro)
        A = a[: 6 * n].reshape(n, 6)
        A[:, 0:3] = lin
        if self.opt.attitude_model == "full":
            A[:, 3:6] = ang
        p = 6 * n
        a[p:p + 3] = self.g
        if L.rigid:
            s = L.payload_start
            wp = y[s + 10:s + 13]
            a[p + 3:p + 6] = self.Ip_inv @ (-_cross(wp, self.Ip @ wp))
        return a

    def _velocity_vector(self, y):
        L = self.layout
        n = L.n
        Q = y[: 13 * n].reshape(n, 13)
        v = np.zeros(L.nv)
        V = v[: 6 * n].reshape(n, 6)
        V[:, 0:3] = Q[:, 3:6]
        V[:, 3:6] = Q[:, 10:13]
        s = L.payload_start
        v[6 * n:6 * n + 3] = y[s + 3:s + 6]
        if L.rigid:
            v[6 * n + 3:6 * n + 6] = y[s + 10:s + 13]
        return v

    def _apply_velocity(self, y, v):
        L = self.layout
        n = L.n
        y = y.copy()
        Q = y[: 13 * n].reshape(n, 13)
        V = v[: 6 * n].reshape(n, 6)
        Q[:, 3:6] = V[:, 0:3]
        if self.opt.attitude_model == "full":
            Q[:, 10:13] = V[:, 3:6]
        s = L.payload_start
        y[s + 3:s + 6] = v[6 * n:6 * n + 3]
        if L.rigid:
            y[s + 10:s + 13] = v[6 * n + 3:6 * n + 6]
        return y

    def _multipliers(self, g, gd, Jg, hg, a0, active):
        alpha = self.opt.baumgarte_pole
        idx = [k for k in range(self.nc) if active[k]]
        mu = np.zeros(self.nc)
        if not idx:
            return mu
        target = -2.0 * alpha * gd - alpha * alpha * g
        JM = Jg[idx] @ self.Minv
        K = JM @ Jg[idx].T
        b = Jg[idx] @ a0 + hg[idx] - target[idx]
        mu[idx] = np.linalg.solve(K, -b)
        return mu

    def _derivative(self, y, F, M, drum_target, active):
        L = self.layout
        n, m = L.n, L.m
        g, gd, Jg, hg = self._constraints(y, drum_target)
        a0 = self._free_accel(y, F, M)
        mu = self._multipliers(g, gd, Jg, hg, a0, active)
        acc = a0 + self.Minv @ (Jg.T @ mu)
        dy = np.zeros_like(y)
        Q = y[: 13 * n].reshape(n, 13)
        D = dy[: 13 * n].reshape(n, 13)
        A = acc[: 6 * n].reshape(n, 6)
        D[:, 0:3] = Q[:, 3:6]
        D[:, 3:6] = A[:, 0:3]
        if self.opt.attitude_model == "full":
            D[:, 6:10] = _quat_rates(Q[:, 6:10], Q[:, 10:13])
            D[:, 10:13] = A[:, 3:6]
        s = L.payload_start
        dy[s:s + 3] = y[s + 3:s + 6]
        dy[s + 3:s + 6] = acc[6 * n:6 * n + 3]
        if L.rigid:
            dy[s + 6:s + 10] = _quat_rates(y[None, s + 6:s + 10], y[None, s + 10:s + 13])[0]
            dy[s + 10:s + 13] = acc[6 * n + 3:6 * n + 6]
        w0 = L.winch_start
        wr = y[w0 + m:w0 + 2 * m]
        dy[w0:w0 + m] = self.rd * wr
        tau = self.opt.winch_time_constant
        if tau > 0:
            dy[w0 + m:w0 + 2 * m] = (drum_target - wr) / tau
        return dy, mu

    # ------------------------------------------------------------------
    @staticmethod
    def _enumerate_lcp(K, b):
        """Solve w = K mu + b, mu >= 0, w >= 0, mu.w = 0 by subset enumeration.

        Larger active sets are tried first; returns None when nothing fits.
        """
        nc = len(b)
        scale_b = LCP_TOL * max(1.0, float(np.abs(b).max()) if nc else 1.0)
        for size in range(nc, -1, -1):
            for S in itertools.combinations(range(nc), size):
                S = list(S)
                mu = np.zeros(nc)
                if S:
                    try:
                        mu[S] = np.linalg.solve(K[np.ix_(S, S)], -b[S])
                    except np.linalg.LinAlgError:
                        continue
                    if np.any(mu[S] < -LCP_TOL * max(1.0, np.abs(mu[S]).max())):
                        continue
                w = K @ mu + b
                rest = [k for k in range(nc) if k not in S]
                if rest and np.any(w[rest] < -scale_b):
                    continue
                return S, np.clip(mu, 0.0, None)
        return None

    def _solve_lcp(self, g, gd, Jg, hg, a0, candidates):
        """Active set with mu >= 0 and non-negative constraint acceleration elsewhere."""
        alpha = self.opt.baumgarte_pole
        target = -2.0 * alpha * gd - alpha * alpha * g
        cand = [k for k in range(self.nc) if candidates[k]]
        if not cand:
            return np.zeros(self.nc, dtype=bool), np.zeros(self.nc)
        Jc = Jg[cand]
        K = Jc @ self.Minv @ Jc.T
        b = Jc @ a0 + hg[cand] - target[cand]
        sol = self._enumerate_lcp(K, b)
        if sol is None:
            raise ConstraintSolveError("no complementary tension set found",
                                       cables=[c + 1 for c in cand if c < self.sys.m],
                                       residual=float(np.abs(b).max()))
        S, mu = sol
        active = np.zeros(self.nc, dtype=bool)
        full_mu = np.zeros(self.nc)
        for k, c in enumerate(cand):
            active[c] = k in S
            full_mu[c] = mu[k]
        return active, full_mu

    def _impulse(self, y, Jg, gd, closed):
        """Inelastic impact: closed constraints end with non-negative separation speed.

        All closed constraints take part, so catching one cable cannot knock
        another one slack.
        """
        idx = [k for k in range(self.nc) if closed[k]]
        if not idx or not np.any(gd[idx] < -IMPACT_SPEED):
            return y
        J = Jg[idx]
        sol = self._enumerate_lcp(J @ self.Minv @ J.T, gd[idx])
        if sol is None:
            return y
        v = self._velocity_vector(y) + self.Minv @ (J.T @ sol[1])
        return self._apply_velocity(y, v)

    def step(self, state: PlantState, cmd: PlantCommand, dt: float) -> tuple[PlantState, StepInfo]:
        if not dt > 0:
            raise ValueError("dt must be positive")
        y = state.y
        m = self.sys.m
        F, M, sat = self._actuation(y, cmd)
        # candidate constraints: closed (or penetrated) and not cut
        g0, gd0, Jg0, hg0 = self._constraints(y)
        cand = g0 <= ACTIVE_TOL
        for c in self.opt.cut_cables:
            cand[c] = False
        prev = np.array(state.candidates, dtype=bool) if len(state.candidates) == self.nc else np.zeros(self.nc, bool)
        newly = cand & ~prev
        if np.any(newly & (gd0 < -IMPACT_SPEED)):
            y = self._impulse(y, Jg0, gd0, cand)
            g0, gd0, Jg0, hg0 = self._constraints(y)
        # tensions at step start set the winch speed limits, then the active set is fixed
        w0 = self.layout.winch_start
        a0 = self._free_accel(y, F, M)
        wr = np.array(y[w0 + m:w0 + 2 * m])
        _, mu_guess = self._solve_lcp(g0, gd0, Jg0, hg0, a0, cand)
        drum_target, limited = self._winch_targets(cmd, mu_guess[:m])
        gd0 = gd0.copy()
        hg0 = hg0.copy()
        tau = self.opt.winch_time_constant
        if tau == 0:
            y = y.copy()
            y[w0 + m:w0 + 2 * m] = drum_target
            gd0[:m] += self.rd * (drum_target - wr)
        else:
            hg0[:m] += self.rd * (drum_target - wr) / tau
        active, mu = self._solve_lcp(g0, gd0, Jg0, hg0, a0, cand)

        h = dt
        k1, _ = self._derivative(y, F, M, drum_target, active)
        k2, _ = self._derivative(y + 0.5 * h * k1, F, M, drum_target, active)
        k3, _ = self._derivative(y + 0.5 * h * k2, F, M, drum_target, active)
        k4, _ = self._derivative(y + h * k3, F, M, drum_target, active)
        y_new = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        n = self.layout.n
        Q = y_new[: 13 * n].reshape(n, 13)
        Q[:, 6:10] /= np.linalg.norm(Q[:, 6:10], axis=1)[:, None]
        if self.layout.rigid:
            s = self.layout.payload_start
            y_new[s + 6:s + 10] /= np.linalg.norm(y_new[s + 6:s + 10])
        info = StepInfo(
            tensions=mu[:m].copy(),
            ground_force=float(mu[m]) if self.has_ground else 0.0,
            active=tuple(bool(a) for a in active),
            actual_thrust=self._world_thrust(state.y, F),
            propeller_saturated=sat,
            winch_limited=limited,
        )
        return PlantState(state.time + dt, y_new, self.layout, tuple(bool(c) for c in cand)), info

    def _world_thrust(self, y, F):
        if self.opt.attitude_model == "ideal":
            return F
        Q = y[: 13 * self.layout.n].reshape(self.layout.n, 13)
        return np.einsum("nij,nj->ni", _quats_to_matrices(Q[:, 6:10]), F)

    # ------------------------------------------------------------------
    def constraint_gaps(self, state: PlantState) -> np.ndarray:
        """dist - l for every cable (positive means stretched beyond the length)."""
        g, _, _, _ = self._constraints(state.y)
        return -g[: self.sys.m]

    def energy(self, state: PlantState) -> float:
        """Kinetic plus gravitational potential energy of all bodies."""
        y = state.y
        L = self.layout
        n = L.n
        Q = y[: 13 * n].reshape(n, 13)
        ke = 0.5 * np.sum(self.masses * np.sum(Q[:, 3:6] ** 2, axis=1))
        if self.opt.attitude_model == "full":
            ke += 0.5 * np.sum(np.einsum("ni,nij,nj->n", Q[:, 10:13], self.I, Q[:, 10:13]))
        pe = -np.sum(self.masses * (Q[:, 0:3] @ self.g))
        s = L.payload_start
        ke += 0.5 * self.mp * y[s + 3:s + 6] @ y[s + 3:s + 6]
        pe += -self.mp * (y[s:s + 3] @ self.g)
        if L.rigid:
            wp = y[s + 10:s + 13]
            ke += 0.5 * wp @ self.Ip @ wp
        return float(ke + pe)


def task_state_of(sys: SystemDescription, state: PlantState):
    """Tracked payload pose/twist and joint state, as a motion-capture system would see them."""
    return state.payload_pose(sys), state.payload_twist(sys), state.joints(sys)
