"""Feasibility analysis: propeller box -> thrust -> tension -> wrench zonotope.

Also holds the manipulability index and the parameter sweeps built on both.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, fixed_point, linprog
from scipy.spatial import ConvexHull

from .control import attitude_command
from .dynamics import payload_bias, payload_tensions, wrench_matrix
from .errors import ConvergenceError, InfeasibleMomentError, VactsError
from .kinematics import joint_jacobian, matrix_rank, pinv, task_jacobian
from .model import (
    CableCoord,
    Pose,
    QuadrotorParams,
    ReferenceConfiguration,
    SystemDescription,
    TaskState,
    cable_unit_vector,
    task_at_rest,
)
from .spatial import quat_from_axis_angle

N_PROPELLERS = 4
MAX_ENUMERATED_GENERATORS = 12
# HiGHS defaults allow 1e-7 bound violations; the allocation feeds exact checks
_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


# ---------------------------------------------------------------------------
# Sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IntervalBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("interval box needs lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def to_polytope(self) -> "ConvexPolytope":
        d = self.dim
        A = np.vstack([np.eye(d), -np.eye(d)])
        b = np.concatenate([self.upper, -self.lower])
        verts = np.array(list(itertools.product(*zip(self.lower, self.upper)))) if d <= 12 else None
        return ConvexPolytope(A, b, verts, int(np.sum(self.upper > self.lower)))


@dataclass(frozen=True, eq=False)
class ConvexPolytope:
    """{x : A x <= b}, rows of A unit length; optional vertex list."""

    A: np.ndarray
    b: np.ndarray
    vertices: np.ndarray | None = None
    dim: int = 0
    center: np.ndarray | None = None

    @property
    def ambient_dim(self) -> int:
        return self.A.shape[1]

    def slack(self, x) -> np.ndarray:
        return self.b - self.A @ np.asarray(x, dtype=float)

    def contains(self, x, tol: float = 1e-9) -> bool:
        return bool(np.all(self.slack(x) >= -tol))

    def contains_many(self, X, tol: float = 1e-9) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all(self.b[None, :] - X @ self.A.T >= -tol, axis=1)


@dataclass(frozen=True, eq=False)
class CapacityReport:
    gamma: float
    facet: int
    normal: np.ndarray
    task_wrench: np.ndarray
    wrench_set: ConvexPolytope
    propeller_space: IntervalBox | None = None
    thrust_space: IntervalBox | None = None
    tension_space: IntervalBox | None = None
    details: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.gamma > 0


@dataclass(frozen=True)
class ThrustLimits:
    f_max: float
    f_min: float
    allocation_max: np.ndarray
    allocation_min: np.ndarray


# ---------------------------------------------------------------------------
# Propeller space -> thrust space
# ---------------------------------------------------------------------------

def max_collective_thrust(quad: QuadrotorParams, moments, yaw_free: bool = False) -> ThrustLimits:
    """Largest and smallest collective thrust with the body moments held fixed.

    Solved as two linear programs over the propeller box. With ``yaw_free``
    the yaw moment row is dropped from the constraints.
    """
    M = quad.mixer_matrix
    rows = M[1:3] if yaw_free else M[1:]
    rhs = np.asarray(moments, dtype=float)[: rows.shape[0]]
    bounds = [(quad.thrust_min, quad.thrust_max)] * N_PROPELLERS
    hi = linprog(-np.ones(N_PROPELLERS), A_eq=rows, b_eq=rhs, bounds=bounds, method="highs", options=_LP_OPTIONS)
    lo = linprog(np.ones(N_PROPELLERS), A_eq=rows, b_eq=rhs, bounds=bounds, method="highs", options=_LP_OPTIONS)
    if hi.status != 0 or lo.status != 0:
        raise InfeasibleMomentError(
            f"moment demand {np.round(np.asarray(moments, dtype=float), 6).tolist()} N*m is outside the propeller box")
    return ThrustLimits(float(-hi.fun), float(lo.fun), hi.x, lo.x)


def collective_range(quad: QuadrotorParams, moments) -> tuple[float, float]:
    """(f_z_min, f_z_max) with all three moments fixed, in closed form.

    The three moment rows of the mixer annihilate the all-ones vector, so the
    feasible allocations form the line f_part + s*1; the box clips s.
    The returned interval is empty (min > max) when the demand is infeasible.
    """
    wrench = np.concatenate([[0.0], np.asarray(moments, dtype=float)])
    f_part = np.linalg.solve(quad.mixer_matrix, wrench)
    s_max = np.min(quad.thrust_max - f_part)
    s_min = np.max(quad.thrust_min - f_part)
    return N_PROPELLERS * float(s_min), N_PROPELLERS * float(s_max)


# ---------------------------------------------------------------------------
# Thrust space -> tension space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensionBound:
    t_min: float
    t_max: float
    thrust_bound: float
    winch_bound: float
    limited_by: str


def _static_demand(sys: SystemDescription, j: int, pulls: dict, acts: bool, yaw: float):
    """Thrust vector and body moment quadrotor j needs to hover against ``pulls``."""
    mj = sys.quad_masses[j]
    g = sys.gravity
    f = -mj * g + sum(pulls.values(), np.zeros(3))
    R, _ = attitude_command(f, yaw, return_matrix=True)
    if acts:
        return f, np.zeros(3)
    moment = -np.cross(R @ sys.quad_coms[j], mj * g)
    for i, p in pulls.items():
        moment = moment + np.cross(R @ sys.exit_points[i], p)
    return f, R.T @ moment


def _nominal_tensions(sys, task) -> np.ndarray:
    try:
        return np.clip(payload_tensions(sys, task).tensions, 0.0, None)
    except VactsError:
        return np.zeros(sys.m)


def tension_bounds(sys: SystemDescription, j: int, i: int, task: TaskState, variant: str = "vacts",
                   method: str = "bracket", nominal=None, tol: float = 1e-9) -> TensionBound:
    """Admissible tension interval of cable i (owned by quadrotor j) in quasi-static hover.

    The thrust-derived bound is the largest t for which the hover thrust
    ``-m_j g + t u`` has a collective inside the range the propellers can
    deliver while also producing the moment that t itself induces. The first
    crossing from t = 0 is located by bracketing plus Brent's method
    (``method="bracket"``) or by fixed-point iteration on the moment demand
    (``method="fixed_point"``, at most 20 iterations).

    ``variant="acts"`` drops every moment offset and the winch torque limit.
    Sibling cables of the same quadrotor are held at their nominal tension.
    """
    acts = variant == "acts"
    quad = sys.quadrotors[j]
    u = task.payload.matrix @ cable_unit_vector(task.cables[i])
    if nominal is None:
        nominal = _nominal_tensions(sys, task) if len(sys.cables_of(j)) > 1 else np.zeros(sys.m)
    siblings = {k: nominal[k] * (task.payload.matrix @ cable_unit_vector(task.cables[k]))
                for k in sys.cables_of(j) if k != i}

    def margin(t):
        pulls = dict(siblings)
        pulls[i] = t * u
        try:
            f, mom = _static_demand(sys, j, pulls, acts, quad.yaw)
        except VactsError:
            return -1.0
        lo, hi = collective_range(quad, mom)
        fz = float(np.linalg.norm(f))
        return min(hi - fz, fz - lo)

    if method == "fixed_point":
        thrust_bound = _fixed_point_bound(sys, j, i, u, siblings, acts, quad)
    else:
        thrust_bound = _bracket_bound(margin, sys, j, quad, tol)

    w = sys.winches[i]
    winch_bound = math.inf if acts else w.stall_torque * w.safety / w.drum_radius
    t_max = min(thrust_bound, winch_bound)
    return TensionBound(0.0, t_max, thrust_bound, winch_bound,
                        "thrust" if thrust_bound <= winch_bound else "winch")


def _bracket_bound(margin, sys, j, quad, tol) -> float:
    if margin(0.0) < 0:
        return 0.0
    upper = sys.quad_masses[j] * float(np.linalg.norm(sys.gravity)) + N_PROPELLERS * quad.thrust_max + 1.0
    grid = np.linspace(0.0, upper, 257)
    prev = 0.0
    for t in grid[1:]:
        if margin(t) < 0:
            return float(brentq(margin, prev, t, xtol=tol, maxiter=200))
        prev = t
    return float(upper)


def _fixed_point_bound(sys, j, i, u, siblings, acts, quad, max_iter: int = 20, tol: float = 1e-6) -> float:
    """Freeze the moment demand, solve the collective limit for t, repeat.

    The plain iteration oscillates (slope near -0.6 for the case study), so
    it is accelerated with Steffensen's method.
    """
    mj = sys.quad_masses[j]
    base = -mj * sys.gravity + sum(siblings.values(), np.zeros(3))
    bu = float(base @ u)

    def update(t):
        t = float(t)
        pulls = dict(siblings)
        pulls[i] = t * u
        _, mom = _static_demand(sys, j, pulls, acts, quad.yaw)
        lo, hi = collective_range(quad, mom)
        if hi < lo:
            raise ConvergenceError("moment demand became infeasible during iteration", last_iterate=t)
        # largest root of |base + t u| = hi
        disc = bu * bu - (base @ base - hi * hi)
        if disc < 0:
            raise ConvergenceError("collective limit unreachable", last_iterate=t)
        return max(0.0, -bu + math.sqrt(disc))

    start = update(0.0)
    if start == 0.0:
        return 0.0
    try:
        # xtol is relative in scipy; scale it so the absolute tolerance holds
        t = fixed_point(update, start, xtol=tol / max(start, 1.0), maxiter=max_iter, method="del2")
    except RuntimeError as exc:
        raise ConvergenceError(f"tension bound did not settle in {max_iter} iterations", last_iterate=start) from exc
    return float(t)


def tension_space(sys: SystemDescription, task: TaskState, variant: str = "vacts") -> IntervalBox:
    nominal = _nominal_tensions(sys, task)
    bounds = [tension_bounds(sys, w.owner, i, task, variant, nominal=nominal) for i, w in enumerate(sys.winches)]
    return IntervalBox([b.t_min for b in bounds], [b.t_max for b in bounds])


# ---------------------------------------------------------------------------
# Tension space -> wrench zonotope
# ---------------------------------------------------------------------------

def _orthonormal_span(G: np.ndarray, tol: float = 1e-10):
    if G.shape[1] == 0:
        return np.zeros((G.shape[0], 0))
    U, s, _ = np.linalg.svd(G, full_matrices=True)
    if s.size == 0 or s[0] == 0:
        return np.zeros((G.shape[0], 0))
    r = int(np.sum(s > tol * s[0]))
    return U[:, :r]


def zonotope(base, generators, enumerate_vertices: bool = True) -> ConvexPolytope:
    """{base + G s : s in [0, 1]^m} with exact facets.

    Facet normals are orthogonal complements of every rank-deficient subset of
    generators inside their affine hull; a flat zonotope also gets the pair of
    halfspaces pinning each missing direction.
    """
    base = np.asarray(base, dtype=float)
    G = np.asarray(generators, dtype=float).reshape(base.size, -1)
    d, m = G.shape
    if d > 6:
        raise ValueError(f"wrench dimension {d} > 6 unsupported")
    keep = np.linalg.norm(G, axis=0) > 1e-12
    Gk = G[:, keep]
    Q = _orthonormal_span(Gk)
    r = Q.shape[1]
    center = base + 0.5 * G.sum(axis=1)

    normals = []
    if r >= 1:
        Gr = Q.T @ Gk   # generators in span coordinates (r x m')
        if r == 1:
            normals.append(np.array([1.0]))
        else:
            for subset in itertools.combinations(range(Gr.shape[1]), r - 1):
                S = Gr[:, subset]
                if matrix_rank(S) < r - 1:
                    continue
                U, _, _ = np.linalg.svd(S, full_matrices=True)
                normals.append(U[:, -1])
        normals = [Q @ n for n in normals]
    # directions orthogonal to the span
    if r < d:
        comp = _complement(Q, d)
        normals.extend(list(comp.T))

    A_rows, b_rows = [], []
    seen = []
    for n in normals:
        n = n / np.linalg.norm(n)
        for sgn in (1.0, -1.0):
            a = sgn * n
            if any(np.allclose(a, s, atol=1e-10) for s in seen):
                continue
            seen.append(a)
            proj = a @ G
            A_rows.append(a)
            b_rows.append(float(a @ base + np.clip(proj, 0.0, None).sum()))
    A = np.array(A_rows).reshape(-1, d)
    b = np.array(b_rows)

    verts = None
    if enumerate_vertices and m <= MAX_ENUMERATED_GENERATORS:
        corners = np.array(list(itertools.product((0.0, 1.0), repeat=m)))
        pts = base[None, :] + corners @ G.T
        if r >= 2:
            local = (pts - center) @ Q
            hull = ConvexHull(local)
            verts = pts[hull.vertices]
        elif r == 1:
            proj = (pts - center) @ Q[:, 0]
            verts = pts[[int(np.argmin(proj)), int(np.argmax(proj))]]
        else:
            verts = base[None, :]
    return ConvexPolytope(A, b, verts, r, center)


def _complement(Q: np.ndarray, d: int) -> np.ndarray:
    if Q.shape[1] == 0:
        return np.eye(d)
    U, _, _ = np.linalg.svd(Q, full_matrices=True)
    return U[:, Q.shape[1]:]


def _moment_scale(sys: SystemDescription, characteristic_length: float) -> np.ndarray:
    if sys.point_mass:
        return np.ones(3)
    return np.concatenate([np.ones(3), np.full(3, 1.0 / characteristic_length)])


def wrench_zonotope(sys: SystemDescription, task: TaskState, tensions: IntervalBox,
                    characteristic_length: float = 1.0) -> ConvexPolytope:
    """Available wrench set W t for t in the tension box (moment rows divided by the length)."""
    W = wrench_matrix(sys, task) * _moment_scale(sys, characteristic_length)[:, None]
    if tensions.dim != W.shape[1]:
        raise ValueError("one tension interval per cable required")
    return zonotope(W @ tensions.lower, W * (tensions.upper - tensions.lower)[None, :])


def task_wrench(sys: SystemDescription, task: TaskState, external_wrench=None,
                characteristic_length: float = 1.0) -> np.ndarray:
    """Wrench the cables must supply for static equilibrium (weight compensation by default)."""
    return payload_bias(sys, task, external_wrench) * _moment_scale(sys, characteristic_length)


def capacity_margin(wrench_set: ConvexPolytope, task_wrench_) -> CapacityReport:
    """Smallest signed distance from the task wrench to the boundary; negative outside."""
    w = np.asarray(task_wrench_, dtype=float)
    slack = wrench_set.slack(w)
    k = int(np.argmin(slack))
    return CapacityReport(float(slack[k]), k, wrench_set.A[k].copy(), w, wrench_set)


def analyse(sys: SystemDescription, task: TaskState, variant: str = "vacts", external_wrench=None,
            characteristic_length: float = 1.0) -> CapacityReport:
    """Full chain P -> H -> T -> W_a and the capacity margin at ``task``."""
    T = tension_space(sys, task, variant)
    Wa = wrench_zonotope(sys, task, T, characteristic_length)
    rep = capacity_margin(Wa, task_wrench(sys, task, external_wrench, characteristic_length))
    P = IntervalBox(np.concatenate([np.full(N_PROPELLERS, q.thrust_min) for q in sys.quadrotors]),
                    np.concatenate([np.full(N_PROPELLERS, q.thrust_max) for q in sys.quadrotors]))
    H_lo, H_hi = [], []
    for j in range(sys.n):
        pulls = {i: T.upper[i] * (task.payload.matrix @ cable_unit_vector(task.cables[i]))
                 for i in sys.cables_of(j)}
        try:
            _, mom = _static_demand(sys, j, pulls, variant == "acts", sys.quadrotors[j].yaw)
            lo, hi = collective_range(sys.quadrotors[j], mom)
        except VactsError:
            lo, hi = 0.0, 0.0
        H_lo.append(min(lo, hi))
        H_hi.append(hi)
    H = IntervalBox(H_lo, H_hi)
    return CapacityReport(rep.gamma, rep.facet, rep.normal, rep.task_wrench, Wa, P, H, T,
                          {"variant": variant})


# ---------------------------------------------------------------------------
# Manipulability
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Manipulability:
    w_s: float
    singular_values: np.ndarray
    rank: int
    J_norm: np.ndarray

    @property
    def inverse(self) -> float:
        return math.inf if self.w_s == 0 else 1.0 / self.w_s


def manipulability(sys: SystemDescription, task: TaskState, variant: str = "vacts") -> Manipulability:
    """Product of the nonzero singular values of the length-normalised Jacobian.

    The task side keeps payload coordinates and cable angles. For ``vacts``
    the cable length rates join the quadrotor velocities in joint space; for
    ``acts`` the lengths are fixed.
    """
    A = task_jacobian(sys, task)
    pdof = sys.payload_dof
    m = sys.m
    length_cols = [pdof + 3 * i + 2 for i in range(m)]
    angle_cols = [c for c in range(A.shape[1]) if c not in length_cols]
    A_nl = A[:, angle_cols]
    A_l = A[:, length_cols]
    B = joint_jacobian(sys)
    A_nl_pinv = pinv(A_nl)
    if variant == "acts":
        J = A_nl_pinv @ B
    elif variant == "vacts":
        J = A_nl_pinv @ np.hstack([B, -A_l])
    else:
        raise ValueError(f"unknown variant {variant!r}")
    weights = np.concatenate([np.ones(pdof)] + [[c.length, c.length] for c in task.cables])
    J_norm = weights[:, None] * J
    w_s, sv, rank = singular_value_product(J_norm)
    return Manipulability(w_s, sv, rank, J_norm)


def singular_value_product(M) -> tuple[float, np.ndarray, int]:
    """(product of the nonzero singular values, all singular values, rank)."""
    M = np.asarray(M, dtype=float)
    sv = np.linalg.svd(M, compute_uv=False)
    rank = matrix_rank(M)
    if rank == 0:
        return 0.0, sv, 0
    return float(np.prod(sv[:rank])), sv, rank


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

SWEEP_AXES = ("inclination", "drum_radius", "offset", "rotz")
AXIS_UNITS = {"inclination": "deg", "drum_radius": "m", "offset": "m", "rotz": "deg"}


def reference_task(sys: SystemDescription) -> TaskState:
    if sys.reference is None:
        raise ValueError("system description carries no reference configuration")
    return task_at_rest(sys.reference.payload, sys.reference.cables)


def configure(sys: SystemDescription, inclination=None, drum_radius=None, offset=None, rotz=None,
              length=None) -> SystemDescription:
    """Copy of ``sys`` with the sweep parameters applied to every cable/winch.

    inclination and rotz are in degrees, drum_radius and offset in metres.
    The offset moves each winch frame along the direction of its current
    mount translation (straight down when that is zero); the drum radius
    also sets the radial coordinate of the exit point.
    """
    winches = []
    for w in sys.winches:
        t = np.array(w.mount.translation)
        q = w.mount.rotation
        exit_point = np.array(w.exit_point)
        rd = w.drum_radius
        if offset is not None:
            norm = np.linalg.norm(t)
            direction = t / norm if norm > 0 else np.array([0.0, 0.0, -1.0])
            t = offset * direction
        if rotz is not None:
            q = quat_from_axis_angle([0.0, 0.0, 1.0], math.radians(rotz))
        if drum_radius is not None:
            rd = drum_radius
            exit_point[1] = drum_radius
        winches.append(type(w)(w.owner, w.mass, rd, w.drum_inertia, Pose(t, q), exit_point, w.com,
                               w.stall_torque, w.max_rate, w.safety, w.inertia))
    reference = sys.reference
    if reference is not None and (inclination is not None or length is not None):
        cables = tuple(
            CableCoord(c.azimuth,
                       math.radians(inclination) if inclination is not None else c.inclination,
                       length if length is not None else c.length)
            for c in reference.cables)
        reference = ReferenceConfiguration(reference.payload, cables)
    return sys.replace(winches=tuple(winches), reference=reference)


def evaluate_cell(sys: SystemDescription, metric: str, variant: str) -> float:
    task = reference_task(sys)
    if metric == "capacity_margin":
        return analyse(sys, task, variant).gamma
    if metric == "manipulability":
        return manipulability(sys, task, variant).inverse
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class SweepTable:
    axis: str
    metric: str
    columns: list
    rows: list

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([r[c] if c == "error" else f"{r[c]:.10g}" for c in self.columns])
        return buf.getvalue()


def _thread_count(requested=None) -> int:
    cap = os.environ.get("VACTS_KIT_THREADS")
    n = requested or min(8, os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, n)


def _metric_column(metric: str, variant: str) -> str:
    return ("gamma_" if metric == "capacity_margin" else "inv_ws_") + variant


def sweep(sys: SystemDescription, axis: str, values, metric: str = "capacity_margin", variant: str = "vacts",
          fixed: dict | None = None, threads: int | None = None) -> SweepTable:
    """Evaluate ``metric`` over ``values`` of one axis. Row order follows ``values``.

    ``variant`` is "acts", "vacts" or "both". Cells that raise are recorded
    with NaN and the error text; the sweep carries on.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unsupported sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    variants = ["acts", "vacts"] if variant == "both" else [variant]
    fixed = dict(fixed or {})
    base = configure(sys, **fixed) if fixed else sys

    def cell(v):
        row = {axis: float(v)}
        errors = []
        try:
            cfg = configure(base, **{axis: float(v)})
        except Exception as exc:  # noqa: BLE001 - recorded per cell
            cfg, errors = None, [str(exc)]
        for var in variants:
            col = _metric_column(metric, var)
            if cfg is None:
                row[col] = math.nan
                continue
            try:
                row[col] = float(evaluate_cell(cfg, metric, var))
            except Exception as exc:  # noqa: BLE001
                row[col] = math.nan
                errors.append(f"{var}: {exc}")
        row["error"] = "; ".join(errors)
        return row

    values = [float(v) for v in values]
    with ThreadPoolExecutor(max_workers=_thread_count(threads)) as pool:
        rows = list(pool.map(cell, values))
    columns = [axis] + [_metric_column(metric, v) for v in variants] + ["error"]
    return SweepTable(axis, metric, columns, rows)


def monotonicity(values, tol: float = 1e-9) -> str:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    d = np.diff(v)
    if d.size == 0 or np.all(np.abs(d) <= tol):
        return "constant"
    if np.all(d <= tol):
        return "non-increasing"
    if np.all(d >= -tol):
        return "non-decreasing"
    return "non-monotone"


def trend_summary(table: SweepTable, threshold: float | None = None) -> dict:
    """argmax and monotonicity verdicts for every metric column.

    With ``threshold`` an extra verdict covers only rows at or beyond it.
    """
    x = table.column(table.axis)
    out = {}
    for col in table.columns[1:-1]:
        y = table.column(col)
        finite = np.isfinite(y)
        entry = {"monotonicity": monotonicity(y)}
        if finite.any():
            k = int(np.nanargmax(np.where(finite, y, -np.inf)))
            entry["argmax"] = float(x[k])
            entry["max"] = float(y[k])
            k = int(np.nanargmin(np.where(finite, y, np.inf)))
            entry["argmin"] = float(x[k])
            entry["min"] = float(y[k])
        if threshold is not None:
            entry["beyond"] = threshold
            entry["monotonicity_beyond"] = monotonicity(y[x >= threshold - 1e-12])
        out[col] = entry
    if len(table.columns) == 4:
        a, b = table.column(table.columns[1]), table.column(table.columns[2])
        out["acts_vs_vacts"] = {
            "acts_ge_vacts_rows": int(np.sum(a >= b - 1e-12)),
            "acts_le_vacts_rows": int(np.sum(a <= b + 1e-12)),
            "rows": len(a),
        }
    return out
