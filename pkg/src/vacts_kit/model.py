"""Domain types, cable geometry and the system-description file format.

Frames follow the usual convention: world ``F0``, payload ``Fp``, quadrotor
``Fj`` (origin at the geometric centre of the propeller plane) and winch
``Fw``. All quantities are SI once loaded.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .spatial import (
    UNIT_TOL,
    parallel_axis,
    quat_from_rpy,
    quat_normalize,
    quat_to_matrix,
)

GRAVITY = np.array([0.0, 0.0, -9.81])
KGCM_TO_NM = 0.0980665
POLE_TOL = 1e-8


def _frozen_array(value, shape=None) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Poses and cable coordinates
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pose:
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "translation", _frozen_array(self.translation, (3,)))
        q = np.array(self.rotation, dtype=float)
        if q.shape != (4,):
            raise ValueError(f"rotation must be a quaternion [w, x, y, z], got shape {q.shape}")
        if abs(np.linalg.norm(q) - 1.0) > UNIT_TOL:
            raise ValueError(f"rotation quaternion norm {np.linalg.norm(q):.12f} is not 1")
        object.__setattr__(self, "rotation", _frozen_array(q))

    @classmethod
    def from_rotation(cls, q, translation=(0.0, 0.0, 0.0)) -> "Pose":
        return cls(np.asarray(translation, dtype=float), quat_normalize(q))

    @cached_property
    def matrix(self) -> np.ndarray:
        R = quat_to_matrix(self.rotation)
        R.setflags(write=False)
        return R

    def apply(self, point) -> np.ndarray:
        return self.translation + self.matrix @ np.asarray(point, dtype=float)


@dataclass(frozen=True)
class CableCoord:
    """Azimuth/inclination/length of one cable, expressed in ``Fp``."""

    azimuth: float
    inclination: float
    length: float
    azimuth_rate: float = 0.0
    inclination_rate: float = 0.0
    length_rate: float = 0.0

    def __post_init__(self):
        if not self.length > 0.0:
            raise ValueError(f"cable length must be positive, got {self.length}")
        if not (0.0 <= self.inclination <= math.pi):
            raise ValueError(f"inclination {self.inclination} outside [0, pi]")

    @property
    def angles_rate(self) -> np.ndarray:
        return np.array([self.azimuth_rate, self.inclination_rate])


def cable_unit_vector(c: CableCoord) -> np.ndarray:
    sp, cp = math.sin(c.azimuth), math.cos(c.azimuth)
    st, ct = math.sin(c.inclination), math.cos(c.inclination)
    return np.array([cp * st, sp * st, ct])


def c_matrix(c: CableCoord) -> np.ndarray:
    """Partial derivatives of the cable unit vector w.r.t. (azimuth, inclination)."""
    sp, cp = math.sin(c.azimuth), math.cos(c.azimuth)
    st, ct = math.sin(c.inclination), math.cos(c.inclination)
    return np.array([[-sp * st, cp * ct], [cp * st, sp * ct], [0.0, -st]])


def c_matrix_dot(c: CableCoord) -> np.ndarray:
    sp, cp = math.sin(c.azimuth), math.cos(c.azimuth)
    st, ct = math.sin(c.inclination), math.cos(c.inclination)
    d_phi = np.array([[-cp * st, -sp * ct], [-sp * st, cp * ct], [0.0, 0.0]])
    d_theta = np.array([[-sp * ct, -cp * st], [cp * ct, -sp * st], [0.0, -ct]])
    return c.azimuth_rate * d_phi + c.inclination_rate * d_theta


def is_degenerate(c: CableCoord, tol: float = POLE_TOL) -> bool:
    """True at the poles, where the C matrix drops rank."""
    return abs(math.sin(c.inclination)) < tol


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def _check_spd(name: str, M: np.ndarray, allow_zero=False):
    if not np.allclose(M, M.T, atol=1e-12):
        raise ConfigError("inertia must be symmetric", field=name)
    eig = np.linalg.eigvalsh(M)
    if allow_zero and np.all(np.abs(M) == 0):
        return
    if eig.min() <= 0:
        raise ConfigError(f"inertia must be positive-definite (min eigenvalue {eig.min():.3g})", field=name)


@dataclass(frozen=True, eq=False)
class QuadrotorParams:
    mass: float
    com: np.ndarray
    inertia: np.ndarray
    arm_length: float
    kf: float
    km: float
    thrust_min: float
    thrust_max: float
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "com", _frozen_array(self.com, (3,)))
        object.__setattr__(self, "inertia", _frozen_array(self.inertia, (3, 3)))
        if self.mass <= 0:
            raise ConfigError("must be > 0", field="quadrotor.mass")
        if self.kf <= 0:
            raise ConfigError("must be > 0", field="quadrotor.kf")
        if self.km <= 0:
            raise ConfigError("must be > 0", field="quadrotor.km")
        if self.arm_length <= 0:
            raise ConfigError("must be > 0", field="quadrotor.arm_length")
        if not (0.0 <= self.thrust_min < self.thrust_max):
            raise ConfigError(
                f"need 0 <= thrust_min < thrust_max, got [{self.thrust_min}, {self.thrust_max}]",
                field="quadrotor.thrust_min",
            )
        _check_spd("quadrotor.inertia", self.inertia)

    @property
    def moment_ratio(self) -> float:
        return self.km / self.kf

    @property
    def n_propellers(self) -> int:
        return 4

    @cached_property
    def mixer_matrix(self) -> np.ndarray:
        """Maps propeller thrusts to (f_z, m_x, m_y, m_z)."""
        r, k = self.arm_length, self.moment_ratio
        M = np.array([
            [1.0, 1.0, 1.0, 1.0],
            [0.0, r, 0.0, -r],
            [-r, 0.0, r, 0.0],
            [-k, k, -k, k],
        ])
        M.setflags(write=False)
        return M


@dataclass(frozen=True, eq=False)
class WinchParams:
    owner: int
    mass: float
    drum_radius: float
    drum_inertia: float
    mount: Pose
    exit_point: np.ndarray
    com: np.ndarray
    stall_torque: float
    max_rate: float
    safety: float = 0.70
    inertia: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "exit_point", _frozen_array(self.exit_point, (3,)))
        object.__setattr__(self, "com", _frozen_array(self.com, (3,)))
        if self.inertia is None:
            # only the drum axis is identified
            object.__setattr__(self, "inertia", _frozen_array(np.diag([self.drum_inertia, 0.0, 0.0])))
        else:
            object.__setattr__(self, "inertia", _frozen_array(self.inertia, (3, 3)))
        if self.drum_radius <= 0:
            raise ConfigError("must be > 0", field="winch.drum_radius")
        if self.stall_torque <= 0:
            raise ConfigError("must be > 0", field="winch.stall_torque")
        if not (0.0 < self.safety <= 1.0):
            raise ConfigError(f"must lie in (0, 1], got {self.safety}", field="winch.safety")
        if self.mass < 0 or self.drum_inertia < 0:
            raise ConfigError("mass and drum inertia must be >= 0", field="winch.mass")
        if self.max_rate <= 0:
            raise ConfigError("must be > 0", field="winch.max_rate")

    @cached_property
    def exit_in_quad(self) -> np.ndarray:
        """Cable exit point expressed in the owner's frame."""
        p = self.mount.apply(self.exit_point)
        p.setflags(write=False)
        return p

    @cached_property
    def com_in_quad(self) -> np.ndarray:
        p = self.mount.apply(self.com)
        p.setflags(write=False)
        return p

    def max_speed(self, torque: float) -> float:
        """Linear speed-torque characteristic, zero at stall."""
        return self.max_rate * max(0.0, 1.0 - abs(torque) / self.stall_torque)


@dataclass(frozen=True, eq=False)
class PayloadParams:
    mass: float
    com: np.ndarray
    inertia: np.ndarray
    attachments: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "com", _frozen_array(self.com, (3,)))
        object.__setattr__(self, "inertia", _frozen_array(self.inertia, (3, 3)))
        att = np.array(self.attachments, dtype=float).reshape(-1, 3)
        att.setflags(write=False)
        object.__setattr__(self, "attachments", att)
        if self.mass <= 0:
            raise ConfigError("must be > 0", field="payload.mass")


@dataclass(frozen=True, eq=False)
class ReferenceConfiguration:
    """Nominal payload pose and cable coordinates stored with a system file."""

    payload: Pose
    cables: tuple[CableCoord, ...]


@dataclass(frozen=True, eq=False)
class SystemDescription:
    quadrotors: tuple[QuadrotorParams, ...]
    winches: tuple[WinchParams, ...]
    payload: PayloadParams
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    point_mass: bool = True
    reference: ReferenceConfiguration | None = None

    def __post_init__(self):
        object.__setattr__(self, "quadrotors", tuple(self.quadrotors))
        object.__setattr__(self, "winches", tuple(self.winches))
        object.__setattr__(self, "gravity", _frozen_array(self.gravity, (3,)))
        n, m = len(self.quadrotors), len(self.winches)
        if n == 0:
            raise ConfigError("at least one quadrotor is required", field="quadrotor")
        if m < n:
            raise ConfigError(f"cable count m={m} must be >= quadrotor count n={n}", field="winch")
        for i, w in enumerate(self.winches):
            if not (0 <= w.owner < n):
                raise ConfigError(f"owner index {w.owner + 1} not in 1..{n}", field=f"winch.{i + 1}.owner")
        counts = self.s
        for j, s in enumerate(counts):
            if s not in (1, 2):
                raise ConfigError(f"quadrotor {j + 1} carries {s} winches; must be 1 or 2",
                                  field=f"quadrotor.{j + 1}")
        if sum(counts) != m:
            raise ConfigError("winch counts do not sum to cable count", field="winch")
        if self.payload.attachments.shape[0] != m:
            raise ConfigError(
                f"{self.payload.attachments.shape[0]} attachment points for {m} cables",
                field="payload.attachments",
            )
        if not self.point_mass:
            _check_spd("payload.inertia", self.payload.inertia)
        if self.reference is not None and len(self.reference.cables) != m:
            raise ConfigError("reference configuration lists the wrong number of cables", field="cable")

    # counts -----------------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.quadrotors)

    @property
    def m(self) -> int:
        return len(self.winches)

    @cached_property
    def s(self) -> tuple[int, ...]:
        counts = [0] * len(self.quadrotors)
        for w in self.winches:
            if 0 <= w.owner < len(counts):
                counts[w.owner] += 1
        return tuple(counts)

    @cached_property
    def owners(self) -> np.ndarray:
        return _frozen_array([w.owner for w in self.winches]).astype(int)

    def cables_of(self, j: int) -> list[int]:
        return [i for i, w in enumerate(self.winches) if w.owner == j]

    @property
    def payload_dof(self) -> int:
        return 3 if self.point_mass else 6

    @property
    def task_dim(self) -> int:
        return self.payload_dof + 3 * self.m

    # derived quadrotor quantities ---------------------------------------------
    @cached_property
    def quad_masses(self) -> np.ndarray:
        m = [q.mass + sum(self.winches[i].mass for i in self.cables_of(j))
             for j, q in enumerate(self.quadrotors)]
        return _frozen_array(m)

    @cached_property
    def quad_coms(self) -> np.ndarray:
        """Composite COM (quadrotor body plus its winches) in each ``Fj``."""
        out = []
        for j, q in enumerate(self.quadrotors):
            acc = q.mass * q.com
            for i in self.cables_of(j):
                acc = acc + self.winches[i].mass * self.winches[i].com_in_quad
            out.append(acc / self.quad_masses[j])
        return _frozen_array(out)

    @cached_property
    def quad_inertias(self) -> np.ndarray:
        """Composite inertia about the ``Fj`` origin, by the parallel-axis theorem."""
        out = []
        for j, q in enumerate(self.quadrotors):
            I = q.inertia + parallel_axis(q.mass, q.com)
            for i in self.cables_of(j):
                w = self.winches[i]
                Rw = w.mount.matrix
                I = I + Rw @ w.inertia @ Rw.T + parallel_axis(w.mass, w.com_in_quad)
            out.append(0.5 * (I + I.T))
        return _frozen_array(out)

    @cached_property
    def quad_inertias_com(self) -> np.ndarray:
        """Composite inertia about the composite COM."""
        out = [I - parallel_axis(self.quad_masses[j], self.quad_coms[j])
               for j, I in enumerate(self.quad_inertias)]
        return _frozen_array(out)

    @cached_property
    def exit_points(self) -> np.ndarray:
        """Cable exit points in their owners' frames (m x 3)."""
        return _frozen_array([w.exit_in_quad for w in self.winches])

    def replace(self, **changes) -> "SystemDescription":
        return dataclasses.replace(self, **changes)


def systems_close(a: SystemDescription, b: SystemDescription, tol: float = 1e-12) -> bool:
    """Field-wise comparison of two descriptions."""

    def close(x, y):
        if isinstance(x, (list, tuple)):
            return len(x) == len(y) and all(close(u, v) for u, v in zip(x, y))
        if dataclasses.is_dataclass(x):
            if type(x) is not type(y):
                return False
            return all(close(getattr(x, f.name), getattr(y, f.name)) for f in dataclasses.fields(x))
        if x is None or y is None:
            return x is y
        if isinstance(x, (bool, int, str)) and not isinstance(x, float):
            return x == y
        return np.allclose(np.asarray(x, dtype=float), np.asarray(y, dtype=float), rtol=0.0, atol=tol)

    return close(a, b)


# ---------------------------------------------------------------------------
# Task and joint states
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TaskState:
    payload: Pose
    twist: np.ndarray
    cables: tuple[CableCoord, ...]

    def __post_init__(self):
        object.__setattr__(self, "twist", _frozen_array(self.twist, (6,)))
        object.__setattr__(self, "cables", tuple(self.cables))

    @property
    def velocity(self) -> np.ndarray:
        return self.twist[:3]

    @property
    def angular_velocity(self) -> np.ndarray:
        return self.twist[3:]

    def rates(self, point_mass: bool) -> np.ndarray:
        """The task velocity vector: payload twist then (phi, theta, l) rates per cable."""
        head = self.twist[:3] if point_mass else self.twist
        tail = [v for c in self.cables for v in (c.azimuth_rate, c.inclination_rate, c.length_rate)]
        return np.concatenate([head, tail])

    def cable_block(self) -> np.ndarray:
        return np.array([[c.azimuth, c.inclination, c.length] for c in self.cables])


@dataclass(frozen=True, eq=False)
class JointState:
    """Quadrotor positions/velocities of the ``Fj`` origins, attitudes and winch rates.

    ``omegas`` are world-frame angular velocities.
    """

    positions: np.ndarray
    velocities: np.ndarray
    attitudes: np.ndarray
    omegas: np.ndarray
    winch_angles: np.ndarray | None = None
    winch_rates: np.ndarray | None = None

    def __post_init__(self):
        pos = _frozen_array(self.positions)
        n = pos.shape[0]
        object.__setattr__(self, "positions", pos.reshape(n, 3))
        object.__setattr__(self, "velocities", _frozen_array(self.velocities).reshape(n, 3))
        att = np.array(self.attitudes, dtype=float).reshape(n, 4)
        if np.any(np.abs(np.linalg.norm(att, axis=1) - 1.0) > UNIT_TOL):
            raise ValueError("attitude quaternions must be unit")
        att.setflags(write=False)
        object.__setattr__(self, "attitudes", att)
        object.__setattr__(self, "omegas", _frozen_array(self.omegas).reshape(n, 3))

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @cached_property
    def rotations(self) -> np.ndarray:
        return _frozen_array([quat_to_matrix(q) for q in self.attitudes])

    def joint_velocity(self) -> np.ndarray:
        return self.velocities.reshape(-1).copy()

    @classmethod
    def at_rest(cls, positions, attitudes=None) -> "JointState":
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        n = positions.shape[0]
        if attitudes is None:
            attitudes = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
        return cls(positions, np.zeros((n, 3)), attitudes, np.zeros((n, 3)))


def task_at_rest(payload: Pose, cables: Sequence[CableCoord]) -> TaskState:
    return TaskState(payload, np.zeros(6), tuple(
        CableCoord(c.azimuth, c.inclination, c.length) for c in cables))


# ---------------------------------------------------------------------------
# System-description file (INI-style sections)
# ---------------------------------------------------------------------------

_UNITS = {
    "length": {"m": 1.0, "cm": 0.01, "mm": 0.001},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0},
    "torque": {"nm": 1.0, "kgcm": KGCM_TO_NM},
    "mass": {"kg": 1.0, "g": 0.001},
    "none": {},
}
_NUMBER_RE = re.compile(r"^\s*(.*?)\s*([A-Za-z]+)?\s*$")


def _split_unit(text: str, kind: str) -> tuple[list[float], float]:
    m = _NUMBER_RE.match(text)
    body, unit = m.group(1), m.group(2)
    scale = 1.0
    if unit is not None:
        table = _UNITS[kind]
        if unit.lower() not in table:
            raise ValueError(f"unit '{unit}' not accepted here (expected one of {sorted(table) or 'none'})")
        scale = table[unit.lower()]
    parts = [p for p in re.split(r"[,\s]+", body.strip()) if p]
    return [float(p) for p in parts], scale


class _Reader:
    """Thin wrapper that reports the file line of any bad field."""

    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        self.parser.optionxform = str.lower
        try:
            self.parser.read_string(text, source=source)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            if line is None and getattr(exc, "errors", None):
                line = exc.errors[0][0]
            raise ConfigError(f"parse error in {source}: {exc.message if hasattr(exc, 'message') else exc}",
                              line=line) from None

    def line_of(self, section: str, key: str | None = None) -> int | None:
        lines = self.text.splitlines()
        in_section = False
        for no, raw in enumerate(lines, start=1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                in_section = s[1:-1].strip() == section
                if in_section and key is None:
                    return no
                continue
            if in_section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
                return no
        return None

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_section(section) and self.parser.has_option(section, key)

    def raw(self, sections: Sequence[str], key: str, default=None):
        for sec in sections:
            if self.has(sec, key):
                return sec, self.parser.get(sec, key)
        if default is not None:
            return None, default
        raise ConfigError("missing required field", field=f"{sections[0]}.{key}", line=self.line_of(sections[0]))

    def values(self, sections, key, kind="none", count=None, default=None) -> np.ndarray:
        sec, text = self.raw(sections, key, default)
        if sec is None and not isinstance(text, str):
            return np.asarray(text, dtype=float)
        try:
            vals, scale = _split_unit(text, kind)
        except ValueError as exc:
            raise ConfigError(str(exc), field=f"{sec}.{key}", line=self.line_of(sec, key)) from None
        if count is not None and len(vals) not in (count if isinstance(count, tuple) else (count,)):
            raise ConfigError(f"expected {count} values, got {len(vals)}", field=f"{sec}.{key}",
                              line=self.line_of(sec, key))
        return np.array(vals) * scale

    def scalar(self, sections, key, kind="none", default=None) -> float:
        return float(self.values(sections, key, kind, 1, default)[0])

    def boolean(self, sections, key, default: bool) -> bool:
        for sec in sections:
            if self.has(sec, key):
                try:
                    return self.parser.getboolean(sec, key)
                except ValueError:
                    raise ConfigError("expected a boolean", field=f"{sec}.{key}",
                                      line=self.line_of(sec, key)) from None
        return default

    def indexed(self, prefix: str) -> list[int]:
        found = []
        for sec in self.parser.sections():
            m = re.fullmatch(rf"{prefix}\.(\d+)", sec)
            if m:
                found.append(int(m.group(1)))
        if self.has(prefix, "count"):
            count = int(self.scalar([prefix], "count"))
            found.extend(range(1, count + 1))
        idx = sorted(set(found))
        if idx and idx != list(range(1, len(idx) + 1)):
            raise ConfigError(f"{prefix} sections must be numbered 1..N without gaps", field=prefix)
        return idx


def _inertia(reader: _Reader, sections, key, default=None) -> np.ndarray:
    vals = reader.values(sections, key, count=(3, 6, 9), default=default)
    if vals.size == 3:
        return np.diag(vals)
    if vals.size == 6:
        xx, yy, zz, xy, xz, yz = vals
        return np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])
    return vals.reshape(3, 3)


def _guard(section: str, fn, reader: _Reader):
    try:
        return fn()
    except ConfigError as exc:
        if exc.line is None and exc.field is not None:
            key = exc.field.split(".")[-1]
            exc.line = reader.line_of(section, key) or reader.line_of(section)
            exc.args = (f"{exc.args[0]} (line {exc.line}, section [{section}])",)
        raise


def parse_system(text: str, source: str = "<string>") -> SystemDescription:
    r = _Reader(text, source)

    quads = []
    for j in r.indexed("quadrotor"):
        secs = [f"quadrotor.{j}", "quadrotor"]
        quads.append(_guard(secs[0], lambda: QuadrotorParams(
            mass=r.scalar(secs, "mass", "mass"),
            com=r.values(secs, "com", "length", 3, default=(0.0, 0.0, 0.0)),
            inertia=_inertia(r, secs, "inertia"),
            arm_length=r.scalar(secs, "arm_length", "length"),
            kf=r.scalar(secs, "kf"),
            km=r.scalar(secs, "km"),
            thrust_min=r.scalar(secs, "thrust_min", default=(0.0,)),
            thrust_max=r.scalar(secs, "thrust_max"),
            yaw=r.scalar(secs, "yaw", "angle", default=(0.0,)),
        ), r))

    winches = []
    for i in r.indexed("winch"):
        secs = [f"winch.{i}", "winch"]

        def build():
            if r.has(secs[0], "mount_quaternion") or r.has(secs[1], "mount_quaternion"):
                q = quat_normalize(r.values(secs, "mount_quaternion", count=4))
            else:
                rpy = r.values(secs, "mount_rpy", "angle", 3, default=(0.0, 0.0, 0.0))
                q = quat_from_rpy(*rpy)
            mount = Pose(r.values(secs, "mount_translation", "length", 3, default=(0.0, 0.0, 0.0)), q)
            inertia = _inertia(r, secs, "inertia") if (r.has(secs[0], "inertia") or r.has(secs[1], "inertia")) else None
            owner = r.scalar(secs, "owner")
            if owner != int(owner):
                raise ConfigError("owner must be an integer index", field="winch.owner")
            return WinchParams(
                owner=int(owner) - 1,
                mass=r.scalar(secs, "mass", "mass"),
                drum_radius=r.scalar(secs, "drum_radius", "length"),
                drum_inertia=r.scalar(secs, "drum_inertia", default=(0.0,)),
                mount=mount,
                exit_point=r.values(secs, "exit_point", "length", 3),
                com=r.values(secs, "com", "length", 3, default=(0.0, 0.0, 0.0)),
                stall_torque=r.scalar(secs, "stall_torque", "torque"),
                max_rate=r.scalar(secs, "max_rate"),
                safety=r.scalar(secs, "safety", default=(0.70,)),
                inertia=inertia,
            )

        winches.append(_guard(secs[0], build, r))

    cable_idx = r.indexed("cable")
    attachments, ref_cables = [], []
    for i in cable_idx:
        secs = [f"cable.{i}", "cable"]

        def build_cable():
            attachments.append(r.values(secs, "attachment", "length", 3, default=(0.0, 0.0, 0.0)))
            if r.has(secs[0], "inclination") or r.has(secs[1], "inclination"):
                try:
                    return CableCoord(
                        azimuth=r.scalar(secs, "azimuth", "angle", default=(0.0,)),
                        inclination=r.scalar(secs, "inclination", "angle"),
                        length=r.scalar(secs, "length", "length"),
                    )
                except ValueError as exc:
                    if isinstance(exc, ConfigError):
                        raise
                    raise ConfigError(str(exc), field="cable.inclination") from None
            return None

        ref_cables.append(_guard(secs[0], build_cable, r))

    point_mass = r.boolean(["system"], "point_mass", True)
    payload = _guard("payload", lambda: PayloadParams(
        mass=r.scalar(["payload"], "mass", "mass"),
        com=r.values(["payload"], "com", "length", 3, default=(0.0, 0.0, 0.0)),
        inertia=_inertia(r, ["payload"], "inertia", default=(0.0, 0.0, 0.0)),
        attachments=np.array(attachments).reshape(-1, 3),
    ), r)
    gravity = r.values(["system"], "gravity", count=3, default=tuple(GRAVITY))

    reference = None
    if ref_cables and all(c is not None for c in ref_cables):
        q = r.values(["payload"], "orientation", count=4, default=(1.0, 0.0, 0.0, 0.0))
        pose = _guard("payload", lambda: Pose(
            r.values(["payload"], "position", "length", 3, default=(0.0, 0.0, 0.0)), quat_normalize(q)), r)
        reference = ReferenceConfiguration(pose, tuple(ref_cables))

    return SystemDescription(
        quadrotors=tuple(quads),
        winches=tuple(winches),
        payload=payload,
        gravity=gravity,
        point_mass=point_mass,
        reference=reference,
    )


def load_system(path) -> SystemDescription:
    """Read a system-description file, validating every invariant."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_system(text, source=str(path))


def _fmt(values) -> str:
    return ", ".join(repr(float(v)) for v in np.ravel(values))


def dump_system(sys: SystemDescription) -> str:
    """Serialize to the file format, SI units, full float precision."""
    out = ["[system]", f"point_mass = {'true' if sys.point_mass else 'false'}",
           f"gravity = {_fmt(sys.gravity)}", ""]
    p = sys.payload
    out += ["[payload]", f"mass = {p.mass!r}", f"com = {_fmt(p.com)}", f"inertia = {_fmt(p.inertia)}"]
    if sys.reference is not None:
        out += [f"position = {_fmt(sys.reference.payload.translation)}",
                f"orientation = {_fmt(sys.reference.payload.rotation)}"]
    out.append("")
    for j, q in enumerate(sys.quadrotors, start=1):
        out += [f"[quadrotor.{j}]", f"mass = {q.mass!r}", f"com = {_fmt(q.com)}",
                f"inertia = {_fmt(q.inertia)}", f"arm_length = {q.arm_length!r}", f"kf = {q.kf!r}",
                f"km = {q.km!r}", f"thrust_min = {q.thrust_min!r}", f"thrust_max = {q.thrust_max!r}",
                f"yaw = {q.yaw!r} rad", ""]
    for i, w in enumerate(sys.winches, start=1):
        out += [f"[winch.{i}]", f"owner = {w.owner + 1}", f"mass = {w.mass!r}",
                f"drum_radius = {w.drum_radius!r}", f"drum_inertia = {w.drum_inertia!r}",
                f"inertia = {_fmt(w.inertia)}",
                f"mount_translation = {_fmt(w.mount.translation)}",
                f"mount_quaternion = {_fmt(w.mount.rotation)}",
                f"exit_point = {_fmt(w.exit_point)}", f"com = {_fmt(w.com)}",
                f"stall_torque = {w.stall_torque!r} Nm", f"max_rate = {w.max_rate!r}",
                f"safety = {w.safety!r}", ""]
    for i in range(sys.m):
        out += [f"[cable.{i + 1}]", f"attachment = {_fmt(p.attachments[i])}"]
        if sys.reference is not None:
            c = sys.reference.cables[i]
            out += [f"azimuth = {c.azimuth!r} rad", f"inclination = {c.inclination!r} rad",
                    f"length = {c.length!r}"]
        out.append("")
    return "\n".join(out)


def save_system(sys: SystemDescription, path) -> None:
    Path(path).write_text(dump_system(sys))


def bundled_path(name: str) -> Path:
    """Path of a config shipped with the package (``table1.sys`` etc.)."""
    return Path(__file__).resolve().parent / "data" / name


def resolve_config(name_or_path, suffix: str = ".sys") -> Path:
    """A filesystem path if it exists, else a bundled file (the suffix may be omitted)."""
    p = Path(name_or_path)
    if p.exists():
        return p
    for name in (str(name_or_path), str(name_or_path) + suffix):
        b = bundled_path(name)
        if b.exists():
            return b
    return p
