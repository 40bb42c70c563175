"""Closed-loop scenarios: phase lists, the controller/plant loop and result files."""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import (ControlOutput, Controller, ControllerGains, TaskReference, attitude_command, attitude_track,
                      moment_about_origin)
from .errors import ConfigError, DivergenceError
from .kinematics import task_from_tracking
from .model import CableCoord, Pose, SystemDescription, TaskState, _split_unit
from .plant import Plant, PlantCommand, PlantOptions
from .spatial import quat_exp, quat_multiply, quat_normalize
from .trajectory import evaluate, quintic

PHASE_TYPES = ("takeoff", "move", "hover", "cable", "step")
SUMMARY_SCHEMA = "vacts-kit/scenario-summary/1"


@dataclass(frozen=True)
class Phase:
    kind: str
    duration: float
    target: tuple | None = None        # payload position for move
    lengths: tuple | None = None       # cable lengths for cable
    offset: tuple | None = None        # payload reference jump for step
    measure: bool = False
    gains: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NoiseModel:
    position_std: float = 0.002
    velocity_std: float = 0.01
    attitude_std: float = 0.005
    enabled: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str
    phases: tuple
    initial_lengths: tuple
    payload_start: tuple = (0.0, 0.0, 0.0)
    ground: bool = True
    dt: float = 0.001
    control_rate: float = 50.0
    attitude_rate: float = 200.0
    attitude_model: str = "full"
    winch_time_constant: float = 0.02
    divergence_bound: float = 1.0
    tension_feedforward: bool = True
    gains: ControllerGains = field(default_factory=ControllerGains)
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0

    @property
    def duration(self) -> float:
        return sum(p.duration for p in self.phases)

    def with_noise(self, enabled: bool = True, seed: int | None = None) -> "Scenario":
        from dataclasses import replace
        return replace(self, noise=replace(self.noise, enabled=enabled),
                       seed=self.seed if seed is None else seed)

    def replace(self, **changes) -> "Scenario":
        from dataclasses import replace
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# Scenario file
# ---------------------------------------------------------------------------

def _floats(text: str, kind: str = "none") -> list[float]:
    vals, scale = _split_unit(text, kind)
    return [v * scale for v in vals]


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"parse error in {source}: {exc}", line=getattr(exc, "lineno", None)) from None

    def get(section, key, default=None, kind="none", count=None):
        if not cp.has_option(section, key):
            if default is None:
                raise ConfigError("missing required field", field=f"{section}.{key}")
            return default
        try:
            vals = _floats(cp.get(section, key), kind)
        except ValueError as exc:
            raise ConfigError(str(exc), field=f"{section}.{key}") from None
        if count is not None and len(vals) != count:
            raise ConfigError(f"expected {count} values", field=f"{section}.{key}")
        return vals

    if not cp.has_section("scenario"):
        raise ConfigError("missing [scenario] section", field="scenario")
    sc = "scenario"
    gains_kw = {}
    if cp.has_section("gains"):
        for key in ("omega_c", "zeta", "k_c", "omega_att", "zeta_att", "length_gain", "angle_gain", "payload_gain"):
            if cp.has_option("gains", key):
                gains_kw[key] = get("gains", key, count=1)[0]
    noise_kw = {}
    if cp.has_section("noise"):
        for key in ("position_std", "velocity_std", "attitude_std"):
            if cp.has_option("noise", key):
                noise_kw[key] = get("noise", key, count=1)[0]
        if cp.has_option("noise", "enabled"):
            noise_kw["enabled"] = cp.getboolean("noise", "enabled")

    phases = []
    idx = sorted(int(m.group(1)) for s in cp.sections() if (m := re.fullmatch(r"phase\.(\d+)", s)))
    if not idx:
        raise ConfigError("scenario has no [phase.N] sections", field="phase")
    for k in idx:
        sec = f"phase.{k}"
        kind = cp.get(sec, "type", fallback="").strip()
        if kind not in PHASE_TYPES:
            raise ConfigError(f"unknown phase type {kind!r}; expected one of {PHASE_TYPES}", field=f"{sec}.type")
        duration = get(sec, "duration", count=1)[0]
        if not duration > 0:
            raise ConfigError("duration must be > 0", field=f"{sec}.duration")
        target = tuple(get(sec, "target", count=3, kind="length")) if kind == "move" else None
        lengths = tuple(get(sec, "lengths", kind="length")) if kind == "cable" else None
        offset = tuple(get(sec, "offset", count=3, kind="length")) if kind == "step" else None
        measure = cp.getboolean(sec, "measure", fallback=(kind == "cable"))
        overrides = {}
        for key in ("omega_c", "zeta", "k_c", "omega_att", "zeta_att", "length_gain", "angle_gain", "payload_gain"):
            if cp.has_option(sec, key):
                overrides[key] = get(sec, key, count=1)[0]
        phases.append(Phase(kind, duration, target, lengths, offset, measure, overrides))

    model = cp.get(sc, "attitude_model", fallback="full").strip()
    if model not in ("full", "ideal"):
        raise ConfigError("attitude_model must be 'full' or 'ideal'", field="scenario.attitude_model")
    try:
        gains = ControllerGains(**gains_kw)
    except ValueError as exc:
        raise ConfigError(str(exc), field="gains") from None
    return Scenario(
        name=cp.get(sc, "name", fallback=Path(source).stem),
        phases=tuple(phases),
        initial_lengths=tuple(get(sc, "initial_lengths", kind="length")),
        payload_start=tuple(get(sc, "payload_start", (0.0, 0.0, 0.0), "length", 3)),
        ground=cp.getboolean(sc, "ground", fallback=True),
        dt=get(sc, "dt", (0.001,), count=1)[0],
        control_rate=get(sc, "control_rate", (50.0,), count=1)[0],
        attitude_rate=get(sc, "attitude_rate", (200.0,), count=1)[0],
        attitude_model=model,
        winch_time_constant=get(sc, "winch_time_constant", (0.02,), count=1)[0],
        divergence_bound=get(sc, "divergence_bound", (1.0,), "length", 1)[0],
        tension_feedforward=cp.getboolean(sc, "tension_feedforward", fallback=True),
        gains=gains,
        noise=NoiseModel(**noise_kw),
        seed=int(get(sc, "seed", (0,), count=1)[0]),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text, str(path))


# ---------------------------------------------------------------------------
# Reference generation
# ---------------------------------------------------------------------------

class _ReferencePlan:
    """Piecewise reference: payload position and cable lengths, angles held."""

    def __init__(self, sys: SystemDescription, sc: Scenario, angles: np.ndarray):
        self.sys = sys
        self.angles = angles
        self.segments = []
        t = 0.0
        pos = np.array(sc.payload_start, dtype=float)
        lengths = np.array(sc.initial_lengths, dtype=float)
        for ph in sc.phases:
            seg = {"phase": ph, "t0": t, "pos0": pos.copy(), "len0": lengths.copy(),
                   "pos1": pos.copy(), "len1": lengths.copy()}
            if ph.kind == "move":
                seg["pos1"] = np.array(ph.target, dtype=float)
            elif ph.kind == "step":
                seg["pos0"] = pos + np.array(ph.offset)
                seg["pos1"] = seg["pos0"].copy()
            elif ph.kind == "cable":
                L = np.array(ph.lengths, dtype=float)
                seg["len1"] = np.full(sys.m, L[0]) if L.size == 1 else L
                if seg["len1"].size != sys.m:
                    raise ConfigError(f"cable phase lists {L.size} lengths for {sys.m} cables", field="phase.lengths")
            seg["pos_q"] = [quintic(a, b, ph.duration) for a, b in zip(seg["pos0"], seg["pos1"])]
            seg["len_q"] = [quintic(a, b, ph.duration) for a, b in zip(seg["len0"], seg["len1"])]
            self.segments.append(seg)
            t += ph.duration
            pos, lengths = seg["pos1"], seg["len1"]
        self.end = t

    def index(self, t: float) -> int:
        for k, seg in enumerate(self.segments):
            if t < seg["t0"] + seg["phase"].duration - 1e-12:
                return k
        return len(self.segments) - 1

    def at(self, t: float) -> tuple[TaskReference, int, float]:
        k = self.index(t)
        seg = self.segments[k]
        tau = t - seg["t0"]
        P = np.array([evaluate(q, tau) for q in seg["pos_q"]])
        Lq = np.array([evaluate(q, tau) for q in seg["len_q"]])
        m = self.sys.m
        cables = np.column_stack([self.angles, Lq[:, 0]])
        rates = np.zeros((m, 3))
        rates[:, 2] = Lq[:, 1]
        accels = np.zeros((m, 3))
        accels[:, 2] = Lq[:, 2]
        ref = TaskReference(P[:, 0], cables, P[:, 1], P[:, 2], cable_rates=rates, cable_accels=accels)
        share = 1.0
        if seg["phase"].kind == "takeoff":
            share = min(1.0, tau / seg["phase"].duration)
        return ref, k, share


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class ScenarioResult:
    columns: list
    rows: list
    summary: dict
    final_state: object = None

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True) + "\n"

    def error_table(self) -> str:
        s = self.summary["errors"]
        lines = ["quantity        mean [cm]   std [cm]"]
        for ax in ("x", "y", "z"):
            e = s["payload"][ax]
            lines.append(f"payload {ax:<7} {100 * e['mean']:>9.3f}  {100 * e['std']:>9.3f}")
        for i, e in enumerate(s["cables"], start=1):
            lines.append(f"cable {i:<9} {100 * e['mean']:>9.3f}  {100 * e['std']:>9.3f}")
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def _stats(x: np.ndarray) -> dict:
    if x.size == 0:
        return {"mean": 0.0, "std": 0.0, "max_abs": 0.0}
    return {"mean": float(np.mean(x)), "std": float(np.std(x)), "max_abs": float(np.max(np.abs(x)))}


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def _perturb(rng, pose: Pose, twist, joints, noise: NoiseModel):
    from .model import JointState

    p = pose.translation + rng.normal(0.0, noise.position_std, 3)
    q = quat_normalize(quat_multiply(quat_exp(rng.normal(0.0, noise.attitude_std, 3)), pose.rotation)) \
        if np.any(twist[3:]) or not np.allclose(pose.rotation, [1, 0, 0, 0]) else pose.rotation
    tw = np.array(twist, dtype=float)
    tw[:3] += rng.normal(0.0, noise.velocity_std, 3)
    n = joints.n
    pos = joints.positions + rng.normal(0.0, noise.position_std, (n, 3))
    vel = joints.velocities + rng.normal(0.0, noise.velocity_std, (n, 3))
    att = np.array([quat_normalize(quat_multiply(quat_exp(rng.normal(0.0, noise.attitude_std, 3)), a))
                    for a in joints.attitudes])
    return Pose(p, q), tw, JointState(pos, vel, att, joints.omegas, joints.winch_angles, joints.winch_rates)


def initial_task(sys: SystemDescription, sc: Scenario) -> tuple[TaskState, np.ndarray]:
    if sys.reference is None:
        raise ConfigError("system description needs a reference configuration for cable angles", field="cable")
    if len(sc.initial_lengths) not in (1, sys.m):
        raise ConfigError(f"initial_lengths needs 1 or {sys.m} values", field="scenario.initial_lengths")
    lengths = np.broadcast_to(np.array(sc.initial_lengths, dtype=float), (sys.m,))
    angles = np.array([[c.azimuth, c.inclination] for c in sys.reference.cables])
    cables = tuple(CableCoord(a[0], a[1], float(l)) for a, l in zip(angles, lengths))
    return TaskState(Pose(np.array(sc.payload_start, dtype=float)), np.zeros(6), cables), angles


def run_scenario(sys: SystemDescription, sc: Scenario, progress=None) -> ScenarioResult:
    """Run the phase list with the controller in the loop.

    Raises DivergenceError (carrying the partial result) when the payload
    strays further than ``divergence_bound`` from its reference.
    """
    if len(sc.initial_lengths) == 1:
        sc = sc.replace(initial_lengths=tuple([sc.initial_lengths[0]] * sys.m))
    task0, angles = initial_task(sys, sc)
    plan = _ReferencePlan(sys, sc, angles)
    opts = PlantOptions(attitude_model=sc.attitude_model, winch_time_constant=sc.winch_time_constant,
                        ground_height=(sys.payload.com[2] + sc.payload_start[2]) if sc.ground else None)
    plant = Plant(sys, opts)
    yaw = [q.yaw for q in sys.quadrotors]
    att0 = np.array([attitude_command(-sys.quad_masses[j] * sys.gravity, yaw[j])[0] for j in range(sys.n)])
    state = plant.initial_state(task0, attitudes=att0)
    # start each quadrotor at the attitude its initial thrust command asks for
    ref0, _, share0 = plan.at(0.0)
    start_ctl = Controller(sys, sc.gains)
    for _ in range(3):
        joints0 = state.joints(sys)
        out0 = start_ctl.compute(0.0, task_from_tracking(sys, state.payload_pose(sys), joints0,
                                                         state.payload_twist(sys)),
                                 joints0, ref0, weight_share=share0)
        state = plant.initial_state(task0, attitudes=out0.attitudes)

    dt = sc.dt
    ctrl_div = max(1, int(round(1.0 / (sc.control_rate * dt))))
    att_div = max(1, int(round(1.0 / (sc.attitude_rate * dt))))
    n_steps = int(round(sc.duration / dt))
    rng = np.random.default_rng(sc.seed)
    controllers = {}

    n, m = sys.n, sys.m
    columns = (["time", "phase"]
               + [f"payload_{a}" for a in "xyz"] + [f"payload_ref_{a}" for a in "xyz"]
               + [f"length_{i}" for i in range(1, m + 1)] + [f"length_ref_{i}" for i in range(1, m + 1)]
               + [f"tension_{i}" for i in range(1, m + 1)]
               + [f"thrust_{j}_{a}" for j in range(1, n + 1) for a in "xyz"]
               + [f"winch_rate_{i}" for i in range(1, m + 1)] + [f"winch_limit_{i}" for i in range(1, m + 1)]
               + [f"winch_saturated_{i}" for i in range(1, m + 1)]
               + [f"quad_{j}_{a}" for j in range(1, n + 1) for a in "xyz"]
               + [f"attitude_error_{j}" for j in range(1, n + 1)]
               + ["max_cable_gap", "ground_force"])
    rows = []
    out: ControlOutput | None = None
    ref = None
    cmd = None
    info = None
    moments = np.zeros((n, 3))
    collective = np.zeros(n)
    sat_events = np.zeros(m, dtype=int)
    slack_switches = 0
    prev_active = None
    tension_sum = np.zeros(m)
    ground_sum = 0.0
    n_sum = 0
    max_gap = 0.0
    measured = {"t": [], "payload": [], "cables": [], "drift": [], "attitude": []}
    prop_sat = 0
    resize_anchor = None

    def build_result(final):
        summary = _summarize(sc, measured, sat_events, slack_switches, max_gap, prop_sat, len(rows), final)
        return ScenarioResult(columns, rows, summary, state)

    for k in range(n_steps):
        t = k * dt
        if k % ctrl_div == 0:
            ref, ph_idx, share = plan.at(t)
            phase = plan.segments[ph_idx]["phase"]
            pose, twist, joints = state.payload_pose(sys), state.payload_twist(sys), state.joints(sys)
            true_pos = pose.translation.copy()
            if sc.noise.enabled:
                pose, twist, joints = _perturb(rng, pose, twist, joints, sc.noise)
            task = task_from_tracking(sys, pose, joints, twist)
            key = tuple(sorted(phase.gains.items()))
            if key not in controllers:
                controllers[key] = Controller(sys, sc.gains.with_(**phase.gains) if phase.gains else sc.gains)
            out = controllers[key].compute(t, task, joints, ref, weight_share=share)
            err = true_pos - ref.position
            if np.linalg.norm(err) > sc.divergence_bound:
                partial = build_result(False)
                raise DivergenceError(
                    f"payload error {np.linalg.norm(err):.3f} m exceeded {sc.divergence_bound} m at t={t:.3f} s",
                    partial=partial)
            sat_events += out.winch_saturated.astype(int)
            if phase.measure:
                if resize_anchor is None:
                    resize_anchor = true_pos.copy()
                measured["t"].append(t)
                measured["payload"].append(err)
                measured["cables"].append(state.lengths - ref.cables[:, 2])
                measured["drift"].append(np.linalg.norm(true_pos - resize_anchor))
            att_err = attitude_error_angles(state.attitudes, out.attitudes)
            if phase.measure:
                measured["attitude"].append(att_err)
            gaps = plant.constraint_gaps(state)
            # tensions and ground force are averaged over the previous control interval
            t_log = tension_sum / n_sum if n_sum else out.tensions
            g_log = ground_sum / n_sum if n_sum else 0.0
            tension_sum[:] = 0.0
            ground_sum, n_sum = 0.0, 0
            row = ([t, ph_idx + 1] + list(true_pos) + list(ref.position) + list(state.lengths)
                   + list(ref.cables[:, 2]) + list(t_log)
                   + list(out.thrust.reshape(-1)) + list(out.winch_rates) + list(out.winch_limits)
                   + [bool(s) for s in out.winch_saturated] + list(joints_true_positions(state, sys))
                   + list(att_err)
                   + [float(np.max(gaps)), g_log])
            rows.append(row)
            if progress is not None:
                progress(t)
        if sc.attitude_model == "full":
            if k % att_div == 0:
                R = _rotations(state.attitudes)
                for j in range(n):
                    I_G = sys.quad_inertias_com[j]
                    ff = out.feedforward_moments[j] if sc.tension_feedforward else None
                    collective[j] = max(0.0, float(out.thrust[j] @ R[j][:, 2]))
                    m_com = attitude_track(I_G, state.attitudes[j], state.body_rates[j], out.attitudes[j],
                                           sc.gains, feedforward=ff)
                    moments[j] = moment_about_origin(sys.quad_coms[j], m_com, collective[j])
            cmd = PlantCommand(out.winch_rates, collective=collective.copy(), body_moments=moments.copy())
        else:
            cmd = PlantCommand(out.winch_rates, thrust_vectors=out.thrust)
        state, info = plant.step(state, cmd, dt)
        tension_sum += info.tensions
        ground_sum += info.ground_force
        n_sum += 1
        if info.propeller_saturated.any():
            prop_sat += 1
        cab_active = info.active[:m]
        if prev_active is not None and cab_active != prev_active:
            slack_switches += sum(a != b for a, b in zip(cab_active, prev_active))
        prev_active = cab_active
        if all(cab_active):
            max_gap = max(max_gap, float(np.max(np.abs(plant.constraint_gaps(state))))) if k % ctrl_div == 0 else max_gap

    return build_result(True)


def attitude_error_angles(q, q_des) -> np.ndarray:
    """Rotation angle [rad] between each actual and commanded attitude."""
    d = np.abs(np.sum(np.asarray(q) * np.asarray(q_des), axis=1))
    return 2.0 * np.arccos(np.clip(d, 0.0, 1.0))


def joints_true_positions(state, sys) -> np.ndarray:
    return state.joints(sys).positions.reshape(-1)


def _rotations(q):
    from .plant import _quats_to_matrices
    return _quats_to_matrices(np.asarray(q))


def _summarize(sc, measured, sat_events, slack_switches, max_gap, prop_sat, samples, completed) -> dict:
    P = np.array(measured["payload"]).reshape(-1, 3)
    C = np.array(measured["cables"])
    m = C.shape[1] if C.ndim == 2 and C.size else len(sc.initial_lengths)
    C = C.reshape(-1, m)
    A = np.array(measured["attitude"])
    return {
        "schema": SUMMARY_SCHEMA,
        "scenario": sc.name,
        "completed": bool(completed),
        "samples": samples,
        "measured_samples": int(P.shape[0]),
        "noise": bool(sc.noise.enabled),
        "seed": int(sc.seed),
        "errors": {
            "payload": {ax: _stats(P[:, k]) for k, ax in enumerate("xyz")},
            "cables": [_stats(C[:, i]) for i in range(m)],
        },
        "attitude_error_rms": float(np.sqrt(np.mean(A ** 2))) if A.size else 0.0,
        "payload_drift_max": float(max(measured["drift"])) if measured["drift"] else 0.0,
        "winch_saturation_samples": [int(v) for v in sat_events],
        "winch_saturated": bool(np.any(sat_events > 0)),
        "propeller_saturation_steps": int(prop_sat),
        "slack_switches": int(slack_switches),
        "max_constraint_gap": float(max_gap),
    }


def write_result(result: ScenarioResult, out_dir) -> dict:
    """Write timeseries.csv and summary.json; returns {name: path}."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"timeseries": out_dir / "timeseries.csv", "summary": out_dir / "summary.json"}
    paths["timeseries"].write_text(result.to_csv())
    paths["summary"].write_text(result.summary_json())
    return paths
