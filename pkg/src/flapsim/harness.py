"""Closed-loop scenario runner: sensor model, controller, physics, metrics.

A scenario couples an initial state, a setpoint schedule, optional
world-frame force pulses, and a sensor-noise model. The control loop runs
at a fixed rate with zero-order-hold commands; the physics integrates with
fixed-step RK4 using an integer number of substeps per control tick, so
the physics step always divides the control period exactly.

Timing convention: the state is sampled (and logged) at the start of each
tick; the command computed from that sample is held through the tick.
Runs are deterministic for a fixed seed; the log records one row per tick.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .controller import (
    CircleSchedule,
    ConstantSchedule,
    CsvSchedule,
    Setpoint,
    assemble_ctrl_state,
    control_step,
)
from .dynamics import MAX_DT, SimState, _rk4_packed
from .errors import ConfigError, DivergenceError, SchemaError
from .ioutil import atomic_write_text, fmt
from .kinematics import EulerAngles321, euler_to_quat, euler_to_rotmat, quat_from_rotvec, quat_multiply
from .vehicle import VehicleParams

__all__ = [
    "NoiseConfig",
    "DisturbancePulse",
    "disturbance_pulse",
    "Scenario",
    "scenario_from_dict",
    "load_scenario",
    "RunLog",
    "RUNLOG_COLUMNS",
    "run_scenario",
    "RunMetrics",
    "metrics",
]

POSITION_GUARD = 10.0       # [m] abort radius
RATE_GUARD = 1e4            # [rad/s] abort body rate


@dataclass(frozen=True)
class NoiseConfig:
    """Gaussian sensor noise, i.i.d. per axis per sample. Off by default."""

    enabled: bool = False
    pos_sigma: float = 0.5e-3            # [m]
    att_sigma: float = math.radians(0.2)  # [rad]

    def __post_init__(self) -> None:
        if self.pos_sigma < 0.0 or self.att_sigma < 0.0:
            raise ConfigError("noise sigmas must be non-negative")


@dataclass(frozen=True)
class DisturbancePulse:
    """Constant world-frame force applied on [t_start, t_end)."""

    t_start: float
    t_end: float
    force_w: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.force_w, dtype=float).reshape(3)
        if not np.all(np.isfinite(f)):
            raise ConfigError("pulse force must be finite")
        if not self.t_end > self.t_start:
            raise ConfigError("pulse needs t_end > t_start")
        object.__setattr__(self, "force_w", f)

    def active(self, t: float) -> bool:
        return self.t_start <= t < self.t_end


def disturbance_pulse(
    p: VehicleParams,
    magnitude_g: float,
    duration: float,
    direction_w,
    t_start: float = 0.0,
) -> DisturbancePulse:
    """Force pulse scaled in multiples of the vehicle's weight.

    A non-unit direction is normalized (with a warning); zero duration or
    magnitude is rejected.
    """
    if not magnitude_g > 0.0:
        raise ValueError("magnitude_g must be positive")
    if not duration > 0.0:
        raise ValueError("pulse duration must be positive")
    d = np.asarray(direction_w, dtype=float).reshape(3)
    n = float(np.linalg.norm(d))
    if n == 0.0:
        raise ValueError("direction must be a nonzero vector")
    if abs(n - 1.0) > 1e-9:
        warnings.warn("disturbance direction was not unit length; normalizing")
    d = d / n
    force = magnitude_g * p.g * p.total_mass * d
    return DisturbancePulse(t_start, t_start + duration, force)


@dataclass(frozen=True)
class Scenario:
    """One closed-loop experiment definition."""

    name: str
    duration: float
    initial: SimState
    schedule: object                      # callable t -> Setpoint
    disturbances: tuple = ()
    noise: NoiseConfig = NoiseConfig()
    control_rate: float = 240.0
    physics_substeps: int = 42
    seed: int = 0
    use_truth_velocity: bool = False
    legacy_coriolis: bool = False

    def __post_init__(self) -> None:
        if not self.duration > 0.0:
            raise ConfigError("duration must be positive")
        if not self.control_rate > 0.0:
            raise ConfigError("control_rate must be positive")
        if int(self.physics_substeps) != self.physics_substeps or self.physics_substeps < 1:
            raise ConfigError("physics_substeps must be a positive integer")
        object.__setattr__(self, "physics_substeps", int(self.physics_substeps))
        if not callable(self.schedule):
            raise ConfigError("schedule must be callable t -> Setpoint")
        object.__setattr__(self, "disturbances", tuple(self.disturbances))
        for d in self.disturbances:
            if not isinstance(d, DisturbancePulse):
                raise ConfigError("disturbances must be DisturbancePulse entries")
        if self.dt > MAX_DT:
            raise ConfigError(
                f"physics step {self.dt:.3e} s exceeds the integrator limit {MAX_DT}"
            )

    @property
    def control_period(self) -> float:
        return 1.0 / self.control_rate

    @property
    def dt(self) -> float:
        return self.control_period / self.physics_substeps


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------


def _check_keys(section: dict, allowed, where: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")


def _initial_from_dict(cfg: dict) -> SimState:
    _check_keys(cfg, {"pos", "vel_b", "euler", "euler_deg", "omega_b"}, "initial")
    if "euler" in cfg and "euler_deg" in cfg:
        raise SchemaError("initial: give euler or euler_deg, not both")
    eul = cfg.get("euler")
    if eul is None:
        eul = [math.radians(float(v)) for v in cfg.get("euler_deg", (0.0, 0.0, 0.0))]
    return SimState(
        np.asarray(cfg.get("pos", (0.0, 0.0, 0.0)), dtype=float),
        np.asarray(cfg.get("vel_b", (0.0, 0.0, 0.0)), dtype=float),
        EulerAngles321(*(float(v) for v in eul)),
        np.asarray(cfg.get("omega_b", (0.0, 0.0, 0.0)), dtype=float),
    )


def _schedule_from_dict(cfg: dict, base_dir) -> object:
    kind = cfg.get("kind")
    if kind == "constant":
        _check_keys(cfg, {"kind", "pos", "vel", "yaw"}, "setpoint")
        return ConstantSchedule(
            Setpoint(
                np.asarray(cfg.get("pos", (0.0, 0.0, 0.0)), dtype=float),
                np.asarray(cfg.get("vel", (0.0, 0.0, 0.0)), dtype=float),
                float(cfg.get("yaw", 0.0)),
            )
        )
    if kind == "circle":
        _check_keys(cfg, {"kind", "radius", "speed", "center"}, "setpoint")
        try:
            return CircleSchedule(
                float(cfg["radius"]),
                float(cfg["speed"]),
                np.asarray(cfg.get("center", (0.0, 0.0, 0.0)), dtype=float),
            )
        except KeyError as exc:
            raise SchemaError(f"setpoint: circle needs {exc.args[0]}") from None
    if kind == "schedule":
        _check_keys(cfg, {"kind", "path"}, "setpoint")
        if "path" not in cfg:
            raise SchemaError("setpoint: schedule needs a path")
        path = cfg["path"]
        if base_dir is not None:
            import os

            path = os.path.join(os.fspath(base_dir), os.fspath(path)) if not os.path.isabs(path) else path
        return CsvSchedule.from_csv(path)
    raise SchemaError(f"setpoint: unknown kind {kind!r} (constant | circle | schedule)")


def _noise_from_dict(cfg: dict) -> NoiseConfig:
    _check_keys(cfg, {"enabled", "pos_sigma", "att_sigma", "att_sigma_deg"}, "noise")
    if "att_sigma" in cfg and "att_sigma_deg" in cfg:
        raise SchemaError("noise: give att_sigma or att_sigma_deg, not both")
    att = cfg.get("att_sigma")
    if att is None:
        att = math.radians(float(cfg.get("att_sigma_deg", 0.2)))
    return NoiseConfig(
        enabled=bool(cfg.get("enabled", False)),
        pos_sigma=float(cfg.get("pos_sigma", 0.5e-3)),
        att_sigma=float(att),
    )


def _pulses_from_list(entries, p: VehicleParams) -> tuple:
    pulses = []
    for i, ent in enumerate(entries):
        where = f"disturbances[{i}]"
        if not isinstance(ent, dict):
            raise SchemaError(f"{where}: expected a mapping")
        _check_keys(ent, {"t_start", "duration", "magnitude_g", "direction", "force"}, where)
        if "t_start" not in ent or "duration" not in ent:
            raise SchemaError(f"{where}: needs t_start and duration")
        t0 = float(ent["t_start"])
        dur = float(ent["duration"])
        if "force" in ent:
            if "magnitude_g" in ent or "direction" in ent:
                raise SchemaError(f"{where}: give force or magnitude_g+direction, not both")
            if not dur > 0.0:
                raise SchemaError(f"{where}: duration must be positive")
            pulses.append(DisturbancePulse(t0, t0 + dur, np.asarray(ent["force"], dtype=float)))
        else:
            if "magnitude_g" not in ent or "direction" not in ent:
                raise SchemaError(f"{where}: needs magnitude_g and direction (or force)")
            try:
                pulses.append(
                    disturbance_pulse(p, float(ent["magnitude_g"]), dur, ent["direction"], t0)
                )
            except ValueError as exc:
                raise SchemaError(f"{where}: {exc}") from None
    return tuple(pulses)


_SCENARIO_KEYS = {
    "name", "duration", "seed", "control_rate", "physics_substeps", "dt",
    "use_truth_velocity", "legacy_coriolis", "initial", "setpoint", "noise",
    "disturbances",
}


def scenario_from_dict(cfg: dict, p: VehicleParams | None = None, base_dir=None) -> Scenario:
    """Build a Scenario from a parsed configuration mapping.

    ``p`` is needed only to scale g-unit disturbances (defaults to the
    built-in profile). Unknown keys anywhere are rejected.
    """
    from .vehicle import default_robofly_params

    if p is None:
        p = default_robofly_params()
    if not isinstance(cfg, dict):
        raise SchemaError("scenario: top level must be a mapping")
    _check_keys(cfg, _SCENARIO_KEYS, "scenario")
    for req in ("name", "duration", "setpoint"):
        if req not in cfg:
            raise SchemaError(f"scenario: missing required key '{req}'")

    control_rate = float(cfg.get("control_rate", 240.0))
    if "physics_substeps" in cfg and "dt" in cfg:
        raise SchemaError("scenario: give physics_substeps or dt, not both")
    if "dt" in cfg:
        dt = float(cfg["dt"])
        if not dt > 0.0:
            raise SchemaError("scenario: dt must be positive")
        ratio = 1.0 / (control_rate * dt)
        substeps = round(ratio)
        if substeps < 1 or abs(ratio - substeps) > 1e-9 * max(1.0, ratio):
            raise SchemaError(
                f"scenario: dt={dt:g} does not divide the control period 1/{control_rate:g}"
            )
    else:
        substeps = int(cfg.get("physics_substeps", 42))

    initial_cfg = cfg.get("initial", {})
    if not isinstance(initial_cfg, dict):
        raise SchemaError("initial: expected a mapping")
    noise_cfg = cfg.get("noise", {})
    if not isinstance(noise_cfg, dict):
        raise SchemaError("noise: expected a mapping")
    setpoint_cfg = cfg.get("setpoint")
    if not isinstance(setpoint_cfg, dict):
        raise SchemaError("setpoint: expected a mapping")
    dist_cfg = cfg.get("disturbances", [])
    if not isinstance(dist_cfg, list):
        raise SchemaError("disturbances: expected a list")

    return Scenario(
        name=str(cfg["name"]),
        duration=float(cfg["duration"]),
        initial=_initial_from_dict(initial_cfg),
        schedule=_schedule_from_dict(setpoint_cfg, base_dir),
        disturbances=_pulses_from_list(dist_cfg, p),
        noise=_noise_from_dict(noise_cfg),
        control_rate=control_rate,
        physics_substeps=substeps,
        seed=int(cfg.get("seed", 0)),
        use_truth_velocity=bool(cfg.get("use_truth_velocity", False)),
        legacy_coriolis=bool(cfg.get("legacy_coriolis", False)),
    )


def load_scenario(path, p: VehicleParams | None = None) -> Scenario:
    """Parse a scenario file (YAML mapping; see scenario_from_dict)."""
    import os

    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if not isinstance(cfg, dict):
        raise SchemaError(f"{path}: scenario file must contain a mapping")
    try:
        return scenario_from_dict(cfg, p, base_dir=os.path.dirname(os.path.abspath(path)))
    except ConfigError as exc:
        raise type(exc)(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# run log
# ---------------------------------------------------------------------------

RUNLOG_COLUMNS = (
    "t",
    "x", "y", "z", "roll", "pitch", "yaw",
    "u", "v", "w", "p", "q", "r",
    "sig_dx", "sig_dy", "sig_dz", "sig_u", "sig_v", "sig_w",
    "sig_phi", "sig_theta", "sig_p", "sig_q",
    "sp_x", "sp_y", "sp_z", "sp_vx", "sp_vy", "sp_vz",
    "cmd_A", "cmd_dA", "cmd_Vo",
    "thrust", "tau_r", "tau_p",
    "saturated",
)


@dataclass(frozen=True)
class RunLog:
    """Per-tick record of a scenario run (row k sampled at tick start)."""

    t: np.ndarray             # (n,)
    pos_w: np.ndarray         # (n, 3) truth
    euler: np.ndarray         # (n, 3) truth roll/pitch/yaw
    vel_b: np.ndarray         # (n, 3) truth body velocity
    omega_b: np.ndarray       # (n, 3) truth body rates
    sigma: np.ndarray         # (n, 10) controller estimate
    sp_pos: np.ndarray        # (n, 3)
    sp_vel: np.ndarray        # (n, 3)
    cmd: np.ndarray           # (n, 3) A, dA, Vo
    wrench: np.ndarray        # (n, 3) applied thrust, tau_r, tau_p
    saturated: np.ndarray     # (n,) 0/1
    scenario_name: str = ""
    seed: int | None = None
    control_rate: float = 240.0
    final_state: SimState | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        n = len(self.t)
        if n == 0:
            raise ValueError("empty run log")
        if np.any(np.diff(self.t) <= 0.0):
            raise ValueError("log timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(RUNLOG_COLUMNS) + "\n")
        for k in range(len(self.t)):
            vals = [
                fmt(self.t[k]),
                *(fmt(v) for v in self.pos_w[k]),
                *(fmt(v) for v in self.euler[k]),
                *(fmt(v) for v in self.vel_b[k]),
                *(fmt(v) for v in self.omega_b[k]),
                *(fmt(v) for v in self.sigma[k]),
                *(fmt(v) for v in self.sp_pos[k]),
                *(fmt(v) for v in self.sp_vel[k]),
                *(fmt(v) for v in self.cmd[k]),
                *(fmt(v) for v in self.wrench[k]),
                str(int(self.saturated[k])),
            ]
            buf.write(",".join(vals) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv_text())


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------


def _slice_log(store: dict, n: int, sc: Scenario, final_state=None) -> RunLog:
    return RunLog(
        t=store["t"][:n].copy(),
        pos_w=store["pos"][:n].copy(),
        euler=store["eul"][:n].copy(),
        vel_b=store["vel"][:n].copy(),
        omega_b=store["om"][:n].copy(),
        sigma=store["sig"][:n].copy(),
        sp_pos=store["sp_p"][:n].copy(),
        sp_vel=store["sp_v"][:n].copy(),
        cmd=store["cmd"][:n].copy(),
        wrench=store["wr"][:n].copy(),
        saturated=store["sat"][:n].copy(),
        scenario_name=sc.name,
        seed=sc.seed,
        control_rate=sc.control_rate,
        final_state=final_state,
    )


def run_scenario(sc: Scenario, p: VehicleParams, K) -> RunLog:
    """Run one closed-loop scenario to completion.

    Deterministic for a fixed seed. Aborts with :class:`DivergenceError`
    (carrying the partial log) if the state leaves the sanity envelope:
    position beyond 10 m, body rates beyond 1e4 rad/s, or a non-finite
    integrator result.
    """
    K = np.asarray(K, dtype=float)
    if K.shape != (3, 10):
        raise ValueError(f"gain must be 3x10, got {K.shape}")

    n_ticks = int(round(sc.duration * sc.control_rate))
    if n_ticks < 1:
        raise ConfigError("duration shorter than one control period")
    T = sc.control_period
    dt = sc.dt
    substeps = sc.physics_substeps
    rng = np.random.default_rng(sc.seed)
    noise = sc.noise

    mt, (Jx, Jy, Jz), g = p.total_mass, p.J, p.g
    legacy = sc.legacy_coriolis
    pulses = [(d.t_start, d.t_end, d.force_w) for d in sc.disturbances]

    store = {
        "t": np.empty(n_ticks),
        "pos": np.empty((n_ticks, 3)),
        "eul": np.empty((n_ticks, 3)),
        "vel": np.empty((n_ticks, 3)),
        "om": np.empty((n_ticks, 3)),
        "sig": np.empty((n_ticks, 10)),
        "sp_p": np.empty((n_ticks, 3)),
        "sp_v": np.empty((n_ticks, 3)),
        "cmd": np.empty((n_ticks, 3)),
        "wr": np.empty((n_ticks, 3)),
        "sat": np.zeros(n_ticks, dtype=np.int64),
    }

    y = sc.initial.as_vector()
    prev_ctrl = None

    for k in range(n_ticks):
        t_k = k * T
        att = EulerAngles321(y[6], y[7], y[8])
        q_true = euler_to_quat(att)

        # --- sense ---------------------------------------------------
        if noise.enabled:
            meas_pos = y[0:3] + rng.normal(0.0, noise.pos_sigma, 3)
            q_meas = quat_multiply(q_true, quat_from_rotvec(rng.normal(0.0, noise.att_sigma, 3)))
        else:
            meas_pos = y[0:3].copy()
            q_meas = q_true
        vel_override = None
        if sc.use_truth_velocity:
            vel_override = euler_to_rotmat(att) @ y[3:6]
        ctrl = assemble_ctrl_state(
            meas_pos, q_meas, prev_ctrl, T, vel_w=vel_override, source="sim"
        )

        # --- decide --------------------------------------------------
        sp = sc.schedule(t_k)
        out = control_step(K, ctrl, sp, p)

        store["t"][k] = t_k
        store["pos"][k] = y[0:3]
        store["eul"][k] = y[6:9]
        store["vel"][k] = y[3:6]
        store["om"][k] = y[9:12]
        store["sig"][k] = ctrl.sigma()
        store["sp_p"][k] = sp.pos_w
        store["sp_v"][k] = sp.vel_w
        store["cmd"][k] = (out.cmd.A, out.cmd.dA, out.cmd.Vo)
        store["wr"][k] = (out.wrench.thrust, out.wrench.tau_r, out.wrench.tau_p)
        store["sat"][k] = int(out.saturated)

        # --- integrate one control period ------------------------------
        thrust, tau_r, tau_p = out.wrench.thrust, out.wrench.tau_r, out.wrench.tau_p
        tick_pulses = [pl for pl in pulses if pl[0] < t_k + T and pl[1] > t_k]
        try:
            if not tick_pulses:
                args = (mt, Jx, Jy, Jz, g, thrust, tau_r, tau_p,
                        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
                for i in range(substeps):
                    y = _rk4_packed(y, dt, args, legacy)
            else:
                for i in range(substeps):
                    t_sub = t_k + i * dt
                    fx = fy = fz = 0.0
                    for (t0, t1, f) in tick_pulses:
                        if t0 <= t_sub < t1:
                            fx += f[0]
                            fy += f[1]
                            fz += f[2]
                    args = (mt, Jx, Jy, Jz, g, thrust, tau_r, tau_p,
                            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, fx, fy, fz)
                    y = _rk4_packed(y, dt, args, legacy)
        except (ValueError, OverflowError) as exc:
            # gimbal guard or float overflow inside the integrator
            raise DivergenceError(
                f"{sc.name}: integration aborted during tick {k} (t={t_k:.4f} s): {exc}",
                partial_log=_slice_log(store, k + 1, sc),
            ) from exc

        if not np.all(np.isfinite(y)):
            raise DivergenceError(
                f"{sc.name}: non-finite state after tick {k} (t={t_k + T:.4f} s)",
                partial_log=_slice_log(store, k + 1, sc),
            )
        if y[0] * y[0] + y[1] * y[1] + y[2] * y[2] > POSITION_GUARD**2:
            raise DivergenceError(
                f"{sc.name}: position left the {POSITION_GUARD} m envelope after tick {k}",
                partial_log=_slice_log(store, k + 1, sc),
            )
        if max(abs(y[9]), abs(y[10]), abs(y[11])) > RATE_GUARD:
            raise DivergenceError(
                f"{sc.name}: body rate exceeded {RATE_GUARD:g} rad/s after tick {k}",
                partial_log=_slice_log(store, k + 1, sc),
            )
        prev_ctrl = ctrl

    return _slice_log(store, n_ticks, sc, final_state=SimState.from_vector(y))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

SETTLE_RADIUS = 0.01  # [m]


@dataclass(frozen=True)
class RunMetrics:
    """Tracking summary of one run (all against the active setpoint)."""

    rms_pos_err: float        # [m], 3D
    rms_xy: float             # [m], horizontal only
    max_attitude: float       # [rad] peak tilt of body z from vertical
    max_body_speed: float     # [m/s]
    settling_time: float      # [s] from window start until |err| stays < 1 cm
    saturation_duty: float    # fraction of ticks with any channel clipped

    def to_text(self) -> str:
        settle = "never" if math.isinf(self.settling_time) else f"{self.settling_time:.3f} s"
        return "\n".join(
            [
                f"rms position error   : {self.rms_pos_err * 100:.3f} cm",
                f"rms xy error         : {self.rms_xy * 100:.3f} cm",
                f"max tilt             : {math.degrees(self.max_attitude):.2f} deg",
                f"max body speed       : {self.max_body_speed:.3f} m/s",
                f"settling (<1 cm)     : {settle}",
                f"saturation duty      : {self.saturation_duty * 100:.1f} %",
            ]
        )


def metrics(log: RunLog, window: tuple | None = None) -> RunMetrics:
    """Summarize a run over a time window (default: the whole log)."""
    t = log.t
    if window is None:
        mask = np.ones(len(t), dtype=bool)
        t0 = t[0]
    else:
        t0, t1 = (float(window[0]), float(window[1]))
        eps = 1e-12
        if t0 > t1 or t0 < t[0] - eps or t1 > t[-1] + eps:
            raise ValueError(
                f"window [{t0}, {t1}] not within the log span [{t[0]}, {t[-1]}]"
            )
        mask = (t >= t0 - eps) & (t <= t1 + eps)
        if not np.any(mask):
            raise ValueError("window contains no samples")

    err = log.sp_pos[mask] - log.pos_w[mask]
    err_sq = np.sum(err * err, axis=1)
    rms_pos = math.sqrt(float(np.mean(err_sq)))
    rms_xy = math.sqrt(float(np.mean(err[:, 0] ** 2 + err[:, 1] ** 2)))

    roll = log.euler[mask, 0]
    pitch = log.euler[mask, 1]
    tilt = np.arccos(np.clip(np.cos(roll) * np.cos(pitch), -1.0, 1.0))
    max_att = float(np.max(tilt))

    speed = np.linalg.norm(log.vel_b[mask], axis=1)
    max_speed = float(np.max(speed))

    dist = np.sqrt(err_sq)
    above = np.nonzero(dist >= SETTLE_RADIUS)[0]
    if len(above) == 0:
        settle = 0.0
    elif above[-1] == len(dist) - 1:
        settle = math.inf
    else:
        settle = float(t[mask][above[-1] + 1] - t0)

    duty = float(np.mean(log.saturated[mask]))
    return RunMetrics(rms_pos, rms_xy, max_att, max_speed, settle, duty)
