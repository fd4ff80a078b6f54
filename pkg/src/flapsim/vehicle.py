"""Physical parameters and actuator model of the flapping-wing vehicle.

The piezo drive is abstracted by three affine fits mapping commanded signal
parameters to stroke-averaged wrench components:

* thrust:      Gamma = thrust_slope * A + thrust_intercept  (clamped at 0)
* roll torque: tau_r = roll_slope * dA     (amplitude split between wings)
* pitch torque: tau_p = pitch_slope * Vo   (common offset shift)

``A`` is the common drive amplitude in volts, ``dA`` the left/right amplitude
differential, ``Vo`` the shared sine offset. Commands saturate to a
box; saturation is reported, never silently ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np
import yaml

from .errors import ConfigError

__all__ = [
    "VehicleParams",
    "ActuatorCmd",
    "Wrench",
    "default_robofly_params",
    "load_params",
    "save_params",
    "cmd_to_wrench",
    "wrench_to_cmd",
    "saturate_cmd",
    "hover_thrust",
    "hover_cmd",
    "drive_signal",
]

BUILTIN_PROFILE = "robofly-150mg"


@dataclass(frozen=True)
class VehicleParams:
    """Mass/inertia properties, actuator fits, and command limits (SI units)."""

    m: float = 150e-6                # body mass [kg]
    m_M: float = 36e-6               # payload/marker mass [kg]
    J: tuple = (3.12e-9, 2.97e-9, 0.55e-9)   # diag inertia (Jxx, Jyy, Jzz) [kg m^2]
    thrust_slope: float = 3.27e-5    # [N/V]
    thrust_intercept: float = -0.0024  # [N]
    roll_slope: float = 0.48e-6      # [N m / V]
    pitch_slope: float = 0.11e-6     # [N m / V]
    flap_freq: float = 180.0         # wing stroke frequency [Hz]
    V_bias: float = 250.0            # drive bias voltage [V]
    g: float = 9.81                  # gravity [m/s^2]
    A_limits: tuple = (0.0, 250.0)   # common amplitude box [V]
    dA_limit: float = 40.0           # |dA| limit [V]
    Vo_limit: float = 60.0           # |Vo| limit [V]

    def __post_init__(self) -> None:
        if self.m <= 0 or self.m_M < 0:
            raise ConfigError("masses must be positive (m) / non-negative (m_M)")
        J = tuple(float(j) for j in self.J)
        if len(J) != 3 or any(j <= 0 for j in J):
            raise ConfigError("J must be three positive principal inertias")
        object.__setattr__(self, "J", J)
        if self.thrust_slope <= 0:
            raise ConfigError("thrust_slope must be positive")
        if self.roll_slope == 0 or self.pitch_slope == 0:
            raise ConfigError("torque slopes must be nonzero")
        A_limits = tuple(float(a) for a in self.A_limits)
        if len(A_limits) != 2 or not A_limits[0] < A_limits[1]:
            raise ConfigError("A_limits must be an increasing (lo, hi) pair")
        object.__setattr__(self, "A_limits", A_limits)
        if self.dA_limit <= 0 or self.Vo_limit <= 0:
            raise ConfigError("dA_limit and Vo_limit must be positive")
        if self.flap_freq <= 0 or self.g <= 0:
            raise ConfigError("flap_freq and g must be positive")

    @property
    def total_mass(self) -> float:
        return self.m + self.m_M


@dataclass(frozen=True)
class ActuatorCmd:
    """Drive-signal command triple: amplitude A, differential dA, offset Vo [V]."""

    A: float
    dA: float
    Vo: float

    def as_array(self) -> np.ndarray:
        return np.array([self.A, self.dA, self.Vo])


@dataclass(frozen=True)
class Wrench:
    """Stroke-averaged thrust [N] and roll/pitch torques [N m], body frame."""

    thrust: float
    tau_r: float
    tau_p: float

    def as_array(self) -> np.ndarray:
        return np.array([self.thrust, self.tau_r, self.tau_p])


def default_robofly_params() -> VehicleParams:
    """Built-in 150 mg vehicle profile ("robofly-150mg")."""
    return VehicleParams()


def hover_thrust(p: VehicleParams) -> float:
    """Weight of the full vehicle: thrust needed for a level hover [N]."""
    return p.total_mass * p.g


def hover_cmd(p: VehicleParams) -> ActuatorCmd:
    """Command producing exactly the hover wrench (no torques)."""
    cmd, saturated = wrench_to_cmd(p, Wrench(hover_thrust(p), 0.0, 0.0))
    if saturated:
        raise ConfigError("hover thrust is outside the actuator envelope")
    return cmd


def cmd_to_wrench(p: VehicleParams, c: ActuatorCmd) -> Wrench:
    """Affine fits from command to body wrench; thrust clamps at zero."""
    thrust = max(0.0, p.thrust_slope * c.A + p.thrust_intercept)
    return Wrench(thrust, p.roll_slope * c.dA, p.pitch_slope * c.Vo)


def wrench_to_cmd(p: VehicleParams, w: Wrench) -> tuple[ActuatorCmd, bool]:
    """Invert the fits, then saturate to the command box.

    Returns the (possibly saturated) command and a flag that is True when
    any axis hit a limit. Exact inverse of :func:`cmd_to_wrench` on the
    interior of the box.
    """
    raw = ActuatorCmd(
        (w.thrust - p.thrust_intercept) / p.thrust_slope,
        w.tau_r / p.roll_slope,
        w.tau_p / p.pitch_slope,
    )
    return saturate_cmd(p, raw)


def saturate_cmd(p: VehicleParams, c: ActuatorCmd) -> tuple[ActuatorCmd, bool]:
    """Clip a command to the box limits; flag whether anything clipped."""
    A = min(max(c.A, p.A_limits[0]), p.A_limits[1])
    dA = min(max(c.dA, -p.dA_limit), p.dA_limit)
    Vo = min(max(c.Vo, -p.Vo_limit), p.Vo_limit)
    saturated = bool((A != c.A) or (dA != c.dA) or (Vo != c.Vo))
    return ActuatorCmd(A, dA, Vo), saturated


def drive_signal(p: VehicleParams, c: ActuatorCmd, t, side: str = "left"):
    """Instantaneous wing drive voltage at time t (scalar or array).

    V(t) = (A +/- dA)/2 * sin(2 pi f t) + V_bias/2 + Vo/2, with the
    differential dA applied positively to the left wing and negatively to
    the right wing.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    sign = 1.0 if side == "left" else -1.0
    amp = 0.5 * (c.A + sign * c.dA)
    t = np.asarray(t, dtype=float)
    out = amp * np.sin(2.0 * math.pi * p.flap_freq * t) + 0.5 * p.V_bias + 0.5 * c.Vo
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# parameter file I/O (flat YAML mapping, SI units, keys = field names)
# ---------------------------------------------------------------------------

def load_params(source: str) -> VehicleParams:
    """Load parameters from a YAML file path or a built-in profile name."""
    if source == BUILTIN_PROFILE:
        return default_robofly_params()
    try:
        with open(source, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(
            f"no such parameter file or profile: {source!r} "
            f"(built-in profile: {BUILTIN_PROFILE!r})"
        ) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"unparseable parameter file {source!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"parameter file {source!r} must be a flat mapping")
    known = {f.name for f in fields(VehicleParams)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown parameter keys: {sorted(unknown)}")
    try:
        return replace(default_robofly_params(), **data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameter value in {source!r}: {exc}") from exc


def save_params(p: VehicleParams, path: str) -> None:
    """Write parameters as a flat YAML mapping (round-trips with load_params)."""
    data = {}
    for f in fields(VehicleParams):
        v = getattr(p, f.name)
        data[f.name] = list(v) if isinstance(v, tuple) else v
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)
