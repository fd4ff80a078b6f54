"""Rotation representations and conversions for a z-up flight vehicle.

Conventions used throughout the package:

* Euler angles follow the aerospace 321 sequence (yaw about z, then pitch
  about y, then roll about x), so ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``
  maps body-frame vectors into the world frame.
* Quaternions are scalar-first ``(w, x, y, z)`` Hamilton quaternions with
  the same body-to-world semantics, canonicalized to ``w >= 0``.
* Angular velocity ``(p, q, r)`` is expressed in the body frame.

All functions are pure and operate on small numpy arrays / float scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GimbalLockError

__all__ = [
    "GIMBAL_GUARD",
    "EulerAngles321",
    "Quaternion",
    "wrap_angle",
    "euler_to_rotmat",
    "rotmat_to_euler",
    "quat_to_rotmat",
    "rotmat_to_quat",
    "euler_to_quat",
    "quat_to_euler",
    "quat_multiply",
    "quat_from_rotvec",
    "quat_to_rotvec",
    "euler_rate_matrix",
    "is_rotation",
]

# Pitch magnitudes at or beyond this are rejected: the 321 chart is singular
# at |pitch| = pi/2 and the rate matrix blows up as 1/cos(pitch).
GIMBAL_GUARD = math.pi / 2 - 1e-6


def wrap_angle(angle: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class EulerAngles321:
    """321 (yaw-pitch-roll) Euler angles in radians.

    ``roll`` and ``yaw`` are normalized to (-pi, pi] on construction;
    ``pitch`` must stay clear of the +/-90 deg singularity.
    """

    roll: float
    pitch: float
    yaw: float

    def __post_init__(self) -> None:
        r, p, y = float(self.roll), float(self.pitch), float(self.yaw)
        if not (math.isfinite(r) and math.isfinite(p) and math.isfinite(y)):
            raise ValueError("Euler angles must be finite")
        if abs(p) >= GIMBAL_GUARD:
            raise GimbalLockError(
                f"pitch {p:.9f} rad is within 1e-6 of the +/-pi/2 singularity"
            )
        object.__setattr__(self, "roll", wrap_angle(r))
        object.__setattr__(self, "pitch", p)
        object.__setattr__(self, "yaw", wrap_angle(y))

    def as_array(self) -> np.ndarray:
        return np.array([self.roll, self.pitch, self.yaw])


@dataclass(frozen=True)
class Quaternion:
    """Scalar-first Hamilton quaternion (w, x, y, z), body-to-world."""

    w: float
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def is_unit(self, tol: float = 1e-3) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n < 1e-12:
            raise ValueError("cannot normalize a near-zero quaternion")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def canonical(self) -> "Quaternion":
        """Flip sign so w >= 0 (q and -q encode the same rotation)."""
        if self.w < 0.0:
            return Quaternion(-self.w, -self.x, -self.y, -self.z)
        return self

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        w, x, y, z = (float(v) for v in a)
        return cls(w, x, y, z)


def quat_multiply(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product a*b (compose rotations: apply b in a's body frame)."""
    return Quaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


def euler_to_rotmat(e: EulerAngles321) -> np.ndarray:
    """Body-to-world rotation matrix Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = math.cos(e.roll), math.sin(e.roll)
    cp, sp = math.cos(e.pitch), math.sin(e.pitch)
    cy, sy = math.cos(e.yaw), math.sin(e.yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def rotmat_to_euler(R: np.ndarray) -> EulerAngles321:
    """Invert :func:`euler_to_rotmat`. Raises GimbalLockError near |pitch|=pi/2."""
    r20 = float(R[2, 0])
    if abs(r20) >= 1.0 - 1e-9:
        raise GimbalLockError("rotation matrix pitch is within 1e-9 of +/-pi/2")
    pitch = -math.asin(r20)
    roll = math.atan2(float(R[2, 1]), float(R[2, 2]))
    yaw = math.atan2(float(R[1, 0]), float(R[0, 0]))
    return EulerAngles321(roll, pitch, yaw)


def quat_to_rotmat(q: Quaternion) -> np.ndarray:
    """Body-to-world rotation matrix of a (not necessarily unit) quaternion."""
    q = q.normalized()
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotmat_to_quat(R: np.ndarray) -> Quaternion:
    """Rotation matrix to canonical unit quaternion (Shepperd's method)."""
    r00, r01, r02 = (float(v) for v in R[0])
    r10, r11, r12 = (float(v) for v in R[1])
    r20, r21, r22 = (float(v) for v in R[2])
    trace = r00 + r11 + r22
    if trace >= max(r00, r11, r22):
        s = 2.0 * math.sqrt(1.0 + trace)
        q = Quaternion(0.25 * s, (r21 - r12) / s, (r02 - r20) / s, (r10 - r01) / s)
    elif r00 >= max(r11, r22):
        s = 2.0 * math.sqrt(1.0 + r00 - r11 - r22)
        q = Quaternion((r21 - r12) / s, 0.25 * s, (r01 + r10) / s, (r02 + r20) / s)
    elif r11 >= r22:
        s = 2.0 * math.sqrt(1.0 + r11 - r00 - r22)
        q = Quaternion((r02 - r20) / s, (r01 + r10) / s, 0.25 * s, (r12 + r21) / s)
    else:
        s = 2.0 * math.sqrt(1.0 + r22 - r00 - r11)
        q = Quaternion((r10 - r01) / s, (r02 + r20) / s, (r12 + r21) / s, 0.25 * s)
    return q.normalized().canonical()


def euler_to_quat(e: EulerAngles321) -> Quaternion:
    """321 Euler angles to canonical unit quaternion."""
    hr, hp, hy = 0.5 * e.roll, 0.5 * e.pitch, 0.5 * e.yaw
    qz = Quaternion(math.cos(hy), 0.0, 0.0, math.sin(hy))
    qy = Quaternion(math.cos(hp), 0.0, math.sin(hp), 0.0)
    qx = Quaternion(math.cos(hr), math.sin(hr), 0.0, 0.0)
    return quat_multiply(quat_multiply(qz, qy), qx).canonical()


def quat_to_euler(q: Quaternion) -> EulerAngles321:
    """Canonical route: quaternion -> rotation matrix -> Euler angles."""
    return rotmat_to_euler(quat_to_rotmat(q))


def quat_from_rotvec(v) -> Quaternion:
    """Exponential map: rotation vector (axis * angle, rad) to quaternion."""
    vx, vy, vz = (float(c) for c in v)
    angle = math.sqrt(vx * vx + vy * vy + vz * vz)
    if angle < 1e-9:
        # second-order series of sin(a/2)/a keeps this smooth through zero
        k = 0.5 - angle * angle / 48.0
        return Quaternion(1.0 - angle * angle / 8.0, k * vx, k * vy, k * vz).normalized()
    k = math.sin(0.5 * angle) / angle
    return Quaternion(math.cos(0.5 * angle), k * vx, k * vy, k * vz)


def quat_to_rotvec(q: Quaternion) -> np.ndarray:
    """Logarithmic map: quaternion to rotation vector (radians)."""
    q = q.normalized().canonical()
    vec_norm = math.sqrt(q.x * q.x + q.y * q.y + q.z * q.z)
    if vec_norm < 1e-9:
        return np.array([2.0 * q.x, 2.0 * q.y, 2.0 * q.z])
    angle = 2.0 * math.atan2(vec_norm, q.w)
    k = angle / vec_norm
    return np.array([k * q.x, k * q.y, k * q.z])


def euler_rate_matrix(e: EulerAngles321) -> np.ndarray:
    """Matrix W with [roll_dot, pitch_dot, yaw_dot]' = W @ [p, q, r]'.

    Valid away from the pitch singularity (enforced at construction).
    Identity at zero attitude.
    """
    cr, sr = math.cos(e.roll), math.sin(e.roll)
    cp = math.cos(e.pitch)
    tp = math.tan(e.pitch)
    return np.array(
        [
            [1.0, sr * tp, cr * tp],
            [0.0, cr, -sr],
            [0.0, sr / cp, cr / cp],
        ]
    )


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    """True if R is orthonormal with determinant +1 within tol."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    err = np.linalg.norm(R.T @ R - np.eye(3))
    return err <= tol and abs(np.linalg.det(R) - 1.0) <= tol
