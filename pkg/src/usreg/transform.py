"""Rigid 6-DOF transforms.

Rotations use fixed-axis Euler angles applied X, then Y, then Z
(``R = Rz @ Ry @ Rx``) about a rotation centre, normally the volume centre.
A transform maps ``x -> R (x - c) + c + t``.

The optimizer works on a 6-vector of normalized parameters: one unit is
1 mm of translation (components 0-2) or 1 degree of rotation (3-5).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

CONVENTION = "XYZ-fixed-center"

# below this, cos(pitch) is treated as zero
_GIMBAL_EPS = 1e-12


def _wrap_deg(a):
    """Map angles to (-180, 180]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + 180.0, 360.0) - 180.0
    return np.where(w == -180.0, 180.0, w)


def euler_to_matrix(angles_deg) -> np.ndarray:
    rx, ry, rz = np.deg2rad(np.asarray(angles_deg, dtype=float))
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def matrix_to_euler(R) -> np.ndarray:
    """Inverse of :func:`euler_to_matrix`. At gimbal lock the Z angle is set to 0."""
    R = np.asarray(R, dtype=float)
    cy = np.hypot(R[0, 0], R[1, 0])
    ry = np.arctan2(-R[2, 0], cy)
    if cy > _GIMBAL_EPS:
        rx = np.arctan2(R[2, 1], R[2, 2])
        rz = np.arctan2(R[1, 0], R[0, 0])
    else:
        rx = np.arctan2(-R[1, 2], R[1, 1])
        rz = 0.0
    return _wrap_deg(np.rad2deg([rx, ry, rz]))


@dataclass(frozen=True)
class RigidTransform:
    """Translation (mm) plus fixed-axis XYZ Euler rotation (degrees) about ``center``."""

    translation: tuple = (0.0, 0.0, 0.0)
    rotation_deg: tuple = (0.0, 0.0, 0.0)
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("translation", "rotation_deg", "center"):
            val = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if val.shape != (3,) or not np.all(np.isfinite(val)):
                raise ValueError(f"{name} must be 3 finite numbers")
            if name == "rotation_deg":
                val = _wrap_deg(val)
            object.__setattr__(self, name, tuple(float(x) for x in val))

    @classmethod
    def identity(cls, center=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls(center=center)

    @classmethod
    def translate(cls, x=0.0, y=0.0, z=0.0, center=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls((x, y, z), center=center)

    @classmethod
    def rotate(cls, rx=0.0, ry=0.0, rz=0.0, center=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls(rotation_deg=(rx, ry, rz), center=center)

    @classmethod
    def from_matrix(cls, M, center=(0.0, 0.0, 0.0)) -> "RigidTransform":
        """Decompose a 4x4 rigid matrix about ``center``."""
        M = np.asarray(M, dtype=float)
        R, d = M[:3, :3], M[:3, 3]
        c = np.asarray(center, dtype=float)
        t = d - c + R @ c
        return cls(tuple(t), tuple(matrix_to_euler(R)), tuple(c))

    @property
    def rotation_matrix(self) -> np.ndarray:
        return euler_to_matrix(self.rotation_deg)

    @property
    def matrix(self) -> np.ndarray:
        R = self.rotation_matrix
        c = np.asarray(self.center)
        M = np.eye(4)
        M[:3, :3] = R
        M[:3, 3] = c - R @ c + np.asarray(self.translation)
        return M

    def apply(self, points) -> np.ndarray:
        """Transform points of shape (..., 3)."""
        M = self.matrix
        pts = np.asarray(points, dtype=float)
        return pts @ M[:3, :3].T + M[:3, 3]

    def to_dict(self) -> dict:
        return {"t_mm": list(self.translation), "euler_deg": list(self.rotation_deg),
                "convention": CONVENTION, "center_mm": list(self.center)}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        if d.get("convention", CONVENTION) != CONVENTION:
            raise ValueError(f"unsupported Euler convention {d['convention']!r}")
        return cls(tuple(d["t_mm"]), tuple(d["euler_deg"]), tuple(d.get("center_mm", (0.0, 0.0, 0.0))))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "RigidTransform":
        return cls.from_dict(json.loads(s))


def compose(A: RigidTransform, B: RigidTransform) -> RigidTransform:
    """``A @ B`` (apply B first), decomposed about A's centre."""
    return RigidTransform.from_matrix(A.matrix @ B.matrix, A.center)


def invert(T: RigidTransform) -> RigidTransform:
    R = T.rotation_matrix
    d = T.matrix[:3, 3]
    M = np.eye(4)
    M[:3, :3] = R.T
    M[:3, 3] = -R.T @ d
    return RigidTransform.from_matrix(M, T.center)


def to_params(T: RigidTransform) -> np.ndarray:
    return np.array(T.translation + T.rotation_deg)


def from_params(p, center=(0.0, 0.0, 0.0)) -> RigidTransform:
    p = np.asarray(p, dtype=float)
    if p.shape != (6,):
        raise ValueError(f"parameter vector must have 6 components, got shape {p.shape}")
    return RigidTransform(tuple(p[:3]), tuple(p[3:]), center)


@dataclass(frozen=True)
class ErrorDecomposition:
    """Signed translation (mm) and Euler (deg) residuals of ``T_ref^-1 T_reg``."""

    translation: tuple
    angles: tuple
    geodesic_deg: float

    @property
    def abs_translation(self) -> tuple:
        return tuple(abs(x) for x in self.translation)

    @property
    def abs_angles(self) -> tuple:
        return tuple(abs(x) for x in self.angles)

    @property
    def max_translation(self) -> float:
        return max(self.abs_translation)

    @property
    def max_angle(self) -> float:
        return max(self.abs_angles)

    @property
    def translation_norm(self) -> float:
        return float(np.linalg.norm(self.translation))


def geodesic_angle(R) -> float:
    """Rotation angle (deg) of a rotation matrix."""
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.rad2deg(np.arccos(np.clip(c, -1.0, 1.0))))


def error_of(T_reference: RigidTransform, T_registration: RigidTransform) -> ErrorDecomposition:
    E = compose(invert(T_reference), T_registration)
    return ErrorDecomposition(E.translation, E.rotation_deg, geodesic_angle(E.rotation_matrix))
