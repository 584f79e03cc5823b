"""Rigid poses and the closed-form least-squares alignment (Kabsch/Umeyama
without scale).

The cross-covariance is accumulated with np.sum over explicit coordinate
products rather than a BLAS matmul: BLAS may split the reduction across
threads, and solver reports must be byte-identical regardless of thread
count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InputError

_ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    """Model-to-camera rigid transform: rotation (3, 3) and translation (3,) mm."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.ascontiguousarray(np.asarray(self.rotation, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.translation, dtype=np.float64)).reshape(3)
        if r.shape != (3, 3):
            raise InputError(f"rotation must be (3, 3), got {r.shape}")
        if np.abs(r.T @ r - np.eye(3)).max() > _ORTHONORMAL_TOL:
            raise InputError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > _ORTHONORMAL_TOL:
            raise InputError("rotation determinant is not +1 within 1e-9")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        r.flags.writeable = False
        t.flags.writeable = False

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform model points into the camera frame."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(),
                "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Pose":
        return cls(np.asarray(data["rotation"]), np.asarray(data["translation"]))


def kabsch(model: np.ndarray, camera: np.ndarray, weights: np.ndarray | None = None) -> Pose:
    """Least-squares rigid alignment: the pose minimizing
    sum_i w_i * ||R @ model_i + t - camera_i||^2.

    Reflections are corrected by flipping the sign of the smallest singular
    direction, so the result is always a proper rotation. Raises
    DegenerateGeometryError when the points do not pin down a rotation
    (fewer than 3 pairs, or coincident/collinear configurations).
    """
    a = np.asarray(model, dtype=np.float64)
    b = np.asarray(camera, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise InputError(f"paired (N, 3) arrays required, got {a.shape} and {b.shape}")
    n = len(a)
    if n < 3:
        raise DegenerateGeometryError(f"need at least 3 pairs, got {n}")

    if weights is None:
        ca = a.mean(axis=0)
        cb = b.mean(axis=0)
        wa = a - ca
        wb = b - cb
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
            raise InputError("weights must be (N,) non-negative with positive sum")
        ca = (w[:, None] * a).sum(axis=0) / w.sum()
        cb = (w[:, None] * b).sum(axis=0) / w.sum()
        wa = (a - ca) * np.sqrt(w)[:, None]
        wb = (b - cb) * np.sqrt(w)[:, None]

    # H[i, j] = sum_n wa[n, i] * wb[n, j], accumulated column by column
    h = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            h[i, j] = np.sum(wa[:, i] * wb[:, j])

    u, s, vt = np.linalg.svd(h)
    scale = float(np.abs(h).max())
    if scale <= 0.0 or s[1] <= 1e-12 * scale:
        raise DegenerateGeometryError(
            "cross-covariance rank < 2 (coincident or collinear points)"
        )
    sign = np.sign(np.linalg.det(vt.T @ u.T))
    if sign == 0.0:
        raise DegenerateGeometryError("singular rotation estimate")
    r = vt.T @ np.diag([1.0, 1.0, sign]) @ u.T
    t = cb - r @ ca
    return Pose(r, t)


def rotation_geodesic_error(r1: np.ndarray, r2: np.ndarray) -> float:
    """Angle in radians of the relative rotation between two rotation matrices.

    For rotations ||r1 - r2||_F = 2*sqrt(2)*sin(angle/2); the arcsin form
    resolves tiny angles to machine precision where arccos of the trace
    bottoms out near sqrt(eps)."""
    r1 = np.asarray(r1, dtype=np.float64)
    r2 = np.asarray(r2, dtype=np.float64)
    cos = float(np.clip((np.trace(r1.T @ r2) - 1.0) / 2.0, -1.0, 1.0))
    if cos >= 0.0:
        sin_half = min(1.0, float(np.linalg.norm(r1 - r2)) / (2.0 * np.sqrt(2.0)))
        return float(2.0 * np.arcsin(sin_half))
    return float(np.arccos(cos))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via the subgroup-algorithm quaternion method."""
    u1, u2, u3 = rng.random(3)
    q = np.array([
        np.sqrt(1.0 - u1) * np.sin(2.0 * np.pi * u2),
        np.sqrt(1.0 - u1) * np.cos(2.0 * np.pi * u2),
        np.sqrt(u1) * np.sin(2.0 * np.pi * u3),
        np.sqrt(u1) * np.cos(2.0 * np.pi * u3),
    ])
    return quaternion_to_matrix(q)


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a quaternion (x, y, z, w); normalizes first."""
    x, y, z, w = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def small_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        return np.eye(3)
    k = axis / norm
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)
