"""Pinhole camera model: intrinsics, pose, projection, rotation helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class BehindCameraError(Exception):
    """Raised when a point has non-positive depth in the camera frame."""


def _check_rotation(R: np.ndarray, tol: float = 1e-9) -> None:
    if R.shape != (3, 3):
        raise ValueError("rotation must be 3x3")
    if not np.allclose(R.T @ R, np.eye(3), atol=tol * 10):
        raise ValueError("rotation is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > 1e-6:
        raise ValueError("rotation determinant is not +1")


@dataclass(frozen=True)
class CameraIntrinsics:
    """Calibrated pinhole intrinsics in pixels, fixed during optimization."""

    focal_x: float
    focal_y: float
    principal_x: float
    principal_y: float
    image_width: int
    image_height: int

    def __post_init__(self):
        if self.focal_x <= 0 or self.focal_y <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.principal_x <= self.image_width):
            raise ValueError("principal_x outside image bounds")
        if not (0 <= self.principal_y <= self.image_height):
            raise ValueError("principal_y outside image bounds")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.focal_x, 0.0, self.principal_x],
                [0.0, self.focal_y, self.principal_y],
                [0.0, 0.0, 1.0],
            ]
        )

    def normalize(self, pixels: np.ndarray) -> np.ndarray:
        """Pixel coordinates -> normalized camera-plane coordinates."""
        px = np.atleast_2d(np.asarray(pixels, dtype=float))
        out = np.empty_like(px)
        out[:, 0] = (px[:, 0] - self.principal_x) / self.focal_x
        out[:, 1] = (px[:, 1] - self.principal_y) / self.focal_y
        return out.reshape(np.shape(pixels))


@dataclass
class CameraPose:
    """World-to-camera rigid transform: x_cam = rotation @ x_world + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        _check_rotation(self.rotation)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map world points (N,3) into the camera frame."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "CameraPose":
        return CameraPose(self.rotation.T, -self.rotation.T @ self.translation)

    def copy(self) -> "CameraPose":
        return CameraPose(self.rotation.copy(), self.translation.copy())


def project(intr: CameraIntrinsics, pose: CameraPose, point) -> np.ndarray:
    """Perspective projection of one world point into pixel coordinates.

    Raises BehindCameraError if the point has non-positive depth.
    """
    p = pose.rotation @ np.asarray(point, dtype=float).reshape(3) + pose.translation
    if p[2] <= 0:
        raise BehindCameraError(f"depth {p[2]:.6g} <= 0")
    return np.array(
        [
            intr.focal_x * p[0] / p[2] + intr.principal_x,
            intr.focal_y * p[1] / p[2] + intr.principal_y,
        ]
    )


def project_points(intr: CameraIntrinsics, pose: CameraPose, points: np.ndarray):
    """Vectorized projection of (N,3) world points.

    Returns (pixels (N,2), depths (N,)); callers filter on depth sign.
    """
    cam = pose.transform(points)
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = np.stack(
            [
                intr.focal_x * cam[:, 0] / z + intr.principal_x,
                intr.focal_y * cam[:, 1] / z + intr.principal_y,
            ],
            axis=1,
        )
    return px, z


def angle_axis_to_matrix(omega: np.ndarray) -> np.ndarray:
    """Rodrigues formula, stable near zero angle."""
    omega = np.asarray(omega, dtype=float).reshape(3)
    theta = np.linalg.norm(omega)
    K = np.array(
        [
            [0.0, -omega[2], omega[1]],
            [omega[2], 0.0, -omega[0]],
            [-omega[1], omega[0], 0.0],
        ]
    )
    if theta < 1e-12:
        return np.eye(3) + K
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def matrix_to_quaternion(R: np.ndarray) -> np.ndarray:
    """Rotation matrix -> unit quaternion (w, x, y, z), w >= 0."""
    from scipy.spatial.transform import Rotation

    q = Rotation.from_matrix(R).as_quat()  # (x, y, z, w)
    q = np.array([q[3], q[0], q[1], q[2]])
    if q[0] < 0:
        q = -q
    return q


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) -> rotation matrix."""
    from scipy.spatial.transform import Rotation

    q = np.asarray(q, dtype=float).reshape(4)
    return Rotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()


def project_rotation(R: np.ndarray) -> np.ndarray:
    """Nearest orthonormal matrix with det +1 (SVD projection)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt))
    return U @ D @ Vt
