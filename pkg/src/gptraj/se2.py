"""Planar rigid-body transforms and their tangent-space calculus.

Tangent vectors are ordered (vx, vy, omega): translation first, rotation
last.  Angles live on the principal branch (-pi, pi].  Below the small-angle
threshold the exponential and logarithm switch to their first-order branch
(pure translation plus yaw).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SMALL_ANGLE = 1e-9


def wrap_angle(theta: float) -> float:
    """Reduce an angle to the principal branch (-pi, pi]."""
    r = theta - 2.0 * math.pi * round(theta / (2.0 * math.pi))
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


@dataclass(frozen=True, slots=True)
class Se2Pose:
    """A planar pose (x, y, yaw) with yaw normalized to (-pi, pi]."""

    x: float
    y: float
    yaw: float = field(default=0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def rotation(self) -> np.ndarray:
        """2x2 rotation matrix of the yaw angle."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]])

    def compose(self, other: Se2Pose) -> Se2Pose:
        """Group composition self * other."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Se2Pose(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.yaw + other.yaw,
        )

    def inverse(self) -> Se2Pose:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Se2Pose(-(c * self.x + s * self.y), -(-s * self.x + c * self.y), -self.yaw)

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        """Map point(s) from the body frame to the world frame.

        p may be shape (2,) or (n, 2).
        """
        return p @ self.rotation().T + self.translation

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw])


def _exp_coeffs(w: float) -> tuple[float, float]:
    # a = sin(w)/w, b = (1 - cos(w))/w, the half-angle form avoids cancellation
    a = math.sin(w) / w
    half = math.sin(0.5 * w)
    b = 2.0 * half * half / w
    return a, b


def se2_exp(xi: np.ndarray) -> Se2Pose:
    """Exponential map from a tangent vector (vx, vy, omega) to a pose."""
    vx, vy, w = float(xi[0]), float(xi[1]), float(xi[2])
    if abs(w) < SMALL_ANGLE:
        return Se2Pose(vx, vy, w)
    a, b = _exp_coeffs(w)
    return Se2Pose(a * vx - b * vy, b * vx + a * vy, w)


def se2_log(pose: Se2Pose) -> np.ndarray:
    """Logarithm map from a pose to a tangent vector (vx, vy, omega)."""
    w = pose.yaw
    if abs(w) < SMALL_ANGLE:
        return np.array([pose.x, pose.y, w])
    a, b = _exp_coeffs(w)
    det = a * a + b * b
    return np.array(
        [(a * pose.x + b * pose.y) / det, (-b * pose.x + a * pose.y) / det, w]
    )


def se2_adjoint(pose: Se2Pose) -> np.ndarray:
    """Adjoint matrix Ad(T) mapping tangents between the frames of T."""
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return np.array([[c, -s, pose.y], [s, c, -pose.x], [0.0, 0.0, 1.0]])


def _jl_blocks(xi: np.ndarray) -> tuple[float, float, float, float]:
    # V(w) = [[a, -b], [b, a]] and (V(w) - I)/w = [[p, -q], [q, p]]
    w = float(xi[2])
    if abs(w) < 1e-4:
        w2 = w * w
        a = 1.0 - w2 / 6.0 * (1.0 - w2 / 20.0)
        b = 0.5 * w * (1.0 - w2 / 12.0)
        p = -w / 6.0 * (1.0 - w2 / 20.0)
        q = 0.5 * (1.0 - w2 / 12.0)
    else:
        a, b = _exp_coeffs(w)
        p = (a - 1.0) / w
        q = b / w
    return a, b, p, q


def se2_jacobian_left(xi: np.ndarray) -> np.ndarray:
    """Left tangent Jacobian J_l(xi) of the exponential map."""
    a, b, p, q = _jl_blocks(xi)
    rx, ry = float(xi[0]), float(xi[1])
    return np.array(
        [
            [a, -b, -(p * rx - q * ry)],
            [b, a, -(q * rx + p * ry)],
            [0.0, 0.0, 1.0],
        ]
    )


def se2_jacobian_left_inv(xi: np.ndarray) -> np.ndarray:
    """Inverse of the left tangent Jacobian."""
    a, b, p, q = _jl_blocks(xi)
    rx, ry = float(xi[0]), float(xi[1])
    det = a * a + b * b
    # inv(V) applied to the third column of J_l, negated by the block inverse
    wx = -(p * rx - q * ry)
    wy = -(q * rx + p * ry)
    return np.array(
        [
            [a / det, b / det, -(a * wx + b * wy) / det],
            [-b / det, a / det, -(-b * wx + a * wy) / det],
            [0.0, 0.0, 1.0],
        ]
    )


def se2_jacobian_right(xi: np.ndarray) -> np.ndarray:
    """Right tangent Jacobian J_r(xi) = J_l(-xi)."""
    return se2_jacobian_left(-np.asarray(xi))


def se2_jacobian_right_inv(xi: np.ndarray) -> np.ndarray:
    """Inverse of the right tangent Jacobian."""
    return se2_jacobian_left_inv(-np.asarray(xi))
