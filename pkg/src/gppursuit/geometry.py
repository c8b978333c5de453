"""Rigid-body poses, twists and the small-error maps used by the observer.

A pose g = (R, p) acts on points as q -> R q + p. Twists stack linear before
angular velocity. Body-frame kinematics integrate by right multiplication,
g <- g * exp(xi dt).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import AssumptionViolation

_SMALL = 1e-8


def wedge(w: np.ndarray) -> np.ndarray:
    """Map a 3-vector to the skew-symmetric matrix with wedge(w) @ x = w x x."""
    w = np.asarray(w, dtype=float)
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def vee(s: np.ndarray) -> np.ndarray:
    """Inverse of wedge. Raises if the argument is not skew-symmetric."""
    s = np.asarray(s, dtype=float)
    if np.abs(s + s.T).max() > 1e-9:
        raise ValueError("matrix is not skew-symmetric")
    return np.array([s[2, 1], s[0, 2], s[1, 0]])


def so3_exp(w: np.ndarray) -> np.ndarray:
    """Rotation matrix for a rotation vector (axis * angle)."""
    return backend.so3_exp(np.asarray(w, dtype=float))


def so3_log(r: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle, angle in (-pi, pi]) of a rotation matrix."""
    r = np.asarray(r, dtype=float)
    cos_t = 0.5 * (np.trace(r) - 1.0)
    theta = np.arccos(np.clip(cos_t, -1.0, 1.0))
    if theta < _SMALL:
        return vee(0.5 * (r - r.T))
    if np.pi - theta < 1e-6:
        # near pi the off-diagonal formula degenerates; use the diagonal
        a = np.sqrt(np.maximum(0.0, (np.diag(r) - cos_t) / (1.0 - cos_t)))
        k = int(np.argmax(a))
        axis = a.copy()
        # fix signs against the off-diagonal entries
        if k == 0:
            axis[1] = np.copysign(a[1], r[0, 1] + r[1, 0])
            axis[2] = np.copysign(a[2], r[0, 2] + r[2, 0])
        elif k == 1:
            axis[0] = np.copysign(a[0], r[0, 1] + r[1, 0])
            axis[2] = np.copysign(a[2], r[1, 2] + r[2, 1])
        else:
            axis[0] = np.copysign(a[0], r[0, 2] + r[2, 0])
            axis[1] = np.copysign(a[1], r[1, 2] + r[2, 1])
        axis /= np.linalg.norm(axis)
        w = vee(0.5 * (r - r.T))
        if w @ axis < 0.0:
            axis = -axis
        return theta * axis
    w = vee(0.5 * (r - r.T))
    return (theta / np.sin(theta)) * w


@dataclass(frozen=True)
class Twist:
    """Body velocity: linear and angular components in the body frame."""

    linear: np.ndarray
    angular: np.ndarray

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_array(v: np.ndarray) -> "Twist":
        v = np.asarray(v, dtype=float)
        return Twist(v[:3].copy(), v[3:].copy())

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    def __neg__(self) -> "Twist":
        return Twist(-self.linear, -self.angular)


@dataclass(frozen=True)
class Pose:
    """Rigid transform (rotation matrix r, translation p). Treat as immutable."""

    r: np.ndarray
    p: np.ndarray

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_axis_angle(p, w) -> "Pose":
        return Pose(so3_exp(np.asarray(w, dtype=float)),
                    np.asarray(p, dtype=float))

    def apply(self, q: np.ndarray) -> np.ndarray:
        return self.r @ q + self.p


def compose(a: Pose, b: Pose) -> Pose:
    return Pose(a.r @ b.r, a.r @ b.p + a.p)


def inverse(g: Pose) -> Pose:
    rt = g.r.T
    return Pose(rt, -(rt @ g.p))


def relative(g_wi: Pose, g_wj: Pose) -> Pose:
    """Pose of frame j seen from frame i, g_ij = g_wi^-1 g_wj."""
    rt = g_wi.r.T
    return Pose(rt @ g_wj.r, rt @ (g_wj.p - g_wi.p))


def adjoint(g: Pose) -> np.ndarray:
    """6x6 adjoint transporting twists between frames."""
    ad = np.zeros((6, 6))
    ad[:3, :3] = g.r
    ad[:3, 3:] = wedge(g.p) @ g.r
    ad[3:, 3:] = g.r
    return ad


def adjoint_rotation(r: np.ndarray) -> np.ndarray:
    """Adjoint of a pure rotation: block-diagonal (r, r)."""
    ad = np.zeros((6, 6))
    ad[:3, :3] = r
    ad[3:, 3:] = r
    return ad


def exp_se3(xi: Twist, dt: float) -> Pose:
    """Pose reached by flowing along a constant twist for time dt."""
    r, p = backend.se3_exp(xi.as_array(), dt)
    return Pose(r, p)


def step_pose(g: Pose, xi: Twist, dt: float) -> Pose:
    """One body-frame integration step, g <- g * exp(xi dt)."""
    return compose(g, exp_se3(xi, dt))


def vec_transform(g: Pose) -> np.ndarray:
    """Error vector of a pose: translation stacked on the skew part of r.

    The rotation block is vee((r - r^T)/2) = sin(theta) * axis, which is the
    quantity the estimation-error feedback acts on.
    """
    s = 0.5 * (g.r - g.r.T)
    return np.concatenate([g.p, [s[2, 1], s[0, 2], s[1, 0]]])


def rotation_from_small_error(w: np.ndarray) -> np.ndarray:
    """Reconstruct a rotation from its skew part sin(theta) * axis.

    Valid for |theta| < pi/2, i.e. ||w|| < 1. Larger norms have no preimage
    in that range and raise AssumptionViolation.
    """
    w = np.asarray(w, dtype=float)
    n = np.linalg.norm(w)
    if n > 1.0 + 1e-9:
        raise AssumptionViolation(f"rotation error norm {n:.6f} exceeds 1")
    if n < 1e-12:
        return np.eye(3)
    theta = np.arcsin(min(n, 1.0))
    return so3_exp((theta / n) * w)


def project_rotation(r: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (polar projection via SVD)."""
    u, _, vt = np.linalg.svd(r)
    q = u @ vt
    if np.linalg.det(q) < 0.0:
        u[:, -1] = -u[:, -1]
        q = u @ vt
    return q


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle of a rotation, in [0, pi]."""
    return float(np.arccos(np.clip(0.5 * (np.trace(r) - 1.0), -1.0, 1.0)))


def gcheck(g: Pose) -> np.ndarray:
    """Vector form of a pose: translation stacked on axis * angle."""
    return np.concatenate([g.p, so3_log(g.r)])


def pose_from_gcheck(v: np.ndarray) -> Pose:
    v = np.asarray(v, dtype=float)
    return Pose(so3_exp(v[3:]), v[:3].copy())
