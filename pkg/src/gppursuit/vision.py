"""Pinhole feature measurements and the image Jacobian.

The camera looks along its +y axis. A point (x, y, z) in the camera frame
projects to lam/y * (x, z), so a feature is visible only while y > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateView, FeatureBehindCamera
from .geometry import Pose, wedge

# tetrahedron around the target origin; non-coplanar so the Jacobian has rank 6
DEFAULT_FEATURE_POINTS = np.array([
    [0.0, 0.0, 0.1],
    [0.1, 0.0, -0.1],
    [-0.1, 0.1, -0.1],
    [-0.1, -0.1, -0.1],
])

_SV_CUTOFF = 1e-8


@dataclass(frozen=True)
class FeatureModel:
    """Feature points in the target frame plus the focal length."""

    points: np.ndarray = field(default_factory=lambda: DEFAULT_FEATURE_POINTS.copy())
    focal_length: float = 1.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 4:
            raise ValueError("feature model needs at least 4 points of dimension 3")
        object.__setattr__(self, "points", pts)


def project_point(p_c: np.ndarray, focal_length: float = 1.0) -> np.ndarray:
    """Project a camera-frame point onto the image plane."""
    if p_c[1] <= 0.0:
        raise FeatureBehindCamera(f"feature depth {p_c[1]:.6f} is not positive")
    s = focal_length / p_c[1]
    return np.array([s * p_c[0], s * p_c[2]])


def visual_measurement(g_co: Pose, features: FeatureModel) -> np.ndarray:
    """Stacked image coordinates of all features for a target pose g_co."""
    out = np.empty(2 * len(features.points))
    for i, q in enumerate(features.points):
        out[2 * i:2 * i + 2] = project_point(g_co.apply(q), features.focal_length)
    return out


def image_jacobian(g_co: Pose, features: FeatureModel) -> np.ndarray:
    """Sensitivity of the measurement to a right-perturbation of g_co.

    For a small error e = (translation, rotation skew part) applied as
    g_co * perturb(e), the measurement moves by J @ e to first order.
    """
    lam = features.focal_length
    n = len(features.points)
    j = np.empty((2 * n, 6))
    for i, q in enumerate(features.points):
        x, y, z = g_co.apply(q)
        if y <= 0.0:
            raise FeatureBehindCamera(f"feature depth {y:.6f} is not positive")
        proj = (lam / y) * np.array([
            [1.0, -x / y, 0.0],
            [0.0, -z / y, 1.0],
        ])
        body = np.hstack([np.eye(3), -wedge(q)])
        j[2 * i:2 * i + 2] = proj @ g_co.r @ body
    return j


def pinv(j: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD with a relative cutoff."""
    u, s, vt = np.linalg.svd(j, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= _SV_CUTOFF * s[0]:
        raise DegenerateView("image Jacobian is rank deficient")
    return (vt.T / s) @ u.T


def recover_estimation_error(f_e: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Least-squares pose error explaining a measurement residual."""
    return pinv(j) @ f_e
