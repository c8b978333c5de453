"""NumPy implementations of the numerical kernels.

These are the reference implementations; `_kernels.pyx` provides the same
functions compiled. Both backends must agree to floating-point roundoff, so
keep the operation order here boring and explicit.
"""

import numpy as np
from scipy.linalg import solve_triangular

BACKEND = "python"

_SMALL_ANGLE = 1e-8


def _wedge(w):
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def so3_exp(w):
    """Rodrigues map: rotation vector (3,) -> rotation matrix (3,3)."""
    w = np.asarray(w, dtype=float)
    theta = np.sqrt(w @ w)
    wh = _wedge(w)
    if theta < _SMALL_ANGLE:
        # second-order series keeps the map smooth through zero
        return np.eye(3) + wh + 0.5 * (wh @ wh)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * wh + b * (wh @ wh)


def se3_exp(xi, dt):
    """Exponential of a twist scaled by dt.

    xi is a 6-vector (linear, angular); returns (R, p) with
    R = exp(wedge(w)), p = V(w) v, for v = xi[:3]*dt, w = xi[3:]*dt.
    """
    xi = np.asarray(xi, dtype=float)
    v = xi[:3] * dt
    w = xi[3:] * dt
    theta = np.sqrt(w @ w)
    wh = _wedge(w)
    wh2 = wh @ wh
    if theta < _SMALL_ANGLE:
        R = np.eye(3) + wh + 0.5 * wh2
        V = np.eye(3) + 0.5 * wh + wh2 / 6.0
    else:
        s, c = np.sin(theta), np.cos(theta)
        R = np.eye(3) + (s / theta) * wh + ((1.0 - c) / theta**2) * wh2
        V = (np.eye(3) + ((1.0 - c) / theta**2) * wh
             + ((theta - s) / theta**3) * wh2)
    return R, V @ v


def sqexp_mat(xa, xb, lam, sf2):
    """Squared-exponential kernel matrix with diagonal precision lam."""
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    d = xa[:, None, :] - xb[None, :, :]
    q = np.einsum("ijk,k,ijk->ij", d, np.asarray(lam, dtype=float), d)
    return sf2 * np.exp(-0.5 * q)


def gp_eval(xtr, lam, sf2, alpha, chols, x):
    """Posterior mean and variance at one input.

    xtr: (m, d) training inputs; alpha: (m, q) presolved weights per output;
    chols: (q, m, m) lower Cholesky factors of (K + noise_i I); x: (d,).
    Returns (mean (q,), variance (q,)).
    """
    xtr = np.asarray(xtr, dtype=float)
    d = xtr - np.asarray(x, dtype=float)
    ks = sf2 * np.exp(-0.5 * ((d * d) @ np.asarray(lam, dtype=float)))
    mean = ks @ alpha
    q = alpha.shape[1]
    var = np.empty(q)
    for i in range(q):
        z = solve_triangular(chols[i], ks, lower=True, check_finite=False)
        var[i] = sf2 - z @ z
    return mean, var


def lml_total(x, y, lam, sf2, sn2, jitter):
    """Sum of per-output log marginal likelihoods; -inf if not factorizable."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = x.shape[0]
    k = sqexp_mat(x, x, lam, sf2)
    total = 0.0
    for i in range(y.shape[1]):
        c = k + (sn2[i] + jitter) * np.eye(m)
        try:
            low = np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            return -np.inf
        z = solve_triangular(low, y[:, i], lower=True, check_finite=False)
        total += (-0.5 * (z @ z) - np.log(np.diag(low)).sum()
                  - 0.5 * m * np.log(2.0 * np.pi))
    return float(total)
