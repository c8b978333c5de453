"""Observer, control law, switching estimator and error bounds.

Notation: e_c is the control error (desired pose to estimated target pose),
e_e the estimation error (estimated to true target pose); e stacks them and
nu = N(R_ce) e is the combined error the passivity-based controller acts on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolation
from .geometry import (Pose, Twist, adjoint_rotation, compose, exp_se3,
                       rotation_angle, vec_transform)

_HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class ControllerGains:
    """Positive-definite gain blocks for the control and estimation errors."""

    kc: np.ndarray
    ke: np.ndarray

    @staticmethod
    def diagonal(kc: float, ke: float) -> "ControllerGains":
        return ControllerGains(kc * np.eye(6), ke * np.eye(6))

    def matrix(self) -> np.ndarray:
        k = np.zeros((12, 12))
        k[:6, :6] = self.kc
        k[6:, 6:] = self.ke
        return k

    def _isotropic(self):
        a, b = self.kc[0, 0], self.ke[0, 0]
        if (np.allclose(self.kc, a * np.eye(6))
                and np.allclose(self.ke, b * np.eye(6))):
            return a, b
        return None

    def min_eigenvalue(self, r_ce: np.ndarray) -> float:
        """Smallest eigenvalue of N^T K N for the current error rotation."""
        iso = self._isotropic()
        if iso is not None:
            # N^T K N is similar to I_6 kron [[a+b, -b], [-b, b]]
            a, b = iso
            tr, det = a + 2.0 * b, a * b
            return float(0.5 * (tr - np.sqrt(tr * tr - 4.0 * det)))
        n = error_transform(r_ce)
        return float(np.linalg.eigvalsh(n.T @ self.matrix() @ n)[0])


def error_transform(r_ce: np.ndarray) -> np.ndarray:
    """N(R_ce): maps the stacked error e to the controlled combination nu."""
    n = np.eye(12)
    n[6:, :6] = -adjoint_rotation(r_ce.T)
    return n


def control_errors(g_co_bar: Pose, g_d: Pose, e_e: np.ndarray,
                   strict: bool = True):
    """Control error, stacked error and nu for the current observer state.

    Returns (e, nu, g_ce). With strict=True a control-error rotation of
    pi/2 or more raises AssumptionViolation; with strict=False the caller
    is expected to check the angle itself.
    """
    rt = g_d.r.T
    g_ce = Pose(rt @ g_co_bar.r, rt @ (g_co_bar.p - g_d.p))
    if strict and rotation_angle(g_ce.r) >= _HALF_PI:
        raise AssumptionViolation("control error rotation reached pi/2")
    e = np.concatenate([vec_transform(g_ce), e_e])
    nu = error_transform(g_ce.r) @ e
    return e, nu, g_ce


def control_input(nu: np.ndarray, r_ce: np.ndarray, r_ee: np.ndarray,
                  mu: np.ndarray, gains: ControllerGains):
    """Camera and observer inputs: feedback on nu plus model compensation.

    The learned velocity mu is transported through the estimation- and
    control-error rotations before being subtracted.
    """
    t = adjoint_rotation(r_ee) @ mu
    u_c = -(gains.kc @ nu[:6]) - adjoint_rotation(r_ce) @ t
    u_e = -(gains.ke @ nu[6:]) - t
    return Twist.from_array(u_c), Twist.from_array(u_e)


def vmo_step(g_co_bar: Pose, v_wc: Twist, u_e: Twist, dt: float) -> Pose:
    """One observer update: drift by the camera motion, correct by u_e.

    Splits the flow of d/dt g = -wedge(V_wc) g - g wedge(u_e) into two
    exponentials, which keeps the estimate on the group at any step size.
    """
    return compose(exp_se3(-v_wc, dt), compose(g_co_bar, exp_se3(-u_e, dt)))


def storage_function(g_ce: Pose, g_ee: Pose) -> float:
    """Energy of the error pair: sum of 0.5 ||p||^2 + 0.5 tr(I - R)."""
    s = 0.0
    for g in (g_ce, g_ee):
        s += 0.5 * (g.p @ g.p) + 0.5 * np.trace(np.eye(3) - g.r)
    return float(s)


# -- switching estimation -----------------------------------------------------


def estimate_switching(models, x: np.ndarray, current: int, threshold: float,
                       variances=None):
    """Pick the model whose weighted posterior deviation is smallest.

    The current model is kept unless a candidate beats it by more than the
    hysteresis threshold. Returns (index, per-model normalized
    uncertainties). Precomputed posterior variances can be passed to avoid
    re-evaluating the models.
    """
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    uncs = np.empty(len(models))
    for k, model in enumerate(models):
        var = variances[k] if variances is not None else None
        uncs[k] = model.normalized_uncertainty(x, var=var)
    best = int(np.argmin(uncs))
    if uncs[current] > uncs[best] + threshold:
        return best, uncs
    return current, uncs


# -- ultimate-boundedness ellipses ---------------------------------------------


@dataclass(frozen=True)
class BoundParameters:
    """Inputs of the error-bound ellipses.

    mode selects the bound: "worst_case" uses a global model-error bound
    rho_bar; "per_model" uses the selected model's confidence interval with
    the Lipschitz constant split into position (lipschitz_pos) and rotation
    (lipschitz_rot) parts; "axis_known" assumes the rotation axis is known,
    which removes the additive rotation term.
    """

    mode: str = "axis_known"
    delta: float = 0.05
    lambda_k: float = 10.0
    lipschitz_pos: float = 8.0
    lipschitz_rot: float = 0.0
    rho_bar: float | None = None

    def __post_init__(self):
        if self.mode not in ("worst_case", "per_model", "axis_known"):
            raise ValueError(f"unknown bound mode {self.mode!r}")

    def lambda_k_tilde(self) -> float:
        if self.mode == "per_model":
            return self.lambda_k - self.lipschitz_pos
        return self.lambda_k - (self.lipschitz_pos + self.lipschitz_rot)


def ellipse_radius(params: BoundParameters, beta: np.ndarray | None = None,
                   sigma: np.ndarray | None = None) -> float:
    """Center offset c of the bounding ellipse for the active mode."""
    if params.mode == "worst_case":
        if params.rho_bar is None:
            raise ValueError("worst_case mode needs rho_bar")
        return params.rho_bar / (2.0 * params.lambda_k)
    lam_t = params.lambda_k_tilde()
    if lam_t <= 0.0:
        raise AssumptionViolation(
            f"lambda_k - Lipschitz = {lam_t:.3f} is not positive")
    c = float(np.linalg.norm(np.asarray(beta) * np.asarray(sigma))
              / (2.0 * lam_t))
    if params.mode == "per_model":
        c += np.pi * params.lipschitz_rot / lam_t
    return c


def ellipse_membership(e_c: np.ndarray, e_e: np.ndarray,
                       params: BoundParameters,
                       beta: np.ndarray | None = None,
                       sigma: np.ndarray | None = None):
    """Signed ellipse value E and membership flag for an error pair.

    E <= 0 means the error lies inside (or on) the bounding ellipse. For
    the model-based modes sigma is the posterior standard deviation of the
    selected model at the current input.
    """
    nc = float(np.linalg.norm(e_c))
    ne = float(np.linalg.norm(e_e))
    c = ellipse_radius(params, beta=beta, sigma=sigma)
    if params.mode == "worst_case":
        value = np.sqrt(nc * nc + (ne - c) ** 2) - c
    else:
        ratio = params.lambda_k_tilde() / params.lambda_k
        value = (np.sqrt(nc * nc + ratio * (ne - c) ** 2)
                 - np.sqrt(ratio) * c)
    # the two square roots cancel only up to roundoff at e = 0, which must
    # still count as inside
    return value <= 1e-12, float(value)


# -- Lipschitz constants -------------------------------------------------------


def lemma_lipschitz(model) -> np.ndarray:
    """Per-output Lipschitz bounds sigma_f sqrt(max lam) ||f_i||_k."""
    scale = model.hp.sigma_f * np.sqrt(model.hp.lam.max())
    return scale * model.rkhs_norm_surrogate()


def lipschitz_estimate(pairs, fn=None, model=None):
    """Empirical per-output Lipschitz ratios over sample pairs.

    pairs is (xa, xb) with matching rows. Returns (empirical, analytic)
    where analytic comes from the model's kernel bound, or None when no
    model is given. With a model, its posterior mean is the field.
    """
    xa, xb = (np.asarray(p, dtype=float) for p in pairs)
    if model is not None:
        fa, _ = model.posterior_batch(xa)
        fb, _ = model.posterior_batch(xb)
    else:
        fa = np.array([fn(x) for x in xa])
        fb = np.array([fn(x) for x in xb])
    dx = np.linalg.norm(xa - xb, axis=1)
    keep = dx > 1e-12
    ratios = np.abs(fa[keep] - fb[keep]) / dx[keep, None]
    empirical = ratios.max(axis=0)
    analytic = lemma_lipschitz(model) if model is not None else None
    return empirical, analytic
