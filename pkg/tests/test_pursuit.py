import numpy as np
import pytest
from scipy.linalg import expm

from gppursuit.errors import AssumptionViolation
from gppursuit.geometry import (Pose, Twist, adjoint_rotation, compose,
                                inverse, relative, so3_exp, vec_transform,
                                wedge)
from gppursuit.pursuit import (BoundParameters, ControllerGains,
                               control_errors, control_input,
                               ellipse_membership, ellipse_radius,
                               error_transform, estimate_switching,
                               lemma_lipschitz, lipschitz_estimate,
                               storage_function, vmo_step)


def test_error_transform_structure():
    r = so3_exp(np.array([0.2, -0.1, 0.5]))
    n = error_transform(r)
    assert np.array_equal(n[:6, :6], np.eye(6))
    assert np.array_equal(n[6:, 6:], np.eye(6))
    assert np.allclose(n[6:, :6], -adjoint_rotation(r.T))
    assert np.array_equal(n[:6, 6:], np.zeros((6, 6)))


def test_min_eigenvalue_isotropic_closed_form():
    gains = ControllerGains.diagonal(10.0, 17.0)
    r = so3_exp(np.array([0.0, 0.0, 0.8]))
    lam = gains.min_eigenvalue(r)
    # closed form for kc=10, ke=17: 0.5*(44 - sqrt(44^2 - 4*170))
    assert np.isclose(lam, 4.279954853330651, atol=1e-12)
    n = error_transform(r)
    assert np.isclose(lam, np.linalg.eigvalsh(n.T @ gains.matrix() @ n)[0],
                      atol=1e-9)


def test_min_eigenvalue_general_gains():
    kc = np.diag([10.0, 12.0, 10.0, 9.0, 10.0, 11.0])
    ke = np.diag([17.0, 15.0, 17.0, 18.0, 17.0, 16.0])
    gains = ControllerGains(kc, ke)
    r = so3_exp(np.array([0.3, 0.2, -0.4]))
    n = error_transform(r)
    assert np.isclose(gains.min_eigenvalue(r),
                      np.linalg.eigvalsh(n.T @ gains.matrix() @ n)[0])


def test_control_errors_at_goal_and_displaced():
    g_d = Pose(np.eye(3), np.array([0.0, 2.0, 0.0]))
    e, nu, g_ce = control_errors(g_d, g_d, np.zeros(6))
    assert np.allclose(e, 0.0) and np.allclose(nu, 0.0)
    g_obs = Pose(np.eye(3), np.array([0.0, 1.0, 0.0]))
    e, nu, g_ce = control_errors(g_obs, g_d, np.zeros(6))
    assert np.allclose(g_ce.p, [0.0, -1.0, 0.0])
    assert np.allclose(e[:6], [0.0, -1.0, 0.0, 0.0, 0.0, 0.0])
    # nu_e = -Ad_{R^T} e_c + e_e with R = I here
    assert np.allclose(nu[6:], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0])


def test_control_errors_strict_rotation_guard():
    g_d = Pose(np.eye(3), np.zeros(3))
    g_obs = Pose(so3_exp(np.array([0.0, 0.0, 1.8])), np.zeros(3))
    with pytest.raises(AssumptionViolation):
        control_errors(g_obs, g_d, np.zeros(6))
    e, nu, g_ce = control_errors(g_obs, g_d, np.zeros(6), strict=False)
    assert np.isfinite(nu).all()


def test_control_input_matches_formula():
    rng = np.random.default_rng(30)
    gains = ControllerGains.diagonal(10.0, 17.0)
    nu = rng.normal(size=12)
    r_ce = so3_exp(rng.normal(size=3) * 0.3)
    r_ee = so3_exp(rng.normal(size=3) * 0.2)
    mu = rng.normal(size=6)
    u_c, u_e = control_input(nu, r_ce, r_ee, mu, gains)
    t = adjoint_rotation(r_ee) @ mu
    assert np.allclose(u_c.as_array(), -10.0 * nu[:6] - adjoint_rotation(r_ce) @ t)
    assert np.allclose(u_e.as_array(), -17.0 * nu[6:] - t)
    # without compensation the law is pure feedback
    u_c0, u_e0 = control_input(nu, r_ce, r_ee, np.zeros(6), gains)
    assert np.allclose(u_c0.as_array(), -10.0 * nu[:6])
    assert np.allclose(u_e0.as_array(), -17.0 * nu[6:])


def homogeneous(g: Pose) -> np.ndarray:
    h = np.eye(4)
    h[:3, :3] = g.r
    h[:3, 3] = g.p
    return h


def twist_hat(xi: Twist) -> np.ndarray:
    h = np.zeros((4, 4))
    h[:3, :3] = wedge(xi.angular)
    h[:3, 3] = xi.linear
    return h


def test_vmo_step_is_exact_flow():
    # d/dt g = -hat(V) g - g hat(u) with constant inputs has the solution
    # expm(-hat(V) t) g0 expm(-hat(u) t); the observer step must match it
    rng = np.random.default_rng(31)
    for _ in range(20):
        g0 = Pose(so3_exp(rng.normal(size=3)), rng.normal(size=3))
        v = Twist.from_array(rng.normal(size=6))
        u = Twist.from_array(rng.normal(size=6))
        dt = 0.05
        ref = expm(-twist_hat(v) * dt) @ homogeneous(g0) @ expm(-twist_hat(u) * dt)
        g1 = vmo_step(g0, v, u, dt)
        assert np.allclose(g1.r, ref[:3, :3], atol=1e-12)
        assert np.allclose(g1.p, ref[:3, 3], atol=1e-12)


def test_storage_function_values():
    ident = Pose.identity()
    assert storage_function(ident, ident) == 0.0
    g = Pose(so3_exp(np.array([0.0, 0.0, np.pi / 2])), np.array([2.0, 0.0, 0.0]))
    # 0.5*||p||^2 + 0.5*tr(I - R) with tr(R) = 1 for a quarter turn
    assert np.isclose(storage_function(g, ident), 2.0 + 1.0)


def test_closed_loop_storage_decreases_without_target_motion():
    # stationary target, perfect error recovery, no compensation: the storage
    # function must decrease monotonically to zero
    gains = ControllerGains.diagonal(10.0, 17.0)
    g_d = Pose(np.eye(3), np.array([0.0, 2.0, 0.0]))
    g_wo = Pose(so3_exp(np.array([0.0, 0.0, 0.3])), np.array([0.5, 0.5, 0.0]))
    g_wc = Pose(np.eye(3), np.array([0.0, -2.5, 0.0]))
    g_bar = Pose(np.eye(3), np.array([0.0, 1.5, 0.0]))
    dt = 0.02
    values = []
    for _ in range(250):
        g_co = relative(g_wc, g_wo)
        g_ee = relative(g_bar, g_co)
        e_e = vec_transform(g_ee)
        e, nu, g_ce = control_errors(g_bar, g_d, e_e)
        u_c, u_e = control_input(nu, g_ce.r, g_ee.r, np.zeros(6), gains)
        from gppursuit.geometry import adjoint, exp_se3, step_pose
        v_wc = Twist.from_array(-(adjoint(g_d) @ u_c.as_array()))
        values.append(storage_function(g_ce, g_ee))
        g_wc = step_pose(g_wc, v_wc, dt)
        g_bar = vmo_step(g_bar, v_wc, u_e, dt)
    values = np.array(values)
    assert np.all(np.diff(values) <= 1e-3 * dt)
    assert values[-1] < 1e-8


class StubModel:
    def __init__(self, value):
        self.value = value

    def normalized_uncertainty(self, x, var=None):
        return self.value


class NoPosteriorModel(StubModel):
    def normalized_uncertainty(self, x, var=None):
        assert var is not None, "precomputed variances must be used"
        return self.value


def test_estimate_switching_hysteresis():
    models = [StubModel(0.50), StubModel(0.46)]
    # 0.50 <= 0.46 + 0.05: the current model survives
    idx, uncs = estimate_switching(models, np.zeros(6), 0, 0.05)
    assert idx == 0
    assert np.allclose(uncs, [0.50, 0.46])
    # beyond the threshold the better model takes over
    models[0].value = 0.52
    idx, _ = estimate_switching(models, np.zeros(6), 0, 0.05)
    assert idx == 1
    # the winner then keeps its place
    idx, _ = estimate_switching(models, np.zeros(6), 1, 0.05)
    assert idx == 1


def test_estimate_switching_tie_keeps_current():
    models = [StubModel(0.4), StubModel(0.4)]
    assert estimate_switching(models, np.zeros(6), 1, 0.0)[0] == 1


def test_estimate_switching_threshold_validation():
    models = [StubModel(0.4), StubModel(0.3)]
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            estimate_switching(models, np.zeros(6), 0, bad)


def test_estimate_switching_uses_precomputed_variances():
    models = [NoPosteriorModel(0.3), NoPosteriorModel(0.6)]
    variances = [np.ones(6), np.ones(6)]
    idx, _ = estimate_switching(models, np.zeros(6), 1, 0.05,
                                variances=variances)
    assert idx == 0


def test_bound_parameters_modes():
    assert BoundParameters().lambda_k_tilde() == 2.0
    per = BoundParameters(mode="per_model", lipschitz_pos=3.0,
                          lipschitz_rot=1.0)
    assert per.lambda_k_tilde() == 7.0
    with pytest.raises(ValueError):
        BoundParameters(mode="nonsense")


def test_ellipse_radius_values():
    beta = np.ones(6)
    sigma = np.full(6, 0.1)
    c = ellipse_radius(BoundParameters(), beta=beta, sigma=sigma)
    assert np.isclose(c, 0.1 * np.sqrt(6.0) / 4.0)
    per = BoundParameters(mode="per_model", lipschitz_pos=8.0,
                          lipschitz_rot=0.5)
    c2 = ellipse_radius(per, beta=beta, sigma=sigma)
    assert np.isclose(c2, 0.1 * np.sqrt(6.0) / 4.0 + np.pi * 0.5 / 2.0)
    wc = BoundParameters(mode="worst_case", rho_bar=3.0)
    assert np.isclose(ellipse_radius(wc), 3.0 / 20.0)
    with pytest.raises(ValueError):
        ellipse_radius(BoundParameters(mode="worst_case"))


def test_ellipse_radius_rejects_nonpositive_margin():
    tight = BoundParameters(lambda_k=8.0, lipschitz_pos=8.0)
    with pytest.raises(AssumptionViolation):
        ellipse_radius(tight, beta=np.ones(6), sigma=np.ones(6))


def test_ellipse_membership_zero_error_on_boundary():
    # at e = 0 the ellipse value is exactly zero, which counts as inside
    inside, value = ellipse_membership(np.zeros(6), np.zeros(6),
                                       BoundParameters(), beta=np.ones(6),
                                       sigma=np.full(6, 0.1))
    assert inside
    assert np.isclose(value, 0.0, atol=1e-15)


def test_ellipse_membership_far_point_outside():
    inside, value = ellipse_membership(np.full(6, 10.0), np.zeros(6),
                                       BoundParameters(), beta=np.ones(6),
                                       sigma=np.full(6, 0.1))
    assert not inside and value > 0.0


def test_ellipse_membership_worst_case_formula():
    params = BoundParameters(mode="worst_case", rho_bar=4.0)
    e_c = np.array([0.3, 0.0, 0.0, 0.0, 0.0, 0.0])
    e_e = np.array([0.1, 0.0, 0.0, 0.0, 0.0, 0.0])
    inside, value = ellipse_membership(e_c, e_e, params)
    c = 4.0 / 20.0
    ref = np.sqrt(0.09 + (0.1 - c) ** 2) - c
    assert np.isclose(value, ref)
    assert inside == (ref <= 0.0)


def test_lipschitz_bound_holds_for_fitted_models(switched_models):
    rng = np.random.default_rng(32)
    xa = rng.uniform(-3.0, 3.0, size=(10000, 6))
    xb = rng.uniform(-3.0, 3.0, size=(10000, 6))
    xa[:, 2:5] = 0.0
    xb[:, 2:5] = 0.0
    for model in switched_models:
        empirical, analytic = lipschitz_estimate((xa, xb), model=model)
        assert np.all(empirical <= analytic)
        assert np.array_equal(analytic, lemma_lipschitz(model))


def test_lipschitz_estimate_with_plain_function():
    xa = np.zeros((3, 6))
    xb = np.zeros((3, 6))
    xb[:, 0] = [1.0, 2.0, 0.5]
    empirical, analytic = lipschitz_estimate(
        (xa, xb), fn=lambda x: np.full(6, 2.0 * x[0]))
    assert np.allclose(empirical, 2.0)
    assert analytic is None
