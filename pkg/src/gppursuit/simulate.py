"""Closed-loop pursuit simulation and the training/evaluation helpers.

The camera chases a target whose body velocity follows one of several
motion profiles; a visual motion observer estimates the relative pose from
feature projections, a Gaussian-process model of the active profile
compensates the target's motion, and a variance-based estimator tracks
which profile is active.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, DegenerateView, FeatureBehindCamera
from .geometry import (Pose, Twist, adjoint, compose, gcheck, project_rotation,
                       relative, rotation_angle, rotation_from_small_error,
                       step_pose, vec_transform)
from .gpmodel import Dataset, GpModel, fit_hyperparameters
from .motion import (WORLD_STEP, SwitchSchedule, limit_cycle_inputs,
                     sample_training_data)
from .pursuit import (BoundParameters, ControllerGains, control_errors,
                      control_input, ellipse_membership, estimate_switching,
                      storage_function, vmo_step)
from .vision import FeatureModel, image_jacobian, pinv, visual_measurement

_REORTHONORMALIZE_EVERY = 1000


@dataclass
class Scenario:
    """Everything one closed-loop run needs, models included."""

    g_wo0: Pose
    g_wc0: Pose
    g_co_bar0: Pose
    g_d: Pose
    gains: ControllerGains
    features: FeatureModel
    profiles: list
    schedule: SwitchSchedule
    models: list[GpModel]
    switched: bool = True
    threshold: float = 0.05
    dt: float = 0.02
    duration: float = 20.0
    bound: BoundParameters = field(default_factory=BoundParameters)
    pixel_noise: float = 0.0
    seed: int = 0
    on_violation: str = "continue"  # or "abort"

    def __post_init__(self):
        if self.dt <= 0.0 or self.duration <= 0.0:
            raise ValueError("dt and duration must be positive")
        if self.on_violation not in ("continue", "abort"):
            raise ValueError("on_violation must be 'continue' or 'abort'")
        if not self.models:
            raise ValueError("at least one model is required")
        if self.switched and len(self.models) != len(self.profiles):
            raise ValueError("switched runs need one model per profile")


@dataclass
class Trace:
    """Per-step record of a run; array fields have one row per step."""

    t: np.ndarray
    g_wo: np.ndarray
    g_wc: np.ndarray
    g_co_bar: np.ndarray
    e_c: np.ndarray
    e_e: np.ndarray
    nu: np.ndarray
    u: np.ndarray
    psi_true: np.ndarray
    psi_est: np.ndarray
    storage: np.ndarray
    ellipse: np.ndarray
    inside: np.ndarray
    uncertainty: np.ndarray
    lambda_k: np.ndarray
    events: list = field(default_factory=list)
    true_switches: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def e_norm(self) -> np.ndarray:
        return np.sqrt((self.e_c ** 2).sum(axis=1) + (self.e_e ** 2).sum(axis=1))

    def estimated_switches(self):
        """Times at which the estimated profile index changed."""
        idx = np.nonzero(np.diff(self.psi_est))[0] + 1
        return [float(self.t[i]) for i in idx]

    def to_csv(self, path) -> None:
        n_models = self.uncertainty.shape[1]
        cols = ["t"]
        for name in ("wo", "wc", "co"):
            cols += [f"{name}_{c}" for c in ("px", "py", "pz", "rx", "ry", "rz")]
        cols += [f"ec_{i}" for i in range(1, 7)]
        cols += [f"ee_{i}" for i in range(1, 7)]
        cols += [f"nu_{i}" for i in range(1, 13)]
        cols += [f"u_{i}" for i in range(1, 13)]
        cols += ["psi_true", "psi_est", "s", "ellipse", "inside"]
        cols += [f"unc_{i}" for i in range(1, n_models + 1)]
        cols += ["lambda_k"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for k in range(self.t.size):
                row = [repr(float(self.t[k]))]
                for arr in (self.g_wo, self.g_wc, self.g_co_bar, self.e_c,
                            self.e_e, self.nu, self.u):
                    row += [repr(float(v)) for v in arr[k]]
                row += [str(int(self.psi_true[k])), str(int(self.psi_est[k]))]
                row += [repr(float(self.storage[k])),
                        repr(float(self.ellipse[k])),
                        str(int(self.inside[k]))]
                row += [repr(float(v)) for v in self.uncertainty[k]]
                row += [repr(float(self.lambda_k[k]))]
                fh.write(",".join(row) + "\n")


def mse(trace: Trace) -> float:
    """Mean squared norm of the stacked error over the whole trace."""
    return float(np.mean(trace.e_norm ** 2))


def _advance_target(g_wo, schedule, profiles, t, dt):
    # the target evolves continuously between control samples, so its field is
    # integrated at WORLD_STEP resolution with the switch checked per substep
    n = max(1, int(np.ceil(dt / WORLD_STEP - 1e-12)))
    h = dt / n
    for i in range(n):
        psi = schedule.step(t + i * h, g_wo.p)
        g_wo = profiles[psi].flow_step(g_wo, h)
    return g_wo


def run_scenario(scn: Scenario) -> Trace:
    """Simulate the closed loop at a fixed step dt and record everything.

    Controls computed at step k act over [t_k, t_k + dt); the recorded row
    holds the state at t_k together with those controls. Assumption
    violations are recorded as events and, with on_violation="abort",
    raised.
    """
    started = time.perf_counter()
    n_steps = int(round(scn.duration / scn.dt))
    n_rows = n_steps + 1
    n_models = len(scn.models)
    rng = np.random.default_rng(scn.seed) if scn.pixel_noise > 0.0 else None

    tr = Trace(
        t=np.arange(n_rows) * scn.dt,
        g_wo=np.empty((n_rows, 6)), g_wc=np.empty((n_rows, 6)),
        g_co_bar=np.empty((n_rows, 6)),
        e_c=np.empty((n_rows, 6)), e_e=np.empty((n_rows, 6)),
        nu=np.empty((n_rows, 12)), u=np.empty((n_rows, 12)),
        psi_true=np.empty(n_rows, dtype=int), psi_est=np.empty(n_rows, dtype=int),
        storage=np.empty(n_rows), ellipse=np.empty(n_rows),
        inside=np.empty(n_rows, dtype=int),
        uncertainty=np.empty((n_rows, n_models)), lambda_k=np.empty(n_rows),
    )

    def flag(step, code, message):
        tr.events.append((step, code, message))
        if scn.on_violation == "abort":
            raise AssumptionViolation(f"step {step}: {message}")

    g_wo, g_wc, g_co_bar = scn.g_wo0, scn.g_wc0, scn.g_co_bar0
    scn.schedule.reset()
    psi_est = None
    e_e_hat = np.zeros(6)
    ellipse_broken = False

    for k in range(n_rows):
        t = float(tr.t[k])
        psi = scn.schedule.step(t, g_wo.p)
        g_co = relative(g_wc, g_wo)

        # vision: residual between measured and predicted projections
        try:
            f_meas = visual_measurement(g_co, scn.features)
            if rng is not None:
                f_meas = f_meas + rng.normal(0.0, scn.pixel_noise, f_meas.shape)
            f_e = f_meas - visual_measurement(g_co_bar, scn.features)
            e_e_hat = pinv(image_jacobian(g_co_bar, scn.features)) @ f_e
        except (FeatureBehindCamera, DegenerateView) as exc:
            flag(k, "vision", str(exc))
            e_e_hat = np.zeros(6)

        w = e_e_hat[3:]
        wn = float(np.linalg.norm(w))
        if wn > 1.0:
            flag(k, "estimation-rotation", f"recovered rotation norm {wn:.3f}")
            e_e_hat = e_e_hat.copy()
            e_e_hat[3:] *= (1.0 - 1e-12) / wn
        r_ee_hat = rotation_from_small_error(e_e_hat[3:])

        # model selection and compensation at the estimated target pose
        x_bar = gcheck(compose(g_wc, g_co_bar))
        means = np.empty((n_models, 6))
        variances = np.empty((n_models, 6))
        for j, model in enumerate(scn.models):
            means[j], variances[j] = model.posterior(x_bar)
        if scn.switched:
            if psi_est is None:
                psi_est = int(np.argmin([m.normalized_uncertainty(x_bar, var=v)
                                         for m, v in zip(scn.models, variances)]))
            psi_est, uncs = estimate_switching(scn.models, x_bar, psi_est,
                                               scn.threshold, variances=variances)
        else:
            psi_est = 0
            uncs = np.array([m.normalized_uncertainty(x_bar, var=v)
                             for m, v in zip(scn.models, variances)])
        mu = means[psi_est]

        e, nu, g_ce = control_errors(g_co_bar, scn.g_d, e_e_hat, strict=False)
        if rotation_angle(g_ce.r) >= 0.5 * np.pi:
            flag(k, "control-rotation", "control error rotation reached pi/2")
        u_c, u_e = control_input(nu, g_ce.r, r_ee_hat, mu, scn.gains)
        v_wc = Twist.from_array(-(adjoint(scn.g_d) @ u_c.as_array()))

        # ground-truth instrumentation
        g_ee = relative(g_co_bar, g_co)
        e_c_true = vec_transform(g_ce)
        e_e_true = vec_transform(g_ee)
        sel = scn.models[psi_est]
        try:
            ins, ev = ellipse_membership(
                e_c_true, e_e_true, scn.bound, beta=sel.beta,
                sigma=np.sqrt(np.maximum(variances[psi_est], 0.0)))
        except (AssumptionViolation, ValueError) as exc:
            if not ellipse_broken:
                flag(k, "bound", str(exc))
                ellipse_broken = True
            ins, ev = False, np.nan

        tr.g_wo[k] = gcheck(g_wo)
        tr.g_wc[k] = gcheck(g_wc)
        tr.g_co_bar[k] = gcheck(g_co_bar)
        tr.e_c[k] = e_c_true
        tr.e_e[k] = e_e_true
        tr.nu[k] = nu
        tr.u[k] = np.concatenate([u_c.as_array(), u_e.as_array()])
        tr.psi_true[k] = psi
        tr.psi_est[k] = psi_est
        tr.storage[k] = storage_function(g_ce, g_ee)
        tr.ellipse[k] = ev
        tr.inside[k] = int(ins)
        tr.uncertainty[k] = uncs
        tr.lambda_k[k] = scn.gains.min_eigenvalue(g_ce.r)

        if k == n_steps:
            break
        g_wo = _advance_target(g_wo, scn.schedule, scn.profiles, t, scn.dt)
        g_wc = step_pose(g_wc, v_wc, scn.dt)
        g_co_bar = vmo_step(g_co_bar, v_wc, u_e, scn.dt)
        if (k + 1) % _REORTHONORMALIZE_EVERY == 0:
            g_wo = Pose(project_rotation(g_wo.r), g_wo.p)
            g_wc = Pose(project_rotation(g_wc.r), g_wc.p)
            g_co_bar = Pose(project_rotation(g_co_bar.r), g_co_bar.p)

    tr.true_switches = list(scn.schedule.switch_times)
    tr.elapsed = time.perf_counter() - started
    return tr


# -- training ------------------------------------------------------------------


def domain_samples(extent: float = 3.5, n_pos: int = 9,
                   n_heading: int = 8) -> np.ndarray:
    """Grid of pose vectors covering the operating region, z and tilt zero."""
    px = np.linspace(-extent, extent, n_pos)
    th = np.linspace(-np.pi, np.pi, n_heading, endpoint=False)
    out = np.zeros((n_pos * n_pos * n_heading, 6))
    i = 0
    for x in px:
        for y in px:
            for h in th:
                out[i, 0], out[i, 1], out[i, 5] = x, y, h
                i += 1
    return out


def generate_training(profiles, n_per_profile: int, noise_std,
                      dt: float = 0.02, seed: int = 0,
                      start: Pose | None = None) -> list[Dataset]:
    """One noisy dataset per profile, sampled along its limit cycle."""
    out = []
    for k, profile in enumerate(profiles):
        inputs = limit_cycle_inputs(profile, n_per_profile, dt=dt, start=start)
        out.append(sample_training_data(profile, inputs, noise_std,
                                        seed=[seed, k]))
    return out


def _finalize(model: GpModel, alpha_bar, domain) -> GpModel:
    model.attach_switching(alpha_bar, domain)
    return model


def train_switched(datasets, delta: float = 0.05, alpha_bar=None,
                   domain=None, seed: int = 0, restarts: int = 8,
                   noise_std=None) -> list[GpModel]:
    """Fit one model per profile dataset."""
    alpha_bar = np.array([0, 1, 0, 0, 0, 0.]) if alpha_bar is None else alpha_bar
    domain = domain_samples() if domain is None else domain
    models = []
    for k, data in enumerate(datasets):
        hp = fit_hyperparameters(data, seed=seed * 997 + k, restarts=restarts,
                                 noise_std=noise_std)
        models.append(_finalize(GpModel(data, hp, delta), alpha_bar, domain))
    return models


def train_single(datasets, delta: float = 0.05, alpha_bar=None,
                 domain=None, seed: int = 0, restarts: int = 8,
                 noise_std=None) -> GpModel:
    """Fit one model to the concatenation of all profile datasets."""
    alpha_bar = np.array([0, 1, 0, 0, 0, 0.]) if alpha_bar is None else alpha_bar
    domain = domain_samples() if domain is None else domain
    data = Dataset.concatenate(datasets)
    hp = fit_hyperparameters(data, seed=seed * 997 + 613, restarts=restarts,
                             noise_std=noise_std)
    return _finalize(GpModel(data, hp, delta), alpha_bar, domain)


def rho_bar_estimate(models, profiles, samples) -> float:
    """Largest model error over the samples, any profile against any model."""
    samples = np.asarray(samples, dtype=float)
    worst = 0.0
    for profile in profiles:
        truth = np.array([profile.velocity(x).as_array() for x in samples])
        for model in models:
            mean, _ = model.posterior_batch(samples)
            worst = max(worst, float(np.linalg.norm(truth - mean, axis=1).max()))
    return worst


# -- reporting -----------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """How the trace relates to its boundedness ellipse."""

    first_entry: float | None
    fraction_inside: float
    max_error_after_entry: float


def bound_report(trace: Trace) -> BoundReport:
    inside = trace.inside.astype(bool)
    if not inside.any():
        return BoundReport(None, 0.0, float("nan"))
    k0 = int(np.argmax(inside))
    frac = float(inside[k0:].mean())
    return BoundReport(float(trace.t[k0]), frac,
                       float(trace.e_norm[k0:].max()))
