"""Target motion profiles and the true switching signal.

A profile is a planar velocity field: world-frame rates (ax, ay) plus a yaw
rate wz, turned into a body twist for a pose in vector form. The Van der Pol
family yields the limit cycles used for training and simulation; tabulated
fields can be loaded from a CSV grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geometry import Pose, Twist, gcheck, so3_exp
from .gpmodel import Dataset

_DEGENERATE_SPEED2 = 1e-12


# world integration substep; the control period is subdivided into steps of
# at most this length so the target stays on the continuous-time orbit
WORLD_STEP = 1e-3


class MotionProfile:
    """Base class: subclasses provide planar_rates(p) -> (ax, ay, wz)."""

    def planar_rates(self, p: np.ndarray):
        raise NotImplementedError

    def velocity(self, gc: np.ndarray) -> Twist:
        """Body twist at a pose vector (translation, axis * angle)."""
        gc = np.asarray(gc, dtype=float)
        ax, ay, wz = self.planar_rates(gc[:3])
        r = so3_exp(gc[3:])
        return Twist(r.T @ np.array([ax, ay, 0.0]), np.array([0.0, 0.0, wz]))

    def flow_step(self, g: Pose, h: float) -> Pose:
        """One explicit substep of length h along the field."""
        ax, ay, wz = self.planar_rates(g.p)
        p = g.p + h * np.array([ax, ay, 0.0])
        r = g.r @ so3_exp(np.array([0.0, 0.0, wz * h]))
        return Pose(r, p)

    def flow(self, g: Pose, dt: float, max_step: float = WORLD_STEP) -> Pose:
        """Advance a pose by dt, substepping at most max_step at a time."""
        n = max(1, int(np.ceil(dt / max_step - 1e-12)))
        h = dt / n
        for _ in range(n):
            g = self.flow_step(g, h)
        return g


@dataclass(frozen=True)
class VanDerPolProfile(MotionProfile):
    """Van der Pol oscillator in the horizontal plane.

    ax = v p_y,  ay = -v p_x + v eta (1 - p_x^2) p_y; the yaw rate is the
    rate of change of atan2(ax, ay) along the flow, zero at stationary
    points.
    """

    eta: float
    v: float

    def planar_rates(self, p: np.ndarray):
        px, py = p[0], p[1]
        ax = self.v * py
        ay = -self.v * px + self.v * self.eta * (1.0 - px * px) * py
        speed2 = ax * ax + ay * ay
        if speed2 < _DEGENERATE_SPEED2:
            return ax, ay, 0.0
        # chain rule along the flow: da = (da/dp) @ (ax, ay)
        dax = self.v * ay
        day = ((-self.v - 2.0 * self.v * self.eta * px * py) * ax
               + self.v * self.eta * (1.0 - px * px) * ay)
        wz = (dax * ay - ax * day) / speed2
        return ax, ay, wz


@dataclass(frozen=True)
class TabulatedProfile(MotionProfile):
    """Velocity field given on a regular (x, y) grid, bilinearly interpolated."""

    grid_x: np.ndarray
    grid_y: np.ndarray
    values: np.ndarray  # shape (nx, ny, 3): ax, ay, wz

    def __post_init__(self):
        interp = RegularGridInterpolator(
            (np.asarray(self.grid_x, dtype=float),
             np.asarray(self.grid_y, dtype=float)),
            np.asarray(self.values, dtype=float),
            method="linear", bounds_error=False, fill_value=None)
        object.__setattr__(self, "_interp", interp)

    def planar_rates(self, p: np.ndarray):
        ax, ay, wz = self._interp([p[0], p[1]])[0]
        if ax * ax + ay * ay < _DEGENERATE_SPEED2:
            return ax, ay, 0.0
        return ax, ay, wz

    @staticmethod
    def from_csv(path) -> "TabulatedProfile":
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if raw.shape[1] != 5:
            raise ValueError("tabulated profile needs columns x,y,ax,ay,wz")
        xs = np.unique(raw[:, 0])
        ys = np.unique(raw[:, 1])
        if xs.size * ys.size != raw.shape[0]:
            raise ValueError("tabulated profile points do not form a grid")
        order = np.lexsort((raw[:, 1], raw[:, 0]))
        vals = raw[order, 2:].reshape(xs.size, ys.size, 3)
        return TabulatedProfile(xs, ys, vals)


# -- switching signal ---------------------------------------------------------


@dataclass
class PositionTrigger:
    """Fires when the target enters a ball; re-arms outside a larger shell."""

    point: np.ndarray
    tol: float = 0.05
    to: int | None = None  # target profile index; None cycles to the next
    rearm: float | None = None

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        if self.rearm is None:
            self.rearm = 2.0 * self.tol


@dataclass
class TimeTrigger:
    """Fires at the first step with t >= at (left-closed)."""

    at: float
    to: int | None = None


@dataclass
class SwitchSchedule:
    """True profile index over time, driven by position and time triggers."""

    n_profiles: int
    initial: int = 0
    triggers: list = dc_field(default_factory=list)

    def __post_init__(self):
        self.reset()

    def reset(self) -> None:
        self.current = self.initial
        self.switch_times: list[float] = []
        self._armed = [True] * len(self.triggers)
        self._primed = False

    def _advance(self, trig, t: float) -> None:
        new = trig.to if trig.to is not None else (self.current + 1) % self.n_profiles
        if new != self.current:
            self.current = new
            self.switch_times.append(t)

    def step(self, t: float, p_wo: np.ndarray) -> int:
        """Update and return the active profile index at time t."""
        if not self._primed:
            # a trigger fires on arrival; one whose ball already contains the
            # start position stays quiet until the target leaves and returns
            self._primed = True
            for k, trig in enumerate(self.triggers):
                if (isinstance(trig, PositionTrigger)
                        and float(np.linalg.norm(p_wo - trig.point)) <= trig.rearm):
                    self._armed[k] = False
        for k, trig in enumerate(self.triggers):
            if isinstance(trig, TimeTrigger):
                if self._armed[k] and t >= trig.at:
                    self._armed[k] = False
                    self._advance(trig, t)
            else:
                dist = float(np.linalg.norm(p_wo - trig.point))
                if self._armed[k] and dist < trig.tol:
                    self._armed[k] = False
                    self._advance(trig, t)
                elif not self._armed[k] and dist > trig.rearm:
                    self._armed[k] = True
        return self.current


def switching_signal(schedule: SwitchSchedule, t: float, g_wo: Pose) -> int:
    return schedule.step(t, g_wo.p)


# -- training data ------------------------------------------------------------


# keyed by (profile, n, dt, start); only hashable profiles participate
_CYCLE_CACHE: dict = {}


def limit_cycle_inputs(profile: MotionProfile, n: int, dt: float = 0.02,
                       start: Pose | None = None, settle_time: float = 60.0,
                       max_time: float = 400.0) -> np.ndarray:
    """Pose vectors sampled equispaced in time along the profile's limit cycle.

    The profile is integrated alone (same substepped stepping the simulator
    uses for the target) from `start` until it settles, one period is measured
    via an upward crossing of the y axis on the left half-plane, and n samples
    are taken over that period at the control rate.
    """
    g = start if start is not None else Pose(np.eye(3), np.array([-2.0, 0.0, 0.0]))
    key = None
    try:
        key = (profile, n, dt, settle_time, tuple(np.round(gcheck(g), 12)))
        hit = _CYCLE_CACHE.get(key)
        if hit is not None:
            return hit.copy()
    except TypeError:
        pass

    steps_settle = int(round(settle_time / dt))
    for _ in range(steps_settle):
        g = profile.flow(g, dt)

    loop: list[np.ndarray] = []
    crossings = 0
    prev_y = g.p[1]
    max_steps = int(round(max_time / dt))
    for _ in range(max_steps):
        if crossings == 1:
            loop.append(gcheck(g))
        g = profile.flow(g, dt)
        y = g.p[1]
        if prev_y < 0.0 <= y and g.p[0] < 0.0:
            crossings += 1
            if crossings == 2:
                break
        prev_y = y
    if crossings < 2:
        raise ValueError("no closed orbit found; the profile may not cycle")
    idx = np.floor(np.arange(n) * len(loop) / n).astype(int)
    out = np.array([loop[i] for i in idx])
    if key is not None:
        _CYCLE_CACHE[key] = out.copy()
    return out


def sample_training_data(profile: MotionProfile, inputs: np.ndarray,
                         noise_std, seed: int = 0) -> Dataset:
    """Evaluate the field at the given pose vectors and add Gaussian noise."""
    inputs = np.asarray(inputs, dtype=float)
    clean = np.array([profile.velocity(x).as_array() for x in inputs])
    rng = np.random.default_rng(seed)
    noisy = clean + rng.normal(0.0, 1.0, clean.shape) * np.asarray(noise_std)
    return Dataset(inputs, noisy)
