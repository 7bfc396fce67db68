"""Closed-loop execution: feedforward + learned feedback, SPC/TPC/uncontrolled.

Deployment applies the metering at 60 s zero-order hold through
:func:`mfdtrack.mfd.integrate`; the training environment in this module
instead refreshes the feedback at every integrator step so the behavior
policy matches the evaluated policy pointwise when probing noise is off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import mfd
from .adp import BasisSpec, CriticActorWeights, ProbePoint, Rollout
from .augmented import CostWeights
from .demand import DemandProfile
from .exceptions import SingularSteadyStateError
from .mfd import ControlInput, DemandVector, OdAccumulation, TwoRegionNetwork
from .reference import CommandGenerator, ReferenceState, steady_state_control
from .trace import SimulationTrace

MODE_TPC = "tpc"
MODE_SPC = "spc"
MODE_UNCONTROLLED = "uncontrolled"


@dataclass(frozen=True)
class ActuatorBox:
    u_min: float = 0.1
    u_max: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.u_min <= self.u_max <= 1.0:
            raise ValueError("need 0 <= u_min <= u_max <= 1")

    def clamp(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.u_min, self.u_max)


@dataclass
class ControllerConfig:
    """Everything compute_control needs: mode, reference, weights, bounds."""

    mode: str
    gen: Optional[CommandGenerator] = None
    weights: Optional[CriticActorWeights] = None
    basis: Optional[BasisSpec] = None
    cost: Optional[CostWeights] = None
    box: ActuatorBox = field(default_factory=ActuatorBox)
    control_interval: float = 60.0
    # feedforward substitute when the reference transfer pools are below the
    # epsilon floor (ode-trajectory start-up); None propagates the error
    singular_fallback: Optional[float] = None

    def __post_init__(self):
        if self.mode not in (MODE_TPC, MODE_SPC, MODE_UNCONTROLLED):
            raise ValueError(f"unknown controller mode {self.mode!r}")
        if self.mode != MODE_UNCONTROLLED:
            if self.gen is None or self.cost is None:
                raise ValueError(f"{self.mode} controller needs a reference and cost weights")
            if self.mode == MODE_SPC and not _constant_reference(self.gen):
                raise ValueError("SPC requires a constant reference")


def _constant_reference(gen: CommandGenerator) -> bool:
    if gen.mode != CommandGenerator.PIECEWISE:
        return False
    first = gen.schedule.intervals[0].n_d.as_array()
    return all(
        np.array_equal(iv.n_d.as_array(), first) for iv in gen.schedule.intervals
    )


def _feedforward(
    net: TwoRegionNetwork,
    gen: CommandGenerator,
    t: float,
    nd: np.ndarray,
    theta: np.ndarray,
    fallback: Optional[float],
) -> np.ndarray:
    try:
        u_s, _ = steady_state_control(
            net, ReferenceState.from_array(nd), theta, gen.nominal_demand_at(t)
        )
        return u_s
    except SingularSteadyStateError:
        if fallback is None:
            raise
        return np.array([fallback, fallback])


def compute_control(
    cfg: ControllerConfig, net: TwoRegionNetwork, n: OdAccumulation, t: float
) -> ControlInput:
    """u = clamp(u_s(n_d(t)) + mu(N), u_min, u_max); the sum is clamped, not the parts."""
    if cfg.mode == MODE_UNCONTROLLED:
        return ControlInput(cfg.box.u_max, cfg.box.u_max)
    nd_state, theta = cfg.gen.reference_at(t)
    nd = nd_state.as_array()
    u_s = _feedforward(net, cfg.gen, t, nd, theta, cfg.singular_fallback)
    mu = _policy_mu(cfg, n.as_array(), nd)
    u = cfg.box.clamp(u_s + mu)
    return ControlInput(float(u[0]), float(u[1]))


def _policy_mu(cfg: ControllerConfig, n: np.ndarray, nd: np.ndarray) -> np.ndarray:
    if cfg.weights is None:
        return np.zeros(2)
    state = np.concatenate([n - nd, nd])
    return cfg.weights.mu(cfg.basis, state, cfg.cost.lam)


def realize_demand(profile: DemandProfile, t: float) -> DemandVector:
    """Nominal segment value plus the truncated noise draw for t's interval."""
    return profile.realize(t)


def run_closed_loop(
    net: TwoRegionNetwork,
    cfg: ControllerConfig,
    profile: DemandProfile,
    initial: OdAccumulation,
    horizon: float,
    dt: float = 1.0,
    trace_interval: float = 60.0,
) -> SimulationTrace:
    """Simulate with 60 s control updates; returns the extended trace.

    Reference, feedback and feedforward columns are recomputed per row from
    (t, n) through the same pure functions the controller used, so the trace
    is exact, not re-sampled.
    """
    controller = lambda t, n: compute_control(cfg, net, n, t)
    demand = lambda t: realize_demand(profile, t)
    trace = mfd.integrate(
        net,
        initial,
        controller,
        demand,
        0.0,
        horizon,
        dt=dt,
        control_interval=cfg.control_interval,
        trace_interval=trace_interval,
    )
    if cfg.mode == MODE_UNCONTROLLED:
        return trace
    k = len(trace.t)
    nd_rows = np.empty((k, 4))
    mu_rows = np.empty((k, 2))
    us_rows = np.empty((k, 2))
    t_last = cfg.gen.t_end
    for i, t in enumerate(trace.t):
        tq = min(t, t_last)
        nd_state, theta = cfg.gen.reference_at(tq)
        nd = nd_state.as_array()
        nd_rows[i] = nd
        us_rows[i] = _feedforward(net, cfg.gen, tq, nd, theta, cfg.singular_fallback)
        mu_rows[i] = _policy_mu(cfg, trace.n[i], nd)
    trace.nd = nd_rows
    trace.mu = mu_rows
    trace.us = us_rows
    return trace


# ---------------------------------------------------------------------------
# training-facing pieces


@dataclass
class TrafficTrainingEnv:
    """Closed-loop data generator for learning: states and applied controls only.

    The feedback callable receives the augmented state [n - n_d; n_d] and its
    requested action is combined with the precomputed feedforward, clamped to
    the actuator box and applied for one integrator step. Demand is redrawn
    per control interval exactly as in deployment.
    """

    net: TwoRegionNetwork
    gen: CommandGenerator
    profile: DemandProfile
    initial: OdAccumulation
    box: ActuatorBox = field(default_factory=ActuatorBox)
    singular_fallback: Optional[float] = None
    control_interval: float = 60.0
    # relative spread of randomized rollout starts; zero keeps every rollout
    # at the configured initial state and time zero
    initial_spread: float = 0.0

    state_dim = 8
    control_dim = 2

    def sample_start(self, seed, horizon: float) -> tuple[float, np.ndarray]:
        """Seeded rollout start (t0, n0).

        The unseeded rollout is canonical: time zero, configured initial state.
        Seeded rollouts scatter t0 across the reference horizon (so every
        schedule period contributes data) and start near the local reference
        with a multiplicative spread, giving the transient coverage one
        trajectory cannot.
        """
        base = self.initial.as_array()
        if self.initial_spread <= 0.0 or seed is None:
            return 0.0, base.copy()
        rng = np.random.default_rng([int(seed), 0xA11])
        t_max = max(self.gen.t_end - horizon, 0.0)
        t0 = math.floor(rng.uniform(0.0, t_max + 1e-9) / self.control_interval)
        t0 *= self.control_interval
        if t0 == 0.0 and rng.integers(0, 2) == 0:
            return 0.0, base.copy()
        center = self.gen.reference_at(t0)[0].as_array()
        center = np.maximum(center, 50.0)  # keep transfer pools workable
        draw = center * (1.0 + self.initial_spread * rng.uniform(-1.0, 1.0, 4))
        draw = np.maximum(draw, 0.0)
        for sl, jam in ((slice(0, 2), self.net.curve1.n_jam), (slice(2, 4), self.net.curve2.n_jam)):
            tot = draw[sl].sum()
            if tot > 0.9 * jam:
                draw[sl] *= 0.9 * jam / tot
        return t0, draw

    def _reference_grid(self, t0: float, horizon: float, dt: float):
        steps = round(horizon / dt)
        t_grid = t0 + np.arange(steps + 1) * dt
        nd_grid = np.empty((steps + 1, 4))
        us_grid = np.empty((steps + 1, 2))
        for i, t in enumerate(t_grid):
            nd_state, theta = self.gen.reference_at(t)
            nd_grid[i] = nd_state.as_array()
            us_grid[i] = _feedforward(
                self.net, self.gen, t, nd_grid[i], theta, self.singular_fallback
            )
        return t_grid, nd_grid, us_grid

    def rollout(self, feedback, horizon: float, dt: float, seed=None) -> Rollout:
        steps = round(horizon / dt)
        if abs(steps * dt - horizon) > 1e-9:
            raise ValueError("horizon must be a whole number of dt steps")
        redraw = round(self.control_interval / dt)
        profile = self.profile if seed is None else self.profile.with_seed(seed)
        t0, n = self.sample_start(seed, horizon)
        t_grid, nd_grid, us_grid = self._reference_grid(t0, horizon, dt)
        jam1, jam2 = self.net.curve1.n_jam, self.net.curve2.n_jam

        states = np.empty((steps + 1, 8))
        mu_applied = np.empty((steps + 1, 2))
        q = profile.realize(t0).as_array()
        for i in range(steps + 1):
            t = t_grid[i]
            if i % redraw == 0:
                q = profile.realize(t).as_array()
            state = np.concatenate([n - nd_grid[i], nd_grid[i]])
            states[i] = state
            u = self.box.clamp(us_grid[i] + np.asarray(feedback(t, state), dtype=float))
            mu_applied[i] = u - us_grid[i]
            if i == steps:
                break
            k1 = self.net.rhs(n, u, q)
            k2 = self.net.rhs(n + 0.5 * dt * k1, u, q)
            k3 = self.net.rhs(n + 0.5 * dt * k2, u, q)
            k4 = self.net.rhs(n + dt * k3, u, q)
            n = n + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if n[0] < 0 or n[1] < 0 or n[2] < 0 or n[3] < 0:
                n = np.maximum(n, 0.0)
            r1 = n[0] + n[1]
            if r1 > jam1:
                n[:2] *= jam1 / r1
            r2 = n[2] + n[3]
            if r2 > jam2:
                n[2:] *= jam2 / r2
        return Rollout(
            t=t_grid,
            states=states,
            mu_applied=mu_applied,
            break_times=self._break_times(t0, t0 + horizon),
        )

    def _break_times(self, t_from: float, t_to: float) -> tuple:
        if self.gen.mode != CommandGenerator.PIECEWISE:
            return ()
        return tuple(
            iv.t_start
            for iv in self.gen.schedule.intervals[1:]
            if t_from < iv.t_start <= t_to
        )

    def is_admissible(self, ro: Rollout) -> bool:
        n = ro.states[:, :4] + ro.states[:, 4:]
        r1 = n[:, 0] + n[:, 1]
        r2 = n[:, 2] + n[:, 3]
        return bool(
            np.all(np.isfinite(ro.states))
            and r1.max() < 0.999 * self.net.curve1.n_jam
            and r2.max() < 0.999 * self.net.curve2.n_jam
        )

    def probe_points(self, ro: Rollout, stride: int = 1) -> list[ProbePoint]:
        """Model evaluation (F, S) along a rollout, for the model-based oracle."""
        points = []
        for i in range(0, len(ro.t), stride):
            t = float(ro.t[i])
            state = ro.states[i]
            nd = state[4:]
            theta = self.gen.theta_at(t, nd)
            u_s = _feedforward(self.net, self.gen, t, nd, theta, self.singular_fallback)
            q = self.profile.realize(t).as_array()
            f, s = self.net.drift_input(state[:4] + nd, q)
            drift = np.concatenate([f + s @ u_s - theta, theta])
            input_map = np.vstack([s, np.zeros((4, 2))])
            points.append(ProbePoint(state=state.copy(), drift=drift, input_map=input_map))
        return points
