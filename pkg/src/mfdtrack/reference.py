"""Reference trajectories, equilibrium solving and feedforward control.

Two generator modes are supported:

- piecewise-constant: a set-point schedule of OD-level equilibria, with the
  generator derivative identically zero inside every interval;
- ode-trajectory: the reference evolves as the plant itself under a nominal
  demand pattern with metering fixed at a gate level, which maximizes trip
  completion under that pattern.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .demand import DemandProfile
from .exceptions import InfeasibleSetpointError, NoConvergenceError, SingularSteadyStateError
from .mfd import ControlInput, DemandVector, OdAccumulation, TwoRegionNetwork


@dataclass(frozen=True)
class ReferenceState:
    """OD-level reference accumulation (veh)."""

    nd11: float
    nd12: float
    nd21: float
    nd22: float

    def __post_init__(self):
        for name in ("nd11", "nd12", "nd21", "nd22"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")

    @classmethod
    def from_array(cls, arr) -> "ReferenceState":
        a = np.asarray(arr, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.nd11, self.nd12, self.nd21, self.nd22])

    @property
    def nd1(self) -> float:
        return self.nd11 + self.nd12

    @property
    def nd2(self) -> float:
        return self.nd21 + self.nd22


@dataclass(frozen=True)
class SetpointInterval:
    """One schedule period: target equilibrium, its control, nominal demand."""

    t_start: float
    t_end: float
    n_d: OdAccumulation
    u_star: Optional[ControlInput]
    q_nominal: DemandVector

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError("interval must have positive duration")


@dataclass(frozen=True)
class SetpointSchedule:
    intervals: tuple[SetpointInterval, ...]

    def __post_init__(self):
        if not self.intervals:
            raise ValueError("schedule needs at least one interval")
        for prev, cur in zip(self.intervals, self.intervals[1:]):
            if not math.isclose(prev.t_end, cur.t_start, abs_tol=1e-9):
                raise ValueError("schedule intervals must be contiguous and ordered")

    @property
    def t_start(self) -> float:
        return self.intervals[0].t_start

    @property
    def t_end(self) -> float:
        return self.intervals[-1].t_end

    def at(self, t: float) -> SetpointInterval:
        """Right-continuous lookup; the horizon end maps to the last interval."""
        if t < self.t_start - 1e-9 or t > self.t_end + 1e-9:
            raise ValueError(f"t={t} outside schedule horizon [{self.t_start}, {self.t_end}]")
        starts = [iv.t_start for iv in self.intervals]
        idx = bisect_right(starts, t) - 1
        return self.intervals[max(idx, 0)]


class CommandGenerator:
    """Produces the desired trajectory n_d(t) and its derivative theta."""

    PIECEWISE = "piecewise-constant"
    ODE = "ode-trajectory"

    def __init__(self, mode: str, **kw):
        self.mode = mode
        self.schedule: Optional[SetpointSchedule] = kw.get("schedule")
        self.net: Optional[TwoRegionNetwork] = kw.get("net")
        self.nominal_demand: Optional[DemandProfile] = kw.get("nominal_demand")
        self.gate: float = kw.get("gate", 1.0)
        self._grid_t: Optional[np.ndarray] = kw.get("grid_t")
        self._grid_nd: Optional[np.ndarray] = kw.get("grid_nd")
        self._grid_theta: Optional[np.ndarray] = kw.get("grid_theta")

    @classmethod
    def piecewise(cls, schedule: SetpointSchedule, net: Optional[TwoRegionNetwork] = None):
        if net is not None:
            for iv in schedule.intervals:
                net.validate_state(iv.n_d)
        return cls(cls.PIECEWISE, schedule=schedule, net=net)

    @classmethod
    def trajectory(
        cls,
        net: TwoRegionNetwork,
        nominal_demand: DemandProfile,
        horizon: float,
        dt: float = 1.0,
        gate: float = 1.0,
        initial: Optional[ReferenceState] = None,
    ):
        """Integrate the gate-metered plant under nominal demand on a dt grid."""
        if not 0.0 < gate <= 1.0:
            raise ValueError("gate must lie in (0, 1]")
        nd = np.zeros(4) if initial is None else initial.as_array().copy()
        steps = round(horizon / dt)
        if abs(steps * dt - horizon) > 1e-9:
            raise ValueError("horizon must be a whole number of dt steps")
        u = np.array([gate, gate])
        grid_t = np.arange(steps + 1) * dt
        grid_nd = np.empty((steps + 1, 4))
        grid_theta = np.empty((steps + 1, 4))
        grid_nd[0] = nd
        q_of = lambda t: nominal_demand.nominal_at(t).as_array()
        grid_theta[0] = net.rhs(nd, u, q_of(0.0))
        t = 0.0
        for i in range(steps):
            k1 = net.rhs(nd, u, q_of(t))
            k2 = net.rhs(nd + 0.5 * dt * k1, u, q_of(t + 0.5 * dt))
            k3 = net.rhs(nd + 0.5 * dt * k2, u, q_of(t + 0.5 * dt))
            k4 = net.rhs(nd + dt * k3, u, q_of(t + dt))
            nd = np.maximum(nd + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), 0.0)
            t = (i + 1) * dt
            grid_nd[i + 1] = nd
            grid_theta[i + 1] = net.rhs(nd, u, q_of(t))
        return cls(
            cls.ODE,
            net=net,
            nominal_demand=nominal_demand,
            gate=gate,
            grid_t=grid_t,
            grid_nd=grid_nd,
            grid_theta=grid_theta,
        )

    @property
    def t_start(self) -> float:
        if self.mode == self.PIECEWISE:
            return self.schedule.t_start
        return float(self._grid_t[0])

    @property
    def t_end(self) -> float:
        if self.mode == self.PIECEWISE:
            return self.schedule.t_end
        return float(self._grid_t[-1])

    def reference_at(self, t: float) -> tuple[ReferenceState, np.ndarray]:
        """Reference state and generator derivative theta at time t."""
        if self.mode == self.PIECEWISE:
            iv = self.schedule.at(t)
            return ReferenceState.from_array(iv.n_d.as_array()), np.zeros(4)
        t0, t1 = self._grid_t[0], self._grid_t[-1]
        if t < t0 - 1e-9 or t > t1 + 1e-9:
            raise ValueError(f"t={t} outside generator horizon [{t0}, {t1}]")
        dt = self._grid_t[1] - self._grid_t[0]
        x = (t - t0) / dt
        i = min(int(math.floor(x + 1e-9)), len(self._grid_t) - 1)
        w = x - i
        if w < 1e-9 or i == len(self._grid_t) - 1:
            nd, theta = self._grid_nd[i], self._grid_theta[i]
        else:
            nd = (1 - w) * self._grid_nd[i] + w * self._grid_nd[i + 1]
            theta = (1 - w) * self._grid_theta[i] + w * self._grid_theta[i + 1]
        return ReferenceState.from_array(nd), theta.copy()

    def theta_at(self, t: float, nd=None) -> np.ndarray:
        """Generator derivative; for ode mode evaluated at an arbitrary state."""
        if self.mode == self.PIECEWISE:
            return np.zeros(4)
        if nd is None:
            return self.reference_at(t)[1]
        q_hat = self.nominal_demand.nominal_at(t).as_array()
        return self.net.rhs(np.asarray(nd, dtype=float), np.array([self.gate, self.gate]), q_hat)

    def nominal_demand_at(self, t: float) -> DemandVector:
        if self.mode == self.PIECEWISE:
            return self.schedule.at(t).q_nominal
        return self.nominal_demand.nominal_at(t)


def reference_at(gen: CommandGenerator, t: float) -> tuple[ReferenceState, np.ndarray]:
    return gen.reference_at(t)


def trajectory_rhs(
    net: TwoRegionNetwork, n_d: ReferenceState, q_hat: DemandVector, gate: float = 1.0
) -> np.ndarray:
    """Reference dynamics: the plant under nominal demand with gate-level metering.

    Region-level aggregation with gate = 1 gives
    dn_1 = q1 - G1(n1) + (n21/n2) G2(n2) and symmetrically for region 2.
    """
    nd = n_d.as_array()
    if n_d.nd1 > net.curve1.n_jam or n_d.nd2 > net.curve2.n_jam:
        raise ValueError("reference region totals exceed jam accumulation")
    return net.rhs(nd, np.array([gate, gate]), q_hat.as_array())


def equilibrium_solve(
    net: TwoRegionNetwork,
    q: DemandVector,
    n1_star: float,
    n2_star: float,
    u_min: float = 0.0,
    u_max: float = 1.0,
    tol: float = 1e-6,
    max_iter: int = 200,
    damping: float = 0.5,
) -> tuple[OdAccumulation, ControlInput]:
    """Solve K(n*, u*, q) = 0 for the OD split and metering at given region totals.

    The two metering rates are eliminated analytically from the transfer-state
    equations (u12* = q12 n1*/(n12* G1), u21* = q21 n2*/(n21* G2)); a damped
    Newton iteration then drives the two internal-state residuals to zero.
    """
    if not 0.0 < n1_star < net.curve1.n_jam or not 0.0 < n2_star < net.curve2.n_jam:
        raise ValueError("set-points must lie in (0, n_jam)")
    g1 = net.curve1.flow(n1_star)
    g2 = net.curve2.flow(n2_star)
    if g1 <= 0 or g2 <= 0:
        raise InfeasibleSetpointError("trip completion vanishes at the set-point")
    qa = q.as_array()

    # residuals of the internal-state equations with the controls eliminated
    def residual(n11: float, n22: float) -> tuple[float, float]:
        return (
            -(n11 / n1_star) * g1 + qa[2] + qa[0],
            -(n22 / n2_star) * g2 + qa[1] + qa[3],
        )

    n11, n22 = 0.5 * n1_star, 0.5 * n2_star
    j11, j22 = -g1 / n1_star, -g2 / n2_star
    converged = False
    for _ in range(max_iter):
        r1, r2 = residual(n11, n22)
        if max(abs(r1), abs(r2)) < tol:
            converged = True
            break
        n11 -= damping * r1 / j11
        n22 -= damping * r2 / j22
    if not converged:
        raise NoConvergenceError(
            f"equilibrium solve did not reach {tol} veh/s in {max_iter} iterations"
        )

    n12 = n1_star - n11
    n21 = n2_star - n22
    if min(n11, n12, n21, n22) <= 0:
        raise InfeasibleSetpointError(
            f"demand {qa} admits no positive OD split at set-points ({n1_star}, {n2_star})"
        )
    u12 = qa[1] * n1_star / (n12 * g1)
    u21 = qa[2] * n2_star / (n21 * g2)
    if not (u_min - 1e-9 <= u12 <= u_max + 1e-9 and u_min - 1e-9 <= u21 <= u_max + 1e-9):
        raise InfeasibleSetpointError(
            f"equilibrium control ({u12:.4f}, {u21:.4f}) outside [{u_min}, {u_max}]"
        )
    n_star = OdAccumulation(n11, n12, n21, n22)
    u_star = ControlInput(min(max(u12, 0.0), 1.0), min(max(u21, 0.0), 1.0))
    # re-check the fixed point through the actual dynamics, not the solver
    residual_inf = float(np.abs(net.rhs(n_star.as_array(), u_star.as_array(), qa)).max())
    if residual_inf >= tol:
        raise NoConvergenceError(f"equilibrium residual {residual_inf} exceeds {tol} veh/s")
    return n_star, u_star


def steady_state_control(
    net: TwoRegionNetwork,
    n_d: ReferenceState,
    theta: np.ndarray,
    q_hat: DemandVector,
) -> tuple[np.ndarray, float]:
    """Least-squares feedforward u_s = pinv(s(n_d)) (theta - f(n_d)).

    The two columns of s are orthogonal, so the normal equations are diagonal
    and solved in closed form. Returns (u_s, residual 2-norm).
    """
    eps = net.epsilon_floor
    if n_d.nd12 < eps or n_d.nd21 < eps:
        raise SingularSteadyStateError(
            f"transfer reference accumulations ({n_d.nd12}, {n_d.nd21}) below floor {eps}"
        )
    nd = n_d.as_array()
    f, s = net.drift_input(nd, q_hat.as_array())
    target = np.asarray(theta, dtype=float) - f
    col_sq = (s * s).sum(axis=0)
    if col_sq.min() <= 0.0:
        raise SingularSteadyStateError("input map column vanishes at the reference state")
    u_s = (s.T @ target) / col_sq
    residual = float(np.linalg.norm(s @ u_s - target))
    return u_s, residual
