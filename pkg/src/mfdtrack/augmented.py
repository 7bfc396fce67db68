"""Augmented tracking system, constrained-input cost and saturated policy.

The augmented state stacks the tracking error and the reference,
N = [e; n_d] in R^8. Only the error block is penalized (the state-cost
matrix is [[Q, 0], [0, 0]]); control effort uses the nonquadratic integrand
2 * integral_0^mu lam * atanh(v/lam) R dv whose closed form is implemented
here, keeping every feedback component strictly inside (-lam, lam).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mfd import DemandVector, OdAccumulation, TwoRegionNetwork
from .reference import CommandGenerator, ReferenceState, steady_state_control


@dataclass(frozen=True)
class CostWeights:
    """Tracking-cost weights: error matrix Q, effort weights gamma, bound lam."""

    q_matrix: np.ndarray  # (4, 4) symmetric positive definite
    gamma: np.ndarray  # (2,) diagonal of R, strictly positive
    lam: float  # saturation bound on each feedback component

    def __post_init__(self):
        q = np.asarray(self.q_matrix, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        object.__setattr__(self, "q_matrix", q)
        object.__setattr__(self, "gamma", g)
        if q.shape != (4, 4) or not np.allclose(q, q.T, atol=1e-12):
            raise ValueError("Q must be symmetric 4x4")
        if np.linalg.eigvalsh(q).min() <= 0:
            raise ValueError("Q must be positive definite")
        if g.shape != (2,) or np.any(g <= 0):
            # R^{-1} enters the policy, so the diagonal must be positive
            raise ValueError("gamma must be two positive weights")
        if self.lam <= 0:
            raise ValueError("lam must be positive")

    @classmethod
    def diagonal(cls, q: float = 1e-4, gamma=(1.0, 1.0), lam: float = 0.5) -> "CostWeights":
        return cls(q * np.eye(4), np.asarray(gamma, dtype=float), lam)

    def q_hat(self) -> np.ndarray:
        """(8, 8) augmented state-cost matrix [[Q, 0], [0, 0]]."""
        out = np.zeros((8, 8))
        out[:4, :4] = self.q_matrix
        return out


@dataclass(frozen=True)
class AugmentedState:
    """Tracking error and reference blocks of the 8-dimensional state."""

    e: np.ndarray  # (4,) n - n_d
    nd: np.ndarray  # (4,)

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float)
        nd = np.asarray(self.nd, dtype=float)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "nd", nd)
        if e.shape != (4,) or nd.shape != (4,):
            raise ValueError("e and nd must be 4-vectors")
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(nd))):
            raise ValueError("augmented state must be finite")
        if np.any(e + nd < -1e-9):
            raise ValueError("plant state e + nd must be non-negative")

    @classmethod
    def from_vector(cls, vec) -> "AugmentedState":
        v = np.asarray(vec, dtype=float)
        return cls(v[:4].copy(), v[4:].copy())

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.e, self.nd])


@dataclass(frozen=True)
class FeedbackAction:
    """Bounded feedback part of the metering control."""

    mu: np.ndarray  # (2,)

    def __post_init__(self):
        m = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "mu", m)
        if m.shape != (2,) or not np.all(np.isfinite(m)):
            raise ValueError("mu must be a finite 2-vector")

    def as_array(self) -> np.ndarray:
        return self.mu


def _mu_array(mu) -> np.ndarray:
    if isinstance(mu, FeedbackAction):
        return mu.mu
    return np.asarray(mu, dtype=float)


def augment(n: OdAccumulation, n_d: ReferenceState) -> AugmentedState:
    """Stack tracking error and reference: N = [n - n_d; n_d]."""
    nd = n_d.as_array()
    return AugmentedState(n.as_array() - nd, nd)


def augmented_rhs(
    net: TwoRegionNetwork,
    state: AugmentedState,
    mu,
    q: DemandVector,
    gen: CommandGenerator,
    t: float,
) -> np.ndarray:
    """Rate of change of [e; n_d] under feedback mu and realized demand q.

    The feedforward part of the control is recomputed from the reference
    block, so the top block is f(e+nd) + s(e+nd)(u_s + mu) - theta(nd) and
    the bottom block is theta(nd).
    """
    mu_arr = _mu_array(mu)
    nd = state.nd
    theta = gen.theta_at(t, nd)
    u_s, _ = steady_state_control(
        net, ReferenceState.from_array(nd), theta, gen.nominal_demand_at(t)
    )
    f, s = net.drift_input(state.e + nd, q.as_array())
    top = f + s @ (u_s + mu_arr) - theta
    return np.concatenate([top, theta])


def control_cost(mu, w: CostWeights) -> float:
    """Closed form of the saturating effort integrand.

    Per channel: gamma_i [2 lam mu_i atanh(mu_i/lam) + lam^2 ln(1 - (mu_i/lam)^2)],
    non-negative, zero only at mu = 0, diverging as |mu_i| -> lam.
    """
    m = _mu_array(mu)
    lam = w.lam
    total = 0.0
    for i in range(len(m)):
        r = m[i] / lam
        if abs(r) >= 1.0:
            raise ValueError(f"|mu_{i}| must be strictly below lam={lam}")
        total += w.gamma[i] * (
            2.0 * lam * m[i] * math.atanh(r) + lam * lam * math.log1p(-r * r)
        )
    return total


def stage_cost(state: AugmentedState, mu, w: CostWeights) -> float:
    """e' Q e + control_cost(mu); the reference block contributes nothing."""
    e = state.e
    return float(e @ w.q_matrix @ e) + control_cost(mu, w)


def saturated_policy(d, lam: float) -> FeedbackAction:
    """mu = -lam tanh(d): strictly inside the (-lam, lam) box."""
    return FeedbackAction(-lam * np.tanh(np.asarray(d, dtype=float)))


def hamiltonian(
    state: AugmentedState,
    mu,
    grad_v: np.ndarray,
    w: CostWeights,
    net: TwoRegionNetwork,
    q: DemandVector,
    gen: CommandGenerator,
    t: float,
) -> float:
    """Stage cost plus directional derivative of the value along the dynamics.

    Diagnostic only: at the optimal value function this vanishes for the
    saturated optimal policy.
    """
    rate = augmented_rhs(net, state, mu, q, gen, t)
    return stage_cost(state, mu, w) + float(np.asarray(grad_v, dtype=float) @ rate)
