"""Critic/actor learning for constrained-input optimal tracking.

Everything here is linear in the unknown weights: the value function is
V(N) = wc' phi(N) over quadratic monomials of the scaled state, the
pre-saturation policy signal is D(N) = wa phi_a(N) over linear-plus-quadratic
monomials, and the feedback is mu = -lam tanh(D). Policy evaluation and
improvement are then least-squares solves, either from trajectory data alone
(integral Bellman equation over fixed-length intervals) or with model access
(pointwise Bellman residual regression) as a cross-checking oracle.

The module is deliberately generic over the environment: anything exposing
``rollout(feedback, horizon, dt, seed)`` and ``state_dim``/``control_dim``
can be trained, which is how the scalar linear benchmark in the test suite
shares this code path with the traffic plant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence, Union

import numpy as np

from .exceptions import InsufficientExcitationError, NoConvergenceError

_trapz = np.trapezoid if hasattr(np, "trapezoid") else np.trapz


# ---------------------------------------------------------------------------
# bases and weights


@dataclass(frozen=True)
class BasisSpec:
    """Polynomial features over a scaled subset of the state.

    Critic: all degree-2 monomials z_i z_j (i <= j) of z = N[active] / scaling.
    Actor: degree-1 monomials, optionally plus degree-2 (actor_degree = 2).
    Both vanish at N = 0.

    For the tracking problem the default features use only the error block
    (active = first four components): the optimal value and policy signal both
    vanish identically at zero error regardless of the reference, so
    reference-dependent monomials add no representable content, and with a
    piecewise-constant reference they are not even identifiable from data.
    The actor defaults to degree 1: its quadratic coefficients are identified
    only through probing-noise correlations and soak up model-mismatch bias,
    which destabilizes the policy updates.
    """

    scaling: np.ndarray  # (len(active),) characteristic magnitudes
    active: Optional[tuple] = None  # component indices; None -> all of the state
    n_full: Optional[int] = None  # raw state dimension; None -> len(active)
    actor_degree: int = 1

    def __post_init__(self):
        s = np.asarray(self.scaling, dtype=float)
        object.__setattr__(self, "scaling", s)
        if s.ndim != 1 or np.any(s <= 0):
            raise ValueError("scaling must be a vector of positive magnitudes")
        active = tuple(range(len(s))) if self.active is None else tuple(self.active)
        if len(active) != len(s):
            raise ValueError("scaling and active must have equal length")
        object.__setattr__(self, "active", active)
        n_full = len(active) if self.n_full is None else int(self.n_full)
        if max(active) >= n_full:
            raise ValueError("active index beyond state dimension")
        object.__setattr__(self, "n_full", n_full)
        if self.actor_degree not in (1, 2):
            raise ValueError("actor_degree must be 1 or 2")
        iu = np.triu_indices(len(active))
        object.__setattr__(self, "_iu0", iu[0])
        object.__setattr__(self, "_iu1", iu[1])
        object.__setattr__(self, "_active_arr", np.asarray(active, dtype=int))

    @classmethod
    def error_quadratic(cls, scale: float = 1000.0) -> "BasisSpec":
        """Default tracking basis: quadratic in the four error components."""
        return cls(np.full(4, scale), active=(0, 1, 2, 3), n_full=8)

    @property
    def n_state(self) -> int:
        return self.n_full

    @property
    def n_active(self) -> int:
        return len(self.active)

    @property
    def p(self) -> int:
        n = self.n_active
        return n * (n + 1) // 2

    @property
    def p_a(self) -> int:
        return self.n_active + (self.p if self.actor_degree == 2 else 0)

    def _z(self, states) -> np.ndarray:
        arr = np.asarray(states, dtype=float)
        return arr[..., self._active_arr] / self.scaling

    def phi(self, states) -> np.ndarray:
        """Critic features, shape (..., p)."""
        z = self._z(states)
        return z[..., self._iu0] * z[..., self._iu1]

    def phi_a(self, states) -> np.ndarray:
        """Actor features, shape (..., p_a)."""
        z = self._z(states)
        if self.actor_degree == 1:
            return z
        return np.concatenate([z, z[..., self._iu0] * z[..., self._iu1]], axis=-1)

    def grad_phi(self, state) -> np.ndarray:
        """Jacobian of the critic features w.r.t. the raw state, shape (p, n_full)."""
        return self.grad_phi_batch(np.asarray(state, dtype=float)[None, :])[0]

    def grad_phi_batch(self, states) -> np.ndarray:
        """(M, p, n_full) feature Jacobians; diagonal monomials pick up the factor 2."""
        z = self._z(states)
        m = z.shape[0]
        out = np.zeros((m, self.p, self.n_full))
        for k in range(self.p):
            i, j = self._iu0[k], self._iu1[k]
            out[:, k, self.active[i]] += z[:, j] / self.scaling[i]
            out[:, k, self.active[j]] += z[:, i] / self.scaling[j]
        return out

    def descriptor(self) -> dict:
        return {
            "kind": "scaled-poly2",
            "scaling": [float(v) for v in self.scaling],
            "active": [int(i) for i in self.active],
            "n_full": int(self.n_full),
            "actor_degree": int(self.actor_degree),
        }

    @classmethod
    def from_descriptor(cls, desc: dict) -> "BasisSpec":
        if desc.get("kind") != "scaled-poly2":
            raise ValueError(f"unknown basis kind {desc.get('kind')!r}")
        return cls(
            np.asarray(desc["scaling"], dtype=float),
            active=tuple(desc["active"]) if "active" in desc else None,
            n_full=desc.get("n_full"),
            actor_degree=desc.get("actor_degree", 1),
        )


@dataclass
class CriticActorWeights:
    """Value weights wc (p,) and per-channel policy-signal weights wa (m, p_a)."""

    wc: np.ndarray
    wa: np.ndarray

    def __post_init__(self):
        self.wc = np.asarray(self.wc, dtype=float)
        self.wa = np.asarray(self.wa, dtype=float)
        if not (np.all(np.isfinite(self.wc)) and np.all(np.isfinite(self.wa))):
            raise ValueError("weights must be finite")

    @classmethod
    def zeros(cls, basis: BasisSpec, n_channels: int) -> "CriticActorWeights":
        return cls(np.zeros(basis.p), np.zeros((n_channels, basis.p_a)))

    def copy(self) -> "CriticActorWeights":
        return CriticActorWeights(self.wc.copy(), self.wa.copy())

    def value(self, basis: BasisSpec, states) -> np.ndarray:
        return basis.phi(states) @ self.wc

    def d_signal(self, basis: BasisSpec, states) -> np.ndarray:
        """Pre-saturation policy signal, shape (..., m)."""
        return basis.phi_a(states) @ self.wa.T

    def mu(self, basis: BasisSpec, states, lam: float) -> np.ndarray:
        return -lam * np.tanh(self.d_signal(basis, states))

    def grad_value(self, basis: BasisSpec, state) -> np.ndarray:
        return basis.grad_phi(state).T @ self.wc


# ---------------------------------------------------------------------------
# cost bookkeeping shared by collection, solving and diagnostics


@dataclass(frozen=True)
class AdpProblem:
    """State-cost matrix, effort weights and saturation bound in one place."""

    q_matrix: np.ndarray  # (n, n)
    gamma: np.ndarray  # (m,)
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "q_matrix", np.asarray(self.q_matrix, dtype=float))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float))
        if np.any(self.gamma <= 0) or self.lam <= 0:
            raise ValueError("gamma and lam must be positive")

    @classmethod
    def from_cost(cls, w) -> "AdpProblem":
        """Build the 8-state problem from tracking CostWeights."""
        return cls(w.q_hat(), w.gamma, w.lam)

    @property
    def n_channels(self) -> int:
        return len(self.gamma)

    def state_cost(self, states) -> np.ndarray:
        s = np.asarray(states, dtype=float)
        return np.einsum("...i,ij,...j->...", s, self.q_matrix, s)

    def effort_cost(self, mu) -> np.ndarray:
        """Closed-form saturating effort, vectorized over leading axes."""
        m = np.asarray(mu, dtype=float)
        r = np.clip(m / self.lam, -1.0 + 1e-15, 1.0 - 1e-15)
        per = 2.0 * self.lam * m * np.arctanh(r) + self.lam**2 * np.log1p(-r * r)
        return per @ self.gamma


# ---------------------------------------------------------------------------
# probing noise and data collection


@dataclass(frozen=True)
class ProbingNoise:
    """Per-channel sum of sinusoids with seed-derived frequencies and phases."""

    amplitude: float
    omegas: np.ndarray  # (m, J) rad/s
    phases: np.ndarray  # (m, J)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "omegas", np.asarray(self.omegas, dtype=float))
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")

    @classmethod
    def sinusoids(
        cls,
        n_channels: int,
        seed: int,
        amplitude: float,
        n_components: int = 8,
        period_range: tuple[float, float] = (40.0, 600.0),
    ) -> "ProbingNoise":
        rng = np.random.default_rng([seed, 0x5E5])
        periods = rng.uniform(period_range[0], period_range[1], (n_channels, n_components))
        phases = rng.uniform(0.0, 2.0 * math.pi, (n_channels, n_components))
        return cls(amplitude, 2.0 * math.pi / periods, phases, seed)

    @classmethod
    def zero(cls, n_channels: int) -> "ProbingNoise":
        return cls(0.0, np.zeros((n_channels, 1)), np.zeros((n_channels, 1)))

    def __call__(self, t: float) -> np.ndarray:
        if self.amplitude == 0.0:
            return np.zeros(self.omegas.shape[0])
        return self.amplitude * np.sin(self.omegas * t + self.phases).mean(axis=1)


@dataclass
class Rollout:
    """Closed-loop record on the integrator grid."""

    t: np.ndarray  # (T+1,)
    states: np.ndarray  # (T+1, n)
    mu_applied: np.ndarray  # (T+1, m) effective feedback after clamping
    # instants where the reference jumps (set-point switches); intervals
    # containing one cannot enter the integral Bellman system
    break_times: tuple = ()


class TrainingEnv(Protocol):
    state_dim: int
    control_dim: int

    def rollout(
        self,
        feedback: Callable[[float, np.ndarray], np.ndarray],
        horizon: float,
        dt: float,
        seed: Optional[int] = None,
    ) -> Rollout: ...


@dataclass
class TransitionSample:
    """One fixed-length interval of closed-loop data for the integral solve.

    The raw per-grid-point paths are kept so the policy-dependent integrals
    (effort cost of mu_k, correction term) can be recomputed for any weights;
    integrated_state_cost is the value at collection time.
    """

    n_start: np.ndarray
    n_end: np.ndarray
    dt: float
    duration: float
    phi_a_path: np.ndarray  # (L+1, p_a)
    mu_applied_path: np.ndarray  # (L+1, m)
    state_cost_path: np.ndarray  # (L+1,)
    integrated_state_cost: float


def collect_samples(
    env: TrainingEnv,
    weights: CriticActorWeights,
    basis: BasisSpec,
    prob: AdpProblem,
    noise: ProbingNoise,
    horizon: float,
    dt: float = 1.0,
    interval: float = 60.0,
    seed: Optional[int] = None,
    n_rollouts: int = 1,
    check_excitation: bool = True,
) -> list[TransitionSample]:
    """Roll the behavior policy mu_k + noise and slice into interval samples.

    The plant is observed only through states and applied controls. All
    interval integrals are composite trapezoids on the integrator grid.
    Multiple rollouts (seeded initial-state/demand variation, when the
    environment supports it) give the state coverage a single trajectory
    cannot.
    """
    steps_per = round(interval / dt)
    if abs(steps_per * dt - interval) > 1e-9 or steps_per < 1:
        raise ValueError("interval must be a positive multiple of dt")
    lam = prob.lam

    def feedback(t: float, state: np.ndarray) -> np.ndarray:
        d = weights.wa @ basis.phi_a(state)
        return -lam * np.tanh(d) + noise(t)

    samples: list[TransitionSample] = []
    for r in range(n_rollouts):
        ro_seed = None if seed is None else int(seed) * 1000 + r
        ro = env.rollout(feedback, horizon, dt, seed=ro_seed)
        phi_a_all = basis.phi_a(ro.states)
        d_all = phi_a_all @ weights.wa.T
        mu_k_all = -lam * np.tanh(d_all)
        state_cost_all = prob.state_cost(ro.states)
        effort_all = prob.effort_cost(mu_k_all)
        n_samples = (len(ro.t) - 1) // steps_per
        for j in range(n_samples):
            lo, hi = j * steps_per, (j + 1) * steps_per + 1
            t_lo, t_hi = ro.t[lo], ro.t[hi - 1]
            if any(t_lo < bt <= t_hi for bt in ro.break_times):
                continue  # reference jump inside the interval
            cost_path = state_cost_all[lo:hi] + effort_all[lo:hi]
            samples.append(
                TransitionSample(
                    n_start=ro.states[lo].copy(),
                    n_end=ro.states[hi - 1].copy(),
                    dt=dt,
                    duration=interval,
                    phi_a_path=phi_a_all[lo:hi].copy(),
                    mu_applied_path=ro.mu_applied[lo:hi].copy(),
                    state_cost_path=state_cost_all[lo:hi].copy(),
                    integrated_state_cost=float(_trapz(cost_path, dx=dt)),
                )
            )
    required = 2 * (basis.p + prob.n_channels * basis.p_a)
    if len(samples) < required:
        raise ValueError(
            f"collection yields {len(samples)} samples; at least {required} "
            f"required (2 x (p + m p_a))"
        )
    if check_excitation:
        a, _ = _stack_regression(samples, weights, basis, prob)
        _solve_reduced(a, np.zeros(len(samples)), solve=False)
    return samples


# ---------------------------------------------------------------------------
# least-squares machinery


def _stack_regression(
    samples: Sequence[TransitionSample],
    weights: CriticActorWeights,
    basis: BasisSpec,
    prob: AdpProblem,
) -> tuple[np.ndarray, np.ndarray]:
    """Rows of the integral Bellman system, linear in (wc, wa)."""
    p, p_a, m = basis.p, basis.p_a, prob.n_channels
    lam = prob.lam
    a = np.empty((len(samples), p + m * p_a))
    b = np.empty(len(samples))
    for j, s in enumerate(samples):
        d_path = s.phi_a_path @ weights.wa.T
        mu_k_path = -lam * np.tanh(d_path)
        gap = mu_k_path - s.mu_applied_path  # (L+1, m)
        cost_path = s.state_cost_path + prob.effort_cost(mu_k_path)
        a[j, :p] = basis.phi(s.n_end) - basis.phi(s.n_start)
        for i in range(m):
            corr = _trapz(s.phi_a_path * gap[:, i : i + 1], dx=s.dt, axis=0)
            a[j, p + i * p_a : p + (i + 1) * p_a] = 2.0 * lam * prob.gamma[i] * corr
        b[j] = -float(_trapz(cost_path, dx=s.dt))
    return a, b


def _solve_reduced(
    a: np.ndarray,
    b: np.ndarray,
    cond_limit: float = 1e10,
    solve: bool = True,
) -> tuple[np.ndarray, dict]:
    """Drop identically-zero columns, check conditioning, least-squares solve.

    Zero columns arise legitimately (on-policy data carries no actor
    information); the excitation check applies to the retained columns only.
    """
    col_norm = np.linalg.norm(a, axis=0)
    scale = max(float(col_norm.max()), 1.0)
    keep = col_norm > 1e-13 * scale
    if not np.any(keep):
        raise InsufficientExcitationError("regression matrix is identically zero")
    a_kept = a[:, keep]
    cond = float(np.linalg.cond(a_kept))
    if not np.isfinite(cond) or cond > cond_limit:
        raise InsufficientExcitationError(
            f"regression matrix condition number {cond:.3g} exceeds {cond_limit:.0e}"
        )
    info = {"cond": cond, "dropped_columns": int((~keep).sum())}
    if not solve:
        return np.zeros(a.shape[1]), info
    # column equilibration, then truncate singular directions conditioned worse
    # than the excitation gate: they carry no usable information and would
    # otherwise inflate the weights
    d = np.linalg.norm(a_kept, axis=0)
    sol, _, rank, _ = np.linalg.lstsq(a_kept / d, b, rcond=1.0 / cond_limit)
    x = np.zeros(a.shape[1])
    x[keep] = sol / d
    info["rank"] = int(rank)
    info["residual"] = float(np.linalg.norm(a_kept @ x[keep] - b))
    return x, info


def irl_lstsq(
    samples: Sequence[TransitionSample],
    weights: CriticActorWeights,
    basis: BasisSpec,
    prob: AdpProblem,
) -> tuple[CriticActorWeights, dict]:
    """Solve the integral Bellman system for the next critic/actor pair.

    Row j:  wc' [phi(N_j+) - phi(N_j)]
            + 2 lam sum_i gamma_i integral (wa_i phi_a(N)) (mu_k_i - mu_i) dtau
            = - integral (N'QN + effort(mu_k)) dtau
    """
    a, b = _stack_regression(samples, weights, basis, prob)
    x, info = _solve_reduced(a, b)
    p, p_a, m = basis.p, basis.p_a, prob.n_channels
    new = CriticActorWeights(x[:p], x[p:].reshape(m, p_a))
    return new, info


# ---------------------------------------------------------------------------
# policy iteration


@dataclass
class TrainingResult:
    weights: CriticActorWeights
    log: list[dict] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.log)


def _admissibility_check(env: TrainingEnv, weights, basis, prob, horizon, dt, seed):
    """Initial policy must keep the noiseless closed loop bounded."""
    lam = prob.lam

    def feedback(t, state):
        return -lam * np.tanh(weights.wa @ basis.phi_a(state))

    ro = env.rollout(feedback, horizon, dt, seed=seed)
    ok = np.all(np.isfinite(ro.states))
    checker = getattr(env, "is_admissible", None)
    if checker is not None:
        ok = ok and bool(checker(ro))
    if not ok:
        raise ValueError("initial policy is not admissible: closed loop leaves bounds")


def policy_iteration_model_free(
    env: TrainingEnv,
    basis: BasisSpec,
    prob: AdpProblem,
    noise: ProbingNoise,
    horizon: float,
    dt: float = 1.0,
    interval: float = 60.0,
    tol: float = 1e-3,
    k_max: int = 50,
    seed: int = 0,
    init: Optional[CriticActorWeights] = None,
    n_rollouts: int = 1,
    check_admissible: bool = True,
    diverge_norm: float = 1e6,
) -> TrainingResult:
    """Alternate data collection and the integral least-squares solve.

    Stops when the relative critic-weight change drops below tol or after
    k_max iterations (reported in the log as non-converged). Divergence of
    the weight norm aborts with the log attached.
    """
    weights = init.copy() if init is not None else CriticActorWeights.zeros(basis, prob.n_channels)
    if check_admissible:
        _admissibility_check(env, weights, basis, prob, horizon, dt, seed)
    result = TrainingResult(weights=weights)
    for k in range(k_max):
        samples = collect_samples(
            env,
            weights,
            basis,
            prob,
            noise,
            horizon,
            dt,
            interval,
            seed=seed + k,
            n_rollouts=n_rollouts,
        )
        new_weights, info = irl_lstsq(samples, weights, basis, prob)
        wc_norm = float(np.linalg.norm(new_weights.wc))
        wa_norm = float(np.linalg.norm(new_weights.wa))
        delta = float(
            np.linalg.norm(new_weights.wc - weights.wc)
            / max(1.0, np.linalg.norm(weights.wc))
        )
        result.log.append(
            {
                "iteration": k,
                "wc_norm": wc_norm,
                "wa_norm": wa_norm,
                "delta_wc_rel": delta,
                "lstsq_residual": info["residual"],
                "cond": info["cond"],
                "n_samples": len(samples),
            }
        )
        weights = new_weights
        result.weights = weights
        if wc_norm > diverge_norm or wa_norm > diverge_norm:
            raise NoConvergenceError(
                f"weights diverged at iteration {k} (norm {max(wc_norm, wa_norm):.3g})",
                log=result.log,
            )
        if delta < tol:
            result.converged = True
            break
    return result


@dataclass
class ProbePoint:
    """Augmented state with its model evaluation (drift F and input map S)."""

    state: np.ndarray  # (n,)
    drift: np.ndarray  # (n,)
    input_map: np.ndarray  # (n, m)


ProbeSource = Union[Sequence[ProbePoint], Callable[[int, CriticActorWeights], Sequence[ProbePoint]]]


def _probes_for(source: ProbeSource, k: int, weights: CriticActorWeights):
    if callable(source):
        return source(k, weights)
    return source


def policy_iteration_model_based(
    probe_source: ProbeSource,
    basis: BasisSpec,
    prob: AdpProblem,
    tol: float = 1e-3,
    k_max: int = 50,
    init: Optional[CriticActorWeights] = None,
    diverge_norm: float = 1e6,
) -> TrainingResult:
    """Policy iteration with model access, used to validate the data-only path.

    Evaluation: least squares over probe states of the pointwise Bellman
    identity wc' grad_phi (F + S mu_k) = -(state cost + effort(mu_k)).
    Improvement: project (1/2 lam) R^-1 S' grad V onto the actor basis.
    """
    lam = prob.lam
    weights = init.copy() if init is not None else CriticActorWeights.zeros(basis, prob.n_channels)
    result = TrainingResult(weights=weights)
    for k in range(k_max):
        probes = list(_probes_for(probe_source, k, weights))
        states = np.stack([pp.state for pp in probes])
        drifts = np.stack([pp.drift for pp in probes])
        s_maps = np.stack([pp.input_map for pp in probes])
        grads = basis.grad_phi_batch(states)  # (M, p, n)
        mu_k = weights.mu(basis, states, lam)  # (M, m)
        flow = drifts + np.einsum("mns,ms->mn", s_maps, mu_k)
        a = np.einsum("mpn,mn->mp", grads, flow)
        b = -(prob.state_cost(states) + prob.effort_cost(mu_k))
        wc, info = _solve_reduced(a, b)

        grad_v = np.einsum("mpn,p->mn", grads, wc)  # (M, n)
        d_target = np.einsum("mns,mn->ms", s_maps, grad_v) / (2.0 * lam * prob.gamma)
        phi_a = basis.phi_a(states)
        wa_sol, _, _, _ = np.linalg.lstsq(phi_a, d_target, rcond=None)
        new_weights = CriticActorWeights(wc, wa_sol.T)

        wc_norm = float(np.linalg.norm(new_weights.wc))
        delta = float(
            np.linalg.norm(new_weights.wc - weights.wc)
            / max(1.0, np.linalg.norm(weights.wc))
        )
        result.log.append(
            {
                "iteration": k,
                "wc_norm": wc_norm,
                "wa_norm": float(np.linalg.norm(new_weights.wa)),
                "delta_wc_rel": delta,
                "lstsq_residual": info["residual"],
                "cond": info["cond"],
                "n_probes": len(probes),
            }
        )
        weights = new_weights
        result.weights = weights
        if wc_norm > diverge_norm:
            raise NoConvergenceError(f"weights diverged at iteration {k}", log=result.log)
        if delta < tol:
            result.converged = True
            break
    return result


def bellman_residual(
    weights: CriticActorWeights,
    probes: Sequence[ProbePoint],
    basis: BasisSpec,
    prob: AdpProblem,
) -> float:
    """RMS of the saturated-policy Bellman identity over probe states.

    Residual per state: N'QN + gradV' F + lam^2 sum_i gamma_i ln(1 - tanh^2 D_i)
    with the learned value gradient and actor signal D.
    """
    if not probes:
        raise ValueError("need at least one probe state")
    states = np.stack([pp.state for pp in probes])
    drifts = np.stack([pp.drift for pp in probes])
    grads = basis.grad_phi_batch(states)
    grad_v = np.einsum("mpn,p->mn", grads, weights.wc)
    d = weights.d_signal(basis, states)
    log_term = (prob.lam**2) * (np.log1p(-np.tanh(d) ** 2) @ prob.gamma)
    res = prob.state_cost(states) + np.einsum("mn,mn->m", grad_v, drifts) + log_term
    return float(np.sqrt(np.mean(res**2)))


# ---------------------------------------------------------------------------
# training-artifact serialization

ARTIFACT_VERSION = 1


def save_weights(
    path,
    weights: CriticActorWeights,
    basis: BasisSpec,
    config_hash: str = "",
    log: Optional[list] = None,
    converged: bool = True,
) -> None:
    payload = {
        "version": ARTIFACT_VERSION,
        "basis": basis.descriptor(),
        "wc": [float(v) for v in weights.wc],
        "wa": [[float(v) for v in row] for row in weights.wa],
        "config_hash": config_hash,
        "converged": bool(converged),
        "iteration_log": log or [],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_weights(path) -> tuple[CriticActorWeights, BasisSpec, dict]:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("version") != ARTIFACT_VERSION:
        raise ValueError(f"unsupported artifact version {payload.get('version')}")
    basis = BasisSpec.from_descriptor(payload["basis"])
    weights = CriticActorWeights(np.asarray(payload["wc"]), np.asarray(payload["wa"]))
    meta = {k: payload[k] for k in ("config_hash", "converged", "iteration_log")}
    return weights, basis, meta
