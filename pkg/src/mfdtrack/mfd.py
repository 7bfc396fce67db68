"""Two-region MFD traffic plant.

Unit conventions
----------------
All quantities use vehicles (veh) and seconds:

- accumulations n_ij, n_i: veh
- demand q_ij: veh/s
- trip completion G(n): veh/s
- metering rates u_12, u_21: dimensionless in [0, 1]

The trip-completion curve is a cubic G(n) = a3 n^3 + a2 n^2 + a1 n with
coefficients already expressed in veh/s; curves calibrated against hourly
flow data should be built with :meth:`MfdCurve.from_hourly`, which folds the
1/3600 conversion into the stored coefficients.

State layout for array kernels is always ``[n11, n12, n21, n22]`` (vehicles
accumulated in region i bound for region j), controls ``[u12, u21]``, demand
``[q11, q12, q21, q22]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .trace import SimulationTrace

# Cubic trip-completion coefficients in veh/h units used by the shipped
# example configs (two identical regions, jam at 10000 veh).
DEFAULT_HOURLY_COEFFS = (1.4877e-7, -2.9815e-3, 15.0912)
DEFAULT_N_JAM = 10000.0


@dataclass(frozen=True)
class MfdCurve:
    """Cubic trip-completion curve for one region.

    Attributes
    ----------
    a3, a2, a1:
        Cubic/quadratic/linear coefficients in 1/(veh^2 s), 1/(veh s), 1/s.
    n_jam:
        Jam accumulation (veh); the curve domain is [0, n_jam].
    n_crit, g_max:
        Derived: argmax and maximum of G on [0, n_jam], cached at build time.
    """

    a3: float
    a2: float
    a1: float
    n_jam: float
    n_crit: float = field(init=False)
    g_max: float = field(init=False)

    def __post_init__(self):
        if self.n_jam <= 0:
            raise ValueError("n_jam must be positive")
        n_crit = _interior_argmax(self.a3, self.a2, self.a1, self.n_jam)
        object.__setattr__(self, "n_crit", n_crit)
        object.__setattr__(self, "g_max", self._raw(n_crit))
        if self._min_on_domain() < -1e-12:
            raise ValueError("G(n) must be non-negative on [0, n_jam]")

    @classmethod
    def from_hourly(cls, a3: float, a2: float, a1: float, n_jam: float) -> "MfdCurve":
        """Build a curve from coefficients calibrated in veh/h flow units."""
        return cls(a3 / 3600.0, a2 / 3600.0, a1 / 3600.0, n_jam)

    def _raw(self, n):
        return ((self.a3 * n + self.a2) * n + self.a1) * n

    def _min_on_domain(self) -> float:
        candidates = [0.0, self.n_jam]
        # stationary points of the cubic inside the domain
        disc = 4 * self.a2 * self.a2 - 12 * self.a3 * self.a1
        if self.a3 != 0.0 and disc >= 0:
            r = math.sqrt(disc)
            for root in ((-2 * self.a2 - r) / (6 * self.a3), (-2 * self.a2 + r) / (6 * self.a3)):
                if 0.0 < root < self.n_jam:
                    candidates.append(root)
        elif self.a3 == 0.0 and self.a2 != 0.0:
            vertex = -self.a1 / (2 * self.a2)
            if 0.0 < vertex < self.n_jam:
                candidates.append(vertex)
        return min(self._raw(c) for c in candidates)

    def flow(self, n):
        """Trip completion rate G(n) in veh/s; domain error outside [0, n_jam]."""
        arr = np.asarray(n, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > self.n_jam):
            raise ValueError(f"accumulation outside [0, {self.n_jam}]")
        out = ((self.a3 * arr + self.a2) * arr + self.a1) * arr
        return float(out) if np.isscalar(n) or arr.ndim == 0 else out

    def flow_clipped(self, n: float) -> float:
        """G evaluated with n clipped into [0, n_jam] (integrator internals)."""
        if n < 0.0:
            n = 0.0
        elif n > self.n_jam:
            n = self.n_jam
        return ((self.a3 * n + self.a2) * n + self.a1) * n


def _interior_argmax(a3: float, a2: float, a1: float, n_jam: float) -> float:
    """Argmax of the cubic on [0, n_jam] via the stationary points of G'."""
    maxima = []
    if a3 == 0.0:
        if a2 == 0.0:
            raise ValueError("curve has no interior maximum (linear G)")
        vertex = -a1 / (2 * a2)
        if a2 < 0 and 0.0 < vertex < n_jam:
            maxima.append(vertex)
    else:
        disc = 4 * a2 * a2 - 12 * a3 * a1
        if disc >= 0:
            r = math.sqrt(disc)
            for root in ((-2 * a2 - r) / (6 * a3), (-2 * a2 + r) / (6 * a3)):
                # local max where G'' = 6 a3 n + 2 a2 < 0
                if 0.0 < root < n_jam and 6 * a3 * root + 2 * a2 < 0:
                    maxima.append(root)
    if not maxima:
        raise ValueError("curve has no interior maximum on (0, n_jam)")
    if len(maxima) > 1:
        raise ValueError("curve maximum on (0, n_jam) is not unique")
    return maxima[0]


@dataclass(frozen=True)
class OdAccumulation:
    """OD-level plant state: vehicles in region i with destination j."""

    n11: float
    n12: float
    n21: float
    n22: float

    def __post_init__(self):
        for name in ("n11", "n12", "n21", "n22"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")

    @classmethod
    def from_array(cls, arr) -> "OdAccumulation":
        a = np.asarray(arr, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.n11, self.n12, self.n21, self.n22])

    @property
    def n1(self) -> float:
        return self.n11 + self.n12

    @property
    def n2(self) -> float:
        return self.n21 + self.n22


@dataclass(frozen=True)
class DemandVector:
    """OD travel demand rates (veh/s)."""

    q11: float
    q12: float
    q21: float
    q22: float

    def __post_init__(self):
        for name in ("q11", "q12", "q21", "q22"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")

    @classmethod
    def from_array(cls, arr) -> "DemandVector":
        a = np.asarray(arr, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.q11, self.q12, self.q21, self.q22])

    def total(self) -> float:
        return self.q11 + self.q12 + self.q21 + self.q22


@dataclass(frozen=True)
class ControlInput:
    """Perimeter metering rates for the two transfer directions."""

    u12: float
    u21: float

    def __post_init__(self):
        for name in ("u12", "u21"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def from_array(cls, arr) -> "ControlInput":
        a = np.asarray(arr, dtype=float)
        return cls(float(a[0]), float(a[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.u12, self.u21])


@dataclass(frozen=True)
class TwoRegionNetwork:
    """Two MFD regions coupled by metered transfer flows."""

    curve1: MfdCurve
    curve2: MfdCurve
    epsilon_floor: float = 1.0

    def __post_init__(self):
        if self.epsilon_floor <= 0:
            raise ValueError("epsilon_floor must be positive")

    @classmethod
    def default(cls) -> "TwoRegionNetwork":
        curve = MfdCurve.from_hourly(*DEFAULT_HOURLY_COEFFS, DEFAULT_N_JAM)
        return cls(curve, curve)

    def validate_state(self, n: OdAccumulation) -> None:
        if n.n1 > self.curve1.n_jam:
            raise ValueError(f"region-1 total {n.n1} exceeds jam {self.curve1.n_jam}")
        if n.n2 > self.curve2.n_jam:
            raise ValueError(f"region-2 total {n.n2} exceeds jam {self.curve2.n_jam}")

    # --- array kernels (hot path; G clipped, ratios floored) ---

    def rhs(self, n, u, q) -> np.ndarray:
        """K(n, u, q): OD accumulation rates of change (veh/s)."""
        n11, n12, n21, n22 = n[0], n[1], n[2], n[3]
        n1 = n11 + n12
        n2 = n21 + n22
        g1 = self.curve1.flow_clipped(n1)
        g2 = self.curve2.flow_clipped(n2)
        d1 = n1 if n1 > self.epsilon_floor else self.epsilon_floor
        d2 = n2 if n2 > self.epsilon_floor else self.epsilon_floor
        t12 = n12 / d1 * g1  # sending flow region 1 -> 2 before metering
        t21 = n21 / d2 * g2
        c1 = n11 / d1 * g1  # internal completion flows
        c2 = n22 / d2 * g2
        u12, u21 = u[0], u[1]
        return np.array(
            [
                -c1 + u21 * t21 + q[0],
                -u12 * t12 + q[1],
                -u21 * t21 + q[2],
                -c2 + u12 * t12 + q[3],
            ]
        )

    def drift_input(self, n, q) -> tuple[np.ndarray, np.ndarray]:
        """Affine split: rhs(n, u, q) == f + s @ u for all u."""
        n11, n12, n21, n22 = n[0], n[1], n[2], n[3]
        n1 = n11 + n12
        n2 = n21 + n22
        g1 = self.curve1.flow_clipped(n1)
        g2 = self.curve2.flow_clipped(n2)
        d1 = n1 if n1 > self.epsilon_floor else self.epsilon_floor
        d2 = n2 if n2 > self.epsilon_floor else self.epsilon_floor
        t12 = n12 / d1 * g1
        t21 = n21 / d2 * g2
        f = np.array([-n11 / d1 * g1 + q[0], q[1], q[2], -n22 / d2 * g2 + q[3]])
        s = np.array([[0.0, t21], [-t12, 0.0], [0.0, -t21], [t12, 0.0]])
        return f, s

    def completion_flow(self, n) -> float:
        """Internal trip-completion flow (n11/n1) G1 + (n22/n2) G2 (veh/s)."""
        n1 = n[0] + n[1]
        n2 = n[2] + n[3]
        d1 = n1 if n1 > self.epsilon_floor else self.epsilon_floor
        d2 = n2 if n2 > self.epsilon_floor else self.epsilon_floor
        return n[0] / d1 * self.curve1.flow_clipped(n1) + n[3] / d2 * self.curve2.flow_clipped(n2)


# --- public operations ---


def trip_completion(curve: MfdCurve, n: float) -> float:
    """G(n) in veh/s for n in [0, n_jam]."""
    return curve.flow(n)


def critical_accumulation(curve: MfdCurve) -> float:
    """Accumulation maximizing G on [0, n_jam]."""
    return curve.n_crit


def dynamics_rhs(
    net: TwoRegionNetwork, n: OdAccumulation, u: ControlInput, q: DemandVector
) -> np.ndarray:
    """Flow-conservation dynamics K(n, u, q); returns (4,) veh/s."""
    net.validate_state(n)
    return net.rhs(n.as_array(), u.as_array(), q.as_array())


def drift_and_input(
    net: TwoRegionNetwork, n: OdAccumulation, q: DemandVector
) -> tuple[np.ndarray, np.ndarray]:
    """Drift f(n) (4,) and input map s(n) (4, 2) with rhs = f + s u."""
    net.validate_state(n)
    return net.drift_input(n.as_array(), q.as_array())


def _check_grid(dt: float, control_interval: float, trace_interval: float, span: float):
    def divides(small, big):
        k = round(big / small)
        return k >= 1 and abs(k * small - big) < 1e-9

    if dt <= 0:
        raise ValueError("dt must be positive")
    if not divides(dt, control_interval):
        raise ValueError(f"dt={dt} must divide the control interval {control_interval}")
    if not divides(dt, trace_interval) or not divides(trace_interval, control_interval):
        raise ValueError("trace interval must be a multiple of dt and divide the control interval")
    if not divides(control_interval, span):
        raise ValueError("horizon must be a whole number of control intervals")


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], n: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(n)
    k2 = rhs(n + 0.5 * dt * k1)
    k3 = rhs(n + 0.5 * dt * k2)
    k4 = rhs(n + dt * k3)
    return n + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(
    net: TwoRegionNetwork,
    initial: OdAccumulation,
    controller: Callable[[float, OdAccumulation], ControlInput],
    demand: Callable[[float], DemandVector],
    t0: float,
    t1: float,
    dt: float = 1.0,
    control_interval: float = 60.0,
    trace_interval: float = 60.0,
) -> SimulationTrace:
    """Fixed-step RK4 closed-loop integration.

    The controller and demand are sampled at the start of each control
    interval and held constant within it (zero-order hold). After every
    internal step the state is clamped componentwise to be non-negative and
    the region totals are rescaled down to the jam accumulations; every such
    event is recorded. Trace rows are emitted every ``trace_interval``
    seconds; each row carries the control/demand applied on the interval
    starting at its timestamp (the terminal row repeats the last applied
    values), and a flag marking clamping anywhere in that interval.
    """
    _check_grid(dt, control_interval, trace_interval, t1 - t0)
    net.validate_state(initial)

    steps_per_ctrl = round(control_interval / dt)
    traces_per_ctrl = round(control_interval / trace_interval)
    steps_per_trace = round(trace_interval / dt)
    n_ctrl = round((t1 - t0) / control_interval)

    jam1 = net.curve1.n_jam
    jam2 = net.curve2.n_jam

    n = initial.as_array().copy()
    rows_t, rows_n, rows_u, rows_q, rows_flag = [t0], [n.copy()], [], [], []
    clamp_events: list[tuple[float, str]] = []
    cum_inflow = 0.0
    cum_completion = 0.0
    clamp_mass = 0.0
    comp_prev = net.completion_flow(n)

    t = t0
    for _ in range(n_ctrl):
        u_obj = controller(t, OdAccumulation.from_array(n))
        q_obj = demand(t)
        u = u_obj.as_array()
        q = q_obj.as_array()
        q_total = float(q.sum())
        for k_trace in range(traces_per_ctrl):
            interval_clamped = False
            for _ in range(steps_per_trace):
                k1 = net.rhs(n, u, q)
                k2 = net.rhs(n + 0.5 * dt * k1, u, q)
                k3 = net.rhs(n + 0.5 * dt * k2, u, q)
                k4 = net.rhs(n + dt * k3, u, q)
                n_new = n + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                # box enforcement: components >= 0, region totals <= jam
                total_before = n_new.sum()
                if n_new[0] < 0 or n_new[1] < 0 or n_new[2] < 0 or n_new[3] < 0:
                    n_new = np.maximum(n_new, 0.0)
                    clamp_events.append((t, "negative component"))
                    interval_clamped = True
                r1 = n_new[0] + n_new[1]
                if r1 > jam1:
                    n_new[:2] *= jam1 / r1
                    clamp_events.append((t, "region-1 jam"))
                    interval_clamped = True
                r2 = n_new[2] + n_new[3]
                if r2 > jam2:
                    n_new[2:] *= jam2 / r2
                    clamp_events.append((t, "region-2 jam"))
                    interval_clamped = True
                clamp_mass += n_new.sum() - total_before
                n = n_new
                t += dt
                comp = net.completion_flow(n)
                cum_completion += 0.5 * dt * (comp_prev + comp)
                cum_inflow += dt * q_total
                comp_prev = comp
            rows_t.append(t)
            rows_n.append(n.copy())
            rows_u.append(u.copy())
            rows_q.append(q.copy())
            rows_flag.append(1 if interval_clamped else 0)

    # forward convention: row i holds the inputs applied on [t_i, t_i + trace_interval)
    # and the clamp flag for that interval; the terminal row repeats the last inputs.
    return SimulationTrace(
        t=np.array(rows_t),
        n=np.array(rows_n),
        u=np.array(rows_u + [rows_u[-1]]),
        q=np.array(rows_q + [rows_q[-1]]),
        clamped=np.array(rows_flag + [0], dtype=int),
        dt=dt,
        cum_inflow_veh=cum_inflow,
        cum_completion_veh=cum_completion,
        clamp_mass_veh=clamp_mass,
        clamp_events=clamp_events,
    )
