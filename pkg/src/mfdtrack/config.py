"""Experiment configuration: YAML schema, validation, resolution and hashing.

The schema is documented in the README. Every run emits its fully-resolved
configuration (defaults filled in) next to the results; the sha256 of the
canonical JSON dump of that resolved mapping is the config hash embedded in
reports and training artifacts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .adp import BasisSpec
from .augmented import CostWeights
from .demand import DemandNoise, DemandProfile, DemandSegment
from .exceptions import ConfigError
from .mfd import (
    DEFAULT_HOURLY_COEFFS,
    DEFAULT_N_JAM,
    ControlInput,
    DemandVector,
    MfdCurve,
    OdAccumulation,
    TwoRegionNetwork,
)
from .reference import (
    CommandGenerator,
    ReferenceState,
    SetpointInterval,
    SetpointSchedule,
    equilibrium_solve,
)
from .runtime import ActuatorBox

MODE_SCHEDULE = "schedule"
MODE_TRAJECTORY = "trajectory"

_DEFAULTS = {
    "seed": 0,
    "dt_s": 1.0,
    "control_interval_s": 60.0,
    "network": {
        "hourly_coeffs": list(DEFAULT_HOURLY_COEFFS),
        "n_jam_veh": DEFAULT_N_JAM,
        "epsilon_floor_veh": 1.0,
    },
    "actuator": {"u_min": 0.1, "u_max": 0.9},
    "cost": {"q_diag": 1.0e-4, "gamma": [1.0, 1.0], "lam": 0.5},
    # error-anchored features: quadratic critic, linear actor, in the error block
    "basis": {"scaling": [1000.0] * 4, "actor_degree": 1},
    "training": {
        "noise_amplitude": 0.05,
        "noise_components": 8,
        "noise_period_range_s": [40.0, 600.0],
        "tol": 1.0e-3,
        "k_max": 50,
        "interval_s": 60.0,
        "n_rollouts": 10,
        "rollout_horizon_s": 3600.0,
        "initial_spread": 0.4,
    },
}


def _require(d: dict, key: str, ctx: str):
    if key not in d:
        raise ConfigError(f"missing required key '{key}' in {ctx}")
    return d[key]


def _vec(value, length: int, ctx: str) -> list:
    if not isinstance(value, (list, tuple)) or len(value) != length:
        raise ConfigError(f"{ctx} must be a list of {length} numbers, got {value!r}")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{ctx} must be numeric: {exc}") from exc


@dataclass
class ExperimentConfig:
    """Validated, fully-resolved experiment description."""

    raw: dict

    # resolved primitives
    name: str = ""
    mode: str = MODE_SCHEDULE
    seed: int = 0
    horizon_s: float = 0.0
    dt_s: float = 1.0
    control_interval_s: float = 60.0
    resolved: dict = field(default_factory=dict)

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} did not parse to a mapping")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = cls(raw=data)
        cfg._resolve()
        return cfg

    # --- resolution & validation ---

    def _resolve(self) -> None:
        d = dict(self.raw)
        out: dict = {}
        out["name"] = str(d.get("name", "experiment"))
        mode = d.get("mode", MODE_SCHEDULE)
        if mode not in (MODE_SCHEDULE, MODE_TRAJECTORY):
            raise ConfigError(f"mode must be '{MODE_SCHEDULE}' or '{MODE_TRAJECTORY}'")
        out["mode"] = mode
        out["seed"] = int(d.get("seed", _DEFAULTS["seed"]))
        out["horizon_s"] = float(_require(d, "horizon_s", "config"))
        if out["horizon_s"] <= 0:
            raise ConfigError("horizon_s must be positive")
        out["dt_s"] = float(d.get("dt_s", _DEFAULTS["dt_s"]))
        out["control_interval_s"] = float(
            d.get("control_interval_s", _DEFAULTS["control_interval_s"])
        )

        net = {**_DEFAULTS["network"], **d.get("network", {})}
        net["hourly_coeffs"] = _vec(net["hourly_coeffs"], 3, "network.hourly_coeffs")
        net["n_jam_veh"] = float(net["n_jam_veh"])
        net["epsilon_floor_veh"] = float(net["epsilon_floor_veh"])
        out["network"] = net

        act = {**_DEFAULTS["actuator"], **d.get("actuator", {})}
        out["actuator"] = {"u_min": float(act["u_min"]), "u_max": float(act["u_max"])}

        cost = {**_DEFAULTS["cost"], **d.get("cost", {})}
        cost["q_diag"] = float(cost["q_diag"])
        cost["gamma"] = _vec(cost["gamma"], 2, "cost.gamma")
        cost["lam"] = float(cost["lam"])
        out["cost"] = cost

        basis = {**_DEFAULTS["basis"], **d.get("basis", {})}
        scaling = basis["scaling"]
        if not isinstance(scaling, (list, tuple)) or len(scaling) not in (4, 8):
            raise ConfigError("basis.scaling must list 4 (error-only) or 8 magnitudes")
        basis["scaling"] = [float(v) for v in scaling]
        basis["actor_degree"] = int(basis.get("actor_degree", 1))
        out["basis"] = basis

        tr = {**_DEFAULTS["training"], **d.get("training", {})}
        tr["noise_amplitude"] = float(tr["noise_amplitude"])
        tr["noise_components"] = int(tr["noise_components"])
        tr["noise_period_range_s"] = _vec(
            tr["noise_period_range_s"], 2, "training.noise_period_range_s"
        )
        tr["tol"] = float(tr["tol"])
        tr["k_max"] = int(tr["k_max"])
        tr["interval_s"] = float(tr["interval_s"])
        tr["rollout_horizon_s"] = float(tr["rollout_horizon_s"])
        tr["seed"] = int(tr.get("seed", out["seed"]))
        tr["n_rollouts"] = int(tr["n_rollouts"])
        tr["initial_spread"] = float(tr["initial_spread"])
        tr.pop("horizon_s", None)
        out["training"] = tr

        out["initial_veh"] = _vec(_require(d, "initial_veh", "config"), 4, "initial_veh")

        if mode == MODE_SCHEDULE:
            periods = _require(d, "schedule", "config")
            if not isinstance(periods, list) or not periods:
                raise ConfigError("schedule must be a non-empty list of periods")
            resolved_periods = []
            for i, p in enumerate(periods):
                ctx = f"schedule[{i}]"
                resolved_periods.append(
                    {
                        "t_start": float(_require(p, "t_start", ctx)),
                        "t_end": float(_require(p, "t_end", ctx)),
                        "setpoints": _vec(_require(p, "setpoints", ctx), 2, ctx + ".setpoints"),
                        "demand": _vec(_require(p, "demand", ctx), 4, ctx + ".demand"),
                    }
                )
            out["schedule"] = resolved_periods
            if "spc_setpoints" in d and d["spc_setpoints"] is not None:
                out["spc_setpoints"] = _vec(d["spc_setpoints"], 2, "spc_setpoints")
        else:
            ref = d.get("reference", {})
            gate = ref.get("gate", "u_max")
            if gate != "u_max":
                gate = float(gate)
            out["reference"] = {
                "gate": gate,
                "initial_veh": _vec(ref.get("initial_veh", [0.0] * 4), 4, "reference.initial_veh"),
            }
            segs = _require(d, "demand_nominal", "config")
            resolved_segs = []
            for i, s in enumerate(segs):
                ctx = f"demand_nominal[{i}]"
                seg = {
                    "t_start": float(_require(s, "t_start", ctx)),
                    "t_end": float(_require(s, "t_end", ctx)),
                    "q_start": _vec(_require(s, "q_start", ctx), 4, ctx + ".q_start"),
                }
                if "q_end" in s and s["q_end"] is not None:
                    seg["q_end"] = _vec(s["q_end"], 4, ctx + ".q_end")
                resolved_segs.append(seg)
            out["demand_nominal"] = resolved_segs

        noise = d.get("demand_noise")
        if noise is not None:
            out["demand_noise"] = {
                "sigma_rel": float(noise.get("sigma_rel", 0.1)),
                "redraw_interval_s": float(noise.get("redraw_interval_s", 60.0)),
            }
            if noise.get("sigma_abs") is not None:
                out["demand_noise"]["sigma_abs"] = _vec(noise["sigma_abs"], 4, "demand_noise.sigma_abs")

        self.resolved = out
        self.name = out["name"]
        self.mode = out["mode"]
        self.seed = out["seed"]
        self.horizon_s = out["horizon_s"]
        self.dt_s = out["dt_s"]
        self.control_interval_s = out["control_interval_s"]

    # --- derived objects ---

    def config_hash(self) -> str:
        blob = json.dumps(self.resolved, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        data = dict(self.raw)
        data["seed"] = int(seed)
        return ExperimentConfig.from_dict(data)

    def build_network(self) -> TwoRegionNetwork:
        n = self.resolved["network"]
        curve = MfdCurve.from_hourly(*n["hourly_coeffs"], n["n_jam_veh"])
        return TwoRegionNetwork(curve, curve, epsilon_floor=n["epsilon_floor_veh"])

    def build_box(self) -> ActuatorBox:
        a = self.resolved["actuator"]
        return ActuatorBox(a["u_min"], a["u_max"])

    def build_cost(self) -> CostWeights:
        c = self.resolved["cost"]
        return CostWeights.diagonal(q=c["q_diag"], gamma=c["gamma"], lam=c["lam"])

    def build_basis(self) -> BasisSpec:
        scaling = np.asarray(self.resolved["basis"]["scaling"])
        degree = self.resolved["basis"]["actor_degree"]
        if len(scaling) == 4:
            return BasisSpec(scaling, active=(0, 1, 2, 3), n_full=8, actor_degree=degree)
        return BasisSpec(scaling, n_full=8, actor_degree=degree)

    def initial_state(self) -> OdAccumulation:
        return OdAccumulation.from_array(self.resolved["initial_veh"])

    def _noise(self, seed: Optional[int] = None) -> Optional[DemandNoise]:
        spec = self.resolved.get("demand_noise")
        if spec is None:
            return None
        return DemandNoise(
            sigma_rel=spec.get("sigma_rel", 0.1),
            sigma_abs=tuple(spec["sigma_abs"]) if "sigma_abs" in spec else None,
            seed=self.seed if seed is None else seed,
            redraw_interval=spec["redraw_interval_s"],
        )

    def build_demand_profile(self, seed: Optional[int] = None, noisy: bool = True) -> DemandProfile:
        """Realized-demand profile: schedule demands or the nominal segments."""
        noise = self._noise(seed) if noisy else None
        if self.mode == MODE_SCHEDULE:
            periods = self.resolved["schedule"]
            segs = tuple(
                DemandSegment(p["t_start"], p["t_end"], DemandVector.from_array(p["demand"]))
                for p in periods
            )
            return DemandProfile(segs, noise)
        segs = tuple(
            DemandSegment(
                s["t_start"],
                s["t_end"],
                DemandVector.from_array(s["q_start"]),
                DemandVector.from_array(s["q_end"]) if "q_end" in s else None,
            )
            for s in self.resolved["demand_nominal"]
        )
        return DemandProfile(segs, noise)

    def reference_gate(self) -> float:
        ref = self.resolved.get("reference", {})
        gate = ref.get("gate", "u_max")
        return self.resolved["actuator"]["u_max"] if gate == "u_max" else float(gate)

    def build_schedule(self, net: TwoRegionNetwork, constant_setpoints=None) -> SetpointSchedule:
        """Solve the per-period equilibria; constant_setpoints pins one target."""
        if self.mode != MODE_SCHEDULE:
            raise ConfigError("build_schedule requires schedule mode")
        box = self.resolved["actuator"]
        intervals = []
        for p in self.resolved["schedule"]:
            setpoints = constant_setpoints if constant_setpoints is not None else p["setpoints"]
            q = DemandVector.from_array(p["demand"])
            n_star, u_star = equilibrium_solve(
                net, q, setpoints[0], setpoints[1], u_min=box["u_min"], u_max=box["u_max"]
            )
            intervals.append(
                SetpointInterval(p["t_start"], p["t_end"], n_star, u_star, q)
            )
        return SetpointSchedule(tuple(intervals))

    def build_generator(self, net: TwoRegionNetwork, spc: bool = False) -> CommandGenerator:
        if self.mode == MODE_SCHEDULE:
            if spc:
                setpoints = self.resolved.get("spc_setpoints")
                if setpoints is None:
                    raise ConfigError("spc_setpoints required for the SPC controller")
                return CommandGenerator.piecewise(self.build_schedule(net, setpoints), net)
            return CommandGenerator.piecewise(self.build_schedule(net), net)
        if spc:
            raise ConfigError("SPC needs a constant set-point schedule")
        ref = self.resolved["reference"]
        return CommandGenerator.trajectory(
            net,
            self.build_demand_profile(noisy=False),
            horizon=self.horizon_s,
            dt=self.dt_s,
            gate=self.reference_gate(),
            initial=ReferenceState.from_array(ref["initial_veh"]),
        )

    def schedule_periods(self) -> list[tuple[float, float]]:
        if self.mode == MODE_SCHEDULE:
            return [(p["t_start"], p["t_end"]) for p in self.resolved["schedule"]]
        return []

    def dump_resolved(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.resolved, fh, indent=1, sort_keys=True)
            fh.write("\n")
