"""Experiment orchestration: training, paired comparisons, report emission.

Reports are JSON with stable key order and no wall-clock content, so a rerun
with the same config and seed is byte-identical; timing is logged separately.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .adp import (
    AdpProblem,
    BasisSpec,
    CriticActorWeights,
    ProbingNoise,
    TrainingResult,
    load_weights,
    policy_iteration_model_based,
    policy_iteration_model_free,
    save_weights,
)
from .config import MODE_SCHEDULE, ExperimentConfig
from .exceptions import ConfigError
from .metrics import MetricsReport, compute_metrics
from .runtime import (
    MODE_SPC,
    MODE_TPC,
    ControllerConfig,
    TrafficTrainingEnv,
    run_closed_loop,
)
from .trace import SimulationTrace

log = logging.getLogger(__name__)


def _report_json(payload: dict, path: Optional[Path]) -> str:
    text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


@dataclass
class TrainedController:
    weights: CriticActorWeights
    basis: BasisSpec
    result: Optional[TrainingResult]
    config_hash: str


def build_training_env(
    cfg: ExperimentConfig, spc: bool = False, net=None
) -> TrafficTrainingEnv:
    net = net or cfg.build_network()
    gen = cfg.build_generator(net, spc=spc)
    fallback = None if cfg.mode == MODE_SCHEDULE else cfg.reference_gate()
    return TrafficTrainingEnv(
        net=net,
        gen=gen,
        profile=cfg.build_demand_profile(seed=cfg.resolved["training"]["seed"]),
        initial=cfg.initial_state(),
        box=cfg.build_box(),
        singular_fallback=fallback,
        control_interval=cfg.control_interval_s,
        initial_spread=cfg.resolved["training"]["initial_spread"],
    )


def train_controller(
    cfg: ExperimentConfig,
    spc: bool = False,
    model_based: bool = False,
    out_path=None,
) -> TrainedController:
    """Run policy iteration for one controller configuration."""
    t0 = time.perf_counter()
    basis = cfg.build_basis()
    prob = AdpProblem.from_cost(cfg.build_cost())
    tr = cfg.resolved["training"]
    env = build_training_env(cfg, spc=spc)
    noise = ProbingNoise.sinusoids(
        n_channels=2,
        seed=tr["seed"],
        amplitude=tr["noise_amplitude"],
        n_components=tr["noise_components"],
        period_range=tuple(tr["noise_period_range_s"]),
    )
    if model_based:
        # mirror the data-only procedure: same seeds, same behavior rollouts,
        # probe states subsampled from the identical closed-loop trajectories
        def probe_source(k: int, weights: CriticActorWeights):
            lam = prob.lam

            def feedback(t, state):
                return -lam * np.tanh(weights.wa @ basis.phi_a(state)) + noise(t)

            points = []
            for r in range(tr["n_rollouts"]):
                ro = env.rollout(
                    feedback,
                    tr["rollout_horizon_s"],
                    cfg.dt_s,
                    seed=(tr["seed"] + k) * 1000 + r,
                )
                points += env.probe_points(ro, stride=10)
            return points

        result = policy_iteration_model_based(
            probe_source, basis, prob, tol=tr["tol"], k_max=tr["k_max"]
        )
    else:
        result = policy_iteration_model_free(
            env,
            basis,
            prob,
            noise,
            horizon=tr["rollout_horizon_s"],
            dt=cfg.dt_s,
            interval=tr["interval_s"],
            tol=tr["tol"],
            k_max=tr["k_max"],
            seed=tr["seed"],
            n_rollouts=tr["n_rollouts"],
        )
    elapsed = time.perf_counter() - t0
    log.info(
        "training (%s%s): %d iterations, converged=%s, %.1f s",
        "spc" if spc else "tpc",
        ", model-based" if model_based else "",
        result.iterations,
        result.converged,
        elapsed,
    )
    controller = TrainedController(
        weights=result.weights,
        basis=basis,
        result=result,
        config_hash=cfg.config_hash(),
    )
    if out_path is not None:
        save_weights(
            out_path,
            result.weights,
            basis,
            config_hash=controller.config_hash,
            log=result.log,
            converged=result.converged,
        )
    return controller


def load_or_train(
    cfg: ExperimentConfig, path, spc: bool = False, model_based: bool = False
) -> TrainedController:
    """Reuse a weights artifact when its config hash matches, else retrain."""
    path = Path(path)
    if path.exists():
        weights, basis, meta = load_weights(path)
        if meta.get("config_hash") == cfg.config_hash():
            return TrainedController(weights, basis, None, meta["config_hash"])
        log.info("artifact %s has stale config hash; retraining", path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return train_controller(cfg, spc=spc, model_based=model_based, out_path=path)


def _controller_config(
    cfg: ExperimentConfig, trained: TrainedController, mode: str, net
) -> ControllerConfig:
    spc = mode == MODE_SPC
    fallback = None if cfg.mode == MODE_SCHEDULE else cfg.reference_gate()
    return ControllerConfig(
        mode=mode,
        gen=cfg.build_generator(net, spc=spc),
        weights=trained.weights,
        basis=trained.basis,
        cost=cfg.build_cost(),
        box=cfg.build_box(),
        control_interval=cfg.control_interval_s,
        singular_fallback=fallback,
    )


@dataclass
class ComparisonResult:
    traces: dict
    metrics: dict
    deltas: dict
    report: dict
    config_hash: str


def run_example1(
    cfg: ExperimentConfig,
    outdir=None,
    figures: bool = True,
    weights_dir=None,
) -> ComparisonResult:
    """Paired TPC-vs-SPC run on the set-point schedule, identical seeds."""
    if cfg.mode != MODE_SCHEDULE:
        raise ConfigError("paired comparison requires a schedule-mode config")
    net = cfg.build_network()
    wdir = Path(weights_dir) if weights_dir else (Path(outdir) if outdir else Path("."))
    tpc = load_or_train(cfg, wdir / "weights_tpc.json", spc=False)
    spc = load_or_train(cfg, wdir / "weights_spc.json", spc=True)

    traces = {}
    metrics = {}
    for label, trained, mode in (("tpc", tpc, MODE_TPC), ("spc", spc, MODE_SPC)):
        t0 = time.perf_counter()
        ctrl = _controller_config(cfg, trained, mode, net)
        trace = run_closed_loop(
            net,
            ctrl,
            cfg.build_demand_profile(seed=cfg.seed),
            cfg.initial_state(),
            cfg.horizon_s,
            dt=cfg.dt_s,
        )
        rep = compute_metrics(trace, net, periods=cfg.schedule_periods())
        rep.runtime_s = time.perf_counter() - t0
        traces[label] = trace
        metrics[label] = rep

    deltas = {
        "tts_pct": 100.0 * (metrics["tpc"].tts_veh_s - metrics["spc"].tts_veh_s)
        / metrics["spc"].tts_veh_s,
        "ctc_pct": 100.0 * (metrics["tpc"].ctc_veh - metrics["spc"].ctc_veh)
        / metrics["spc"].ctc_veh,
    }
    report = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "controllers": {k: m.to_report_dict() for k, m in metrics.items()},
        "deltas": deltas,
    }
    result = ComparisonResult(traces, metrics, deltas, report, cfg.config_hash())
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        for label, trace in traces.items():
            trace.to_csv(outdir / f"trace_{label}.csv")
        _report_json(report, outdir / "report.json")
        cfg.dump_resolved(outdir / "resolved_config.json")
        if figures:
            from . import plots

            plots.render_compare_figures(traces, metrics, outdir)
    return result


@dataclass
class TrajectoryRunResult:
    trace: SimulationTrace
    metrics: MetricsReport
    final_hour_rms_pct: float
    terminal_controls: tuple
    report: dict
    config_hash: str


def _final_hour_stats(trace: SimulationTrace, window_s: float = 3600.0):
    t = trace.t
    mask = t >= t[-1] - window_s + 1e-9
    totals = trace.region_totals()[mask]
    ref = np.stack(
        [trace.nd[mask, 0] + trace.nd[mask, 1], trace.nd[mask, 2] + trace.nd[mask, 3]],
        axis=1,
    )
    rms = float(np.sqrt(np.mean((totals - ref) ** 2)))
    ref_mean = float(ref.mean())
    return rms, ref_mean


def run_example2(
    cfg: ExperimentConfig,
    outdir=None,
    figures: bool = True,
    weights_dir=None,
    seed: Optional[int] = None,
) -> TrajectoryRunResult:
    """Track the maximize-completion trajectory under noisy demand."""
    if cfg.mode == MODE_SCHEDULE:
        raise ConfigError("trajectory run requires a trajectory-mode config")
    net = cfg.build_network()
    wdir = Path(weights_dir) if weights_dir else (Path(outdir) if outdir else Path("."))
    trained = load_or_train(cfg, wdir / "weights_tpc.json", spc=False)
    run_seed = cfg.seed if seed is None else seed

    t0 = time.perf_counter()
    ctrl = _controller_config(cfg, trained, MODE_TPC, net)
    trace = run_closed_loop(
        net,
        ctrl,
        cfg.build_demand_profile(seed=run_seed),
        cfg.initial_state(),
        cfg.horizon_s,
        dt=cfg.dt_s,
    )
    rep = compute_metrics(trace, net)
    rep.runtime_s = time.perf_counter() - t0

    rms, ref_mean = _final_hour_stats(trace)
    rms_pct = 100.0 * rms / max(ref_mean, 1e-9)
    # terminal control level: smallest applied metering over the final 30 min
    mask = trace.t >= trace.t[-1] - 1800.0 + 1e-9
    u_tail = trace.u[mask]
    terminal = (float(u_tail[:, 0].min()), float(u_tail[:, 1].min()))

    report = {
        "config_hash": cfg.config_hash(),
        "seed": run_seed,
        "tts_veh_s": rep.tts_veh_s,
        "ctc_veh": rep.ctc_veh,
        "tracking_rms": rep.tracking_rms,
        "final_hour_rms_pct": rms_pct,
        "terminal_controls": list(terminal),
    }
    result = TrajectoryRunResult(trace, rep, rms_pct, terminal, report, cfg.config_hash())
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        trace.to_csv(outdir / "trace_tpc.csv")
        _report_json(report, outdir / "report.json")
        cfg.dump_resolved(outdir / "resolved_config.json")
        if figures:
            from . import plots

            plots.render_run_figures(trace, outdir, label="tpc")
    return result


def run_single(
    cfg: ExperimentConfig,
    controller: str = MODE_TPC,
    outdir=None,
    figures: bool = True,
    weights_dir=None,
) -> tuple[SimulationTrace, MetricsReport]:
    """One closed-loop run for `simulate`; trains weights when required."""
    net = cfg.build_network()
    if controller == "uncontrolled":
        ctrl = ControllerConfig(mode="uncontrolled", box=cfg.build_box())
    else:
        wdir = Path(weights_dir) if weights_dir else (Path(outdir) if outdir else Path("."))
        suffix = "spc" if controller == MODE_SPC else "tpc"
        trained = load_or_train(cfg, wdir / f"weights_{suffix}.json", spc=controller == MODE_SPC)
        ctrl = _controller_config(cfg, trained, controller, net)
    trace = run_closed_loop(
        net,
        ctrl,
        cfg.build_demand_profile(seed=cfg.seed),
        cfg.initial_state(),
        cfg.horizon_s,
        dt=cfg.dt_s,
    )
    rep = compute_metrics(trace, net, periods=cfg.schedule_periods())
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        trace.to_csv(outdir / f"trace_{controller}.csv")
        payload = {"config_hash": cfg.config_hash(), "seed": cfg.seed, **rep.to_report_dict()}
        _report_json(payload, outdir / "report.json")
        cfg.dump_resolved(outdir / "resolved_config.json")
        if figures:
            from . import plots

            plots.render_run_figures(trace, outdir, label=controller)
    return trace, rep


def export_reference(cfg: ExperimentConfig, outdir) -> Path:
    """Write the reference trajectory CSV (nd_ prefixed schema)."""
    import csv

    net = cfg.build_network()
    gen = cfg.build_generator(net)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "reference.csv"
    step = cfg.control_interval_s
    n_rows = int(round(cfg.horizon_s / step)) + 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "nd_11", "nd_12", "nd_21", "nd_22"])
        for i in range(n_rows):
            t = i * step
            nd, _ = gen.reference_at(min(t, gen.t_end))
            writer.writerow(
                [format(t, ".12g")] + [format(v, ".12g") for v in nd.as_array()]
            )
    return path
