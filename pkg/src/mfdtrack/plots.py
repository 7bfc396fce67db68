"""Figure rendering for the report path (PNG files next to CSV/JSON outputs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_COLORS = {"tpc": "black", "spc": "tab:red", "uncontrolled": "tab:gray"}


def _hours(t: np.ndarray) -> np.ndarray:
    return t / 3600.0


def plot_region_totals(traces: dict, path) -> None:
    """Region accumulations over time for one or more runs, reference dashed."""
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ref_drawn = False
    for label, trace in traces.items():
        th = _hours(trace.t)
        totals = trace.region_totals()
        color = _COLORS.get(label)
        for r in range(2):
            axes[r].plot(th, totals[:, r], label=label, color=color, lw=1.2)
        if trace.has_reference and not ref_drawn:
            nd1 = trace.nd[:, 0] + trace.nd[:, 1]
            nd2 = trace.nd[:, 2] + trace.nd[:, 3]
            axes[0].plot(th, nd1, "b:", lw=1.5, label="reference")
            axes[1].plot(th, nd2, "b:", lw=1.5)
            ref_drawn = True
    for r, ax in enumerate(axes):
        ax.set_ylabel(f"$n_{r + 1}$ (veh)")
        ax.grid(alpha=0.3)
    axes[0].legend(loc="best", fontsize=9)
    axes[1].set_xlabel("time (h)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_od_states(trace, path, label: str = "") -> None:
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    th = _hours(trace.t)
    names = ["$n_{11}$", "$n_{12}$", "$n_{21}$", "$n_{22}$"]
    for k, ax in enumerate(axes.flat):
        ax.plot(th, trace.n[:, k], "k-", lw=1.2, label=label or "state")
        if trace.has_reference:
            ax.plot(th, trace.nd[:, k], "b:", lw=1.5, label="reference")
        ax.set_ylabel(f"{names[k]} (veh)")
        ax.grid(alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("time (h)")
    axes[0, 0].legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_controls(trace, path, label: str = "") -> None:
    fig, axes = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    th = _hours(trace.t)
    names = ["$u_{12}$", "$u_{21}$"]
    for k, ax in enumerate(axes):
        ax.step(th, trace.u[:, k], "k-", lw=1.0, where="post", label="applied")
        if trace.us is not None:
            ax.plot(th, trace.us[:, k], "g--", lw=1.0, label="feedforward")
        ax.set_ylabel(names[k])
        ax.set_ylim(-0.05, 1.05)
        ax.grid(alpha=0.3)
    axes[0].legend(loc="best", fontsize=9)
    axes[1].set_xlabel("time (h)")
    if label:
        axes[0].set_title(label)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_metric_bars(metrics: dict, path) -> None:
    """TTS / CTC comparison bars across controllers."""
    labels = list(metrics)
    tts = [metrics[k].tts_veh_s / 1e7 for k in labels]
    ctc = [metrics[k].ctc_veh / 1e4 for k in labels]
    fig, axes = plt.subplots(1, 2, figsize=(8, 4))
    x = np.arange(len(labels))
    colors = [_COLORS.get(k, "tab:blue") for k in labels]
    axes[0].bar(x, tts, color=colors)
    axes[0].set_xticks(x, labels)
    axes[0].set_ylabel(r"TTS ($\times 10^7$ veh s)")
    axes[1].bar(x, ctc, color=colors)
    axes[1].set_xticks(x, labels)
    axes[1].set_ylabel(r"CTC ($\times 10^4$ veh)")
    for ax in axes:
        ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_run_figures(trace, outdir, label: str = "run") -> list[Path]:
    outdir = Path(outdir)
    paths = [
        outdir / f"fig_totals_{label}.png",
        outdir / f"fig_od_states_{label}.png",
        outdir / f"fig_controls_{label}.png",
    ]
    plot_region_totals({label: trace}, paths[0])
    plot_od_states(trace, paths[1], label=label)
    plot_controls(trace, paths[2], label=label)
    return paths


def render_compare_figures(traces: dict, metrics: dict, outdir) -> list[Path]:
    outdir = Path(outdir)
    paths = [outdir / "fig_totals_compare.png", outdir / "fig_metrics.png"]
    plot_region_totals(traces, paths[0])
    plot_metric_bars(metrics, paths[1])
    for label, trace in traces.items():
        paths += render_run_figures(trace, outdir, label=label)[1:]
    return paths
