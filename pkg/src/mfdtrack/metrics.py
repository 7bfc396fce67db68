"""Performance indices computed from simulation traces.

TTS (total time spent, veh s) is the time integral of total accumulation;
CTC (cumulative trip completion, veh) is the time integral of the internal
completion flows (n11/n1) G1 + (n22/n2) G2. Both use composite trapezoids
on the trace grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .mfd import TwoRegionNetwork
from .trace import SimulationTrace

_trapz = np.trapezoid if hasattr(np, "trapezoid") else np.trapz


@dataclass
class MetricsReport:
    tts_veh_s: float
    ctc_veh: float
    tracking_rms: Optional[float] = None  # veh, region totals vs reference
    per_period_rms: list = field(default_factory=list)
    clamp_count: int = 0
    runtime_s: float = 0.0  # in-memory only; excluded from report files

    def to_report_dict(self) -> dict:
        out = {
            "tts_veh_s": self.tts_veh_s,
            "ctc_veh": self.ctc_veh,
            "tracking_rms": self.tracking_rms,
            "clamp_count": self.clamp_count,
        }
        if self.per_period_rms:
            out["per_period_rms"] = self.per_period_rms
        return out


def compute_metrics(
    trace: SimulationTrace,
    net: TwoRegionNetwork,
    periods: Optional[Sequence[tuple[float, float]]] = None,
) -> MetricsReport:
    """TTS/CTC plus tracking statistics when the trace carries a reference."""
    if len(trace) < 2:
        raise ValueError("trace must contain at least two rows")
    t = trace.t
    if np.ptp(np.diff(t)) > 1e-9:
        raise ValueError("trace must be uniformly sampled")
    total = trace.n.sum(axis=1)
    tts = float(_trapz(total, t))
    completion = np.array([net.completion_flow(row) for row in trace.n])
    ctc = float(_trapz(completion, t))

    tracking_rms = None
    per_period = []
    if trace.has_reference:
        totals = trace.region_totals()
        ref_totals = np.stack(
            [trace.nd[:, 0] + trace.nd[:, 1], trace.nd[:, 2] + trace.nd[:, 3]], axis=1
        )
        err = totals - ref_totals
        tracking_rms = float(np.sqrt(np.mean(err**2)))
        for t0, t1 in periods or []:
            mask = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
            if mask.sum() >= 2:
                per_period.append(
                    {
                        "t_start": float(t0),
                        "t_end": float(t1),
                        "rms_veh": float(np.sqrt(np.mean(err[mask] ** 2))),
                        "final_abs_veh": float(np.abs(err[mask][-1]).max()),
                    }
                )
    return MetricsReport(
        tts_veh_s=tts,
        ctc_veh=ctc,
        tracking_rms=tracking_rms,
        per_period_rms=per_period,
        clamp_count=int(np.asarray(trace.clamped).sum()),
    )
