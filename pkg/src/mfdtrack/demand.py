"""Demand profiles: piecewise(-linear) nominal patterns plus optional noise.

Noise draws are truncated Gaussian (negative draws cut to zero), redrawn once
per redraw interval, and fully determined by ``(seed, interval_index)`` so a
profile realizes identically regardless of query order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .mfd import DemandVector


@dataclass(frozen=True)
class DemandSegment:
    """Nominal demand on [t_start, t_end); linear between q_start and q_end."""

    t_start: float
    t_end: float
    q_start: DemandVector
    q_end: Optional[DemandVector] = None  # None -> constant segment

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError("segment must have positive duration")

    def value_at(self, t: float) -> np.ndarray:
        q0 = self.q_start.as_array()
        if self.q_end is None:
            return q0
        w = (t - self.t_start) / (self.t_end - self.t_start)
        return q0 + w * (self.q_end.as_array() - q0)


@dataclass(frozen=True)
class DemandNoise:
    """Truncated-Gaussian perturbation redrawn every redraw_interval seconds.

    sigma_rel scales each component's std with its nominal value; sigma_abs
    (veh/s per component) overrides it when given.
    """

    sigma_rel: float = 0.1
    sigma_abs: Optional[tuple[float, float, float, float]] = None
    seed: int = 0
    redraw_interval: float = 60.0

    def __post_init__(self):
        if self.sigma_rel < 0:
            raise ValueError("sigma_rel must be non-negative")
        if self.redraw_interval <= 0:
            raise ValueError("redraw_interval must be positive")


@dataclass(frozen=True)
class DemandProfile:
    """Piecewise nominal demand with optional per-interval noise."""

    segments: tuple[DemandSegment, ...]
    noise: Optional[DemandNoise] = None

    def __post_init__(self):
        if not self.segments:
            raise ValueError("profile needs at least one segment")
        for prev, cur in zip(self.segments, self.segments[1:]):
            if not math.isclose(prev.t_end, cur.t_start, abs_tol=1e-9):
                raise ValueError("segments must be contiguous")

    @classmethod
    def constant(cls, q: DemandVector, horizon: float, noise=None) -> "DemandProfile":
        return cls((DemandSegment(0.0, horizon, q),), noise)

    @classmethod
    def piecewise_constant(
        cls, breaks: Sequence[float], values: Sequence[DemandVector], noise=None
    ) -> "DemandProfile":
        """breaks: K+1 edge times; values: K demand vectors."""
        if len(breaks) != len(values) + 1:
            raise ValueError("need one more break than value")
        segs = tuple(
            DemandSegment(breaks[i], breaks[i + 1], values[i]) for i in range(len(values))
        )
        return cls(segs, noise)

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def _segment_at(self, t: float) -> DemandSegment:
        if t < self.t_start - 1e-9 or t > self.t_end + 1e-9:
            raise ValueError(f"t={t} outside profile horizon [{self.t_start}, {self.t_end}]")
        for seg in self.segments:
            if t < seg.t_end:
                return seg
        return self.segments[-1]

    def nominal_at(self, t: float) -> DemandVector:
        return DemandVector.from_array(self._segment_at(t).value_at(t))

    def realize(self, t: float) -> DemandVector:
        """Nominal value plus the noise draw of the redraw interval containing t."""
        nominal = self._segment_at(t).value_at(t)
        if self.noise is None:
            return DemandVector.from_array(nominal)
        k = int(math.floor((t - self.t_start) / self.noise.redraw_interval + 1e-9))
        rng = np.random.default_rng([self.noise.seed, k])
        if self.noise.sigma_abs is not None:
            sigma = np.asarray(self.noise.sigma_abs, dtype=float)
        else:
            sigma = self.noise.sigma_rel * nominal
        draw = nominal + rng.standard_normal(4) * sigma
        return DemandVector.from_array(np.maximum(draw, 0.0))

    def with_seed(self, seed: int) -> "DemandProfile":
        if self.noise is None:
            return self
        noise = DemandNoise(
            sigma_rel=self.noise.sigma_rel,
            sigma_abs=self.noise.sigma_abs,
            seed=seed,
            redraw_interval=self.noise.redraw_interval,
        )
        return DemandProfile(self.segments, noise)

    def without_noise(self) -> "DemandProfile":
        return DemandProfile(self.segments, None)
