"""Simulation trace container and CSV schema.

Base columns (one row per trace interval, 60 s by default)::

    t, n11, n12, n21, n22, u12, u21, q11, q12, q21, q22, clamped_flag

Closed-loop runs extend the schema with reference, error, feedback and
feedforward columns::

    nd_11, nd_12, nd_21, nd_22, e_11, e_12, e_21, e_22,
    mu_12, mu_21, us_12, us_21

Row conventions: ``n`` (and ``nd``/``e``) are instantaneous states at ``t``;
``u``, ``q``, ``mu``, ``us`` and ``clamped_flag`` describe the interval
starting at ``t`` (the terminal row repeats the last applied inputs).
Floats are written with repr-stable ``%.12g`` formatting so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

BASE_COLUMNS = [
    "t",
    "n11",
    "n12",
    "n21",
    "n22",
    "u12",
    "u21",
    "q11",
    "q12",
    "q21",
    "q22",
    "clamped_flag",
]

EXT_COLUMNS = [
    "nd_11",
    "nd_12",
    "nd_21",
    "nd_22",
    "e_11",
    "e_12",
    "e_21",
    "e_22",
    "mu_12",
    "mu_21",
    "us_12",
    "us_21",
]


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


@dataclass
class SimulationTrace:
    """Time series of a single integration or closed-loop run."""

    t: np.ndarray  # (K,)
    n: np.ndarray  # (K, 4)
    u: np.ndarray  # (K, 2)
    q: np.ndarray  # (K, 4)
    clamped: np.ndarray  # (K,) int
    dt: float = 1.0
    # closed-loop extensions (None for bare plant runs)
    nd: Optional[np.ndarray] = None  # (K, 4)
    mu: Optional[np.ndarray] = None  # (K, 2)
    us: Optional[np.ndarray] = None  # (K, 2)
    # dt-grid bookkeeping accumulated during integration (not exported)
    cum_inflow_veh: float = 0.0
    cum_completion_veh: float = 0.0
    clamp_mass_veh: float = 0.0
    clamp_events: list = field(default_factory=list)

    def __post_init__(self):
        k = len(self.t)
        for name in ("n", "u", "q", "clamped"):
            if len(getattr(self, name)) != k:
                raise ValueError(f"column '{name}' length mismatch with t")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def has_reference(self) -> bool:
        return self.nd is not None

    @property
    def e(self) -> Optional[np.ndarray]:
        """Tracking error n - nd, when a reference is attached."""
        return None if self.nd is None else self.n - self.nd

    def region_totals(self) -> np.ndarray:
        """(K, 2) region accumulations [n1, n2]."""
        return np.stack([self.n[:, 0] + self.n[:, 1], self.n[:, 2] + self.n[:, 3]], axis=1)

    def interval(self) -> float:
        if len(self.t) < 2:
            raise ValueError("trace has fewer than two rows")
        return float(self.t[1] - self.t[0])

    def to_csv(self, path) -> None:
        columns = BASE_COLUMNS + (EXT_COLUMNS if self.has_reference else [])
        e = self.e
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for i in range(len(self.t)):
                row = [
                    _fmt(self.t[i]),
                    *(_fmt(v) for v in self.n[i]),
                    *(_fmt(v) for v in self.u[i]),
                    *(_fmt(v) for v in self.q[i]),
                    str(int(self.clamped[i])),
                ]
                if self.has_reference:
                    row += [*(_fmt(v) for v in self.nd[i])]
                    row += [*(_fmt(v) for v in e[i])]
                    row += [*(_fmt(v) for v in self.mu[i])]
                    row += [*(_fmt(v) for v in self.us[i])]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "SimulationTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[: len(BASE_COLUMNS)] != BASE_COLUMNS:
                raise ValueError(f"unrecognized trace header in {path}")
            extended = header == BASE_COLUMNS + EXT_COLUMNS
            if not extended and header != BASE_COLUMNS:
                raise ValueError(f"unrecognized trace header in {path}")
            data = np.array([[float(v) for v in row] for row in reader])
        if data.size == 0:
            raise ValueError(f"empty trace file {path}")
        trace = cls(
            t=data[:, 0],
            n=data[:, 1:5],
            u=data[:, 5:7],
            q=data[:, 7:11],
            clamped=data[:, 11].astype(int),
        )
        if extended:
            trace.nd = data[:, 12:16]
            trace.mu = data[:, 20:22]
            trace.us = data[:, 22:24]
        return trace
