"""Stacked well observations with per-component noise."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ObservationSet:
    """Measurement vector y with diagonal noise covariance and its schedule.

    Components are stacked time-major then well-major; `wells` holds the
    per-component well label and `times_days` the per-component time.
    """

    y: np.ndarray
    gamma: np.ndarray          # per-component noise variances
    times_days: np.ndarray     # per-component measurement time
    wells: tuple[str, ...]     # per-component well label
    noiseless: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        gamma = np.asarray(self.gamma, dtype=float).reshape(-1)
        times = np.asarray(self.times_days, dtype=float).reshape(-1)
        if not (y.size == gamma.size == times.size == len(self.wells)):
            raise ValueError("observation components must align")
        if np.any(gamma <= 0):
            raise ValueError("noise variances must be positive")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "times_days", times)

    @property
    def n_data(self) -> int:
        return self.y.size

    def unique_times(self) -> np.ndarray:
        seen = []
        for t in self.times_days:
            if not seen or t != seen[-1]:
                seen.append(float(t))
        return np.array(seen)

    def block_at(self, t_day: float):
        """(y_n, gamma_n) for the components measured at one time."""
        mask = self.times_days == t_day
        if not np.any(mask):
            raise ValueError(f"no observations at t = {t_day} d")
        return self.y[mask], self.gamma[mask]

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self.y.tobytes())
        h.update(self.gamma.tobytes())
        h.update(self.times_days.tobytes())
        h.update(",".join(self.wells).encode())
        return h.hexdigest()
