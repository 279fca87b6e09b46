"""Piecewise-constant time schedules for well controls."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PiecewiseSchedule:
    """Piecewise-constant control: segments (start_day, value), active on [start, next_start).

    The value unit depends on the control (m^3/day for rates, Pa for
    bottom-hole pressures).  The first segment must start at t = 0 so the
    schedule covers the whole simulation horizon.
    """

    segments: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        starts = [s for s, _ in self.segments]
        if starts[0] > 0.0:
            raise ValueError(f"schedule must cover t=0, first segment starts at {starts[0]}")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment start times must be strictly increasing")

    def value_at(self, t_day: float) -> float:
        value = self.segments[0][1]
        for start, v in self.segments:
            if start <= t_day:
                value = v
            else:
                break
        return value

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(s for s, _ in self.segments)


def constant_schedule(value: float) -> PiecewiseSchedule:
    return PiecewiseSchedule(((0.0, float(value)),))
