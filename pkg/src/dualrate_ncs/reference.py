"""Reference signals sampled on the base grid."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# rail travel of the Cartesian robot, metres
RAIL_X = 0.050
RAIL_Y = 0.040


@dataclass(frozen=True)
class FilteredSteps:
    """Step sequence through a discrete first-order low-pass at period ``base_period``.

    ``steps`` is a list of ``(time, level)``; the level before the first step
    is ``initial``.  The filter is ``r[i] = a r[i-1] + (1 - a) s[i]`` with
    ``a = exp(-base_period / time_constant)``, started at rest.
    """

    steps: tuple[tuple[float, float], ...]
    time_constant: float
    base_period: float
    initial: float = 0.0

    def __post_init__(self):
        if self.time_constant < 0:
            raise ValueError("time constant must be non-negative")
        if not self.base_period > 0:
            raise ValueError("base period must be positive")
        object.__setattr__(self, "steps", tuple(sorted((float(t), float(v)) for t, v in self.steps)))

    @property
    def pole(self) -> float:
        if self.time_constant == 0:
            return 0.0
        return math.exp(-self.base_period / self.time_constant)

    def at_index(self, index):
        i = np.asarray(index, dtype=float)
        a = self.pole
        # current step level minus the transients still decaying from each jump
        out = np.full(i.shape, self.initial, dtype=float)
        transient = np.zeros(i.shape)
        level = self.initial
        for t_step, value in self.steps:
            i_s = math.ceil(t_step / self.base_period - 1e-9)
            jump = value - level
            level = value
            active = i >= i_s
            out = np.where(active, value, out)
            if a > 0:
                transient = transient + np.where(active, jump * a ** np.maximum(i - i_s + 1, 0), 0.0)
        out = out - transient
        return out if out.ndim else float(out)

    def __call__(self, time):
        t = np.asarray(time, dtype=float)
        return self.at_index(np.floor(t / self.base_period + 1e-9))


@dataclass(frozen=True)
class LissajousAxis:
    amplitude: float
    frequency: float  # rad/s, already multiplied by the axis ratio
    phase: float = 0.0

    def __call__(self, time):
        out = self.amplitude * np.sin(self.frequency * np.asarray(time, dtype=float) + self.phase)
        return out if np.ndim(out) else float(out)


def reference_filtered_steps(steps: Sequence[tuple[float, float]], time_constant: float = 0.5,
                             base_period: float = 0.01, initial: float = 0.0) -> FilteredSteps:
    return FilteredSteps(tuple(steps), time_constant, base_period, initial)


def reference_lissajous(ax: float = 0.02, ay: float = 0.015, a: int = 3, b: int = 2,
                        omega: float = 2 * math.pi / 20.0, delta: float = math.pi / 2,
                        rails: tuple[float, float] = (RAIL_X, RAIL_Y)) -> tuple[LissajousAxis, LissajousAxis]:
    """``x = ax sin(a w t + delta)``, ``y = ay sin(b w t)``; amplitudes must fit the rails."""
    if abs(ax) > rails[0]:
        raise ValueError(f"x amplitude {ax} exceeds the {rails[0]} m rail")
    if abs(ay) > rails[1]:
        raise ValueError(f"y amplitude {ay} exceeds the {rails[1]} m rail")
    return LissajousAxis(ax, a * omega, delta), LissajousAxis(ay, b * omega, 0.0)
