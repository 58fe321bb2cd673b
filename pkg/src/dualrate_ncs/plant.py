"""Continuous plant, exact zero-order-hold discretization and lifting.

The continuous model is ``dx/dt = A x + B u``, ``y = C x``.  Everything
downstream works with exact ZOH segments: the discrete model at any period,
and the lifted model over one sensor period whose input is held piecewise
constant between a list of actuation instants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.signal import ss2tf, tf2ss


class NumericFailure(ArithmeticError):
    """Non-finite matrices or a failed matrix function."""


class InvalidPattern(ValueError):
    """Actuation instants violating the lifting invariants."""


DEAD_ZONE_MODES = ("zero", "subtractive")


def _as_matrix(value, name):
    m = np.atleast_2d(np.asarray(value, dtype=float))
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D")
    return m


@dataclass(frozen=True)
class ContinuousPlant:
    """State-space realization plus the static input nonlinearities."""

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    c_matrix: np.ndarray
    d_matrix: np.ndarray | None = None
    sat_limit: float = np.inf
    dead_zone: float = 0.0
    dead_zone_mode: str = "zero"

    def __post_init__(self):
        a = _as_matrix(self.a_matrix, "a_matrix")
        b = _as_matrix(self.b_matrix, "b_matrix")
        c = _as_matrix(self.c_matrix, "c_matrix")
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("a_matrix must be square")
        if b.shape[0] != n:
            b = b.reshape(n, -1)
        if c.shape[1] != n:
            raise ValueError("c_matrix columns must match the state dimension")
        d = np.zeros((c.shape[0], b.shape[1])) if self.d_matrix is None else _as_matrix(self.d_matrix, "d_matrix")
        if d.shape != (c.shape[0], b.shape[1]):
            raise ValueError("d_matrix has the wrong shape")
        if np.any(d != 0):
            raise ValueError("feedthrough is not supported; d_matrix must be zero")
        if not self.sat_limit > 0:
            raise ValueError("sat_limit must be positive")
        if self.dead_zone < 0:
            raise ValueError("dead_zone must be non-negative")
        if self.dead_zone_mode not in DEAD_ZONE_MODES:
            raise ValueError(f"dead_zone_mode must be one of {DEAD_ZONE_MODES}")
        for name, m in (("a_matrix", a), ("b_matrix", b), ("c_matrix", c), ("d_matrix", d)):
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @classmethod
    def from_transfer_function(cls, num, den, **kwargs):
        """Controller-canonical realization (the ``tf2ss`` convention)."""
        a, b, c, d = tf2ss(num, den)
        return cls(a_matrix=a, b_matrix=b, c_matrix=c, d_matrix=d, **kwargs)

    @classmethod
    def from_gain_pole(cls, gain, pole, **kwargs):
        """Realize ``gain / (s (s + pole))``.

        The canonical realization has state ``(dy/dt, y) / gain``; it is the
        basis in which published Lyapunov matrices for this plant are written.
        """
        return cls.from_transfer_function([gain], [1.0, pole, 0.0], **kwargs)

    def gain_time_constant(self) -> tuple[float, float]:
        """``(K, tau)`` for a plant of the form ``K / (s (tau s + 1))``."""
        num, den = ss2tf(self.a_matrix, self.b_matrix, self.c_matrix, self.d_matrix)
        num = np.trim_zeros(np.atleast_2d(num)[0], "f")
        den = np.asarray(den, dtype=float)
        scale = max(1.0, float(np.abs(den).max()))
        if (self.n_states != 2 or len(num) != 1 or abs(den[2]) > 1e-12 * scale
                or not den[1] > 0):
            raise ValueError("plant is not of the form K / (s (tau s + 1))")
        pole = den[1] / den[0]
        return float(num[0] / den[0] / pole), float(1.0 / pole)

    @property
    def n_states(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b_matrix.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c_matrix.shape[0]


@dataclass(frozen=True)
class DiscretePlant:
    period: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class LiftedPlant:
    """One sensor period of the plant driven by a piecewise-constant input.

    ``b_p`` holds one column block per actuation instant; block ``i`` maps
    the value applied on ``[instants[i], instants[i+1])`` to the state at the
    end of the sensor period.
    """

    a_p: np.ndarray
    b_p: np.ndarray
    c_p: np.ndarray
    instants: tuple[float, ...]
    sensor_period: float

    @property
    def n_blocks(self) -> int:
        return len(self.instants)

    def block(self, i: int) -> np.ndarray:
        m = self.b_p.shape[1] // self.n_blocks
        return self.b_p[:, i * m:(i + 1) * m]


@dataclass(frozen=True)
class TimingConfig:
    """Actuation period T, multiplicity N and base divisor L (t = T / L)."""

    big_t: float
    multiplicity: int
    base_divisor: int = 1

    def __post_init__(self):
        if not self.big_t > 0:
            raise ValueError("actuation period must be positive")
        if int(self.multiplicity) != self.multiplicity or self.multiplicity < 1:
            raise ValueError("multiplicity must be a positive integer")
        if int(self.base_divisor) != self.base_divisor or self.base_divisor < 1:
            raise ValueError("base_divisor must be a positive integer")

    @property
    def sensor_period(self) -> float:
        return self.multiplicity * self.big_t

    @property
    def base_period(self) -> float:
        return self.big_t / self.base_divisor

    @property
    def steps_per_period(self) -> int:
        """Base steps per sensor period (N * L)."""
        return self.multiplicity * self.base_divisor

    def quantize(self, tau: float) -> int:
        """Ceil ``tau`` onto the base grid, returned as a number of base steps."""
        steps = tau / self.base_period
        return max(0, int(np.ceil(steps - 1e-9)))


def _check_finite(*mats):
    for m in mats:
        if not np.all(np.isfinite(m)):
            raise NumericFailure("non-finite matrix entries")


def input_response(plant: ContinuousPlant, xi: float) -> np.ndarray:
    """Input integral of the exponential over ``[0, xi]``; zero for ``xi <= 0``."""
    n, m = plant.n_states, plant.n_inputs
    if xi <= 0:
        return np.zeros((n, m))
    return _zoh(plant, xi)[1]


def _zoh(plant: ContinuousPlant, period: float):
    n, m = plant.n_states, plant.n_inputs
    # expm([[A, B], [0, 0]] h) = [[e^{Ah}, B(h)], [0, I]]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = plant.a_matrix
    aug[:n, n:] = plant.b_matrix
    _check_finite(aug)
    phi = expm(aug * period)
    _check_finite(phi)
    return phi[:n, :n], phi[:n, n:]


def discretize(plant: ContinuousPlant, period: float) -> DiscretePlant:
    if not period > 0:
        raise ValueError("period must be positive")
    a, b = _zoh(plant, period)
    return DiscretePlant(period=period, a=a, b=b, c=np.array(plant.c_matrix))


def state_transition(plant: ContinuousPlant, span: float) -> np.ndarray:
    if span == 0:
        return np.eye(plant.n_states)
    _check_finite(plant.a_matrix)
    return expm(plant.a_matrix * span)


def uniform_instants(timing: TimingConfig) -> list[float]:
    return [j * timing.big_t for j in range(timing.multiplicity)]


def lift(plant: ContinuousPlant, timing: TimingConfig, instants: Sequence[float]) -> LiftedPlant:
    nt = timing.sensor_period
    inst = [float(v) for v in instants]
    if not inst or inst[0] != 0.0:
        raise InvalidPattern("first actuation instant must be 0")
    if any(b <= a for a, b in zip(inst, inst[1:])):
        raise InvalidPattern("actuation instants must be strictly increasing")
    if inst[-1] >= nt:
        raise InvalidPattern("actuation instants must lie inside the sensor period")
    bounds = inst + [nt]
    blocks = [
        state_transition(plant, nt - bounds[i + 1]) @ input_response(plant, bounds[i + 1] - bounds[i])
        for i in range(len(inst))
    ]
    return LiftedPlant(
        a_p=state_transition(plant, nt),
        b_p=np.hstack(blocks),
        c_p=np.array(plant.c_matrix),
        instants=tuple(inst),
        sensor_period=nt,
    )


def apply_nonlinearities(plant: ContinuousPlant, u):
    """Saturate, then remove the dead-zone band around zero."""
    u = np.clip(u, -plant.sat_limit, plant.sat_limit)
    dz = plant.dead_zone
    if dz == 0:
        return u
    inside = np.abs(u) < dz
    if plant.dead_zone_mode == "subtractive":
        u = np.where(inside, 0.0, u - np.sign(u) * dz)
    else:
        u = np.where(inside, 0.0, u)
    if np.ndim(u) == 0:
        return float(u)
    return u


def step(dp: DiscretePlant, x, u):
    """One period: returns ``(a x + b u, c x)`` with the output taken before the update."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.atleast_1d(np.asarray(u, dtype=float)).reshape(-1)
    if x.shape[0] != dp.a.shape[0]:
        raise ValueError("state dimension mismatch")
    if u.shape[0] != dp.b.shape[1]:
        raise ValueError("input dimension mismatch")
    return dp.a @ x + dp.b @ u, dp.c @ x
