"""Remote-side prediction of future PI actions with state resetting.

Each sensor period the remote side rolls the plant model forward M sensor
periods under the uniform actuation pattern, re-running the PI law on the
predicted outputs.  The first iteration is anchored to the fresh measurement
(and to the actual PI action) whenever the measurement got through.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .controller import DualRateGains, PdState, PiState, pd_sequence, pi_step, rate_convert
from .plant import ContinuousPlant, DiscretePlant, TimingConfig, apply_nonlinearities


@dataclass(frozen=True)
class ControlPacket:
    """``actions = [v_k, v_hat_{k+1}, ..., v_hat_{k+M}]`` sent for sensor period ``seq``."""

    seq: int
    actions: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(float(a) for a in self.actions))
        if not self.actions:
            raise ValueError("a control packet carries at least one action")

    @property
    def horizon(self) -> int:
        return len(self.actions) - 1


@dataclass(frozen=True)
class MeasurementPacket:
    seq: int
    y: float
    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))

    def __eq__(self, other):
        if not isinstance(other, MeasurementPacket):
            return NotImplemented
        return self.seq == other.seq and self.y == other.y and np.array_equal(self.x, other.x)


@dataclass(frozen=True)
class PredictorState:
    """Remote-side memory.

    ``x_hat``, ``y_hat_prev`` and ``v_hat_prev`` are the estimates for the
    current sensor period produced one period earlier; they stand in for the
    measurement when it is lost.  ``x_hat_fine`` mirrors ``x_hat`` on the
    base grid and is kept for diagnostics only.
    """

    x_hat: np.ndarray
    pd_replica: PdState = field(default_factory=PdState)
    pi_replica: PiState = field(default_factory=PiState)
    v_hat_prev: float = 0.0
    y_hat_prev: float = 0.0
    x_hat_fine: np.ndarray | None = None

    @classmethod
    def initial(cls, n_states: int, x0=None):
        x = np.zeros(n_states) if x0 is None else np.array(x0, dtype=float)
        return cls(x_hat=x, x_hat_fine=x.copy())


def reset_state(ps: PredictorState, meas: MeasurementPacket | None = None, estimate=None) -> PredictorState:
    """Overwrite the rollout start with the measured state, else with ``estimate``."""
    if meas is not None:
        x = np.array(meas.x, dtype=float)
    elif estimate is not None:
        x = np.array(estimate, dtype=float)
    else:
        return ps
    return replace(ps, x_hat=x, x_hat_fine=x.copy())


def rollout_pd(gains: DualRateGains, pd_state: PdState, v_fast: Sequence[float], t_fast: float):
    """Estimated PD actions over one sensor period; same kernel as the local PD."""
    return pd_sequence(gains, pd_state, v_fast, t_fast)


def rollout_plant(dp_t: DiscretePlant, x_hat, u_hats: Sequence[float], model: ContinuousPlant | None = None):
    """Step the T-period model once per action; returns the state and output at the next NT boundary.

    With ``model`` given, each action passes through its static nonlinearities
    first, as it would at the real actuator.
    """
    x = np.array(x_hat, dtype=float)
    for u in u_hats:
        if model is not None:
            u = apply_nonlinearities(model, u)
        x = dp_t.a @ x + dp_t.b[:, 0] * u
    return x, float((dp_t.c @ x)[0])


def reset_pi_and_predict(gains: DualRateGains, v_bar: float, e_bar: float, r_next: float,
                         y_hat_next: float, nt: float) -> float:
    """Next PI action from the predicted output, restarting from (v_bar, e_bar)."""
    v, _ = pi_step(gains, PiState(v_prev=v_bar, e_prev=e_bar), r_next, y_hat_next, nt)
    return v


def predict_packet(gains: DualRateGains, dp_t: DiscretePlant, ps: PredictorState,
                   meas: MeasurementPacket | None, v_k: float | None, refs: Sequence[float],
                   timing: TimingConfig, m: int, model: ContinuousPlant | None = None,
                   seq: int | None = None):
    """Build the control packet for period ``k`` and the predictor state for ``k + 1``.

    ``refs`` holds ``r_k .. r_{k+M}``.  ``meas``/``v_k`` are the measurement
    and the PI action computed from it, or ``None`` when the measurement was
    lost, in which case the stored estimates are used throughout and ``seq``
    must name the period.
    """
    if m < 0:
        raise ValueError("horizon must be non-negative")
    if seq is None:
        if meas is None:
            raise ValueError("seq is required when the measurement is missing")
        seq = meas.seq
    if len(refs) < m + 1:
        raise ValueError("need M + 1 references")
    n, nt = timing.multiplicity, timing.sensor_period
    if meas is not None:
        if v_k is None:
            raise ValueError("v_k is required alongside a measurement")
        v_bar, y_bar = float(v_k), meas.y
    else:
        v_bar, y_bar = ps.v_hat_prev, ps.y_hat_prev
    ps = reset_state(ps, meas)
    e_bar = refs[0] - y_bar

    pd_state = ps.pd_replica
    x = ps.x_hat
    v_prev, e_prev = v_bar, e_bar
    predicted = []
    first = None
    # the state for k + 1 is needed even when the packet carries no prediction
    for i in range(1, max(m, 1) + 1):
        u_hats, pd_state = rollout_pd(gains, pd_state, rate_convert(v_prev, n), timing.big_t)
        x, y_hat = rollout_plant(dp_t, x, u_hats, model)
        r_next = refs[i] if i < len(refs) else refs[-1]
        v_hat = reset_pi_and_predict(gains, v_prev, e_prev, r_next, y_hat, nt)
        if i == 1:
            first = (x.copy(), y_hat, v_hat)
        if i <= m:
            predicted.append(v_hat)
        v_prev, e_prev = v_hat, r_next - y_hat

    packet = ControlPacket(seq=seq, actions=(v_bar, *predicted))
    x1, y1, v1 = first
    new_state = PredictorState(
        x_hat=x1,
        pd_replica=PdState(v_prev_fast=v_bar),
        pi_replica=PiState(v_prev=v_bar, e_prev=e_bar),
        v_hat_prev=v1,
        y_hat_prev=y1,
        x_hat_fine=x1.copy(),
    )
    return packet, new_state
