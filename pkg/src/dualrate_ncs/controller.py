"""Dual-rate PID: slow PI, rate converter, fast PD and the actuation scheduler.

The PI part runs at the sensor period NT on the remote side, the PD part at
the actuation period T next to the plant.  Between them a zero-order hold
repeats each slow sample N times.  The scheduler turns the PD output into an
actuation plan over one sensor period, on the base grid t.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .plant import TimingConfig

ESTIMATED = "estimated"
ACTUAL = "actual"
HOLD = "hold"


class PredictionExhausted(LookupError):
    """More consecutive dropouts than the last packet covers."""


class DisorderViolation(ValueError):
    """Round-trip delay not shorter than the sensor period."""


@dataclass(frozen=True)
class DualRateGains:
    kp: float
    td: float
    ti: float
    k_pi: float = 1.0
    k_pd: float | None = None

    def __post_init__(self):
        if not self.ti > 0:
            raise ValueError("ti must be positive")
        if self.k_pd is None:
            object.__setattr__(self, "k_pd", self.kp)

    def pd_coefficients(self, t_fast: float) -> tuple[float, float]:
        """(current-tap, previous-tap) weights of the fast PD difference equation."""
        ratio = self.td / t_fast
        return self.k_pd * (1.0 + ratio), self.k_pd * ratio


@dataclass(frozen=True)
class PiState:
    v_prev: float = 0.0
    e_prev: float = 0.0


@dataclass(frozen=True)
class PdState:
    v_prev_fast: float = 0.0


@dataclass(frozen=True)
class PlanEntry:
    step: int  # offset in base periods from the start of the sensor period
    value: float
    provenance: str
    slot: int  # index j of the fast-rate action u_{k+j}
    v: float = float("nan")  # held PI action the value was computed from


@dataclass(frozen=True)
class ActuationPlan:
    entries: tuple[PlanEntry, ...]
    base_period: float
    final_pd_state: PdState = field(default_factory=PdState)

    @property
    def offsets(self) -> list[float]:
        return [e.step * self.base_period for e in self.entries]

    @property
    def values(self) -> list[float]:
        return [e.value for e in self.entries]

    @property
    def provenance(self) -> list[str]:
        return [e.provenance for e in self.entries]

    def value_at(self, step: int) -> PlanEntry:
        """Entry in force at base step ``step`` of the sensor period."""
        current = self.entries[0]
        for e in self.entries:
            if e.step > step:
                break
            current = e
        return current


def pi_step(gains: DualRateGains, state: PiState, r_k: float, y_k: float, nt: float):
    if not nt > 0:
        raise ValueError("nt must be positive")
    e_k = r_k - y_k
    v_k = state.v_prev + gains.k_pi * (e_k - (1.0 - nt / gains.ti) * state.e_prev)
    return v_k, PiState(v_prev=v_k, e_prev=e_k)


def rate_convert(v_slow, n: int) -> list[float]:
    """Zero-order hold from NT to T: each slow sample repeated ``n`` times."""
    if n < 1:
        raise ValueError("multiplicity must be >= 1")
    if isinstance(v_slow, (int, float)):
        return [float(v_slow)] * n
    return [float(v) for v in v_slow for _ in range(n)]


def pd_step(gains: DualRateGains, state: PdState, v_k_fast: float, t_fast: float):
    if not t_fast > 0:
        raise ValueError("t_fast must be positive")
    c_now, c_prev = gains.pd_coefficients(t_fast)
    u = c_now * v_k_fast - c_prev * state.v_prev_fast
    return u, PdState(v_prev_fast=v_k_fast)


def pd_sequence(gains: DualRateGains, state: PdState, v_fast: Sequence[float], t_fast: float):
    """Iterate the PD difference equation over a held fast-rate sequence."""
    out = []
    for v in v_fast:
        u, state = pd_step(gains, state, v, t_fast)
        out.append(u)
    return out, state


def _packet_action(packet, slot: int) -> float:
    if slot < 0:
        raise ValueError("slot must be non-negative")
    if slot >= len(packet.actions):
        raise PredictionExhausted(
            f"slot {slot} beyond a packet of {len(packet.actions)} actions"
        )
    return packet.actions[slot]


def build_plan_dropout(gains: DualRateGains, pd_state: PdState, packet, slot: int,
                       timing: TimingConfig) -> ActuationPlan:
    """Uniform plan from the estimate stored at ``packet.actions[slot]``."""
    v_hat = _packet_action(packet, slot)
    n, big_l = timing.multiplicity, timing.base_divisor
    u_hat, final = pd_sequence(gains, pd_state, rate_convert(v_hat, n), timing.big_t)
    entries = tuple(PlanEntry(j * big_l, u, ESTIMATED, j, v_hat) for j, u in enumerate(u_hat))
    return ActuationPlan(entries, timing.base_period, final)


def arrival_entries(u_est: Sequence[float], u_act: Sequence[float], arrival_step: int,
                    timing: TimingConfig, est_provenance: str = ESTIMATED,
                    v_est: float = float("nan"), v_act: float = float("nan")) -> tuple[PlanEntry, ...]:
    """Merge estimated and recomputed fast actions around the arrival step.

    Slots starting at or after the arrival use the recomputed value; a slot
    that the arrival cuts in two keeps its estimate up to the arrival.
    """
    big_l = timing.base_divisor
    entries = []
    for j in range(timing.multiplicity):
        start, end = j * big_l, (j + 1) * big_l
        if arrival_step <= start:
            entries.append(PlanEntry(start, u_act[j], ACTUAL, j, v_act))
        else:
            entries.append(PlanEntry(start, u_est[j], est_provenance, j, v_est))
            if arrival_step < end:
                entries.append(PlanEntry(arrival_step, u_act[j], ACTUAL, j, v_act))
    return tuple(entries)


def build_plan_arrival(gains: DualRateGains, pd_state: PdState, old_packet, new_packet,
                       tau_k: float, timing: TimingConfig, old_slot: int | None = None) -> ActuationPlan:
    """Non-uniform plan: estimates from ``old_packet`` until the new one lands.

    ``new_packet.actions[0]`` is the (actual or estimated) PI action for this
    sensor period.  The values never depend on ``tau_k``; only which of them
    are applied, and from when.
    """
    if tau_k < 0:
        raise ValueError("delay must be non-negative")
    if tau_k >= timing.sensor_period:
        raise DisorderViolation(f"delay {tau_k} >= sensor period {timing.sensor_period}")
    arrival = timing.quantize(tau_k)
    if arrival >= timing.steps_per_period:
        raise DisorderViolation("quantized delay reaches the next sensor period")
    n = timing.multiplicity
    if old_slot is None:
        old_slot = new_packet.seq - old_packet.seq
    v_est, v_act = _packet_action(old_packet, old_slot), new_packet.actions[0]
    u_est, _ = pd_sequence(gains, pd_state, rate_convert(v_est, n), timing.big_t)
    u_act, final = pd_sequence(gains, pd_state, rate_convert(v_act, n), timing.big_t)
    entries = arrival_entries(u_est, u_act, arrival, timing, v_est=v_est, v_act=v_act)
    return ActuationPlan(entries, timing.base_period, final)
