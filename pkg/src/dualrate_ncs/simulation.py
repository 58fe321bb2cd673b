"""Base-period event loop tying plant, controller, predictor and network together.

The local side owns the true plant and the fast PD; the remote side owns the
PI controller and the predictor.  Both classes are also driven by the live
two-process mode, so the simulated and live loops share every decision.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .controller import (
    ACTUAL, ESTIMATED, HOLD, ActuationPlan, PdState, PiState, PlanEntry, PredictionExhausted,
    arrival_entries, build_plan_arrival, build_plan_dropout, pd_sequence, pi_step, rate_convert,
)
from .network import sample_delay, sample_dropout
from .plant import apply_nonlinearities, discretize
from .predictor import ControlPacket, MeasurementPacket, PredictorState, predict_packet
from .scenario import DELAY_INDEPENDENT, NO_PREDICTION, NOMINAL, Scenario

PROVENANCE_CODES = {ESTIMATED: 0, ACTUAL: 1, HOLD: 2}
TRACE_HEADER = ("time", "ref", "y", "u", "v", "provenance", "tau", "drop_lr", "drop_rl")
DIVERGENCE_BOUND = 1e3


@dataclass
class PeriodRecord:
    seq: int
    y: float
    x: np.ndarray
    tau: float
    drop_lr: bool
    drop_rl: bool
    sent: ControlPacket | None = None  # what the remote side produced
    received: bool = False
    arrival_step: int | None = None
    slot: int = 0  # periods since the packet in use was produced
    fallback: bool = False
    plan: ActuationPlan | None = None


@dataclass
class SimulationTrace:
    time: np.ndarray
    ref: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    provenance: np.ndarray
    tau: np.ndarray
    drop_lr: np.ndarray
    drop_rl: np.ndarray
    periods: list[PeriodRecord] = field(default_factory=list)
    fallback: bool = False
    diverged: bool = False
    mode: str = ""

    def __len__(self):
        return len(self.time)

    def columns(self):
        return [getattr(self, name) for name in TRACE_HEADER]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_HEADER)
            for row in zip(*self.columns()):
                w.writerow([repr(float(c)) if isinstance(c, (float, np.floating)) else int(c) for c in row])

    @classmethod
    def from_csv(cls, path) -> "SimulationTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != TRACE_HEADER:
                raise ValueError(f"unexpected trace header {header}")
            rows = [list(map(float, r)) for r in reader if r]
        data = np.array(rows, dtype=float).reshape(-1, len(TRACE_HEADER))
        cols = {name: data[:, i] for i, name in enumerate(TRACE_HEADER)}
        for name in ("provenance", "drop_lr", "drop_rl"):
            cols[name] = cols[name].astype(int)
        return cls(**cols)

    @classmethod
    def from_rows(cls, rows: Sequence[tuple], **kwargs) -> "SimulationTrace":
        data = np.array(rows, dtype=float).reshape(-1, len(TRACE_HEADER))
        cols = {name: data[:, i] for i, name in enumerate(TRACE_HEADER)}
        for name in ("provenance", "drop_lr", "drop_rl"):
            cols[name] = cols[name].astype(int)
        return cls(**cols, **kwargs)


class RemoteSide:
    """PI controller plus predictor; one call per sensor period."""

    def __init__(self, s: Scenario):
        self.s = s
        self.timing = s.timing
        self.gains = s.gains
        self.m = 0 if s.mode == NO_PREDICTION else s.dropout.m_bound
        self.dp_t = discretize(s.plant, s.timing.big_t)  # nominal model, never the mismatched one
        self.model = s.plant if s.model_nonlinearities else None
        self.ref = s.reference_fn()
        x0 = None if s.x0 is None else np.asarray(s.x0, dtype=float)
        self.ps = PredictorState.initial(s.plant.n_states, x0)
        self.pi = PiState()

    def refs(self, k: int, count: int) -> list[float]:
        nt = self.timing.sensor_period
        return [float(self.ref(round((k + i) * nt, 12))) for i in range(count)]

    def handle(self, seq: int, meas: MeasurementPacket | None) -> ControlPacket | None:
        """Control packet for period ``seq``; ``meas`` is None when it timed out."""
        nt = self.timing.sensor_period
        r_k = self.refs(seq, 1)[0]
        if self.s.mode == NO_PREDICTION:
            if meas is None:
                return None
            v_k, self.pi = pi_step(self.gains, self.pi, r_k, meas.y, nt)
            return ControlPacket(seq, (v_k,))
        v_k = None
        if meas is not None:
            v_k, _ = pi_step(self.gains, self.ps.pi_replica, r_k, meas.y, nt)
        packet, self.ps = predict_packet(self.gains, self.dp_t, self.ps, meas, v_k,
                                         self.refs(seq, self.m + 1), self.timing, self.m,
                                         model=self.model, seq=seq)
        return packet


class LocalSide:
    """True plant at the base period, fast PD and actuation scheduling."""

    def __init__(self, s: Scenario):
        self.s = s
        self.timing = s.timing
        self.gains = s.gains
        self.true_plant = s.true_plant()
        self.dp = discretize(self.true_plant, s.timing.base_period)
        self.x = np.zeros(s.plant.n_states) if s.x0 is None else np.array(s.x0, dtype=float)
        self.predictive = s.mode != NO_PREDICTION
        m = s.dropout.m_bound if self.predictive else 0
        # at rest before the first packet: every stored action is zero
        self.packet = ControlPacket(-1, (0.0,) * (m + 1))
        self.pd = PdState()
        self.last_u = 0.0
        self.last_v = 0.0
        self.seq = -1
        self.plan: ActuationPlan | None = None
        self.fallback = False

    def sample(self, seq: int) -> MeasurementPacket:
        y = float((self.dp.c @ self.x)[0])
        return MeasurementPacket(seq, y, self.x.copy())

    def _hold_entries(self) -> tuple[PlanEntry, ...]:
        big_l = self.timing.base_divisor
        return tuple(PlanEntry(j * big_l, self.last_u, HOLD, j, self.last_v)
                     for j in range(self.timing.multiplicity))

    def begin_period(self, seq: int) -> ActuationPlan:
        """Plan for a period whose packet has not (yet) arrived."""
        self.seq = seq
        self.fallback = False
        self._pd_start = self.pd
        slot = seq - self.packet.seq
        if self.predictive:
            try:
                self.plan = build_plan_dropout(self.gains, self.pd, self.packet, slot, self.timing)
                return self.plan
            except PredictionExhausted:
                self.fallback = True
        self.plan = ActuationPlan(self._hold_entries(), self.timing.base_period, self.pd)
        return self.plan

    def on_arrival(self, packet: ControlPacket, step: int) -> ActuationPlan:
        """Switch to the non-uniform plan once packet ``seq`` lands at base step ``step``."""
        if packet.seq != self.seq:
            raise ValueError(f"packet {packet.seq} does not belong to period {self.seq}")
        t = self.timing
        tau = step * t.base_period
        old_slot = packet.seq - self.packet.seq
        if self.predictive and not self.fallback:
            try:
                self.plan = build_plan_arrival(self.gains, self._pd_start, self.packet, packet, tau, t,
                                               old_slot=old_slot)
                self.packet = packet
                return self.plan
            except PredictionExhausted:
                self.fallback = True
        n = t.multiplicity
        v_act = packet.actions[0]
        u_act, final = pd_sequence(self.gains, self._pd_start, rate_convert(v_act, n), t.big_t)
        held = [self.last_u] * n
        entries = arrival_entries(held, u_act, t.quantize(tau), t, est_provenance=HOLD,
                                  v_est=self.last_v, v_act=v_act)
        self.plan = ActuationPlan(entries, t.base_period, final)
        self.packet = packet
        return self.plan

    def end_period(self):
        if self.plan.entries[-1].provenance != HOLD:
            self.pd = self.plan.final_pd_state

    def apply(self, step: int) -> tuple[float, PlanEntry]:
        """Advance the plant one base period; returns the output before the update."""
        entry = self.plan.value_at(step)
        u = apply_nonlinearities(self.true_plant, entry.value)
        y = float((self.dp.c @ self.x)[0])
        self.x = self.dp.a @ self.x + self.dp.b[:, 0] * u
        self.last_u = entry.value
        if not math.isnan(entry.v):
            self.last_v = entry.v
        return y, entry


def arrival_time(s: Scenario, tau: float, drop_lr: bool) -> float:
    """When the reply reaches the actuator, measured from the period start.

    With the measurement lost the remote side first waits out its timeout
    and sends the estimate-based packet; the reply then needs its own share
    of the round trip.
    """
    if not drop_lr:
        return tau
    return max(tau, s.remote_timeout + (1.0 - s.lr_fraction) * tau)


def run_simulation(s: Scenario) -> SimulationTrace:
    s.validate()
    t = s.timing
    rng = np.random.default_rng(s.seed)
    local, remote = LocalSide(s), RemoteSide(s)
    ref = remote.ref
    n_steps = int(round(s.duration / t.base_period))
    per = t.steps_per_period
    ideal = s.mode == NOMINAL
    rows, periods = [], []
    diverged = fallback = False

    for k in range(math.ceil(n_steps / per)):
        meas = local.sample(k)
        if ideal:
            tau, d_lr, d_rl = 0.0, False, False
        else:
            tau = sample_delay(s.delay, rng)
            d_lr = sample_dropout(s.dropout.p_lr, rng)
            d_rl = sample_dropout(s.dropout.p_rl, rng)
        rec = PeriodRecord(k, meas.y, meas.x, tau, d_lr, d_rl)
        rec.sent = remote.handle(k, None if d_lr else meas)
        local.begin_period(k)
        rec.slot = k - local.packet.seq
        arrival = None
        if rec.sent is not None and not d_rl:
            step = t.quantize(arrival_time(s, tau, d_lr))
            if step < per:
                arrival = step
        rec.arrival_step = arrival
        for i in range(min(per, n_steps - k * per)):
            if i == arrival:
                local.on_arrival(rec.sent, i)
                rec.received = True
            time = (k * per + i) * t.base_period
            y, entry = local.apply(i)
            if not np.isfinite(y) or abs(y) > DIVERGENCE_BOUND:
                diverged = True
                break
            rows.append((time, float(ref(time)), y, entry.value, local.last_v,
                         PROVENANCE_CODES[entry.provenance], tau, int(d_lr), int(d_rl)))
        local.end_period()
        rec.fallback = local.fallback
        rec.plan = local.plan
        fallback |= local.fallback
        periods.append(rec)
        if diverged:
            break
    return SimulationTrace.from_rows(rows, periods=periods, fallback=fallback, diverged=diverged, mode=s.mode)


def prediction_residuals(trace: SimulationTrace) -> list[tuple[int, int, float]]:
    """``(k, i, |v_hat_{k+i} - v_{k+i}|)`` for each delivered packet ``k``.

    The comparison uses periods whose measurement got through, so that
    ``v_{k+i}`` is a genuine PI action.  Windows touching a fallback period
    are skipped, since the local PD history no longer follows the model.
    """
    by_seq = {p.seq: p for p in trace.periods}
    out = []
    for p in trace.periods:
        if not p.received or p.sent is None:
            continue
        for i in range(1, p.sent.horizon + 1):
            window = [by_seq.get(p.seq + j) for j in range(i + 1)]
            if any(w is None or w.fallback for w in window):
                break
            q = window[-1]
            if q.drop_lr or q.sent is None:
                continue
            out.append((p.seq, i, abs(p.sent.actions[i] - q.sent.actions[0])))
    return out
