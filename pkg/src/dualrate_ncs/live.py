"""Real-time two-process mode over UDP.

The local role runs the plant model at the base period in wall-clock time,
samples every NT and applies the PD plans; the remote role runs PI and the
predictor.  Both reuse the simulation's LocalSide/RemoteSide.
"""

from __future__ import annotations

import csv
import logging
import math
import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .network import DropoutModel, ideal_delay
from .scenario import NOMINAL, Scenario
from .simulation import PROVENANCE_CODES, LocalSide, RemoteSide, SimulationTrace
from .transport import LOCAL, REMOTE, UdpEndpoint

log = logging.getLogger(__name__)


@dataclass
class RemoteLog:
    seqs: list[int] = field(default_factory=list)
    measured: list[bool] = field(default_factory=list)
    actions: list[tuple[float, ...]] = field(default_factory=list)
    dropped_rl: list[bool] = field(default_factory=list)
    timed_out: bool = False

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seq", "measured", "drop_rl", "actions"])
            for row in zip(self.seqs, self.measured, self.dropped_rl, self.actions):
                w.writerow([row[0], int(row[1]), int(row[2]), " ".join(repr(a) for a in row[3])])


def _sleep_until(clock, target: float):
    while True:
        left = target - clock()
        if left <= 0:
            return
        time.sleep(min(left, 0.005) if left < 0.01 else left - 0.005)


def make_endpoint(role: str, s: Scenario, bind, peer, discard_stale: bool = True) -> UdpEndpoint:
    if s.mode == NOMINAL:
        delay, dropout = ideal_delay(), DropoutModel(0.0, 0.0, s.dropout.m_bound)
    else:
        delay, dropout = s.delay, s.dropout
    return UdpEndpoint(role, bind, peer, delay=delay, dropout=dropout, seed=s.seed,
                       lr_fraction=s.lr_fraction, discard_stale=discard_stale)


def run_local(s: Scenario, ep: UdpEndpoint, start_delay: float = 0.5, clock=time.time) -> SimulationTrace:
    """Drive the plant in real time; returns the same trace layout as the simulator."""
    s.validate()
    t = s.timing
    per = t.steps_per_period
    n_steps = int(round(s.duration / t.base_period))
    local = LocalSide(s)
    ref = s.reference_fn()
    epoch = clock() + start_delay
    ep.send_session(epoch, s.duration)
    rows, fallback = [], False
    pending = []
    for k in range(math.ceil(n_steps / per)):
        start = epoch + k * t.sensor_period
        _sleep_until(clock, start)
        entry = ep.send_measurement(local.sample(k), start)
        local.begin_period(k)
        received = False
        for i in range(min(per, n_steps - k * per)):
            _sleep_until(clock, start + i * t.base_period)
            pending.extend(ep.poll())
            keep = []
            for d in pending:
                if d.packet.seq < k:
                    continue  # missed its period
                if d.packet.seq == k and not received and t.quantize(d.delay) <= i:
                    local.on_arrival(d.packet, i)
                    received = True
                else:
                    keep.append(d)
            pending = keep
            time_i = (k * per + i) * t.base_period
            y, e = local.apply(i)
            rows.append((time_i, float(ref(time_i)), y, e.value, local.last_v,
                         PROVENANCE_CODES[e.provenance], entry.tau, int(entry.dropped_lr),
                         int(not received and not entry.dropped_lr)))
        local.end_period()
        fallback |= local.fallback
    return SimulationTrace.from_rows(rows, fallback=fallback, mode=s.mode)


def run_remote(s: Scenario, ep: UdpEndpoint, session_timeout: float = 30.0, clock=time.time) -> RemoteLog:
    """Serve PI actions and predictions until the session ends or the peer never shows up."""
    s.validate()
    out = RemoteLog()
    try:
        epoch, duration = ep.wait_session(timeout=session_timeout)
    except queue.Empty:
        log.warning("no session from %s within %.1f s", ep.peer, session_timeout)
        out.timed_out = True
        return out
    remote = RemoteSide(s)
    nt = s.timing.sensor_period
    for k in range(math.ceil(duration / nt - 1e-9)):
        start = epoch + k * nt
        meas = ep.recv_measurement(k, start + s.remote_timeout)
        pkt = remote.handle(k, meas)
        dropped = True
        if pkt is not None:
            dropped = ep.send_control(pkt)
        out.seqs.append(k)
        out.measured.append(meas is not None)
        out.actions.append(pkt.actions if pkt is not None else ())
        out.dropped_rl.append(dropped)
    return out


def run_live(role: str, s: Scenario, bind: str, peer: str, discard_stale: bool = True,
             start_delay: float = 0.5, session_timeout: float = 30.0):
    with make_endpoint(role, s, bind, peer, discard_stale) as ep:
        if role == LOCAL:
            return run_local(s, ep, start_delay)
        if role == REMOTE:
            return run_remote(s, ep, session_timeout)
    raise ValueError(f"unknown role {role!r}")


def run_loopback(s: Scenario, start_delay: float = 0.5) -> tuple[SimulationTrace, RemoteLog]:
    """Both roles in one process over 127.0.0.1; the remote loop runs in a thread."""
    with make_endpoint(REMOTE, s, "127.0.0.1:0", "127.0.0.1:9") as rep, \
            make_endpoint(LOCAL, s, "127.0.0.1:0", rep.address) as lep:
        rep.peer = lep.address
        result = {}
        th = threading.Thread(target=lambda: result.setdefault("remote", run_remote(s, rep, 10.0)),
                              daemon=True)
        th.start()
        trace = run_local(s, lep, start_delay)
        th.join(timeout=5.0)
    return trace, result.get("remote", RemoteLog(timed_out=True))
