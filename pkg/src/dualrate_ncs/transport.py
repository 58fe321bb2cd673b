"""UDP endpoints for the two-process mode, with software-injected delay and loss.

Round-trip delay is drawn once per sensor period on the local side.  The
measurement leaves after ``lr_fraction * tau``; the reply is held back until
``period_start + tau`` before the local application sees it.  Loss is
decided independently on each side at send time.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import network
from .network import DelayModel, DropoutModel, NetworkTraceEntry, sample_delay, sample_dropout
from .predictor import ControlPacket, MeasurementPacket

log = logging.getLogger(__name__)

LOCAL = "local"
REMOTE = "remote"


@dataclass(frozen=True)
class Delivery:
    packet: ControlPacket
    release_time: float
    delay: float  # release time minus the start of the packet's sensor period


def parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return (host or "127.0.0.1", int(port))


class UdpEndpoint:
    def __init__(self, role, bind, peer, delay: DelayModel | None = None,
                 dropout: DropoutModel | None = None, seed: int = 0,
                 lr_fraction: float = 0.5, discard_stale: bool = True,
                 clock=time.time):
        if role not in (LOCAL, REMOTE):
            raise ValueError(f"role must be {LOCAL!r} or {REMOTE!r}")
        if not 0 <= lr_fraction <= 1:
            raise ValueError("lr_fraction must lie in [0, 1]")
        self.role = role
        self.peer = parse_address(peer) if isinstance(peer, str) else tuple(peer)
        self.delay = delay or network.ideal_delay()
        self.dropout = dropout or DropoutModel(0.0, 0.0, 0)
        self.lr_fraction = lr_fraction
        self.discard_stale = discard_stale
        self.clock = clock
        self.rng = np.random.default_rng([seed, 0 if role == LOCAL else 1])

        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind(parse_address(bind) if isinstance(bind, str) else tuple(bind))
        self.sock.settimeout(0.05)
        self.address = self.sock.getsockname()

        self.trace: dict[int, NetworkTraceEntry] = {}
        self.deliveries: list[Delivery] = []
        self.stale = 0
        self.malformed = 0
        self._period_start: dict[int, float] = {}
        self._newest = -1
        self._lock = threading.Condition()
        self._outbox: list = []
        self._held: list = []
        self._inbox: queue.Queue = queue.Queue()
        self._sessions: queue.Queue = queue.Queue()
        self._count = itertools.count()
        self._closed = threading.Event()
        self._threads = [
            threading.Thread(target=self._recv_loop, daemon=True),
            threading.Thread(target=self._send_loop, daemon=True),
        ]
        for th in self._threads:
            th.start()

    # -- plumbing ---------------------------------------------------------

    def close(self):
        self._closed.set()
        with self._lock:
            self._lock.notify_all()
        for th in self._threads:
            th.join(timeout=1.0)
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _schedule_send(self, data: bytes, when: float):
        with self._lock:
            heapq.heappush(self._outbox, (when, next(self._count), data))
            self._lock.notify_all()

    def _send_loop(self):
        while not self._closed.is_set():
            with self._lock:
                if not self._outbox:
                    self._lock.wait(0.05)
                    continue
                when, _, data = self._outbox[0]
                wait = when - self.clock()
                if wait > 0:
                    self._lock.wait(min(wait, 0.05))
                    continue
                heapq.heappop(self._outbox)
            try:
                self.sock.sendto(data, self.peer)
            except OSError as exc:
                log.warning("send to %s failed: %s", self.peer, exc)

    def _recv_loop(self):
        while not self._closed.is_set():
            try:
                data, _ = self.sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                if self._closed.is_set():
                    return
                continue
            arrival = self.clock()
            try:
                msg = network.decode(data)
            except network.MalformedPacket:
                self.malformed += 1
                continue
            if isinstance(msg, ControlPacket) and self.role == LOCAL:
                self._hold(msg, arrival)
            elif isinstance(msg, MeasurementPacket) and self.role == REMOTE:
                self._inbox.put(msg)
            elif isinstance(msg, tuple) and self.role == REMOTE:
                self._sessions.put(msg)
            else:
                self.malformed += 1

    # -- local side -------------------------------------------------------

    def send_session(self, epoch: float, duration: float, repeats: int = 3):
        data = network.encode_session(epoch, duration)
        for _ in range(repeats):
            self.sock.sendto(data, self.peer)

    def send_measurement(self, pkt: MeasurementPacket, period_start: float) -> NetworkTraceEntry:
        """Draw this period's round-trip delay and lr loss, and queue the datagram."""
        tau = sample_delay(self.delay, self.rng)
        dropped = sample_dropout(self.dropout.p_lr, self.rng)
        entry = NetworkTraceEntry(seq=pkt.seq, tau=tau, dropped_lr=dropped, dropped_rl=False)
        with self._lock:
            self.trace[pkt.seq] = entry
            self._period_start[pkt.seq] = period_start
        if not dropped:
            self._schedule_send(network.encode_measurement(pkt), period_start + self.lr_fraction * tau)
        return entry

    def _hold(self, pkt: ControlPacket, arrival: float):
        with self._lock:
            start = self._period_start.get(pkt.seq)
            entry = self.trace.get(pkt.seq)
            if start is None or entry is None:
                self.malformed += 1
                return
            release = max(arrival, start + entry.tau)
            heapq.heappush(self._held, (release, next(self._count), pkt))

    def poll(self, now: float | None = None) -> list[Delivery]:
        """Control packets whose hold time has passed, oldest first; stale ones dropped."""
        now = self.clock() if now is None else now
        out = []
        with self._lock:
            while self._held and self._held[0][0] <= now:
                release, _, pkt = heapq.heappop(self._held)
                if self.discard_stale and pkt.seq <= self._newest:
                    self.stale += 1
                    continue
                self._newest = max(self._newest, pkt.seq)
                d = Delivery(pkt, release, release - self._period_start[pkt.seq])
                self.deliveries.append(d)
                out.append(d)
        return out

    # -- remote side ------------------------------------------------------

    def wait_session(self, timeout: float | None = None) -> tuple[float, float]:
        return self._sessions.get(timeout=timeout)

    def recv_measurement(self, seq: int, deadline: float) -> MeasurementPacket | None:
        """Wait for measurement ``seq`` until ``deadline``; older ones are discarded."""
        while True:
            remaining = deadline - self.clock()
            try:
                msg = self._inbox.get(timeout=max(remaining, 0.0)) if remaining > 0 else self._inbox.get_nowait()
            except queue.Empty:
                return None
            if msg.seq < seq or (self.discard_stale and msg.seq <= self._newest):
                self.stale += 1
                continue
            if msg.seq > seq:
                # the period we waited for is over; keep the newer one for later
                self._inbox.put(msg)
                return None
            self._newest = msg.seq
            return msg

    def recv_any(self, timeout: float) -> MeasurementPacket | None:
        """Next measurement in arrival order, whatever its sequence number."""
        try:
            return self._inbox.get(timeout=timeout)
        except queue.Empty:
            return None

    def send_control(self, pkt: ControlPacket) -> bool:
        """Send unless the rl link drops it; returns the drop flag."""
        dropped = sample_dropout(self.dropout.p_rl, self.rng)
        self.trace[pkt.seq] = NetworkTraceEntry(seq=pkt.seq, tau=float("nan"), dropped_lr=False, dropped_rl=dropped)
        if not dropped:
            self.sock.sendto(network.encode_control(pkt), self.peer)
        return dropped
