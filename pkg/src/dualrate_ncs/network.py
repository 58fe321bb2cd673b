"""Network behaviour: delay and dropout models, the disorder guard, and the wire codec."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .plant import TimingConfig
from .predictor import ControlPacket, MeasurementPacket

MAGIC = 0x4E435331
VERSION = 1
KIND_MEASUREMENT = 1
KIND_CONTROL = 2
KIND_SESSION = 3

_HEADER = struct.Struct("<IHHq")
_COUNT = struct.Struct("<H")
HEADER_SIZE = _HEADER.size


class DisorderGuardViolation(ValueError):
    """tau_max is not strictly below the sensor period."""


class MalformedPacket(ValueError):
    pass


@dataclass(frozen=True)
class DelayModel:
    """Shifted exponential round-trip delay, truncated at ``tau_max``.

    ``tau_c`` is a constant computation delay added to every draw.
    """

    eta: float
    phi: float
    tau_max: float
    tau_c: float = 0.0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if not self.phi > 0:
            raise ValueError("phi must be positive")
        if self.tau_max < self.eta + self.tau_c:
            raise ValueError("tau_max below the smallest possible delay")

    @property
    def mean(self) -> float:
        return self.eta + self.phi + self.tau_c

    def density(self, tau):
        tau = np.asarray(tau, dtype=float)
        z = tau - self.eta - self.tau_c
        return np.where(z >= 0, np.exp(-np.maximum(z, 0) / self.phi) / self.phi, 0.0)

    def cdf(self, tau, truncate: bool = True):
        z = np.maximum(np.asarray(tau, dtype=float) - self.eta - self.tau_c, 0.0)
        raw = 1.0 - np.exp(-z / self.phi)
        if not truncate:
            return raw
        top = 1.0 - np.exp(-(self.tau_max - self.eta - self.tau_c) / self.phi)
        if top <= 0:
            return np.where(z >= 0, 1.0, 0.0)
        return np.minimum(raw / top, 1.0)


@dataclass(frozen=True)
class DropoutModel:
    p_lr: float
    p_rl: float
    m_bound: int

    def __post_init__(self):
        for p in (self.p_lr, self.p_rl):
            if not 0 <= p < 1:
                raise ValueError("dropout probabilities must lie in [0, 1)")
        if self.m_bound < 0:
            raise ValueError("M must be non-negative")


@dataclass(frozen=True)
class NetworkTraceEntry:
    seq: int
    tau: float
    dropped_lr: bool
    dropped_rl: bool


def ideal_delay() -> DelayModel:
    return DelayModel(eta=0.0, phi=1.0, tau_max=0.0)


def sample_delay(dm: DelayModel, rng: np.random.Generator, truncate: bool = True) -> float:
    """Inverse-transform draw; draws at or past ``tau_max`` are redrawn."""
    if truncate and dm.tau_max <= dm.eta + dm.tau_c:
        return dm.eta + dm.tau_c
    while True:
        tau = dm.eta - dm.phi * np.log1p(-rng.random()) + dm.tau_c
        if not truncate or tau < dm.tau_max:
            return float(tau)


def sample_delays(dm: DelayModel, rng: np.random.Generator, size: int, truncate: bool = True) -> np.ndarray:
    return np.array([sample_delay(dm, rng, truncate) for _ in range(size)])


def sample_dropout(p: float, rng: np.random.Generator) -> bool:
    """True when the packet is lost."""
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0, 1)")
    return bool(rng.random() < p)


def disorder_guard(dm: DelayModel, timing: TimingConfig) -> None:
    if dm.tau_max >= timing.sensor_period:
        raise DisorderGuardViolation(
            f"tau_max = {dm.tau_max} must be < NT = {timing.sensor_period}"
        )
    if timing.quantize(dm.tau_max) >= timing.steps_per_period:
        raise DisorderGuardViolation("tau_max reaches the last base step of the sensor period")


def estimate_m(dropout_trace: Sequence[bool]) -> int:
    """Longest run of consecutive drops."""
    if len(dropout_trace) == 0:
        raise ValueError("empty dropout trace")
    best = run = 0
    for dropped in dropout_trace:
        run = run + 1 if dropped else 0
        best = max(best, run)
    return best


def _header(kind: int, seq: int) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, kind, seq)


def encode_control(pkt: ControlPacket) -> bytes:
    n = len(pkt.actions)
    return _header(KIND_CONTROL, pkt.seq) + _COUNT.pack(n) + struct.pack(f"<{n}d", *pkt.actions)


def encode_measurement(pkt: MeasurementPacket) -> bytes:
    n = len(pkt.x)
    return (_header(KIND_MEASUREMENT, pkt.seq) + _COUNT.pack(n)
            + struct.pack(f"<{n + 1}d", pkt.y, *pkt.x))


def encode_session(epoch: float, duration: float) -> bytes:
    return _header(KIND_SESSION, 0) + struct.pack("<2d", epoch, duration)


def peek_kind(buf: bytes) -> tuple[int, int]:
    """Validate the header and return ``(kind, seq)``."""
    if len(buf) < HEADER_SIZE:
        raise MalformedPacket(f"{len(buf)} bytes is shorter than the header")
    magic, version, kind, seq = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise MalformedPacket(f"bad magic 0x{magic:08X}")
    if version != VERSION:
        raise MalformedPacket(f"unsupported version {version}")
    return kind, seq


def _payload_doubles(buf: bytes, extra: int = 0) -> tuple[float, ...]:
    if len(buf) < HEADER_SIZE + _COUNT.size:
        raise MalformedPacket("missing payload count")
    (n,) = _COUNT.unpack_from(buf, HEADER_SIZE)
    count = n + extra
    need = HEADER_SIZE + _COUNT.size + 8 * count
    if len(buf) != need:
        raise MalformedPacket(f"expected {need} bytes, got {len(buf)}")
    return struct.unpack_from(f"<{count}d", buf, HEADER_SIZE + _COUNT.size)


def decode_control(buf: bytes) -> ControlPacket:
    kind, seq = peek_kind(buf)
    if kind != KIND_CONTROL:
        raise MalformedPacket(f"kind {kind} is not a control packet")
    actions = _payload_doubles(buf)
    if not actions:
        raise MalformedPacket("control packet without actions")
    return ControlPacket(seq=seq, actions=actions)


def decode_measurement(buf: bytes) -> MeasurementPacket:
    kind, seq = peek_kind(buf)
    if kind != KIND_MEASUREMENT:
        raise MalformedPacket(f"kind {kind} is not a measurement packet")
    values = _payload_doubles(buf, extra=1)
    return MeasurementPacket(seq=seq, y=values[0], x=values[1:])


def decode_session(buf: bytes) -> tuple[float, float]:
    kind, _ = peek_kind(buf)
    if kind != KIND_SESSION or len(buf) != HEADER_SIZE + 16:
        raise MalformedPacket("not a session packet")
    return struct.unpack_from("<2d", buf, HEADER_SIZE)


def decode(buf: bytes):
    kind, _ = peek_kind(buf)
    if kind == KIND_CONTROL:
        return decode_control(buf)
    if kind == KIND_MEASUREMENT:
        return decode_measurement(buf)
    if kind == KIND_SESSION:
        return decode_session(buf)
    raise MalformedPacket(f"unknown kind {kind}")
