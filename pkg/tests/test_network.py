import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualrate_ncs import network
from dualrate_ncs.network import (
    DelayModel, DisorderGuardViolation, DropoutModel, MalformedPacket, disorder_guard, estimate_m,
    sample_delay, sample_delays, sample_dropout,
)
from dualrate_ncs.plant import TimingConfig
from dualrate_ncs.predictor import ControlPacket, MeasurementPacket

FIG5 = DelayModel(eta=0.04, phi=0.01, tau_max=0.08)


class FixedRng:
    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def test_delay_model_validation():
    with pytest.raises(ValueError):
        DelayModel(-0.1, 0.01, 0.08)
    with pytest.raises(ValueError):
        DelayModel(0.04, 0.0, 0.08)
    with pytest.raises(ValueError):
        DelayModel(0.04, 0.01, 0.03)
    assert FIG5.mean == pytest.approx(0.05)


def test_sample_delay_inverse_transform():
    assert sample_delay(FIG5, FixedRng([0.0])) == 0.04
    u = 0.5
    assert sample_delay(FIG5, FixedRng([u])) == pytest.approx(0.04 - 0.01 * np.log(1 - u))
    # a draw past tau_max is redrawn, not clamped
    assert sample_delay(FIG5, FixedRng([0.99999, 0.0])) == 0.04
    assert sample_delay(FIG5, FixedRng([0.99999]), truncate=False) > 0.08
    assert sample_delay(DelayModel(0.01, 0.01, 0.08, tau_c=0.005), FixedRng([0.0])) == pytest.approx(0.015)


def test_delay_moments_untruncated():
    draws = sample_delays(FIG5, np.random.default_rng(1), 100_000, truncate=False)
    assert abs(draws.mean() - 0.05) < 0.01 * 0.05
    assert abs(draws.var() - 1e-4) < 0.03 * 1e-4
    assert draws.min() >= 0.04


def test_truncated_draws_follow_truncated_cdf():
    from scipy.stats import kstest
    draws = sample_delays(FIG5, np.random.default_rng(2), 20_000)
    assert draws.max() < 0.08
    assert kstest(draws, lambda x: FIG5.cdf(x)).statistic < 0.02


def test_dropout_sampler():
    rng = np.random.default_rng(3)
    assert not any(sample_dropout(0.0, rng) for _ in range(1000))
    rate = np.mean([sample_dropout(0.3, rng) for _ in range(100_000)])
    assert abs(rate - 0.3) < 0.01
    a = [sample_dropout(0.3, np.random.default_rng(9)) for _ in range(1)]
    b = [sample_dropout(0.3, np.random.default_rng(9)) for _ in range(1)]
    assert a == b
    r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
    assert [sample_dropout(0.3, r1) for _ in range(50)] == [sample_dropout(0.3, r2) for _ in range(50)]
    with pytest.raises(ValueError):
        sample_dropout(1.0, rng)
    with pytest.raises(ValueError):
        DropoutModel(0.3, 1.0, 3)


def test_disorder_guard():
    t = TimingConfig(0.1, 2, 10)
    disorder_guard(FIG5, t)
    for tmax in (0.2, 0.25):
        with pytest.raises(DisorderGuardViolation):
            disorder_guard(DelayModel(0.04, 0.01, tmax), t)


def test_estimate_m():
    assert estimate_m([False, True, True, False, True]) == 2
    assert estimate_m([False] * 10) == 0
    with pytest.raises(ValueError):
        estimate_m([])
    rng = np.random.default_rng(0)
    assert estimate_m(rng.random(1_000_000) < 0.3) >= 3


def test_control_layout():
    buf = network.encode_control(ControlPacket(5, (1.0, 2.0, 3.0, 4.0)))
    assert len(buf) == network.HEADER_SIZE + 2 + 4 * 8
    magic, version, kind, seq = struct.unpack_from("<IHHq", buf)
    assert (magic, version, kind, seq) == (0x4E435331, 1, 2, 5)
    assert struct.unpack_from("<H", buf, 16) == (4,)
    assert struct.unpack_from("<4d", buf, 18) == (1.0, 2.0, 3.0, 4.0)


def test_measurement_layout():
    buf = network.encode_measurement(MeasurementPacket(9, 0.5, [1.0, 2.0]))
    assert struct.unpack_from("<IHHq", buf)[2] == 1
    assert struct.unpack_from("<H3d", buf, 16) == (2, 0.5, 1.0, 2.0)


@pytest.mark.parametrize("buf", [b"", b"\x00" * 10, b"\x00" * 18,
                                 struct.pack("<IHHqH", 0xDEADBEEF, 1, 2, 0, 0)])
def test_malformed(buf):
    with pytest.raises(MalformedPacket):
        network.decode(buf)


def test_malformed_mismatches():
    good = network.encode_control(ControlPacket(1, (1.0,)))
    with pytest.raises(MalformedPacket):
        network.decode(good[:-1])
    with pytest.raises(MalformedPacket):
        network.decode_measurement(good)
    with pytest.raises(MalformedPacket):
        network.decode(good[:4] + struct.pack("<H", 7) + good[6:])
    with pytest.raises(MalformedPacket):
        network.decode(good[:6] + struct.pack("<H", 9) + good[8:])
    with pytest.raises(MalformedPacket):
        network.decode_control(struct.pack("<IHHqH", network.MAGIC, 1, 2, 0, 0))


finite = st.floats(allow_nan=False)
seqs = st.integers(-(2**63), 2**63 - 1)


@settings(max_examples=300)
@given(seqs, st.lists(finite, min_size=1, max_size=64))
def test_control_roundtrip(seq, actions):
    pkt = ControlPacket(seq, tuple(actions))
    assert network.decode(network.encode_control(pkt)) == pkt


@settings(max_examples=300)
@given(seqs, finite, st.lists(finite, min_size=0, max_size=16))
def test_measurement_roundtrip(seq, y, x):
    pkt = MeasurementPacket(seq, y, x)
    assert network.decode(network.encode_measurement(pkt)) == pkt


@given(finite, finite)
def test_session_roundtrip(epoch, duration):
    assert network.decode(network.encode_session(epoch, duration)) == (epoch, duration)


@settings(max_examples=200)
@given(st.binary(max_size=80))
def test_random_bytes_never_crash(buf):
    try:
        network.decode(buf)
    except MalformedPacket:
        pass
