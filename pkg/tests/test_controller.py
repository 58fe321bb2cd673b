import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualrate_ncs.controller import (
    ACTUAL, ESTIMATED, DisorderViolation, DualRateGains, PdState, PiState, PredictionExhausted,
    arrival_entries, build_plan_arrival, build_plan_dropout, pd_sequence, pd_step, pi_step, rate_convert,
)
from dualrate_ncs.plant import TimingConfig
from dualrate_ncs.predictor import ControlPacket


def test_gains_defaults(gains):
    assert gains.k_pi == 1.0
    assert gains.k_pd == 12.0
    with pytest.raises(ValueError):
        DualRateGains(1.0, 0.0, 0.0)


def test_pi_step():
    g = DualRateGains(12.0, 0.01, 3.5)
    v, st_ = pi_step(g, PiState(0.7, 0.0), 0.3, 0.3, 0.2)
    assert v == 0.7 and st_ == PiState(0.7, 0.0)
    v, _ = pi_step(g, PiState(0.0, 0.0), 1.0, 0.0, 0.2)
    assert v == 1.0
    # coefficient on e_prev
    v, _ = pi_step(g, PiState(0.0, 1.0), 0.0, 0.0, 0.2)
    assert v == pytest.approx(-0.9428571428571428, abs=1e-15)
    with pytest.raises(ValueError):
        pi_step(g, PiState(), 0, 0, 0.0)


def test_rate_convert():
    assert rate_convert(0.7, 2) == [0.7, 0.7]
    assert rate_convert(0.0, 4) == [0.0] * 4
    assert rate_convert([1.0, 2.0], 2) == [1.0, 1.0, 2.0, 2.0]
    with pytest.raises(ValueError):
        rate_convert(1.0, 0)


def test_pd_step(gains):
    assert gains.pd_coefficients(0.1) == pytest.approx((13.2, 1.2))
    u, s = pd_step(gains, PdState(0.0), 1.0, 0.1)
    assert u == pytest.approx(13.2) and s.v_prev_fast == 1.0
    u, _ = pd_step(gains, PdState(0.5), 0.5, 0.1)
    assert u == pytest.approx(6.0)
    u, _ = pd_step(gains, PdState(0.3), 0.8, 0.1)
    assert u == pytest.approx(13.2 * 0.8 - 1.2 * 0.3)
    with pytest.raises(ValueError):
        pd_step(gains, PdState(), 1.0, 0.0)


@given(st.floats(-100, 100), st.lists(st.floats(-5, 5), min_size=1, max_size=8))
def test_pd_linearity(alpha, v):
    g = DualRateGains(12.0, 0.01, 3.5)
    u1, _ = pd_sequence(g, PdState(), [alpha * x for x in v], 0.1)
    u0, _ = pd_sequence(g, PdState(), v, 0.1)
    np.testing.assert_allclose(u1, [alpha * x for x in u0], rtol=1e-12, atol=1e-12)


def test_plan_dropout(gains, timing):
    pkt = ControlPacket(4, (0.1, 0.5, 0.6, 0.7))
    plan = build_plan_dropout(gains, PdState(0.2), pkt, 2, timing)
    assert [e.step for e in plan.entries] == [0, 10]
    assert plan.values == pytest.approx([13.2 * 0.6 - 1.2 * 0.2, 12 * 0.6])
    assert plan.provenance == [ESTIMATED, ESTIMATED]
    assert plan.offsets == pytest.approx([0.0, 0.1])
    assert plan.final_pd_state == PdState(0.6)
    zero = build_plan_dropout(gains, PdState(0.0), ControlPacket(0, (0.0, 0.0)), 1, timing)
    assert zero.values == [0.0, 0.0]
    with pytest.raises(PredictionExhausted):
        build_plan_dropout(gains, PdState(), pkt, 4, timing)


def test_plan_arrival_split(gains, timing):
    old, new = ControlPacket(3, (0.0, 0.4, 0.5, 0.6)), ControlPacket(4, (0.45, 0.5, 0.6, 0.7))
    plan = build_plan_arrival(gains, PdState(0.3), old, new, 0.05, timing)
    assert plan.offsets == pytest.approx([0.0, 0.05, 0.1])
    assert plan.provenance == [ESTIMATED, ACTUAL, ACTUAL]
    assert plan.values == pytest.approx([13.2 * 0.4 - 1.2 * 0.3, 13.2 * 0.45 - 1.2 * 0.3, 12 * 0.45])
    assert plan.final_pd_state == PdState(0.45)


def test_plan_arrival_degenerate_and_aligned(gains, timing):
    old, new = ControlPacket(3, (0.0, 0.4)), ControlPacket(4, (0.45,))
    plan = build_plan_arrival(gains, PdState(), old, new, 0.0, timing)
    assert plan.offsets == pytest.approx([0.0, 0.1])
    assert plan.provenance == [ACTUAL, ACTUAL]
    plan = build_plan_arrival(gains, PdState(), old, new, 0.1, timing)
    assert plan.offsets == pytest.approx([0.0, 0.1])
    assert plan.provenance == [ESTIMATED, ACTUAL]
    plan = build_plan_arrival(gains, PdState(), old, new, 0.15, timing)
    assert [e.step for e in plan.entries] == [0, 10, 15]
    assert plan.provenance == [ESTIMATED, ESTIMATED, ACTUAL]
    with pytest.raises(DisorderViolation):
        build_plan_arrival(gains, PdState(), old, new, 0.2, timing)
    with pytest.raises(DisorderViolation):
        build_plan_arrival(gains, PdState(), old, new, 0.195, timing)


def test_plan_arrival_exhausted(gains, timing):
    old, new = ControlPacket(0, (0.0, 0.4)), ControlPacket(5, (0.45,))
    with pytest.raises(PredictionExhausted):
        build_plan_arrival(gains, PdState(), old, new, 0.05, timing)


def test_perfect_prediction_plan_equals_dropout_plan(gains, timing):
    old, new = ControlPacket(3, (0.0, 0.4)), ControlPacket(4, (0.4, 0.1))
    drop = build_plan_dropout(gains, PdState(0.1), old, 1, timing)
    for tau in np.arange(0.0, 0.2, 0.01):
        plan = build_plan_arrival(gains, PdState(0.1), old, new, tau, timing)
        for step in range(20):
            assert plan.value_at(step).value == drop.value_at(step).value


@settings(max_examples=200)
@given(st.integers(1, 4), st.integers(1, 10), st.floats(0, 1), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(-1, 1))
def test_plan_invariants_and_delay_independence(n, big_l, frac, v_est, v_act, v_prev):
    timing = TimingConfig(0.1, n, big_l)
    g = DualRateGains(12.0, 0.01, 3.5)
    tau = frac * (timing.sensor_period - timing.base_period)
    old, new = ControlPacket(0, (0.0, v_est)), ControlPacket(1, (v_act,))
    plan = build_plan_arrival(g, PdState(v_prev), old, new, tau, timing)
    steps = [e.step for e in plan.entries]
    assert steps[0] == 0
    assert all(b > a for a, b in zip(steps, steps[1:]))
    assert steps[-1] < timing.steps_per_period
    # values come from two tau-free sequences, slot by slot
    u_est, _ = pd_sequence(g, PdState(v_prev), rate_convert(v_est, n), 0.1)
    u_act, _ = pd_sequence(g, PdState(v_prev), rate_convert(v_act, n), 0.1)
    for e in plan.entries:
        assert e.value == (u_act[e.slot] if e.provenance == ACTUAL else u_est[e.slot])
    arrival = timing.quantize(tau)
    for e in plan.entries:
        assert (e.provenance == ACTUAL) == (e.step >= arrival)


def test_arrival_entries_holds_provenance(timing):
    entries = arrival_entries([1.0, 2.0], [3.0, 4.0], 12, timing, est_provenance="hold")
    assert [(e.step, e.value, e.provenance) for e in entries] == [
        (0, 1.0, "hold"), (10, 2.0, "hold"), (12, 4.0, ACTUAL)]
