import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualrate_ncs.controller import DualRateGains, PdState, PiState, pd_sequence, pi_step
from dualrate_ncs.plant import discretize, step
from dualrate_ncs.predictor import (
    ControlPacket, MeasurementPacket, PredictorState, predict_packet, reset_pi_and_predict, reset_state,
    rollout_pd, rollout_plant,
)
from oracles import nonlinearity, taylor_zoh


def test_packets():
    p = ControlPacket(3, [1, 2, 3])
    assert p.actions == (1.0, 2.0, 3.0) and p.horizon == 2
    with pytest.raises(ValueError):
        ControlPacket(0, ())
    m = MeasurementPacket(1, 0.5, [1.0, 2.0])
    assert m == MeasurementPacket(1, 0.5, np.array([1.0, 2.0]))
    assert m != MeasurementPacket(1, 0.5, [1.0, 2.5])


def test_reset_state():
    ps = PredictorState.initial(2, [0.1, 0.2])
    meas = MeasurementPacket(0, 0.0, [1.0, -1.0])
    out = reset_state(ps, meas)
    np.testing.assert_array_equal(out.x_hat, [1.0, -1.0])
    np.testing.assert_array_equal(out.x_hat_fine, [1.0, -1.0])
    assert reset_state(ps, None) is ps
    same = reset_state(ps, MeasurementPacket(0, 0.0, [0.1, 0.2]))
    np.testing.assert_array_equal(same.x_hat, ps.x_hat)
    np.testing.assert_array_equal(reset_state(ps, estimate=[3.0, 4.0]).x_hat, [3.0, 4.0])


def test_rollout_pd(gains):
    assert rollout_pd(gains, PdState(0.0), [1.0, 1.0], 0.1)[0] == pytest.approx([13.2, 12.0])
    assert rollout_pd(gains, PdState(0.0), [0.0, 0.0], 0.1)[0] == [0.0, 0.0]
    v = [0.3, 0.3, -0.2, -0.2]
    assert rollout_pd(gains, PdState(0.1), v, 0.1) == pd_sequence(gains, PdState(0.1), v, 0.1)


def test_rollout_plant(robot):
    dp = discretize(robot, 0.1)
    x, y = rollout_plant(dp, np.zeros(2), [0.0, 0.0])
    assert np.all(x == 0) and y == 0.0
    x0 = np.array([0.2, -0.1])
    x, y = rollout_plant(dp, x0, [0.5, -0.3])
    ref = x0
    for u in (0.5, -0.3):
        ref, _ = step(dp, ref, u)
    np.testing.assert_allclose(x, ref, atol=1e-15)
    assert y == pytest.approx(float((dp.c @ x)[0]))
    # with the model's nonlinearities a command inside the dead band does nothing
    x, _ = rollout_plant(dp, x0, [0.05], model=robot)
    np.testing.assert_allclose(x, dp.a @ x0, atol=1e-15)


def test_reset_pi_and_predict(gains):
    assert reset_pi_and_predict(gains, 0.4, 0.0, 1.0, 1.0, 0.2) == 0.4
    v = reset_pi_and_predict(gains, 0.0, 1.0, 0.0, 0.0, 0.2)
    assert v == pytest.approx(-(1 - 0.2 / 3.5))


def _future_actions(robot, gains, timing, x, pi, pd, refs, m):
    """Brute-force rollout of the undisturbed loop, independent of the predictor."""
    ad, bd = taylor_zoh(robot.a_matrix, robot.b_matrix, timing.big_t)
    c = robot.c_matrix[0]
    v_prev, e_prev = pi
    pd_prev = pd
    out = []
    for i in range(m + 1):
        y = float(c @ x)
        e = refs[i] - y
        v = v_prev + e - (1 - timing.sensor_period / gains.ti) * e_prev
        out.append(v)
        v_prev, e_prev = v, e
        for _ in range(timing.multiplicity):
            u = 13.2 * v - 1.2 * pd_prev
            pd_prev = v
            x = ad @ x + bd[:, 0] * nonlinearity(u, robot.sat_limit, robot.dead_zone)
    return out


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.02, 0.02), st.floats(-0.1, 0.1), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05),
       st.lists(st.floats(-0.04, 0.04), min_size=4, max_size=4))
def test_packet_matches_future_loop(x1, x2, v_prev, e_prev, refs):
    from dualrate_ncs.plant import ContinuousPlant, TimingConfig
    robot = ContinuousPlant.from_gain_pole(6.3, 17.7, sat_limit=1.0, dead_zone=0.06)
    timing = TimingConfig(0.1, 2, 10)
    gains = DualRateGains(12.0, 0.01, 3.5)
    dp = discretize(robot, 0.1)
    x = np.array([x1, x2])
    y = float(robot.c_matrix[0] @ x)
    ps = PredictorState(x_hat=np.zeros(2), pd_replica=PdState(v_prev), pi_replica=PiState(v_prev, e_prev))
    v_k, _ = pi_step(gains, ps.pi_replica, refs[0], y, 0.2)
    pkt, new = predict_packet(gains, dp, ps, MeasurementPacket(7, y, x), v_k, refs, timing, 3, model=robot)
    expected = _future_actions(robot, gains, timing, x, (v_prev, e_prev), v_prev, refs, 3)
    np.testing.assert_allclose(pkt.actions, expected, rtol=0, atol=1e-12)
    assert pkt.seq == 7 and len(pkt.actions) == 4
    assert new.pd_replica == PdState(v_k)
    assert new.pi_replica == PiState(v_k, refs[0] - y)
    assert new.v_hat_prev == pkt.actions[1]


def test_degenerate_packets(robot, gains, timing):
    dp = discretize(robot, 0.1)
    ps = PredictorState.initial(2)
    meas = MeasurementPacket(0, 0.0, np.zeros(2))
    pkt, _ = predict_packet(gains, dp, ps, meas, 0.0, [0.0] * 4, timing, 3)
    assert pkt.actions == (0.0, 0.0, 0.0, 0.0)
    pkt, new = predict_packet(gains, dp, ps, meas, 0.25, [0.1], timing, 0)
    assert pkt.actions == (0.25,)
    assert new.pd_replica == PdState(0.25)
    with pytest.raises(ValueError):
        predict_packet(gains, dp, ps, None, None, [0.0] * 4, timing, 3)
    with pytest.raises(ValueError):
        predict_packet(gains, dp, ps, meas, 0.0, [0.0] * 2, timing, 3)


def test_missing_measurement_uses_estimates(robot, gains, timing):
    dp = discretize(robot, 0.1)
    refs = [0.02] * 5
    ps = PredictorState.initial(2)
    pkt0, ps1 = predict_packet(gains, dp, ps, MeasurementPacket(0, 0.0, np.zeros(2)), 0.02, refs, timing, 3)
    # lose measurement 1: the packet must carry the period-0 predictions
    pkt1, _ = predict_packet(gains, dp, ps1, None, None, refs, timing, 3, seq=1)
    assert pkt1.actions[0] == pkt0.actions[1]
    np.testing.assert_allclose(pkt1.actions[1:3], pkt0.actions[2:4], atol=1e-15)


def test_resetting_dominance(robot, gains, timing):
    dp = discretize(robot, 0.1)
    ps = PredictorState.initial(2, [5.0, 5.0])  # badly wrong estimate
    x = np.array([0.01, 0.02])
    pkt, new = predict_packet(gains, dp, ps, MeasurementPacket(0, float(robot.c_matrix[0] @ x), x),
                              0.0, [0.0] * 4, timing, 3)
    fresh, _ = predict_packet(gains, dp, PredictorState.initial(2, x), MeasurementPacket(
        0, float(robot.c_matrix[0] @ x), x), 0.0, [0.0] * 4, timing, 3)
    assert pkt == fresh
