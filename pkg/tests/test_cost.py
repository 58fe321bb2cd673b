import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dualrate_ncs.cost import (accumulated_error, compute_j1_j2, gamma_mask, improvement, overshoot,
                               sweep_mismatch)
from dualrate_ncs.scenario import default_scenario
from dualrate_ncs.simulation import run_simulation

finite = st.floats(-10, 10, allow_nan=False)


def test_hand_computed_indexes():
    nom = np.array([0.0, 1.0, 2.0, 1.0])
    worst = np.array([0.0, 2.0, 3.0, 0.0])   # E = 3, O = max(1, 0) = 1
    cand = np.array([0.0, 1.5, 2.0, 1.0])    # E = 0.5, O = 0
    rep = compute_j1_j2({"nominal": nom, "no_prediction": worst, "cand": cand})
    assert rep.e_y == {"nominal": 0.0, "no_prediction": 3.0, "cand": 0.5}
    assert rep.o_y["no_prediction"] == 1.0 and rep.o_y["cand"] == 0.0
    assert rep.j1["cand"] == pytest.approx(100 * (1 - 0.5 / 3))
    assert rep.j1["nominal"] == 100 and rep.j1["no_prediction"] == 0
    assert rep.j2["cand"] == 100


def test_gamma_window():
    t = np.arange(10) * 0.1
    m = gamma_mask(t, (0.2, 0.5))
    assert list(np.flatnonzero(m)) == [2, 3, 4]
    assert gamma_mask(t, None).all()
    nom, other = np.zeros(10), np.zeros(10)
    other[0] = 5.0
    rep = compute_j1_j2({"nominal": nom, "no_prediction": other}, gamma=(0.2, 0.5), time=t)
    assert rep.e_y["no_prediction"] == 0.0


def test_missing_traces_rejected():
    with pytest.raises(KeyError):
        compute_j1_j2({"nominal": np.zeros(3), "cand": np.ones(3)})
    with pytest.raises(KeyError):
        compute_j1_j2({"no_prediction": np.zeros(3)})
    with pytest.raises(ValueError):
        compute_j1_j2({"nominal": np.zeros(3), "no_prediction": np.ones(4)})


@settings(max_examples=60, deadline=None)
@given(arrays(float, 12, elements=finite), arrays(float, 12, elements=finite), arrays(float, 12, elements=finite))
def test_improvement_bounded(nom, worst, cand):
    e_w = accumulated_error(worst, nom)
    if e_w == 0:
        return
    j = improvement(accumulated_error(cand, nom), e_w)
    assert j <= 100.0
    assert (j == 100.0) == np.array_equal(cand, nom)
    assert overshoot(cand, nom) >= 0 and overshoot(nom, nom) == 0


@settings(max_examples=30, deadline=None)
@given(arrays(float, 8, elements=finite), arrays(float, 8, elements=finite))
def test_identical_candidates_score_identically(nom, worst):
    cand = nom + 0.5
    rep = compute_j1_j2({"nominal": nom, "no_prediction": worst, "a": cand, "b": cand.copy()})
    assert rep.e_y["a"] == rep.e_y["b"] and rep.o_y["a"] == rep.o_y["b"]


def test_simulated_modes_bracket():
    s = default_scenario(duration=20.0)
    traces = {m: run_simulation(s.with_(mode=m)) for m in ("nominal", "no_prediction", "delay_independent")}
    rep = compute_j1_j2(traces)
    assert rep.j1["nominal"] == 100 and rep.j1["no_prediction"] == 0
    assert rep.j1["delay_independent"] > 99


@pytest.fixture(scope="module")
def short_sweep():
    return sweep_mismatch(default_scenario(duration=8.0), (0, 30), (0, 12))


def test_sweep_corners(short_sweep):
    rep = short_sweep
    assert rep.e_w.shape == (2, 2)
    assert rep.j3[0, 0] == 100 and rep.j4[0, 0] == 100
    assert rep.j3[1, 1] == pytest.approx(0) and rep.j4[1, 1] == pytest.approx(0)
    di = run_simulation(default_scenario(duration=8.0))
    np.testing.assert_array_equal(rep.cells[(0, 0)].y, di.y)


def test_sweep_csv_layout(short_sweep, tmp_path):
    f = tmp_path / "sweep.csv"
    short_sweep.write_csv(f)
    rows = list(csv.reader(f.open()))
    labels = [r[0] for r in rows if r and "\\q" in r[0]]
    assert labels == ["E_W r\\q", "J3 r\\q", "O_W r\\q", "J4 r\\q"]
    assert rows[0][1:] == ["0", "30"]
    assert [r[0] for r in rows[1:3]] == ["0", "12"]


def test_sweep_requires_origin():
    with pytest.raises(ValueError):
        sweep_mismatch(default_scenario(duration=1.0), (10, 20), (0,))
