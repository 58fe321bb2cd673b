"""Accumulated-error and overshoot indexes J1..J4, and the model-mismatch sweep."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .scenario import DELAY_INDEPENDENT, Scenario
from .simulation import SimulationTrace, run_simulation

NOMINAL_KEY = "nominal"
WORST_KEY = "no_prediction"


def _output(trace) -> np.ndarray:
    return np.asarray(trace.y if isinstance(trace, SimulationTrace) else trace, dtype=float)


def gamma_mask(time: np.ndarray, gamma: tuple[float, float] | None) -> np.ndarray:
    """Boolean mask for the evaluation range ``[start, stop)``; the full run when None."""
    if gamma is None:
        return np.ones(len(time), dtype=bool)
    lo, hi = gamma
    return (time >= lo - 1e-9) & (time < hi - 1e-9)


def accumulated_error(y: np.ndarray, y_nom: np.ndarray) -> float:
    return float(np.sum(np.abs(y - y_nom)))


def overshoot(y: np.ndarray, y_nom: np.ndarray) -> float:
    return float(max(abs(y.max() - y_nom.max()), abs(y.min() - y_nom.min())))


def improvement(value: float, worst: float) -> float:
    """``100 - 100 value / worst``; 100 when both vanish."""
    if worst == 0:
        return 100.0 if value == 0 else -np.inf
    return 100.0 * (1.0 - value / worst)


@dataclass
class CostReport:
    gamma: tuple[float, float] | None = None
    e_y: dict[str, float] = field(default_factory=dict)
    j1: dict[str, float] = field(default_factory=dict)
    o_y: dict[str, float] = field(default_factory=dict)
    j2: dict[str, float] = field(default_factory=dict)
    q_values: tuple[float, ...] = ()
    r_values: tuple[float, ...] = ()
    e_w: np.ndarray | None = None  # rows indexed by r, columns by q
    j3: np.ndarray | None = None
    o_w: np.ndarray | None = None
    j4: np.ndarray | None = None
    cells: dict[tuple[float, float], SimulationTrace] = field(default_factory=dict, repr=False)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.e_y:
                w.writerow(["output", "E_Y", "J1", "O_Y", "J2"])
                for name in self.e_y:
                    w.writerow([name, f"{self.e_y[name]:.6g}", f"{self.j1[name]:.4f}",
                                f"{self.o_y[name]:.6g}", f"{self.j2[name]:.4f}"])
            if self.e_w is not None:
                if self.e_y:
                    w.writerow([])
                for label, grid, fmt in (("E_W", self.e_w, ".6g"), ("J3", self.j3, ".4f"),
                                         ("O_W", self.o_w, ".6g"), ("J4", self.j4, ".4f")):
                    w.writerow([f"{label} r\\q", *[f"{q:g}" for q in self.q_values]])
                    for r, row in zip(self.r_values, grid):
                        w.writerow([f"{r:g}", *[format(v, fmt) for v in row]])


def compute_j1_j2(traces: Mapping[str, object], gamma: tuple[float, float] | None = None,
                  time: np.ndarray | None = None, nominal: str = NOMINAL_KEY,
                  worst: str = WORST_KEY) -> CostReport:
    """E_Y, J1, O_Y and J2 of every trace against ``traces[nominal]``, normalized by ``traces[worst]``."""
    if nominal not in traces:
        raise KeyError(f"missing the nominal trace {nominal!r}")
    if worst not in traces:
        raise KeyError(f"missing the worst trace {worst!r}")
    y_nom = _output(traces[nominal])
    if time is None:
        ref = traces[nominal]
        time = ref.time if isinstance(ref, SimulationTrace) else np.arange(len(y_nom))
    mask = gamma_mask(np.asarray(time, dtype=float), gamma)
    outputs = {}
    for name, tr in traces.items():
        y = _output(tr)
        if y.shape != y_nom.shape:
            raise ValueError(f"trace {name!r} is not on the nominal time grid")
        outputs[name] = y[mask]
    y_nom = outputs[nominal]
    rep = CostReport(gamma=gamma)
    for name, y in outputs.items():
        rep.e_y[name] = accumulated_error(y, y_nom)
        rep.o_y[name] = overshoot(y, y_nom)
    for name in outputs:
        rep.j1[name] = improvement(rep.e_y[name], rep.e_y[worst])
        rep.j2[name] = improvement(rep.o_y[name], rep.o_y[worst])
    return rep


def sweep_mismatch(base: Scenario, q_values: Sequence[float] = (0, 20, 30),
                   r_values: Sequence[float] = (0, 8, 12),
                   gamma: tuple[float, float] | None = None) -> CostReport:
    """Delay-independent runs over a (r, q) grid of plant mismatch.

    Only the simulated plant changes; the controller and predictor keep the
    nominal model.  The reference output is the mismatch-free cell and the
    normalizer the cell with the largest q and r.
    """
    q_values, r_values = tuple(q_values), tuple(r_values)
    if 0 not in q_values or 0 not in r_values:
        raise ValueError("the grid must contain q = 0 and r = 0")
    cells = {}
    for r in r_values:
        for q in q_values:
            tr = run_simulation(base.with_(mode=DELAY_INDEPENDENT, q_percent=q, r_percent=r))
            if tr.diverged:
                raise ArithmeticError(f"run diverged at q={q}, r={r}")
            cells[(q, r)] = tr
    y_nom_tr = cells[(0, 0)]
    mask = gamma_mask(y_nom_tr.time, gamma)
    y_nom = y_nom_tr.y[mask]
    shape = (len(r_values), len(q_values))
    e_w, o_w = np.zeros(shape), np.zeros(shape)
    for ir, r in enumerate(r_values):
        for iq, q in enumerate(q_values):
            y = cells[(q, r)].y[mask]
            e_w[ir, iq] = accumulated_error(y, y_nom)
            o_w[ir, iq] = overshoot(y, y_nom)
    iq_max, ir_max = q_values.index(max(q_values)), r_values.index(max(r_values))
    j3 = np.vectorize(improvement)(e_w, e_w[ir_max, iq_max])
    j4 = np.vectorize(improvement)(o_w, o_w[ir_max, iq_max])
    return CostReport(gamma=gamma, q_values=q_values, r_values=r_values,
                      e_w=e_w, j3=j3, o_w=o_w, j4=j4, cells=cells)
