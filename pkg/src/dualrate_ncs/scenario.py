"""Scenario definition, the flat key-value config format, and plant mismatch."""

from __future__ import annotations

import configparser
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .controller import DualRateGains
from .network import DelayModel, DropoutModel, disorder_guard
from .plant import ContinuousPlant, TimingConfig
from .reference import reference_filtered_steps, reference_lissajous

NOMINAL = "nominal"
NO_PREDICTION = "no_prediction"
DELAY_INDEPENDENT = "delay_independent"
MODES = (NOMINAL, NO_PREDICTION, DELAY_INDEPENDENT)

# published Cartesian-robot X axis
ROBOT_GAIN = 6.3
ROBOT_POLE = 17.7


@dataclass(frozen=True)
class ReferenceSpec:
    kind: str = "filtered_steps"
    steps: tuple[tuple[float, float], ...] = ((1.0, 0.04), (21.0, 0.0))
    time_constant: float = 0.5
    ax: float = 0.02
    ay: float = 0.015
    a: int = 3
    b: int = 2
    omega: float = 2 * math.pi / 20.0
    delta: float = math.pi / 2
    axis: str = "x"

    def build(self, base_period: float):
        if self.kind == "filtered_steps":
            return reference_filtered_steps(self.steps, self.time_constant, base_period)
        if self.kind == "lissajous":
            rx, ry = reference_lissajous(self.ax, self.ay, self.a, self.b, self.omega, self.delta)
            if self.axis not in ("x", "y"):
                raise ValueError("axis must be 'x' or 'y'")
            return rx if self.axis == "x" else ry
        raise ValueError(f"unknown reference kind {self.kind!r}")


@dataclass(frozen=True)
class Scenario:
    plant: ContinuousPlant
    timing: TimingConfig
    gains: DualRateGains
    delay: DelayModel
    dropout: DropoutModel
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    duration: float = 40.0
    seed: int = 0
    mode: str = DELAY_INDEPENDENT
    q_percent: float = 0.0
    r_percent: float = 0.0
    x0: tuple[float, ...] | None = None
    model_nonlinearities: bool = True
    lr_fraction: float = 0.5
    tau_lr_max: float | None = None
    grid_points: int = 20

    def validate(self) -> "Scenario":
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        disorder_guard(self.delay, self.timing)
        return self

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    @property
    def remote_timeout(self) -> float:
        """How long the remote side waits for a measurement before using estimates."""
        if self.tau_lr_max is not None:
            return self.tau_lr_max
        return self.delay.tau_max / 2 + self.delay.tau_c

    def reference_fn(self):
        return self.reference.build(self.timing.base_period)

    def true_plant(self) -> ContinuousPlant:
        return apply_mismatch(self.plant, self.q_percent, self.r_percent)


def default_scenario(**changes) -> Scenario:
    """The simulated Cartesian-robot setup: N = 2, T = 0.1 s, p = 0.3, M = 3."""
    base = Scenario(
        plant=ContinuousPlant.from_gain_pole(ROBOT_GAIN, ROBOT_POLE, sat_limit=1.0, dead_zone=0.06),
        timing=TimingConfig(big_t=0.1, multiplicity=2, base_divisor=10),
        gains=DualRateGains(kp=12.0, td=0.01, ti=3.5),
        delay=DelayModel(eta=0.04, phi=0.01, tau_max=0.08),
        dropout=DropoutModel(p_lr=0.3, p_rl=0.3, m_bound=3),
    )
    return base.with_(**changes) if changes else base


def apply_mismatch(plant: ContinuousPlant, q_percent: float, r_percent: float) -> ContinuousPlant:
    """Scale the static gain by ``1 + q/100`` and the time constant by ``1 + r/100``."""
    if q_percent == 0 and r_percent == 0:
        return plant
    k, tau = plant.gain_time_constant()
    k2, tau2 = k * (1 + q_percent / 100.0), tau * (1 + r_percent / 100.0)
    # K / (s (tau s + 1)) = (K / tau) / (s (s + 1 / tau))
    return ContinuousPlant.from_gain_pole(
        k2 / tau2, 1.0 / tau2, sat_limit=plant.sat_limit, dead_zone=plant.dead_zone,
        dead_zone_mode=plant.dead_zone_mode,
    )


# -- config files -----------------------------------------------------------


def _steps_text(steps) -> str:
    return ", ".join(f"{t:g}:{v:g}" for t, v in steps)


def _parse_steps(text: str):
    out = []
    for item in text.split(","):
        item = item.strip()
        if item:
            t, v = item.split(":")
            out.append((float(t), float(v)))
    return tuple(out)


def _matrix(text: str):
    return np.array(json.loads(text), dtype=float)


def scenario_from_config(cp: configparser.ConfigParser, base: Scenario | None = None) -> Scenario:
    s = base or default_scenario()
    changes = {}
    if cp.has_section("plant"):
        sec = cp["plant"]
        kw = dict(
            sat_limit=sec.getfloat("sat_limit", s.plant.sat_limit),
            dead_zone=sec.getfloat("dead_zone", s.plant.dead_zone),
            dead_zone_mode=sec.get("dead_zone_mode", s.plant.dead_zone_mode),
        )
        if "a_matrix" in sec:
            plant = ContinuousPlant(_matrix(sec["a_matrix"]), _matrix(sec["b_matrix"]),
                                    _matrix(sec["c_matrix"]), **kw)
        elif "gain" in sec or "pole" in sec:
            plant = ContinuousPlant.from_gain_pole(sec.getfloat("gain", ROBOT_GAIN),
                                                   sec.getfloat("pole", ROBOT_POLE), **kw)
        else:
            plant = replace(s.plant, **kw)
        changes["plant"] = plant
    if cp.has_section("mismatch"):
        sec = cp["mismatch"]
        changes["q_percent"] = sec.getfloat("q_percent", s.q_percent)
        changes["r_percent"] = sec.getfloat("r_percent", s.r_percent)
    if cp.has_section("timing"):
        sec = cp["timing"]
        changes["timing"] = TimingConfig(sec.getfloat("big_t", s.timing.big_t),
                                         sec.getint("multiplicity", s.timing.multiplicity),
                                         sec.getint("base_divisor", s.timing.base_divisor))
    if cp.has_section("gains"):
        sec = cp["gains"]
        changes["gains"] = DualRateGains(sec.getfloat("kp", s.gains.kp), sec.getfloat("td", s.gains.td),
                                         sec.getfloat("ti", s.gains.ti))
    if cp.has_section("delay"):
        sec = cp["delay"]
        changes["delay"] = DelayModel(sec.getfloat("eta", s.delay.eta), sec.getfloat("phi", s.delay.phi),
                                      sec.getfloat("tau_max", s.delay.tau_max),
                                      sec.getfloat("tau_c", s.delay.tau_c))
        changes["lr_fraction"] = sec.getfloat("lr_fraction", s.lr_fraction)
        if "tau_lr_max" in sec:
            changes["tau_lr_max"] = sec.getfloat("tau_lr_max")
    if cp.has_section("dropout"):
        sec = cp["dropout"]
        p = sec.getfloat("p", None)
        changes["dropout"] = DropoutModel(sec.getfloat("p_lr", p if p is not None else s.dropout.p_lr),
                                          sec.getfloat("p_rl", p if p is not None else s.dropout.p_rl),
                                          sec.getint("m_bound", s.dropout.m_bound))
    if cp.has_section("reference"):
        sec = cp["reference"]
        r = s.reference
        changes["reference"] = ReferenceSpec(
            kind=sec.get("kind", r.kind),
            steps=_parse_steps(sec["steps"]) if "steps" in sec else r.steps,
            time_constant=sec.getfloat("time_constant", r.time_constant),
            ax=sec.getfloat("ax", r.ax), ay=sec.getfloat("ay", r.ay),
            a=sec.getint("a", r.a), b=sec.getint("b", r.b),
            omega=sec.getfloat("omega", r.omega), delta=sec.getfloat("delta", r.delta),
            axis=sec.get("axis", r.axis),
        )
    if cp.has_section("run"):
        sec = cp["run"]
        changes["duration"] = sec.getfloat("duration", s.duration)
        changes["seed"] = sec.getint("seed", s.seed)
        changes["mode"] = sec.get("mode", s.mode)
        changes["model_nonlinearities"] = sec.getboolean("model_nonlinearities", s.model_nonlinearities)
    if cp.has_section("stability"):
        changes["grid_points"] = cp["stability"].getint("grid_points", s.grid_points)
    return s.with_(**changes).validate()


def load_scenario(path: str | Path | None = None, text: str | None = None) -> Scenario:
    cp = configparser.ConfigParser()
    if path is not None:
        with open(path) as fh:
            cp.read_file(fh)
    if text is not None:
        cp.read_string(text)
    return scenario_from_config(cp)


def scenario_to_config(s: Scenario) -> str:
    cp = configparser.ConfigParser()
    p = s.plant
    cp["plant"] = {
        "a_matrix": json.dumps(p.a_matrix.tolist()),
        "b_matrix": json.dumps(p.b_matrix.tolist()),
        "c_matrix": json.dumps(p.c_matrix.tolist()),
        "sat_limit": repr(p.sat_limit),
        "dead_zone": repr(p.dead_zone),
        "dead_zone_mode": p.dead_zone_mode,
    }
    cp["mismatch"] = {"q_percent": repr(s.q_percent), "r_percent": repr(s.r_percent)}
    cp["timing"] = {"big_t": repr(s.timing.big_t), "multiplicity": str(s.timing.multiplicity),
                    "base_divisor": str(s.timing.base_divisor)}
    cp["gains"] = {"kp": repr(s.gains.kp), "td": repr(s.gains.td), "ti": repr(s.gains.ti)}
    cp["delay"] = {"eta": repr(s.delay.eta), "phi": repr(s.delay.phi), "tau_max": repr(s.delay.tau_max),
                   "tau_c": repr(s.delay.tau_c), "lr_fraction": repr(s.lr_fraction)}
    if s.tau_lr_max is not None:
        cp["delay"]["tau_lr_max"] = repr(s.tau_lr_max)
    cp["dropout"] = {"p_lr": repr(s.dropout.p_lr), "p_rl": repr(s.dropout.p_rl),
                     "m_bound": str(s.dropout.m_bound)}
    r = s.reference
    cp["reference"] = {"kind": r.kind, "steps": _steps_text(r.steps), "time_constant": repr(r.time_constant),
                       "ax": repr(r.ax), "ay": repr(r.ay), "a": str(r.a), "b": str(r.b),
                       "omega": repr(r.omega), "delta": repr(r.delta), "axis": r.axis}
    cp["run"] = {"duration": repr(s.duration), "seed": str(s.seed), "mode": s.mode,
                 "model_nonlinearities": str(s.model_nonlinearities).lower()}
    cp["stability"] = {"grid_points": str(s.grid_points)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
