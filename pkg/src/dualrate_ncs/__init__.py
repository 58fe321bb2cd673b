"""Dual-rate PID control over a network with delays and packet dropouts.

Modules: ``plant`` (ZOH discretization and lifting), ``controller`` (dual-rate
PID and actuation plans), ``predictor`` (remote-side prediction),
``network`` (delay/dropout models and the datagram codec), ``transport``
(UDP endpoints), ``stability`` (closed-loop matrices and LMI search) and the
harness (``scenario``, ``simulation``, ``cost``, ``live``, ``cli``).
"""

from .controller import ActuationPlan, DualRateGains, PdState, PiState, PredictionExhausted
from .cost import CostReport, compute_j1_j2, sweep_mismatch
from .network import DelayModel, DisorderGuardViolation, DropoutModel, MalformedPacket
from .plant import ContinuousPlant, DiscretePlant, LiftedPlant, TimingConfig, discretize, lift
from .predictor import ControlPacket, MeasurementPacket, PredictorState, predict_packet
from .reference import reference_filtered_steps, reference_lissajous
from .scenario import Scenario, apply_mismatch, default_scenario, load_scenario
from .simulation import SimulationTrace, run_simulation
from .stability import build_closed_loop, check_feasibility, grid_delays, verify_certificate

__all__ = [
    "ActuationPlan", "ContinuousPlant", "ControlPacket", "CostReport", "DelayModel", "DiscretePlant",
    "DisorderGuardViolation", "DropoutModel", "DualRateGains", "LiftedPlant", "MalformedPacket",
    "MeasurementPacket", "PdState", "PiState", "PredictionExhausted", "PredictorState", "Scenario",
    "SimulationTrace", "TimingConfig", "apply_mismatch", "build_closed_loop", "check_feasibility",
    "compute_j1_j2", "default_scenario", "discretize", "grid_delays", "lift", "load_scenario",
    "predict_packet", "reference_filtered_steps", "reference_lissajous", "run_simulation",
    "sweep_mismatch", "verify_certificate",
]
