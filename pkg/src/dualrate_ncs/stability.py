"""Lifted closed-loop models and Lyapunov LMI feasibility.

The closed loop is sampled at the sensor period.  Its state is the plant
state plus the controller state ``(v_k, v_{k-1})``; the full form also
carries the prediction error ``x - x_hat``.  A sensor period with a dropout
uses the uniform actuation pattern (one fixed matrix); a delivered packet
gives a non-uniform pattern that depends on the round-trip delay.

Feasibility of

    A0' Q A0 - Q < 0,    sum_j w_j A1(theta_j)' Q A1(theta_j) - Q < 0,    Q > 0

is searched by alternating projections between an affine set (the two
linear maps plus a trace normalization) and a product of shifted PSD cones.
Whatever the search returns is re-checked by ``verify_certificate``.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .controller import DisorderViolation, DualRateGains
from .network import DelayModel
from .plant import ContinuousPlant, TimingConfig, lift, uniform_instants

log = logging.getLogger(__name__)

DROPOUT = "dropout"
SPLIT = "split"  # arrival inside a T slot: N + 1 actuation instants
ALIGNED = "aligned"  # arrival on a T boundary: N instants


@dataclass(frozen=True)
class LiftedController:
    a_c: np.ndarray
    b_c: np.ndarray
    b_bar_c: np.ndarray
    c_c: np.ndarray
    c_bar_c: np.ndarray
    chi: np.ndarray
    chi_i: np.ndarray
    regime: str
    d: int
    instants: tuple[float, ...]


@dataclass
class ClosedLoopModel:
    a_cl_0: np.ndarray
    a_cl_1: Callable[[float], np.ndarray] | None
    reduced: bool = True

    @property
    def dim(self) -> int:
        return self.a_cl_0.shape[0]


@dataclass(frozen=True)
class DelayGrid:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights differ in length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")
        if not np.isclose(self.weights.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError("weights must sum to 1")


@dataclass
class LyapunovCertificate:
    q: np.ndarray
    residual_0: float
    residual_1: float
    min_eig_q: float
    feasible: bool
    iterations: int = 0
    message: str = ""

    def summary(self) -> str:
        verdict = "feasible" if self.feasible else "infeasible"
        return (f"{verdict}: min eig(Q) = {self.min_eig_q:.6g}, "
                f"residual A_cl0 = {self.residual_0:.6g}, residual A_cl1 = {self.residual_1:.6g}")


def _base_controller(gains: DualRateGains, timing: TimingConfig):
    nt, n = timing.sensor_period, timing.multiplicity
    a_c = np.array([[1.0, 0.0], [1.0, 0.0]])
    b_c = np.array([[gains.k_pi], [0.0]])
    b_bar_c = np.array([[gains.k_pi * (1.0 - nt / gains.ti)], [0.0]])
    c_now, c_prev = gains.pd_coefficients(timing.big_t)
    c_c = np.zeros((n, 2))
    c_c[0] = [c_now, -c_prev]
    c_c[1:, 0] = c_now - c_prev
    return a_c, b_c, b_bar_c, c_c


def build_lifted_controller(gains: DualRateGains, timing: TimingConfig, tau: float | None = None) -> LiftedController:
    """Lifted dual-rate controller; ``tau=None`` selects the dropout branch.

    For a delivered packet the delay is ceil-quantized to the base grid.
    ``chi_i`` picks, for every actuation instant, which of the N fast actions
    is applied there; ``chi`` keeps only the rows fed by the new packet.
    """
    a_c, b_c, b_bar_c, c_c = _base_controller(gains, timing)
    n, big_t = timing.multiplicity, timing.big_t
    eye = np.eye(n)
    if tau is None:
        return LiftedController(a_c, b_c, b_bar_c, c_c, c_c.copy(), np.zeros((n, n)), eye,
                                DROPOUT, 0, tuple(uniform_instants(timing)))
    if tau < 0 or tau >= timing.sensor_period:
        raise DisorderViolation(f"delay {tau} outside [0, NT)")
    steps = timing.quantize(tau)
    if steps >= timing.steps_per_period:
        raise DisorderViolation("quantized delay reaches the next sensor period")
    d, rem = divmod(steps, timing.base_divisor)
    if rem == 0:
        est_slots, act_slots = list(range(d)), list(range(d, n))
        regime = ALIGNED
        instants = uniform_instants(timing)
    else:
        est_slots, act_slots = list(range(d + 1)), list(range(d, n))
        regime = SPLIT
        tq = steps * timing.base_period
        instants = [j * big_t for j in range(d + 1)] + [tq] + [j * big_t for j in range(d + 1, n)]
    rows = len(est_slots) + len(act_slots)
    chi_i = np.zeros((rows, n))
    chi = np.zeros((rows, n))
    for r, j in enumerate(est_slots):
        chi_i[r, j] = 1.0
    for r, j in enumerate(act_slots, start=len(est_slots)):
        chi_i[r, j] = 1.0
        chi[r, j] = 1.0
    return LiftedController(a_c, b_c, b_bar_c, c_c, chi_i @ c_c, chi, chi_i, regime, d, tuple(instants))


def _loop_blocks(lp, ctrl: LiftedController, c_in: np.ndarray):
    a_p, b_p, c_p = lp.a_p, lp.b_p, lp.c_p
    top = np.hstack([a_p, b_p @ c_in])
    mid = np.hstack([ctrl.b_bar_c @ c_p - ctrl.b_c @ c_p @ a_p,
                     ctrl.a_c - ctrl.b_c @ c_p @ b_p @ c_in])
    return top, mid


def closed_loop_matrix(plant: ContinuousPlant, gains: DualRateGains, timing: TimingConfig,
                       tau: float | None, reduced: bool = True) -> np.ndarray:
    ctrl = build_lifted_controller(gains, timing, tau)
    lp = lift(plant, timing, ctrl.instants)
    n = plant.n_states
    c_in = ctrl.c_c if tau is None else ctrl.c_bar_c
    top, mid = _loop_blocks(lp, ctrl, c_in)
    if reduced:
        return np.vstack([top, mid])
    # prediction error e = x - x_hat grows open loop while packets are lost,
    # and is reset when the measurement and the reply both get through
    if tau is None:
        err_col_mid = ctrl.b_c @ lp.c_p @ lp.a_p - ctrl.b_bar_c @ lp.c_p
        err_row = np.hstack([np.zeros((n, top.shape[1])), lp.a_p])
    else:
        err_col_mid = np.zeros((2, n))
        err_row = np.zeros((n, top.shape[1] + n))
    return np.vstack([
        np.hstack([top, np.zeros((n, n))]),
        np.hstack([mid, err_col_mid]),
        err_row,
    ])


def build_closed_loop(plant: ContinuousPlant, gains: DualRateGains, timing: TimingConfig,
                      reduced: bool = True) -> ClosedLoopModel:
    if plant.n_inputs != 1 or plant.n_outputs != 1:
        raise ValueError("the dual-rate PID loop needs a single-input single-output plant")
    if not reduced and np.max(np.linalg.eigvals(plant.a_matrix).real) >= 0:
        warnings.warn("full closed-loop form with a plant pole on or right of the imaginary axis: "
                      "the dropout-branch LMI cannot be feasible", RuntimeWarning, stacklevel=2)
    a0 = closed_loop_matrix(plant, gains, timing, None, reduced)
    return ClosedLoopModel(
        a_cl_0=a0,
        a_cl_1=lambda tau: closed_loop_matrix(plant, gains, timing, tau, reduced),
        reduced=reduced,
    )


def grid_delays(dm: DelayModel, l: int, density: Callable | None = None) -> DelayGrid:
    """``l`` equally spaced points over ``[eta, tau_max)`` weighted by the delay density."""
    if l < 2:
        raise ValueError("need at least two grid points")
    lo = dm.eta + dm.tau_c
    points = lo + (dm.tau_max - lo) * np.arange(l) / l
    dens = dm.density(points) if density is None else np.asarray(density(points), dtype=float)
    dens = np.broadcast_to(dens, points.shape).astype(float)
    return DelayGrid(points=points, weights=dens / dens.sum())


# -- LMI ------------------------------------------------------------------


def _branches(cl: ClosedLoopModel, grid: DelayGrid | None):
    """List of branches, each a list of ``(weight, matrix)``."""
    out = [[(1.0, cl.a_cl_0)]]
    if cl.a_cl_1 is not None and grid is not None:
        out.append([(float(w), cl.a_cl_1(float(p))) for p, w in zip(grid.points, grid.weights)])
    return out


def lyapunov_residual(branch, q: np.ndarray) -> float:
    """Largest eigenvalue of ``sum_j w_j A_j' Q A_j - Q``."""
    s = sum(w * a.T @ q @ a for w, a in branch) - q
    return float(np.linalg.eigvalsh((s + s.T) / 2)[-1])


def verify_certificate(cl: ClosedLoopModel, grid: DelayGrid | None, q, eps_pd: float = 1e-6,
                       eps_neg: float = 1e-8) -> LyapunovCertificate:
    q = np.asarray(q, dtype=float)
    if q.shape != (cl.dim, cl.dim):
        raise ValueError(f"Q must be {cl.dim}x{cl.dim}")
    if not np.allclose(q, q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(q).max())):
        raise ValueError("Q must be symmetric")
    branches = _branches(cl, grid)
    res = [lyapunov_residual(b, q) for b in branches]
    res0 = res[0]
    res1 = res[1] if len(res) > 1 else float("nan")
    min_eig = float(np.linalg.eigvalsh(q)[0])
    scale = abs(np.trace(q)) / cl.dim
    feasible = bool(min_eig >= eps_pd * scale and all(r <= -eps_neg * scale for r in res))
    return LyapunovCertificate(q=q, residual_0=res0, residual_1=res1, min_eig_q=min_eig, feasible=feasible)


def _svec_basis(n: int):
    basis = []
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            if i == j:
                e[i, i] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(e)
    return basis


def _svec(x: np.ndarray, iu) -> np.ndarray:
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return x[iu] * scale


def _smat(v: np.ndarray, n: int, iu) -> np.ndarray:
    scale = np.where(iu[0] == iu[1], 1.0, 1.0 / np.sqrt(2.0))
    x = np.zeros((n, n))
    x[iu] = v * scale
    return x + np.triu(x, 1).T


def _clip_psd(x: np.ndarray, floor: float) -> np.ndarray:
    w, v = np.linalg.eigh((x + x.T) / 2)
    return (v * np.maximum(w, floor)) @ v.T


class _AffineProjector:
    """Projection onto {(Q, S_b): S_b = Q - sum w A' Q A, trace Q = n} in svec coordinates."""

    def __init__(self, branches, n):
        self.n = n
        self.iu = np.triu_indices(n)
        basis = _svec_basis(n)
        m = len(basis)
        self.m = m
        ops = []
        for br in branches:
            cols = [_svec(e - sum(w * a.T @ e @ a for w, a in br), self.iu) for e in basis]
            ops.append(np.array(cols).T)
        nb = len(branches)
        g = np.zeros((nb * m + 1, (nb + 1) * m))
        for b, op in enumerate(ops):
            g[b * m:(b + 1) * m, :m] = -op
            g[b * m:(b + 1) * m, (b + 1) * m:(b + 2) * m] = np.eye(m)
        g[-1, :m] = _svec(np.eye(n), self.iu)
        self.g = g
        self.h = np.zeros(nb * m + 1)
        self.h[-1] = n
        self.g_pinv = np.linalg.pinv(g)
        self.ops = ops
        self.nb = nb

    def project(self, z: np.ndarray) -> np.ndarray:
        return z - self.g_pinv @ (self.g @ z - self.h)

    def split(self, z: np.ndarray):
        m, n = self.m, self.n
        return [_smat(z[i * m:(i + 1) * m], n, self.iu) for i in range(self.nb + 1)]

    def join(self, mats) -> np.ndarray:
        return np.concatenate([_svec(x, self.iu) for x in mats])

    def from_q(self, q: np.ndarray) -> np.ndarray:
        qv = _svec(q, self.iu)
        return np.concatenate([qv] + [op @ qv for op in self.ops])


def _warm_start(branches, n):
    """Solve Q - mean_b(sum w A' Q A) = I; a stable averaged operator gives Q > 0."""
    iu = np.triu_indices(n)
    basis = _svec_basis(n)
    cols = []
    for e in basis:
        avg = sum(sum(w * a.T @ e @ a for w, a in br) for br in branches) / len(branches)
        cols.append(_svec(e - avg, iu))
    op = np.array(cols).T
    try:
        q = _smat(np.linalg.solve(op, _svec(np.eye(n), iu)), n, iu)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(q)):
        return None
    return q


def _normalized(q: np.ndarray) -> np.ndarray:
    q = (q + q.T) / 2
    tr = np.trace(q)
    return q * (q.shape[0] / tr) if tr > 0 else q


def check_feasibility(cl: ClosedLoopModel, grid: DelayGrid | None = None, eps_pd: float = 1e-6,
                      eps_neg: float = 1e-8, max_iter: int = 1000, starts: int = 1, seed: int = 0,
                      warm_start: bool = True, time_limit: float = 10.0) -> LyapunovCertificate:
    """Search for a Lyapunov certificate; returns the best attempt when none is found.

    A returned certificate with ``feasible=False`` means the iteration cap
    or ``time_limit`` (seconds) was hit, not that the LMIs are proven
    infeasible.
    """
    deadline = time.monotonic() + time_limit
    n = cl.dim
    branches = _branches(cl, grid)
    for br in branches:
        for _, a in br:
            if not np.all(np.isfinite(a)):
                raise ValueError("closed-loop matrices must be finite")
    proj = _AffineProjector(branches, n)
    rng = np.random.default_rng(seed)

    initial = []
    if warm_start:
        q0 = _warm_start(branches, n)
        if q0 is not None:
            initial.append(q0)
    initial.append(np.eye(n))
    for _ in range(starts):
        r = rng.standard_normal((n, n))
        initial.append(r @ r.T + 0.1 * np.eye(n))

    best = None
    total = 0
    check_every = 10
    for q_init in initial:
        q_init = _normalized(q_init)
        cert = verify_certificate(cl, grid, q_init, eps_pd, eps_neg)
        if cert.feasible:
            cert.iterations, cert.message = total, "initial point certifies"
            return cert
        best = _better(best, cert)
        # margins are relative to trace Q = n, i.e. to an O(1) scale
        for margin in (1e-2, 1e-4, 1e-6):
            z = proj.project(proj.from_q(q_init))
            for it in range(1, max_iter + 1):
                mats = proj.split(z)
                mats[0] = _clip_psd(mats[0], max(margin, eps_pd))
                for b in range(1, len(mats)):
                    mats[b] = _clip_psd(mats[b], margin)
                z = proj.project(proj.join(mats))
                total += 1
                if it % check_every == 0:
                    if time.monotonic() > deadline:
                        best.iterations = total
                        best.message = "time limit reached without a certificate"
                        return best
                    q = _normalized(proj.split(z)[0])
                    cert = verify_certificate(cl, grid, q, eps_pd, eps_neg)
                    if cert.feasible:
                        cert.iterations = total
                        cert.message = f"alternating projections, margin {margin:g}"
                        return cert
                    best = _better(best, cert)
    best.iterations = total
    best.message = "iteration cap reached without a certificate"
    return best


def _better(a: LyapunovCertificate | None, b: LyapunovCertificate) -> LyapunovCertificate:
    def worst(c):
        vals = [c.residual_0, -c.min_eig_q]
        if not np.isnan(c.residual_1):
            vals.append(c.residual_1)
        return max(vals)
    if a is None or worst(b) < worst(a):
        return b
    return a


def spectral_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a))))
