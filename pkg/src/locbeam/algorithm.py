"""Alternating robust optimization of the RIS phases and transmit beam.

Each iteration fixes ``theta`` and finds the multiplier ``mu`` that makes
the channel-error constraint active, then fixes ``mu`` and re-optimizes
``theta`` over the relaxed constraint ``theta^T Gamma theta^* >= eps^2``.
The objective ``theta^T Upsilon(mu) theta^*`` is nondecreasing across
iterations.  At exit the worst-case channel error, worst-case direct link
and matched transmit beam are formed.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_channel_pair, check_positive
from .phase import (
    ExtractionError,
    PhaseSolveResult,
    argument_rounding,
    bnb_phase_solve,
    sdr_phase_solve,
)
from .robust import (
    InnerProblem,
    PhaseSet,
    PhaseVector,
    effective_row,
    matched_beamformer,
    quad_form,
    worst_case_h_bu,
)

logger = logging.getLogger(__name__)


@dataclass
class RobustInputs:
    H_br: np.ndarray
    h_ru_hat: np.ndarray
    eps_dh: float
    beta: float = 1.0
    phase_set: PhaseSet = field(default_factory=PhaseSet.full)
    P_T: float = 10 ** (27 / 10) * 1e-3
    sigma_n2: float = 10 ** (-80 / 10) * 1e-3
    delta_bu: float = 0.0
    e_bu: int = 1
    eps_R: float = 1e-4
    tol_bnb: float = 2e-4
    max_nodes: int = 1000
    T: int = 50

    def __post_init__(self):
        self.H_br, self.h_ru_hat = check_channel_pair(self.H_br, self.h_ru_hat)
        check_positive(self.eps_dh, "eps_dh", allow_zero=True)
        check_positive(self.P_T, "P_T")
        check_positive(self.sigma_n2, "sigma_n2")
        check_positive(self.delta_bu, "delta_bu", allow_zero=True)
        if int(self.T) < 1:
            raise ValueError("T must be at least 1")

    @property
    def N(self):
        return self.H_br.shape[0]

    @property
    def effective_delta_bu(self):
        return float(self.e_bu) * self.delta_bu


@dataclass
class IterationRecord:
    t: int
    mu: float
    objective: float
    wall_time: float
    status: str
    gamma_quad: float = float("nan")


@dataclass
class RunResult:
    theta_opt: PhaseVector
    w_opt: np.ndarray
    mu_opt: float
    delta_h_worst: np.ndarray
    h_bu_worst: np.ndarray
    worst_case_snr: float
    iterations: list[IterationRecord]
    converged: bool
    phase_results: list[PhaseSolveResult] = field(default_factory=list, repr=False)

    @property
    def objectives(self):
        return [r.objective for r in self.iterations]


def worst_case_snr(theta, w, H_br, h_ru_hat, delta_h_worst, h_bu_worst, P_T, sigma_n2):
    """Received SNR ``P_T |((h + dh)^H Theta H + h_bu^H) w|^2 / sigma^2`` (linear)."""
    row = effective_row(H_br, np.asarray(h_ru_hat) + np.asarray(delta_h_worst), np.asarray(theta), h_bu_worst)
    return float(P_T * np.abs(row @ np.asarray(w)) ** 2 / sigma_n2)


def fixed_beam_worst_snr(theta, w, H_br, h_ru_hat, eps, delta_bu, P_T, sigma_n2):
    """Exact minimum SNR of a fixed ``(theta, w)`` over the uncertainty set.

    With ``c = h^H Theta H w`` and ``b = Theta H w`` the minimum of
    ``|c + dh^H b + h_bu^H w|`` over ``|dh| <= eps``, ``|h_bu| = delta``
    is ``max(0, |c| - eps |b| - delta |w|)``.
    """
    theta = np.asarray(theta)
    w = np.asarray(w)
    b = theta * (H_br @ w)
    c = np.asarray(h_ru_hat).conj() @ b
    amp = max(0.0, abs(c) - eps * np.linalg.norm(b) - delta_bu * np.linalg.norm(w))
    return float(P_T * amp**2 / sigma_n2)


def _initial_theta(inputs, init, seed):
    N, beta, ps = inputs.N, inputs.beta, inputs.phase_set
    if init == "zero":
        ang = np.zeros(N)
        if ps.kind == "interval" and not ps.contains(0.0):
            ang = np.full(N, ps.lo)
        return beta * np.exp(1j * ang)
    if init == "nominal":
        nominal = non_robust_baseline(inputs, seed=seed).theta.theta
        return argument_rounding(nominal, ps, beta).theta
    if init != "random":
        raise ValueError(f"unknown initialization {init!r}")
    rng = np.random.default_rng(seed)
    if ps.kind == "discrete":
        ang = rng.integers(0, ps.levels, N) * ps.step
    elif ps.kind == "interval":
        ang = rng.uniform(ps.lo, ps.hi, N)
    else:
        ang = rng.uniform(0.0, 2 * np.pi, N)
    return beta * np.exp(1j * ang)


def _phase_step(inputs, forms, theta_prev, solver, seed):
    if solver == "sdr":
        try:
            return sdr_phase_solve(forms.Upsilon, forms.Gamma, inputs.eps_dh, inputs.beta, seed=seed, candidates=[theta_prev])
        except ExtractionError:
            # randomization found nothing feasible; the previous point always is
            val = quad_form(forms.Upsilon, theta_prev)
            return PhaseSolveResult(PhaseVector(theta_prev, inputs.beta), val, val, status="extraction_fallback")
    return bnb_phase_solve(
        forms.Upsilon,
        forms.Gamma,
        inputs.eps_dh,
        inputs.beta,
        inputs.phase_set,
        tol_bnb=inputs.tol_bnb,
        max_nodes=inputs.max_nodes,
        initial=[theta_prev],
    )


def run_algorithm1(inputs: RobustInputs, phase_solver="sdr", init="zero", seed=0) -> RunResult:
    """Run the alternating optimization and return the robust design.

    ``phase_solver`` is ``"sdr"`` (full argument circle only) or ``"bnb"``.
    ``init`` is ``"zero"`` (all arguments 0), ``"random"`` (seeded) or
    ``"nominal"`` (the non-robust design's phases, rounded into the set).
    Because the worst-case value never decreases along the iterations,
    ``"nominal"`` never ends below the non-robust design's worst case.
    The stopping test is relative: ``|R_t - R_{t-1}| <= eps_R |R_t|``.
    """
    if phase_solver not in ("sdr", "bnb"):
        raise ValueError(f"unknown phase solver {phase_solver!r}")
    if phase_solver == "sdr" and inputs.phase_set.kind != "full":
        raise ValueError("the SDR solver only handles the full argument circle; use bnb")
    inner = InnerProblem(inputs.H_br, inputs.h_ru_hat, inputs.beta)
    eps = inputs.eps_dh
    theta = _initial_theta(inputs, init, seed)
    records: list[IterationRecord] = []
    results = []
    r_rec = 0.0
    converged = False
    mu = np.inf
    for t in range(1, int(inputs.T) + 1):
        t0 = time.perf_counter()
        mu = inner.bisect(theta, eps)
        forms = inner.forms(mu)
        res = _phase_step(inputs, forms, theta, phase_solver, seed + t)
        prev_val = quad_form(forms.Upsilon, theta)
        new_theta = res.theta.theta
        r_obj = res.objective
        stalled = False
        if r_obj < prev_val:
            # the previous point is feasible for this step, so never go backwards
            new_theta, r_obj, stalled = theta, prev_val, True
        theta = new_theta
        results.append(res)
        records.append(
            IterationRecord(
                t=t,
                mu=float(mu),
                objective=float(r_obj),
                wall_time=time.perf_counter() - t0,
                status=res.status if not stalled else "stalled",
                gamma_quad=quad_form(forms.Gamma, theta),
            )
        )
        if abs(r_obj - r_rec) <= inputs.eps_R * abs(r_obj) or stalled:
            converged = True
            break
        r_rec = r_obj
    return _finalize(inputs, inner, theta, records, results, converged)


def _finalize(inputs, inner, theta, records, results, converged):
    eps = inputs.eps_dh
    # re-solve the multiplier for the final phases so the error ball is active
    mu = inner.bisect(theta, eps)
    dh = inner.delta_h(theta, mu)
    h_eff = inputs.h_ru_hat + dh
    h_bu = worst_case_h_bu(inputs.H_br, h_eff, theta, inputs.effective_delta_bu)
    w = matched_beamformer(inputs.H_br, h_eff, theta, h_bu)
    snr = worst_case_snr(theta, w, inputs.H_br, inputs.h_ru_hat, dh, h_bu, inputs.P_T, inputs.sigma_n2)
    return RunResult(
        theta_opt=PhaseVector(theta, inputs.beta, inputs.phase_set),
        w_opt=w,
        mu_opt=float(mu),
        delta_h_worst=dh,
        h_bu_worst=h_bu,
        worst_case_snr=snr,
        iterations=records,
        converged=converged,
        phase_results=results,
    )


def evaluate_fixed_phases(inputs: RobustInputs, theta) -> RunResult:
    """Worst-case design quantities for a given ``theta`` without optimizing it."""
    inner = InnerProblem(inputs.H_br, inputs.h_ru_hat, inputs.beta)
    return _finalize(inputs, inner, np.asarray(theta, dtype=complex), [], [], True)


@dataclass
class BaselineResult:
    theta: PhaseVector
    w: np.ndarray
    nominal_snr: float
    worst_case_snr: float


def non_robust_baseline(inputs: RobustInputs, seed=0) -> BaselineResult:
    """Design on the estimated channel alone, ignoring the error ball.

    Phases maximize ``|h^H Theta H|^2`` by SDR; the beam is matched to the
    nominal channel.  The reported worst-case SNR is the exact minimum of
    the fixed design over the uncertainty set.
    """
    inner = InnerProblem(inputs.H_br, inputs.h_ru_hat, inputs.beta)
    forms = inner.forms(np.inf)
    res = sdr_phase_solve(forms.Upsilon, forms.Gamma, 0.0, inputs.beta, seed=seed)
    theta = res.theta.theta
    w = matched_beamformer(inputs.H_br, inputs.h_ru_hat, theta, np.zeros(inputs.H_br.shape[1]))
    nominal = worst_case_snr(theta, w, inputs.H_br, inputs.h_ru_hat, 0.0, 0.0, inputs.P_T, inputs.sigma_n2)
    worst = fixed_beam_worst_snr(theta, w, inputs.H_br, inputs.h_ru_hat, inputs.eps_dh, inputs.effective_delta_bu, inputs.P_T, inputs.sigma_n2)
    return BaselineResult(PhaseVector(theta, inputs.beta), w, nominal, worst)
