"""Acceptance suite: one PASS/FAIL line per criterion with the measured value.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary.  ``python tests/test_acceptance.py`` does the same.
"""

import itertools
import time

import numpy as np
from conftest import P_HAT, random_channel, random_theta, reference_channels

from locbeam import sdp
from locbeam.algorithm import (
    RobustInputs,
    evaluate_fixed_phases,
    fixed_beam_worst_snr,
    non_robust_baseline,
    run_algorithm1,
)
from locbeam.bound import csi_error_bound
from locbeam.config import build_config
from locbeam.experiments import run_experiment
from locbeam.geometry import ArrayGeometry, ChannelParams, PathLossParams
from locbeam.phase import argument_rounding, bnb_phase_solve, sdr_phase_solve
from locbeam.robust import (
    PhaseSet,
    assemble_spectral_forms,
    bisect_mu,
    direct_objective_and_constraint,
    quad_form,
)

REPORT = []


def report(num, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:2d} {title}: {detail}"
    REPORT.append(line)
    print(line)
    assert ok, line


def lam_max(H):
    return np.linalg.eigvalsh(H @ H.conj().T).max()


def reference_eps(L, eps_dp=0.3):
    return csi_error_bound(ArrayGeometry.reference(L=L), ChannelParams.from_carrier(60e9), PathLossParams(), P_HAT, eps_dp).eps_total


def phase_instance(rng, N, M=3, quantile=0.3):
    H, h = random_channel(rng, N, M)
    f = assemble_spectral_forms(H, h, 1.0, lam_max(H) * 10 ** rng.uniform(-1, 1))
    g = [quad_form(f.Gamma, random_theta(rng, N)) for _ in range(400)]
    return f.Upsilon, f.Gamma, float(np.sqrt(np.quantile(g, quantile)))


def forms_on(A, ang):
    th = np.exp(1j * ang)
    return np.real(np.einsum("ki,ij,kj->k", th, A, th.conj()))


def test_c01_equivalence_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        N, M = int(rng.choice([4, 9, 16])), int(rng.choice([2, 4, 8]))
        H, h = random_channel(rng, N, M)
        th = random_theta(rng, N)
        mu = lam_max(H) * 10 ** rng.uniform(-3, 3)
        eps = float(rng.uniform(0.01, 1.0))
        f = assemble_spectral_forms(H, h, 1.0, mu)
        F, C = direct_objective_and_constraint(H, h, th, mu, eps)
        eF = abs(quad_form(f.Upsilon, th) - F) / abs(F)
        # C can cross zero, so its error is taken relative to the larger of |C| and eps^2
        eC = abs(quad_form(f.Gamma, th) - eps**2 - C) / max(abs(C), eps**2)
        worst = max(worst, eF, eC)
    dt = time.perf_counter() - t0
    report(1, "equivalence oracle", worst <= 1e-8 and dt < 10, f"max rel err {worst:.2e}, {dt:.2f} s")


def test_c02_monotone_forms():
    rng = np.random.default_rng(102)
    viol = 0
    for _ in range(100):
        N, M = int(rng.integers(2, 12)), int(rng.integers(1, 8))
        H, h = random_channel(rng, N, M)
        th = random_theta(rng, N)
        up, ga = [], []
        for mu in lam_max(H) * np.logspace(-3, 3, 50):
            f = assemble_spectral_forms(H, h, 1.0, mu)
            up.append(quad_form(f.Upsilon, th))
            ga.append(quad_form(f.Gamma, th))
        viol += int(np.sum(np.diff(up) < -1e-10)) + int(np.sum(np.diff(ga) > 1e-10))
    report(2, "forms monotone in mu", viol == 0, f"{viol} violations over 100 instances x 50 points")


def test_c03_scalar_bisection():
    mu = bisect_mu(np.array([[1.0 + 0j]]), np.array([2.0 + 0j]), np.array([1.0 + 0j]), 1.0)
    report(3, "scalar bisection closed form", abs(mu - 1.0) <= 1e-8, f"mu = {mu:.12f}")


def test_c04_kkt_activity():
    worst_dh, worst_w, runs = 0.0, 0.0, 0
    cases = [(reference_channels(L)[1:], reference_eps(L), 1e-3 * 10**2.7, 1e-11) for L in (2, 4, 6)]
    rng = np.random.default_rng(104)
    for _ in range(10):
        H, h = random_channel(rng, int(rng.integers(2, 9)), int(rng.integers(1, 5)))
        cases.append(((H, h), 0.2 * np.linalg.norm(h), 1.0, 1.0))
    for (H, h), eps, P, s2 in cases:
        res = run_algorithm1(RobustInputs(H, h, eps, P_T=P, sigma_n2=s2))
        if not res.converged:
            continue
        runs += 1
        worst_dh = max(worst_dh, abs(np.linalg.norm(res.delta_h_worst) / eps - 1))
        worst_w = max(worst_w, abs(np.linalg.norm(res.w_opt) - 1))
    ok = runs == len(cases) and worst_dh <= 1e-6 and worst_w <= 1e-10
    report(4, "KKT activity", ok, f"{runs}/{len(cases)} converged, max |dh|/eps-1 {worst_dh:.1e}, max ||w||-1 {worst_w:.1e}")


def test_c05_bound_validity():
    cfg = build_config({"kind": "bound_sweep", "L": [2, 4, 6], "eps_dp": [0.1, 0.3, 0.5], "solver": {"mc_trials": 50000}})
    t0 = time.perf_counter()
    t = run_experiment(cfg)
    dt = time.perf_counter() - t0
    th, mc = t.values("eps_dh_theory"), t.values("eps_dh_mc")
    margin = min(th[k] / mc[k] for k in th)
    ok = len(th) == 9 and all(th[k] >= mc[k] for k in th) and dt < 120
    report(5, "bound above Monte Carlo", ok, f"9 points, min theory/MC {margin:.4f}, {dt:.1f} s")


def test_c06_convergence_speed():
    _, H, h = reference_channels(4)
    res = run_algorithm1(RobustInputs(H, h, reference_eps(4)))
    obj = np.array(res.objectives)
    viol = int(np.sum(np.diff(obj) < -1e-6 * abs(obj).max()))
    ok = res.converged and len(obj) <= 6 and viol == 0
    report(6, "convergence speed N=16", ok, f"{len(obj)} iterations, {viol} monotonicity violations")


def test_c07_robust_beats_baseline():
    t0 = time.perf_counter()
    parts, ok = [], True
    for L in (2, 4, 6):
        _, H, h = reference_channels(L)
        inp = RobustInputs(H, h, reference_eps(L))
        res = run_algorithm1(inp)
        robust = fixed_beam_worst_snr(res.theta_opt.theta, res.w_opt, H, h, inp.eps_dh, 0.0, inp.P_T, inp.sigma_n2)
        b1 = non_robust_baseline(inp).worst_case_snr
        ok &= robust > b1
        parts.append(f"N={L * L} {robust:.14g} vs {b1:.14g} (rel margin {(robust - b1) / b1:.1e})")
    dt = time.perf_counter() - t0
    report(7, "robust > non-robust worst case", ok and dt < 300, "; ".join(parts) + f"; {dt:.1f} s")


def test_c08_sdr_vs_grid():
    rng = np.random.default_rng(108)
    a2 = np.deg2rad(np.arange(0, 360, 0.1))
    ang = np.stack([np.zeros_like(a2), a2], axis=1)
    worst = 0.0
    for _ in range(20):
        Ups, Gam, eps = phase_instance(rng, 2)
        ok = forms_on(Gam, ang) >= eps**2
        ref = forms_on(Ups, ang)[ok].max()
        val = sdr_phase_solve(Ups, Gam, eps).objective
        worst = max(worst, (ref - val) / abs(ref))
    report(8, "SDR vs 0.1 degree grid", worst <= 1e-3, f"max shortfall {worst:.2e} over 20 instances")


def test_c09_bnb_discrete():
    rng = np.random.default_rng(109)
    lv = np.arange(4) * np.pi / 2
    ang = np.array(list(itertools.product(lv, repeat=5)))
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(10):
        Ups, Gam, eps = phase_instance(rng, 5)
        ok = forms_on(Gam, ang) >= eps**2 * (1 - 1e-9)
        ref = forms_on(Ups, ang)[ok].max()
        val = bnb_phase_solve(Ups, Gam, eps, phase_set=PhaseSet.discrete(4), tol_bnb=1e-9).objective
        worst = max(worst, abs(val - ref) / abs(ref))
    dt = time.perf_counter() - t0
    report(9, "BnB exact on 4-level set", worst <= 1e-6 and dt < 180, f"max rel diff {worst:.1e}, {dt:.1f} s")


def test_c10_restricted_dominance():
    parts, ok = [], True
    ps = PhaseSet.interval(0, np.pi)
    for L in (2, 4):
        _, H, h = reference_channels(L)
        eps = reference_eps(L)
        full = run_algorithm1(RobustInputs(H, h, eps))
        inp = RobustInputs(H, h, eps, phase_set=ps)
        bnb = run_algorithm1(inp, "bnb")
        rounded = evaluate_fixed_phases(inp, argument_rounding(full.theta_opt.theta, ps).theta)
        ok &= bnb.worst_case_snr >= rounded.worst_case_snr
        parts.append(f"N={L * L} BnB {bnb.worst_case_snr:.6g} vs rounded {rounded.worst_case_snr:.6g}")
    report(10, "restricted-set BnB >= rounding", ok, "; ".join(parts))


def _lam_max_problem(C):
    p = sdp.SDPProblem([C.shape[0]], {0: C})
    p.add_constraint({0: np.eye(C.shape[0])}, sdp.EQ, 1.0)
    return p


def _maxcut_problem(W):
    n = W.shape[0]
    p = sdp.SDPProblem([n], {0: (np.diag(W.sum(1)) - W) / 4})
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        p.add_constraint({0: E}, sdp.EQ, 1.0)
    return p


def test_c11_sdp_suite():
    rng = np.random.default_rng(111)
    lam_err, kkt_worst, dual_viol = 0.0, 0.0, 0.0
    for n in range(2, 11):
        A = rng.standard_normal((n, n))
        C = A + A.T
        p = _lam_max_problem(C)
        sol = sdp.solve_sdp(p)
        lam_err = max(lam_err, abs(sol.objective - np.linalg.eigvalsh(C)[-1]) / (1 + abs(sol.objective)))
        if sol.status == sdp.OPTIMAL:
            kkt_worst = max(kkt_worst, sdp.kkt_residuals(p, sol).max())
    for _ in range(10):
        n = int(rng.integers(3, 12))
        W = np.triu(np.abs(rng.standard_normal((n, n))), 1)
        W = W + W.T
        p = _maxcut_problem(W)
        sol = sdp.solve_sdp(p)
        if sol.status == sdp.OPTIMAL:
            kkt_worst = max(kkt_worst, sdp.kkt_residuals(p, sol).max())
        for _ in range(50):
            B = rng.standard_normal((n, n))
            X = B @ B.T
            d = np.sqrt(np.diag(X))
            X /= np.outer(d, d)
            excess = np.sum(p.objective[0] * X) - sol.dual_objective
            dual_viol = max(dual_viol, excess / (1 + abs(sol.dual_objective)))
    ok = lam_err <= 1e-8 and kkt_worst <= 1e-8 and dual_viol <= 1e-9
    report(11, "SDP solver suite", ok, f"lambda_max err {lam_err:.1e}, max KKT residual {kkt_worst:.1e}, max duality excess {dual_viol:.1e}")


def test_c12_rank_one_certificate():
    rng = np.random.default_rng(4)
    a = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    b = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    H = np.outer(a, b.conj())
    h = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    f = assemble_spectral_forms(H, h, 1.0, 5.0 * np.linalg.norm(a) ** 2 * np.linalg.norm(b) ** 2)
    eps = 1e-3 * np.sqrt(np.real(np.trace(f.Gamma)))
    res = sdr_phase_solve(f.Upsilon, f.Gamma, eps)
    w = np.linalg.eigvalsh(res.C_bar)
    ratio = w[-2] / w[-1]
    slack = quad_form(f.Gamma, res.theta.theta) > eps**2
    report(12, "rank-one certificate", ratio <= 1e-6 and slack, f"lambda2/lambda1 = {ratio:.1e}, constraint slack {slack}")


if __name__ == "__main__":
    import sys

    import pytest

    sys.exit(pytest.main([__file__, "-q"]))
