import numpy as np
import pytest
from conftest import P_HAT, WAVELENGTH

from locbeam.bound import (
    BoundError,
    BoundMatrices,
    build_bound_matrices,
    csi_error_bound,
    monte_carlo_bound,
    omega2,
    omega_exact,
    sample_ball,
    solve_bound_program,
)
from locbeam.geometry import (
    ArrayGeometry,
    ChannelParams,
    reconstruct_ris_ue_los,
)

# 40-digit independent evaluation, 4x4 surface, eps_dp = 0.1
S_REF = np.array(
    [
        [3.8535211211393406e-7, -1.4357899026211116e-8, 3.7225802009303737e-7],
        [-1.4357899026211116e-8, 3.2951335219992357e-8, 1.4474442077118845e-8],
        [3.7225802009303737e-7, 1.4474442077118845e-8, 3.8439294714716484e-7],
    ]
)
R_REF = np.array(
    [
        [0.035641528161628713, -0.0012100946207092321, 0.034165854698994892],
        [-0.0012100946207092321, 0.0031380120702570172, 0.0012134306378863571],
        [0.034165854698994892, 0.0012134306378863571, 0.035547366618431192],
    ]
)


def test_bound_matrices_oracle(pl):
    bm = build_bound_matrices(ArrayGeometry.reference(L=4), pl, WAVELENGTH, P_HAT, 0.1)
    np.testing.assert_allclose(bm.S, S_REF, rtol=1e-9)
    np.testing.assert_allclose(bm.R, R_REF, rtol=1e-9)
    assert np.allclose(bm.S, bm.S.T) and np.allclose(bm.R, bm.R.T)
    assert np.all(np.linalg.eigvalsh(bm.S) >= -1e-20)


def test_ball_touching_surface_rejected(pl):
    g = ArrayGeometry.reference(L=2)
    with pytest.raises(BoundError, match="touches RIS"):
        build_bound_matrices(g, pl, WAVELENGTH, (2.0, -2.0, 26.5), 1.0)


def test_zero_radius_gives_zero(pl, params):
    g = ArrayGeometry.reference(L=4)
    bm = build_bound_matrices(g, pl, WAVELENGTH, P_HAT, 0.0)
    assert solve_bound_program(bm, WAVELENGTH, 16)[0] == 0.0
    res = csi_error_bound(g, params, pl, P_HAT, 0.0)
    h = reconstruct_ris_ue_los(g, pl, WAVELENGTH, P_HAT)
    k = params.kappa_r
    expected = (1 - np.sqrt(k / (1 + k))) * np.linalg.norm(h) + np.sqrt(1 / (1 + k)) * params.delta_ru_nlos
    assert res.eps_total == pytest.approx(expected, rel=1e-12)


def test_linear_program_when_s_vanishes(rng):
    A = rng.standard_normal((3, 3))
    R = A + A.T
    bm = BoundMatrices(np.zeros((3, 3)), R, None, None, None, None, None, 0.7, 2.2)
    omega, _, status = solve_bound_program(bm, WAVELENGTH, 16)
    assert status == "optimal"
    assert omega == pytest.approx(0.49 * max(np.linalg.eigvalsh(R).max(), 0.0), rel=1e-6, abs=1e-9)


def test_program_dominates_brute_force(pl):
    # problem value upper-bounds the sampled maximum of the quartic surrogate, tightly
    g = ArrayGeometry.reference(L=4)
    eps = 0.3
    bm = build_bound_matrices(g, pl, WAVELENGTH, P_HAT, eps)
    omega, dp, _ = solve_bound_program(bm, WAVELENGTH, 16)
    r = np.random.default_rng(0)
    pts = sample_ball(r, 500_000, eps)
    # include the sphere surface where the maximum of an indefinite quartic tends to sit
    sph = r.standard_normal((500_000, 3))
    sph *= eps / np.linalg.norm(sph, axis=1, keepdims=True)
    best = max(omega2(bm, WAVELENGTH, 16, pts).max(), omega2(bm, WAVELENGTH, 16, sph).max())
    assert omega >= best * (1 - 1e-9)
    assert omega <= best * 1.01
    assert np.linalg.norm(dp) <= eps * (1 + 1e-6)


def test_bound_above_exact_error_samples(pl):
    g = ArrayGeometry.reference(L=4)
    eps = 0.3
    bm = build_bound_matrices(g, pl, WAVELENGTH, P_HAT, eps)
    omega, _, _ = solve_bound_program(bm, WAVELENGTH, 16)
    pts = sample_ball(np.random.default_rng(3), 20_000, eps)
    assert omega >= omega_exact(g, WAVELENGTH, 2.2, P_HAT, pts).max()


def test_monotone_in_size_and_radius(pl, params):
    vals = {}
    for L in (2, 4, 6, 8):
        for e in (0.1, 0.3, 0.5):
            vals[L, e] = csi_error_bound(ArrayGeometry.reference(L=L), params, pl, P_HAT, e).eps_total
    for L in (2, 4, 6, 8):
        assert vals[L, 0.1] <= vals[L, 0.3] <= vals[L, 0.5]
    for e in (0.1, 0.3, 0.5):
        assert vals[2, e] <= vals[4, e] <= vals[6, e] <= vals[8, e]


def test_pure_los_limit(pl):
    g = ArrayGeometry.reference(L=4)
    p = ChannelParams(WAVELENGTH, kappa_r=1e14, delta_ru_nlos=0.0)
    res = csi_error_bound(g, p, pl, P_HAT, 0.3)
    assert res.eps_total == pytest.approx(res.eps_ru_los, rel=1e-6)


def test_monte_carlo_trivial_cases(pl):
    g = ArrayGeometry.reference(L=2)
    p = ChannelParams(WAVELENGTH, kappa_r=1e14, delta_ru_nlos=0.0)
    assert monte_carlo_bound(g, p, pl, P_HAT, 0.0, trials=1) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        monte_carlo_bound(g, p, pl, P_HAT, 0.1, trials=0)


def test_monte_carlo_deterministic(pl, params):
    g = ArrayGeometry.reference(L=2)
    a = monte_carlo_bound(g, params, pl, P_HAT, 0.3, trials=3000, seed=5)
    b = monte_carlo_bound(g, params, pl, P_HAT, 0.3, trials=3000, seed=5)
    c = monte_carlo_bound(g, params, pl, P_HAT, 0.3, trials=3000, seed=6)
    assert a == b and a != c


def test_sample_ball_radius():
    pts = sample_ball(np.random.default_rng(0), 10_000, 0.4)
    assert np.linalg.norm(pts, axis=1).max() <= 0.4
    assert np.linalg.norm(pts, axis=1).max() > 0.39
