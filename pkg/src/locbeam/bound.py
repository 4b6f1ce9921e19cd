"""Channel-error bound induced by a bounded user-location error.

The exact squared error between the line-of-sight RIS-UE channel at the
true position ``p_hat + dp`` and the reconstructed one at ``p_hat`` is
``zeta0 d0^alpha Omega(dp)``.  ``Omega`` is intractable to maximize over
the ball ``|dp| <= eps``, so it is replaced by the quartic surrogate

    Omega2(dp) = dp^T R dp - c (dp^T S dp)^2,   c = 4 pi^4 / (3 lambda^4 N),

which upper-bounds a Taylor model of ``Omega`` on the ball.  Lifting
``P = dp dp^T`` gives a concave program in ``P`` whose value is the
bound.  The quadratic penalty is moved into a 2x2 epigraph block so the
problem stays a linear SDP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sdp
from .geometry import (
    ArrayGeometry,
    ChannelParams,
    PathLossParams,
    Vec3,
    element_positions,
    reconstruct_ris_ue_los,
)


class BoundError(ValueError):
    pass


@dataclass
class BoundMatrices:
    S: np.ndarray
    R: np.ndarray
    Xi: np.ndarray  # (N, 3, 3)
    G_alpha: np.ndarray  # (N, 3, 3)
    G_half: np.ndarray  # (N, 3, 3)
    eta: np.ndarray  # (N, 3)
    dist: np.ndarray  # (N,) distances |v_j - p_hat|
    eps_dp: float
    alpha: float


@dataclass
class BoundResult:
    omega_upp_max: float
    eps_ru_los: float
    eps_total: float
    mc_actual: float | None = None
    dp_star: np.ndarray | None = None
    solver_status: str = sdp.OPTIMAL


def _g_matrix(a, b, d):
    """Hessian of ``|b - x|^(-a)`` at ``x = 0`` for every row of ``b``."""
    outer = b[:, :, None] * b[:, None, :]
    eye = np.eye(3)[None]
    return a * (a + 2) * (d ** (-a - 4))[:, None, None] * outer - a * (d ** (-a - 2))[:, None, None] * eye


def build_bound_matrices(geometry: ArrayGeometry, pl: PathLossParams, wavelength, p_hat, eps_dp) -> BoundMatrices:
    _, ris = element_positions(geometry)
    p_hat = Vec3.of(p_hat).as_array()
    eps = float(eps_dp)
    if not eps >= 0:
        raise BoundError("eps_dp must be nonnegative")
    b = ris - p_hat
    d = np.linalg.norm(b, axis=1)
    if np.any(d <= eps):
        raise BoundError("UE uncertainty ball touches RIS: some element lies within eps_dp of p_hat")
    alpha = pl.alpha
    unit = b / d[:, None]
    eta = unit[0][None, :] - unit
    Xi = eta[:, :, None] * eta[:, None, :]
    shrunk = d - eps
    s_w = shrunk ** (-alpha / 4) * d ** (-alpha / 4)
    S = np.einsum("j,jab->ab", s_w, Xi)
    Ga = _g_matrix(alpha, b, d)
    Gh = _g_matrix(alpha / 2, b, d)
    r_w = 4 * np.pi**2 / wavelength**2 * shrunk ** (-alpha / 2) * d ** (-alpha / 2)
    R = 0.5 * Ga.sum(axis=0) - np.einsum("j,jab->ab", d ** (-alpha / 2), Gh) + np.einsum("j,jab->ab", r_w, Xi)
    S = 0.5 * (S + S.T)
    R = 0.5 * (R + R.T)
    return BoundMatrices(S=S, R=R, Xi=Xi, G_alpha=Ga, G_half=Gh, eta=eta, dist=d, eps_dp=eps, alpha=alpha)


def quartic_coefficient(wavelength, N):
    return 4 * np.pi**4 / (3 * wavelength**4 * N)


def omega2(bm: BoundMatrices, wavelength, N, dp):
    """Quartic surrogate evaluated at one or many offsets ``dp`` (shape (..., 3))."""
    dp = np.asarray(dp, dtype=float)
    quad_r = np.einsum("...a,ab,...b->...", dp, bm.R, dp)
    quad_s = np.einsum("...a,ab,...b->...", dp, bm.S, dp)
    return quad_r - quartic_coefficient(wavelength, N) * quad_s**2


def omega_exact(geometry, wavelength, alpha, p_hat, dp):
    """Exact ``Omega`` for offsets ``dp`` of shape (..., 3)."""
    _, ris = element_positions(geometry)
    p_hat = Vec3.of(p_hat).as_array()
    dp = np.asarray(dp, dtype=float)
    d_hat = np.linalg.norm(ris - p_hat, axis=1)
    d_true = np.linalg.norm(ris - (p_hat + dp)[..., None, :], axis=-1)
    u = (d_true - d_true[..., :1]) - (d_hat - d_hat[0])
    cross = d_true ** (-alpha / 2) * d_hat ** (-alpha / 2) * np.cos(2 * np.pi / wavelength * u)
    return np.sum(d_true**-alpha + d_hat**-alpha, axis=-1) - 2 * np.sum(cross, axis=-1)


def solve_bound_program(bm: BoundMatrices, wavelength, N, tol=1e-8, max_iters=200):
    """Maximize ``-c tr(SP)^2 + tr(RP)`` over PSD ``P`` with ``tr P <= eps^2``.

    Returns ``(omega, dp_star, status)`` where ``dp_star`` is the scaled
    principal eigenvector of the optimal ``P``.
    """
    eps = bm.eps_dp
    if eps == 0:
        return 0.0, np.zeros(3), sdp.OPTIMAL
    c = quartic_coefficient(wavelength, N)
    s_scale = float(np.linalg.eigvalsh(bm.S).max(initial=0.0))
    r_scale = float(np.abs(np.linalg.eigvalsh(bm.R)).max())
    # P = eps^2 Pn with tr Pn <= 1, u = tr(S Pn) / s_scale
    lin_scale = eps**2 * r_scale
    quad_scale = c * eps**4 * s_scale**2
    K = max(lin_scale, quad_scale)
    if K == 0:
        return 0.0, np.zeros(3), sdp.OPTIMAL
    prob = sdp.SDPProblem([3, 2])
    prob.objective[0] = (eps**2 / K) * bm.R
    prob.add_constraint({0: np.eye(3)}, sdp.LE, 1.0)
    if s_scale > 0:
        prob.objective[1] = np.array([[-quad_scale / K, 0.0], [0.0, 0.0]])
        prob.add_constraint({1: np.array([[0.0, 0.0], [0.0, 1.0]])}, sdp.EQ, 1.0)
        prob.add_constraint({0: bm.S / s_scale, 1: -np.array([[0.0, 0.5], [0.5, 0.0]])}, sdp.EQ, 0.0)
    else:
        prob.add_constraint({1: np.eye(2)}, sdp.EQ, 2.0)
    sol = sdp.solve_sdp(prob, tol=tol, max_iters=max_iters)
    if sol.status != sdp.OPTIMAL:
        raise BoundError(f"bound program did not converge (status {sol.status}, residuals {sol.residuals})")
    P = eps**2 * sol.blocks[0]
    w, V = np.linalg.eigh(P)
    dp_star = V[:, -1] * np.sqrt(max(w[-1], 0.0))
    omega = K * sol.primal_objective
    return max(omega, 0.0), dp_star, sol.status


def combine_bound(eps_ru_los, h_hat_norm, params: ChannelParams):
    w = params.los_weight
    return w * eps_ru_los + (1.0 - w) * h_hat_norm + params.nlos_weight * params.delta_ru_nlos


def csi_error_bound(geometry, params: ChannelParams, pl: PathLossParams, p_hat, eps_dp) -> BoundResult:
    bm = build_bound_matrices(geometry, pl, params.wavelength, p_hat, eps_dp)
    omega, dp_star, status = solve_bound_program(bm, params.wavelength, geometry.N)
    eps_los = float(np.sqrt(pl.zeta0 * pl.d0**pl.alpha * omega))
    h_hat = reconstruct_ris_ue_los(geometry, pl, params.wavelength, p_hat)
    total = combine_bound(eps_los, float(np.linalg.norm(h_hat)), params)
    return BoundResult(omega_upp_max=omega, eps_ru_los=eps_los, eps_total=float(total), dp_star=dp_star, solver_status=status)


def sample_ball(rng, n, radius):
    """``n`` points uniform in the centered 3-ball of the given radius."""
    g = rng.standard_normal((n, 3))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / 3.0)
    return g * r[:, None]


def monte_carlo_bound(geometry, params: ChannelParams, pl: PathLossParams, p_hat, eps_dp, trials=50000, seed=0, chunk=4096):
    """Largest sampled ``|h_RU(p) - h_hat|`` with ``p`` uniform in the error ball.

    Each trial also draws a fresh scattered component of norm
    ``delta_ru_nlos``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    _, ris = element_positions(geometry)
    p_hat_a = Vec3.of(p_hat).as_array()
    lam = params.wavelength
    h_hat = reconstruct_ris_ue_los(geometry, pl, lam, p_hat)
    N = geometry.N
    best = 0.0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        p = p_hat_a + sample_ball(rng, n, eps_dp)
        d = np.linalg.norm(ris[None, :, :] - p[:, None, :], axis=2)
        if np.any(d <= 0):
            raise BoundError("sampled position coincides with an RIS element")
        phase = d - d[:, :1]
        h_los = np.sqrt(pl.zeta0 * (d / pl.d0) ** (-pl.alpha)) * np.exp(2j * np.pi / lam * phase)
        nlos = 0.0
        if params.delta_ru_nlos > 0:
            nlos = rng.standard_normal((n, N)) + 1j * rng.standard_normal((n, N))
            nlos *= params.delta_ru_nlos / np.linalg.norm(nlos, axis=1, keepdims=True)
        h = params.los_weight * h_los + params.nlos_weight * nlos
        best = max(best, float(np.linalg.norm(h - h_hat, axis=1).max()))
        done += n
    return best
