"""Worst-case channel error for a fixed RIS configuration.

For a fixed phase vector ``theta`` (``Theta = diag(theta)``), the inner
problem

    min_{|dh| <= eps} | (h + dh)^H Theta H |^2

is solved through its Lagrangian.  Stationarity gives

    dh(mu) = -(B + mu I)^{-1} B h,      B = Theta H H^H Theta^H,

and the multiplier ``mu > 0`` is the root of ``|dh(mu)|^2 = eps^2``.
Because ``Theta Theta^H = beta^2 I``, both the objective and the
constraint are Hermitian quadratic forms in ``theta`` whose matrices
``Upsilon(mu)`` and ``Gamma(mu)`` do not depend on ``theta``.  They are
evaluated here from one eigendecomposition of ``H H^H``.

Quadratic forms are written ``theta^T A theta^*`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_channel_pair, check_complex_vector, check_positive

TWO_PI = 2.0 * np.pi


class InfeasibleError(ValueError):
    """The error ball can null the effective channel for this ``theta``.

    ``sup_value`` is the largest attainable ``theta^T Gamma theta^*``.
    """

    def __init__(self, msg, sup_value=None):
        super().__init__(msg)
        self.sup_value = sup_value


# --------------------------------------------------------------------------
# phase types


@dataclass(frozen=True)
class PhaseSet:
    """Allowed arguments of each reflection coefficient.

    ``kind`` is ``"full"`` (any angle), ``"interval"`` (``[lo, hi]``) or
    ``"discrete"`` (``levels`` evenly spaced angles starting at 0).
    """

    kind: str = "full"
    lo: float = 0.0
    hi: float = TWO_PI
    levels: int = 0

    def __post_init__(self):
        if self.kind not in ("full", "interval", "discrete"):
            raise ValueError(f"unknown phase set kind {self.kind!r}")
        if self.kind == "interval" and not self.lo < self.hi:
            raise ValueError("interval phase set needs lo < hi")
        if self.kind == "discrete" and self.levels < 2:
            raise ValueError("discrete phase set needs at least 2 levels")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def interval(cls, lo, hi):
        if hi - lo >= TWO_PI:
            return cls("full")
        return cls("interval", float(lo), float(hi))

    @classmethod
    def discrete(cls, levels):
        return cls("discrete", 0.0, TWO_PI, int(levels))

    @property
    def step(self):
        return TWO_PI / self.levels if self.kind == "discrete" else None

    def level_angles(self):
        return np.arange(self.levels) * self.step

    def contains(self, angles, tol=1e-9):
        a = np.mod(np.asarray(angles, dtype=float), TWO_PI)
        if self.kind == "full":
            return np.ones(a.shape, dtype=bool)
        if self.kind == "interval":
            # compare on the circle: angle lies within [lo, hi] after unwrapping
            rel = np.mod(a - self.lo, TWO_PI)
            width = self.hi - self.lo
            return (rel <= width + tol) | (rel >= TWO_PI - tol)
        off = np.mod(a / self.step + 0.5, 1.0) - 0.5
        return np.abs(off) * self.step <= tol

    def to_dict(self):
        if self.kind == "full":
            return {"kind": "full"}
        if self.kind == "interval":
            return {"kind": "interval", "lo": self.lo, "hi": self.hi}
        return {"kind": "discrete", "levels": self.levels}


@dataclass
class PhaseVector:
    theta: np.ndarray
    beta: float = 1.0
    phase_set: PhaseSet = field(default_factory=PhaseSet.full)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=complex)
        if np.max(np.abs(np.abs(self.theta) - self.beta), initial=0.0) > 1e-9:
            raise ValueError("every reflection coefficient must have modulus beta")
        if not np.all(self.phase_set.contains(np.angle(self.theta), tol=1e-7)):
            raise ValueError("reflection argument outside the allowed set")

    @classmethod
    def from_angles(cls, angles, beta=1.0, phase_set=None):
        return cls(beta * np.exp(1j * np.asarray(angles, dtype=float)), beta, phase_set or PhaseSet.full())

    @property
    def angles(self):
        return np.mod(np.angle(self.theta), TWO_PI)


def quad_form(A, theta):
    """``theta^T A theta^*`` for Hermitian ``A`` (returned as a real number)."""
    theta = np.asarray(theta)
    return float(np.real(theta @ A @ theta.conj()))


# --------------------------------------------------------------------------
# spectral machinery


class _Spectrum:
    """Eigendecomposition of ``H H^H`` reused across many ``mu`` values."""

    def __init__(self, H):
        G = H @ H.conj().T
        s, U = np.linalg.eigh(0.5 * (G + G.conj().T))
        self.s = np.clip(s, 0.0, None)
        self.U = U
        self.H = H

    def lam_max(self, beta):
        return beta**2 * float(self.s.max(initial=0.0))


@dataclass(frozen=True)
class SpectralForms:
    mu: float
    Upsilon: np.ndarray
    Gamma: np.ndarray
    Z: np.ndarray
    X: np.ndarray


def _check_mu(mu):
    mu = float(mu)
    if not mu > 0:
        raise ValueError("mu must be positive")
    return mu


def assemble_spectral_forms(H_br, h_ru_hat, beta, mu) -> SpectralForms:
    """Assemble ``Upsilon(mu)`` and ``Gamma(mu)``.

    ``Z = [I - HH^H (mu/beta^2 I + HH^H)^{-1}] H`` and
    ``X = beta^2 HH^H (mu I + beta^2 HH^H)^{-2} HH^H``; then
    ``Upsilon = diag(h^*) Z Z^H diag(h)`` and
    ``Gamma = diag(h^*) X diag(h)``.  ``mu = inf`` gives the limits
    ``Upsilon = diag(h^*) HH^H diag(h)`` and ``Gamma = 0``.
    """
    H, h = check_channel_pair(H_br, h_ru_hat)
    mu = _check_mu(mu)
    sp = _Spectrum(H)
    return _forms_from_spectrum(sp, h, beta, mu)


def _forms_from_spectrum(sp, h, beta, mu):
    s, U = sp.s, sp.U
    if np.isinf(mu):
        z_w = np.ones_like(s)
        x_w = np.zeros_like(s)
    else:
        m = mu / beta**2
        z_w = m / (s + m)
        x_w = beta**2 * s**2 / (mu + beta**2 * s) ** 2
    Z = (U * z_w) @ (U.conj().T @ sp.H)
    X = (U * x_w) @ U.conj().T
    D = h.conj()[:, None]
    Ups = D * (Z @ Z.conj().T) * h[None, :]
    Gam = D * X * h[None, :]
    Ups = 0.5 * (Ups + Ups.conj().T)
    Gam = 0.5 * (Gam + Gam.conj().T)
    X = 0.5 * (X + X.conj().T)
    return SpectralForms(mu=mu, Upsilon=Ups, Gamma=Gam, Z=Z, X=X)


def direct_objective_and_constraint(H_br, h_ru_hat, theta, mu, eps):
    """Objective ``F`` and constraint residual ``C`` with an explicit inverse.

    ``F = |[h - (B + mu I)^{-1} B h]^H Theta H|^2`` and
    ``C = h^H B (B + mu I)^{-2} B h - eps^2``.  Deliberately unsimplified:
    this is the reference the spectral forms are checked against.
    """
    H, h = check_channel_pair(H_br, h_ru_hat)
    theta = check_complex_vector(theta, "theta", H.shape[0])
    mu = _check_mu(mu)
    A = theta[:, None] * H
    B = A @ A.conj().T
    K = B + mu * np.eye(B.shape[0])
    try:
        Kinv = np.linalg.inv(K)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - mu > 0 keeps K definite
        raise ValueError("singular system in direct evaluation") from exc
    corr = Kinv @ B @ h
    F = float(np.linalg.norm((h - corr).conj() @ A) ** 2)
    C = float(np.real(h.conj() @ B @ Kinv @ Kinv @ B @ h)) - eps**2
    return F, C


def worst_case_delta_h(H_br, h_ru_hat, theta, mu):
    """Minimizing channel error ``-(B + mu I)^{-1} B h`` for fixed ``theta``."""
    H, h = check_channel_pair(H_br, h_ru_hat)
    theta = check_complex_vector(theta, "theta", H.shape[0])
    mu = float(mu)
    if np.isinf(mu):
        return np.zeros_like(h)
    _check_mu(mu)
    beta = float(np.abs(theta[0])) if theta.size else 1.0
    sp = _Spectrum(H)
    return _delta_h_from_spectrum(sp, h, theta, beta, mu)


def _delta_h_from_spectrum(sp, h, theta, beta, mu):
    # eigenvectors of B are Theta U / beta with eigenvalues beta^2 s
    lam = beta**2 * sp.s
    y = sp.U.conj().T @ (theta.conj() * h) / beta
    y *= lam / (lam + mu)
    return -(theta * (sp.U @ y)) / beta


def _gamma_quad(sp, h, theta, beta, mu):
    g = h * theta.conj()
    c = np.abs(sp.U.conj().T @ g) ** 2
    return float(np.sum(beta**2 * sp.s**2 / (mu + beta**2 * sp.s) ** 2 * c))


def bisect_mu(H_br, h_ru_hat, theta, eps, tol=1e-10, max_iter=400):
    """Multiplier ``mu`` with ``theta^T Gamma(mu) theta^* = eps^2``.

    Bisection runs on ``log mu``; the quadratic form is strictly
    decreasing in ``mu`` so the root is unique.  ``eps = 0`` returns
    ``inf`` (no uncertainty).
    """
    H, h = check_channel_pair(H_br, h_ru_hat)
    theta = check_complex_vector(theta, "theta", H.shape[0])
    eps = check_positive(eps, "eps", allow_zero=True)
    if eps == 0:
        return np.inf
    beta = float(np.abs(theta).max())
    sp = _Spectrum(H)
    lmax = sp.lam_max(beta)
    if lmax == 0:
        raise InfeasibleError("error-dominated regime: BS-RIS channel is zero", 0.0)
    target = eps**2

    def q(mu):
        return _gamma_quad(sp, h, theta, beta, mu)

    mu_min = 1e-12 * lmax
    sup = q(mu_min)
    if not sup > target:
        raise InfeasibleError(
            f"error-dominated regime: eps^2 = {target:.6g} is not below the attainable {sup:.6g}",
            sup,
        )
    lo, hi = lmax, lmax
    if q(lmax) > target:
        while q(hi) > target:
            lo, hi = hi, hi * 2.0
            if hi > 1e300:
                raise InfeasibleError("could not bracket mu", sup)
    else:
        while q(lo) <= target:
            hi, lo = lo, lo / 2.0
            if lo < mu_min:
                lo = mu_min
                break
    mu = np.sqrt(lo * hi)
    for _ in range(max_iter):
        mu = np.sqrt(lo * hi)
        val = q(mu)
        if abs(val - target) <= tol * target:
            return float(mu)
        if val > target:
            lo = mu
        else:
            hi = mu
        if hi / lo - 1.0 < 1e-15:
            break
    return float(mu)


def worst_case_h_bu(H_br, h_eff_ru, theta, delta_bu):
    """Direct-link realization that shrinks the effective channel the most."""
    H, h = check_channel_pair(H_br, h_eff_ru)
    theta = check_complex_vector(theta, "theta", H.shape[0])
    g = H.conj().T @ (theta.conj() * h)
    n = np.linalg.norm(g)
    if n == 0:
        raise ValueError("effective reflected channel is zero")
    return -float(delta_bu) * g / n


def matched_beamformer(H_br, h_eff_ru, theta, h_bu):
    """Unit-norm transmit vector matched to the end-to-end channel."""
    H, h = check_channel_pair(H_br, h_eff_ru)
    theta = check_complex_vector(theta, "theta", H.shape[0])
    g = H.conj().T @ (theta.conj() * h) + np.asarray(h_bu, dtype=complex)
    n = np.linalg.norm(g)
    if n == 0:
        raise ValueError("combined channel is zero")
    return g / n


def effective_row(H_br, h_eff_ru, theta, h_bu):
    """Row vector ``(h + dh)^H Theta H + h_bu^H``."""
    return (np.asarray(h_eff_ru).conj() * theta) @ H_br + np.asarray(h_bu).conj()


class InnerProblem:
    """Cached inner-problem evaluator for a fixed ``(H, h_hat, beta)``.

    Algorithm loops call ``bisect``/``forms``/``delta_h`` many times for
    the same channel, so the eigendecomposition is done once.
    """

    def __init__(self, H_br, h_ru_hat, beta):
        self.H, self.h = check_channel_pair(H_br, h_ru_hat)
        self.beta = check_positive(beta, "beta")
        self.sp = _Spectrum(self.H)

    def gamma_quad(self, theta, mu):
        return _gamma_quad(self.sp, self.h, theta, self.beta, mu)

    def forms(self, mu):
        return _forms_from_spectrum(self.sp, self.h, self.beta, mu)

    def delta_h(self, theta, mu):
        if np.isinf(mu):
            return np.zeros_like(self.h)
        return _delta_h_from_spectrum(self.sp, self.h, theta, self.beta, mu)

    def bisect(self, theta, eps, tol=1e-10):
        return bisect_mu(self.H, self.h, theta, eps, tol)
