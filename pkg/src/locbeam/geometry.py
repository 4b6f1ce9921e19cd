"""Array geometry and geometric channel construction.

Every channel here is built from exact per-element distances.  The
BS-RIS link is taken to be pure line-of-sight; the RIS-UE link is a
Rician mix of a line-of-sight part (a deterministic function of the user
position) and a scattered part whose l2 norm is known.

RIS element ``j = l + (k - 1) L`` (1-based ``l, k``) sits at
``v1 + ((l - 1) d_ris, 0, (k - 1) d_ris)``.  Arrays are 0-based in code, so
element ``j`` lives at row ``j - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_vec3

SPEED_OF_LIGHT = 2.99792458e8


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(np.isfinite([self.x, self.y, self.z])):
            raise GeometryError("Vec3 components must be finite")

    def as_array(self):
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def of(cls, p):
        if isinstance(p, Vec3):
            return p
        a = check_vec3(p)
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class ArrayGeometry:
    """BS uniform linear array plus square RIS.

    ``L`` is the RIS side length, so the surface has ``N = L**2`` elements.
    """

    bs_anchor: Vec3
    ris_anchor: Vec3
    d_bs: float
    d_ris: float
    M: int
    L: int

    def __post_init__(self):
        object.__setattr__(self, "bs_anchor", Vec3.of(self.bs_anchor))
        object.__setattr__(self, "ris_anchor", Vec3.of(self.ris_anchor))
        if not (self.d_bs > 0 and self.d_ris > 0):
            raise GeometryError("element spacings must be positive")
        if int(self.M) != self.M or self.M < 1:
            raise GeometryError("M must be a positive integer")
        if int(self.L) != self.L or self.L < 1:
            raise GeometryError("L must be a positive integer")

    @property
    def N(self):
        return self.L * self.L

    @classmethod
    def reference(cls, L=4, M=32):
        """Indoor reference layout: BS at 25 m height, RIS 2 m away, 5 mm spacing."""
        return cls((0.0, 0.0, 25.0), (2.0, -2.0, 26.0), 0.005, 0.005, M, L)


@dataclass(frozen=True)
class PathLossParams:
    zeta0: float = 1e-3
    d0: float = 1.0
    alpha: float = 2.2

    def __post_init__(self):
        for name in ("zeta0", "d0", "alpha"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive")


@dataclass(frozen=True)
class ChannelParams:
    """Propagation and reflection parameters.

    ``e_bu`` switches the direct BS-UE link on or off; it multiplies the
    direct channel wherever that channel enters the received signal.
    """

    wavelength: float
    kappa_r: float = 20.0
    delta_ru_nlos: float = 1e-4
    delta_bu: float = 0.0
    e_bu: int = 1
    beta: float = 1.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise GeometryError("wavelength must be positive")
        if not self.kappa_r >= 0:
            raise GeometryError("kappa_r must be nonnegative")
        if not (self.delta_ru_nlos >= 0 and self.delta_bu >= 0):
            raise GeometryError("channel norms must be nonnegative")
        if self.e_bu not in (0, 1):
            raise GeometryError("e_bu must be 0 or 1")
        if not 0 < self.beta <= 1:
            raise GeometryError("beta must lie in (0, 1]")

    @classmethod
    def from_carrier(cls, fc, **kw):
        return cls(wavelength=SPEED_OF_LIGHT / check_positive(fc, "fc"), **kw)

    @property
    def los_weight(self):
        return np.sqrt(self.kappa_r / (1.0 + self.kappa_r))

    @property
    def nlos_weight(self):
        return np.sqrt(1.0 / (1.0 + self.kappa_r))


@dataclass
class ChannelSet:
    H_br: np.ndarray
    h_ru_los: np.ndarray
    h_ru_hat: np.ndarray
    h_ru_true: np.ndarray
    h_bu: np.ndarray
    h_ru_nlos: np.ndarray | None = None


def element_positions(geometry: ArrayGeometry):
    """Return ``(bs, ris)`` position arrays of shape ``(M, 3)`` and ``(N, 3)``."""
    g = geometry
    i = np.arange(g.M)
    bs = g.bs_anchor.as_array() + np.outer(i * g.d_bs, [1.0, 0.0, 0.0])
    j = np.arange(g.N)
    ell, k = j % g.L, j // g.L
    offs = np.stack([ell * g.d_ris, np.zeros(g.N), k * g.d_ris], axis=1)
    ris = g.ris_anchor.as_array() + offs
    return bs, ris


def path_loss(distance, params: PathLossParams):
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)):
        raise GeometryError("path loss needs a positive distance")
    out = params.zeta0 * (d / params.d0) ** (-params.alpha)
    return float(out) if out.ndim == 0 else out


def build_bs_ris_channel(geometry: ArrayGeometry, pl: PathLossParams, wavelength):
    """N x M line-of-sight BS-RIS matrix, phase referenced to the anchor pair."""
    bs, ris = element_positions(geometry)
    dist = np.linalg.norm(ris[:, None, :] - bs[None, :, :], axis=2)
    phase = dist[0, 0] - dist
    return np.sqrt(path_loss(dist, pl)) * np.exp(2j * np.pi / wavelength * phase)


def build_ris_ue_los(geometry: ArrayGeometry, pl: PathLossParams, wavelength, p):
    """Line-of-sight RIS-UE vector for a user at ``p``, referenced to element 1."""
    _, ris = element_positions(geometry)
    p = Vec3.of(p).as_array()
    dist = np.linalg.norm(ris - p, axis=1)
    if np.any(dist <= 0):
        raise GeometryError("user position coincides with an RIS element")
    phase = dist - dist[0]
    return np.sqrt(path_loss(dist, pl)) * np.exp(2j * np.pi / wavelength * phase)


def reconstruct_ris_ue_los(geometry, pl, wavelength, p_hat):
    """Channel reconstructed from an estimated position; same law as the true one."""
    return build_ris_ue_los(geometry, pl, wavelength, p_hat)


def _complex_gaussian(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def fixed_norm_draw(rng, n, norm):
    """Complex Gaussian direction rescaled to exactly ``norm``."""
    if norm == 0 or n == 0:
        return np.zeros(n, dtype=complex)
    v = _complex_gaussian(rng, n)
    return v * (norm / np.linalg.norm(v))


def sample_rician(geometry, params: ChannelParams, pl: PathLossParams, p, seed, p_hat=None):
    """Draw one channel realization for a user at ``p``.

    ``p_hat`` defaults to ``p`` (no location error).
    """
    rng = np.random.default_rng(seed)
    lam = params.wavelength
    H = build_bs_ris_channel(geometry, pl, lam)
    h_los = build_ris_ue_los(geometry, pl, lam, p)
    h_hat = reconstruct_ris_ue_los(geometry, pl, lam, p if p_hat is None else p_hat)
    h_nlos = fixed_norm_draw(rng, geometry.N, params.delta_ru_nlos)
    h_true = params.los_weight * h_los + params.nlos_weight * h_nlos
    h_bu = fixed_norm_draw(rng, geometry.M, params.delta_bu)
    return ChannelSet(H_br=H, h_ru_los=h_los, h_ru_hat=h_hat, h_ru_true=h_true, h_bu=h_bu, h_ru_nlos=h_nlos)


def error_decomposition(params: ChannelParams, channels: ChannelSet):
    """Split ``h_true - h_hat`` into its line-of-sight and scattered parts.

    Returns ``(dh_los, dh_nlos)`` with ``dh_los = w_los h_los - h_hat`` and
    ``dh_nlos = w_nlos h_nlos``; their sum is the total channel error.
    """
    dh_los = params.los_weight * channels.h_ru_los - channels.h_ru_hat
    nlos = channels.h_ru_nlos if channels.h_ru_nlos is not None else np.zeros_like(dh_los)
    return dh_los, params.nlos_weight * nlos
