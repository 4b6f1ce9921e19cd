"""Small input checks shared across modules."""

import numpy as np


def check_positive(value, name, allow_zero=False):
    v = float(value)
    ok = v >= 0 if allow_zero else v > 0
    if not (np.isfinite(v) and ok):
        bound = "nonnegative" if allow_zero else "positive"
        raise ValueError(f"{name} must be finite and {bound}, got {value!r}")
    return v


def check_vec3(p):
    a = np.asarray(p, dtype=float).reshape(-1)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ValueError(f"expected a finite 3-vector, got {p!r}")
    return a


def check_complex_vector(v, name, n=None):
    a = np.asarray(v, dtype=complex)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {a.shape}")
    if n is not None and a.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def check_complex_matrix(A, name, shape=None):
    a = np.asarray(A, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {a.shape}")
    if shape is not None and a.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def check_hermitian(A, name, tol=1e-10):
    a = check_complex_matrix(A, name)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square")
    if np.abs(a - a.conj().T).max(initial=0.0) > tol * (1.0 + np.abs(a).max(initial=0.0)):
        raise ValueError(f"{name} is not Hermitian")
    return 0.5 * (a + a.conj().T)


def check_channel_pair(H_br, h_ru_hat):
    """Validate ``(H, h)`` and return them as complex arrays."""
    H = check_complex_matrix(H_br, "H_br")
    h = check_complex_vector(h_ru_hat, "h_ru_hat", H.shape[0])
    return H, h
