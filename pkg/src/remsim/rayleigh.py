"""Generalized Rayleigh-quotient maximisation ``max x^H A x / x^H B x``.

Everywhere in this package ``A = 4 pi F^H F`` with ``F`` a 2 x n far-field
factor, so ``rank(A) <= 2`` and the dominant eigenpair of
``C = B^{-1/2} A B^{-1/2}`` follows from the 2 x 2 Gram matrix of
``E = F B^{-1/2}`` instead of an n x n eigensolve.
"""

from __future__ import annotations

import numpy as np

EIG_FLOOR = 1e-14
PD_MARGIN = 1e-12
DEGENERATE_RTOL = 1e-12


class NotPositiveDefiniteError(ValueError):
    """B is not positive definite: the model is active or internally inconsistent."""


def inv_sqrt_pd(b: np.ndarray) -> np.ndarray:
    """Positive-definite square root of ``b^-1`` for Hermitian ``b``."""
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    b = 0.5 * (b + b.conj().T)
    lam, v = np.linalg.eigh(b)
    scale = max(abs(lam[-1]), abs(lam[0]))
    if scale == 0 or lam[0] <= PD_MARGIN * scale:
        raise NotPositiveDefiniteError(
            f"active or inconsistent model: B has eigenvalue {lam[0]:.3g} (largest {lam[-1]:.3g})"
        )
    lam = np.maximum(lam, EIG_FLOOR * lam[-1])
    return (v / np.sqrt(lam)) @ v.conj().T


def _normalize_phase(x: np.ndarray) -> np.ndarray:
    """Unit-norm rows, first non-negligible entry made real positive."""
    x = np.asarray(x, dtype=complex)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    x = np.divide(x, norm, out=np.zeros_like(x), where=norm > 0)
    mag = np.abs(x)
    lead = np.argmax(mag > 1e-9 * mag.max(axis=-1, keepdims=True), axis=-1)
    ref = np.take_along_axis(x, lead[..., None], axis=-1)
    phase = np.divide(ref, np.abs(ref), out=np.ones_like(ref), where=np.abs(ref) > 0)
    return x * np.conj(phase)


def dominant_pair(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Largest squared singular value and right singular vector of stacked ``e``.

    ``e`` has shape (..., 2, n). Returns ``(sigma_max^2, c)`` with ``c`` of
    shape (..., n), unit norm and phase-normalised. A degenerate top pair is
    resolved towards the vector with the largest leading component.
    """
    e = np.asarray(e, dtype=complex)
    h = e @ np.conj(np.swapaxes(e, -1, -2))  # (..., 2, 2)
    p = h[..., 0, 0].real
    r = h[..., 1, 1].real
    q = h[..., 0, 1]
    half = 0.5 * (p - r)
    root = np.sqrt(half**2 + np.abs(q) ** 2)
    lam_max = 0.5 * (p + r) + root
    lam_min = 0.5 * (p + r) - root

    # eigenvector of h for lam_max, picking the better-conditioned formula
    u1 = np.stack([q, lam_max - p], axis=-1)
    u2 = np.stack([lam_max - r, np.conj(q)], axis=-1)
    pick = np.linalg.norm(u1, axis=-1) >= np.linalg.norm(u2, axis=-1)
    u = np.where(pick[..., None], u1, u2)
    un = np.linalg.norm(u, axis=-1, keepdims=True)
    diag_pick = np.where((p >= r)[..., None], np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    u = np.where(un > 0, u / np.where(un > 0, un, 1), diag_pick)

    c = np.einsum("...k,...kn->...n", u, np.conj(e))  # E^H u
    degenerate = lam_max - lam_min <= DEGENERATE_RTOL * np.maximum(lam_max, 1e-300)
    if np.any(degenerate):
        c = np.array(c, copy=True)
        idx = np.flatnonzero(np.broadcast_to(degenerate, lam_max.shape).ravel())
        flat_c = c.reshape(-1, c.shape[-1])
        flat_e = e.reshape(-1, *e.shape[-2:])
        for k in idx:
            flat_c[k] = _degenerate_choice(flat_e[k])
        c = flat_c.reshape(c.shape)
    return np.maximum(lam_max, 0.0), _normalize_phase(c)


def _degenerate_choice(e: np.ndarray) -> np.ndarray:
    """Within the row space of ``e``, the unit vector with the largest leading entry."""
    _, s, vh = np.linalg.svd(e, full_matrices=False)
    keep = s > 1e-12 * s.max() if s.size and s.max() > 0 else np.zeros(s.size, bool)
    basis = vh[keep].conj().T if np.any(keep) else None
    n = e.shape[-1]
    if basis is None:
        out = np.zeros(n, dtype=complex)
        out[0] = 1.0
        return out
    proj = basis @ basis.conj().T
    for k in range(n):
        col = proj[:, k]
        if np.linalg.norm(col) > 1e-9:
            return col / np.linalg.norm(col)
    return basis[:, 0]


def maximize_factored(f: np.ndarray, b_inv_sqrt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximise ``4 pi |F x|^2 / x^H B x`` given ``B^{-1/2}``.

    ``f`` is (..., 2, n). Returns ``(gain, x_hat)`` with ``x_hat`` scaled so
    that ``x_hat^H B x_hat = 1``.
    """
    e = np.asarray(f, dtype=complex) @ b_inv_sqrt
    lam, c = dominant_pair(e)
    x = c @ b_inv_sqrt.T
    return 4 * np.pi * lam, x


def maximize(f: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Single-direction convenience wrapper around :func:`maximize_factored`."""
    g, x = maximize_factored(np.asarray(f)[None], inv_sqrt_pd(b))
    return float(g[0]), x[0]


def maximize_dense(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Reference route: full Hermitian eigensolve of ``B^{-1/2} A B^{-1/2}``."""
    s = inv_sqrt_pd(b)
    c = s @ a @ s
    lam, v = np.linalg.eigh(0.5 * (c + c.conj().T))
    x = s @ v[:, -1]
    return float(lam[-1]), x


def quotient(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Rayleigh quotient for one or many vectors (rows of ``x``)."""
    x = np.atleast_2d(x)
    num = np.einsum("ki,ij,kj->k", x.conj(), a, x).real
    den = np.einsum("ki,ij,kj->k", x.conj(), b, x).real
    return num / den
