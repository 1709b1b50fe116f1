"""Far-field patterns on a spherical grid and the radiating-structure model.

A radiating structure maps incident port waves ``a`` to reflected waves
``S_RR a`` and to a far-field power-wave pattern ``sum_m a_m e_m(theta, phi)``,
where each ``e_m`` is a two-component (theta-hat, phi-hat) complex field
normalised so that ``|e|^2`` integrates to watts over the sphere.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .netcalc import WaveContext

PASSIVITY_TOL = 1e-6
SPECTRAL_HEADROOM = 1e-6


class PassivityError(ValueError):
    """Ingested radiating-structure data radiates more than it accepts."""


class GridMismatchError(ValueError):
    pass


def _polar_weights(theta: np.ndarray) -> np.ndarray:
    """Product-integration weights for int f(theta) sin(theta) dtheta.

    ``f`` is interpolated piecewise-quadratically over panels of two
    intervals (a trailing odd interval falls back to linear), and each
    Lagrange basis is integrated against sin(theta) with Gauss-Legendre.
    """
    n = theta.size
    w = np.zeros(n)
    gx, gw = np.polynomial.legendre.leggauss(10)

    def add_panel(idx):
        nodes = theta[idx]
        lo, hi = nodes[0], nodes[-1]
        x = 0.5 * (hi - lo) * gx + 0.5 * (hi + lo)
        sw = 0.5 * (hi - lo) * gw * np.sin(x)
        for j, k in enumerate(idx):
            others = np.delete(nodes, j)
            basis = np.prod([(x - o) / (nodes[j] - o) for o in others], axis=0)
            w[k] += np.sum(sw * basis)

    k = 0
    while k + 2 < n:
        add_panel([k, k + 1, k + 2])
        k += 2
    if k + 1 < n:
        add_panel([k, k + 1])
    return w


@dataclass(frozen=True, eq=False)
class AngularGrid:
    """Regular (theta, phi) grid covering theta in [0, theta_max], phi in [0, 2 pi).

    Nodes are flattened theta-major: node ``i * nphi + j`` is ``(theta[i], phi[j])``.
    """

    theta: np.ndarray
    phi: np.ndarray

    @classmethod
    def regular(cls, step_deg: float = 1.0, theta_max_deg: float = 180.0) -> "AngularGrid":
        ntheta = int(round(theta_max_deg / step_deg)) + 1
        nphi = int(round(360.0 / step_deg))
        if not np.isclose((ntheta - 1) * step_deg, theta_max_deg) or not np.isclose(nphi * step_deg, 360.0):
            raise ValueError("step must divide both theta_max and 360 degrees")
        theta = np.deg2rad(np.linspace(0.0, theta_max_deg, ntheta))
        phi = np.deg2rad(np.arange(nphi) * step_deg)
        return cls(theta, phi)

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))

    @property
    def shape(self) -> tuple[int, int]:
        return self.theta.size, self.phi.size

    @property
    def size(self) -> int:
        return self.theta.size * self.phi.size

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights in steradians, flattened like the nodes."""
        dphi = 2 * np.pi / self.phi.size
        return np.repeat(_polar_weights(self.theta) * dphi, self.phi.size)

    @cached_property
    def node_theta(self) -> np.ndarray:
        return np.repeat(self.theta, self.phi.size)

    @cached_property
    def node_phi(self) -> np.ndarray:
        return np.tile(self.phi, self.theta.size)

    def unit_vectors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(r-hat, theta-hat, phi-hat) at every node, each (nodes, 3)."""
        t, p = self.node_theta, self.node_phi
        st, ct, sp, cp = np.sin(t), np.cos(t), np.sin(p), np.cos(p)
        r = np.stack([st * cp, st * sp, ct], axis=1)
        th = np.stack([ct * cp, ct * sp, -st], axis=1)
        ph = np.stack([-sp, cp, np.zeros_like(p)], axis=1)
        return r, th, ph

    def nearest(self, theta: float, phi: float) -> tuple[int, float]:
        """Index of the node closest to a direction and the great-circle snap distance (rad)."""
        u = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
        r, _, _ = self.unit_vectors()
        cosang = np.clip(r @ u, -1.0, 1.0)
        # ties (poles) resolved to the lowest index
        idx = int(np.argmax(cosang))
        return idx, float(np.arccos(cosang[idx]))

    def hemisphere(self, theta_max: float = np.pi / 2) -> np.ndarray:
        """Indices of nodes with theta <= theta_max (front of the array)."""
        return np.flatnonzero(self.node_theta <= theta_max + 1e-12)

    def same_as(self, other: "AngularGrid") -> bool:
        return self is other or (
            self.shape == other.shape
            and np.allclose(self.theta, other.theta, atol=1e-12)
            and np.allclose(self.phi, other.phi, atol=1e-12)
        )


@dataclass(frozen=True, eq=False)
class FarFieldPattern:
    """Complex (theta-hat, phi-hat) power-wave pattern, shape (nodes, 2)."""

    values: np.ndarray
    grid: AngularGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.size, 2):
            raise ValueError(f"pattern shape {v.shape} does not match grid ({self.grid.size}, 2)")
        if not np.all(np.isfinite(v)):
            raise ValueError("pattern has non-finite entries")
        object.__setattr__(self, "values", v)

    def intensity(self) -> np.ndarray:
        return np.sum(np.abs(self.values) ** 2, axis=1)

    def norm2(self) -> float:
        return float(np.real(l2_inner(self, self)))


def l2_inner(p: FarFieldPattern, q: FarFieldPattern) -> complex:
    """L2 inner product <p, q> = integral of p^H q over the sphere."""
    if not p.grid.same_as(q.grid):
        raise GridMismatchError("patterns live on different grids")
    pointwise = np.sum(np.conj(p.values) * q.values, axis=1)
    return complex(np.sum(p.grid.weights * pointwise))


def gram_matrix(fields: np.ndarray, grid: AngularGrid) -> np.ndarray:
    """Gram matrix of column patterns; ``fields`` has shape (nodes, 2, M)."""
    sw = np.sqrt(grid.weights)[:, None, None]
    f = (sw * fields).reshape(-1, fields.shape[-1])
    g = f.conj().T @ f
    return 0.5 * (g + g.conj().T)


@dataclass(frozen=True, eq=False)
class RadiatingStructure:
    """Coupling matrix ``s_rr`` plus one far-field pattern per port.

    ``fields[node, pol, m]`` is pattern ``m``; all ports share one real
    reference impedance ``z_ref``.
    """

    s_rr: np.ndarray
    fields: np.ndarray
    grid: AngularGrid
    ctx: WaveContext
    z_ref: float = 50.0

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.s_rr, dtype=complex))
        f = np.asarray(self.fields, dtype=complex)
        m = s.shape[0]
        if s.shape != (m, m):
            raise ValueError("S_RR must be square")
        if f.shape != (self.grid.size, 2, m):
            raise ValueError(f"fields shape {f.shape} != ({self.grid.size}, 2, {m})")
        object.__setattr__(self, "s_rr", s)
        object.__setattr__(self, "fields", f)

    @property
    def nports(self) -> int:
        return self.s_rr.shape[0]

    @property
    def patterns(self) -> list[FarFieldPattern]:
        return [FarFieldPattern(self.fields[:, :, m], self.grid) for m in range(self.nports)]

    @cached_property
    def gram(self) -> np.ndarray:
        return gram_matrix(self.fields, self.grid)

    def passivity_margin(self) -> float:
        """Largest eigenvalue of Gram - (I - S_RR^H S_RR); <= 0 for a passive structure."""
        loss_free = np.eye(self.nports) - self.s_rr.conj().T @ self.s_rr
        return float(np.linalg.eigvalsh(self.gram - loss_free)[-1])

    def check_passive(self, tol: float = PASSIVITY_TOL) -> None:
        margin = self.passivity_margin()
        if margin > tol:
            raise PassivityError(
                f"radiating structure radiates more than it accepts (margin {margin:.3g} > {tol:g})"
            )

    def far_field(self, a_r) -> FarFieldPattern:
        return FarFieldPattern(self.fields @ np.asarray(a_r, dtype=complex), self.grid)


def gram(structure: RadiatingStructure) -> np.ndarray:
    return structure.gram


_POLARIZATIONS = ("x", "y", "theta", "phi")


def element_pattern(grid: AngularGrid, exponent: float = 1.0, polarization: str = "x") -> np.ndarray:
    """Front-hemisphere ``cos^q(theta)`` element field, shape (nodes, 2)."""
    if polarization not in _POLARIZATIONS:
        raise ValueError(f"polarization must be one of {_POLARIZATIONS}")
    if exponent < 0:
        raise ValueError("pattern exponent must be >= 0")
    t, p = grid.node_theta, grid.node_phi
    front = np.cos(t) >= 0
    amp = np.where(front, np.abs(np.cos(t)) ** exponent, 0.0)
    if polarization == "x":
        pol = np.stack([np.cos(t) * np.cos(p), -np.sin(p)], axis=1)
    elif polarization == "y":
        pol = np.stack([np.cos(t) * np.sin(p), np.cos(p)], axis=1)
    elif polarization == "theta":
        pol = np.stack([np.ones_like(t), np.zeros_like(t)], axis=1)
    else:
        pol = np.stack([np.zeros_like(t), np.ones_like(t)], axis=1)
    return amp[:, None] * pol


def array_positions(rows: int, cols: int, spacing: float, wavelength: float) -> np.ndarray:
    """Element centres (M, 3) in the z = 0 plane, row-major, centred on the origin."""
    d = spacing * wavelength
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    x = (c.ravel() - (cols - 1) / 2) * d
    y = (r.ravel() - (rows - 1) / 2) * d
    return np.stack([x, y, np.zeros_like(x)], axis=1)


def synthesize_array(
    rows: int,
    cols: int,
    spacing: float = 0.25,
    *,
    exponent: float = 1.0,
    polarization: str = "x",
    efficiency: float = 1.0,
    ctx: WaveContext | None = None,
    grid: AngularGrid | None = None,
) -> RadiatingStructure:
    """Synthetic planar array that is lossless (efficiency 1) by construction.

    Raw element patterns are phased copies of one ``cos^q`` element; they are
    scaled so their Gram matrix ``P`` satisfies ``P <= (1 - 1e-6) I`` and the
    coupling is set to the Hermitian root ``S_RR = (I - P)^(1/2)``, so that
    ``Gram = efficiency * (I - S_RR^H S_RR)`` holds exactly up to quadrature.
    """
    ctx = ctx or WaveContext(12e9)
    grid = grid or AngularGrid.regular(1.0)
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if not 0 < efficiency <= 1:
        raise ValueError("efficiency must lie in (0, 1]")
    if abs(np.sum(grid.weights) - 4 * np.pi) > 1e-4 * 4 * np.pi:
        raise ValueError("grid too coarse or not a full sphere")
    pos = array_positions(rows, cols, spacing, ctx.wavelength)
    elem = element_pattern(grid, exponent, polarization)
    r_hat, _, _ = grid.unit_vectors()
    steer = np.exp(1j * ctx.wavenumber * (r_hat @ pos.T))  # (nodes, M)
    fields = elem[:, :, None] * steer[:, None, :]

    p_raw = gram_matrix(fields, grid)
    lam = np.linalg.eigvalsh(p_raw)
    if lam[0] < 1e-12 * lam[-1]:
        warnings.warn("synthetic array Gram matrix is rank deficient (coincident elements?)",
                      RuntimeWarning, stacklevel=2)
    fields *= np.sqrt((1 - SPECTRAL_HEADROOM) / lam[-1])
    p = gram_matrix(fields, grid)
    s_rr = _hermitian_psd_sqrt(np.eye(p.shape[0]) - p)
    fields *= np.sqrt(efficiency)
    return RadiatingStructure(s_rr, fields, grid, ctx, ctx.r0)


def _hermitian_psd_sqrt(h: np.ndarray) -> np.ndarray:
    lam, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.sqrt(np.clip(lam, 0.0, None))) @ v.conj().T
