"""Single-frequency scattering-parameter algebra on power waves.

Waves follow the Kurokawa power-wave convention for a port with reference
impedance ``Zr = R + jX``::

    a = (v + Zr i) / (2 sqrt(R))
    b = (v - conj(Zr) i) / (2 sqrt(R))

which reduces to the usual travelling-wave normalisation for real ``Zr``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import constants

CLASSIFY_TOL = 1e-9
MAX_CONDITION = 1e12


class NetworkError(ValueError):
    """Base class for errors raised by network algebra."""


class DegenerateNetworkError(NetworkError):
    """A conversion matrix is singular."""


class IllConditionedError(NetworkError):
    """An interconnection reduction is numerically singular."""


@dataclass(frozen=True)
class WaveContext:
    """Frequency-dependent free-space constants plus the model reference resistance."""

    frequency: float
    r0: float = 50.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if not self.r0 > 0:
            raise ValueError("reference resistance must be positive")

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi * self.frequency * np.sqrt(constants.mu_0 * constants.epsilon_0)

    @property
    def wavelength(self) -> float:
        return 1.0 / (np.sqrt(constants.epsilon_0 * constants.mu_0) * self.frequency)

    @property
    def z0(self) -> float:
        """Free-space wave impedance."""
        return float(np.sqrt(constants.mu_0 / constants.epsilon_0))


@dataclass(frozen=True)
class PortSpec:
    z_ref: complex = 50.0
    label: str = ""

    def __post_init__(self):
        if not np.real(self.z_ref) > 0:
            raise ValueError(f"port {self.label!r}: reference impedance needs a positive real part")


@dataclass(frozen=True, eq=False)
class MultiportNetwork:
    """Scattering matrix with per-port reference impedances.

    ``z_ref`` may be a scalar (broadcast to every port) or one value per port.
    """

    s: np.ndarray
    z_ref: np.ndarray = field(default=50.0)
    labels: tuple[str, ...] | None = None
    ctx: WaveContext | None = None

    def __post_init__(self):
        s = np.array(self.s, dtype=complex)
        if s.ndim == 0:
            s = s.reshape(1, 1)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
            raise ValueError(f"S must be a non-empty square matrix, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("S contains non-finite entries")
        n = s.shape[0]
        z = np.broadcast_to(np.asarray(self.z_ref, dtype=complex), (n,)).copy()
        if np.any(z.real <= 0):
            raise ValueError("reference impedances need a positive real part")
        labels = self.labels
        if labels is None:
            labels = tuple(str(k) for k in range(n))
        elif len(labels) != n:
            raise ValueError("one label per port required")
        s.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "z_ref", z)
        object.__setattr__(self, "labels", tuple(labels))

    @property
    def nports(self) -> int:
        return self.s.shape[0]

    @property
    def ports(self) -> tuple[PortSpec, ...]:
        return tuple(PortSpec(complex(z), lab) for z, lab in zip(self.z_ref, self.labels))

    def __repr__(self):
        return f"MultiportNetwork(nports={self.nports}, z_ref={np.round(self.z_ref, 6).tolist()})"


def _ref_array(z_ref, n: int) -> np.ndarray:
    z = np.broadcast_to(np.asarray(z_ref, dtype=complex), (n,)).copy()
    if np.any(z.real <= 0):
        raise ValueError("reference impedances need a positive real part")
    return z


def _wave_transform(z_ref: np.ndarray) -> np.ndarray:
    """Per-port 2x2 maps (v, i) -> (a, b), shape (n, 2, 2)."""
    k = 1.0 / (2.0 * np.sqrt(z_ref.real))
    t = np.empty((z_ref.size, 2, 2), dtype=complex)
    t[:, 0, 0] = k
    t[:, 0, 1] = k * z_ref
    t[:, 1, 0] = k
    t[:, 1, 1] = -k * np.conj(z_ref)
    return t


def _checked_solve(lhs: np.ndarray, rhs: np.ndarray, what: str, exc=DegenerateNetworkError):
    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise exc(f"{what}: condition number {cond:.3g} exceeds {MAX_CONDITION:.0e}")
    return np.linalg.solve(lhs, rhs)


def z_to_s(z: np.ndarray, z_ref=50.0, ctx: WaveContext | None = None) -> MultiportNetwork:
    """Impedance matrix to a scattering network at the given references."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    n = z.shape[0]
    g = _ref_array(z_ref, n)
    f = 1.0 / (2.0 * np.sqrt(g.real))
    # S = F (Z - G*) (Z + G)^-1 F^-1, solved from the right
    x = _checked_solve((z + np.diag(g)).T, (z - np.diag(np.conj(g))).T, "degenerate network").T
    s = f[:, None] * x / f[None, :]
    return MultiportNetwork(s, g, ctx=ctx)


convert_z_s = z_to_s


def s_to_z(net: MultiportNetwork) -> np.ndarray:
    g = net.z_ref
    f = 1.0 / (2.0 * np.sqrt(g.real))
    n = net.nports
    rhs = net.s * g[None, :] + np.diag(np.conj(g))
    x = _checked_solve(np.eye(n) - net.s, rhs, "degenerate network")
    return x * f[None, :] / f[:, None]


def renormalize(net: MultiportNetwork, new_ref) -> MultiportNetwork:
    """Re-express ``net`` with new port reference impedances.

    Works directly on waves, so networks without an impedance matrix
    (opens, ideal switches) renormalise fine.
    """
    new = _ref_array(new_ref, net.nports)
    if np.array_equal(new, net.z_ref):
        return net
    # per-port (a, b) -> (a', b') through (v, i)
    t_new = _wave_transform(new)
    t_old_inv = np.linalg.inv(_wave_transform(net.z_ref))
    m = t_new @ t_old_inv
    alpha, beta, gamma, delta = m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], m[:, 1, 1]
    lhs = np.diag(alpha) + beta[:, None] * net.s
    rhs = np.diag(gamma) + delta[:, None] * net.s
    s_new = _checked_solve(lhs.T, rhs.T, "degenerate network").T
    return MultiportNetwork(s_new, new, ctx=net.ctx)


def stack(*nets: MultiportNetwork) -> MultiportNetwork:
    """Block-diagonal combination of unconnected networks; ports keep their order."""
    s = _block_diag([n.s for n in nets])
    z = np.concatenate([n.z_ref for n in nets])
    labels = tuple(lab for n in nets for lab in n.labels)
    ctx = next((n.ctx for n in nets if n.ctx is not None), None)
    return MultiportNetwork(s, z, labels if len(set(labels)) == len(labels) else None, ctx)


def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    k = 0
    for b in blocks:
        m = b.shape[0]
        out[k:k + m, k:k + m] = b
        k += m
    return out


def interconnect(net: MultiportNetwork, pairs: Iterable[tuple[int, int]]) -> MultiportNetwork:
    """Join port pairs of ``net`` and return the reduced network of the free ports.

    Joining ports p and q imposes ``a_p = b_q`` and ``a_q = b_p``; the
    references must satisfy ``z_p == conj(z_q)`` (equal, for real references).
    """
    pairs = [(int(p), int(q)) for p, q in pairs]
    n = net.nports
    used: list[int] = []
    for p, q in pairs:
        for k in (p, q):
            if not 0 <= k < n:
                raise IndexError(f"port {k} out of range for {n}-port")
        if p == q:
            raise ValueError(f"cannot join port {p} to itself")
        used += [p, q]
        if not np.isclose(net.z_ref[p], np.conj(net.z_ref[q]), rtol=1e-12, atol=0):
            raise ValueError(
                f"ports {p} and {q} have mismatched references "
                f"{net.z_ref[p]} / {net.z_ref[q]}; renormalize first"
            )
    if len(set(used)) != len(used):
        raise ValueError("a port appears in more than one pair")
    if not pairs:
        return net
    internal = np.array(used)
    external = np.array([k for k in range(n) if k not in set(used)])
    if external.size == 0:
        raise ValueError("interconnection leaves no free port")
    m = internal.size
    perm = np.zeros((m, m))
    for j in range(0, m, 2):
        perm[j, j + 1] = perm[j + 1, j] = 1.0
    s = net.s
    s_ee = s[np.ix_(external, external)]
    s_ei = s[np.ix_(external, internal)]
    s_ie = s[np.ix_(internal, external)]
    s_ii = s[np.ix_(internal, internal)]
    # b_i = (I - S_ii P)^-1 S_ie a_e
    b_i = _checked_solve(np.eye(m) - s_ii @ perm, s_ie, "ill-conditioned interconnect",
                         IllConditionedError)
    s_new = s_ee + s_ei @ (perm @ b_i)
    labels = tuple(net.labels[k] for k in external)
    return MultiportNetwork(s_new, net.z_ref[external], labels, net.ctx)


def connect(a: MultiportNetwork, port_a: int, b: MultiportNetwork, port_b: int) -> MultiportNetwork:
    """Wire ``port_a`` of ``a`` to ``port_b`` of ``b``.

    Result ports: the free ports of ``a`` in order, then the free ports of ``b``.
    """
    return interconnect(stack(a, b), [(port_a, a.nports + port_b)])


def terminate(net: MultiportNetwork, port: int, reflection: complex) -> MultiportNetwork:
    """Load ``port`` with a one-port of the given reflection coefficient."""
    if not 0 <= port < net.nports:
        raise IndexError(f"port {port} out of range for {net.nports}-port")
    if abs(reflection) > 1 + 1e-9:
        raise ValueError(f"|reflection| = {abs(reflection):.6g} > 1 is not a passive termination")
    load = MultiportNetwork([[reflection]], np.conj(net.z_ref[port]), ctx=net.ctx)
    return connect(net, port, load, 0)


def reorder(net: MultiportNetwork, order: Sequence[int]) -> MultiportNetwork:
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(net.nports)):
        raise ValueError("order must be a permutation of the ports")
    return MultiportNetwork(net.s[np.ix_(order, order)], net.z_ref[order],
                            tuple(net.labels[k] for k in order), net.ctx)


@dataclass(frozen=True)
class Classification:
    passive: bool
    lossless: bool
    reciprocal: bool
    passivity_margin: float  # largest eig(S^H S) - 1; <= 0 when passive
    lossless_margin: float  # ||S^H S - I||_2
    reciprocity_margin: float  # ||S - S^T||_2


def classify(net: MultiportNetwork | np.ndarray, tol: float = CLASSIFY_TOL) -> Classification:
    s = net.s if isinstance(net, MultiportNetwork) else np.atleast_2d(np.asarray(net, dtype=complex))
    gram = s.conj().T @ s
    lam = np.linalg.eigvalsh(gram)
    p_margin = float(lam[-1] - 1.0)
    l_margin = float(np.linalg.norm(gram - np.eye(s.shape[0]), 2))
    r_margin = float(np.linalg.norm(s - s.T, 2))
    return Classification(
        passive=p_margin <= tol,
        lossless=l_margin <= tol,
        reciprocal=r_margin <= tol,
        passivity_margin=p_margin,
        lossless_margin=l_margin,
        reciprocity_margin=r_margin,
    )
