"""Parametric S-parameter generators for lines, junctions, switches and PA frontends."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .netcalc import MultiportNetwork, WaveContext, classify

SWITCH_PASSIVITY_TOL = 1e-6


class UnphysicalSwitchError(ValueError):
    pass


class SwitchState(str, Enum):
    ON = "on"
    OFF = "off"


def transmission_line(zc: float, length: float, ctx: WaveContext | None = None) -> MultiportNetwork:
    """Ideal lossless line; ``length`` in wavelengths. Reference impedance is ``zc``."""
    if not zc > 0:
        raise ValueError("characteristic impedance must be positive")
    if length < 0:
        raise ValueError("line length must be non-negative")
    t = np.exp(-2j * np.pi * length)
    return MultiportNetwork([[0, t], [t, 0]], zc, ctx=ctx)


def junction(port_impedances) -> MultiportNetwork:
    """Ideal parallel node (all port voltages equal, currents sum to zero)."""
    z = np.asarray(port_impedances, dtype=float)
    if z.size < 2:
        raise ValueError("a junction needs at least two ports")
    if np.any(z <= 0):
        raise ValueError("junction port impedances must be positive")
    y = 1.0 / z
    root = np.sqrt(y)
    s = 2.0 * np.outer(root, root) / y.sum() - np.eye(z.size)
    return MultiportNetwork(s, z)


@dataclass(frozen=True)
class SwitchModel:
    """SPST switch, either parametric (dB figures) or two measured 2-port matrices.

    Infinite isolation/return loss are allowed and mean perfect behaviour.
    ``z_ref`` is the reference impedance the figures (or matrices) refer to.
    """

    insertion_loss: float = 0.8
    isolation: float = 20.0
    return_loss_on: float = 15.0
    return_loss_off: float = 0.5
    transmission_phase: float = 0.0
    z_ref: float = 50.0
    s_on: np.ndarray | None = None
    s_off: np.ndarray | None = None

    def __post_init__(self):
        if self.s_on is not None or self.s_off is not None:
            if self.s_on is None or self.s_off is None:
                raise ValueError("measured switch needs both on and off matrices")
            for name in ("s_on", "s_off"):
                m = np.array(getattr(self, name), dtype=complex)
                if m.shape != (2, 2):
                    raise ValueError(f"{name} must be a 2x2 matrix")
                object.__setattr__(self, name, m)
        elif self.insertion_loss < 0:
            raise ValueError("insertion loss must be >= 0 dB")
        for name in ("on", "off"):
            c = classify(self.matrix(name))
            if c.passivity_margin > SWITCH_PASSIVITY_TOL:
                raise UnphysicalSwitchError(
                    f"{name}-state matrix is active (passivity margin {c.passivity_margin:.3g})"
                )

    @classmethod
    def ideal(cls) -> "SwitchModel":
        return cls(insertion_loss=0.0, isolation=np.inf, return_loss_on=np.inf,
                   return_loss_off=0.0, transmission_phase=0.0)

    @classmethod
    def from_networks(cls, on: MultiportNetwork, off: MultiportNetwork) -> "SwitchModel":
        if not np.allclose(on.z_ref, on.z_ref[0]) or not np.allclose(off.z_ref, on.z_ref[0]):
            raise ValueError("switch state files must share one real reference impedance")
        return cls(z_ref=float(on.z_ref[0].real), s_on=on.s, s_off=off.s)

    @property
    def measured(self) -> bool:
        return self.s_on is not None

    def matrix(self, state) -> np.ndarray:
        state = SwitchState(state)
        if self.measured:
            return self.s_on if state is SwitchState.ON else self.s_off
        phase = np.exp(1j * self.transmission_phase)
        if state is SwitchState.ON:
            t = 10 ** (-self.insertion_loss / 20)
            r = 10 ** (-self.return_loss_on / 20)
            # reflection in quadrature with transmission: the lossless-compatible choice
            r_c, t_c = 1j * r * phase, t * phase
        else:
            t = 10 ** (-self.isolation / 20)
            r = 10 ** (-self.return_loss_off / 20)
            r_c, t_c = r * phase, 1j * t * phase
        # singular values of [[r, t], [t, r]] are |r +- t|; enforce <= 1
        excess = abs(r_c) ** 2 + abs(t_c) ** 2
        if excess > 1:
            r_c *= np.sqrt(max(1 - abs(t_c) ** 2, 0.0)) / abs(r_c)
        return np.array([[r_c, t_c], [t_c, r_c]])


def switch_two_port(model: SwitchModel, state, ctx: WaveContext | None = None) -> MultiportNetwork:
    return MultiportNetwork(model.matrix(state), model.z_ref, ctx=ctx)


@dataclass(frozen=True)
class FrontendMatrices:
    k_vtx: np.ndarray
    s_rf: np.ndarray


def frontend_matrices(z_tx, r0: float = 50.0) -> FrontendMatrices:
    """Source-to-wave gain ``K = (Z_Tx + R0)^-1 sqrt(R0)`` and reflection ``S_RF``."""
    z = np.asarray(z_tx, dtype=complex)
    if z.ndim == 2:
        if np.count_nonzero(z - np.diag(np.diag(z))):
            raise ValueError("Z_Tx must be diagonal")
        z = np.diag(z)
    z = np.atleast_1d(z)
    if np.any(z.real <= 0):
        raise ValueError("PA output impedances need a positive real part")
    inv = 1.0 / (z + r0)
    return FrontendMatrices(np.diag(inv * np.sqrt(r0)), np.diag(inv * (z - r0)))
