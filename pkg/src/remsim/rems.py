"""Transmit-side system model: PA frontend, tuning network and radiating structure.

Signal flow (all waves normalised to the model reference resistance R0)::

    a_T = K v_Tx + S_RF b_T                     (frontend)
    [b_T; a_R] = S_T [a_T; b_R]                  (tuning network)
    b_R = S_RR a_R,  a_F = S_FR a_R              (radiating structure)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from . import rayleigh
from .components import frontend_matrices
from .netcalc import MAX_CONDITION, MultiportNetwork, WaveContext, classify
from .radiating import FarFieldPattern, RadiatingStructure

POWER_FLOOR = 1e-18


class ResonantModelError(ValueError):
    """A loop matrix of the signal-flow graph is (numerically) singular."""


class DegenerateExcitationError(ValueError):
    """The reference power of a gain is not positive."""


class Level(str, Enum):
    REMS = "rems"
    TUNING = "tuning"
    RADIATING = "radiating"


@dataclass(frozen=True, eq=False)
class RfFrontend:
    """Thevenin PA models: diagonal output impedances and (optionally) source voltages."""

    z_tx: np.ndarray
    v_tx: np.ndarray | None = None

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z_tx, dtype=complex))
        if z.ndim == 2:
            z = np.diag(z)
        if np.any(z.real <= 0):
            raise ValueError("PA output impedances need a positive real part")
        object.__setattr__(self, "z_tx", z)
        if self.v_tx is not None:
            v = np.atleast_1d(np.asarray(self.v_tx, dtype=complex))
            if v.shape != z.shape:
                raise ValueError("v_tx and z_tx sizes differ")
            object.__setattr__(self, "v_tx", v)

    @property
    def n(self) -> int:
        return self.z_tx.size


@dataclass(frozen=True, eq=False)
class TuningNetwork:
    """(N + M)-port tuning network; the first ``n_inner`` ports face the PAs."""

    s: np.ndarray
    n_inner: int
    passivity_margin: float = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=complex)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("S_T must be square")
        if not 0 < self.n_inner < s.shape[0]:
            raise ValueError("need at least one inner and one outer port")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "passivity_margin", classify(s).passivity_margin)

    @classmethod
    def from_network(cls, net: MultiportNetwork, n_inner: int, r0: float) -> "TuningNetwork":
        if not np.allclose(net.z_ref, r0, rtol=1e-12, atol=0):
            raise ValueError("tuning network ports must all be referenced to R0; renormalize first")
        return cls(net.s, n_inner)

    @classmethod
    def feedthrough(cls, n: int) -> "TuningNetwork":
        eye = np.eye(n)
        zero = np.zeros((n, n))
        return cls(np.block([[zero, eye], [eye, zero]]), n)

    @property
    def n_outer(self) -> int:
        return self.s.shape[0] - self.n_inner

    @property
    def tt(self):
        return self.s[: self.n_inner, : self.n_inner]

    @property
    def tr(self):
        return self.s[: self.n_inner, self.n_inner:]

    @property
    def rt(self):
        return self.s[self.n_inner:, : self.n_inner]

    @property
    def rr(self):
        return self.s[self.n_inner:, self.n_inner:]


@dataclass(frozen=True, eq=False)
class RemsModel:
    frontend: RfFrontend
    tuning: TuningNetwork
    radiating: RadiatingStructure
    ctx: WaveContext | None = None

    def __post_init__(self):
        if self.ctx is None:
            object.__setattr__(self, "ctx", self.radiating.ctx)
        if self.frontend.n != self.tuning.n_inner:
            raise ValueError(f"{self.frontend.n} PAs but {self.tuning.n_inner} inner tuning ports")
        if self.tuning.n_outer != self.radiating.nports:
            raise ValueError(
                f"{self.tuning.n_outer} outer tuning ports but {self.radiating.nports} antennas"
            )
        if not np.isclose(self.radiating.z_ref, self.ctx.r0):
            raise ValueError("radiating structure reference differs from the model R0")

    @property
    def n(self) -> int:
        return self.frontend.n

    @property
    def m(self) -> int:
        return self.radiating.nports

    @cached_property
    def operators(self) -> "GainOperators":
        return assemble_operators(self)


def _checked_inv(mat: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ResonantModelError(f"resonant model: {what} has condition number {cond:.3g}")
    return np.linalg.inv(mat)


@dataclass(frozen=True, eq=False)
class GainOperators:
    """Loop matrices and matrix parts of the gain operators of one model.

    The far-field operators are kept factored as ``S_FR @ W`` so each
    direction costs one (2 x M) @ (M x n) product.
    """

    model: RemsModel
    k_vtx: np.ndarray
    s_rf: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    l3: np.ndarray
    inv_l2: np.ndarray  # (I - L2)^-1
    t_vtx_at: np.ndarray  # a_T = t_vtx_at v_Tx
    w_at_ar: np.ndarray  # a_R = w_at_ar a_T
    g_at_bt: np.ndarray  # b_T = g_at_bt a_T

    @property
    def w_vtx_ar(self) -> np.ndarray:
        return self.w_at_ar @ self.t_vtx_at

    @property
    def g_ar_br(self) -> np.ndarray:
        return self.model.radiating.s_rr

    def input_matrix(self, level: Level) -> np.ndarray:
        """Maps the level's excitation to a_R."""
        level = Level(level)
        if level is Level.REMS:
            return self.w_vtx_ar
        if level is Level.TUNING:
            return self.w_at_ar
        return np.eye(self.model.m)

    def far_field_factor(self, level: Level, nodes=None) -> np.ndarray:
        """Per-node factor F with a_F(node) = F[node] @ x, shape (nodes, 2, n)."""
        fields = self.model.radiating.fields
        if nodes is not None:
            fields = fields[nodes]
        return fields @ self.input_matrix(level)

    @property
    def g_vtx_af(self) -> np.ndarray:
        return self.far_field_factor(Level.REMS)

    @property
    def g_at_af(self) -> np.ndarray:
        return self.far_field_factor(Level.TUNING)

    @property
    def g_ar_af(self) -> np.ndarray:
        return self.model.radiating.fields

    def power_matrix(self, level: Level) -> np.ndarray:
        """Hermitian B with x^H B x = P_A, P_T or P_R."""
        level = Level(level)
        if level is Level.REMS:
            return np.diag(0.25 / self.model.frontend.z_tx.real).astype(complex)
        if level is Level.TUNING:
            g = self.g_at_bt
            return np.eye(self.model.n) - g.conj().T @ g
        s = self.model.radiating.s_rr
        return np.eye(self.model.m) - s.conj().T @ s

    @cached_property
    def _inv_sqrt(self) -> dict:
        return {}

    def b_inv_sqrt(self, level: Level) -> np.ndarray:
        level = Level(level)
        if level not in self._inv_sqrt:
            self._inv_sqrt[level] = rayleigh.inv_sqrt_pd(self.power_matrix(level))
        return self._inv_sqrt[level]


def assemble_operators(model: RemsModel) -> GainOperators:
    fm = frontend_matrices(model.frontend.z_tx, model.ctx.r0)
    t = model.tuning
    s_rr = model.radiating.s_rr
    n, m = model.n, model.m
    l1 = fm.s_rf @ t.tt
    l2 = t.rr @ s_rr
    inv_l2 = _checked_inv(np.eye(m) - l2, "I - L2")
    l3 = fm.s_rf @ t.tr @ s_rr @ inv_l2 @ t.rt
    inv_front = _checked_inv(np.eye(n) - l1 - l3, "I - L1 - L3")
    w_at_ar = inv_l2 @ t.rt
    g_at_bt = t.tt + t.tr @ s_rr @ w_at_ar
    return GainOperators(
        model=model, k_vtx=fm.k_vtx, s_rf=fm.s_rf, l1=l1, l2=l2, l3=l3, inv_l2=inv_l2,
        t_vtx_at=inv_front @ fm.k_vtx, w_at_ar=w_at_ar, g_at_bt=g_at_bt,
    )


@dataclass(frozen=True, eq=False)
class SolvedState:
    a_t: np.ndarray
    b_t: np.ndarray
    a_r: np.ndarray
    b_r: np.ndarray
    a_f: FarFieldPattern
    r0: float
    v_tx: np.ndarray | None = None

    @property
    def v_t(self):
        return np.sqrt(self.r0) * (self.a_t + self.b_t)

    @property
    def i_t(self):
        return (self.a_t - self.b_t) / np.sqrt(self.r0)

    @property
    def v_r(self):
        return np.sqrt(self.r0) * (self.a_r + self.b_r)

    @property
    def i_r(self):
        return (self.a_r - self.b_r) / np.sqrt(self.r0)

    def residuals(self, model: RemsModel) -> dict[str, float]:
        """Max-abs residuals of the frontend, tuning and radiating relations."""
        t = model.tuning
        fm = frontend_matrices(model.frontend.z_tx, model.ctx.r0)
        res = {}
        if self.v_tx is not None:
            res["frontend"] = float(np.max(np.abs(self.a_t - fm.k_vtx @ self.v_tx - fm.s_rf @ self.b_t)))
        lhs = np.concatenate([self.b_t, self.a_r])
        rhs = t.s @ np.concatenate([self.a_t, self.b_r])
        res["tuning"] = float(np.max(np.abs(lhs - rhs)))
        res["radiating"] = float(np.max(np.abs(self.b_r - model.radiating.s_rr @ self.a_r)))
        return res


def solve_state(model: RemsModel, v_tx) -> SolvedState:
    """Solve the joined frontend/tuning/radiating equations directly.

    Unknowns ``[a_T, b_T, a_R, b_R]``; independent of the gain-operator formulas.
    """
    v = np.atleast_1d(np.asarray(v_tx, dtype=complex))
    n, m = model.n, model.m
    if v.shape != (n,):
        raise ValueError(f"v_tx must have {n} entries")
    fm = frontend_matrices(model.frontend.z_tx, model.ctx.r0)
    t = model.tuning
    dim = 2 * n + 2 * m
    sys = np.zeros((dim, dim), dtype=complex)
    rhs = np.zeros(dim, dtype=complex)
    at, bt, ar, br = (slice(0, n), slice(n, 2 * n), slice(2 * n, 2 * n + m), slice(2 * n + m, dim))
    rows = iter([slice(0, n), slice(n, 2 * n), slice(2 * n, 2 * n + m), slice(2 * n + m, dim)])
    r = next(rows)  # a_T - S_RF b_T = K v
    sys[r, at] = np.eye(n)
    sys[r, bt] = -fm.s_rf
    rhs[r] = fm.k_vtx @ v
    r = next(rows)  # b_T - S_TT a_T - S_TR b_R = 0
    sys[r, bt] = np.eye(n)
    sys[r, at] = -t.tt
    sys[r, br] = -t.tr
    r = next(rows)  # a_R - S_RT a_T - S_T,RR b_R = 0
    sys[r, ar] = np.eye(m)
    sys[r, at] = -t.rt
    sys[r, br] = -t.rr
    r = next(rows)  # b_R - S_RR a_R = 0
    sys[r, br] = np.eye(m)
    sys[r, ar] = -model.radiating.s_rr
    cond = np.linalg.cond(sys)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ResonantModelError(f"resonant model: system condition number {cond:.3g}")
    x = np.linalg.solve(sys, rhs)
    a_r = x[ar]
    return SolvedState(x[at], x[bt], a_r, x[br], model.radiating.far_field(a_r), model.ctx.r0, v)


def _ratio(num: float, den: float) -> float:
    return num / den if den > POWER_FLOOR else math.nan


@dataclass(frozen=True)
class PowerMetrics:
    p_a: float | None
    p_t: float | None
    p_r: float
    p_f: float

    @property
    def eta_matching(self) -> float:
        return math.nan if self.p_a is None or self.p_t is None else _ratio(self.p_t, self.p_a)

    @property
    def eta_tuning(self) -> float:
        return math.nan if self.p_t is None else _ratio(self.p_r, self.p_t)

    @property
    def eta_radiating(self) -> float:
        return _ratio(self.p_f, self.p_r)

    def directivity(self, intensity: float) -> float:
        return _ratio(4 * np.pi * intensity, self.p_f)


def power_metrics(state: SolvedState, model: RemsModel, check: bool = True) -> PowerMetrics:
    p_t = float(np.vdot(state.a_t, state.a_t).real - np.vdot(state.b_t, state.b_t).real)
    p_r = float(np.vdot(state.a_r, state.a_r).real - np.vdot(state.b_r, state.b_r).real)
    p_f = float(np.vdot(state.a_r, model.radiating.gram @ state.a_r).real)
    p_a = None
    if state.v_tx is not None:
        v = state.v_tx
        p_a = float(0.25 * np.sum(np.abs(v) ** 2 / model.frontend.z_tx.real))
    if check:
        for name, wave, circuit, scale in (
            ("P_T", p_t, np.vdot(state.v_t, state.i_t).real, p_a or abs(p_t)),
            ("P_R", p_r, np.vdot(state.v_r, state.i_r).real, p_a or abs(p_r)),
        ):
            if abs(wave - circuit) > 1e-9 * max(scale, POWER_FLOOR):
                raise AssertionError(f"{name}: wave form {wave} != circuit form {circuit}")
    return PowerMetrics(p_a, p_t, p_r, p_f)


def radiation_intensity(a_f: FarFieldPattern, direction) -> tuple[float, float]:
    """Intensity at the grid node nearest ``direction`` (node index or (theta, phi)).

    Returns ``(intensity, snap distance in rad)``.
    """
    node, snap = _resolve_direction(a_f.grid, direction)
    return float(np.sum(np.abs(a_f.values[node]) ** 2)), snap


def _resolve_direction(grid, direction) -> tuple[int, float]:
    if isinstance(direction, (int, np.integer)):
        if not 0 <= direction < grid.size:
            raise IndexError("node index out of range")
        return int(direction), 0.0
    theta, phi = direction
    return grid.nearest(theta, phi)


@dataclass(frozen=True)
class GainResult:
    level: Level
    gain: float
    excitation: np.ndarray
    node: int
    snap: float
    powers: PowerMetrics
    intensity: float

    @property
    def directivity(self) -> float:
        return self.powers.directivity(self.intensity)

    @property
    def gain_dbi(self) -> float:
        return 10 * np.log10(self.gain) if self.gain > 0 else -np.inf

    def chain_product(self) -> float:
        """eta_matching * eta_tuning * eta_radiating * D (REMS level only)."""
        p = self.powers
        return p.eta_matching * p.eta_tuning * p.eta_radiating * self.directivity


def _waves_from(model: RemsModel, level: Level, x: np.ndarray):
    ops = model.operators
    if level is Level.REMS:
        state = solve_state(model, x)
        return state, power_metrics(state, model)
    if level is Level.TUNING:
        a_t = x
        b_t = ops.g_at_bt @ a_t
        a_r = ops.w_at_ar @ a_t
    else:
        a_t = b_t = np.zeros(0, dtype=complex)
        a_r = x
    b_r = model.radiating.s_rr @ a_r
    state = SolvedState(a_t, b_t, a_r, b_r, model.radiating.far_field(a_r), model.ctx.r0)
    pm = power_metrics(state, model, check=False)
    if level is Level.RADIATING:
        pm = PowerMetrics(None, None, pm.p_r, pm.p_f)
    return state, pm


def gain_at(model: RemsModel, excitation, level: Level, direction) -> GainResult:
    """REMS, tuning or radiating gain of a given excitation in one direction."""
    level = Level(level)
    x = np.atleast_1d(np.asarray(excitation, dtype=complex))
    expected = model.m if level is Level.RADIATING else model.n
    if x.shape != (expected,):
        raise ValueError(f"{level.value} excitation needs {expected} entries, got {x.shape}")
    node, snap = _resolve_direction(model.radiating.grid, direction)
    state, pm = _waves_from(model, level, x)
    intensity = float(np.sum(np.abs(state.a_f.values[node]) ** 2))
    den = {Level.REMS: pm.p_a, Level.TUNING: pm.p_t, Level.RADIATING: pm.p_r}[level]
    if den is None or not den > POWER_FLOOR:
        raise DegenerateExcitationError(f"degenerate excitation: reference power {den}")
    return GainResult(level, 4 * np.pi * intensity / den, x, node, snap, pm, intensity)


def maximize_gain(model: RemsModel, level: Level, direction) -> GainResult:
    """Rayleigh-optimal excitation and its gain for one direction."""
    level = Level(level)
    ops = model.operators
    node, snap = _resolve_direction(model.radiating.grid, direction)
    f = ops.far_field_factor(level, [node])
    g, x = rayleigh.maximize_factored(f, ops.b_inv_sqrt(level))
    res = gain_at(model, x[0], level, node)
    return GainResult(level, float(g[0]), res.excitation, node, snap, res.powers, res.intensity)


@dataclass
class GainMap:
    """Per-node maximal gains (linear) and the REMS-optimal power breakdown."""

    grid: object
    nodes: np.ndarray
    gains: dict[Level, np.ndarray]
    eta_matching: np.ndarray | None = None
    eta_tuning: np.ndarray | None = None
    eta_radiating: np.ndarray | None = None
    directivity: np.ndarray | None = None
    holes: dict[int, str] = field(default_factory=dict)

    @property
    def theta(self) -> np.ndarray:
        return self.grid.node_theta[self.nodes]

    @property
    def phi(self) -> np.ndarray:
        return self.grid.node_phi[self.nodes]

    def __getitem__(self, level) -> np.ndarray:
        return self.gains[Level(level)]


def _batched_powers(model: RemsModel, v: np.ndarray, nodes: np.ndarray):
    """Power chain for many REMS excitations (rows of ``v``)."""
    ops = model.operators
    a_t = v @ ops.t_vtx_at.T
    b_t = a_t @ ops.g_at_bt.T
    a_r = a_t @ ops.w_at_ar.T
    b_r = a_r @ model.radiating.s_rr.T
    p_a = 0.25 * np.sum(np.abs(v) ** 2 / model.frontend.z_tx.real, axis=1)
    p_t = np.sum(np.abs(a_t) ** 2, axis=1) - np.sum(np.abs(b_t) ** 2, axis=1)
    p_r = np.sum(np.abs(a_r) ** 2, axis=1) - np.sum(np.abs(b_r) ** 2, axis=1)
    p_f = np.einsum("ki,ij,kj->k", a_r.conj(), model.radiating.gram, a_r).real
    a_f = np.einsum("kpm,km->kp", model.radiating.fields[nodes], a_r)
    intensity = np.sum(np.abs(a_f) ** 2, axis=1)
    return p_a, p_t, p_r, p_f, intensity


def _safe_div(num, den):
    out = np.full(np.shape(num), np.nan)
    ok = den > POWER_FLOOR
    out[ok] = num[ok] / den[ok]
    return out


def gain_map(model: RemsModel, nodes=None, levels=(Level.REMS, Level.TUNING, Level.RADIATING),
             breakdown: bool = True) -> GainMap:
    """Maximal gains at every requested node (default: front hemisphere)."""
    grid = model.radiating.grid
    nodes = grid.hemisphere() if nodes is None else np.asarray(nodes, dtype=int)
    levels = [Level(lv) for lv in levels]
    ops = model.operators
    gains: dict[Level, np.ndarray] = {}
    holes: dict[int, str] = {}
    v_opt = None
    for level in levels:
        try:
            b_is = ops.b_inv_sqrt(level)
        except (rayleigh.NotPositiveDefiniteError, ResonantModelError) as exc:
            gains[level] = np.full(nodes.size, np.nan)
            for k in nodes:
                holes[int(k)] = f"{level.value}: {exc}"
            continue
        g, x = rayleigh.maximize_factored(ops.far_field_factor(level, nodes), b_is)
        gains[level] = g
        if level is Level.REMS:
            v_opt = x
    out = GainMap(grid, nodes, gains, holes=holes)
    if breakdown and v_opt is not None:
        p_a, p_t, p_r, p_f, intensity = _batched_powers(model, v_opt, nodes)
        out.eta_matching = _safe_div(p_t, p_a)
        out.eta_tuning = _safe_div(p_r, p_t)
        out.eta_radiating = _safe_div(p_f, p_r)
        out.directivity = _safe_div(4 * np.pi * intensity, p_f)
    return out
