"""Switch-based joint beamforming and matching architecture, plus benchmarks.

One tile: PA -> triple-stub matcher -> feed line -> (K+1)-port node ->
K x (branch line -> switch unit) -> K antennas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from .components import SwitchModel, junction, switch_two_port, transmission_line
from .netcalc import (
    MultiportNetwork,
    WaveContext,
    connect,
    interconnect,
    renormalize,
    stack,
    terminate,
)
from .radiating import RadiatingStructure
from .rayleigh import maximize_factored
from .rems import GainMap, Level, RemsModel, RfFrontend, TuningNetwork, gain_map

GAIN_FLOOR_REL = 1e-12


class UnitState(str, Enum):
    """Switch-unit states; value order matches the (top, bottom) bit pair."""

    OPEN_REFLECT = "OPEN_REFLECT"  # (0, 0)
    PASS = "PASS"  # (1, 0)
    PASS_180 = "PASS_180"  # (0, 1)
    SHORT_REFLECT = "SHORT_REFLECT"  # (1, 1)

    @property
    def bits(self) -> tuple[int, int]:
        return _UNIT_BITS[self]

    @property
    def code(self) -> int:
        top, bottom = self.bits
        return top | (bottom << 1)

    @classmethod
    def from_code(cls, code: int) -> "UnitState":
        return _UNIT_FROM_CODE[code]


_UNIT_BITS = {
    UnitState.OPEN_REFLECT: (0, 0),
    UnitState.PASS: (1, 0),
    UnitState.PASS_180: (0, 1),
    UnitState.SHORT_REFLECT: (1, 1),
}
_UNIT_FROM_CODE = {s.code: s for s in UnitState}


@dataclass(frozen=True)
class TileGeometry:
    """Line lengths in wavelengths, impedances in ohms.

    ``feed_zc`` and ``series_zc`` default to ``50 / antennas_per_tile``, the
    value that makes the splitter node reflection-free towards the feed.
    """

    antennas_per_tile: int = 16
    stub_count: int = 3
    series_length: float = 1 / 8
    stub_length: float = 1 / 10
    lead_length: float = 0.0
    phase_branch_length: float = 1 / 2
    feed_length: float = 1 / 4
    branch_length: float = 1 / 4
    branch_zc: float = 50.0
    stub_zc: float = 50.0
    feed_zc: float | None = None
    series_zc: float | None = None
    pa_impedance: float | None = None
    switch: SwitchModel = field(default_factory=SwitchModel)

    def __post_init__(self):
        if self.antennas_per_tile < 1 or self.stub_count < 0:
            raise ValueError("need at least one antenna per tile and a non-negative stub count")
        for name in ("series_length", "stub_length", "lead_length", "phase_branch_length",
                     "feed_length", "branch_length"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("branch_zc", "stub_zc", "feed_zc", "series_zc", "pa_impedance"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def feed_impedance(self) -> float:
        return self.feed_zc or self.branch_zc / self.antennas_per_tile

    @property
    def series_impedance(self) -> float:
        return self.series_zc or self.feed_impedance

    @property
    def pa_output_impedance(self) -> float:
        return self.pa_impedance or self.branch_zc / self.antennas_per_tile

    @property
    def bits_per_tile(self) -> int:
        return 2 * self.stub_count + 2 * self.antennas_per_tile

    @property
    def groups_per_tile(self) -> int:
        return self.stub_count + self.antennas_per_tile


def ideal_geometry(**kw) -> TileGeometry:
    return TileGeometry(switch=SwitchModel.ideal(), **kw)


@dataclass(frozen=True)
class TileConfig:
    """``matching``: (series-connect, termination-short) bit per stub, flattened."""

    matching: tuple[int, ...]
    units: tuple[UnitState, ...]

    def __post_init__(self):
        m = tuple(int(b) for b in self.matching)
        if len(m) % 2 or any(b not in (0, 1) for b in m):
            raise ValueError("matching bits must be 0/1 pairs")
        object.__setattr__(self, "matching", m)
        object.__setattr__(self, "units", tuple(UnitState(u) for u in self.units))

    @property
    def stub_codes(self) -> tuple[int, ...]:
        m = self.matching
        return tuple(m[2 * i] | (m[2 * i + 1] << 1) for i in range(len(m) // 2))

    def codes(self) -> tuple[int, ...]:
        """Group values (0..3): stubs first, then units."""
        return self.stub_codes + tuple(u.code for u in self.units)

    @classmethod
    def from_codes(cls, codes: Sequence[int], stub_count: int) -> "TileConfig":
        bits = []
        for c in codes[:stub_count]:
            bits += [c & 1, c >> 1]
        return cls(tuple(bits), tuple(UnitState.from_code(c) for c in codes[stub_count:]))

    def bits(self) -> list[int]:
        out = list(self.matching)
        for u in self.units:
            out += list(u.bits)
        return out

    def to_int(self) -> int:
        return sum(b << k for k, b in enumerate(self.bits()))

    @classmethod
    def from_int(cls, value: int, stub_count: int, units: int) -> "TileConfig":
        nbits = 2 * stub_count + 2 * units
        if value < 0 or value >> nbits:
            raise ValueError(f"value does not fit in {nbits} bits")
        bits = [(value >> k) & 1 for k in range(nbits)]
        ub = bits[2 * stub_count:]
        return cls(tuple(bits[: 2 * stub_count]),
                   tuple(UnitState.from_code(ub[2 * j] | (ub[2 * j + 1] << 1)) for j in range(units)))


@dataclass(frozen=True)
class SwitchConfig:
    """Switch states of every tile.

    Bit order within a tile (least significant first): stub ``i`` uses bits
    ``2i`` (series-connect) and ``2i+1`` (termination-short); unit ``j`` then
    uses bits ``2S+2j`` (top switch) and ``2S+2j+1`` (bottom switch).
    """

    tiles: tuple[TileConfig, ...]

    @classmethod
    def uniform(cls, geometry: TileGeometry, tiles: int = 1, unit=UnitState.PASS,
                matching: Sequence[int] | None = None) -> "SwitchConfig":
        m = tuple(matching) if matching is not None else (0,) * (2 * geometry.stub_count)
        return cls(tuple(TileConfig(m, (unit,) * geometry.antennas_per_tile) for _ in range(tiles)))

    def codes(self) -> tuple[int, ...]:
        return tuple(c for t in self.tiles for c in t.codes())

    @classmethod
    def from_codes(cls, codes: Sequence[int], geometry: TileGeometry) -> "SwitchConfig":
        g = geometry.groups_per_tile
        if len(codes) % g:
            raise ValueError("code vector length is not a multiple of the groups per tile")
        return cls(tuple(TileConfig.from_codes(codes[k:k + g], geometry.stub_count)
                         for k in range(0, len(codes), g)))

    def to_json(self) -> dict:
        return {"tiles": [{"matching": list(t.matching), "units": [u.value for u in t.units]}
                          for t in self.tiles]}

    @classmethod
    def from_json(cls, data) -> "SwitchConfig":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(tuple(TileConfig(tuple(t["matching"]), tuple(t["units"])) for t in data["tiles"]))

    def to_hex(self, geometry: TileGeometry) -> str:
        width = -(-geometry.bits_per_tile // 4)
        return ".".join(f"{t.to_int():0{width}x}" for t in self.tiles)

    @classmethod
    def from_hex(cls, text: str, geometry: TileGeometry) -> "SwitchConfig":
        return cls(tuple(
            TileConfig.from_int(int(part, 16), geometry.stub_count, geometry.antennas_per_tile)
            for part in text.strip().split(".")
        ))


# -- builders ---------------------------------------------------------------


def _switch(geometry: TileGeometry, on: bool, ref: float, ctx) -> MultiportNetwork:
    net = switch_two_port(geometry.switch, "on" if on else "off", ctx)
    return renormalize(net, ref)


def _line(zc: float, length: float, ref: float, ctx) -> MultiportNetwork:
    return renormalize(transmission_line(zc, length, ctx), ref)


def _cascade(*nets: MultiportNetwork) -> MultiportNetwork:
    out = nets[0]
    for net in nets[1:]:
        out = connect(out, out.nports - 1, net, 0)
    return out


def stub_reflection(series_on: bool, short: bool, geometry: TileGeometry, ctx=None) -> MultiportNetwork:
    """One-port seen from a tap into its switched stub (reference: switch impedance)."""
    ref = geometry.switch.z_ref
    chain = _cascade(
        _switch(geometry, series_on, ref, ctx),
        _line(geometry.stub_zc, geometry.stub_length, ref, ctx),
        _switch(geometry, short, ref, ctx),
    )
    return terminate(chain, 1, -1.0)


def build_matching_network(bits: Sequence[int], geometry: TileGeometry,
                           ctx: WaveContext | None = None) -> MultiportNetwork:
    """Switched multi-stub tuner; both ports at the series-line impedance."""
    bits = [int(b) for b in bits]
    if len(bits) != 2 * geometry.stub_count:
        raise ValueError(f"need {2 * geometry.stub_count} matching bits, got {len(bits)}")
    zs = geometry.series_impedance
    sw_ref = geometry.switch.z_ref
    parts = []
    if geometry.lead_length > 0 or geometry.stub_count == 0:
        parts.append(transmission_line(zs, geometry.lead_length, ctx))
    for i in range(geometry.stub_count):
        if i > 0:
            parts.append(transmission_line(zs, geometry.series_length, ctx))
        stub = stub_reflection(bool(bits[2 * i]), bool(bits[2 * i + 1]), geometry, ctx)
        tap = junction([zs, zs, sw_ref])
        tap = connect(tap, 2, stub, 0)
        parts.append(tap)
    return _cascade(*parts)


def build_switch_unit(state: UnitState, geometry: TileGeometry,
                      ctx: WaveContext | None = None) -> MultiportNetwork:
    """Two-branch switch unit between two nodes; ports at the branch impedance."""
    state = UnitState(state)
    top_on, bottom_on = state.bits
    zb = geometry.branch_zc
    parts = stack(
        junction([zb, zb, zb]),  # 0 in, 1 top, 2 bottom
        _switch(geometry, bool(top_on), zb, ctx),  # 3, 4
        _switch(geometry, bool(bottom_on), zb, ctx),  # 5, 6
        transmission_line(zb, geometry.phase_branch_length, ctx),  # 7, 8
        junction([zb, zb, zb]),  # 9 top, 10 bottom, 11 out
    )
    return interconnect(parts, [(1, 3), (2, 5), (6, 7), (4, 9), (8, 10)])


class _PartCache:
    """Memoised sub-networks for one geometry/context."""

    def __init__(self, geometry: TileGeometry, ctx):
        self.geometry = geometry
        self.ctx = ctx
        self._front = lru_cache(maxsize=None)(self._build_front)
        self._branch = lru_cache(maxsize=None)(self._build_branch)
        self.node = junction([geometry.feed_impedance] + [geometry.branch_zc] * geometry.antennas_per_tile)

    def _build_front(self, bits: tuple[int, ...]) -> MultiportNetwork:
        g = self.geometry
        matcher = build_matching_network(bits, g, self.ctx)
        feed = _line(g.feed_impedance, g.feed_length, g.series_impedance, self.ctx)
        front = _cascade(matcher, feed)
        return renormalize(front, [g.series_impedance, g.feed_impedance])

    def _build_branch(self, state: UnitState) -> MultiportNetwork:
        g = self.geometry
        line = transmission_line(g.branch_zc, g.branch_length, self.ctx)
        return _cascade(line, build_switch_unit(state, g, self.ctx))

    def front(self, bits) -> MultiportNetwork:
        return self._front(tuple(int(b) for b in bits))

    def branch(self, state) -> MultiportNetwork:
        return self._branch(UnitState(state))


@lru_cache(maxsize=32)
def _parts(geometry: TileGeometry, ctx) -> _PartCache:
    return _PartCache(geometry, ctx)


def build_tile_network(config: TileConfig, geometry: TileGeometry,
                       ctx: WaveContext | None = None, r0: float = 50.0) -> MultiportNetwork:
    """(1 + K)-port tile network, port 0 facing the PA, all ports at ``r0``."""
    k = geometry.antennas_per_tile
    if len(config.units) != k or len(config.matching) != 2 * geometry.stub_count:
        raise ValueError("config does not match the tile geometry")
    parts = _parts(geometry, ctx)
    front = parts.front(config.matching)
    branches = [parts.branch(u) for u in config.units]
    net = stack(front, parts.node, *branches)
    # front: 0 (PA), 1 ; node: 2 .. 2+k ; branch j: 3+k+2j (in), 4+k+2j (antenna)
    pairs = [(1, 2)] + [(3 + j, 3 + k + 2 * j) for j in range(k)]
    net = interconnect(net, pairs)
    return renormalize(net, r0)


def build_tile(config: TileConfig, geometry: TileGeometry, ctx: WaveContext | None = None,
               r0: float = 50.0) -> TuningNetwork:
    return TuningNetwork(build_tile_network(config, geometry, ctx, r0).s, 1)


def tile_partition(rows: int, cols: int, tile_rows: int, tile_cols: int) -> list[list[int]]:
    """Row-major antenna indices of each rectangular tile, tiles in row-major order."""
    if rows % tile_rows or cols % tile_cols:
        raise ValueError("tiles must evenly divide the array")
    out = []
    for tr in range(0, rows, tile_rows):
        for tc in range(0, cols, tile_cols):
            out.append([(tr + r) * cols + tc + c for r in range(tile_rows) for c in range(tile_cols)])
    return out


def build_array_tuning(config: SwitchConfig, tile_map: Sequence[Sequence[int]],
                       geometry: TileGeometry, ctx: WaveContext | None = None,
                       r0: float = 50.0) -> TuningNetwork:
    """Block-diagonal tuning network over tiles; outer ports in antenna order."""
    n = len(tile_map)
    if len(config.tiles) != n:
        raise ValueError(f"{len(config.tiles)} tile configs for {n} tiles")
    flat = [int(i) for t in tile_map for i in t]
    m = len(flat)
    if sorted(flat) != list(range(m)):
        raise ValueError("tile map is not a partition of the antenna indices")
    if any(len(t) != geometry.antennas_per_tile for t in tile_map):
        raise ValueError("every tile must hold antennas_per_tile antennas")
    s = np.zeros((n + m, n + m), dtype=complex)
    for t, (cfg, ants) in enumerate(zip(config.tiles, tile_map)):
        tile = build_tile_network(cfg, geometry, ctx, r0).s
        idx = np.array([t] + [n + a for a in ants])
        s[np.ix_(idx, idx)] = tile
    return TuningNetwork(s, n)


# -- benchmarks -------------------------------------------------------------


class Benchmark(str, Enum):
    ALL_DIGITAL_IDEAL = "ALL_DIGITAL_IDEAL"
    ALL_DIGITAL_CONVENTIONAL = "ALL_DIGITAL_CONVENTIONAL"
    PROPOSED_IDEAL = "PROPOSED_IDEAL"
    PROPOSED = "PROPOSED"


@dataclass(frozen=True, eq=False)
class BenchmarkRecipe:
    """How to obtain an architecture's REMS gain: a model and the gain level that equals it."""

    kind: Benchmark
    model: RemsModel
    level: Level
    rf_chains: int

    def gains(self, nodes=None) -> np.ndarray:
        return gain_map(self.model, nodes, levels=(self.level,), breakdown=False)[self.level]

    def gain_map(self, nodes=None) -> GainMap:
        """Full map; for ideal-matching kinds the REMS entry and the breakdown
        follow the equivalent level (matching efficiency is 1 by definition)."""
        gm = gain_map(self.model, nodes)
        if self.level is Level.REMS:
            return gm
        ops = self.model.operators
        g, x = maximize_factored(ops.far_field_factor(self.level, gm.nodes), ops.b_inv_sqrt(self.level))
        a_r = x @ ops.w_at_ar.T if self.level is Level.TUNING else x
        if self.level is Level.TUNING:
            b_t = x @ ops.g_at_bt.T
            p_t = np.sum(np.abs(x) ** 2, axis=1) - np.sum(np.abs(b_t) ** 2, axis=1)
        b_r = a_r @ self.model.radiating.s_rr.T
        p_r = np.sum(np.abs(a_r) ** 2, axis=1) - np.sum(np.abs(b_r) ** 2, axis=1)
        if self.level is Level.RADIATING:
            p_t = p_r
        rad = self.model.radiating
        p_f = np.einsum("ki,ij,kj->k", a_r.conj(), rad.gram, a_r).real
        a_f = np.einsum("kpm,km->kp", rad.fields[gm.nodes], a_r)
        intensity = np.sum(np.abs(a_f) ** 2, axis=1)
        gm.gains[Level.REMS] = g
        gm.eta_matching = np.ones(gm.nodes.size)
        gm.eta_tuning = _ratio(p_r, p_t)
        gm.eta_radiating = _ratio(p_f, p_r)
        gm.directivity = _ratio(4 * np.pi * intensity, p_f)
        return gm


def _ratio(num, den):
    out = np.full(np.shape(num), np.nan)
    ok = den > 1e-18
    out[ok] = num[ok] / den[ok]
    return out


def proposed_model(radiating: RadiatingStructure, config: SwitchConfig, geometry: TileGeometry,
                   tile_map: Sequence[Sequence[int]] | None = None) -> RemsModel:
    ctx = radiating.ctx
    if tile_map is None:
        tile_map = [list(range(radiating.nports))]
    tuning = build_array_tuning(config, tile_map, geometry, ctx, ctx.r0)
    frontend = RfFrontend(np.full(len(tile_map), geometry.pa_output_impedance, dtype=complex))
    return RemsModel(frontend, tuning, radiating, ctx)


def all_digital_model(radiating: RadiatingStructure, pa_impedance: float = 50.0) -> RemsModel:
    m = radiating.nports
    return RemsModel(RfFrontend(np.full(m, pa_impedance, dtype=complex)),
                     TuningNetwork.feedthrough(m), radiating, radiating.ctx)


def benchmark_model(kind: Benchmark, radiating: RadiatingStructure, config: SwitchConfig | None = None,
                    geometry: TileGeometry | None = None, tile_map=None,
                    conventional_impedance: float = 50.0) -> BenchmarkRecipe:
    kind = Benchmark(kind)
    m = radiating.nports
    if kind is Benchmark.ALL_DIGITAL_IDEAL:
        return BenchmarkRecipe(kind, all_digital_model(radiating, radiating.ctx.r0), Level.RADIATING, m)
    if kind is Benchmark.ALL_DIGITAL_CONVENTIONAL:
        return BenchmarkRecipe(kind, all_digital_model(radiating, conventional_impedance), Level.REMS, m)
    if config is None:
        raise ValueError(f"{kind.value} needs a switch configuration")
    geometry = geometry or TileGeometry()
    model = proposed_model(radiating, config, geometry, tile_map)
    level = Level.TUNING if kind is Benchmark.PROPOSED_IDEAL else Level.REMS
    return BenchmarkRecipe(kind, model, level, model.n)


# -- comparison -------------------------------------------------------------


def _db(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 10 * np.log10(x)


@dataclass
class Comparison:
    relative_db: dict[str, np.ndarray]
    median_relative_db: dict[str, float]
    cam_db: dict[str, np.ndarray]
    median_cam_db: dict[str, float]
    valid: np.ndarray  # nodes where the radiating gain is non-negligible

    def to_json(self) -> dict:
        return {
            "median_relative_gain_db": self.median_relative_db,
            "median_cam_db": self.median_cam_db,
            "valid_nodes": int(np.count_nonzero(self.valid)),
        }


def compare(maps: dict[str, np.ndarray], radiating_gain: np.ndarray,
            rf_chain_counts: dict[str, int]) -> Comparison:
    """Relative gains G / G_R and cost-aware metric G / #chains, with medians.

    Nodes where ``G_R`` is below ``1e-12 * max(G_R)`` (no radiation at all)
    are excluded from the medians and reported as NaN.
    """
    g_r = np.asarray(radiating_gain, dtype=float)
    valid = np.isfinite(g_r) & (g_r > GAIN_FLOOR_REL * np.nanmax(g_r))
    rel, med_rel, cam, med_cam = {}, {}, {}, {}
    for name, g in maps.items():
        g = np.asarray(g, dtype=float)
        if g.shape != g_r.shape:
            raise ValueError(f"map {name!r} is on a different grid")
        r = np.full(g.shape, np.nan)
        r[valid] = _db(g[valid] / g_r[valid])
        c = np.full(g.shape, np.nan)
        c[valid] = _db(g[valid] / rf_chain_counts[name])
        rel[name], cam[name] = r, c
        med_rel[name] = float(np.median(r[valid]))
        med_cam[name] = float(np.median(c[valid]))
    return Comparison(rel, med_rel, cam, med_cam, valid)
