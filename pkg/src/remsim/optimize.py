"""Discrete search over switch configurations.

Coordinates are 4-valued groups: each stub (series-connect, termination-short)
and each switch unit (top, bottom). A group value ``v`` encodes the bit pair
``(v & 1, v >> 1)``.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .architecture import SwitchConfig, TileGeometry, UnitState, proposed_model
from .netcalc import NetworkError
from .radiating import RadiatingStructure
from .rayleigh import NotPositiveDefiniteError
from .rems import DegenerateExcitationError, Level, ResonantModelError, gain_map

DEFAULT_CAP = 2**24
IMPROVE_TOL_DB = 1e-12
GROUP_STATES = (0, 1, 2, 3)
MAX_REDRAWS = 20
TRANSMITTING = (UnitState.PASS.code, UnitState.PASS_180.code)


class SearchCapExceeded(RuntimeError):
    def __init__(self, size: int, cap: int):
        super().__init__(f"search space has {size} states (about 2^{math.log2(size):.1f}), cap is {cap}")
        self.size = size
        self.cap = cap


@dataclass(frozen=True)
class Objective:
    """Gain at one grid node, or the median (in dB) over several."""

    nodes: tuple[int, ...]
    level: Level = Level.REMS

    def __post_init__(self):
        nodes = tuple(int(n) for n in np.atleast_1d(self.nodes))
        if not nodes:
            raise ValueError("objective needs at least one direction")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "level", Level(self.level))

    @classmethod
    def direction(cls, grid, theta: float, phi: float, level=Level.REMS) -> "Objective":
        """Nearest grid node to (theta, phi) in radians."""
        idx, _ = grid.nearest(theta, phi)
        return cls((int(idx),), level)

    def aggregate(self, gains: np.ndarray) -> float:
        with np.errstate(divide="ignore"):
            db = 10 * np.log10(np.maximum(np.asarray(gains, dtype=float), 0.0))
        return float(db[0] if db.size == 1 else np.median(db))


class ConfigEvaluator:
    """Objective value (dB) of a switch configuration, memoised by group codes.

    Model errors (singular loops, non-passive data) give ``-inf`` and the
    reason is kept in :attr:`failures`.
    """

    def __init__(self, radiating: RadiatingStructure, geometry: TileGeometry, objective: Objective,
                 tile_map: Sequence[Sequence[int]] | None = None):
        self.radiating = radiating
        self.geometry = geometry
        self.objective = objective
        self.tile_map = tile_map
        self.nodes = np.asarray(objective.nodes)
        self.failures: dict[tuple[int, ...], str] = {}
        self._cache: dict[tuple[int, ...], float] = {}

    @property
    def evaluations(self) -> int:
        return len(self._cache)

    def gains(self, config: SwitchConfig) -> np.ndarray:
        model = proposed_model(self.radiating, config, self.geometry, self.tile_map)
        lvl = self.objective.level
        return gain_map(model, self.nodes, levels=(lvl,), breakdown=False)[lvl]

    def __call__(self, config) -> float:
        codes = tuple(config.codes()) if isinstance(config, SwitchConfig) else tuple(int(c) for c in config)
        hit = self._cache.get(codes)
        if hit is not None:
            return hit
        cfg = config if isinstance(config, SwitchConfig) else SwitchConfig.from_codes(codes, self.geometry)
        try:
            value = self.objective.aggregate(self.gains(cfg))
        except (NetworkError, ResonantModelError, DegenerateExcitationError,
                NotPositiveDefiniteError, np.linalg.LinAlgError) as exc:
            self.failures[codes] = f"{type(exc).__name__}: {exc}"
            value = -math.inf
        self._cache[codes] = value
        return value


def evaluate_config(config: SwitchConfig, geometry: TileGeometry, radiating: RadiatingStructure,
                    objective: Objective, tile_map=None) -> float:
    return ConfigEvaluator(radiating, geometry, objective, tile_map)(config)


@dataclass(frozen=True)
class SearchSpace:
    """Groups ``free`` vary over ``choices`` (default all 4 states); the rest stay at ``base``."""

    base: SwitchConfig
    geometry: TileGeometry
    free: tuple[int, ...] | None = None
    choices: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.base.codes())
        free = tuple(range(n)) if self.free is None else tuple(int(g) for g in self.free)
        if any(not 0 <= g < n for g in free) or len(set(free)) != len(free):
            raise ValueError(f"free groups must be distinct indices below {n}")
        object.__setattr__(self, "free", free)
        for g, ch in self.choices.items():
            if g not in free or not ch or any(c not in GROUP_STATES for c in ch):
                raise ValueError(f"bad choices for group {g}")

    @classmethod
    def units_only(cls, base: SwitchConfig, geometry: TileGeometry) -> "SearchSpace":
        """Matching bits fixed at ``base``; all unit states free."""
        return cls(base, geometry, tuple(_groups(geometry, len(base.tiles), units=True)))

    @classmethod
    def matching_only(cls, base: SwitchConfig, geometry: TileGeometry) -> "SearchSpace":
        return cls(base, geometry, tuple(_groups(geometry, len(base.tiles), units=False)))

    def states(self, group: int) -> tuple[int, ...]:
        return self.choices.get(group, GROUP_STATES)

    def is_unit(self, group: int) -> bool:
        return group % self.geometry.groups_per_tile >= self.geometry.stub_count

    def random_codes(self, rng: np.random.Generator) -> list[int]:
        """Random start: stubs uniform, units drawn from the transmitting states where allowed."""
        codes = list(self.base.codes())
        for g in self.free:
            st = self.states(g)
            if self.is_unit(g):
                st = tuple(v for v in st if v in TRANSMITTING) or st
            codes[g] = st[int(rng.integers(len(st)))]
        return codes

    @property
    def size(self) -> int:
        return math.prod(len(self.states(g)) for g in self.free)

    def config(self, codes: Sequence[int]) -> SwitchConfig:
        return SwitchConfig.from_codes(codes, self.geometry)


def _groups(geometry: TileGeometry, tiles: int, units: bool):
    per = geometry.groups_per_tile
    for t in range(tiles):
        start = geometry.stub_count if units else 0
        stop = per if units else geometry.stub_count
        yield from (t * per + g for g in range(start, stop))


@dataclass
class SearchReport:
    method: str
    best: SwitchConfig
    best_db: float
    evaluations: int
    trajectory: list[list[float]]
    wall_seconds: float
    settings: dict = field(default_factory=dict)
    failures: int = 0

    def to_json(self, geometry: TileGeometry) -> dict:
        return {
            "method": self.method,
            "best_objective_db": self.best_db if math.isfinite(self.best_db) else None,
            "evaluations": self.evaluations,
            "trajectory_db": [[v if math.isfinite(v) else None for v in run] for run in self.trajectory],
            "wall_seconds": self.wall_seconds,
            "settings": self.settings,
            "failed_evaluations": self.failures,
            "best_config": self.best.to_json(),
            "best_config_hex": self.best.to_hex(geometry),
        }


def exhaustive_search(space: SearchSpace, evaluate: Callable, cap: int = DEFAULT_CAP) -> SearchReport:
    """Global optimum over the space; the first best in enumeration order wins ties."""
    size = space.size
    if size > cap:
        raise SearchCapExceeded(size, cap)
    t0 = time.perf_counter()
    codes = list(space.base.codes())
    best_codes, best = tuple(codes), -math.inf
    count = 0
    for combo in itertools.product(*(space.states(g) for g in space.free)):
        for g, v in zip(space.free, combo):
            codes[g] = v
        value = evaluate(tuple(codes))
        count += 1
        if value > best or count == 1:
            best, best_codes = value, tuple(codes)
    return SearchReport("exhaustive", space.config(best_codes), best, count, [[best]],
                        time.perf_counter() - t0, {"space_size": size},
                        len(getattr(evaluate, "failures", {})))


def _ascend(space: SearchSpace, evaluate: Callable, codes: list[int], max_passes: int):
    current = evaluate(tuple(codes))
    history = [current]
    for _ in range(max_passes):
        moved = False
        for g in space.free:
            keep = codes[g]
            best_v, best_val = keep, current
            for v in space.states(g):
                if v == keep:
                    continue
                codes[g] = v
                val = evaluate(tuple(codes))
                if val > best_val + IMPROVE_TOL_DB or (best_val == -math.inf and val > best_val):
                    best_v, best_val = v, val
            codes[g] = best_v
            if best_v != keep:
                current = best_val
                moved = True
        history.append(current)
        if not moved:
            break
    return codes, current, history


def coordinate_ascent(space: SearchSpace, evaluate: Callable, init: str | SwitchConfig = "random",
                      restarts: int = 8, max_passes: int = 50, seed: int = 0) -> SearchReport:
    """Best-of-restarts group-wise ascent. Each restart after a given init is random."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    base = list(space.base.codes())
    calls = 0

    def counted(codes):
        nonlocal calls
        calls += 1
        return evaluate(codes)

    best_codes, best, trajectory = None, -math.inf, []
    for r in range(restarts):
        codes = list(base)
        if isinstance(init, SwitchConfig) and r == 0:
            codes = list(init.codes())
        else:
            # redraw starts whose model is degenerate: single-group moves rarely escape them
            for _ in range(MAX_REDRAWS):
                codes = space.random_codes(rng)
                if counted(tuple(codes)) > -math.inf:
                    break
        codes, value, history = _ascend(space, counted, codes, max_passes)
        trajectory.append(history)
        if best_codes is None or value > best:
            best, best_codes = value, tuple(codes)
    evaluations = getattr(evaluate, "evaluations", calls)
    settings = {"restarts": restarts, "max_passes": max_passes, "seed": seed,
                "init": "given" if isinstance(init, SwitchConfig) else "random",
                "group_order": "stubs then units, tile by tile"}
    return SearchReport("coordinate_ascent", space.config(best_codes), best, evaluations, trajectory,
                        time.perf_counter() - t0, settings, len(getattr(evaluate, "failures", {})))


@dataclass
class DirectionalOptimum:
    nodes: np.ndarray
    configs: list[SwitchConfig]
    objective_db: np.ndarray


def optimize_per_direction(radiating: RadiatingStructure, geometry: TileGeometry, nodes, *,
                           restarts: int = 2, max_passes: int = 50, seed: int = 0,
                           threads: int = 1, skip=None, tile_map=None) -> DirectionalOptimum:
    """Independent coordinate ascent for each node; node ``k`` uses seed ``seed + k``.

    Nodes flagged in ``skip`` (e.g. no radiation possible) keep an all-PASS
    config without searching.
    """
    nodes = np.asarray(nodes, dtype=int)
    tiles = len(tile_map) if tile_map is not None else 1
    base = SwitchConfig.uniform(geometry, tiles)
    skip = np.zeros(nodes.size, bool) if skip is None else np.asarray(skip, bool)

    def run(k):
        ev = ConfigEvaluator(radiating, geometry, Objective((int(nodes[k]),)), tile_map)
        if skip[k]:
            return base, ev(base)
        rep = coordinate_ascent(SearchSpace(base, geometry), ev, restarts=restarts,
                                max_passes=max_passes, seed=seed + int(nodes[k]))
        return rep.best, rep.best_db

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, range(nodes.size)))
    else:
        results = [run(k) for k in range(nodes.size)]
    return DirectionalOptimum(nodes, [r[0] for r in results], np.array([r[1] for r in results]))


def directional_gain_maps(radiating: RadiatingStructure, geometry: TileGeometry,
                          optimum: DirectionalOptimum, tile_map=None) -> dict[Level, np.ndarray]:
    """Gains of each level at each node, using that node's optimised config."""
    out = {lvl: np.zeros(optimum.nodes.size) for lvl in Level}
    for k, (node, cfg) in enumerate(zip(optimum.nodes, optimum.configs)):
        model = proposed_model(radiating, cfg, geometry, tile_map)
        gm = gain_map(model, [int(node)], breakdown=False)
        for lvl in Level:
            out[lvl][k] = gm[lvl][0]
    return out
