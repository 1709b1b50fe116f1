"""Command-line entry point: ``remsim gain-map|optimize|inspect``.

Exit codes: 0 ok, 1 internal error, 2 input error, 3 refused (search cap).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .architecture import (
    Benchmark,
    SwitchConfig,
    TileGeometry,
    benchmark_model,
    compare,
    tile_partition,
)
from .components import SwitchModel
from .fileio import (
    PatternFileError,
    TouchstoneError,
    load_radiating_structure,
    load_touchstone,
    read_touchstone,
)
from .netcalc import NetworkError, WaveContext, classify
from .optimize import (
    ConfigEvaluator,
    Objective,
    SearchCapExceeded,
    SearchSpace,
    coordinate_ascent,
    directional_gain_maps,
    exhaustive_search,
    optimize_per_direction,
)
from .radiating import AngularGrid, PassivityError, synthesize_array
from .rems import GainMap, Level

log = logging.getLogger("remsim")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_REFUSED = 0, 1, 2, 3

MAP_COLUMNS = ("theta_deg", "phi_deg", "G_rems_dBi", "G_t_dBi", "G_r_dBi",
               "eta_matching", "eta_tuning", "eta_radiating", "D_dBi")


class ConfigError(ValueError):
    """Schema violation; the message names the offending field."""


# -- configuration ----------------------------------------------------------

_RUN_KEYS = {"frequency", "grid_deg", "radiating", "geometry", "switch", "benchmarks",
             "proposed", "objective", "search", "output", "seed"}
_SYNTH_KEYS = {"type", "rows", "cols", "spacing", "exponent", "polarization", "efficiency", "tile_rows",
               "tile_cols"}
_FILE_KEYS = {"type", "touchstone", "patterns", "rows", "cols", "tile_rows", "tile_cols"}
_GEOMETRY_KEYS = {f.name for f in fields(TileGeometry)} - {"switch", "antennas_per_tile"}
_SWITCH_KEYS = {"type", "insertion_loss", "isolation", "return_loss_on", "return_loss_off",
                "transmission_phase", "z_ref", "on", "off"}
_PROPOSED_KEYS = {"config", "hex", "optimize", "restarts", "max_passes"}
_OBJECTIVE_KEYS = {"directions_deg"}
_SEARCH_KEYS = {"method", "restarts", "max_passes", "cap", "free", "init"}


def _check_keys(obj, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    return obj


def _num(obj: dict, key: str, where: str, default=None, positive=False, integer=False):
    v = obj.get(key, default)
    if v is None:
        raise ConfigError(f"{where}.{key}: required")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{where}.{key}: expected an integer")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key}: must be positive")
    return int(v) if integer else float(v)


@dataclass
class RunConfig:
    frequency: float = 12e9
    grid_deg: float = 1.0
    radiating: dict = field(default_factory=lambda: {"type": "synthetic", "rows": 4, "cols": 4})
    geometry: dict = field(default_factory=dict)
    switch: dict = field(default_factory=lambda: {"type": "parametric"})
    benchmarks: list = field(default_factory=lambda: [b.value for b in Benchmark])
    proposed: dict = field(default_factory=lambda: {"optimize": "per_direction"})
    objective: dict = field(default_factory=dict)
    search: dict = field(default_factory=dict)
    output: str = "out"
    seed: int = 0
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path = Path(".")) -> "RunConfig":
        _check_keys(data, _RUN_KEYS, "config")
        cfg = cls(base_dir=base_dir)
        for key in _RUN_KEYS & set(data):
            setattr(cfg, key, data[key])
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
        return cls.from_dict(data, path.parent)

    def validate(self):
        _num(vars(self), "frequency", "config", positive=True)
        _num(vars(self), "grid_deg", "config", positive=True)
        _num(vars(self), "seed", "config", integer=True)
        r = self.radiating
        kind = r.get("type", "synthetic") if isinstance(r, dict) else None
        if kind == "synthetic":
            _check_keys(r, _SYNTH_KEYS, "radiating")
            for k in ("rows", "cols", "tile_rows", "tile_cols"):
                if k in r:
                    _num(r, k, "radiating", positive=True, integer=True)
            for k in ("spacing", "efficiency"):
                if k in r:
                    _num(r, k, "radiating", positive=True)
        elif kind == "file":
            _check_keys(r, _FILE_KEYS, "radiating")
            for k in ("touchstone", "patterns"):
                if not isinstance(r.get(k), str):
                    raise ConfigError(f"radiating.{k}: path required")
        else:
            raise ConfigError("radiating.type: must be 'synthetic' or 'file'")
        _check_keys(self.geometry, _GEOMETRY_KEYS, "geometry")
        s = _check_keys(self.switch, _SWITCH_KEYS, "switch")
        if s.get("type", "parametric") not in ("parametric", "ideal", "touchstone"):
            raise ConfigError("switch.type: must be 'parametric', 'ideal' or 'touchstone'")
        if not isinstance(self.benchmarks, list):
            raise ConfigError("benchmarks: expected a list")
        for b in self.benchmarks:
            if b not in Benchmark.__members__:
                raise ConfigError(f"benchmarks: unknown architecture {b!r}")
        p = _check_keys(self.proposed, _PROPOSED_KEYS, "proposed")
        if "optimize" in p and p["optimize"] not in ("per_direction",):
            raise ConfigError("proposed.optimize: only 'per_direction' is supported")
        o = _check_keys(self.objective, _OBJECTIVE_KEYS, "objective")
        for i, d in enumerate(o.get("directions_deg", [])):
            if not (isinstance(d, list) and len(d) == 2 and all(isinstance(x, (int, float)) for x in d)):
                raise ConfigError(f"objective.directions_deg[{i}]: expected [theta_deg, phi_deg]")
            if not 0 <= d[0] <= 90:
                raise ConfigError(f"objective.directions_deg[{i}]: theta {d[0]} is outside the front "
                                  "hemisphere [0, 90] deg")
        s = _check_keys(self.search, _SEARCH_KEYS, "search")
        if s.get("method", "coordinate_ascent") not in ("exhaustive", "coordinate_ascent"):
            raise ConfigError("search.method: must be 'exhaustive' or 'coordinate_ascent'")
        if s.get("free", "all") not in ("all", "units", "matching"):
            raise ConfigError("search.free: must be 'all', 'units' or 'matching'")

    def path(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def echo(self) -> dict:
        return {k: getattr(self, k) for k in sorted(_RUN_KEYS)}


# -- model assembly ---------------------------------------------------------


@dataclass
class Setup:
    ctx: WaveContext
    grid: AngularGrid
    radiating: object
    geometry: TileGeometry
    tile_map: list


def _switch_model(cfg: RunConfig) -> SwitchModel:
    s = dict(cfg.switch)
    kind = s.pop("type", "parametric")
    if kind == "ideal":
        return SwitchModel.ideal()
    if kind == "touchstone":
        for k in ("on", "off"):
            if k not in s:
                raise ConfigError(f"switch.{k}: path required for measured switches")
        return SwitchModel.from_networks(load_touchstone(cfg.path(s["on"]), cfg.frequency),
                                         load_touchstone(cfg.path(s["off"]), cfg.frequency))
    s.pop("on", None), s.pop("off", None)
    return SwitchModel(**{k: float(v) for k, v in s.items()})


def build_setup(cfg: RunConfig) -> Setup:
    ctx = WaveContext(cfg.frequency)
    try:
        grid = AngularGrid.regular(cfg.grid_deg)
    except ValueError as exc:
        raise ConfigError(f"grid_deg: {exc}") from None
    r = dict(cfg.radiating)
    kind = r.pop("type", "synthetic")
    rows, cols = int(r.pop("rows", 4)), int(r.pop("cols", 4))
    t_rows, t_cols = int(r.pop("tile_rows", min(rows, 4))), int(r.pop("tile_cols", min(cols, 4)))
    if kind == "synthetic":
        radiating = synthesize_array(rows, cols, **r, ctx=ctx, grid=grid)
    else:
        for k in ("touchstone", "patterns"):
            if not cfg.path(r[k]).exists():
                raise FileNotFoundError(f"radiating.{k}: no such file {cfg.path(r[k])}")
        radiating = load_radiating_structure(cfg.path(r["touchstone"]), cfg.path(r["patterns"]), grid, ctx)
        if radiating.nports != rows * cols:
            raise ConfigError(f"radiating: {radiating.nports} ports but rows x cols = {rows * cols}")
    try:
        tile_map = tile_partition(rows, cols, t_rows, t_cols)
    except ValueError as exc:
        raise ConfigError(f"radiating: {exc}") from None
    geometry = TileGeometry(antennas_per_tile=t_rows * t_cols, switch=_switch_model(cfg),
                            **{k: float(v) if v is not None else None for k, v in cfg.geometry.items()})
    return Setup(ctx, grid, radiating, geometry, tile_map)


def _fixed_config(cfg: RunConfig, setup: Setup) -> SwitchConfig | None:
    p = cfg.proposed
    if "config" in p:
        conf = SwitchConfig.from_json(p["config"])
    elif "hex" in p:
        conf = SwitchConfig.from_hex(p["hex"], setup.geometry)
    else:
        return None
    if len(conf.tiles) != len(setup.tile_map):
        raise ConfigError(f"proposed: config has {len(conf.tiles)} tiles, array has {len(setup.tile_map)}")
    return conf


# -- outputs ----------------------------------------------------------------


def _db(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 10 * np.log10(x)


def _fmt(v) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _sorted_order(theta, phi):
    return np.lexsort((np.round(phi, 12), np.round(theta, 12)))


def write_map_csv(path: Path, theta, phi, columns: dict[str, np.ndarray]) -> None:
    order = _sorted_order(theta, phi)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MAP_COLUMNS)
        for k in order:
            w.writerow([_fmt(np.rad2deg(theta[k])), _fmt(np.rad2deg(phi[k]))]
                       + [_fmt(columns[c][k]) for c in MAP_COLUMNS[2:]])


def _map_columns(gm: GainMap) -> dict[str, np.ndarray]:
    return {
        "G_rems_dBi": _db(gm[Level.REMS]),
        "G_t_dBi": _db(gm[Level.TUNING]),
        "G_r_dBi": _db(gm[Level.RADIATING]),
        "eta_matching": gm.eta_matching,
        "eta_tuning": gm.eta_tuning,
        "eta_radiating": gm.eta_radiating,
        "D_dBi": _db(gm.directivity),
    }


def _versions() -> dict:
    import scipy

    return {"remsim": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def _directional_map(setup: Setup, nodes, cfg: RunConfig, threads: int) -> tuple[GainMap, list]:
    """PROPOSED map with the switch states optimised separately for every node."""
    p = cfg.proposed
    g_r = benchmark_model(Benchmark.ALL_DIGITAL_IDEAL, setup.radiating).gains(nodes)
    skip = ~(g_r > 1e-12 * np.nanmax(g_r))
    opt = optimize_per_direction(setup.radiating, setup.geometry, nodes,
                                 restarts=int(p.get("restarts", 2)), max_passes=int(p.get("max_passes", 50)),
                                 seed=cfg.seed, threads=threads, skip=skip, tile_map=setup.tile_map)
    gains = directional_gain_maps(setup.radiating, setup.geometry, opt, setup.tile_map)
    gm = GainMap(setup.grid, np.asarray(nodes), gains)
    # efficiency breakdown per node from its own optimised model
    eta = {k: np.full(len(nodes), np.nan) for k in ("m", "t", "r", "d")}
    for k, (node, conf) in enumerate(zip(nodes, opt.configs)):
        one = benchmark_model(Benchmark.PROPOSED, setup.radiating, conf, setup.geometry,
                              setup.tile_map).gain_map([int(node)])
        eta["m"][k], eta["t"][k] = one.eta_matching[0], one.eta_tuning[0]
        eta["r"][k], eta["d"][k] = one.eta_radiating[0], one.directivity[0]
    gm.eta_matching, gm.eta_tuning, gm.eta_radiating, gm.directivity = eta["m"], eta["t"], eta["r"], eta["d"]
    return gm, opt.configs


def cmd_gain_map(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    t0 = time.perf_counter()
    setup = build_setup(cfg)
    nodes = setup.grid.hemisphere()
    fixed = _fixed_config(cfg, setup)
    maps: dict[str, GainMap] = {}
    chains: dict[str, int] = {}
    directional_configs = None
    for name in cfg.benchmarks:
        kind = Benchmark(name)
        if kind in (Benchmark.PROPOSED, Benchmark.PROPOSED_IDEAL) and fixed is None:
            if directional_configs is None:
                full, directional_configs = _directional_map(setup, nodes, cfg, threads)
            gm = GainMap(setup.grid, nodes, dict(full.gains))
            gm.eta_matching, gm.eta_tuning = full.eta_matching, full.eta_tuning
            gm.eta_radiating, gm.directivity = full.eta_radiating, full.directivity
            if kind is Benchmark.PROPOSED_IDEAL:
                gm.gains[Level.REMS] = gm.gains[Level.TUNING]
                gm.eta_matching = np.ones(nodes.size)
            maps[name], chains[name] = gm, len(setup.tile_map)
            continue
        recipe = benchmark_model(kind, setup.radiating, fixed, setup.geometry, setup.tile_map)
        maps[name], chains[name] = recipe.gain_map(nodes), recipe.rf_chains

    g_r = next(iter(maps.values()))[Level.RADIATING]
    report = compare({k: v[Level.REMS] for k, v in maps.items()}, g_r, chains)

    out.mkdir(parents=True, exist_ok=True)
    theta, phi = setup.grid.node_theta[nodes], setup.grid.node_phi[nodes]
    for name, gm in maps.items():
        write_map_csv(out / f"gain_map_{name}.csv", theta, phi, _map_columns(gm))
    order = _sorted_order(theta, phi)
    names = list(maps)
    with (out / "comparison.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta_deg", "phi_deg"] + [f"rel_{n}_dB" for n in names] + [f"cam_{n}_dB" for n in names])
        for k in order:
            w.writerow([_fmt(np.rad2deg(theta[k])), _fmt(np.rad2deg(phi[k]))]
                       + [_fmt(report.relative_db[n][k]) for n in names]
                       + [_fmt(report.cam_db[n][k]) for n in names])
    summary = {
        "command": "gain-map",
        "config": cfg.echo(),
        "versions": _versions(),
        "nodes": int(nodes.size),
        "rf_chains": chains,
        **report.to_json(),
        "wall_seconds": time.perf_counter() - t0,
    }
    if directional_configs is not None:
        summary["proposed_configs"] = "optimised per direction (see proposed_configs.csv)"
        with (out / "proposed_configs.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta_deg", "phi_deg", "config_hex"])
            for k in order:
                w.writerow([_fmt(np.rad2deg(theta[k])), _fmt(np.rad2deg(phi[k])),
                            directional_configs[k].to_hex(setup.geometry)])
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=str) + "\n")
    return summary


def cmd_optimize(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    setup = build_setup(cfg)
    dirs = cfg.objective.get("directions_deg") or [[0.0, 0.0]]
    nodes = tuple(setup.grid.nearest(np.deg2rad(t), np.deg2rad(p))[0] for t, p in dirs)
    evaluator = ConfigEvaluator(setup.radiating, setup.geometry, Objective(nodes), setup.tile_map)
    s = cfg.search
    base = _fixed_config(cfg, setup) or SwitchConfig.uniform(setup.geometry, len(setup.tile_map))
    free = s.get("free", "all")
    if free == "units":
        space = SearchSpace.units_only(base, setup.geometry)
    elif free == "matching":
        space = SearchSpace.matching_only(base, setup.geometry)
    else:
        space = SearchSpace(base, setup.geometry)
    if s.get("method", "coordinate_ascent") == "exhaustive":
        report = exhaustive_search(space, evaluator, cap=int(s.get("cap", 2**24)))
    else:
        init = base if s.get("init") == "given" else "random"
        report = coordinate_ascent(space, evaluator, init=init, restarts=int(s.get("restarts", 8)),
                                   max_passes=int(s.get("max_passes", 50)), seed=cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    data = {"command": "optimize", "config": cfg.echo(), "versions": _versions(),
            "objective_nodes_deg": [[float(np.rad2deg(setup.grid.node_theta[n])),
                                     float(np.rad2deg(setup.grid.node_phi[n]))] for n in nodes],
            **report.to_json(setup.geometry)}
    (out / "search_report.json").write_text(json.dumps(data, indent=2, default=str) + "\n")
    (out / "best_config.json").write_text(json.dumps(report.best.to_json(), indent=2) + "\n")
    (out / "best_config.hex").write_text(report.best.to_hex(setup.geometry) + "\n")
    return data


def cmd_inspect(path: Path, grid_deg: float) -> str:
    suffix = path.suffix.lower()
    if not path.exists():
        raise FileNotFoundError(f"no such file {path}")
    if suffix == ".json":
        cfg = RunConfig.load(path)
        return json.dumps({"valid": True, "config": cfg.echo()}, indent=2, default=str)
    if suffix == ".csv":
        from .fileio import load_patterns

        grid = AngularGrid.regular(grid_deg)
        pats = load_patterns(path, grid)
        lines = [f"{path.name}: {len(pats)} port pattern(s) on a {grid_deg:g} deg grid"]
        lines += [f"  port {m}: radiated power per unit wave {p.norm2():.6g}" for m, p in enumerate(pats, 1)]
        return "\n".join(lines)
    data = read_touchstone(path)
    net, f = data.at()
    c = classify(net)
    return "\n".join([
        f"{path.name}: {data.nports}-port, {data.frequencies.size} frequency point(s), "
        f"R = {data.z_ref:g} ohm, first at {f:.6g} Hz",
        f"  passive: {c.passive} (margin {c.passivity_margin:.3g})",
        f"  lossless: {c.lossless} (deviation {c.lossless_margin:.3g})",
        f"  reciprocal: {c.reciprocal} (asymmetry {c.reciprocity_margin:.3g})",
    ])


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="remsim", description="Reconfigurable antenna array simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("gain-map", "gain maps and architecture comparison"),
                      ("optimize", "switch-state search for an objective")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("config", type=Path)
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--grid-deg", type=float, help="angular grid step (overrides config)")
    p = sub.add_parser("inspect", help="summarise a Touchstone, pattern CSV or config file")
    p.add_argument("path", type=Path)
    p.add_argument("--grid-deg", type=float, default=1.0)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "inspect":
            print(cmd_inspect(args.path, args.grid_deg))
            return EXIT_OK
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.grid_deg is not None:
            cfg.grid_deg = args.grid_deg
            cfg.validate()
        out = args.out or cfg.path(cfg.output)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        run = cmd_gain_map if args.command == "gain-map" else cmd_optimize
        summary = run(cfg, out, args.threads)
        print(json.dumps({k: v for k, v in summary.items() if k not in ("config", "versions")},
                         indent=2, default=str)[:4000])
        return EXIT_OK
    except SearchCapExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ConfigError, FileNotFoundError, TouchstoneError, PatternFileError, PassivityError,
            NetworkError, ValueError, KeyError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - last-resort reporting
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
