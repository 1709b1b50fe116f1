"""Touchstone v1 and far-field pattern CSV readers/writers."""

from __future__ import annotations

import csv
import logging
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .netcalc import MultiportNetwork, WaveContext, renormalize
from .radiating import AngularGrid, FarFieldPattern, RadiatingStructure

log = logging.getLogger(__name__)

_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_SUFFIX = re.compile(r"\.s(\d+)p$", re.IGNORECASE)


class TouchstoneError(ValueError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


class PatternFileError(ValueError):
    pass


@dataclass(frozen=True)
class TouchstoneData:
    frequencies: np.ndarray  # Hz
    s: np.ndarray  # (nfreq, n, n)
    z_ref: float

    @property
    def nports(self) -> int:
        return self.s.shape[1]

    def at(self, frequency: float | None = None) -> tuple[MultiportNetwork, float]:
        """Network at the sample nearest ``frequency`` (first sample if None)."""
        k = 0 if frequency is None else int(np.argmin(np.abs(self.frequencies - frequency)))
        f = float(self.frequencies[k])
        return MultiportNetwork(self.s[k], self.z_ref, ctx=WaveContext(f, self.z_ref)), f


def _parse_options(tokens, path, lineno):
    unit, param, fmt, ref = "ghz", "s", "ma", 50.0
    toks = [t.lower() for t in tokens]
    i = 0
    while i < len(toks):
        t = toks[i]
        if t in _FREQ_UNITS:
            unit = t
        elif t in ("s", "y", "z", "g", "h"):
            param = t
        elif t in ("ri", "ma", "db"):
            fmt = t
        elif t == "r":
            if i + 1 >= len(toks):
                raise TouchstoneError(path, lineno, "option 'R' needs a value")
            try:
                ref = float(toks[i + 1])
            except ValueError:
                raise TouchstoneError(path, lineno, f"bad reference impedance {tokens[i + 1]!r}") from None
            i += 1
        else:
            raise TouchstoneError(path, lineno, f"unknown option {tokens[i]!r}")
        i += 1
    if param != "s":
        raise TouchstoneError(path, lineno, f"only S parameters are supported, got {param.upper()}")
    if ref <= 0:
        raise TouchstoneError(path, lineno, "reference impedance must be positive")
    return _FREQ_UNITS[unit], fmt, ref


def _to_complex(x, y, fmt):
    if fmt == "ri":
        return x + 1j * y
    mag = x if fmt == "ma" else 10 ** (x / 20)
    return mag * np.exp(1j * np.deg2rad(y))


def read_touchstone(path) -> TouchstoneData:
    path = Path(path)
    text = path.read_text()
    option = None
    values: list[tuple[float, int]] = []
    first_row_len = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if option is not None:
                raise TouchstoneError(path, lineno, "duplicate option line")
            option = _parse_options(line[1:].split(), path, lineno)
            continue
        if line.startswith("["):
            raise TouchstoneError(path, lineno, "Touchstone v2 keywords are not supported")
        toks = line.split()
        if first_row_len is None:
            first_row_len = len(toks)
        for t in toks:
            try:
                values.append((float(t), lineno))
            except ValueError:
                raise TouchstoneError(path, lineno, f"not a number: {t!r}") from None
    if not values:
        raise TouchstoneError(path, 0, "no data rows")
    scale, fmt, ref = option or _parse_options([], path, 0)

    m = _SUFFIX.search(path.name)
    n_suffix = int(m.group(1)) if m else None
    n_data = {3: 1, 9: 2}.get(first_row_len, (first_row_len - 1) // 2)
    n = n_suffix
    if n is None or len(values) % (1 + 2 * n * n):
        if n is not None and n_data != n:
            warnings.warn(f"{path.name}: data look like a {n_data}-port, not {n}-port as the suffix says",
                          RuntimeWarning, stacklevel=2)
        n = n_data
    per = 1 + 2 * n * n
    if n < 1 or len(values) % per:
        raise TouchstoneError(path, values[-1][1], f"incomplete record: {len(values)} numbers is not a multiple of {per}")
    arr = np.array([v for v, _ in values]).reshape(-1, per)
    freqs = arr[:, 0] * scale
    if np.any(np.diff(freqs) <= 0):
        bad = int(np.argmax(np.diff(freqs) <= 0)) + 1
        raise TouchstoneError(path, values[bad * per][1], "frequencies must increase")
    pairs = arr[:, 1:].reshape(-1, n * n, 2)
    s = _to_complex(pairs[..., 0], pairs[..., 1], fmt).reshape(-1, n, n)
    if n == 2:
        s = np.swapaxes(s, 1, 2)  # 2-port data are ordered S11 S21 S12 S22
    return TouchstoneData(freqs, s, ref)


def load_touchstone(path, frequency: float | None = None) -> MultiportNetwork:
    """Read a .sNp file; with several samples, the one nearest ``frequency`` is used."""
    data = read_touchstone(path)
    net, f = data.at(frequency)
    if data.frequencies.size > 1:
        log.info("%s: using sample at %.6g Hz", path, f)
    return net


def write_touchstone(path, net: MultiportNetwork, frequency: float, fmt: str = "RI") -> None:
    fmt = fmt.upper()
    if fmt not in ("RI", "MA", "DB"):
        raise ValueError("format must be RI, MA or DB")
    z = net.z_ref
    if not np.allclose(z, z[0]) or abs(z[0].imag) > 0:
        raise ValueError("Touchstone v1 needs one real reference impedance")
    s = net.s.T if net.nports == 2 else net.s
    flat = s.ravel()
    if fmt == "RI":
        cols = np.stack([flat.real, flat.imag], axis=1)
    else:
        mag = np.abs(flat)
        first = mag if fmt == "MA" else 20 * np.log10(np.maximum(mag, 1e-300))
        cols = np.stack([first, np.rad2deg(np.angle(flat))], axis=1)
    lines = ["! written by remsim", f"# HZ S {fmt} R {z[0].real:.17g}"]
    nums = [f"{x:.17g}" for x in cols.ravel()]
    n = net.nports
    if n <= 2:
        lines.append(" ".join([f"{frequency:.17g}"] + nums))
    else:
        per_row = 2 * n
        for r in range(n):
            chunk = nums[r * per_row:(r + 1) * per_row]
            lines.append(" ".join(([f"{frequency:.17g}"] if r == 0 else []) + chunk))
    Path(path).write_text("\n".join(lines) + "\n")


PATTERN_COLUMNS = ("port", "theta_deg", "phi_deg", "re_Etheta", "im_Etheta", "re_Ephi", "im_Ephi")


def load_patterns(path, grid: AngularGrid, ctx: WaveContext | None = None,
                  snap_tol_deg: float | None = None) -> list[FarFieldPattern]:
    """Read far-field E-patterns (V, r-normalised) and convert them to power-wave patterns.

    Rows are snapped to the nearest grid node; the largest snap distance is
    logged. Missing or duplicate nodes are errors.
    """
    ctx = ctx or WaveContext(12e9)
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec) or rec[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and rec[0].strip().lower() == "port":
                continue
            if len(rec) != len(PATTERN_COLUMNS):
                raise PatternFileError(f"{path}:{lineno}: expected {len(PATTERN_COLUMNS)} columns, got {len(rec)}")
            try:
                rows.append([float(c) for c in rec] + [lineno])
            except ValueError:
                raise PatternFileError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise PatternFileError(f"{path}: no rows")
    data = np.array(rows)
    ports = np.unique(data[:, 0]).astype(int)
    nth, nph = grid.shape
    dth = grid.theta[1] - grid.theta[0] if nth > 1 else 1.0
    theta = np.deg2rad(data[:, 1])
    phi = np.mod(np.deg2rad(data[:, 2]), 2 * np.pi)
    it = np.clip(np.rint((theta - grid.theta[0]) / dth).astype(int), 0, nth - 1)
    dph = 2 * np.pi / nph
    ip = np.mod(np.rint((phi - grid.phi[0]) / dph).astype(int), nph)
    dev = np.maximum(np.abs(grid.theta[it] - theta),
                     np.abs(np.angle(np.exp(1j * (grid.phi[ip] - phi)))))
    max_dev = float(np.rad2deg(dev.max()))
    log.info("%s: max snap deviation %.3g deg", path, max_dev)
    if snap_tol_deg is not None and max_dev > snap_tol_deg:
        raise PatternFileError(f"{path}: node snap deviation {max_dev:.3g} deg exceeds {snap_tol_deg}")
    node = it * nph + ip
    scale = 1.0 / np.sqrt(ctx.z0)
    out = []
    for port in ports:
        sel = data[:, 0] == port
        nodes = node[sel]
        uniq, counts = np.unique(nodes, return_counts=True)
        if np.any(counts > 1):
            dup = uniq[counts > 1][0]
            line = int(data[sel][nodes == dup][1, -1])
            raise PatternFileError(f"{path}:{line}: duplicate node for port {port}")
        missing = np.setdiff1d(np.arange(grid.size), nodes)
        if missing.size:
            shown = ", ".join(
                f"({np.rad2deg(grid.node_theta[k]):.6g}, {np.rad2deg(grid.node_phi[k]):.6g})"
                for k in missing[:10]
            )
            raise PatternFileError(f"{path}: port {port} misses {missing.size} nodes, first: {shown}")
        vals = np.zeros((grid.size, 2), dtype=complex)
        d = data[sel]
        vals[nodes, 0] = (d[:, 3] + 1j * d[:, 4]) * scale
        vals[nodes, 1] = (d[:, 5] + 1j * d[:, 6]) * scale
        out.append(FarFieldPattern(vals, grid))
    return out


def write_patterns(path, patterns, ctx: WaveContext | None = None) -> None:
    """Inverse of :func:`load_patterns`; ports are numbered from 1."""
    ctx = ctx or WaveContext(12e9)
    scale = np.sqrt(ctx.z0)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PATTERN_COLUMNS)
        for m, p in enumerate(patterns, start=1):
            th = np.rad2deg(p.grid.node_theta)
            ph = np.rad2deg(p.grid.node_phi)
            e = p.values * scale
            for k in range(p.grid.size):
                w.writerow([m, f"{th[k]:.12g}", f"{ph[k]:.12g}",
                            *(repr(float(x)) for x in (e[k, 0].real, e[k, 0].imag,
                                                       e[k, 1].real, e[k, 1].imag))])


def load_radiating_structure(touchstone_path, patterns_path, grid: AngularGrid,
                             ctx: WaveContext) -> RadiatingStructure:
    """Ingest S_RR and element patterns; rejects data that violate passivity."""
    net = load_touchstone(touchstone_path, ctx.frequency)
    pats = load_patterns(patterns_path, grid, ctx)
    if len(pats) != net.nports:
        raise ValueError(f"{net.nports}-port coupling data but {len(pats)} patterns")
    if not np.allclose(net.z_ref, ctx.r0):
        net = renormalize(net, ctx.r0)
    fields = np.stack([p.values for p in pats], axis=2)
    structure = RadiatingStructure(net.s, fields, grid, ctx, ctx.r0)
    structure.check_passive()
    return structure
