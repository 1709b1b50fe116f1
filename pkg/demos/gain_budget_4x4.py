"""Gain budget of the switch-based tile on a synthetic 4x4 array.

Optimises the 38 switch states for a handful of directions with
coordinate ascent and compares the resulting REMS gain against the
all-digital benchmarks. For each direction the REMS gain is split into
matching, tuning and radiation efficiency times directivity.

Run: python demos/gain_budget_4x4.py   (about ten seconds)
"""

import numpy as np

from remsim.architecture import Benchmark, SwitchConfig, TileGeometry, benchmark_model
from remsim.optimize import ConfigEvaluator, Objective, SearchSpace, coordinate_ascent
from remsim.radiating import AngularGrid, synthesize_array
from remsim.rems import Level

DIRECTIONS_DEG = [(0, 0), (20, 0), (30, 45), (45, 90), (60, 180)]


def db(x):
    return 10 * np.log10(x)


def main():
    grid = AngularGrid.regular(5.0)
    rad = synthesize_array(4, 4, 0.25, grid=grid)
    geometry = TileGeometry()
    print(f"synthetic 4x4 array, mean |S_mm| = {np.mean(np.abs(np.diag(rad.s_rr))):.2f}")

    nodes = [grid.nearest(np.deg2rad(t), np.deg2rad(p))[0] for t, p in DIRECTIONS_DEG]
    g_r = benchmark_model(Benchmark.ALL_DIGITAL_IDEAL, rad).gains(nodes)
    g_c = benchmark_model(Benchmark.ALL_DIGITAL_CONVENTIONAL, rad).gains(nodes)

    header = "theta  phi |  G_R   G_conv  G_T   G_REMS | eta_m  eta_t  eta_r    D   (dB)"
    print(header)
    for (theta, phi), node, gr, gc in zip(DIRECTIONS_DEG, nodes, g_r, g_c):
        ev = ConfigEvaluator(rad, geometry, Objective((node,)))
        rep = coordinate_ascent(SearchSpace(SwitchConfig.uniform(geometry), geometry), ev, restarts=2, seed=node)
        gm = benchmark_model(Benchmark.PROPOSED, rad, rep.best, geometry).gain_map([node])
        parts = [gm.eta_matching[0], gm.eta_tuning[0], gm.eta_radiating[0], gm.directivity[0]]
        print(f"{theta:5d} {phi:4d} | {db(gr):5.1f}  {db(gc):5.1f}  {db(gm[Level.TUNING][0]):5.1f}  "
              f"{db(gm[Level.REMS][0]):5.1f} | " + "  ".join(f"{db(p):5.1f}" for p in parts))
    print("\nG_conv uses 16 RF chains, the switch tile uses one; divide by the chain count for CAM.")


if __name__ == "__main__":
    main()
