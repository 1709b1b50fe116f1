"""Walk through the building blocks of one proposed tile.

Builds the four switch-unit states, the switched stub tuner and a full
16-antenna tile, then prints the quantities that explain the design:
the 180 degree pass states, the open/short reflections, the matched
16-way node and the loss that realistic switches add.

Run: python demos/tile_walkthrough.py
"""

import numpy as np

from remsim.architecture import (
    TileConfig,
    TileGeometry,
    UnitState,
    build_matching_network,
    build_switch_unit,
    build_tile_network,
    ideal_geometry,
)
from remsim.components import junction
from remsim.netcalc import classify


def deg(z):
    return np.rad2deg(np.angle(z))


def main():
    ideal, real = ideal_geometry(), TileGeometry()

    print("switch unit states (ideal switches | default switches)")
    for state in UnitState:
        a = build_switch_unit(state, ideal).s
        b = build_switch_unit(state, real).s
        print(f"  {state.value:14s} S21 {abs(a[1, 0]):.3f} @ {deg(a[1, 0]):7.1f} deg   "
              f"S11 {abs(a[0, 0]):.3f} @ {deg(a[0, 0]):7.1f} deg | S21 {abs(b[1, 0]):.3f}  S11 {abs(b[0, 0]):.3f}")

    node = junction([50 / 16] + [50.0] * 16)
    print(f"\n16-way node with a 50/16 ohm feed: |S11| = {abs(node.s[0, 0]):.1e}, "
          f"|S_k1|^2 = {abs(node.s[1, 0]) ** 2:.4f} per branch")

    print("\nstub tuner input reflection into 50/16 ohm for a few bit patterns")
    for bits in ([0] * 6, [1, 0, 0, 0, 0, 0], [1, 1, 1, 0, 0, 0], [1, 1, 1, 1, 1, 1]):
        s11 = build_matching_network(bits, ideal).s[0, 0]
        print(f"  bits {bits}: |S11| = {abs(s11):.3f}")

    cfg = TileConfig((1, 0, 0, 0, 1, 1), (UnitState.PASS, UnitState.PASS_180) * 8)
    for name, g in (("ideal", ideal), ("default", real)):
        c = classify(build_tile_network(cfg, g))
        print(f"\n{name} tile: passive {c.passive}, lossless {c.lossless}, "
              f"passivity margin {c.passivity_margin:.3g}")


if __name__ == "__main__":
    main()
