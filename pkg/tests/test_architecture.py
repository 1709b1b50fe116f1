import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remsim.architecture import (
    Benchmark,
    SwitchConfig,
    TileConfig,
    TileGeometry,
    UnitState,
    benchmark_model,
    build_array_tuning,
    build_matching_network,
    build_switch_unit,
    build_tile,
    build_tile_network,
    compare,
    ideal_geometry,
    stub_reflection,
    tile_partition,
)
from remsim.components import junction
from remsim.netcalc import classify
from remsim.radiating import synthesize_array
from remsim.rems import Level, gain_map, power_metrics, solve_state

IDEAL = ideal_geometry()
MINI = ideal_geometry(antennas_per_tile=2)


def random_tile(rng, geometry=IDEAL):
    codes = rng.integers(0, 4, geometry.groups_per_tile)
    return TileConfig.from_codes(codes, geometry.stub_count)


class TestConfig:
    def test_default_bit_count(self):
        assert TileGeometry().bits_per_tile == 38

    def test_unit_codes(self):
        assert [UnitState.from_code(c) for c in range(4)] == [
            UnitState.OPEN_REFLECT, UnitState.PASS, UnitState.PASS_180, UnitState.SHORT_REFLECT]

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 2**38 - 1), min_size=1, max_size=4))
    def test_hex_round_trip(self, values):
        g = TileGeometry()
        cfg = SwitchConfig(tuple(TileConfig.from_int(v, 3, 16) for v in values))
        text = cfg.to_hex(g)
        assert all(len(part) == 10 for part in text.split("."))
        assert SwitchConfig.from_hex(text, g) == cfg
        assert [t.to_int() for t in cfg.tiles] == values

    def test_json_round_trip(self, rng):
        cfg = SwitchConfig((random_tile(rng), random_tile(rng)))
        assert SwitchConfig.from_json(json.dumps(cfg.to_json())) == cfg
        assert SwitchConfig.from_codes(cfg.codes(), IDEAL) == cfg

    def test_bit_order(self):
        # stub 0 series-connect is bit 0; unit 0 top switch is bit 6
        cfg = TileConfig((1, 0, 0, 0, 0, 0), (UnitState.PASS,) + (UnitState.OPEN_REFLECT,) * 15)
        assert cfg.to_int() == 0b1000001

    def test_rejects(self):
        with pytest.raises(ValueError):
            TileConfig((1, 2), ())
        with pytest.raises(ValueError):
            TileConfig.from_int(2**38, 3, 16)
        with pytest.raises(ValueError):
            TileGeometry(series_length=-1)


class TestMatchingNetwork:
    def test_all_disconnected_is_two_eighth_lines(self):
        net = build_matching_network([0] * 6, IDEAL)
        # open stubs leave 2-way wires at the taps: S21 is the line phase alone
        assert net.s[1, 0] == pytest.approx(np.exp(-1j * np.pi / 2), abs=1e-12)
        assert abs(net.s[0, 0]) < 1e-12

    def test_lossless_with_ideal_switches(self, rng):
        for _ in range(10):
            bits = rng.integers(0, 2, 6)
            assert abs(classify(build_matching_network(bits, IDEAL)).lossless_margin) < 1e-9

    def test_shorted_zero_length_stub_shorts_the_tap(self):
        g = ideal_geometry(stub_length=0.0, stub_count=1)
        net = build_matching_network([1, 1], g)
        assert abs(net.s[0, 0]) == pytest.approx(1.0, abs=1e-9)
        assert net.s[0, 0] == pytest.approx(-1.0, abs=1e-9)

    def test_stub_terminations(self):
        # lambda/10 stub: open and short inputs are -j cot and j tan of 36 degrees
        beta = 2 * np.pi / 10
        z_open = stub_reflection(True, False, IDEAL).s[0, 0]
        z_short = stub_reflection(True, True, IDEAL).s[0, 0]
        assert z_open == pytest.approx(np.exp(-2j * beta), abs=1e-12)
        assert z_short == pytest.approx(-np.exp(-2j * beta), abs=1e-12)
        assert stub_reflection(False, True, IDEAL).s[0, 0] == pytest.approx(1.0)

    def test_bad_bit_count(self):
        with pytest.raises(ValueError):
            build_matching_network([0, 1], IDEAL)


class TestSwitchUnit:
    def test_pass_phases(self):
        p = build_switch_unit(UnitState.PASS, IDEAL).s[1, 0]
        q = build_switch_unit(UnitState.PASS_180, IDEAL).s[1, 0]
        assert abs(p) == pytest.approx(1.0, abs=1e-12) and abs(q) == pytest.approx(1.0, abs=1e-12)
        assert abs(np.angle(q / p)) == pytest.approx(np.pi, abs=1e-9)

    def test_reflect_states(self):
        o = build_switch_unit(UnitState.OPEN_REFLECT, IDEAL).s
        s = build_switch_unit(UnitState.SHORT_REFLECT, IDEAL).s
        assert abs(o[0, 0]) == pytest.approx(1.0, abs=1e-9) and abs(o[1, 0]) < 1e-12
        assert abs(s[0, 0]) == pytest.approx(1.0, abs=1e-9) and abs(s[1, 0]) < 1e-12
        assert abs(np.angle(s[0, 0] / o[0, 0])) == pytest.approx(np.pi, abs=1e-9)

    @pytest.mark.parametrize("state", list(UnitState))
    def test_realistic_passive_lossy(self, state):
        c = classify(build_switch_unit(state, TileGeometry()))
        assert c.passive and not c.lossless and c.reciprocal


class TestTile:
    def test_splitter_matched(self):
        s = junction([50 / 16] + [50] * 16).s
        assert abs(s[0, 0]) < 1e-12

    def test_ideal_lossless(self, rng):
        for _ in range(5):
            cfg = TileConfig.from_codes([*rng.integers(0, 4, 3), *rng.choice([1, 2], 16)], 3)
            assert abs(classify(build_tile_network(cfg, IDEAL)).lossless_margin) < 1e-8

    def test_realistic_lossy(self, rng):
        c = classify(build_tile_network(random_tile(rng, TileGeometry()), TileGeometry()))
        assert c.passive and c.passivity_margin < 0

    def test_all_open_blocks_antennas(self):
        g = TileGeometry()
        cfg = TileConfig((0,) * 6, (UnitState.OPEN_REFLECT,) * 16)
        t = build_tile(cfg, g)
        assert np.linalg.norm(t.rt) < 0.05  # 20 dB switch isolation, attenuated twice

    def test_reference_is_r0(self, rng):
        net = build_tile_network(random_tile(rng, TileGeometry()), TileGeometry())
        np.testing.assert_allclose(net.z_ref, 50.0)

    def test_geometry_mismatch(self):
        with pytest.raises(ValueError):
            build_tile(TileConfig((0,) * 6, (UnitState.PASS,) * 3), IDEAL)


class TestArray:
    def test_partition(self):
        tiles = tile_partition(4, 4, 2, 2)
        assert tiles[0] == [0, 1, 4, 5] and tiles[3] == [10, 11, 14, 15]
        with pytest.raises(ValueError):
            tile_partition(4, 4, 3, 2)

    def test_single_tile_identity(self, rng):
        cfg = random_tile(rng, TileGeometry())
        a = build_array_tuning(SwitchConfig((cfg,)), [list(range(16))], TileGeometry())
        np.testing.assert_allclose(a.s, build_tile(cfg, TileGeometry()).s, atol=0)

    def test_block_diagonal(self, rng):
        g = TileGeometry(antennas_per_tile=4)
        tiles = tile_partition(4, 4, 2, 2)
        cfg = SwitchConfig(tuple(random_tile(rng, g) for _ in tiles))
        t = build_array_tuning(cfg, tiles, g)
        for i, ants in enumerate(tiles):
            others = [4 + a for a in range(16) if a not in ants] + [j for j in range(4) if j != i]
            assert np.all(t.s[i, others] == 0)

    def test_permutation(self, rng):
        g = TileGeometry(antennas_per_tile=4)
        cfg = SwitchConfig((random_tile(rng, g),))
        perm = [2, 0, 3, 1]
        base = build_array_tuning(cfg, [[0, 1, 2, 3]], g).s
        moved = build_array_tuning(cfg, [perm], g).s
        p = np.zeros((5, 5))
        p[0, 0] = 1
        for j, a in enumerate(perm):
            p[1 + a, 1 + j] = 1
        np.testing.assert_allclose(moved, p @ base @ p.T, atol=0)

    def test_bad_partition(self):
        with pytest.raises(ValueError, match="partition"):
            build_array_tuning(SwitchConfig.uniform(MINI), [[0, 0]], MINI)


@pytest.fixture(scope="module")
def rad_mini(grid10):
    return synthesize_array(1, 2, 0.25, grid=grid10)


class TestBenchmarks:
    def test_ideal_all_digital_is_radiating_gain(self, array44):
        rec = benchmark_model(Benchmark.ALL_DIGITAL_IDEAL, array44)
        gm = rec.gain_map()
        np.testing.assert_array_equal(gm[Level.REMS], gm[Level.RADIATING])
        assert rec.rf_chains == 16

    def test_proposed_ideal_is_tuning_gain(self, array44):
        cfg = SwitchConfig.uniform(TileGeometry())
        ideal = benchmark_model(Benchmark.PROPOSED_IDEAL, array44, cfg).gain_map()
        real = benchmark_model(Benchmark.PROPOSED, array44, cfg).gain_map()
        np.testing.assert_array_equal(ideal[Level.REMS], real[Level.TUNING])
        assert np.all(real[Level.REMS] <= real[Level.TUNING] * (1 + 1e-9))

    def test_proposed_needs_config(self, array44):
        with pytest.raises(ValueError, match="configuration"):
            benchmark_model(Benchmark.PROPOSED, array44)

    def test_ideal_switch_tile_conserves_power(self, rad_mini, rng):
        cfg = SwitchConfig((TileConfig.from_codes([1, 2, 3, 1, 2], 3),))
        model = benchmark_model(Benchmark.PROPOSED, rad_mini, cfg, MINI).model
        pm = power_metrics(solve_state(model, [1.0 + 0.5j]), model)
        assert pm.p_t == pytest.approx(pm.p_r, rel=1e-8)

    def test_pa_impedance(self, array44):
        rec = benchmark_model(Benchmark.PROPOSED, array44, SwitchConfig.uniform(TileGeometry()))
        assert rec.model.frontend.z_tx[0] == pytest.approx(50 / 16)
        assert rec.rf_chains == 1


class TestCompare:
    def test_ideal_is_zero_db(self, array44):
        g_r = gain_map(benchmark_model(Benchmark.ALL_DIGITAL_IDEAL, array44).model, levels=(Level.RADIATING,))
        g = g_r[Level.RADIATING]
        c = compare({"ideal": g}, g, {"ideal": 16})
        assert np.nanmax(np.abs(c.relative_db["ideal"])) == 0
        np.testing.assert_allclose(c.cam_db["ideal"][c.valid], 10 * np.log10(g[c.valid]) - 10 * np.log10(16))

    def test_median_order_invariant(self, rng):
        g_r = rng.uniform(1, 10, 50)
        g = g_r * rng.uniform(0.1, 1, 50)
        perm = rng.permutation(50)
        a = compare({"x": g}, g_r, {"x": 1}).median_relative_db["x"]
        b = compare({"x": g[perm]}, g_r[perm], {"x": 1}).median_relative_db["x"]
        assert a == b

    def test_zero_nodes_excluded(self):
        c = compare({"x": np.array([1.0, 0.0])}, np.array([2.0, 0.0]), {"x": 1})
        assert np.isnan(c.relative_db["x"][1])
        assert c.median_relative_db["x"] == pytest.approx(-3.0103, abs=1e-4)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError, match="different grid"):
            compare({"x": np.ones(3)}, np.ones(4), {"x": 1})
