import math

import numpy as np
import pytest

from remsim.architecture import SwitchConfig, TileConfig, TileGeometry, UnitState, ideal_geometry
from remsim.optimize import (
    ConfigEvaluator,
    Objective,
    SearchCapExceeded,
    SearchSpace,
    coordinate_ascent,
    directional_gain_maps,
    evaluate_config,
    exhaustive_search,
    optimize_per_direction,
)
from remsim.radiating import synthesize_array
from remsim.rems import Level

MINI = TileGeometry(antennas_per_tile=2)
SINGLE = TileGeometry(antennas_per_tile=1, stub_count=2)


@pytest.fixture(scope="module")
def rad12(grid10):
    return synthesize_array(1, 2, 0.25, grid=grid10)


@pytest.fixture(scope="module")
def rad11(grid10):
    return synthesize_array(1, 1, grid=grid10)


def offset_node(grid, theta_deg, phi_deg):
    return Objective.direction(grid, np.deg2rad(theta_deg), np.deg2rad(phi_deg))


class TestEvaluator:
    def test_deterministic_and_memoised(self, rad12, grid10):
        ev = ConfigEvaluator(rad12, MINI, offset_node(grid10, 30, 0))
        cfg = SwitchConfig.uniform(MINI)
        a = ev(cfg)
        b = ConfigEvaluator(rad12, MINI, offset_node(grid10, 30, 0))(cfg)
        assert a == pytest.approx(b, abs=1e-13)
        assert ev(cfg.codes()) == a and ev.evaluations == 1

    def test_hex_round_trip_invariant(self, rad12, grid10, rng):
        obj = offset_node(grid10, 40, 90)
        cfg = SwitchConfig((TileConfig.from_codes(rng.integers(0, 4, 5), 3),))
        back = SwitchConfig.from_hex(cfg.to_hex(MINI), MINI)
        assert evaluate_config(back, MINI, rad12, obj) == evaluate_config(cfg, MINI, rad12, obj)

    def test_all_open_realistic_is_tiny(self, rad12, grid10):
        cfg = SwitchConfig.uniform(MINI, unit=UnitState.OPEN_REFLECT)
        obj = Objective((0,))
        assert evaluate_config(cfg, MINI, rad12, obj) < evaluate_config(SwitchConfig.uniform(MINI), MINI, rad12,
                                                                        obj) - 15

    def test_all_open_ideal_is_minus_inf(self, rad12):
        g = ideal_geometry(antennas_per_tile=2)
        ev = ConfigEvaluator(rad12, g, Objective((0,)))
        assert ev(SwitchConfig.uniform(g, unit=UnitState.OPEN_REFLECT)) == -math.inf
        assert len(ev.failures) == 1

    def test_symmetric_relabeling(self, rad12):
        g = TileGeometry(antennas_per_tile=1)
        tiles = [[0], [1]]
        a = TileConfig((1, 0, 0, 1, 0, 0), (UnitState.PASS,))
        b = TileConfig((0, 0, 1, 1, 0, 0), (UnitState.PASS_180,))
        ev = ConfigEvaluator(rad12, g, Objective((0,)), tiles)
        assert ev(SwitchConfig((a, b))) == pytest.approx(ev(SwitchConfig((b, a))), abs=1e-10)

    def test_median_objective(self):
        assert Objective((1, 2, 3)).aggregate(np.array([1.0, 10.0, 100.0])) == pytest.approx(10.0)

    def test_empty_objective(self):
        with pytest.raises(ValueError):
            Objective(())


class TestExhaustive:
    def test_single_antenna_tile(self, rad11, grid10):
        ev = ConfigEvaluator(rad11, SINGLE, Objective((0,)))
        space = SearchSpace(SwitchConfig.uniform(SINGLE), SINGLE)
        assert space.size == 64
        rep = exhaustive_search(space, ev)
        assert rep.evaluations == 64
        assert all(v <= rep.best_db for v in ev._cache.values())
        assert ev(rep.best) == rep.best_db

    def test_size_one(self, rad12):
        base = SwitchConfig.uniform(MINI)
        rep = exhaustive_search(SearchSpace(base, MINI, free=()), ConfigEvaluator(rad12, MINI, Objective((0,))))
        assert rep.best == base and rep.evaluations == 1

    def test_cap(self, rad12):
        space = SearchSpace(SwitchConfig.uniform(MINI), MINI)
        with pytest.raises(SearchCapExceeded, match="1024 states"):
            exhaustive_search(space, ConfigEvaluator(rad12, MINI, Objective((0,))), cap=1000)

    def test_subspaces(self):
        base = SwitchConfig.uniform(TileGeometry(), tiles=2)
        assert SearchSpace.units_only(base, TileGeometry()).size == 4**32
        assert SearchSpace.matching_only(base, TileGeometry()).size == 4**6

    def test_bad_free(self):
        with pytest.raises(ValueError):
            SearchSpace(SwitchConfig.uniform(MINI), MINI, free=(0, 0))


@pytest.fixture(scope="module")
def exhaustive(rad12, grid10):
    ev = ConfigEvaluator(rad12, MINI, offset_node(grid10, 30, 60))
    space = SearchSpace(SwitchConfig.uniform(MINI), MINI)
    return space, ev, exhaustive_search(space, ev)


class TestAscent:
    def test_start_at_optimum_stops(self, exhaustive):
        space, ev, rep = exhaustive
        asc = coordinate_ascent(space, ev, init=rep.best, restarts=1)
        assert asc.trajectory == [[rep.best_db, rep.best_db]]
        assert asc.best == rep.best

    def test_monotone_and_bounded(self, exhaustive):
        space, ev, rep = exhaustive
        asc = coordinate_ascent(space, ev, restarts=4, seed=3)
        for run in asc.trajectory:
            assert all(b >= a for a, b in zip(run, run[1:]))
        assert asc.best_db <= rep.best_db

    def test_deterministic(self, rad12, grid10):
        def run():
            ev = ConfigEvaluator(rad12, MINI, offset_node(grid10, 20, 10))
            return coordinate_ascent(SearchSpace(SwitchConfig.uniform(MINI), MINI), ev, restarts=2, seed=11)
        a, b = run(), run()
        assert a.best == b.best and a.trajectory == b.trajectory and a.evaluations == b.evaluations

    def test_report_json(self, exhaustive):
        space, ev, rep = exhaustive
        data = rep.to_json(MINI)
        assert SwitchConfig.from_hex(data["best_config_hex"], MINI) == rep.best
        assert data["evaluations"] == 1024

    def test_rejects_zero_restarts(self, exhaustive):
        space, ev, _ = exhaustive
        with pytest.raises(ValueError):
            coordinate_ascent(space, ev, restarts=0)


class TestPerDirection:
    def test_threads_do_not_change_results(self, rad12, grid10):
        nodes = [0, grid10.nearest(np.deg2rad(30), 0)[0]]
        one = optimize_per_direction(rad12, MINI, nodes, restarts=1, threads=1)
        two = optimize_per_direction(rad12, MINI, nodes, restarts=1, threads=2)
        assert one.configs == two.configs
        np.testing.assert_array_equal(one.objective_db, two.objective_db)
        maps = directional_gain_maps(rad12, MINI, one)
        np.testing.assert_allclose(10 * np.log10(maps[Level.REMS]), one.objective_db, atol=1e-12)
        assert np.all(maps[Level.REMS] <= maps[Level.TUNING] * (1 + 1e-9))
