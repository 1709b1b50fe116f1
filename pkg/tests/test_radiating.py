import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remsim.netcalc import WaveContext
from remsim.radiating import (
    AngularGrid,
    FarFieldPattern,
    GridMismatchError,
    PassivityError,
    RadiatingStructure,
    array_positions,
    element_pattern,
    gram,
    gram_matrix,
    l2_inner,
    synthesize_array,
)


def two_element_gram(step):
    grid = AngularGrid.regular(step)
    ctx = WaveContext(12e9)
    pos = array_positions(1, 2, 0.25, ctx.wavelength)
    r_hat, _, _ = grid.unit_vectors()
    f = element_pattern(grid, 1.0)[:, :, None] * np.exp(1j * ctx.wavenumber * r_hat @ pos.T)[:, None, :]
    return gram_matrix(f, grid)


class TestAngularGrid:
    @pytest.mark.parametrize("step", [1.0, 2.0, 5.0, 10.0])
    def test_weights_sum_to_sphere(self, step):
        grid = AngularGrid.regular(step)
        assert np.all(grid.weights >= 0)
        assert grid.weights.sum() == pytest.approx(4 * np.pi, rel=1e-6)

    def test_default_shape_and_order(self):
        grid = AngularGrid.regular()
        assert grid.shape == (181, 360)
        assert grid.node_theta[360] == pytest.approx(np.deg2rad(1))
        assert grid.node_phi[361] == pytest.approx(np.deg2rad(1))

    def test_rejects_non_dividing_step(self):
        with pytest.raises(ValueError):
            AngularGrid.regular(7.0)

    def test_nearest(self, grid5):
        idx, snap = grid5.nearest(np.deg2rad(31), np.deg2rad(44))
        assert np.rad2deg(grid5.node_theta[idx]) == pytest.approx(30)
        assert np.rad2deg(grid5.node_phi[idx]) == pytest.approx(45)
        assert 0 < snap < np.deg2rad(1.5)

    def test_hemisphere(self, grid5):
        h = grid5.hemisphere()
        assert h.size == 19 * 72
        assert np.all(grid5.node_theta[h] <= np.pi / 2 + 1e-12)

    def test_unit_vectors_orthonormal(self, grid10):
        r, t, p = grid10.unit_vectors()
        for a, b in [(r, t), (r, p), (t, p)]:
            np.testing.assert_allclose(np.sum(a * b, axis=1), 0, atol=1e-15)
        np.testing.assert_allclose(np.linalg.norm(t, axis=1), 1)


class TestL2:
    def test_isotropic_unit_norm(self, grid5):
        p = FarFieldPattern(np.tile([1 / np.sqrt(4 * np.pi), 0], (grid5.size, 1)), grid5)
        assert p.norm2() == pytest.approx(1.0, rel=1e-12)

    def test_orthogonal_polarizations(self, grid5):
        ones = np.ones(grid5.size)
        p = FarFieldPattern(np.stack([ones, 0 * ones], 1), grid5)
        q = FarFieldPattern(np.stack([0 * ones, ones], 1), grid5)
        assert l2_inner(p, q) == 0

    def test_grid_mismatch(self, grid5, grid10):
        p = FarFieldPattern(np.zeros((grid5.size, 2)), grid5)
        q = FarFieldPattern(np.zeros((grid10.size, 2)), grid10)
        with pytest.raises(GridMismatchError):
            l2_inner(p, q)

    def test_rejects_non_finite(self, grid10):
        v = np.zeros((grid10.size, 2))
        v[3, 0] = np.nan
        with pytest.raises(ValueError):
            FarFieldPattern(v, grid10)

    def test_refinement_oracle(self):
        coarse, fine = two_element_gram(1.0), two_element_gram(0.5)
        assert abs(coarse[0, 1] - fine[0, 1]) < 1e-4
        assert abs(coarse[0, 1]) > 0.1 * abs(coarse[0, 0])  # strongly coupled at quarter-wave spacing


class TestGram:
    def test_single_isotropic(self, grid10):
        f = np.zeros((grid10.size, 2, 1), dtype=complex)
        f[:, 0, 0] = 1 / np.sqrt(4 * np.pi)
        np.testing.assert_allclose(gram_matrix(f, grid10), [[1.0]], atol=1e-12)

    def test_colocated_rank_one(self, grid10):
        f = np.zeros((grid10.size, 2, 2), dtype=complex)
        f[:, 0, :] = 1 / np.sqrt(4 * np.pi)
        np.testing.assert_allclose(gram_matrix(f, grid10), np.ones((2, 2)), atol=1e-12)

    def test_hermitian_psd(self, array44):
        p = gram(array44)
        np.testing.assert_allclose(p, p.conj().T, atol=1e-14)
        assert np.linalg.eigvalsh(p)[0] > -1e-10

    def test_synthetic_2x2_construction(self, grid5):
        rad = synthesize_array(2, 2, 0.25, grid=grid5)
        np.testing.assert_allclose(rad.gram, np.eye(4) - rad.s_rr.conj().T @ rad.s_rr, atol=1e-8)


class TestSynthesize:
    def test_one_by_one(self, grid5):
        rad = synthesize_array(1, 1, grid=grid5)
        p = rad.gram[0, 0].real
        assert rad.s_rr[0, 0] == pytest.approx(np.sqrt(1 - p))
        a = np.array([0.3 - 0.2j])
        p_r = abs(a[0]) ** 2 * (1 - abs(rad.s_rr[0, 0]) ** 2)
        assert rad.far_field(a).norm2() == pytest.approx(p_r, rel=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_power_conservation(self, array44, seed):
        a = np.random.default_rng(seed).normal(size=(16, 2)) @ [1, 1j]
        lhs = array44.far_field(a).norm2() + np.linalg.norm(array44.s_rr @ a) ** 2
        assert lhs == pytest.approx(np.linalg.norm(a) ** 2, rel=1e-6)

    def test_efficiency_scaling(self, grid5, rng):
        rad = synthesize_array(4, 4, 0.25, efficiency=0.8, grid=grid5)
        for _ in range(20):
            a = rng.normal(size=16) + 1j * rng.normal(size=16)
            p_r = np.linalg.norm(a) ** 2 - np.linalg.norm(rad.s_rr @ a) ** 2
            assert rad.far_field(a).norm2() / p_r == pytest.approx(0.8, abs=1e-6)

    def test_coupling_hermitian_spectrum(self, array44):
        s = array44.s_rr
        np.testing.assert_allclose(s, s.conj().T, atol=1e-14)
        lam = np.linalg.eigvalsh(s)
        assert lam[0] >= 0 and lam[-1] < 1

    def test_strong_coupling_poor_element_match(self, array44):
        # individual elements of a dense array reflect most of their power
        assert np.all(np.abs(np.diag(array44.s_rr)) > 0.8)

    def test_broadside_pattern_maximum(self, array44):
        uniform = np.ones(16) / 4
        i = array44.far_field(uniform).intensity()
        assert array44.grid.node_theta[np.argmax(i)] == 0  # pole row, any phi

    @pytest.mark.parametrize("pol", ["x", "y", "theta", "phi"])
    def test_polarizations(self, grid10, pol):
        e = element_pattern(grid10, 1.0, pol)
        assert np.all(e[grid10.node_theta > np.pi / 2 + 1e-9] == 0)

    def test_coincident_elements_warn(self, grid10):
        with pytest.warns(RuntimeWarning, match="rank deficient"):
            synthesize_array(1, 2, 1e-9, grid=grid10)

    @pytest.mark.parametrize("kw", [{"spacing": 0.0}, {"efficiency": 1.5}, {"efficiency": 0.0}])
    def test_rejects(self, grid10, kw):
        args = {"spacing": 0.25, **kw}
        with pytest.raises(ValueError):
            synthesize_array(2, 2, args.pop("spacing"), grid=grid10, **args)

    def test_rejects_partial_grid(self):
        with pytest.raises(ValueError, match="full sphere"):
            synthesize_array(2, 2, grid=AngularGrid.regular(5.0, theta_max_deg=90.0))


class TestPassivity:
    def test_synthetic_passive(self, array44):
        assert array44.passivity_margin() < 1e-6
        array44.check_passive()

    def test_overdriven_patterns_rejected(self, array44):
        bad = RadiatingStructure(array44.s_rr, 1.01 * array44.fields, array44.grid, array44.ctx)
        with pytest.raises(PassivityError):
            bad.check_passive()

    def test_shape_checks(self, grid10):
        with pytest.raises(ValueError):
            RadiatingStructure(np.zeros((2, 2)), np.zeros((grid10.size, 2, 3)), grid10, WaveContext(1e9))
