import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remsim.rayleigh import (
    NotPositiveDefiniteError,
    dominant_pair,
    inv_sqrt_pd,
    maximize,
    maximize_dense,
    maximize_factored,
    quotient,
)


def random_pair(rng, n):
    f = rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n))
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    b = g @ g.conj().T + 0.1 * np.eye(n)
    return f, b


class TestInvSqrt:
    def test_inverse_square_root(self, rng):
        _, b = random_pair(rng, 5)
        s = inv_sqrt_pd(b)
        np.testing.assert_allclose(s @ b @ s, np.eye(5), atol=1e-10)
        np.testing.assert_allclose(s, s.conj().T, atol=1e-12)

    @pytest.mark.parametrize("b", [np.zeros((2, 2)), np.diag([1.0, -0.1]), np.diag([1.0, 0.0])])
    def test_rejects_non_pd(self, b):
        with pytest.raises(NotPositiveDefiniteError, match="active or inconsistent"):
            inv_sqrt_pd(b)


class TestMaximize:
    @pytest.mark.parametrize("n", [1, 2, 3, 8, 16])
    def test_fast_equals_dense(self, rng, n):
        for _ in range(20):
            f, b = random_pair(rng, n)
            g_fast, x = maximize(f, b)
            g_dense, _ = maximize_dense(4 * np.pi * f.conj().T @ f, b)
            assert g_fast == pytest.approx(g_dense, rel=1e-10)
            assert quotient(4 * np.pi * f.conj().T @ f, b, x)[0] == pytest.approx(g_fast, rel=1e-10)

    def test_excitation_normalised(self, rng):
        f, b = random_pair(rng, 6)
        _, x = maximize(f, b)
        assert np.vdot(x, b @ x).real == pytest.approx(1.0, rel=1e-12)

    def test_upper_bounds_random_quotients(self, rng):
        f, b = random_pair(rng, 6)
        a = 4 * np.pi * f.conj().T @ f
        g, _ = maximize(f, b)
        xs = rng.normal(size=(10_000, 6)) + 1j * rng.normal(size=(10_000, 6))
        assert quotient(a, b, xs).max() <= g * (1 + 1e-12)

    def test_scalar_case(self):
        g, x = maximize(np.array([[3.0], [4.0]]), np.array([[2.0]]))
        assert g == pytest.approx(4 * np.pi * 25 / 2)

    def test_batched_matches_loop(self, rng):
        fs = rng.normal(size=(7, 2, 4)) + 1j * rng.normal(size=(7, 2, 4))
        _, b = random_pair(rng, 4)
        g, x = maximize_factored(fs, inv_sqrt_pd(b))
        for k in range(7):
            gk, xk = maximize(fs[k], b)
            assert g[k] == pytest.approx(gk, rel=1e-12)
            np.testing.assert_allclose(x[k], xk, atol=1e-12)

    def test_zero_field(self):
        g, x = maximize(np.zeros((2, 3)), np.eye(3))
        assert g == 0
        assert np.linalg.norm(x) == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), alpha_re=st.floats(-1e3, 1e3), alpha_im=st.floats(-1e3, 1e3))
    def test_scale_invariance(self, seed, alpha_re, alpha_im):
        alpha = complex(alpha_re, alpha_im)
        if abs(alpha) < 1e-3:
            alpha = 1.0
        rng = np.random.default_rng(seed)
        f, b = random_pair(rng, 4)
        a = f.conj().T @ f
        x = rng.normal(size=4) + 1j * rng.normal(size=4)
        assert quotient(a, b, alpha * x)[0] == pytest.approx(quotient(a, b, x)[0], rel=1e-12)


class TestDominantPair:
    def test_degenerate_rank_is_deterministic(self):
        e = np.array([[1.0, 0, 0], [0, 1.0, 0]], dtype=complex)
        lam, c = dominant_pair(e)
        assert lam == pytest.approx(1.0)
        np.testing.assert_allclose(c, [1, 0, 0], atol=1e-12)

    def test_phase_normalised(self, rng):
        e = rng.normal(size=(2, 5)) + 1j * rng.normal(size=(2, 5))
        _, c = dominant_pair(e)
        assert abs(c[0].imag) < 1e-14 and c[0].real > 0
