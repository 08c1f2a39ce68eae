import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ris_isac import numerics
from ris_isac.errors import MaxIterations, NoSignChange, NonFinite, NonHermitian, NotPSD, RankDeficient
from ris_isac.optimizer import secular_function

from conftest import crandn, random_psd


def random_hermitian(rng, n):
    G = crandn(rng, n, n)
    return 0.5 * (G + G.conj().T)


class TestHermitianEig:
    def test_identity(self):
        eig = numerics.hermitian_eig(np.eye(3))
        np.testing.assert_allclose(eig.values, [1, 1, 1])
        np.testing.assert_allclose(eig.vectors.conj().T @ eig.vectors, np.eye(3), atol=1e-14)

    def test_diagonal(self):
        eig = numerics.hermitian_eig(np.diag([1.0, 4.0]))
        np.testing.assert_allclose(eig.values, [4, 1])
        np.testing.assert_allclose(np.abs(eig.vectors), [[0, 1], [1, 0]], atol=1e-14)

    def test_reconstruction(self, rng):
        M = random_hermitian(rng, 6)
        eig = numerics.hermitian_eig(M)
        assert np.linalg.norm(eig.reconstruct() - M) < 1e-8
        assert np.all(np.diff(eig.values) <= 0)

    def test_rejects_non_hermitian(self, rng):
        with pytest.raises(NonHermitian):
            numerics.hermitian_eig(crandn(rng, 3, 3))
        with pytest.raises(NonHermitian):
            numerics.hermitian_eig(np.ones((2, 3)))

    def test_rejects_nan(self):
        M = np.eye(2)
        M[0, 0] = np.nan
        with pytest.raises(NonFinite):
            numerics.hermitian_eig(M)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_eigenpairs(self, n, seed):
        M = random_hermitian(np.random.default_rng(seed), n)
        eig = numerics.hermitian_eig(M)
        res = M @ eig.vectors - eig.vectors * eig.values
        assert np.linalg.norm(res) < 1e-10 * max(1.0, np.linalg.norm(M))


class TestGramSchmidt:
    def test_identity(self):
        Q, R = numerics.gram_schmidt_qr(np.eye(4))
        np.testing.assert_allclose(Q, np.eye(4), atol=1e-15)
        np.testing.assert_allclose(R, np.eye(4), atol=1e-15)

    def test_single_unit_column(self, rng):
        v = crandn(rng, 5)
        v /= np.linalg.norm(v)
        Q, R = numerics.gram_schmidt_qr(v[:, None])
        np.testing.assert_allclose(Q[:, 0], v, atol=1e-15)
        np.testing.assert_allclose(R, [[1.0]], atol=1e-15)

    def test_leading_entry_is_first_column_norm(self, rng):
        from conftest import random_channel_set
        from ris_isac.channel import RisPhases
        from ris_isac.sensing import gain_matrix

        ch = random_channel_set(rng, K=6, N=3, nlos_rank=1)
        ph = RisPhases.random(3, rng)
        B = numerics.psd_factor(gain_matrix(ch, ph, (0.3, 1.0, 0.5)))
        h1 = ch.ue_channel(ph)
        _, R = numerics.gram_schmidt_qr(np.column_stack([h1.conj(), B]))
        assert abs(R[0, 0] - np.linalg.norm(h1)) < 1e-12 * np.linalg.norm(h1)

    def test_rank_deficient(self, rng):
        a = crandn(rng, 4)
        with pytest.raises(RankDeficient):
            numerics.gram_schmidt_qr(np.column_stack([a, 2j * a]))
        with pytest.raises(RankDeficient):
            numerics.gram_schmidt_qr(crandn(rng, 2, 3))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 9), st.integers(0, 4), st.integers(0, 2**32 - 1))
    def test_properties(self, n, extra, seed):
        rng = np.random.default_rng(seed)
        A = crandn(rng, n + extra, n)
        Q, R = numerics.gram_schmidt_qr(A)
        assert np.abs(Q.conj().T @ Q - np.eye(n)).max() < 1e-12
        assert np.linalg.norm(Q @ R - A) < 1e-12 * np.linalg.norm(A)
        assert np.allclose(np.tril(R, -1), 0)
        d = np.diag(R)
        assert np.all(d.real > 0) and np.allclose(d.imag, 0)


class TestPsdFactor:
    def test_zero(self):
        assert numerics.psd_factor(np.zeros((3, 3))).shape == (3, 0)

    def test_rank_one(self, rng):
        v = crandn(rng, 4)
        B = numerics.psd_factor(np.outer(v, v.conj()))
        assert B.shape == (4, 1)
        phase = np.vdot(B[:, 0], v) / abs(np.vdot(B[:, 0], v))
        np.testing.assert_allclose(B[:, 0] * phase, v, atol=1e-12)

    def test_gain_matrix_reconstruction(self, rng):
        from conftest import random_channel_set
        from ris_isac.channel import RisPhases
        from ris_isac.sensing import gain_matrix

        ch = random_channel_set(rng, K=6, N=3)
        C = gain_matrix(ch, RisPhases.random(3, rng), (0.2, 1.5, 0.7))
        B = numerics.psd_factor(C)
        assert np.linalg.norm(B @ B.conj().T - C) / np.linalg.norm(C) < 1e-8

    def test_not_psd(self):
        with pytest.raises(NotPSD):
            numerics.psd_factor(np.diag([1.0, -0.5]))
        with pytest.raises(NotPSD):
            numerics.psd_factor(-np.eye(2))


class TestBisection:
    def test_linear(self):
        assert abs(numerics.bisection_root(lambda x: x - 2, 0, 4, 1e-12) - 2) < 1e-12

    def test_decreasing(self):
        assert abs(numerics.bisection_root(lambda x: 1 / x**2 - 1, 0.5, 10, 1e-12) - 1) < 1e-12

    def test_no_sign_change(self):
        with pytest.raises(NoSignChange):
            numerics.bisection_root(lambda x: x * x + 1, -1, 1, 1e-9)

    def test_max_iterations(self):
        with pytest.raises(MaxIterations):
            numerics.bisection_root(lambda x: x - 0.3, 0, 1, 1e-12, max_iter=5)

    def test_secular_root_matches_grid_scan(self, rng):
        A = random_psd(rng, 3)
        b = crandn(rng, 3)
        c = 1.7
        eig = numerics.hermitian_eig(A)
        beta_sq = np.abs(eig.vectors.conj().T @ b) ** 2
        lam1 = eig.values[0]
        f = lambda g: secular_function(g, eig.values, beta_sq) - c  # noqa: E731
        hi = lam1 + np.linalg.norm(b) / np.sqrt(c)
        root = numerics.bisection_root(f, lam1 + 1e-9, hi, 1e-13)
        # independent oracle: dense scan for the sign change, then refine the cell
        lo_g, hi_g = lam1 + 1e-9, hi
        for _ in range(3):
            grid = np.linspace(lo_g, hi_g, 100_001)
            vals = np.array([secular_function(g, eig.values, beta_sq) for g in grid]) - c
            k = np.flatnonzero(np.diff(np.sign(vals)))[0]
            lo_g, hi_g = grid[k], grid[k + 1]
        assert abs(root - 0.5 * (lo_g + hi_g)) < 1e-6


class TestComplexGaussian:
    def test_zero_covariance(self, rng):
        assert np.all(numerics.sample_complex_gaussian(np.zeros((3, 3)), rng) == 0)

    def test_standard_convention(self, rng):
        z = numerics.sample_complex_gaussian(np.eye(2), rng, size=200_000)
        np.testing.assert_allclose(np.mean(np.abs(z) ** 2, axis=0), 1, atol=0.015)
        np.testing.assert_allclose(z.real.var(axis=0), 0.5, atol=0.01)
        np.testing.assert_allclose(z.imag.var(axis=0), 0.5, atol=0.01)
        assert abs(np.mean(z.real * z.imag)) < 0.01
        # circular: pseudo-covariance vanishes
        assert np.abs(z.T @ z / len(z)).max() < 0.015

    def test_sampling_oracle(self, rng):
        R = np.array([[2.0, 1.0], [1.0, 2.0]])
        z = numerics.sample_complex_gaussian(R, rng, size=100_000)
        S = z.T @ z.conj() / len(z)
        assert np.linalg.norm(S - R) / np.linalg.norm(R) < 0.05

    def test_single_draw_shape(self, rng):
        assert numerics.sample_complex_gaussian(np.eye(3), rng).shape == (3,)

    def test_psd_sqrt(self, rng):
        R = random_psd(rng, 5, 3)
        S = numerics.psd_sqrt(R)
        assert np.linalg.norm(S @ S - R) < 1e-10 * np.linalg.norm(R)
