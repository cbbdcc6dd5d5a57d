import numpy as np
import pytest

from delaysync import numerics
from delaysync.errors import GainDesignError

from conftest import DEMO_A, DEMO_GAMMA, DEMO_K, demo_compensated

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0  # scalar Riccati fixed point


class TestRank:
    def test_identity(self):
        assert numerics.rank_of(np.eye(3)) == 3

    def test_rank_one(self):
        assert numerics.rank_of([[1.0, 2.0], [2.0, 4.0]]) == 1

    def test_zero_matrix(self):
        assert numerics.rank_of(np.zeros((4, 2))) == 0

    def test_rank_condition_matrix_for_demo_design(self):
        # [[A - I, B Gamma], [C, 0]] with the demo Gamma is 4x4 and
        # invertible (det != 0 is the independent certificate), so its
        # rank equals n + rank(Gamma) = 3 + 1.
        B = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        C = np.array([[1.0, 0.0, 1.0]])
        M = np.block(
            [[DEMO_A - np.eye(3), B @ DEMO_GAMMA], [C, np.zeros((1, 1))]]
        )
        assert abs(np.linalg.det(M)) > 1e-6
        assert numerics.rank_of(M) == 4
        assert numerics.rank_of(DEMO_GAMMA) == 1

    def test_rank_matches_transpose(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            r, c = rng.integers(1, 7, size=2)
            k = int(rng.integers(1, min(r, c) + 1))
            M = rng.normal(size=(r, k)) @ rng.normal(size=(k, c))
            assert numerics.rank_of(M) == numerics.rank_of(M.T) == k

    def test_tolerance_env_override(self, monkeypatch):
        M = np.diag([1.0, 1e-6])
        assert numerics.rank_of(M) == 2
        monkeypatch.setenv("DELAYSYNC_TOLERANCE", "1e-3")
        assert numerics.rank_of(M) == 1
        monkeypatch.setenv("DELAYSYNC_TOLERANCE", "2.0")
        with pytest.raises(ValueError):
            numerics.rank_of(M)


class TestKernel:
    def test_full_rank_has_empty_kernel(self):
        assert numerics.kernel_basis(np.eye(2)).shape == (2, 0)

    def test_row_vector(self):
        K = numerics.kernel_basis([[1.0, 1.0]])
        assert K.shape == (2, 1)
        np.testing.assert_allclose(np.abs(K[:, 0]), [1 / np.sqrt(2)] * 2, atol=1e-12)
        assert K[0, 0] * K[1, 0] < 0

    def test_nilpotent(self):
        K = numerics.kernel_basis([[0.0, 1.0], [0.0, 0.0]])
        assert K.shape == (2, 1)
        np.testing.assert_allclose(np.abs(K[:, 0]), [1.0, 0.0], atol=1e-12)

    def test_orthonormal_and_annihilated(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            r, c = rng.integers(1, 9, size=2)
            k = int(rng.integers(1, min(r, c) + 1))
            M = rng.normal(size=(r, k)) @ rng.normal(size=(k, c))
            K = numerics.kernel_basis(M)
            assert K.shape[1] == c - numerics.rank_of(M)
            if K.shape[1]:
                smax = np.linalg.svd(M, compute_uv=False)[0]
                assert np.abs(M @ K).max() <= 1e-7 * (1.0 + smax)
                assert np.linalg.norm(M @ K) <= 10 * 1e-9 * smax * np.sqrt(c)
                np.testing.assert_allclose(
                    K.T @ K, np.eye(K.shape[1]), atol=1e-10
                )


class TestEigenvalues:
    def test_diagonal(self):
        ev = sorted(numerics.eigenvalues(np.diag([0.5, -0.25])).real)
        np.testing.assert_allclose(ev, [-0.25, 0.5], atol=1e-14)

    def test_demo_agent_matrix(self):
        ev = numerics.eigenvalues(DEMO_A)
        np.testing.assert_allclose(np.abs(ev), [1.0, 1.0, 1.0], atol=1e-12)
        assert min(abs(ev - (-1.0))) < 1e-12
        assert min(abs(ev - (0.5 + np.sqrt(3) / 2 * 1j))) < 1e-12

    def test_rotation(self):
        ev = numerics.eigenvalues([[0.0, 1.0], [-1.0, 0.0]])
        np.testing.assert_allclose(sorted(ev.imag), [-1.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(ev.real, [0.0, 0.0], atol=1e-14)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            numerics.eigenvalues(np.ones((2, 3)))

    def test_accuracy_on_known_spectrum(self):
        # orthogonal similarity preserves the spectrum exactly
        rng = np.random.default_rng(13)
        target = np.sort(rng.uniform(-2.0, 2.0, size=64))
        Q, _ = np.linalg.qr(rng.normal(size=(64, 64)))
        got = np.sort(numerics.eigenvalues(Q @ np.diag(target) @ Q.T).real)
        np.testing.assert_allclose(got, target, atol=1e-9)

    def test_product_matches_determinant(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 9))
            M = rng.normal(size=(n, n))
            det = np.linalg.det(M)
            prod = np.prod(numerics.eigenvalues(M))
            assert abs(prod - det) <= 1e-6 * max(1.0, abs(det))


class TestSpectralRadius:
    def test_zero(self):
        assert numerics.spectral_radius(np.zeros((3, 3))) == 0.0

    def test_diagonal(self):
        assert numerics.spectral_radius(np.diag([0.9, -1.1])) == pytest.approx(1.1)

    def test_compensated_agent_matrix(self):
        # block triangular: spectrum is the agent's (all on the circle)
        # plus the integrator eigenvalue at 1
        Abar, _, _ = demo_compensated()
        assert numerics.spectral_radius(Abar) == pytest.approx(1.0, abs=1e-12)


class TestGainDesign:
    def test_scalar_golden_values(self):
        P = numerics.solve_dare(np.array([[1.0]]), np.array([[1.0]]))
        assert P[0, 0] == pytest.approx(GOLDEN, abs=1e-12)
        K = numerics.design_stabilizing_gain([[1.0]], [[1.0]])
        assert K[0, 0] == pytest.approx((np.sqrt(5.0) - 1.0) / 2.0, abs=1e-12)
        assert 1.0 - K[0, 0] == pytest.approx((3.0 - np.sqrt(5.0)) / 2.0, abs=1e-12)

    def test_already_stable_scalar(self):
        K = numerics.design_stabilizing_gain([[0.5]], [[1.0]])
        assert abs(0.5 - K[0, 0]) < 1.0

    def test_demo_design_gains(self):
        Abar, Bbar, Cbar = demo_compensated()
        K = numerics.design_stabilizing_gain(Abar, Bbar)
        assert numerics.spectral_radius(Abar - Bbar @ K) < 1.0
        F = numerics.design_observer_gain(Abar, Cbar)
        assert numerics.spectral_radius(Abar - F @ Cbar) < 1.0
        # an externally supplied gain must pass the same Schur check
        assert numerics.spectral_radius(Abar - Bbar @ DEMO_K) < 1.0

    def test_unstabilizable_pair_rejected(self):
        with pytest.raises(GainDesignError):
            numerics.design_stabilizing_gain(np.diag([2.0, 0.5]), [[0.0], [1.0]])

    def test_random_pairs_always_stabilized(self):
        from conftest import random_unit_disc_matrix

        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            m = int(rng.integers(1, 4))
            A = random_unit_disc_matrix(rng, n, radius=1.0)
            A = A + 0.05 * rng.normal(size=(n, n))  # may push modes outside
            B = rng.normal(size=(n, m))
            if not numerics.is_stabilizable(A, B):
                continue
            K = numerics.design_stabilizing_gain(A, B)
            assert numerics.spectral_radius(A - B @ K) < 1.0

    def test_dare_residual_small(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            n, m = int(rng.integers(1, 5)), int(rng.integers(1, 3))
            A = rng.normal(size=(n, n)) * 0.9
            B = rng.normal(size=(n, m))
            P = numerics.solve_dare(A, B)
            res = numerics._dare_residual(A, B, P)
            assert np.abs(res).max() <= 1e-10 * max(1.0, np.abs(P).max())


class TestPBH:
    def test_reachable_unstable_mode(self):
        assert numerics.is_stabilizable(np.diag([2.0, 0.5]), [[1.0], [0.0]])

    def test_unreachable_unstable_mode(self):
        assert not numerics.is_stabilizable(np.diag([2.0, 0.5]), [[0.0], [1.0]])

    def test_detectability_via_dual(self):
        assert numerics.is_detectable(np.diag([2.0, 0.5]), [[1.0, 0.0]])
        assert not numerics.is_detectable(np.diag([2.0, 0.5]), [[0.0, 1.0]])
