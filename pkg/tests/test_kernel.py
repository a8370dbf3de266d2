import numpy as np
import pytest

from gcgw import (
    MutationKernel,
    build_point_mutation_kernel,
    eigendecompose,
    load_kernel_csv,
    sample_class_transition,
    save_kernel_csv,
    stationary_distribution,
    validate_kernel,
)

from conftest import random_stochastic_kernel


class TestPointKernel:
    def test_n2_rows(self):
        kernel = build_point_mutation_kernel(2)
        expected = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.0, 1.0, 0.0]])
        np.testing.assert_allclose(kernel.entries, expected, atol=0)

    def test_n1_swap(self):
        kernel = build_point_mutation_kernel(1)
        np.testing.assert_allclose(kernel.entries, [[0.0, 1.0], [1.0, 0.0]], atol=0)

    def test_n10_row3(self):
        kernel = build_point_mutation_kernel(10)
        row = kernel.entries[3]
        assert row[2] == pytest.approx(0.3, abs=1e-15)
        assert row[4] == pytest.approx(0.7, abs=1e-15)
        assert row[[0, 1, 3, 5, 6, 7, 8, 9, 10]].sum() == 0.0

    def test_rejects_zero_classes(self):
        with pytest.raises(ValueError):
            build_point_mutation_kernel(0)

    @pytest.mark.parametrize("n", range(1, 65))
    def test_tridiagonal_zero_diagonal_stochastic(self, n):
        entries = build_point_mutation_kernel(n).entries
        assert np.abs(entries.sum(axis=1) - 1.0).max() <= 1e-12
        assert np.all(np.diag(entries) == 0.0)
        off = np.abs(np.subtract.outer(np.arange(n + 1), np.arange(n + 1))) > 1
        assert np.all(entries[off] == 0.0)


class TestValidation:
    def test_point_kernel_passes(self):
        report = validate_kernel(build_point_mutation_kernel(5))
        assert report.ok
        assert report.negative_entries == ()

    def test_row_sum_deficit_reported(self):
        entries = np.eye(3)
        entries[1, 1] = 0.9
        report = validate_kernel(MutationKernel(entries))
        assert not report.ok
        assert report.row_sum_deviations[1] == pytest.approx(0.1, abs=1e-15)
        assert report.row_sum_deviations[[0, 2]].max() <= 1e-15

    def test_identity_passes(self):
        assert validate_kernel(MutationKernel(np.eye(4))).ok

    def test_negative_entry_reported(self):
        entries = np.array([[1.2, -0.2], [0.5, 0.5]])
        report = validate_kernel(MutationKernel(entries))
        assert not report.ok
        assert report.negative_entries == ((0, 1, -0.2),)

    def test_kernel_is_immutable(self):
        kernel = build_point_mutation_kernel(3)
        with pytest.raises(ValueError):
            kernel.entries[0, 0] = 1.0

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            MutationKernel(np.ones((2, 3)))


class TestEigendecompose:
    def test_n1_eigenvalues(self):
        dec = eigendecompose(build_point_mutation_kernel(1))
        np.testing.assert_allclose(sorted(dec.eigenvalues.real), [-1.0, 1.0], atol=1e-12)
        assert dec.condition_flag

    def test_n2_eigenvalues(self):
        # Characteristic polynomial of the 3x3 chain: -x(x^2 - 1).
        dec = eigendecompose(build_point_mutation_kernel(2))
        np.testing.assert_allclose(sorted(dec.eigenvalues.real), [-1.0, 0.0, 1.0], atol=1e-12)

    def test_identity_kernel(self):
        dec = eigendecompose(MutationKernel(np.eye(4)))
        np.testing.assert_allclose(dec.eigenvalues.real, np.ones(4), atol=1e-12)
        np.testing.assert_allclose(dec.right_basis @ dec.left_basis, np.eye(4), atol=1e-12)
        assert dec.condition_flag

    @pytest.mark.parametrize("n", [1, 2, 5, 10, 32])
    def test_reconstruction_and_unit_eigenvalue(self, n):
        kernel = build_point_mutation_kernel(n)
        dec = eigendecompose(kernel)
        assert dec.condition_flag
        recon = dec.right_basis @ np.diag(dec.eigenvalues) @ dec.left_basis
        assert np.abs(recon - kernel.entries).max() <= 1e-8
        assert np.abs(dec.right_basis @ dec.left_basis - np.eye(n + 1)).max() <= 1e-8
        assert np.min(np.abs(dec.eigenvalues - 1.0)) <= 1e-10

    def test_random_kernels_reconstruct(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            kernel = random_stochastic_kernel(rng, int(rng.integers(2, 9)))
            dec = eigendecompose(kernel)
            assert dec.condition_flag
            recon = dec.right_basis @ np.diag(dec.eigenvalues) @ dec.left_basis
            assert np.abs(recon - kernel.entries).max() <= 1e-8


class TestStationary:
    def test_n2_by_hand(self):
        # Solving pi Q = pi with the normalisation gives (1/4, 1/2, 1/4).
        pi = stationary_distribution(build_point_mutation_kernel(2))
        np.testing.assert_allclose(pi, [0.25, 0.5, 0.25], atol=1e-12)

    def test_n4_binomial(self):
        pi = stationary_distribution(build_point_mutation_kernel(4))
        expected = np.array([1, 4, 6, 4, 1]) / 16.0
        np.testing.assert_allclose(pi, expected, atol=1e-12)

    @pytest.mark.parametrize("n", range(1, 21))
    def test_binomial_for_all_sizes(self, n):
        from math import comb

        pi = stationary_distribution(build_point_mutation_kernel(n))
        expected = np.array([comb(n, j) for j in range(n + 1)], dtype=float) / 2.0**n
        assert np.abs(pi - expected).max() <= 1e-12
        assert abs(pi.sum() - 1.0) <= 1e-12
        assert np.abs(pi @ build_point_mutation_kernel(n).entries - pi).max() <= 1e-10

    def test_identity_not_unique(self):
        with pytest.raises(ValueError, match="not unique"):
            stationary_distribution(MutationKernel(np.eye(4)))


class TestSampling:
    def test_forced_transition(self):
        kernel = build_point_mutation_kernel(2)
        rng = np.random.default_rng(0)
        assert all(sample_class_transition(kernel, 0, rng) == 1 for _ in range(50))

    def test_identity_stays_put(self):
        kernel = MutationKernel(np.eye(5))
        rng = np.random.default_rng(1)
        for i in range(5):
            assert sample_class_transition(kernel, i, rng) == i

    def test_out_of_range(self):
        kernel = build_point_mutation_kernel(2)
        rng = np.random.default_rng(2)
        with pytest.raises(ValueError):
            sample_class_transition(kernel, 3, rng)
        with pytest.raises(ValueError):
            sample_class_transition(kernel, -1, rng)

    def test_middle_class_frequencies(self):
        kernel = build_point_mutation_kernel(2)
        rng = np.random.default_rng(2024)
        draws = np.array([sample_class_transition(kernel, 1, rng) for _ in range(100_000)])
        freq0 = np.mean(draws == 0)
        freq2 = np.mean(draws == 2)
        assert abs(freq0 - 0.5) < 0.01
        assert abs(freq2 - 0.5) < 0.01

    def test_frequencies_match_rows_three_sigma(self):
        kernel = build_point_mutation_kernel(4)
        rng = np.random.default_rng(99)
        n_draws = 100_000
        for i in range(5):
            draws = rng.choice(5, size=n_draws, p=kernel.entries[i])
            counts = np.bincount(draws, minlength=5) / n_draws
            for j in range(5):
                p = kernel.entries[i, j]
                se = np.sqrt(p * (1.0 - p) / n_draws)
                assert abs(counts[j] - p) <= max(3.0 * se, 1e-12)


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path):
        kernel = build_point_mutation_kernel(6)
        path = tmp_path / "kernel.csv"
        save_kernel_csv(kernel, path)
        loaded = load_kernel_csv(path)
        np.testing.assert_allclose(loaded.entries, kernel.entries, rtol=0, atol=1e-15)
        text = path.read_text().strip().splitlines()
        assert len(text) == 7  # one row per class, no header

    def test_invalid_file_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        np.savetxt(path, np.array([[0.5, 0.4], [0.5, 0.5]]), delimiter=",")
        with pytest.raises(ValueError):
            load_kernel_csv(path)
        loaded = load_kernel_csv(path, validate=False)
        assert not validate_kernel(loaded).ok
