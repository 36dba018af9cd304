"""Tests for k-means, subsampled k-means and product quantization"""

import numpy as np
import pytest

from cqrsketch.core.cluster import (
    assign_nearest,
    gaussian_codebook_assign,
    kmeans,
    product_quantize,
    subsampled_kmeans,
)
from cqrsketch.core.linalg import sample_gaussian


def gaussian_mixture(rows: int, dims: int, centers: int, seed: int, spread: float = 0.1):
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((centers, dims)) * 5.0
    labels = rng.integers(centers, size=rows)
    return means[labels] + spread * rng.standard_normal((rows, dims))


class TestAssignNearest:
    """Test nearest-centroid assignment"""

    def test_lowest_index_wins_ties(self):
        """A point equidistant from two centroids goes to the first"""
        labels, distances = assign_nearest(np.array([[0.0]]), np.array([[-1.0], [1.0]]))
        assert labels[0] == 0
        assert distances[0] == 1.0

    def test_batches_agree(self):
        """Batch size does not change the result"""
        t = sample_gaussian(50, 3, 1)
        centroids = sample_gaussian(7, 3, 2)
        full = assign_nearest(t, centroids)
        batched = assign_nearest(t, centroids, batch_size=4)
        np.testing.assert_array_equal(full[0], batched[0])
        np.testing.assert_allclose(full[1], batched[1])


class TestKMeans:
    """Test Lloyd's algorithm with k-means++ seeding"""

    def test_separated_duplicates(self):
        """[0, 0, 10, 10] with k=2 splits into two exact clusters"""
        t = np.array([[0.0], [0.0], [10.0], [10.0]])
        result = kmeans(t, 2, seed=0)
        assert result.assignments[0] == result.assignments[1]
        assert result.assignments[2] == result.assignments[3]
        assert result.assignments[0] != result.assignments[2]
        assert sorted(result.centroids[:, 0]) == [0.0, 10.0]
        assert result.cost == 0.0

    def test_single_cluster_is_mean(self):
        """k=1 puts the centroid at the row mean"""
        t = sample_gaussian(40, 3, 4)
        result = kmeans(t, 1, seed=1)
        np.testing.assert_allclose(result.centroids[0], t.mean(axis=0))
        assert result.cost == pytest.approx(float(((t - t.mean(axis=0)) ** 2).sum()))

    def test_enough_clusters_gives_zero_cost(self):
        """k at least the number of distinct rows reaches cost 0"""
        distinct = sample_gaussian(5, 2, 9)
        t = np.vstack([distinct, distinct, distinct[:2]])
        assert kmeans(t, 5, seed=3).cost == pytest.approx(0.0, abs=1e-12)
        assert kmeans(t, 8, seed=3).cost == pytest.approx(0.0, abs=1e-12)

    def test_assignments_point_at_nearest_centroid(self):
        """Returned labels are a nearest-centroid assignment"""
        t = gaussian_mixture(200, 3, 6, seed=2)
        result = kmeans(t, 6, seed=2)
        labels, distances = assign_nearest(t, result.centroids)
        np.testing.assert_array_equal(labels, result.assignments)
        assert result.cost == pytest.approx(float(distances.sum()))

    def test_lloyd_monotonicity(self):
        """Cost never increases across iterations"""
        rng = np.random.default_rng(11)
        for instance in range(100):
            rows = int(rng.integers(5, 60))
            t = rng.standard_normal((rows, int(rng.integers(1, 5))))
            k = int(rng.integers(1, 8))
            history = kmeans(t, k, seed=instance).cost_history
            assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_row_permutation_relabels_only(self):
        """Permuted rows give the same partition and the same sorted centroids"""
        for seed in range(5):
            t = gaussian_mixture(150, 3, 5, seed=seed, spread=0.01)
            perm = np.random.default_rng(100 + seed).permutation(150)
            original = kmeans(t, 5, seed=seed)
            permuted = kmeans(t[perm], 5, seed=seed + 50)
            pairs = set(zip(original.assignments[perm].tolist(), permuted.assignments.tolist()))
            assert len(pairs) == 5
            assert len({a for a, _ in pairs}) == len({b for _, b in pairs}) == 5
            canonical = original.centroids[np.lexsort(original.centroids.T[::-1])]
            relabeled = permuted.centroids[np.lexsort(permuted.centroids.T[::-1])]
            np.testing.assert_allclose(canonical, relabeled, rtol=0, atol=1e-10)
            assert permuted.cost == pytest.approx(original.cost, rel=1e-9, abs=1e-12)

    def test_beats_random_assignments(self):
        """Lloyd's cost is below each of 100 random labelings scored at their means"""
        rng = np.random.default_rng(21)
        for seed in range(5):
            t = gaussian_mixture(200, 3, 4, seed=seed, spread=1.0)
            cost = kmeans(t, 4, seed=seed).cost
            for _ in range(100):
                labels = rng.integers(4, size=200)
                baseline = sum(
                    float(((t[labels == c] - t[labels == c].mean(axis=0)) ** 2).sum())
                    for c in np.unique(labels)
                )
                assert cost <= baseline

    def test_deterministic(self):
        """Same seed, same clustering"""
        t = gaussian_mixture(100, 2, 4, seed=5)
        a, b = kmeans(t, 4, seed=7), kmeans(t, 4, seed=7)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        np.testing.assert_array_equal(a.centroids, b.centroids)

    def test_rejects_bad_input(self):
        """k must be positive and the table finite"""
        with pytest.raises(ValueError):
            kmeans(np.ones((3, 2)), 0, seed=0)
        with pytest.raises(ValueError):
            kmeans(np.array([[np.inf, 0.0]]), 1, seed=0)


class TestSubsampledKMeans:
    """Test clustering from a row sample"""

    def test_full_sample_matches_kmeans(self):
        """sample_size = d1 is plain k-means"""
        t = gaussian_mixture(80, 3, 5, seed=1)
        full = kmeans(t, 5, seed=4)
        sub = subsampled_kmeans(lambda ids: t[ids], 80, 80, 5, seed=4)
        np.testing.assert_array_equal(sub.assignments, full.assignments)
        np.testing.assert_allclose(sub.centroids, full.centroids)

    def test_duplicated_rows_with_covering_sample(self):
        """A sample holding every distinct row reaches cost 0"""
        distinct = sample_gaussian(6, 2, 3)
        t = np.vstack([distinct, distinct])
        sample = np.arange(6)
        result = subsampled_kmeans(lambda ids: t[ids], 12, 6, 6, seed=0, sample=sample)
        assert result.cost == pytest.approx(0.0, abs=1e-12)

    def test_rows_fetched_in_batches(self):
        """Assignment fetches at most one batch of rows per oracle call"""
        t = gaussian_mixture(300, 3, 5, seed=6)
        fetched = []

        def oracle(ids):
            fetched.append(len(ids))
            return t[ids]

        result = subsampled_kmeans(oracle, 300, 60, 5, seed=2, batch_size=16)
        assert fetched[0] == 60
        assert max(fetched[1:]) <= 16
        assert sum(fetched[1:]) == 300
        labels, _ = assign_nearest(t, result.centroids)
        np.testing.assert_array_equal(result.assignments, labels)

    def test_half_sample_stays_near_full_cost(self):
        """sample_size = d1/2 costs at most 1.5x full k-means"""
        for seed in range(20):
            t = gaussian_mixture(400, 3, 20, seed=seed, spread=2.0)
            full = kmeans(t, 5, seed=seed)
            sub = subsampled_kmeans(lambda ids: t[ids], 400, 200, 5, seed=seed)
            assert sub.cost <= 1.5 * full.cost

    def test_sample_size_range(self):
        """sample_size must be in [1, d1]"""
        t = np.ones((4, 1))
        with pytest.raises(ValueError):
            subsampled_kmeans(lambda ids: t[ids], 4, 5, 1, seed=0)


class TestCodebooks:
    """Test Gaussian-codebook assignment and product quantization"""

    def test_gaussian_codebook(self):
        """Assignments point at the nearest random codeword"""
        t = sample_gaussian(30, 4, 1)
        result = gaussian_codebook_assign(t, 5, seed=2)
        labels, _ = assign_nearest(t, result.centroids)
        np.testing.assert_array_equal(result.assignments, labels)
        assert result.centroids.shape == (5, 4)

    def test_product_quantize_shapes(self):
        """One code per block and a reconstruction of the full width"""
        t = gaussian_mixture(60, 5, 4, seed=3)
        pq = product_quantize(t, 2, 4, seed=1)
        assert pq.assignments.shape == (60, 2)
        assert pq.reconstruct().shape == (60, 5)
        assert pq.cost == pytest.approx(float(((pq.reconstruct() - t) ** 2).sum()))

    def test_product_quantize_block_range(self):
        """blocks must be in [1, d2]"""
        with pytest.raises(ValueError):
            product_quantize(np.ones((4, 2)), 3, 2, seed=0)
