"""Tests for seeded hashing and sparse sketch matrices"""

import numpy as np
import pytest

from cqrsketch.core import sketch
from cqrsketch.core.hashing import derive_seed, hash_signs, make_rng, mix, reduce_range
from cqrsketch.core.linalg import solve_least_squares
from cqrsketch.core.sketch import SketchFamily, SketchSpec, SketchSpecError, SparseHashMatrix
from cqrsketch.utils.validation import DimensionMismatchError


def explicit(rows, num_cols, family="concat"):
    """SparseHashMatrix from a list of [(column, weight), ...] rows"""
    indptr = np.concatenate([[0], np.cumsum([len(row) for row in rows])]).astype(np.int64)
    indices = np.array([c for row in rows for c, _ in row], dtype=np.int64)
    data = np.array([w for row in rows for _, w in row], dtype=np.float64)
    return SparseHashMatrix(
        num_rows=len(rows),
        num_cols=num_cols,
        indptr=indptr,
        indices=indices,
        data=data,
        family=family,
    )


class TestHashing:
    """Test the splitmix-based seed derivation"""

    def test_mix_is_order_sensitive(self):
        """mix(a, b) differs from mix(b, a)"""
        assert mix(1, 2) != mix(2, 1)
        assert mix(1, 2) == mix(1, 2)

    def test_derived_seeds_fit_in_63_bits(self):
        """Derived seeds are valid non-negative integer seeds"""
        for stream in range(50):
            assert 0 <= derive_seed(123, stream) < 2**63

    def test_rng_streams(self):
        """Generators for the same (seed, stream) agree"""
        np.testing.assert_array_equal(make_rng(5, 1).random(4), make_rng(5, 1).random(4))
        assert not np.array_equal(make_rng(5, 1).random(4), make_rng(5, 2).random(4))

    def test_reduce_range_bounds(self):
        """Reduced hashes stay in [0, size)"""
        hashes = np.array([0, 2**63, 2**64 - 1], dtype=np.uint64)
        reduced = reduce_range(hashes, 7)
        assert reduced.min() >= 0 and reduced.max() < 7
        with pytest.raises(ValueError):
            reduce_range(hashes, 0)

    def test_signs(self):
        """Low bit picks the sign"""
        np.testing.assert_array_equal(
            hash_signs(np.array([2, 3], dtype=np.uint64)), [1.0, -1.0]
        )


class TestBuild:
    """Test seed-derived sketch families"""

    def test_hashing_trick_rows(self):
        """Every row holds exactly one entry of weight 1"""
        h = sketch.build(SketchSpec("hashing_trick", 4, k=2, seed=1))
        np.testing.assert_array_equal(h.row_lengths, np.ones(4))
        np.testing.assert_array_equal(h.data, np.ones(4))

    def test_hash_embedding_rows(self):
        """Two unit entries, or one merged entry of weight 2"""
        h = sketch.build(SketchSpec("hash_embedding", 100, k=10, seed=3))
        dense = sketch.materialize(h)
        np.testing.assert_array_equal(dense.sum(axis=1), np.full(100, 2.0))
        for i in range(100):
            row = sketch.apply_row(h, i)
            if len(row.indices) == 1:
                assert row.weights[0] == 2.0
            else:
                np.testing.assert_array_equal(row.weights, [1.0, 1.0])

    def test_weighted_hash_embedding_stores_no_zeros(self):
        """Opposite weights on one column leave an empty row, never a stored 0"""
        lengths = []
        for seed in range(5):
            h = sketch.build(SketchSpec("hash_embedding", 200, k=3, weighted=True, seed=seed))
            assert np.all(h.data != 0.0)
            lengths.extend(h.row_lengths.tolist())
            for i in range(200):
                weights = np.abs(sketch.apply_row(h, i).weights)
                assert weights.tolist() in ([], [1.0, 1.0], [2.0])
        # k=3 collides a third of the rows, half of those cancel
        assert 0 in lengths

    def test_weighted_hybrid_stores_no_zeros(self):
        """Cancelled block entries are dropped from the CSR arrays"""
        spec = SketchSpec(
            "qr_hybrid", 300, blocks=2, rows_per_block=2, hashes_per_block=2, weighted=True, seed=4
        )
        h = sketch.build(spec)
        assert np.all(h.data != 0.0)
        np.testing.assert_array_equal(
            sketch.materialize(h).astype(bool).sum(axis=1), h.row_lengths
        )

    def test_qr_concat_blocks(self):
        """One entry per block, the j-th in columns [j*r, (j+1)*r)"""
        h = sketch.build(SketchSpec("qr_concat", 50, blocks=4, rows_per_block=1000, seed=9))
        assert h.num_cols == 4000
        for i in range(50):
            columns = sketch.apply_row(h, i).indices
            assert len(columns) == 4
            np.testing.assert_array_equal(columns // 1000, [0, 1, 2, 3])

    def test_qr_hybrid_blocks(self):
        """Between one and hashes_per_block entries per block"""
        spec = SketchSpec("qr_hybrid", 200, blocks=2, rows_per_block=8, hashes_per_block=3, seed=2)
        h = sketch.build(spec)
        for i in range(200):
            counts = np.bincount(sketch.apply_row(h, i).indices // 8, minlength=2)
            assert np.all((counts >= 1) & (counts <= 3))

    def test_count_sketch_signs(self):
        """Signed count sketch rows are ±1; unsigned are +1"""
        signed = sketch.count_sketch(300, 16, seed=4)
        unsigned = sketch.count_sketch(300, 16, seed=4, signed=False)
        assert set(np.unique(signed.data)) <= {-1.0, 1.0}
        assert -1.0 in signed.data
        np.testing.assert_array_equal(unsigned.data, np.ones(300))
        np.testing.assert_array_equal(signed.indices, unsigned.indices)

    def test_injective_hashing_trick(self):
        """With k >= d1 the injective option never collides"""
        h = sketch.build(SketchSpec("hashing_trick", 50, k=50, injective=True, seed=8))
        assert np.unique(h.indices).size == 50

    def test_injective_needs_capacity(self):
        """k < d1 cannot be injective"""
        with pytest.raises(SketchSpecError):
            sketch.build(SketchSpec("hashing_trick", 50, k=10, injective=True))

    def test_deterministic(self):
        """The same spec builds byte-identical arrays"""
        spec = SketchSpec("qr_hybrid", 64, blocks=2, rows_per_block=5, weighted=True, seed=6)
        a, b = sketch.build(spec), sketch.build(spec)
        assert a.indptr.tobytes() == b.indptr.tobytes()
        assert a.indices.tobytes() == b.indices.tobytes()
        assert a.data.tobytes() == b.data.tobytes()

    def test_invalid_specs(self):
        """Unknown families and empty shapes are refused"""
        with pytest.raises(SketchSpecError):
            sketch.build(SketchSpec("nonsense", 4, k=2))
        with pytest.raises(SketchSpecError):
            sketch.build(SketchSpec("count_sketch", 4, k=0))
        with pytest.raises(SketchSpecError):
            sketch.build(SketchSpec("qr_concat", 4, blocks=0, rows_per_block=3))

    def test_shape_laws_over_random_specs(self):
        """Row sums and block layout hold for many random specs"""
        rng = np.random.default_rng(0)
        for _ in range(1000):
            family = rng.choice(["hashing_trick", "hash_embedding", "count_sketch", "qr_hybrid"])
            d1 = int(rng.integers(1, 40))
            seed = int(rng.integers(0, 2**31))
            if family == "qr_hybrid":
                spec = SketchSpec(
                    family,
                    d1,
                    blocks=int(rng.integers(1, 4)),
                    rows_per_block=int(rng.integers(1, 6)),
                    seed=seed,
                )
            else:
                spec = SketchSpec(family, d1, k=int(rng.integers(1, 12)), seed=seed)
            h = sketch.build(spec)
            assert h.num_rows == d1 and h.num_cols == spec.num_cols
            if family in ("hashing_trick", "count_sketch"):
                assert np.all(h.row_lengths == 1)
            elif family == "hash_embedding":
                np.testing.assert_array_equal(np.abs(sketch.materialize(h)).sum(axis=1), 2.0)

    def test_hashing_trick_buckets_are_balanced(self):
        """Each column receives d1/k rows within four standard deviations"""
        d1, k = 10000, 16
        expected = d1 / k
        for seed in range(5):
            h = sketch.build(SketchSpec("hashing_trick", d1, k=k, seed=seed))
            counts = np.bincount(h.indices, minlength=k)
            assert np.all(np.abs(counts - expected) <= 4 * np.sqrt(expected))

    def test_count_sketch_keeps_column_space(self):
        """A width-20*d2^2 count sketch fits most random d1 x d2 targets to half their energy"""
        d1, d2 = 40, 2
        k = 20 * d2**2
        hits = 0
        for seed in range(50):
            target = make_rng(seed, 99).standard_normal((d1, d2))
            dense = sketch.materialize(sketch.count_sketch(d1, k, seed=seed))
            m = solve_least_squares(dense, target)
            residual = np.sum((dense @ m - target) ** 2)
            hits += residual <= 0.5 * np.sum(target**2)
        assert hits >= 45


class TestRowOperations:
    """Test apply_row, embed and materialize"""

    def test_apply_row_examples(self):
        """Rows come back as sparse vectors"""
        h = explicit([[(3, 1.0)], [(2, -1.0)], [(0, 1.0), (5, 1.0)]], 6)
        np.testing.assert_array_equal(sketch.apply_row(h, 0).to_dense(), np.eye(6)[3])
        np.testing.assert_array_equal(sketch.apply_row(h, 1).to_dense(), -np.eye(6)[2])
        expected = np.eye(6)[0] + np.eye(6)[5]
        np.testing.assert_array_equal(sketch.apply_row(h, 2).to_dense(), expected)
        assert sketch.apply_row(h, 0).pairs() == [(3, 1.0)]

    def test_apply_row_out_of_range(self):
        """Ids outside [0, d1) raise IndexError"""
        with pytest.raises(IndexError):
            sketch.apply_row(sketch.empty(3), 3)

    def test_embed_examples(self):
        """Plain lookup, hash-embedding sum and a weighted row"""
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(sketch.embed(explicit([[(1, 1.0)]], 2), m, 0), [3.0, 4.0])
        pair = explicit([[(0, 1.0), (1, 1.0)]], 2)
        np.testing.assert_array_equal(sketch.embed(pair, m, 0), [4.0, 6.0])
        weighted = explicit([[(0, 2.0)]], 1)
        np.testing.assert_array_equal(sketch.embed(weighted, np.array([[1.0, 2.0]]), 0), [2.0, 4.0])

    def test_embed_is_linear_in_m(self):
        """embed(h, a*M1 + b*M2, i) = a*embed(h, M1, i) + b*embed(h, M2, i)"""
        spec = SketchSpec("qr_hybrid", 25, blocks=2, rows_per_block=4, weighted=True, seed=7)
        h = sketch.build(spec)
        rng = make_rng(3, 0)
        m1 = rng.standard_normal((h.num_cols, 5))
        m2 = rng.standard_normal((h.num_cols, 5))
        a, b = 1.7, -0.3
        for i in range(25):
            combined = sketch.embed(h, a * m1 + b * m2, i)
            separate = a * sketch.embed(h, m1, i) + b * sketch.embed(h, m2, i)
            np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-12)

    def test_embed_dimension_check(self):
        """M must have one row per column of H"""
        with pytest.raises(DimensionMismatchError):
            sketch.embed(explicit([[(0, 1.0)]], 2), np.ones((3, 2)), 0)

    def test_materialize(self):
        """Rows [(0,1)], [(0,1)] materialize to [[1,0],[1,0]]; empty rows are zero"""
        h = explicit([[(0, 1.0)], [(0, 1.0)]], 2)
        np.testing.assert_array_equal(sketch.materialize(h), [[1.0, 0.0], [1.0, 0.0]])
        np.testing.assert_array_equal(sketch.materialize(explicit([[], []], 3)), np.zeros((2, 3)))

    def test_materialize_agrees_with_apply_row(self):
        """Every materialized row equals the row sketch"""
        h = sketch.build(SketchSpec("hash_embedding", 30, k=7, weighted=True, seed=1))
        dense = sketch.materialize(h)
        for i in range(30):
            np.testing.assert_array_equal(dense[i], sketch.apply_row(h, i).to_dense())

    def test_lookup_matches_embed(self):
        """Batch lookup equals per-id embed"""
        h = sketch.count_sketch(20, 5, seed=2)
        m = np.arange(10.0).reshape(5, 2)
        ids = np.array([0, 7, 19, 7])
        expected = np.stack([sketch.embed(h, m, int(i)) for i in ids])
        np.testing.assert_allclose(sketch.lookup(h, m, ids), expected)

    def test_sketch_product(self):
        """X H equals X times the dense H"""
        h = sketch.count_sketch(6, 3, seed=0)
        x = np.arange(12.0).reshape(2, 6)
        np.testing.assert_allclose(sketch.sketch_product(x, h), x @ sketch.materialize(h))

    def test_duplicate_columns_refused(self):
        """A row may not name the same column twice"""
        with pytest.raises(SketchSpecError):
            explicit([[(1, 1.0), (1, 1.0)]], 3)


class TestConcatAndAssignments:
    """Test hconcat and one-hot assignment matrices"""

    def test_two_count_sketches(self):
        """Two k-column count sketches give 2k columns and two nonzeros per row"""
        a = sketch.count_sketch(25, 4, seed=1)
        b = sketch.count_sketch(25, 4, seed=2)
        h = sketch.hconcat(a, b)
        assert h.num_cols == 8
        np.testing.assert_array_equal(h.row_lengths, np.full(25, 2))
        np.testing.assert_array_equal(
            sketch.materialize(h), np.hstack([sketch.materialize(a), sketch.materialize(b)])
        )

    def test_empty_is_identity(self):
        """Concatenating a zero-column matrix changes nothing"""
        a = sketch.count_sketch(5, 3, seed=1)
        assert sketch.hconcat(a, sketch.empty(5)) is a
        assert sketch.hconcat(sketch.empty(5), a) is a

    def test_row_mismatch(self):
        """Both sides need the same number of rows"""
        with pytest.raises(DimensionMismatchError):
            sketch.hconcat(sketch.empty(3), sketch.count_sketch(4, 2, seed=0))

    def test_from_assignments(self):
        """One-hot rows for each cluster index"""
        np.testing.assert_array_equal(
            sketch.materialize(sketch.from_assignments([0, 0, 1], 2)),
            [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        )
        np.testing.assert_array_equal(
            sketch.materialize(sketch.from_assignments([0, 1, 2], 3)), np.eye(3)
        )
        collapsed = sketch.materialize(sketch.from_assignments([0, 0, 0, 0], 3))
        np.testing.assert_array_equal(collapsed.sum(axis=0), [4.0, 0.0, 0.0])

    def test_from_assignments_range(self):
        """Labels must lie in [0, k)"""
        with pytest.raises(SketchSpecError):
            sketch.from_assignments([0, 3], 3)


class TestSerialization:
    """Test spec-only and explicit serialized forms"""

    def test_seeded_sketch_stores_spec(self):
        """Seed-derived sketches serialize to their spec and rebuild identically"""
        h = sketch.build(SketchSpec("qr_concat", 20, blocks=2, rows_per_block=4, seed=3))
        data = sketch.to_dict(h)
        assert "spec" in data and "rows" not in data
        rebuilt = sketch.from_dict(data)
        np.testing.assert_array_equal(sketch.materialize(rebuilt), sketch.materialize(h))
        assert sketch.parameter_count(h) == 0

    def test_concat_with_assignments(self):
        """[assignments | count sketch] stores the labels and the sketch spec"""
        h = sketch.hconcat(
            sketch.from_assignments([2, 0, 1, 1], 3), sketch.count_sketch(4, 2, seed=5)
        )
        data = sketch.to_dict(h)
        assert data["parts"][0]["assignments"] == [2, 0, 1, 1]
        assert "spec" in data["parts"][1]
        rebuilt = sketch.from_dict(data)
        np.testing.assert_array_equal(sketch.materialize(rebuilt), sketch.materialize(h))
        assert sketch.parameter_count(h) == 4

    def test_family_enum(self):
        """Family names round-trip through the enum"""
        assert SketchFamily("qr_hybrid") is SketchFamily.QR_HYBRID
