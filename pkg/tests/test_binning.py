import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divan.binning import (
    BinningError,
    HISTO_SIZE,
    SubsetTooSmallError,
    absorb_insert,
    bin_approx,
    bin_boundaries,
    bin_column,
    bin_exact,
    histogram_geometry,
    index_bits,
)
from divan.synth import dataset_from_arrays, zero_inflated_tips


def exact_bins_oracle(values, B):
    """Brute-force reference: stable sort positions over ceil(n/B)."""
    n = len(values)
    order = sorted(range(n), key=lambda i: (values[i], i))
    tpb = -(-n // B)
    bins = [0] * n
    for p, row in enumerate(order):
        bins[row] = p // tpb
    return np.array(bins)


class TestGeometry:
    def test_index_bits(self):
        assert index_bits(1) == 0
        assert index_bits(2) == 1
        assert index_bits(1 << 20) == 20
        assert index_bits((1 << 20) + 1) == 21

    def test_histogram_size_is_two_to_twenty(self):
        assert HISTO_SIZE == 1_048_576 == 2**20

    def test_shift_clamps_for_small_datasets(self):
        shift, size = histogram_geometry(1 << 10)
        assert shift == 0 and size == 1 << 10
        shift, size = histogram_geometry(1 << 22)
        assert shift == 2 and size == 1 << 20


class TestExact:
    def test_one_row_per_bin_when_B_equals_n(self, rng):
        ds = dataset_from_arrays({"v": rng.permutation(100).astype(float)})
        binned = bin_exact(ds, 0, None, 100)
        # sorted position p gets bin p: row holding value k has bin k
        assert np.array_equal(
            binned.bins.astype(int), ds.column("v").values.astype(int)
        )

    def test_frequent_value_spans_bins(self):
        ds = dataset_from_arrays({"v": np.array([1.0, 1, 1, 1, 2, 2, 3, 4])})
        binned = bin_exact(ds, 0, None, 4)
        assert binned.bins.tolist() == [0, 0, 1, 1, 2, 2, 3, 3]

    def test_all_equal_column_splits_across_bins(self):
        ds = dataset_from_arrays({"v": np.full(8, 3.0)})
        assert bin_exact(ds, 0, None, 4).bins.tolist() == [0, 0, 1, 1, 2, 2, 3, 3]

    def test_more_bins_than_rows_rejected(self):
        ds = dataset_from_arrays({"v": np.arange(3, dtype=float)})
        with pytest.raises(BinningError, match="more bins"):
            bin_exact(ds, 0, None, 4)

    def test_populations(self, rng):
        ds = dataset_from_arrays({"v": rng.random(1000)})
        binned = bin_exact(ds, 0, None, 128)
        pops = np.bincount(binned.bins, minlength=128)
        tpb = -(-1000 // 128)  # 8
        last = np.flatnonzero(pops)[-1]
        assert (pops[:last] == tpb).all()
        assert pops[last] == 1000 - tpb * last

    def test_matches_oracle_on_random_data(self, rng):
        values = rng.integers(0, 50, 300).astype(float)
        ds = dataset_from_arrays({"v": values})
        binned = bin_exact(ds, 0, None, 16)
        assert np.array_equal(binned.bins.astype(int), exact_bins_oracle(values, 16))

    def test_subset_binning(self, rng):
        values = rng.random(1000)
        ds = dataset_from_arrays({"v": values})
        rows = np.arange(0, 1000, 3)
        binned = bin_exact(ds, 0, rows, 8)
        assert np.array_equal(
            binned.bins.astype(int), exact_bins_oracle(values[rows], 8)
        )


class TestApprox:
    def test_equals_exact_when_one_rank_per_bucket(self, rng):
        n = 1 << 10
        ds = dataset_from_arrays({"v": rng.random(n)})
        exact = bin_exact(ds, 0, None, 128)
        approx, _ = bin_approx(ds.sorted_indexes[0].ranks, n, 128)
        assert np.array_equal(exact.bins, approx.bins)

    def test_tuples_per_bin_is_ceiling(self, rng):
        # 1000 rows in 128 bins -> 8 per bin: first bin gets exactly 8
        ds = dataset_from_arrays({"v": rng.permutation(1000).astype(float)})
        approx, _ = bin_approx(ds.sorted_indexes[0].ranks, 1000, 128)
        pops = np.bincount(approx.bins, minlength=128)
        assert pops[0] == 8 == -(-1000 // 128)

    def test_subset_deviation_bounded_by_bucket_occupancy(self, rng):
        # total 2*10^5 rows, analyze every other row: bins within
        # max-bucket-occupancy of ceil(10^5/128) = 782
        total = 200_000
        ds = dataset_from_arrays({"v": rng.random(total)})
        rows = np.arange(0, total, 2)
        ranks = ds.sorted_indexes[0].ranks[rows]
        approx, _ = bin_approx(ranks, total, 128)
        shift, size = histogram_geometry(total)
        occupancy = np.bincount(ranks >> shift, minlength=size)
        tpb = -(-len(rows) // 128)
        assert tpb == 782
        pops = np.bincount(approx.bins, minlength=128)
        assert pops.max() <= tpb + occupancy.max()

    def test_sparse_subset_of_large_dataset(self, rng):
        # total > 2^20 so buckets really share ranks (shift = 2)
        total = 1 << 22
        ranks_all = rng.permutation(total)
        rows = np.arange(0, total, 8)
        ranks = ranks_all[rows]
        approx, _ = bin_approx(ranks, total, 128)
        shift, size = histogram_geometry(total)
        assert shift == 2
        occupancy = np.bincount(ranks >> shift, minlength=size)
        tpb = -(-len(rows) // 128)
        pops = np.bincount(approx.bins, minlength=128)
        assert pops.max() <= tpb + occupancy.max()
        # monotone in rank
        order = np.argsort(ranks)
        assert (np.diff(approx.bins[order].astype(int)) >= 0).all()

    def test_below_threshold_raises(self, rng):
        total = 1 << 20
        ranks = rng.choice(total, size=100, replace=False)
        with pytest.raises(SubsetTooSmallError):
            bin_approx(ranks, total, 128)

    def test_bin_column_falls_back_to_exact(self, rng):
        n = 100_000
        ds = dataset_from_arrays({"v": rng.random(n)})
        rows = np.arange(8)  # far below n / 2^13
        binned, bounds = bin_column(ds, 0, 4, rows=rows)
        assert bounds is None
        assert np.array_equal(
            binned.bins.astype(int),
            exact_bins_oracle(ds.column("v").values[rows], 4),
        )


@given(seed=st.integers(0, 2**16), B=st.sampled_from([4, 8, 32]), n=st.integers(64, 2048))
@settings(max_examples=30, deadline=None)
def test_monotonicity_in_rank(seed, B, n):
    rng = np.random.default_rng(seed)
    ds = dataset_from_arrays({"v": rng.integers(0, 40, n).astype(float)})
    ranks = ds.sorted_indexes[0].ranks
    for bins in (
        bin_exact(ds, 0, None, B).bins,
        bin_approx(ranks, n, B)[0].bins,
    ):
        order = np.argsort(ranks)
        assert (np.diff(bins[order].astype(int)) >= 0).all()


class TestBoundaries:
    def test_hand_computed_ranges(self):
        ds = dataset_from_arrays({"v": np.array([1.0, 1.0, 2.0, 9.0])})
        binned = bin_exact(ds, 0, None, 2)
        bb = bin_boundaries(ds, 0, binned)
        assert bb.ranges == [(1.0, 1.0), (2.0, 9.0)]

    def test_empty_bin_marked(self, rng):
        # 9 rows in 4 bins: ceil = 3 -> bins 0..2 filled, bin 3 empty
        ds = dataset_from_arrays({"v": rng.permutation(9).astype(float)})
        bb = bin_boundaries(ds, 0, bin_exact(ds, 0, None, 4))
        assert bb.ranges[3] is None
        assert all(r is not None for r in bb.ranges[:3])

    def test_zero_tip_band_reports_zero_range(self):
        tips = zero_inflated_tips(10_000, 0.3, seed=9)
        ds = dataset_from_arrays({"tip": tips})
        binned, _ = bin_column(ds, 0, 128)
        bb = bin_boundaries(ds, 0, binned)
        # ~30% zeros at 128 bins: the low band holds only $0 tips
        zero_bins = [r for r in bb.ranges if r is not None and r[1] == 0.0]
        assert len(zero_bins) >= 30
        assert all(r == (0.0, 0.0) for r in zero_bins)

    def test_ranges_nondecreasing(self, rng):
        ds = dataset_from_arrays({"v": rng.integers(0, 25, 500).astype(float)})
        bb = bin_boundaries(ds, 0, bin_exact(ds, 0, None, 16))
        previous_hi = None
        for r in bb.ranges:
            if r is None:
                continue
            assert r[0] <= r[1]
            if previous_hi is not None:
                # equality allowed: a frequent value may span the boundary
                assert r[0] >= previous_hi
            previous_hi = r[1]

    def test_composite_reports_both_components(self, rng):
        from divan.dataset import make_composite, preprocess

        ds = dataset_from_arrays(
            {"p": rng.integers(0, 4, 200).astype(np.int64), "s": rng.random(200)},
            do_preprocess=False,
        )
        make_composite(ds, "p", "s")
        preprocess(ds)
        binned = bin_exact(ds, 2, None, 8)
        bb = bin_boundaries(ds, 2, binned)
        lo, hi = bb.ranges[0]
        assert len(lo) == 2 and len(hi) == 2


class TestInserts:
    def test_insert_below_all_boundaries(self, rng):
        ds = dataset_from_arrays({"v": rng.random(5000) + 10.0})
        _, bounds = bin_column(ds, 0, 32, with_bounds=True)
        assert absorb_insert(bounds, [0.5]).tolist() == [0]

    def test_insert_at_exact_boundary_value(self, rng):
        ds = dataset_from_arrays({"v": rng.random(5000)})
        _, bounds = bin_column(ds, 0, 32, with_bounds=True)
        probe = bounds.first_values[len(bounds.first_values) // 2]
        k = [i for i, v in enumerate(bounds.first_values) if v == probe][-1]
        expected = int(bounds.bins_of_nonempty[k])
        assert absorb_insert(bounds, [probe]).tolist() == [expected]

    def test_missing_bounds_rejected(self):
        with pytest.raises(BinningError, match="no saved"):
            absorb_insert(None, [1.0])

    def test_inserts_against_recomputed_exact_bins(self, rng):
        n = 1_000_000
        values = rng.random(n)
        ds = dataset_from_arrays({"v": values})
        _, bounds = bin_column(ds, 0, 128, with_bounds=True)
        new_values = rng.random(100)
        got = absorb_insert(bounds, list(new_values))
        combined = dataset_from_arrays({"v": np.concatenate([values, new_values])})
        exact = bin_exact(combined, 0, None, 128).bins[n:]
        assert np.abs(got.astype(int) - exact.astype(int)).max() <= 1
