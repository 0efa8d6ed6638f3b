"""Equidepth binning of dimensions, exact and histogram-approximate.

Both paths assign each analyzed row a bin in [0, B) so that bins hold
(approximately) equal numbers of rows. A frequent value may span several
bins; bin index is a function of sort position, not of the value.

Exact path: stable-sort the analyzed subset along the dimension; position p
gets bin p // ceil(n/B).

Approximate path: reuse the preprocessed rank column. Ranks are scattered
into a 2^20-bucket histogram by their upper 20 bits, the histogram is
prefix-scanned into a bucket->bin table, and rows read their bin back
through the table. Three passes, no sorting. Subsets smaller than 1/2^13 of
the preprocessed dataset make the histogram too sparse per bucket and must
use the exact path instead; that condition raises SubsetTooSmallError
rather than returning skewed bins.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import BinningError, SubsetTooSmallError

HISTO_BITS = 20
HISTO_SIZE = 1 << HISTO_BITS  # 1,048,576
MIN_SUBSET_FRACTION = 2.0**-13


def _bins_dtype(B: int):
    return np.uint8 if B <= 256 else np.int32


def index_bits(total_num_tuples: int) -> int:
    """Bits needed to represent a rank: ceil(log2(total))."""
    if total_num_tuples < 1:
        raise BinningError("total_num_tuples must be >= 1")
    return (total_num_tuples - 1).bit_length()


def histogram_geometry(total_num_tuples: int) -> tuple[int, int]:
    """(shift, effective bucket count) for a dataset of the given size.

    For datasets below 2^20 rows the shift would go negative; it clamps to
    0 and the histogram shrinks to 2^idx_bits buckets (one rank per bucket,
    which degenerates to exact binning).
    """
    idx_bits = index_bits(total_num_tuples)
    shift = max(0, idx_bits - HISTO_BITS)
    size = 1 << min(idx_bits, HISTO_BITS)
    return shift, max(size, 1)


@dataclass
class Histogram:
    buckets: np.ndarray  # int64 counts, later replaced by bin indices
    shift: int
    idx_bits: int


@dataclass
class BinnedColumn:
    dim: int
    bins: np.ndarray  # one entry per analyzed row, values in [0, B)
    B: int
    rows: np.ndarray | None = None  # analyzed row indices; None = all rows

    def row_indices(self, row_count: int) -> np.ndarray:
        if self.rows is None:
            return np.arange(row_count, dtype=np.int64)
        return self.rows


@dataclass
class BucketBounds:
    """Enough of a finished histogram to bin a few inserted rows later.

    first_values[i] is the original domain value of the first row (in input
    order) that landed in nonempty bucket `nonempty[i]`; bins_of_nonempty[i]
    is that bucket's bin. Values are nondecreasing across nonempty buckets;
    None marks a bucket first entered by a null row.
    """

    dim: int
    B: int
    shift: int
    nonempty: np.ndarray
    first_values: list
    bins_of_nonempty: np.ndarray
    nulls_first: bool = True


@dataclass
class BinBoundaries:
    dim: int
    B: int
    ranges: list  # per bin: (lo, hi) original values, or None for empty

    def to_jsonable(self) -> dict:
        return {
            "dim": self.dim,
            "bins": self.B,
            "ranges": [list(r) if r is not None else None for r in self.ranges],
        }


def _subset_sort_positions(dataset: Dataset, dim: int, rows: np.ndarray) -> np.ndarray:
    """Position of each subset row in the subset's stable dimension order."""
    if dim in dataset.sorted_indexes:
        keys = (dataset.sorted_indexes[dim].ranks[rows],)
    else:
        from .dataset import _dim_sort_keys

        keys = tuple(k[rows] for k in _dim_sort_keys(dataset, dataset.dim(dim)))
    order = np.lexsort(keys)
    positions = np.empty(len(rows), dtype=np.int64)
    positions[order] = np.arange(len(rows), dtype=np.int64)
    return positions


def bin_exact(dataset: Dataset, dim: int, rows: np.ndarray | None, B: int) -> BinnedColumn:
    """Bin by sort order: sorted position p gets bin p // ceil(n/B).

    The final bin may be underfull (it takes the remainder); every earlier
    occupied bin holds exactly ceil(n/B) rows.
    """
    if B < 2:
        raise BinningError(f"need at least 2 bins, got {B}")
    all_rows = rows is None
    if all_rows:
        rows = np.arange(dataset.row_count, dtype=np.int64)
    n = len(rows)
    if n == 0:
        raise BinningError("empty row subset")
    if B > n:
        raise BinningError(f"more bins ({B}) than rows ({n})")
    tuples_per_bin = -(-n // B)
    positions = _subset_sort_positions(dataset, dim, rows)
    bins = (positions // tuples_per_bin).astype(_bins_dtype(B))
    return BinnedColumn(dim=dim, bins=bins, B=B, rows=None if all_rows else rows)


def build_histogram(sorted_ranks: np.ndarray, total_num_tuples: int) -> Histogram:
    """Pass 1: scatter ranks into buckets by their upper bits."""
    shift, size = histogram_geometry(total_num_tuples)
    bucket_idx = sorted_ranks >> shift
    buckets = np.bincount(bucket_idx, minlength=size)
    return Histogram(buckets=buckets, shift=shift, idx_bits=index_bits(total_num_tuples))


def bin_approx(
    sorted_ranks: np.ndarray,
    total_num_tuples: int,
    B: int,
    values=None,
    dim: int = -1,
    nulls_first: bool = True,
) -> tuple[BinnedColumn, BucketBounds | None]:
    """Bin a subset through the rank histogram, without sorting.

    `sorted_ranks` are the preprocessed ranks of the analyzed rows, in row
    order. When `values` (the rows' original domain values, same order) is
    given, the finished histogram's bucket boundaries are captured and
    returned for absorbing later inserts.

    Raises SubsetTooSmallError below the 1/2^13 subset fraction; callers
    should fall back to bin_exact.
    """
    if B < 2:
        raise BinningError(f"need at least 2 bins, got {B}")
    num_tuples = len(sorted_ranks)
    if num_tuples == 0:
        raise BinningError("empty row subset")
    if num_tuples > total_num_tuples:
        raise BinningError("subset larger than preprocessed dataset")
    if num_tuples * (1 << 13) < total_num_tuples:
        raise SubsetTooSmallError(
            f"subset is {num_tuples}/{total_num_tuples} < 2^-13 of the dataset; "
            "bin it exactly instead"
        )

    histo = build_histogram(sorted_ranks, total_num_tuples)
    bucket_idx = sorted_ranks >> histo.shift

    # Pass 2: replace counts with bin index = rows-seen-before // tuples_per_bin.
    tuples_per_bin = -(-num_tuples // B)
    counts = histo.buckets
    seen_before = np.cumsum(counts) - counts
    bucket_bin = seen_before // tuples_per_bin
    histo.buckets = bucket_bin

    # Pass 3: rows read their bin through the table.
    bins = bucket_bin[bucket_idx].astype(_bins_dtype(B))
    binned = BinnedColumn(dim=dim, bins=bins, B=B)

    bounds = None
    if values is not None:
        nonempty, first_pos = np.unique(bucket_idx, return_index=True)
        first_values = [values[int(i)] for i in first_pos]
        bounds = BucketBounds(
            dim=dim,
            B=B,
            shift=histo.shift,
            nonempty=nonempty,
            first_values=first_values,
            bins_of_nonempty=bucket_bin[nonempty],
            nulls_first=nulls_first,
        )
    return binned, bounds


def absorb_insert(bounds: BucketBounds, new_values) -> np.ndarray:
    """Bin freshly inserted rows through saved bucket boundaries.

    Each value goes to the rightmost bucket whose first value is <= it, and
    takes that bucket's bin; existing rows keep their bins. Values below
    every recorded boundary take bucket 0's bin (which is bin 0 by
    construction). Null inserts follow the dimension's null placement.
    """
    if bounds is None:
        raise BinningError("no saved bucket bounds for this dimension")
    keyed = [(i, v) for i, v in enumerate(bounds.first_values) if v is not None]
    positions = [i for i, _ in keyed]
    boundary_values = [v for _, v in keyed]
    null_bin = 0 if bounds.nulls_first else int(bounds.bins_of_nonempty[-1])

    out = np.empty(len(new_values), dtype=_bins_dtype(bounds.B))
    for j, v in enumerate(new_values):
        if v is None:
            out[j] = null_bin
            continue
        k = bisect.bisect_right(boundary_values, v) - 1
        if k < 0:
            out[j] = 0  # below all boundaries: bucket 0's bin
        else:
            out[j] = int(bounds.bins_of_nonempty[positions[k]])
    return out


def bin_boundaries(dataset: Dataset, dim: int, binned: BinnedColumn) -> BinBoundaries:
    """Per-bin (min, max) of the original dimension values.

    Row bins are monotone in rank for both binning paths, so each bin's
    extremes are its first and last rows in dimension order. Composite
    dimensions report both components per endpoint.
    """
    rows = binned.row_indices(dataset.row_count)
    positions = _subset_sort_positions(dataset, dim, rows)
    order = np.argsort(positions, kind="stable")
    sorted_rows = rows[order]
    sorted_bins = np.asarray(binned.bins, dtype=np.int64)[order]
    if len(sorted_bins) > 1 and (np.diff(sorted_bins) < 0).any():
        raise BinningError("bins are not monotone in rank; cannot derive boundaries")

    starts = np.searchsorted(sorted_bins, np.arange(binned.B), side="left")
    ends = np.searchsorted(sorted_bins, np.arange(binned.B), side="right")
    ranges = []
    for b in range(binned.B):
        if starts[b] == ends[b]:
            ranges.append(None)
        else:
            lo = dataset.dim_value(dim, int(sorted_rows[starts[b]]))
            hi = dataset.dim_value(dim, int(sorted_rows[ends[b] - 1]))
            ranges.append((lo, hi))
    return BinBoundaries(dim=dim, B=binned.B, ranges=ranges)


def dim_values(dataset: Dataset, dim: int, rows: np.ndarray) -> list:
    """Original domain values for rows along a dimension (None for nulls)."""
    spec = dataset.dim(dim)
    cols = [dataset.column(name) for name in spec.source]
    out = []
    for r in rows:
        r = int(r)
        vals = []
        for col in cols:
            if col.null_mask is not None and col.null_mask[r]:
                vals.append(None)
            else:
                v = col.values[r]
                vals.append(col.vocab[int(v)] if col.vocab is not None else v.item())
        out.append(tuple(vals) if spec.is_composite else vals[0])
    return out


def bin_column(
    dataset: Dataset,
    dim: int,
    B: int,
    rows: np.ndarray | None = None,
    exact: bool = False,
    with_bounds: bool = False,
) -> tuple[BinnedColumn, BucketBounds | None]:
    """Bin one dimension, routing to the right path.

    Uses the approximate histogram path on preprocessed ranks; falls back
    to exact sorting when asked, when the dataset isn't preprocessed, or
    when the subset is below the 1/2^13 threshold.
    """
    if exact or dim not in dataset.sorted_indexes:
        return bin_exact(dataset, dim, rows, B), None
    row_idx = rows if rows is not None else np.arange(dataset.row_count, dtype=np.int64)
    ranks = dataset.sorted_indexes[dim].ranks[row_idx]
    values = dim_values(dataset, dim, row_idx) if with_bounds else None
    nulls_first = dataset.column(dataset.dim(dim).source[0]).schema.nulls_first
    try:
        binned, bounds = bin_approx(
            ranks, dataset.row_count, B, values=values, dim=dim, nulls_first=nulls_first
        )
    except SubsetTooSmallError:
        return bin_exact(dataset, dim, rows, B), None
    binned.rows = rows
    return binned, bounds
