"""Columnar dataset ingestion, dimension declaration, and argsort preprocessing.

A dataset is a set of equal-length columns plus a list of dimensions. A
dimension orders the rows by one column, or by a (primary, secondary) column
pair compared lexicographically. Preprocessing computes, for every dimension,
a rank column: ranks[t] is the position of row t in the dimension's sort
order. Ranks are computed once and persisted; later binning works on ranks
only, never on the raw domain again.

All column kinds normalize to fixed-width numerics at ingest:

    integer   -> int64
    float64   -> float64
    timestamp -> int64 epoch seconds (UTC)
    text      -> int32 codes into a lexicographically sorted vocabulary

Nulls are kept in a separate boolean mask and sort first by default
(``nulls_first=False`` puts them last).
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DatasetError, IntegrityError

FORMAT_VERSION = 1

COLUMN_KINDS = ("integer", "float64", "text", "timestamp")

_KIND_DTYPE = {
    "integer": np.int64,
    "float64": np.float64,
    "timestamp": np.int64,
    "text": np.int32,
}


@dataclass
class ColumnSchema:
    name: str
    kind: str
    nulls_first: bool = True

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise DatasetError(f"unknown column kind {self.kind!r} for {self.name!r}")


@dataclass
class DimensionSpec:
    """An ordered axis: one source column, or a lexicographic column pair."""

    id: int
    source: tuple[str, ...]

    @property
    def is_composite(self) -> bool:
        return len(self.source) == 2

    def label(self) -> str:
        return "+".join(self.source)


@dataclass
class SortedIndexColumn:
    dim: int
    ranks: np.ndarray  # int64; ranks[t] = sorted position of row t


@dataclass
class Column:
    schema: ColumnSchema
    values: np.ndarray
    null_mask: np.ndarray | None = None  # True where null
    vocab: list[str] | None = None  # text columns only

    def original_value(self, row: int):
        """Domain value at `row` as a JSON-friendly scalar (None for null)."""
        if self.null_mask is not None and self.null_mask[row]:
            return None
        v = self.values[row]
        if self.schema.kind == "text":
            return self.vocab[int(v)]
        if self.schema.kind == "timestamp":
            return datetime.fromtimestamp(int(v), tz=timezone.utc).isoformat()
        if self.schema.kind == "float64":
            return float(v)
        return int(v)


@dataclass
class Dataset:
    columns: dict[str, Column]
    dims: list[DimensionSpec] = field(default_factory=list)
    sorted_indexes: dict[int, SortedIndexColumn] = field(default_factory=dict)
    row_count: int = 0
    value_columns: dict[str, int] = field(default_factory=dict)  # name -> elem width

    @property
    def num_dims(self) -> int:
        return len(self.dims)

    def column(self, name: str) -> Column:
        try:
            return self.columns[name]
        except KeyError:
            raise DatasetError(f"unknown column {name!r}") from None

    def dim(self, dim_id: int) -> DimensionSpec:
        if not 0 <= dim_id < len(self.dims):
            raise DatasetError(f"unknown dimension id {dim_id}")
        return self.dims[dim_id]

    def ranks(self, dim_id: int) -> np.ndarray:
        if dim_id not in self.sorted_indexes:
            raise DatasetError(f"dimension {dim_id} has no sorted index; run preprocess()")
        return self.sorted_indexes[dim_id].ranks

    @property
    def is_preprocessed(self) -> bool:
        return bool(self.dims) and all(d.id in self.sorted_indexes for d in self.dims)

    def dim_value(self, dim_id: int, row: int):
        """Original domain value of `row` along a dimension.

        Composite dimensions report both components as a 2-list.
        """
        spec = self.dim(dim_id)
        if spec.is_composite:
            return [self.column(c).original_value(row) for c in spec.source]
        return self.column(spec.source[0]).original_value(row)


def _parse_timestamp(s: str) -> int:
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _convert_column(raw, schema: ColumnSchema) -> Column:
    """Convert raw cells to the column's storage dtype.

    Empty cells are nulls. Conversion is vectorized; when numpy rejects
    the batch (or uses a parse the cell-level converters would refuse),
    a per-cell pass locates the offender and raises with its (1-based
    row, column name) location.
    """
    n = len(raw)
    cells = np.asarray(raw, dtype="U")
    mask = cells == ""
    has_nulls = bool(mask.any())

    if schema.kind == "text":
        vocab_arr, inverse = np.unique(cells, return_inverse=True)
        if has_nulls:  # "" sorts first in the vocab; strip it out
            vocab = vocab_arr[1:].tolist()
            values = np.maximum(inverse.astype(np.int32) - 1, 0)
        else:
            vocab = vocab_arr.tolist()
            values = inverse.astype(np.int32)
        return Column(schema, values, mask if has_nulls else None, vocab)

    if schema.kind == "integer":
        filler, conv = "0", int
    elif schema.kind == "float64":
        filler, conv = "0", float
    else:
        filler, conv = "1970-01-01 00:00:00", _parse_timestamp
    filled = np.where(mask, filler, cells) if has_nulls else cells
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error")  # e.g. timezone suffixes: use the slow path
            if schema.kind == "timestamp":
                values = filled.astype("datetime64[s]").astype(np.int64)
            else:
                values = filled.astype(_KIND_DTYPE[schema.kind])
    except (ValueError, Warning):
        values = np.zeros(n, dtype=_KIND_DTYPE[schema.kind])
        for i, cell in enumerate(raw):
            if mask[i]:
                continue
            try:
                values[i] = conv(cell)
            except (ValueError, OverflowError):
                raise DatasetError(
                    f"cannot parse {cell!r} as {schema.kind} at row {i + 1}, "
                    f"column {schema.name!r}"
                ) from None
    return Column(schema, values, mask if has_nulls else None)


def ingest_delimited(
    path: str | Path,
    schema: list[ColumnSchema],
    delimiter: str = ",",
    header: bool = True,
) -> Dataset:
    """Parse a delimited text file into a Dataset.

    With `header=True` the first line must name every schema column (order
    free); otherwise fields are taken in schema order. Rows with a wrong
    field count or unparsable cells fail with their location.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"input file {path} does not exist")
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise DatasetError("duplicate column names in schema")

    with open(path, newline="") as f:
        reader = csv.reader(f, delimiter=delimiter)
        rows = [row for row in reader if row]  # blank lines are skipped

    if header:
        if not rows:
            raise DatasetError(f"{path} is empty")
        head, rows = rows[0], rows[1:]
        missing = set(names) - set(head)
        if missing:
            raise DatasetError(f"header is missing columns {sorted(missing)}")
        positions = [head.index(n) for n in names]
    else:
        positions = list(range(len(names)))

    if not rows:
        raise DatasetError(f"{path} contains no data rows")

    width = max(positions) + 1
    for i, row in enumerate(rows):
        if len(row) < width:
            raise DatasetError(f"row {i + 1} has {len(row)} fields, expected >= {width}")
    transposed = list(zip(*rows))  # ragged longer rows lose their extra fields

    columns = {c.name: _convert_column(transposed[positions[j]], c) for j, c in enumerate(schema)}
    return Dataset(columns=columns, row_count=len(rows))


def declare_dimension(dataset: Dataset, source: str) -> DimensionSpec:
    """Append a single-column dimension with the next free id."""
    dataset.column(source)
    spec = DimensionSpec(id=len(dataset.dims), source=(source,))
    dataset.dims.append(spec)
    return spec


def make_composite(dataset: Dataset, primary: str, secondary: str) -> DimensionSpec:
    """Append a lexicographic (primary, secondary) dimension.

    Rows compare by the primary column first; ties fall through to the
    secondary. A column paired with itself degenerates to the column alone.
    """
    dataset.column(primary)
    dataset.column(secondary)
    spec = DimensionSpec(id=len(dataset.dims), source=(primary, secondary))
    dataset.dims.append(spec)
    return spec


def _dim_sort_keys(dataset: Dataset, spec: DimensionSpec) -> tuple[np.ndarray, ...]:
    """Keys for np.lexsort, least significant first."""
    keys: list[np.ndarray] = []
    for name in reversed(spec.source):
        col = dataset.column(name)
        if col.null_mask is None:
            keys.append(col.values)
        else:
            null_key = col.null_mask.view(np.int8).astype(np.int8)
            if col.schema.nulls_first:
                null_key = 1 - null_key  # null -> 0 sorts first
            values = col.values.copy()
            values[col.null_mask] = 0
            keys.append(values)
            keys.append(null_key)
    return tuple(keys)


def preprocess(dataset: Dataset) -> Dataset:
    """Populate every dimension's rank column (stable argsort).

    Rank columns are independent per dimension; safe to compute in parallel.
    Done once per dataset; all later binning reads ranks only.
    """
    if not dataset.dims:
        raise DatasetError("no dimensions declared")
    n = dataset.row_count
    for spec in dataset.dims:
        if spec.id in dataset.sorted_indexes:
            continue
        order = np.lexsort(_dim_sort_keys(dataset, spec))
        ranks = np.empty(n, dtype=np.int64)
        ranks[order] = np.arange(n, dtype=np.int64)
        dataset.sorted_indexes[spec.id] = SortedIndexColumn(dim=spec.id, ranks=ranks)
    return dataset


def set_value_column(dataset: Dataset, name: str, width: int) -> None:
    """Mark a column as aggregatable with a 4- or 8-byte cube element."""
    if width not in (4, 8):
        raise DatasetError(f"value column width must be 4 or 8, got {width}")
    dataset.column(name)
    dataset.value_columns[name] = width


# ---------------------------------------------------------------------------
# Persistence: one little-endian binary file per column and per rank column,
# plus header.json with schema, dims, and sha256 checksums.
# ---------------------------------------------------------------------------

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_array(dirpath: Path, fname: str, arr: np.ndarray) -> tuple[str, str]:
    data = np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes()
    (dirpath / fname).write_bytes(data)
    return fname, _sha256(data)


def save_preprocessed(dataset: Dataset, dirpath: str | Path) -> None:
    """Persist a preprocessed dataset to a directory; round-trip is bit-exact."""
    if not dataset.is_preprocessed:
        raise DatasetError("dataset is not preprocessed; run preprocess() first")
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    checksums: dict[str, str] = {}
    col_meta = []
    for name, col in dataset.columns.items():
        fname, digest = _write_array(dirpath, f"col_{name}.bin", col.values)
        checksums[fname] = digest
        meta = {
            "name": name,
            "kind": col.schema.kind,
            "nulls_first": col.schema.nulls_first,
            "dtype": str(col.values.dtype),
            "file": fname,
        }
        if col.null_mask is not None:
            nf, nd = _write_array(dirpath, f"col_{name}.nulls.bin", col.null_mask.view(np.uint8))
            checksums[nf] = nd
            meta["nulls_file"] = nf
        if col.vocab is not None:
            vf = f"col_{name}.vocab.json"
            (dirpath / vf).write_text(json.dumps(col.vocab))
            meta["vocab_file"] = vf
        col_meta.append(meta)

    rank_meta = []
    for dim_id, sic in sorted(dataset.sorted_indexes.items()):
        fname, digest = _write_array(dirpath, f"rank_{dim_id}.bin", sic.ranks)
        checksums[fname] = digest
        rank_meta.append({"dim": dim_id, "file": fname})

    header = {
        "format_version": FORMAT_VERSION,
        "row_count": dataset.row_count,
        "columns": col_meta,
        "dims": [{"id": d.id, "source": list(d.source)} for d in dataset.dims],
        "value_columns": dataset.value_columns,
        "ranks": rank_meta,
        "checksums": checksums,
    }
    (dirpath / "header.json").write_text(json.dumps(header, indent=1))


def dataset_fingerprint(dirpath: str | Path) -> str:
    """Stable digest of a dataset directory (drives job content addressing)."""
    header = Path(dirpath) / "header.json"
    if not header.exists():
        raise DatasetError(f"{dirpath} is not a preprocessed dataset directory")
    meta = json.loads(header.read_text())
    return _sha256(json.dumps(meta.get("checksums", {}), sort_keys=True).encode())


def load_preprocessed(dirpath: str | Path, verify: bool = True) -> Dataset:
    """Load a dataset directory written by save_preprocessed.

    With `verify=True` every binary file is re-hashed against the header;
    a mismatch raises IntegrityError.
    """
    dirpath = Path(dirpath)
    header_path = dirpath / "header.json"
    if not header_path.exists():
        raise DatasetError(f"{dirpath} is not preprocessed (no header.json)")
    header = json.loads(header_path.read_text())
    if header.get("format_version") != FORMAT_VERSION:
        raise IntegrityError(
            f"on-disk format version {header.get('format_version')} != {FORMAT_VERSION}"
        )
    checksums = header.get("checksums", {})

    def read_array(fname: str, dtype) -> np.ndarray:
        data = (dirpath / fname).read_bytes()
        if verify and checksums.get(fname) != _sha256(data):
            raise IntegrityError(f"checksum mismatch for {fname}")
        return np.frombuffer(data, dtype=np.dtype(dtype).newbyteorder("<")).astype(dtype)

    columns: dict[str, Column] = {}
    for meta in header["columns"]:
        schema = ColumnSchema(meta["name"], meta["kind"], meta["nulls_first"])
        values = read_array(meta["file"], meta["dtype"])
        mask = None
        if "nulls_file" in meta:
            mask = read_array(meta["nulls_file"], np.uint8).view(bool).copy()
        vocab = None
        if "vocab_file" in meta:
            vocab = json.loads((dirpath / meta["vocab_file"]).read_text())
        columns[meta["name"]] = Column(schema, values, mask, vocab)

    dataset = Dataset(
        columns=columns,
        dims=[DimensionSpec(d["id"], tuple(d["source"])) for d in header["dims"]],
        row_count=header["row_count"],
        value_columns={k: int(v) for k, v in header.get("value_columns", {}).items()},
    )
    for meta in header["ranks"]:
        ranks = read_array(meta["file"], np.int64)
        dataset.sorted_indexes[meta["dim"]] = SortedIndexColumn(meta["dim"], ranks)
    return dataset
