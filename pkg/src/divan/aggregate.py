"""Dense B^3 group-by cubes over binned columns, on the CPU.

For N binned dimensions there are C(N,3) cubes, one per dimension triple.
Cube cells are laid out ((b0*B)+b1)*B+b2 with b0 the first (and slab) axis.

Two loop orders are provided. Record-major walks rows and updates every
cube per row; it is the reference. Scan-major walks cubes and scans the
input once per cube (or once per cube slab when partitioned), giving each
task a disjoint output range so tasks need no synchronization. Counts are
integer-exact everywhere; sums accumulate in float64 in input row order per
cell, so all paths and partition counts agree bit-for-bit.
"""

from __future__ import annotations

import itertools
import json
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AggregationError

Triple = tuple[int, int, int]

# Cube element widths as exported/accounted: counts and float32 sums are
# 4-byte, float64 sums 8-byte. Accumulation is wider (int64 / float64).
_ELEM_CODES = {"count": 0, "sum32": 1, "sum64": 2}
_ELEM_NAMES = {v: k for k, v in _ELEM_CODES.items()}


@dataclass(frozen=True)
class AggSpec:
    function: str  # "count" or "sum"
    value_column: str | None = None
    width: int = 4  # exported element bytes: 4 or 8

    def __post_init__(self):
        if self.function not in ("count", "sum"):
            raise AggregationError(f"unknown aggregate function {self.function!r}")
        if self.function == "sum" and not self.value_column:
            raise AggregationError("sum aggregation requires a value column")
        if self.width not in (4, 8):
            raise AggregationError("element width must be 4 or 8 bytes")

    @property
    def elem_kind(self) -> str:
        if self.function == "count":
            return "count"
        return "sum32" if self.width == 4 else "sum64"

    @property
    def elem_size(self) -> int:
        return 4 if self.elem_kind in ("count", "sum32") else 8

    @property
    def accum_dtype(self):
        return np.int64 if self.function == "count" else np.float64

    @property
    def export_dtype(self):
        if self.function == "count":
            return np.int32
        return np.float32 if self.width == 4 else np.float64

    @staticmethod
    def parse(text: str) -> "AggSpec":
        """Parse CLI syntax: "count", "sum:<col>" (f32) or "sum64:<col>"."""
        if text == "count":
            return AggSpec("count")
        for prefix, width in (("sum64:", 8), ("sum:", 4)):
            if text.startswith(prefix):
                return AggSpec("sum", text[len(prefix):], width)
        raise AggregationError(f"cannot parse aggregate spec {text!r}")


@dataclass
class AggregateCube:
    triple: Triple
    B: int
    cells: np.ndarray  # flat length B^3, accumulation dtype
    spec: AggSpec

    @property
    def grid(self) -> np.ndarray:
        return self.cells.reshape(self.B, self.B, self.B)

    def export_cells(self) -> np.ndarray:
        """Cells in the exported element dtype (int32 counts when safe)."""
        if self.spec.function == "count" and self.cells.max(initial=0) > np.iinfo(np.int32).max:
            return self.cells
        return self.cells.astype(self.spec.export_dtype)


def enumerate_triples(N: int) -> list[Triple]:
    """All C(N,3) ascending dimension triples, lexicographically ordered."""
    if N < 3:
        raise AggregationError(f"need at least 3 dimensions, got {N}")
    return list(itertools.combinations(range(N), 3))


def _check_inputs(binned: list[np.ndarray], B: int, values, spec: AggSpec):
    n = len(binned[0])
    for i, col in enumerate(binned):
        if len(col) != n:
            raise AggregationError("binned columns have differing lengths")
        if n and int(col.max()) >= B:
            raise AggregationError(f"bin value >= B in column {i}")
    if spec.function == "sum":
        if values is None or len(values) != n:
            raise AggregationError("sum aggregation needs one value per row")


def _flat_index(binned, t: Triple, B: int) -> np.ndarray:
    d0, d1, d2 = t
    idx = binned[d0].astype(np.int64)
    idx = idx * B + binned[d1]
    idx = idx * B + binned[d2]
    return idx


def _accumulate(idx: np.ndarray, values, spec: AggSpec, length: int) -> np.ndarray:
    if spec.function == "count":
        return np.bincount(idx, minlength=length).astype(np.int64)
    return np.bincount(idx, weights=values, minlength=length)


def aggregate_record_major(
    binned: list[np.ndarray],
    values: np.ndarray | None,
    spec: AggSpec,
    triples: list[Triple],
    B: int,
) -> list[AggregateCube]:
    """Reference path: every row contributes to every requested cube."""
    _check_inputs(binned, B, values, spec)
    vals = None if spec.function == "count" else np.asarray(values, dtype=np.float64)
    cubes = []
    for t in triples:
        idx = _flat_index(binned, t, B)
        cells = _accumulate(idx, vals, spec, B**3)
        cubes.append(AggregateCube(t, B, cells, spec))
    return cubes


def aggregate_scan_major(
    binned: list[np.ndarray],
    values: np.ndarray | None,
    spec: AggSpec,
    triples: list[Triple],
    B: int,
    partitions: int = 1,
    threads: int | None = None,
) -> list[AggregateCube]:
    """Cube-major path with optional output partitioning.

    With `partitions` = P > 1 each cube splits into P contiguous slabs along
    its first dimension's bin axis and the input is scanned once per slab,
    touching a smaller output range per scan. Each (cube, slab) task owns a
    disjoint output range, so tasks run in parallel without locks.
    """
    if partitions < 1 or B % partitions != 0:
        raise AggregationError(f"partitions={partitions} must divide B={B}")
    _check_inputs(binned, B, values, spec)
    vals = None if spec.function == "count" else np.asarray(values, dtype=np.float64)
    slab_bins = B // partitions
    cubes = [AggregateCube(t, B, np.zeros(B**3, dtype=spec.accum_dtype), spec) for t in triples]

    def run_task(task):
        cube, slab = task
        d0 = cube.triple[0]
        b0 = binned[d0]
        lo = slab * slab_bins
        if partitions == 1:
            rows = slice(None)
            base = b0.astype(np.int64)
        else:
            rows = (b0 >= lo) & (b0 < lo + slab_bins)
            base = b0[rows].astype(np.int64) - lo
        idx = (base * B + binned[cube.triple[1]][rows]) * B + binned[cube.triple[2]][rows]
        v = None if vals is None else vals[rows]
        cells = _accumulate(idx, v, spec, slab_bins * B * B)
        cube.cells[lo * B * B : (lo + slab_bins) * B * B] = cells

    tasks = [(cube, slab) for cube in cubes for slab in range(partitions)]
    if threads == 1 or len(tasks) == 1:
        for task in tasks:
            run_task(task)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_task, tasks))
    return cubes


def bench_partitions(
    binned: list[np.ndarray],
    values: np.ndarray | None,
    spec: AggSpec,
    triples: list[Triple],
    B: int,
    candidates: tuple[int, ...] = (1, 2, 4),
    repeats: int = 3,
    threads: int | None = None,
) -> dict[int, float]:
    """Time scan-major at each partition count; best wall time per P.

    Partition payoff is machine-dependent (it trades extra input scans for a
    smaller hot output range), so results are reported, never asserted.
    """
    timings: dict[int, float] = {}
    for P in candidates:
        if B % P != 0:
            continue
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            aggregate_scan_major(binned, values, spec, triples, B, partitions=P, threads=threads)
            best = min(best, time.perf_counter() - t0)
        timings[P] = best
    return timings


def autotune_partitions(binned, values, spec, triples, B, candidates=(1, 2, 4)) -> int:
    """Pick the fastest partition count on a micro-benchmark of this input."""
    sample = triples[: max(1, min(4, len(triples)))]
    timings = bench_partitions(binned, values, spec, sample, B, candidates, repeats=2)
    return min(timings, key=timings.get)


# ---------------------------------------------------------------------------
# Cube directory format: one file per triple with a fixed 24-byte header
# (magic, version, triple, B, element kind) followed by little-endian cells.
# ---------------------------------------------------------------------------

_CUBE_MAGIC = b"DVCB"
_CUBE_VERSION = 1
_HEADER = struct.Struct("<4sHHHHIBxxxxxxx")  # magic, ver, d0,d1,d2, B, elem


def cube_filename(t: Triple) -> str:
    return f"cube_{t[0]:03d}_{t[1]:03d}_{t[2]:03d}.bin"


def save_cube(cube: AggregateCube, dirpath: str | Path) -> Path:
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    cells = cube.export_cells()
    elem = _ELEM_CODES[cube.spec.elem_kind]
    header = _HEADER.pack(
        _CUBE_MAGIC, _CUBE_VERSION, cube.triple[0], cube.triple[1], cube.triple[2], cube.B, elem
    )
    out = dirpath / cube_filename(cube.triple)
    with open(out, "wb") as f:
        f.write(header)
        f.write(cells.astype(cells.dtype.newbyteorder("<")).tobytes())
    return out


def load_cube(path: str | Path, spec: AggSpec | None = None) -> AggregateCube:
    data = Path(path).read_bytes()
    magic, version, d0, d1, d2, B, elem = _HEADER.unpack_from(data)
    if magic != _CUBE_MAGIC or version != _CUBE_VERSION:
        raise AggregationError(f"{path} is not a version-{_CUBE_VERSION} cube file")
    kind = _ELEM_NAMES[elem]
    dtype = {"count": np.int32, "sum32": np.float32, "sum64": np.float64}[kind]
    cells = np.frombuffer(data, dtype=np.dtype(dtype).newbyteorder("<"), offset=_HEADER.size)
    if len(cells) != B**3:
        raise AggregationError(f"{path}: expected {B**3} cells, found {len(cells)}")
    if spec is None:
        spec = AggSpec("count") if kind == "count" else AggSpec("sum", "?", 4 if kind == "sum32" else 8)
    accum = cells.astype(spec.accum_dtype)
    return AggregateCube((d0, d1, d2), B, accum, spec)


def save_cube_dir(cubes: list[AggregateCube], dirpath: str | Path, extra: dict | None = None):
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for cube in cubes:
        save_cube(cube, dirpath)
    index = {
        "elem": cubes[0].spec.elem_kind if cubes else "count",
        "bins": cubes[0].B if cubes else 0,
        "cubes": [
            {"triple": list(c.triple), "file": cube_filename(c.triple)} for c in cubes
        ],
    }
    if extra:
        index.update(extra)
    (dirpath / "index.json").write_text(json.dumps(index, indent=1))


def load_cube_dir(dirpath: str | Path) -> list[AggregateCube]:
    dirpath = Path(dirpath)
    index_path = dirpath / "index.json"
    if not index_path.exists():
        raise AggregationError(f"{dirpath} has no index.json")
    index = json.loads(index_path.read_text())
    return [load_cube(dirpath / entry["file"]) for entry in index["cubes"]]
