"""Functional simulator for plan execution on a PIM-style DPU array.

The simulated machine is a host CPU plus D weak workers (DPUs), each with
64 MB main memory (MRAM) holding its aggregate slabs and inbox, and 64 KB
of scratch (WRAM) through which tuples are staged in 32 KB batches. DPUs
cannot talk to each other; all data moves through the host.

The host routes rows in fill rounds: one thread per group appends every row
to the buffer of the DPU owning that row's (group, common-dimension-bin)
subgroup, striping round-robin over replicas when the grid is duplicated.
As soon as any single 320 KB buffer fills, all threads stop, every buffer
is shipped to its DPU, the DPUs run, and routing resumes. Sync mode blocks
the host during DPU execution; async mode fills the next round's buffers
while DPUs process the current one. Either way the same tuples reach the
same DPUs in the same order, so results are identical; only the overlap
accounting differs.

The simulation is value-exact but not cycle-accurate: it counts tuples,
bytes, buffer rounds, and staging batches instead of modeling the DPU
clock. Counts are integer-exact; sums accumulate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aggregate import AggregateCube, AggSpec, Triple
from .errors import SimInvariantError
from .plan import (
    HOST_BUFFER_BYTES,
    MRAM_BYTES,
    GroupPlan,
    IterationAssignment,
    assign_dpus,
)

WRAM_BYTES = 64 << 10
WRAM_BATCH_BYTES = 32 << 10
DPU_THREADS = 24


@dataclass
class PimConfig:
    dpu_count: int
    mode: str = "sync"
    mram_bytes: int = MRAM_BYTES
    wram_bytes: int = WRAM_BYTES
    dpu_threads: int = DPU_THREADS
    host_buffer_bytes: int = HOST_BUFFER_BYTES
    wram_batch_bytes: int = WRAM_BATCH_BYTES

    def __post_init__(self):
        if self.mode not in ("sync", "async"):
            raise SimInvariantError(f"mode must be sync or async, got {self.mode!r}")
        if self.wram_batch_bytes > self.wram_bytes:
            raise SimInvariantError("staging batch cannot exceed WRAM size")
        if self.dpu_count < 1:
            raise SimInvariantError("need at least one DPU")


def record_bytes(num_dims: int, value_width: int) -> int:
    """Wire size of one routed tuple: N one-byte bins plus the aggregate
    value, padded up to the DPU's 8-byte write granularity."""
    raw = num_dims + value_width
    return (raw + 7) // 8 * 8


@dataclass
class DpuState:
    dpu_id: int
    group: int
    bin_value: int
    replica: int
    common_dim: int
    triples: list[Triple]
    B: int
    slabs: list[np.ndarray] | None  # per triple, (B, B) over the non-common dims
    tuples_received: int = 0
    bytes_in: int = 0
    bytes_out: int = 0
    wram_batches: int = 0


@dataclass
class RunStats:
    dpu_count: int
    mode: str
    per_dpu_tuples: np.ndarray
    active_dpus: np.ndarray  # bool mask: took part in some iteration
    host_fill_batches: int = 0
    bytes_to_dpus: int = 0
    bytes_from_dpus: int = 0
    wram_batches: int = 0
    merged_cells: int = 0
    overlapped_rounds: int = 0
    iterations: list[dict] = field(default_factory=list)

    def balance_ratio(self) -> float:
        counts = self.per_dpu_tuples[self.active_dpus]
        if len(counts) == 0:
            return 1.0
        lo = counts.min()
        return float("inf") if lo == 0 else float(counts.max()) / float(lo)

    def to_jsonable(self) -> dict:
        return {
            "dpu_count": self.dpu_count,
            "mode": self.mode,
            "host_fill_batches": self.host_fill_batches,
            "bytes_to_dpus": self.bytes_to_dpus,
            "bytes_from_dpus": self.bytes_from_dpus,
            "wram_batches": self.wram_batches,
            "merged_cells": self.merged_cells,
            "overlapped_rounds": self.overlapped_rounds,
            "balance_ratio": self.balance_ratio(),
            "per_dpu_tuples": self.per_dpu_tuples.tolist(),
            "iterations": self.iterations,
        }


def _cumcount(vals: np.ndarray, minlength: int) -> np.ndarray:
    """Occurrence index of each element among equal values, in input order."""
    order = np.argsort(vals, kind="stable")
    counts = np.bincount(vals, minlength=minlength)
    starts = np.cumsum(counts) - counts
    pos = np.arange(len(vals), dtype=np.int64) - starts[vals[order]]
    out = np.empty(len(vals), dtype=np.int64)
    out[order] = pos
    return out


def _slab_axes(t: Triple, common_dim: int) -> tuple[int, int]:
    lo, hi = sorted(d for d in t if d != common_dim)
    return lo, hi


def dpu_execute(
    state: DpuState,
    rows: np.ndarray,
    bins_matrix: np.ndarray,
    values: np.ndarray | None,
    rec_bytes: int,
    config: PimConfig,
) -> DpuState:
    """Process one delivered buffer on a DPU.

    Phase 1 stages tuples from MRAM into WRAM, one 32 KB block at a time;
    phase 2 has the DPU's threads sweep the staged block, each updating a
    disjoint slice of the triple list. Value-wise this equals a sequential
    application of all tuples, which is what the simulation computes.
    """
    m = len(rows)
    if m == 0:
        return state
    if int(rows.max()) >= len(bins_matrix):
        raise SimInvariantError("delivered row index out of range")
    own = bins_matrix[rows]
    if (own[:, state.common_dim] != state.bin_value).any():
        raise SimInvariantError(
            f"DPU {state.dpu_id} (bin {state.bin_value}) received a tuple "
            "for a subgroup it does not hold"
        )
    if m * rec_bytes > config.host_buffer_bytes:
        raise SimInvariantError("inbox exceeds the per-DPU buffer size")

    tuples_per_batch = max(1, config.wram_batch_bytes // rec_bytes)
    state.wram_batches += -(-m // tuples_per_batch)
    state.tuples_received += m
    state.bytes_in += m * rec_bytes

    if state.slabs is not None:
        B = state.B
        for slab, t in zip(state.slabs, state.triples):
            lo, hi = _slab_axes(t, state.common_dim)
            idx = own[:, lo].astype(np.int64) * B + own[:, hi]
            if values is None:
                slab += np.bincount(idx, minlength=B * B).reshape(B, B)
            else:
                slab += np.bincount(idx, weights=values[rows], minlength=B * B).reshape(B, B)
    return state


def merge_replicas(slabs: list[np.ndarray]) -> np.ndarray:
    """Cellwise sum of replica slabs; identity for a single replica."""
    if not slabs:
        raise SimInvariantError("nothing to merge")
    shape = slabs[0].shape
    for s in slabs[1:]:
        if s.shape != shape:
            raise SimInvariantError(f"replica shape mismatch: {s.shape} != {shape}")
    if len(slabs) == 1:
        return slabs[0]
    return np.sum(slabs, axis=0)


def _round_boundary(
    bins_matrix: np.ndarray,
    start: int,
    common_dims: list[int],
    threshold: int,
    B: int,
) -> int:
    """Exclusive end of the current fill round.

    The round ends with the row whose delivery makes the first replica
    buffer of any group full; `threshold` is the per-subgroup delivery
    count at which that happens.
    """
    n = len(bins_matrix)
    end = n
    for cd in common_dims:
        vals = bins_matrix[start:end, cd].astype(np.int64)
        occ = _cumcount(vals, B)
        hits = np.flatnonzero(occ == threshold - 1)
        if len(hits):
            end = min(end, start + int(hits[0]) + 1)
    return end


def run(
    bins_matrix: np.ndarray,
    values: np.ndarray | None,
    spec: AggSpec,
    plan: list[GroupPlan],
    bins: int,
    config: PimConfig,
    accumulate: bool = True,
) -> tuple[list[AggregateCube], RunStats]:
    """Execute a plan over binned rows on the simulated DPU array.

    `bins_matrix` is rows x dims (uint8); `values` is one aggregate value
    per row for sums. With `accumulate=False` only routing and transfer
    accounting run (no aggregate memory is allocated), for load and
    transfer studies at scales whose cube output would not fit in RAM.

    Returns assembled cubes (empty list when accumulate=False) and stats.
    """
    n_rows, n_dims = bins_matrix.shape
    if spec.function == "sum":
        values = np.asarray(values, dtype=np.float64)
        if len(values) != n_rows:
            raise SimInvariantError("need one aggregate value per row")
    else:
        values = None
    if n_rows and int(bins_matrix.max()) >= bins:
        raise SimInvariantError("bin value >= B in input rows")

    assignment = assign_dpus(
        plan,
        bins,
        config.dpu_count,
        elem_size=spec.elem_size,
        mram_bytes=config.mram_bytes,
        buffer_bytes=config.host_buffer_bytes,
    )
    B = assignment.B
    rec = record_bytes(n_dims, spec.elem_size)
    capacity = config.host_buffer_bytes // rec
    if capacity < 1:
        raise SimInvariantError("a single tuple does not fit the host buffer")

    stats = RunStats(
        dpu_count=config.dpu_count,
        mode=config.mode,
        per_dpu_tuples=np.zeros(config.dpu_count, dtype=np.int64),
        active_dpus=np.zeros(config.dpu_count, dtype=bool),
    )
    cubes: list[AggregateCube] = []

    for ia in assignment.iterations:
        states = _make_states(ia, spec, accumulate)
        for s in states.values():
            stats.active_dpus[s.dpu_id] = True
        threshold = (capacity - 1) * ia.replication + 1
        slot_counters = np.zeros((ia.num_groups, B), dtype=np.int64)

        rounds = 0
        delivered = 0
        start = 0
        while start < n_rows:
            end = _round_boundary(bins_matrix, start, ia.plan.common_dims, threshold, B)
            rounds += 1
            for g, cd in enumerate(ia.plan.common_dims):
                vals = bins_matrix[start:end, cd].astype(np.int64)
                order = np.argsort(vals, kind="stable")
                sorted_rows = np.arange(start, end, dtype=np.int64)[order]
                sorted_vals = vals[order]
                seg_starts = np.searchsorted(sorted_vals, np.arange(B), side="left")
                seg_ends = np.searchsorted(sorted_vals, np.arange(B), side="right")
                for b in range(B):
                    seg = sorted_rows[seg_starts[b]:seg_ends[b]]
                    if len(seg) == 0:
                        continue
                    base_count = slot_counters[g, b]
                    replica_of = (base_count + np.arange(len(seg))) % ia.replication
                    for r in range(ia.replication):
                        part = seg[replica_of == r]
                        if len(part) == 0:
                            continue
                        state = states[ia.dpu_id(g, b, r)]
                        dpu_execute(state, part, bins_matrix, values, rec, config)
                        stats.per_dpu_tuples[state.dpu_id] += len(part)
                    slot_counters[g, b] += len(seg)
                    delivered += len(seg)
            stats.host_fill_batches += 1
            stats.bytes_to_dpus += (end - start) * ia.num_groups * rec
            start = end

        if delivered != n_rows * ia.num_groups:
            raise SimInvariantError(
                f"iteration {ia.plan.index}: delivered {delivered} tuples, "
                f"expected rows x groups = {n_rows * ia.num_groups}"
            )
        if config.mode == "async":
            stats.overlapped_rounds += max(0, rounds - 1)

        # Readback: every active DPU ships its full slab set, so the byte
        # count depends only on the plan geometry, never on the row count.
        for s in states.values():
            s.bytes_out = ia.footprints[s.group]
            stats.bytes_from_dpus += s.bytes_out
            stats.wram_batches += s.wram_batches
        stats.iterations.append(
            {
                "index": ia.plan.index,
                "groups": ia.num_groups,
                "replication": ia.replication,
                "rounds": rounds,
                "tuples_delivered": int(delivered),
            }
        )

        if accumulate:
            cubes.extend(_assemble(ia, states, spec, stats))

    return cubes, stats


def _make_states(
    ia: IterationAssignment, spec: AggSpec, accumulate: bool
) -> dict[int, DpuState]:
    states: dict[int, DpuState] = {}
    B = ia.B
    for r in range(ia.replication):
        for g, (cd, triples) in enumerate(zip(ia.plan.common_dims, ia.plan.groups)):
            for b in range(B):
                dpu_id = ia.dpu_id(g, b, r)
                slabs = None
                if accumulate:
                    slabs = [np.zeros((B, B), dtype=spec.accum_dtype) for _ in triples]
                states[dpu_id] = DpuState(
                    dpu_id=dpu_id,
                    group=g,
                    bin_value=b,
                    replica=r,
                    common_dim=cd,
                    triples=triples,
                    B=B,
                    slabs=slabs,
                )
    return states


def _assemble(
    ia: IterationAssignment,
    states: dict[int, DpuState],
    spec: AggSpec,
    stats: RunStats,
) -> list[AggregateCube]:
    """Merge replica slabs and stack subgroups back into full cubes."""
    B = ia.B
    out = []
    for g, (cd, triples) in enumerate(zip(ia.plan.common_dims, ia.plan.groups)):
        grids = [np.zeros((B, B, B), dtype=spec.accum_dtype) for _ in triples]
        for b in range(B):
            replicas = [states[ia.dpu_id(g, b, r)] for r in range(ia.replication)]
            for ti, t in enumerate(triples):
                slab = merge_replicas([s.slabs[ti] for s in replicas])
                if ia.replication > 1:
                    stats.merged_cells += ia.replication * B * B
                pos = t.index(cd)
                if pos == 0:
                    grids[ti][b, :, :] = slab
                elif pos == 1:
                    grids[ti][:, b, :] = slab
                else:
                    grids[ti][:, :, b] = slab
        for t, grid in zip(triples, grids):
            out.append(AggregateCube(t, B, grid.reshape(-1), spec))
    return out
