"""Distributing all C(N,3) dimension triples across PIM workers.

The layout target is a grid of B-wide "rows" of DPUs. Every triple lands in
exactly one group; within a group all triples share one common dimension,
so the group splits into B subgroups by that dimension's bin value, one
subgroup (and one B^2 slab per triple) per DPU. A row of B DPUs therefore
serves one group, and any input row needs to reach only one DPU per group.

Construction relies on rotation symmetry: shifting every component of a
triple by i (mod N) maps a seed group whose triples all contain dimension 0
onto a group whose triples all contain dimension i. The seed is chosen so
that no two of its members coincide, as sets, under any rotation; otherwise
the rotated copies would collide. When N is a multiple of 3 the one triple
that rotates onto itself, (0, N/3, 2N/3), is excluded from the seed and
handed out separately to the first N/3 groups, which then hold one extra
triple each.

Fewer than N rows of DPUs (R = D // B < N) is handled by splitting off the
triples that touch dimensions 0..R-1, spreading them over R groups, and
recursing on the remaining N-R dimensions as a fresh, smaller problem
executed as a further iteration on the same DPU array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .aggregate import Triple, enumerate_triples
from .errors import PlanError, PlanRejectedError

MRAM_BYTES = 64 << 20
HOST_BUFFER_BYTES = 320 << 10


def shift_triple(t: tuple[int, int, int], s: int, n: int) -> tuple[int, int, int]:
    """Rotate every component by s (mod n)."""
    return ((t[0] + s) % n, (t[1] + s) % n, (t[2] + s) % n)


def shift_overlap(a: Triple, b: Triple, n: int) -> bool:
    """True when some rotation maps a onto b as a set."""
    sb = set(b)
    return any(set(shift_triple(a, s, n)) == sb for s in range(n))


def _residual_triple(n: int) -> Triple:
    return (0, n // 3, 2 * (n // 3))


def _group0(n: int) -> list[Triple]:
    """Seed group: one representative per rotation orbit, all containing 0.

    A candidate (0, a, b) coincides (as a set, under rotation) with exactly
    two other dimension-0 triples, reached by rotating away a or b; keeping
    the lexicographically smallest of the three keeps exactly one per
    orbit. The self-rotating triple (0, n/3, 2n/3) is skipped here.
    """
    out: list[Triple] = []
    for a in range(1, n - 1):
        for b in range(a + 1, n):
            if n % 3 == 0 and a == n // 3 and b == 2 * (n // 3):
                continue
            cand = (0, a, b)
            alt1 = tuple(sorted(shift_triple(cand, n - a, n)))
            alt2 = tuple(sorted(shift_triple(cand, n - b, n)))
            if cand < alt1 and cand < alt2:
                out.append(cand)
    return out


def group0(n: int) -> list[Triple]:
    """Seed group for n >= 4; size is floor(C(n,3) / n)."""
    if n < 4:
        raise PlanError(f"seed group needs at least 4 dimensions, got {n}")
    return _group0(n)


def _even_dist_3d(n: int) -> list[list[Triple]]:
    seed = _group0(n)
    groups = []
    for i in range(n):
        group_i = [shift_triple(t, i, n) for t in seed]
        # The self-rotating triple can only be placed once per rotation
        # class: the first n/3 groups each take one copy.
        if n % 3 == 0 and i < n // 3:
            group_i.append(shift_triple(_residual_triple(n), i, n))
        groups.append(group_i)
    return groups


def even_dist_3d(n: int) -> list[list[Triple]]:
    """All C(n,3) triples in n disjoint groups; group i's triples contain i.

    Group sizes differ by at most one (the first n/3 groups carry one extra
    triple when n is a multiple of 3).
    """
    if n < 4:
        raise PlanError(f"3d distribution needs at least 4 dimensions, got {n}")
    return _even_dist_3d(n)


def even_dist_2d(n: int, front: bool) -> list[list[tuple[int, int]]]:
    """All C(n,2) index pairs in n disjoint groups; group i's pairs contain i.

    Group i takes pairs (i, i+1), ..., (i, i+k) mod n. For even n the pair
    (i, i+n/2) is claimable from either end; `front` decides whether the
    first or the second half of the groups takes the extra pair. For odd n
    sizes are uniform and `front` has no effect.
    """
    base = math.comb(n, 2) // n if n > 0 else 0
    groups = []
    for i in range(n):
        k = base
        if n % 2 == 0 and ((i < n // 2) == front):
            k += 1
        groups.append([(i, (i + j) % n) for j in range(1, k + 1)])
    return groups


def split(n: int, r: int) -> list[list[Triple]]:
    """Triples touching dimensions 0..r-1, in r disjoint groups.

    Group i holds only triples containing i. Three kinds contribute:
    triples inside 0..r-1 (seed distribution over r), triples with one low
    and two high dimensions (enumerated directly per low dimension), and
    triples with two low dimensions and one high one, which reuse the pair
    distribution over r, alternating its two balance variants per high
    dimension so the extra pairs spread evenly.

    With r >= n this is simply the full n-group distribution.
    """
    if r < 1:
        raise PlanError(f"need at least one group, got {r}")
    if r >= n:
        return _even_dist_3d(n)
    groups = _even_dist_3d(r)
    for dim in range(r):
        for i in range(r, n - 1):
            for j in range(i + 1, n):
                groups[dim].append((dim, i, j))
    pairs_front = even_dist_2d(r, True)
    pairs_back = even_dist_2d(r, False)
    for curr, dim in enumerate(range(r, n)):
        pair_groups = pairs_back if curr % 2 == 0 else pairs_front
        for i in range(r):
            for g in pair_groups[i]:
                groups[i].append((g[0], g[1], dim))
    return groups


@dataclass
class GroupPlan:
    """One iteration of the distribution: disjoint groups, one common
    dimension each, already shifted into the original dimension space."""

    index: int
    offset: int
    groups: list[list[Triple]]
    common_dims: list[int]

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    def group_sizes(self) -> list[int]:
        return [len(g) for g in self.groups]


def dpu_dist(n: int, bins: int, dpus: int, offset: int = 0) -> list[GroupPlan]:
    """Plan all C(n,3) triples onto D DPUs arranged as R = D // B rows.

    Iteration 0 distributes every triple touching the first R dimensions;
    the remaining dimensions recurse as a smaller problem run as a further
    iteration on the same DPU array. Only the nearest multiple of B DPUs is
    used. Triples are returned in canonical sorted form.
    """
    if bins < 2:
        raise PlanError(f"need at least 2 bins, got {bins}")
    if dpus < bins:
        raise PlanError(f"need at least one row of {bins} DPUs, got {dpus}")
    if n < 3:
        raise PlanError(f"need at least 3 dimensions, got {n}")
    r = dpus // bins
    raw = split(n, r)
    groups = [[tuple(sorted((d0 + offset, d1 + offset, d2 + offset))) for (d0, d1, d2) in g]
              for g in raw]
    plan = GroupPlan(
        index=0,
        offset=offset,
        groups=groups,
        common_dims=[i + offset for i in range(len(groups))],
    )
    iterations = [plan]
    if n - r > 2:
        iterations += dpu_dist(n - r, bins, dpus, offset + r)
    for i, it in enumerate(iterations):
        it.index = i
    return iterations


def plan_triples(plan: list[GroupPlan]) -> list[Triple]:
    """Every triple in the plan, across iterations and groups."""
    return [t for it in plan for g in it.groups for t in g]


def validate_plan(plan: list[GroupPlan], n: int) -> None:
    """Check the partition property: every triple exactly once, and every
    group's triples contain the group's common dimension."""
    seen = plan_triples(plan)
    if len(seen) != len(set(seen)):
        raise PlanError("plan assigns some triple twice")
    if set(seen) != set(enumerate_triples(n)):
        raise PlanError("plan misses some triples")
    for it in plan:
        for cd, group in zip(it.common_dims, it.groups):
            for t in group:
                if cd not in t:
                    raise PlanError(f"triple {t} lacks its group's common dimension {cd}")


@dataclass
class IterationAssignment:
    """Concrete DPU slots for one plan iteration.

    Base slots form a (group, bin) grid of num_groups * B DPUs; with spare
    capacity the whole grid is duplicated F times and each slot's tuples
    are striped round-robin over its F replicas. DPU ids are
    replica * (num_groups * B) + group * B + bin; ids past F * num_groups * B
    idle for this iteration.
    """

    plan: GroupPlan
    B: int
    replication: int
    footprints: list[int]  # bytes of aggregate slabs per group member DPU

    @property
    def num_groups(self) -> int:
        return self.plan.num_groups

    @property
    def base_slots(self) -> int:
        return self.num_groups * self.B

    @property
    def active_dpus(self) -> int:
        return self.replication * self.base_slots

    def dpu_id(self, group: int, bin_value: int, replica: int = 0) -> int:
        return replica * self.base_slots + group * self.B + bin_value

    def slot_of(self, dpu_id: int) -> tuple[int, int, int]:
        """(group, bin, replica) of an active DPU id."""
        replica, rest = divmod(dpu_id, self.base_slots)
        group, bin_value = divmod(rest, self.B)
        return group, bin_value, replica

    def triples_of(self, dpu_id: int) -> list[Triple]:
        group, _, _ = self.slot_of(dpu_id)
        return self.plan.groups[group]


@dataclass
class DpuAssignment:
    iterations: list[IterationAssignment]
    dpus: int
    B: int
    elem_size: int


def assign_dpus(
    plan: list[GroupPlan],
    bins: int,
    dpus: int,
    elem_size: int = 4,
    mram_bytes: int = MRAM_BYTES,
    buffer_bytes: int = HOST_BUFFER_BYTES,
) -> DpuAssignment:
    """Map a plan's (group, bin) subgroups onto DPU ids, with duplication.

    Every iteration must fit its rows into the DPU array (D >= groups * B).
    Spare rows replicate whole iterations F = D // (groups * B) times so
    each replica processes a 1/F share of the tuples; leftovers beyond
    F * groups * B idle. Each DPU's aggregate slabs (one B^2 slab per
    assigned triple) plus its inbox buffer must fit the 64 MB MRAM model.
    """
    iterations = []
    for it in plan:
        base = it.num_groups * bins
        if dpus < base:
            raise PlanError(
                f"iteration {it.index} needs {base} DPUs ({it.num_groups} groups x {bins}), "
                f"got {dpus}"
            )
        replication = dpus // base
        footprints = [len(g) * bins * bins * elem_size for g in it.groups]
        worst = max(footprints, default=0)
        if worst + buffer_bytes > mram_bytes:
            raise PlanRejectedError(
                f"iteration {it.index}: {worst / 2**20:.1f} MB of aggregate slabs "
                f"+ {buffer_bytes / 2**20:.1f} MB inbox exceeds the "
                f"{mram_bytes / 2**20:.0f} MB MRAM model "
                f"(largest group: {max(it.group_sizes(), default=0)} triples x {bins}^2 "
                f"x {elem_size} B)"
            )
        iterations.append(IterationAssignment(it, bins, replication, footprints))
    return DpuAssignment(iterations=iterations, dpus=dpus, B=bins, elem_size=elem_size)


def plan_report(plan: list[GroupPlan], assignment: DpuAssignment | None = None) -> dict:
    """JSON-ready description of a plan: groups, sizes, balance, DPU slots."""
    report: dict = {"iterations": []}
    for it in plan:
        sizes = it.group_sizes()
        entry = {
            "index": it.index,
            "offset": it.offset,
            "num_groups": it.num_groups,
            "group_sizes": sizes,
            "size_spread": (max(sizes) - min(sizes)) if sizes else 0,
            "common_dims": it.common_dims,
            "groups": [[list(t) for t in g] for g in it.groups],
        }
        report["iterations"].append(entry)
    report["total_triples"] = sum(
        len(g) for it in plan for g in it.groups
    )
    if assignment is not None:
        report["dpus"] = assignment.dpus
        report["bins"] = assignment.B
        report["elem_size"] = assignment.elem_size
        for entry, ia in zip(report["iterations"], assignment.iterations):
            entry["replication"] = ia.replication
            entry["active_dpus"] = ia.active_dpus
            entry["footprint_bytes_per_dpu"] = ia.footprints
            entry["dpu_slots"] = [
                {
                    "dpu": ia.dpu_id(g, b, r),
                    "group": g,
                    "bin": b,
                    "replica": r,
                }
                for r in range(ia.replication)
                for g in range(ia.num_groups)
                for b in range(ia.B)
            ]
    return report
