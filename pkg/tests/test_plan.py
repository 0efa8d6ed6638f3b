import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divan.aggregate import enumerate_triples
from divan.errors import PlanError, PlanRejectedError
from divan.plan import (
    assign_dpus,
    dpu_dist,
    even_dist_2d,
    even_dist_3d,
    group0,
    plan_triples,
    shift_overlap,
    shift_triple,
    split,
    validate_plan,
)


def brute_force_group0(n):
    """Oracle straight from the selection rule: keep (0,a,b) iff it is
    lexicographically first among its two rotated dimension-0 aliases."""
    out = []
    for a in range(1, n - 1):
        for b in range(a + 1, n):
            if n % 3 == 0 and a == n // 3 and b == 2 * (n // 3):
                continue
            cand = (0, a, b)
            alts = [tuple(sorted(shift_triple(cand, n - a, n))),
                    tuple(sorted(shift_triple(cand, n - b, n)))]
            if all(cand < alt for alt in alts):
                out.append(cand)
    return out


class TestShift:
    def test_wraps_modulo_n(self):
        assert shift_triple((0, 1, 2), 4, 5) == (4, 0, 1)
        assert set(shift_triple((0, 1, 2), 4, 5)) == {0, 1, 4}

    def test_zero_shift_is_identity(self):
        assert shift_triple((3, 7, 9), 0, 12) == (3, 7, 9)

    @given(st.integers(4, 30), st.integers(0, 29))
    @settings(max_examples=50, deadline=None)
    def test_shift_inverse(self, n, s):
        t = (0, 1, n - 1)
        assert set(shift_triple(shift_triple(t, s % n, n), (n - s) % n, n)) == set(t)


class TestGroup0:
    def test_frozen_small_cases(self):
        assert group0(5) == [(0, 1, 2), (0, 1, 3)]
        assert group0(4) == [(0, 1, 2)]
        assert group0(6) == [(0, 1, 2), (0, 1, 3), (0, 1, 4)]
        assert (0, 2, 4) not in group0(6)

    @pytest.mark.parametrize("n", range(4, 34))
    def test_size_and_oracle(self, n):
        g = group0(n)
        assert g == brute_force_group0(n)
        assert len(g) == math.comb(n, 3) // n

    @pytest.mark.parametrize("n", [5, 7, 9, 12, 24])
    def test_no_shift_overlap_within_seed(self, n):
        g = group0(n)
        for i in range(len(g)):
            for j in range(i + 1, len(g)):
                assert not shift_overlap(g[i], g[j], n)

    def test_small_n_rejected(self):
        with pytest.raises(PlanError):
            group0(3)


class TestEvenDist3D:
    def test_balance_at_24(self):
        sizes = sorted(len(g) for g in even_dist_3d(24))
        assert sizes.count(84) == 16 and sizes.count(85) == 8

    def test_five_dims(self):
        groups = even_dist_3d(5)
        assert [len(g) for g in groups] == [2] * 5
        seen = {tuple(sorted(t)) for g in groups for t in g}
        assert seen == set(enumerate_triples(5))

    @pytest.mark.parametrize("n", range(4, 26))
    def test_partition_and_common_dim(self, n):
        groups = even_dist_3d(n)
        seen = []
        for i, g in enumerate(groups):
            for t in g:
                assert i in t
                seen.append(tuple(sorted(t)))
        assert len(seen) == len(set(seen)) == math.comb(n, 3)
        sizes = [len(g) for g in groups]
        assert max(sizes) - min(sizes) <= 1


class TestEvenDist2D:
    def test_front_four(self):
        assert even_dist_2d(4, True) == [
            [(0, 1), (0, 2)],
            [(1, 2), (1, 3)],
            [(2, 3)],
            [(3, 0)],
        ]

    def test_back_four_sizes(self):
        assert [len(g) for g in even_dist_2d(4, False)] == [1, 1, 2, 2]

    @pytest.mark.parametrize("n", range(2, 20))
    @pytest.mark.parametrize("front", [True, False])
    def test_partition(self, n, front):
        groups = even_dist_2d(n, front)
        seen = {frozenset(p) for g in groups for p in g}
        assert len(seen) == math.comb(n, 2)
        assert sum(len(g) for g in groups) == math.comb(n, 2)
        for i, g in enumerate(groups):
            assert all(p[0] == i for p in g)

    def test_complementary_extra_pairs_for_even_n(self):
        for n in (4, 6, 10):
            base = math.comb(n, 2) // n
            front = [len(g) for g in even_dist_2d(n, True)]
            back = [len(g) for g in even_dist_2d(n, False)]
            assert all(f + b == 2 * base + 1 for f, b in zip(front, back))


class TestSplit:
    def test_eight_over_four(self):
        groups = split(8, 4)
        assert [len(g) for g in groups] == [13, 13, 13, 13]
        seen = {tuple(sorted(t)) for g in groups for t in g}
        low_touching = {t for t in enumerate_triples(8) if min(t) < 4}
        assert seen == low_touching
        assert len(low_touching) == math.comb(8, 3) - math.comb(4, 3)

    def test_r_at_least_n_degenerates(self):
        assert split(5, 5) == even_dist_3d(5)
        assert split(5, 9) == even_dist_3d(5)

    def test_r_below_one_rejected(self):
        with pytest.raises(PlanError):
            split(6, 0)

    @pytest.mark.parametrize("n,r", [(9, 3), (10, 4), (12, 6), (16, 4)])
    def test_spread_for_even_remainder(self, n, r):
        # alternating back/front keeps groups within one triple of each
        # other when the number of leftover dimensions is even
        assert (n - r) % 2 == 0
        sizes = [len(g) for g in split(n, r)]
        assert max(sizes) - min(sizes) <= 1

    @pytest.mark.parametrize("n,r", [(8, 3), (11, 2), (13, 5)])
    def test_covers_low_triples_exactly(self, n, r):
        groups = split(n, r)
        seen = [tuple(sorted(t)) for g in groups for t in g]
        assert len(seen) == len(set(seen))
        assert set(seen) == {t for t in enumerate_triples(n) if min(t) < r}
        for i, g in enumerate(groups):
            assert all(i in t for t in g)


class TestDpuDist:
    def test_two_iterations_example(self):
        plan = dpu_dist(8, 128, 512)
        assert len(plan) == 2
        assert plan[0].group_sizes() == [13, 13, 13, 13]
        assert plan[0].common_dims == [0, 1, 2, 3]
        assert plan[1].group_sizes() == [1, 1, 1, 1]
        assert plan[1].common_dims == [4, 5, 6, 7]
        high = {t for g in plan[1].groups for t in g}
        assert high == set(enumerate_triples(8)) - {t for t in enumerate_triples(8) if min(t) < 4}
        validate_plan(plan, 8)

    def test_single_iteration_when_rows_cover_dims(self):
        plan = dpu_dist(16, 128, 2048)
        assert len(plan) == 1
        assert plan[0].group_sizes() == [35] * 16
        validate_plan(plan, 16)

    def test_nearest_multiple_of_bins_used(self):
        # 300 DPUs at B=128 -> 2 rows; spare 44 DPUs idle
        plan = dpu_dist(6, 128, 300)
        assert plan[0].num_groups == 2

    def test_fewer_dpus_than_bins_rejected(self):
        with pytest.raises(PlanError):
            dpu_dist(8, 128, 100)

    @given(n=st.integers(4, 20), r=st.integers(1, 20), b=st.sampled_from([2, 8, 64]))
    @settings(max_examples=60, deadline=None)
    def test_random_configs_partition(self, n, r, b):
        plan = dpu_dist(n, b, b * r)
        validate_plan(plan, n)

    def test_routing_sparsity(self):
        # rows across iterations never exceed the dimension count
        for n, r in [(8, 4), (16, 5), (24, 7), (33, 1)]:
            plan = dpu_dist(n, 4, 4 * r)
            assert sum(it.num_groups for it in plan) <= n


class TestAssign:
    def test_footprint_for_32_dims(self):
        plan = dpu_dist(32, 128, 4096)
        assignment = assign_dpus(plan, 128, 4096, elem_size=4)
        assert max(len(g) for g in plan[0].groups) == 155
        assert max(assignment.iterations[0].footprints) == 155 * 128 * 128 * 4
        assert max(assignment.iterations[0].footprints) < 64 << 20

    def test_bijection_without_spare_dpus(self):
        plan = dpu_dist(16, 128, 2048)
        ia = assign_dpus(plan, 128, 2048).iterations[0]
        assert ia.replication == 1
        ids = {ia.dpu_id(g, b) for g in range(16) for b in range(128)}
        assert ids == set(range(2048))
        assert ia.slot_of(ia.dpu_id(3, 77)) == (3, 77, 0)

    def test_replication_factor_floor(self):
        plan = dpu_dist(8, 128, 512)  # iteration 0: 4 groups x 128 = 512 slots
        ia = assign_dpus(plan, 128, 2048).iterations[0]
        assert ia.replication == 4
        assert ia.active_dpus == 2048

    def test_replicas_share_triple_lists(self):
        plan = dpu_dist(8, 32, 128)
        ia = assign_dpus(plan, 32, 512).iterations[0]
        for b in (0, 7):
            base = ia.triples_of(ia.dpu_id(2, b, 0))
            for r in range(1, ia.replication):
                assert ia.triples_of(ia.dpu_id(2, b, r)) == base

    def test_memory_model_rejection(self):
        plan = dpu_dist(32, 256, 256)  # one row: group 0 holds C(31,2) = 465 triples
        with pytest.raises(PlanRejectedError, match="MRAM"):
            assign_dpus(plan, 256, 256, elem_size=4)

    def test_too_few_dpus_for_iteration(self):
        plan = dpu_dist(16, 128, 2048)
        with pytest.raises(PlanError, match="needs"):
            assign_dpus(plan, 128, 1024)


def test_plan_triples_matches_enumeration():
    plan = dpu_dist(12, 8, 40)
    assert sorted(plan_triples(plan)) == enumerate_triples(12)
