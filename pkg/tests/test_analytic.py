"""Rate evaluator tests against closed forms and brute-force oracles."""

import itertools

import numpy as np
import pytest

from codedcache import analytic
from codedcache.allocator import bound_report, optimize_allocation
from codedcache.popularity import (
    FileGrouping,
    PopularityProfile,
    partition_factor_two,
    uniform_profile,
    zipf_profile,
)


def _two_by_two_closed_form(m):
    # rate of the two-file, two-user delivery worked out by hand:
    # one coded pair message plus the two uncached remainders
    return (m / 2) * (1 - m / 2) + 2 * (1 - m / 2) ** 2


def _grouped_rate_brute_force(grouping, budgets, n_users):
    """Enumerate all N^K demand vectors and average per-group peak rates."""
    probs = grouping.profile.probs
    n = probs.size
    bounds = grouping.boundaries
    sizes = grouping.group_sizes
    total = 0.0
    for demand in itertools.product(range(n), repeat=n_users):
        weight = float(np.prod(probs[list(demand)]))
        rate = 0.0
        for l in range(grouping.n_groups):
            count = sum(1 for d in demand if bounds[l] <= d < bounds[l + 1])
            rate += analytic.peak_rate(budgets[l], int(sizes[l]), count)
        total += weight * rate
    return total


def _random_instance(rng):
    n = int(rng.integers(2, 33))
    k = int(rng.integers(1, 17))
    raw = np.sort(rng.dirichlet(np.full(n, float(rng.uniform(0.3, 3.0)))))[::-1]
    raw = raw[raw > 1e-9]
    profile = PopularityProfile(raw / raw.sum())
    grouping = partition_factor_two(profile)
    m = float(rng.uniform(0.0, profile.n_files))
    weights = rng.uniform(0.1, 1.0, size=grouping.n_groups)
    budgets = m * weights / weights.sum()
    return grouping, budgets, m, k


class TestPeakRate:
    def test_two_by_two_point(self):
        assert analytic.peak_rate(1, 2, 2) == pytest.approx(0.75, abs=1e-15)

    def test_two_by_two_grid(self):
        for m in np.arange(0.1, 2.0 + 1e-9, 0.1):
            assert analytic.peak_rate(m, 2, 2) == pytest.approx(
                _two_by_two_closed_form(m), abs=1e-12
            )

    def test_zero_memory_is_min(self):
        assert analytic.peak_rate(0, 3, 5) == 3
        assert analytic.peak_rate(0, 5, 3) == 3

    def test_memory_beyond_catalog_is_zero(self):
        assert analytic.peak_rate(2.5, 2, 7) == 0.0

    def test_zero_users_is_zero(self):
        assert analytic.peak_rate(1.0, 4, 0) == 0.0
        assert analytic.peak_rate(0.0, 4, 0) == 0.0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            analytic.peak_rate(-0.5, 2, 2)
        with pytest.raises(ValueError):
            analytic.peak_rate(1, 0, 2)
        with pytest.raises(ValueError):
            analytic.peak_rate(1, 2, -1)

    def test_monotone_in_memory(self):
        for n, k in [(2, 2), (5, 3), (16, 9), (7, 20)]:
            grid = np.linspace(0, n + 0.5, 200)
            rates = [analytic.peak_rate(m, n, k) for m in grid]
            assert all(a >= b - 1e-9 for a, b in zip(rates, rates[1:]))

    def test_monotone_in_users(self):
        for n, m in [(4, 1.0), (9, 3.5), (30, 0.25)]:
            ks = np.linspace(0, 50, 200)
            rates = analytic.peak_rate_users(m, n, ks)
            assert np.all(np.diff(rates) >= -1e-9)

    def test_bounded_by_min_n_k(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 40))
            k = float(rng.uniform(0, 40))
            m = float(rng.uniform(0, n + 2))
            assert analytic.peak_rate(m, n, k) <= min(n, k) + 1e-9

    def test_continuous_at_zero_memory(self):
        for n, k in [(4, 2), (4, 4), (3, 9)]:
            # the coded branch tends to min(N, K) as memory vanishes
            assert abs(analytic.peak_rate(1e-6, n, k) - min(n, k)) < 1e-4

    def test_concave_in_users(self):
        for n in (2, 5, 17):
            for m in (0.3, 1.0, n / 2, n - 0.1):
                ks = np.linspace(0.01, 40.0, 400)
                rates = analytic.peak_rate_users(m, n, ks)
                assert np.all(np.diff(rates, 2) <= 1e-9)


class TestHpf:
    def test_unicast_two_thirds(self):
        profile = PopularityProfile(np.array([2 / 3, 1 / 3]))
        assert analytic.hpf_expected_rate(profile, 1, 2, "unicast") == pytest.approx(
            2 / 3, abs=1e-12
        )

    def test_multicast_five_ninths(self):
        profile = PopularityProfile(np.array([2 / 3, 1 / 3]))
        assert analytic.hpf_expected_rate(profile, 1, 2, "multicast") == pytest.approx(
            5 / 9, abs=1e-12
        )

    def test_full_cache_is_zero(self):
        profile = zipf_profile(5, 1.2)
        assert analytic.hpf_expected_rate(profile, 5, 3) == 0.0

    def test_multicast_never_exceeds_unicast(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(1, 30))
            profile = zipf_profile(n, float(rng.uniform(0, 2.5)))
            m = int(rng.integers(0, n + 1))
            k = int(rng.integers(1, 40))
            uni = analytic.hpf_expected_rate(profile, m, k, "unicast")
            multi = analytic.hpf_expected_rate(profile, m, k, "multicast")
            assert multi <= uni + 1e-12

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            analytic.hpf_expected_rate(uniform_profile(3), 4, 2)


class TestGroupedRates:
    def test_single_group_degenerates_to_peak(self):
        profile = uniform_profile(6)
        grouping = partition_factor_two(profile)
        for m in (0.0, 1.5, 6.0):
            exact = analytic.grouped_expected_rate_exact(grouping, [m], 4)
            assert exact == pytest.approx(analytic.peak_rate(m, 6, 4), abs=1e-9)
            jensen = analytic.grouped_rate_jensen(grouping, [m], 4)
            assert jensen == pytest.approx(analytic.peak_rate(m, 6, 4), abs=1e-9)

    def test_two_singleton_groups_hand_value(self):
        # brute force over the 4 equiprobable demand pairs:
        # R(0.5,1,1) = 0.5 and R(0.5,1,2) = 0.5 (the min picks N/K = 1/2),
        # so E = 2 * (0.5*0.5 + 0.25*0.5) = 0.75
        profile = PopularityProfile(np.array([0.5, 0.5]))
        grouping = FileGrouping(profile, (0, 1, 2))
        exact = analytic.grouped_expected_rate_exact(grouping, [0.5, 0.5], 2)
        assert exact == pytest.approx(0.75, abs=1e-12)
        brute = _grouped_rate_brute_force(grouping, [0.5, 0.5], 2)
        assert exact == pytest.approx(brute, abs=1e-12)

    def test_two_singleton_groups_jensen(self):
        profile = PopularityProfile(np.array([0.5, 0.5]))
        grouping = FileGrouping(profile, (0, 1, 2))
        jensen = analytic.grouped_rate_jensen(grouping, [0.5, 0.5], 2)
        assert jensen == pytest.approx(1.0, abs=1e-12)
        assert jensen >= analytic.grouped_expected_rate_exact(grouping, [0.5, 0.5], 2)

    def test_exact_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(2, 7))
            k = int(rng.integers(1, 5))
            raw = np.sort(rng.dirichlet(np.ones(n)))[::-1]
            profile = PopularityProfile(raw / raw.sum())
            grouping = partition_factor_two(profile)
            m = float(rng.uniform(0, n))
            budgets = np.full(grouping.n_groups, m / grouping.n_groups)
            exact = analytic.grouped_expected_rate_exact(grouping, budgets, k)
            brute = _grouped_rate_brute_force(grouping, budgets, k)
            assert exact == pytest.approx(brute, abs=1e-10)

    def test_jensen_dominates_exact(self):
        rng = np.random.default_rng(4)
        for _ in range(60):
            grouping, budgets, _, k = _random_instance(rng)
            exact = analytic.grouped_expected_rate_exact(grouping, budgets, k)
            jensen = analytic.grouped_rate_jensen(grouping, budgets, k)
            assert exact <= jensen + 1e-9

    def test_alloc_length_mismatch(self):
        grouping = partition_factor_two(zipf_profile(8, 1.0))
        with pytest.raises(ValueError):
            analytic.grouped_expected_rate_exact(grouping, [1.0], 4)

    def test_stable_at_ten_thousand_users(self):
        # the binomial weights stay finite and normalized at large K
        grouping = partition_factor_two(zipf_profile(40, 1.1))
        budgets = np.full(grouping.n_groups, 5.0 / grouping.n_groups)
        exact = analytic.grouped_expected_rate_exact(grouping, budgets, 10_000)
        jensen = analytic.grouped_rate_jensen(grouping, budgets, 10_000)
        assert np.isfinite(exact) and np.isfinite(jensen)
        assert 0.0 < exact <= jensen + 1e-9
        assert exact <= 40.0


class TestLowerBounds:
    def test_theorem2_single_group(self):
        profile = uniform_profile(5)
        grouping = partition_factor_two(profile)
        lb = analytic.theorem2_lower_bound(grouping, 2.0, 6)
        assert lb == pytest.approx(analytic.peak_rate(2.0, 5, 6) / 864, abs=1e-12)

    def test_theorem2_zero_beyond_catalog(self):
        grouping = partition_factor_two(zipf_profile(8, 1.0))
        assert analytic.theorem2_lower_bound(grouping, 8.0, 4) == 0.0

    def test_theorem2_sandwich_zipf(self):
        grouping = partition_factor_two(zipf_profile(8, 1.0))
        lb = analytic.theorem2_lower_bound(grouping, 2.0, 4)
        uniform = optimize_allocation(grouping, 2.0, 4, "uniform")
        ub = analytic.grouped_expected_rate_exact(grouping, uniform, 4)
        assert lb <= ub + 1e-12

    def test_theorem2_rejects_other_groupings(self):
        profile = zipf_profile(8, 1.0)
        grouping = FileGrouping(profile, (0, 8))
        with pytest.raises(ValueError):
            analytic.theorem2_lower_bound(grouping, 1.0, 4)

    def test_cutset_zero_memory(self):
        assert analytic.cutset_lower_bound(0.0, 4, 4) == 4.0

    def test_cutset_full_memory(self):
        assert analytic.cutset_lower_bound(4.0, 4, 9) == 0.0
        assert analytic.cutset_lower_bound(5.0, 4, 2) == 0.0

    def test_cutset_hand_enumeration(self):
        # s=1: 1*(1-1/4); s=2: 2*(1-1/2); s=3: 3*(1-1/1)^+; s=4: 4*(1-1/1)^+
        assert analytic.cutset_lower_bound(1.0, 4, 4) == pytest.approx(1.0)

    def test_cutset_vs_peak_small_grid(self):
        for n in range(1, 17):
            for k in range(1, 17):
                for m in np.arange(0.0, n + 0.25, 0.5):
                    cut = analytic.cutset_lower_bound(m, n, k)
                    assert cut >= analytic.peak_rate(m, n, k) / 12 - 1e-9


class TestBoundReport:
    def test_ordering_on_profiles(self):
        for profile in (zipf_profile(8, 1.0), zipf_profile(20, 0.6)):
            report = bound_report(profile, 2.0, 6)
            assert report.lower_theorem2 <= report.upper_optimized + 1e-9
            assert report.upper_optimized <= report.upper_uniform_split + 1e-9
            assert report.constant == 864

    def test_invalid_ordering_rejected(self):
        with pytest.raises(ValueError):
            analytic.BoundReport(1.0, 2.0, 0.5, 0.1)
