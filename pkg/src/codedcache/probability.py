"""Demand-vector statistics: sampling, group counts, distinct-entry law.

The number of distinct entries in K uniform draws over N files is the
coupon-collector quantity behind the grouped lower bound; its pmf is computed
by the exact dynamic program

    P_{k+1}(j) = P_k(j) * j/N + P_k(j-1) * (N-j+1)/N,  P_1(1) = 1,

which stays in floating point instead of juggling Stirling numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .popularity import FileGrouping, PopularityProfile


def demand_sample(profile: PopularityProfile, n_users: int, seed) -> np.ndarray:
    """K i.i.d. file indices drawn from the profile; deterministic per seed."""
    if n_users < 0:
        raise ValueError("n_users must be >= 0")
    rng = np.random.default_rng(seed)
    return rng.choice(profile.n_files, size=n_users, p=profile.probs)


def group_counts(demand: np.ndarray, grouping: FileGrouping) -> np.ndarray:
    """Number of users requesting a file in each group."""
    demand = np.asarray(demand)
    n = grouping.profile.n_files
    if demand.size and (demand.min() < 0 or demand.max() >= n):
        raise ValueError("demand contains file indices out of range")
    inner = np.asarray(grouping.boundaries[1:-1])
    which = np.searchsorted(inner, demand, side="right")
    return np.bincount(which, minlength=grouping.n_groups)


@dataclass(frozen=True)
class DistinctCountDistribution:
    """Distribution of the number of distinct entries of a uniform demand."""

    n_files: int
    n_users: int
    pmf: np.ndarray  # index j-1 holds P(w = j), j = 1..min(N, K)

    def prob_at_least(self, j: int) -> float:
        if j <= 1:
            return 1.0
        return float(self.pmf[j - 1 :].sum())

    def mean(self) -> float:
        support = np.arange(1, self.pmf.size + 1)
        return float(support @ self.pmf)


def distinct_count_distribution(n_files: int, n_users: int) -> DistinctCountDistribution:
    if n_files < 1 or n_users < 1:
        raise ValueError("n_files and n_users must be >= 1")
    n = n_files
    max_j = min(n_files, n_users)
    # cur[j] = P(w = j) after k draws; index 0 unused
    cur = np.zeros(max_j + 1)
    cur[1] = 1.0
    for _ in range(n_users - 1):
        nxt = np.zeros_like(cur)
        js = np.arange(1, max_j + 1)
        nxt[1:] = cur[1:] * (js / n) + cur[:-1] * ((n - js + 1) / n)
        cur = nxt
    pmf = cur[1:]
    total = pmf.sum()
    if abs(total - 1.0) > 1e-12:
        raise AssertionError(f"distinct-count pmf sums to {total!r}")
    return DistinctCountDistribution(n_files, n_users, pmf)


@dataclass(frozen=True)
class CouponBoundCheck:
    """Result of checking P(w >= ceil(min(N,K)/4)) >= 2/3 exactly."""

    s_star: int
    probability: float
    holds: bool


def coupon_bound_check(n_files: int, n_users: int) -> CouponBoundCheck:
    dist = distinct_count_distribution(n_files, n_users)
    s_star = math.ceil(min(n_files, n_users) / 4)
    prob = dist.prob_at_least(s_star)
    return CouponBoundCheck(s_star, prob, prob >= 2.0 / 3.0)
