"""Closed-form rate evaluators and lower bounds.

Everything here is normalized by the file size: a rate of 1.0 means one
file's worth of bits over the shared link.  The core quantity is the peak
rate of the decentralized coded scheme,

    R(M, N, K) = K (1 - M/N) min{ (N/(KM)) (1 - (1-M/N)^K), N/K }

for cache size M in (0, N], with R(0, N, K) = min{N, K} and R = 0 for M > N.
R is evaluated for real K >= 0 (it is concave in K, which is what makes the
mean-user-count upper bound valid); by convention R(., ., 0) = 0, the load of
a system serving nobody.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .popularity import FileGrouping, PopularityProfile, partition_factor_two

#: Constant in the grouped lower bound, 72 * 12.
LOWER_BOUND_CONSTANT = 864


@dataclass(frozen=True)
class RateQuery:
    """Arguments of a peak-rate evaluation: cache size, catalog, users."""

    cache_size: float
    n_files: int
    n_users: float

    def __post_init__(self):
        if self.cache_size < 0:
            raise ValueError("cache_size must be >= 0")
        if self.n_files < 1:
            raise ValueError("n_files must be >= 1")
        if self.n_users < 0:
            raise ValueError("n_users must be >= 0")


def peak_rate(cache_size: float, n_files: int, n_users: float) -> float:
    """Peak rate of the decentralized coded scheme, for real user counts."""
    RateQuery(cache_size, n_files, n_users)
    return float(peak_rate_users(cache_size, n_files, np.asarray([n_users]))[0])


def peak_rate_users(cache_size: float, n_files: int, n_users: np.ndarray) -> np.ndarray:
    """Vectorized peak rate over an array of (real) user counts."""
    ks = np.asarray(n_users, dtype=np.float64)
    out = np.zeros_like(ks)
    m, n = float(cache_size), float(n_files)
    if m > n:
        return out
    if m == 0.0:
        return np.minimum(n, ks)
    pos = ks > 0.0
    k = ks[pos]
    frac = 1.0 - m / n
    coded = (n / (k * m)) * (1.0 - frac**k)
    out[pos] = k * frac * np.minimum(coded, n / k)
    return out


def hpf_expected_rate(
    profile: PopularityProfile, cache_files: int, n_users: int, mode: str = "unicast"
) -> float:
    """Expected load of caching the most popular ``cache_files`` whole files.

    ``unicast`` counts one transmission per cache miss, K * sum of tail
    probabilities.  ``multicast`` counts each distinct uncached file at most
    once: sum over the tail of 1 - (1 - p_n)^K.
    """
    if not 0 <= cache_files <= profile.n_files:
        raise ValueError("cache_files must lie in [0, n_files]")
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    tail = profile.probs[cache_files:]
    if mode == "unicast":
        return float(n_users * tail.sum())
    if mode == "multicast":
        return float((1.0 - (1.0 - tail) ** n_users).sum())
    raise ValueError(f"unknown mode {mode!r}")


def _check_alloc(grouping: FileGrouping, budgets) -> np.ndarray:
    budgets = getattr(budgets, "budgets", budgets)  # accept MemoryAllocation
    budgets = np.asarray(budgets, dtype=np.float64)
    if budgets.size != grouping.n_groups:
        raise ValueError(
            f"allocation has {budgets.size} budgets for {grouping.n_groups} groups"
        )
    return budgets


def grouped_expected_rate_exact(
    grouping: FileGrouping, budgets, n_users: int
) -> float:
    """Expected rate of the grouped scheme, exact over the demand law.

    Each group's user count is Binomial(K, P_l) under i.i.d. demands, and the
    expectation of a sum needs only these marginals, so the per-group term is
    the binomial mixture of peak rates sum_k pmf(k) R(M_l, N_l, k).
    """
    budgets = _check_alloc(grouping, budgets)
    sizes = grouping.group_sizes
    masses = grouping.group_mass
    ks = np.arange(n_users + 1)
    total = 0.0
    for m_l, n_l, p_l in zip(budgets, sizes, masses):
        pmf = binom.pmf(ks, n_users, p_l)
        total += float(pmf @ peak_rate_users(m_l, int(n_l), ks))
    return total


def grouped_rate_jensen(grouping: FileGrouping, budgets, n_users: int) -> float:
    """Upper bound replacing each random group user count by its mean K*P_l."""
    budgets = _check_alloc(grouping, budgets)
    total = 0.0
    for m_l, n_l, p_l in zip(budgets, grouping.group_sizes, grouping.group_mass):
        total += peak_rate(m_l, int(n_l), n_users * float(p_l))
    return total


def theorem2_lower_bound(grouping: FileGrouping, cache_size: float, n_users: int) -> float:
    """Lower bound on the optimal expected rate at cache size M.

    (1 / (864 L)) sum_l E[R(M, N_l, K_l)], each term evaluated with the full
    memory M.  Only valid for the maximal factor-two partition, which is
    re-derived from the profile and checked.
    """
    reference = partition_factor_two(grouping.profile)
    if grouping.boundaries != reference.boundaries:
        raise ValueError("theorem2_lower_bound requires the factor-two partition")
    n_groups = grouping.n_groups
    full = np.full(n_groups, float(cache_size))
    total = grouped_expected_rate_exact(grouping, full, n_users)
    return total / (LOWER_BOUND_CONSTANT * n_groups)


def cutset_lower_bound(cache_size: float, n_files: int, n_users: int) -> float:
    """Cut-set bound: max over s of s * (1 - M / floor(N/s))^+."""
    if n_files < 1 or n_users < 1:
        raise ValueError("n_files and n_users must be >= 1")
    s = np.arange(1, min(n_files, n_users) + 1)
    terms = s * np.maximum(0.0, 1.0 - float(cache_size) / (n_files // s))
    return float(terms.max())


@dataclass(frozen=True)
class BoundReport:
    """Upper and lower bounds on the optimal expected rate at one (M, K)."""

    upper_uniform_split: float
    upper_optimized: float
    lower_theorem2: float
    lower_cutset: float
    constant: int = field(default=LOWER_BOUND_CONSTANT)

    def __post_init__(self):
        if not (
            self.lower_theorem2
            <= self.upper_optimized + 1e-9
            <= self.upper_uniform_split + 2e-9
        ):
            raise ValueError(
                "bound ordering violated: "
                f"{self.lower_theorem2} <= {self.upper_optimized} <= "
                f"{self.upper_uniform_split} expected"
            )
