"""Popularity profiles and their partition into near-uniform groups.

A profile is the request distribution ``p_1 >= p_2 >= ... >= p_N > 0`` over a
sorted file catalog.  The central construction is the maximal partition into
contiguous groups whose popularities differ by at most a factor two: group
boundaries fall where the popularity drops below half of successive thresholds
anchored at ``p_1`` (ties at exactly half a threshold stay in the upper
group).  A cheap two-group split driven by the expected per-file request count
is provided as an alternative.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

PROB_SUM_TOL = 1e-9


class ProfileParseError(ValueError):
    """Raised when a popularity table cannot be parsed."""


@dataclass(frozen=True)
class PopularityProfile:
    """Sorted file request probabilities (most popular first)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("profile requires at least one file")
        if np.any(probs <= 0.0):
            raise ValueError("all probabilities must be strictly positive")
        if np.any(np.diff(probs) > 0.0):
            raise ValueError("probabilities must be sorted non-increasing")
        total = float(probs.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_files(self) -> int:
        return int(self.probs.size)


@dataclass(frozen=True)
class FileGrouping:
    """Partition of a sorted catalog into contiguous popularity groups."""

    profile: PopularityProfile
    boundaries: tuple[int, ...]

    def __post_init__(self):
        bounds = tuple(int(b) for b in self.boundaries)
        n = self.profile.n_files
        if bounds[0] != 0 or bounds[-1] != n:
            raise ValueError("boundaries must start at 0 and end at the file count")
        if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise ValueError("boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", bounds)

    @property
    def n_groups(self) -> int:
        return len(self.boundaries) - 1

    @property
    def group_sizes(self) -> np.ndarray:
        return np.diff(np.asarray(self.boundaries))

    @property
    def group_mass(self) -> np.ndarray:
        csum = np.concatenate(([0.0], np.cumsum(self.profile.probs)))
        bounds = np.asarray(self.boundaries)
        return csum[bounds[1:]] - csum[bounds[:-1]]

    def group_of_file(self, file_index: int) -> int:
        """0-based group index holding the given 0-based file index."""
        if not 0 <= file_index < self.profile.n_files:
            raise ValueError(f"file index {file_index} out of range")
        return int(np.searchsorted(np.asarray(self.boundaries[1:]), file_index, side="right"))

    def files_in_group(self, group: int) -> range:
        return range(self.boundaries[group], self.boundaries[group + 1])


def zipf_profile(n_files: int, alpha: float) -> PopularityProfile:
    """Zipf popularity with exponent ``alpha``: p_n proportional to n^-alpha."""
    if n_files < 1:
        raise ValueError("n_files must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    ranks = np.arange(1, n_files + 1, dtype=np.float64)
    weights = ranks ** (-float(alpha))
    return PopularityProfile(weights / weights.sum())


def uniform_profile(n_files: int) -> PopularityProfile:
    if n_files < 1:
        raise ValueError("n_files must be >= 1")
    return PopularityProfile(np.full(n_files, 1.0 / n_files))


def load_profile(text: str) -> PopularityProfile:
    """Parse a popularity table: one ``<file_id> <weight>`` record per line.

    Fields split on a comma or whitespace; lines starting with ``#`` are
    comments.  Weights may be raw counts or probabilities; they are normalized.
    Zero-weight rows are dropped (the model assumes p_N > 0).
    """
    weights = []
    dropped = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        if len(fields) != 2:
            raise ProfileParseError(
                f"line {lineno}: expected '<file_id> <weight>', got {raw!r}"
            )
        try:
            weight = float(fields[1])
        except ValueError:
            raise ProfileParseError(
                f"line {lineno}: weight {fields[1]!r} is not a number"
            ) from None
        if not math.isfinite(weight) or weight < 0:
            raise ProfileParseError(
                f"line {lineno}: weight must be finite and nonnegative, got {fields[1]}"
            )
        if weight == 0.0:
            dropped += 1
            continue
        weights.append(weight)
    if not weights:
        raise ProfileParseError("no rows with positive weight")
    if dropped:
        logger.warning("dropped %d zero-weight rows from popularity table", dropped)
    weights = np.sort(np.asarray(weights, dtype=np.float64))[::-1]
    return PopularityProfile(weights / weights.sum())


def dump_profile(profile: PopularityProfile) -> str:
    """Serialize a profile in the format accepted by :func:`load_profile`."""
    lines = ["# rank probability"]
    lines.extend(
        f"f{rank} {p:.17g}" for rank, p in enumerate(profile.probs, start=1)
    )
    return "\n".join(lines) + "\n"


def partition_factor_two(profile: PopularityProfile) -> FileGrouping:
    """Maximal partition into groups of popularity ratio at most two.

    Thresholds halve starting from ``p_1``: the first group collects every
    file with ``p_n >= p_1/2``, the next every remaining file with
    ``p_n >= p_1/4``, and so on.  A file sitting exactly on a threshold joins
    the higher group; threshold bands containing no file are skipped.
    """
    probs = profile.probs
    n = probs.size
    bounds = [0]
    threshold = probs[0] / 2.0
    i = 0
    while i < n:
        end = i
        while end < n and probs[end] >= threshold:
            end += 1
        if end > i:
            bounds.append(end)
            i = end
        threshold /= 2.0
    grouping = FileGrouping(profile, tuple(bounds))
    # sanity versus the closed-form group-count estimate
    bound = group_count_bound(profile)
    if grouping.n_groups > bound + 1:
        raise AssertionError(
            f"factor-two partition produced {grouping.n_groups} groups, "
            f"expected at most {bound + 1}"
        )
    return grouping


def group_count_bound(profile: PopularityProfile) -> int:
    """Closed-form group count ceil(log2(p_1 / p_N)), clamped to >= 1.

    The constructive partition can end up with fewer groups (empty popularity
    bands are skipped, and exact powers of two are boundary cases); callers
    comparing the two should record both numbers.
    """
    ratio = float(profile.probs[0] / profile.probs[-1])
    # the -1e-12 absorbs upward float noise at exact powers of two
    return max(1, math.ceil(math.log2(ratio) - 1e-12))


def partition_two_group(profile: PopularityProfile, n_users: int) -> FileGrouping:
    """Two-group split: group 1 holds files expected to be requested at all.

    Group 1 is the largest prefix whose files satisfy ``K * p_n >= 1``;
    everything else forms group 2.  An empty or full prefix degenerates to a
    single group.
    """
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    expected = n_users * profile.probs
    n1 = int(np.count_nonzero(expected >= 1.0 - 1e-9))
    if n1 in (0, profile.n_files):
        return FileGrouping(profile, (0, profile.n_files))
    return FileGrouping(profile, (0, n1, profile.n_files))
