"""Command-line front end.

Subcommands: ``rate``, ``hpf``, ``group``, ``allocate``, ``tradeoff``,
``simulate``, ``coupon``.  Every randomized command takes ``--seed`` and
defaults to a fixed constant, so identical invocations produce byte-identical
output.  Exit codes: 0 success, 2 configuration error, 3 violated internal
assertion.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import analytic, bitsim, probability
from .allocator import (
    SCHEME_NAMES,
    OptimizerError,
    optimize_allocation,
    tradeoff_curve,
)
from .popularity import (
    FileGrouping,
    PopularityProfile,
    ProfileParseError,
    group_count_bound,
    load_profile,
    partition_factor_two,
    partition_two_group,
    uniform_profile,
    zipf_profile,
)

DEFAULT_SEED = 20130815


class ConfigError(ValueError):
    pass


def _fmt(value: float) -> str:
    return format(float(value), ".12g")


def _add_profile_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--files", "--N", dest="files", type=int, help="catalog size")
    parser.add_argument(
        "--alpha", type=float, default=None, help="Zipf exponent (omit for uniform)"
    )
    parser.add_argument(
        "--popularity-file", default=None, help="path to a <file_id> <weight> table"
    )


def _resolve_profile(args) -> PopularityProfile:
    has_file = args.popularity_file is not None
    has_builtin = args.files is not None
    if has_file == has_builtin:
        raise ConfigError("exactly one of --popularity-file or --files is required")
    if has_file:
        try:
            with open(args.popularity_file, encoding="utf-8") as handle:
                return load_profile(handle.read())
        except OSError as exc:
            raise ConfigError(f"cannot read popularity file: {exc}") from exc
    if args.files < 1:
        raise ConfigError("--files must be >= 1")
    if args.alpha is None:
        return uniform_profile(args.files)
    return zipf_profile(args.files, args.alpha)


def _resolve_grouping(args, profile: PopularityProfile) -> FileGrouping:
    strategy = args.grouping
    if strategy == "factor_two":
        return partition_factor_two(profile)
    if strategy == "two_group":
        return partition_two_group(profile, args.users)
    boundaries = _parse_int_list(strategy)
    return FileGrouping(profile, tuple(boundaries))


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


def _cmd_rate(args) -> int:
    value = analytic.peak_rate(args.memory, args.files, args.users)
    print(_fmt(value))
    return 0


def _cmd_hpf(args) -> int:
    profile = _resolve_profile(args)
    value = analytic.hpf_expected_rate(profile, args.memory, args.users, args.scheme)
    print(_fmt(value))
    return 0


def _cmd_group(args) -> int:
    profile = _resolve_profile(args)
    if args.grouping == "two_group" and args.users is None:
        raise ConfigError("two_group grouping requires --users")
    grouping = _resolve_grouping(args, profile)
    sizes = grouping.group_sizes
    masses = grouping.group_mass
    print("group,first_file,last_file,size,mass")
    for l in range(grouping.n_groups):
        lo, hi = grouping.boundaries[l], grouping.boundaries[l + 1]
        print(f"{l + 1},{lo},{hi - 1},{sizes[l]},{_fmt(masses[l])}")
    print(f"groups={grouping.n_groups} log2_bound={group_count_bound(profile)}")
    return 0


def _cmd_allocate(args) -> int:
    profile = _resolve_profile(args)
    grouping = _resolve_grouping(args, profile)
    alloc = optimize_allocation(grouping, args.memory, args.users, args.strategy)
    objective = analytic.grouped_expected_rate_exact(grouping, alloc, args.users)
    print("group,budget")
    for l, budget in enumerate(alloc.budgets, start=1):
        print(f"{l},{_fmt(budget)}")
    print(f"expected_rate={_fmt(objective)}")
    return 0


def _cmd_tradeoff(args) -> int:
    profile = _resolve_profile(args)
    if args.memory is not None:
        grid = _parse_float_list(args.memory)
    else:
        grid = np.linspace(0.0, profile.n_files, args.grid_points).tolist()
    schemes = args.scheme.split(",") if args.scheme else list(SCHEME_NAMES)
    curve = tradeoff_curve(
        profile, args.users, grid, schemes, tail_unicast_alpha=args.tail_unicast_alpha
    )
    text = curve.to_csv()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args) -> int:
    profile = _resolve_profile(args)
    grouping = _resolve_grouping(args, profile)
    alloc = optimize_allocation(grouping, args.memory, args.users, args.allocation)
    result = bitsim.simulate_expected_rate(
        profile,
        grouping,
        alloc,
        args.users,
        args.file_bits,
        args.trials,
        args.seed,
        decode_check=args.decode_check,
    )
    effective = bitsim.effective_budgets(grouping, alloc, args.file_bits)
    reference = analytic.grouped_expected_rate_exact(grouping, effective, args.users)
    gap = abs(result.mean_rate - reference) / reference if reference else 0.0
    if args.dump_transcript:
        sub = np.random.SeedSequence((args.seed, 0)).generate_state(3, dtype=np.uint64)
        library = bitsim.make_library(profile.n_files, args.file_bits, int(sub[0]))
        cache = bitsim.place(library, grouping, alloc, args.users, int(sub[1]))
        demand = probability.demand_sample(profile, args.users, int(sub[2]))
        sys.stdout.write(bitsim.deliver(cache, demand).dump())
    print(
        f"mean_rate={_fmt(result.mean_rate)} ci95={_fmt(result.half_width)} "
        f"analytic={_fmt(reference)} rel_gap={_fmt(gap)} trials={result.trials}"
    )
    return 0


def _cmd_coupon(args) -> int:
    dist = probability.distinct_count_distribution(args.files, args.users)
    check = probability.coupon_bound_check(args.files, args.users)
    print("distinct,probability")
    for j, p in enumerate(dist.pmf, start=1):
        print(f"{j},{_fmt(p)}")
    verdict = "holds" if check.holds else "VIOLATED"
    print(
        f"s_star={check.s_star} prob_at_least={_fmt(check.probability)} "
        f"bound_two_thirds={verdict}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codedcache",
        description="Coded caching rates, bounds, and bit-exact simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_rate = sub.add_parser("rate", help="peak rate R(M, N, K) of the coded scheme")
    p_rate.add_argument("--memory", "--M", dest="memory", type=float, required=True)
    p_rate.add_argument("--files", "--N", dest="files", type=int, required=True)
    p_rate.add_argument("--users", "--K", dest="users", type=float, required=True)
    p_rate.set_defaults(func=_cmd_rate)

    p_hpf = sub.add_parser("hpf", help="expected rate of most-popular-first caching")
    _add_profile_args(p_hpf)
    p_hpf.add_argument("--memory", "--M", dest="memory", type=int, required=True)
    p_hpf.add_argument("--users", "--K", dest="users", type=int, required=True)
    p_hpf.add_argument("--scheme", choices=("unicast", "multicast"), default="unicast")
    p_hpf.set_defaults(func=_cmd_hpf)

    p_group = sub.add_parser("group", help="partition a profile into groups")
    _add_profile_args(p_group)
    p_group.add_argument(
        "--grouping",
        default="factor_two",
        help="factor_two, two_group, or explicit comma-separated boundaries",
    )
    p_group.add_argument("--users", "--K", dest="users", type=int, default=None)
    p_group.set_defaults(func=_cmd_group)

    p_alloc = sub.add_parser("allocate", help="choose per-group memory budgets")
    _add_profile_args(p_alloc)
    p_alloc.add_argument("--memory", "--M", dest="memory", type=float, required=True)
    p_alloc.add_argument("--users", "--K", dest="users", type=int, required=True)
    p_alloc.add_argument(
        "--grouping",
        default="factor_two",
        help="factor_two, two_group, or explicit comma-separated boundaries",
    )
    p_alloc.add_argument(
        "--strategy",
        choices=("uniform", "optimized", "hpf", "two_group"),
        default="optimized",
    )
    p_alloc.set_defaults(func=_cmd_allocate)

    p_curve = sub.add_parser("tradeoff", help="memory-rate tradeoff CSV")
    _add_profile_args(p_curve)
    p_curve.add_argument("--users", "--K", dest="users", type=int, required=True)
    p_curve.add_argument(
        "--memory", default=None, help="comma-separated cache sizes (overrides grid)"
    )
    p_curve.add_argument("--grid-points", type=int, default=21)
    p_curve.add_argument(
        "--scheme", default=None, help=f"comma-separated subset of {','.join(SCHEME_NAMES)}"
    )
    p_curve.add_argument("--tail-unicast-alpha", type=float, default=None)
    p_curve.add_argument("--output", default=None, help="CSV path (default stdout)")
    p_curve.set_defaults(func=_cmd_tradeoff)

    p_sim = sub.add_parser("simulate", help="bit-exact Monte Carlo delivery")
    _add_profile_args(p_sim)
    p_sim.add_argument("--users", "--K", dest="users", type=int, required=True)
    p_sim.add_argument("--memory", "--M", dest="memory", type=float, required=True)
    p_sim.add_argument("--file-bits", type=int, default=4096)
    p_sim.add_argument("--trials", type=int, default=20)
    p_sim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_sim.add_argument(
        "--grouping",
        default="factor_two",
        help="factor_two, two_group, or explicit comma-separated boundaries",
    )
    p_sim.add_argument(
        "--allocation",
        choices=("uniform", "optimized", "hpf", "two_group"),
        default="uniform",
    )
    p_sim.add_argument(
        "--decode-check", action="store_true", help="decode every trial bit-exactly"
    )
    p_sim.add_argument(
        "--dump-transcript",
        action="store_true",
        help="print MSG lines for the first trial's transcript",
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_coupon = sub.add_parser("coupon", help="distinct-demand distribution and bound")
    p_coupon.add_argument("--files", "--N", dest="files", type=int, required=True)
    p_coupon.add_argument("--users", "--K", dest="users", type=int, required=True)
    p_coupon.set_defaults(func=_cmd_coupon)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ProfileParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OptimizerError, bitsim.DecodeError, AssertionError) as exc:
        print(f"internal assertion failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
