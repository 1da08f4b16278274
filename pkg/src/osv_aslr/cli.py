"""Command line entry point: ``osv-aslr {simulate,analyze-addrs,analyze-bench}``."""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import bench_io, stats
from .entropy import CpuProfile, EntropyMode, EntropySource, U64_MASK
from .errors import AslrError
from .layout import PROGRAM_BASE_POLICY, STACK_POLICY, InstanceConfig, RandomizationPolicy, simulate_instance

DEFAULT_N = 303
DEFAULT_ALPHA = 0.05

PROFILES = {"rdrand": CpuProfile.rdrand, "none": CpuProfile.none}


def _int(text):
    return int(text, 0)


def load_policies(path):
    """Read optional policy overrides from a JSON config file.

    Example::

        {"base_policy": {"bit_check": "0x0000100000000000",
                         "rnd_mask": "0x00001fffff000000"}}
    """
    base, stack = PROGRAM_BASE_POLICY, STACK_POLICY
    if path is None:
        return base, stack
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)

    def policy(key, default):
        spec = doc.get(key)
        if spec is None:
            return default
        values = {k: _int(v) if isinstance(v, str) else v for k, v in spec.items()}
        return RandomizationPolicy(
            values.get("bit_check", default.bit_check),
            values.get("rnd_mask", default.rnd_mask),
            values.get("alignment", default.alignment),
        )

    return policy("base_policy", base), policy("stack_policy", stack)


def _simulate_one(cfg):
    return simulate_instance(cfg)


def simulate_records(n, mode, seed=None, profile="rdrand", sequence=(), heap_segments=4,
                     base_policy=PROGRAM_BASE_POLICY, stack_policy=STACK_POLICY, jobs=1):
    """Simulate ``n`` instances; instance ``i`` uses seed ``seed + i`` in seeded mode."""
    mode = EntropyMode(mode)
    template = InstanceConfig(
        cpu=PROFILES[profile](), mode=mode, seed=seed or 0, n_heap_segments=heap_segments,
        base_policy=base_policy, stack_policy=stack_policy,
    )
    if mode is EntropyMode.SEEDED:
        if seed is None:
            raise AslrError("--seed is required in seeded mode")
        if seed < 0 or seed + n - 1 > U64_MASK:
            raise AslrError("instance seeds must stay within 64 bits")
    configs = [replace(template, instance_id=f"i{i}", seed=(seed or 0) + i) for i in range(n)]
    if mode is EntropyMode.FIXED:
        # one replayed stream shared by all instances, consumed in order
        source = EntropySource.fixed(sequence)
        return [simulate_instance(cfg, source) for cfg in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_simulate_one, configs, chunksize=max(1, n // (4 * jobs))))
    return [simulate_instance(cfg) for cfg in configs]


def cmd_simulate(args):
    base_policy, stack_policy = load_policies(args.config)
    records = simulate_records(
        args.n, args.mode, args.seed, args.profile, args.sequence, args.heap_segments,
        base_policy, stack_policy, args.jobs,
    )
    entries = [e for r in records for e in bench_io.layout_entries(r)]
    text = bench_io.write_address_log(entries)
    _emit(text, args.out)
    return 0


def cmd_analyze_addrs(args):
    base_policy, stack_policy = load_policies(args.config)
    with open(args.log, encoding="utf-8") as fh:
        entries = bench_io.read_address_log(fh)
    region = bench_io.LogRegion(args.region.capitalize())
    policy = stack_policy if region is bench_io.LogRegion.STACK else base_policy
    lo, hi = policy.bounds()
    values = bench_io.region_samples(entries, region)
    report = stats.ks_uniform_test(values, lo, hi, args.alpha)
    _emit(bench_io.render_ks(report, region, lo, hi), args.out)
    return 0


def cmd_analyze_bench(args):
    with open(args.metrics, encoding="utf-8") as fh:
        samples = bench_io.parse_metrics(fh)
    docs = bench_io.build_report(samples, args.metric, args.campaign, args.alpha)
    text = bench_io.render_json(docs) if args.json else bench_io.render_table(docs)
    _emit(text, args.out)
    return 0


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _alpha(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _words(text):
    return [_int(w) for w in text.split(",") if w.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="osv-aslr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate instances and write an address log")
    sim.add_argument("--n", type=_positive, default=DEFAULT_N)
    sim.add_argument("--mode", choices=[m.value for m in EntropyMode], default="seeded")
    sim.add_argument("--seed", type=_int)
    sim.add_argument("--sequence", type=_words, default=[],
                     help="comma-separated 32-bit words for --mode fixed")
    sim.add_argument("--profile", choices=sorted(PROFILES), default="rdrand")
    sim.add_argument("--heap-segments", type=int, default=4)
    sim.add_argument("--jobs", type=_positive, default=1)
    sim.add_argument("--config")
    sim.add_argument("--out")
    sim.set_defaults(func=cmd_simulate)

    addrs = sub.add_parser("analyze-addrs", help="KS uniformity test on one region of an address log")
    addrs.add_argument("log")
    addrs.add_argument("--region", choices=["base", "heap", "stack"], default="base")
    addrs.add_argument("--alpha", type=_alpha, default=DEFAULT_ALPHA)
    addrs.add_argument("--config")
    addrs.add_argument("--out")
    addrs.set_defaults(func=cmd_analyze_addrs)

    bench = sub.add_parser("analyze-bench", help="summary tables and Levene's test for a metrics file")
    bench.add_argument("metrics")
    bench.add_argument("--metric", choices=sorted(bench_io.METRICS), default="run_time_ms")
    bench.add_argument("--campaign", type=int)
    bench.add_argument("--alpha", type=_alpha, default=DEFAULT_ALPHA)
    bench.add_argument("--json", action="store_true", help="emit the structured report")
    bench.add_argument("--out")
    bench.set_defaults(func=cmd_analyze_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AslrError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"osv-aslr {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
