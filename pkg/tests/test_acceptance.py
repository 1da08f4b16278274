"""Exit criteria for the simulator and the evaluation toolkit.

Each test records one PASS/FAIL line, shown in the pytest terminal summary
(and printed directly with ``pytest -s``).
"""

import math
import random
import re
import time

import numpy as np
import pytest

import conftest
import oracles
from osv_aslr import bench_io, stats
from osv_aslr.bench_io import AddressLogEntry, Group, LogRegion, MetricSample
from osv_aslr.cli import simulate_records
from osv_aslr.entropy import CpuProfile
from osv_aslr.layout import PROGRAM_BASE_POLICY, STACK_POLICY, InstanceConfig, simulate_instance

BATCH_N = 303
TRIALS = 100
MIN_PASSING_TRIALS = 90


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_1_bitmask_bounds():
    start = time.perf_counter()
    bad_base = bad_stack = 0
    for seed in range(10_000):
        rec = simulate_instance(InstanceConfig(seed=seed))
        b, s = rec.program_base, rec.stack_base
        if not (0x0000100000000000 <= b <= 0x00001FFFFF000000 and b & 0xFFFFFF == 0
                and PROGRAM_BASE_POLICY.contains(b)):
            bad_base += 1
        if not (0x0000300000000000 <= s <= 0x00003FFFFF000000 and s & 0xFFFFFF == 0
                and STACK_POLICY.contains(s)):
            bad_stack += 1
    elapsed = time.perf_counter() - start
    record(1, "bitmask bounds over 10,000 seeded instances",
           bad_base == 0 and bad_stack == 0 and elapsed < 10,
           f"bad bases {bad_base}, bad stacks {bad_stack}, {elapsed:.2f} s < 10 s")


def test_2_uniformity_at_303_instances():
    start = time.perf_counter()
    passing = {LogRegion.BASE: 0, LogRegion.HEAP: 0, LogRegion.STACK: 0}
    d_crit = 1.36 / math.sqrt(BATCH_N)
    for trial in range(TRIALS):
        records = simulate_records(BATCH_N, "seeded", seed=1_000_000 + trial * BATCH_N)
        entries = [e for r in records for e in bench_io.layout_entries(r)]
        for region, policy in ((LogRegion.BASE, PROGRAM_BASE_POLICY), (LogRegion.HEAP, PROGRAM_BASE_POLICY),
                               (LogRegion.STACK, STACK_POLICY)):
            values = bench_io.region_samples(entries, region)
            assert len(values) == BATCH_N
            lo, hi = policy.bounds()
            report = stats.ks_uniform_test(values, lo, hi, 0.05)
            assert report.threshold == pytest.approx(d_crit, abs=1e-15)
            passing[region] += not report.reject_null
    elapsed = time.perf_counter() - start
    ok = all(v >= MIN_PASSING_TRIALS for v in passing.values()) and elapsed < 30
    detail = ", ".join(f"{r.value} {v}/{TRIALS}" for r, v in passing.items())
    record(2, f"KS D < {d_crit:.4f} at n = {BATCH_N}", ok,
           f"{detail}; need >= {MIN_PASSING_TRIALS}; {elapsed:.2f} s < 30 s")


def test_3_deterministic_baseline():
    logs = []
    ok = True
    for seed in (0, 987654321):
        records = simulate_records(100, "seeded", seed=seed, profile="none")
        ok &= all(r.program_base == 0x0000100000000000 and r.stack_base == 0x0000200000000000
                  and not r.randomized for r in records)
        logs.append(bench_io.write_address_log([e for r in records for e in bench_io.layout_entries(r)]).encode())
    record(3, "baseline layout is fixed and logs are byte-identical",
           ok and logs[0] == logs[1], f"100 instances, log sizes {len(logs[0])} / {len(logs[1])} bytes")


def test_4_heap_derivation():
    bad = 0
    total = 0
    for seed in range(2000):
        n = seed % 17
        for cpu in (CpuProfile.rdrand(), CpuProfile.none()):
            rec = simulate_instance(InstanceConfig(cpu=cpu, seed=seed, n_heap_segments=n))
            total += 1
            bad += list(rec.heap_segments) != [rec.program_base + i * 0x1000 for i in range(n)]
    record(4, "heap_segments[i] == base + i * 0x1000", bad == 0, f"{total} instances, {bad} mismatches")


def test_5_malloc_large_bypass():
    recs = [simulate_instance(InstanceConfig(seed=7_000 + i * 7919, large_requests=(10_000_000,)))
            for i in range(50)]
    large = {r.large_allocs for r in recs}
    bases = {r.program_base for r in recs}
    stacks = {r.stack_base for r in recs}
    ok = len(large) == 1 and len(bases) == 50 and len(stacks) == 50
    record(5, "10 MB malloc_large placement ignores entropy", ok,
           f"{len(large)} distinct large addresses, {len(bases)} bases, {len(stacks)} stacks over 50 seeds")


def test_6_statistics_oracles():
    rng = random.Random(606)
    worst_w = worst_p = 0.0
    for _ in range(20):
        k = rng.randint(2, 4)
        groups = [[rng.gauss(rng.uniform(-50, 50), rng.uniform(0.5, 20)) for _ in range(rng.randint(2, 50))]
                  for _ in range(k)]
        report = stats.levene_test(groups)
        w_ref = oracles.levene_bruteforce(groups)
        p_ref = oracles.f_tail_quadrature(w_ref, k - 1, sum(map(len, groups)) - k)
        worst_w = max(worst_w, abs(report.statistic - w_ref))
        worst_p = max(worst_p, abs(report.p_value - p_ref))
    worst_d = 0.0
    for _ in range(20):
        xs = [rng.uniform(0, 1) ** rng.choice((1, 2)) for _ in range(60)]
        worst_d = max(worst_d, abs(stats.ks_statistic(xs, 0, 1) - oracles.ks_sup_bruteforce(xs, 0, 1)))
    f_tab = stats.f_upper_tail(4.965, 1, 10)
    ok = worst_w <= 1e-9 and worst_p <= 1e-6 and worst_d <= 1e-12 and abs(f_tab - 0.050) <= 1e-3
    record(6, "Levene / F tail / KS agree with independent oracles", ok,
           f"max |dW| {worst_w:.1e} <= 1e-9, max |dp| {worst_p:.1e} <= 1e-6, "
           f"max |dD| {worst_d:.1e} <= 1e-12, F(4.965; 1, 10) tail {f_tab:.4f}")


def _synthetic_metrics():
    rng = np.random.default_rng(77)
    rows = ["run_id,group,campaign,run_time_ms,boot_time_ms,mem_mib"]
    for camp in (1, 2, 3):
        for group, spread in (("M", 1.0), ("UM", 1.0 + camp / 2)):
            for i in range(rng.integers(25, 40)):
                rows.append(f"{group}{camp}-{i},{group},{camp},{9000 + rng.normal(0, 60 * spread):.4f},"
                            f"{650 + rng.normal(0, 30 * spread):.4f},{135 + rng.normal(0, spread):.4f}")
    return "\n".join(rows) + "\n"


def test_7_report_structure_and_values():
    text = _synthetic_metrics()
    samples = bench_io.parse_metrics(text)
    problems = []
    for metric in bench_io.METRICS:
        docs = bench_io.build_report(samples, metric)
        table = bench_io.render_table(docs)
        body = [line for line in table.splitlines() if re.match(r"(M|UM) \d", line)]
        labels = [line.split("|")[0].strip() for line in body]
        if labels != ["M 1", "UM 1", "M 2", "UM 2", "M 3", "UM 3"]:
            problems.append(f"{metric}: rows {labels}")
        for line, row in zip(body, (r for d in docs for r in d["rows"])):
            values = [s.metric(metric) for s in samples
                      if s.group.value == row["group"] and s.campaign == row["campaign"]]
            n = len(values)
            mean = math.fsum(values) / n
            sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
            half = oracles.t_quantile_root(0.975, n - 1) * sd / math.sqrt(n)
            expected = (n, mean, sd, mean - half, mean + half)
            got = (row["n"], row["mean"], row["sd"], row["ci_low"], row["ci_high"])
            if got[0] != n or any(abs(a - b) > 1e-9 * max(1, abs(b)) for a, b in zip(got[1:], expected[1:])):
                problems.append(f"{metric} {row['group']}{row['campaign']}: {got} vs {expected}")
            cells = [c.strip().lstrip("±") for c in line.split("|")[1:]]
            shown = [f"{n}"] + [f"{v:.4f}" for v in expected[1:]]
            if cells != shown:
                problems.append(f"{metric} rendered {cells} vs {shown}")
        for doc in docs:
            groups = [[s.metric(metric) for s in samples if s.group is g and s.campaign == doc["campaign"]]
                      for g in (Group.MODIFIED, Group.UNMODIFIED)]
            w = oracles.levene_bruteforce(groups)
            p = oracles.f_tail_quadrature(w, 1, sum(map(len, groups)) - 2)
            lev = doc["levene"]
            if abs(lev["W"] - w) > 1e-9 or abs(lev["p"] - p) > 1e-9:
                problems.append(f"{metric} run {doc['campaign']}: Levene {lev['W']}, {lev['p']} vs {w}, {p}")
            if f"p-value = {p:.4f}" not in table or not re.fullmatch(r"\d\.\d{4}", lev["p_formatted"]):
                problems.append(f"{metric} run {doc['campaign']}: p-value formatting")
    record(7, "report layout (6 rows per metric, 4-decimal p) and oracle-equal cells",
           not problems, "; ".join(problems[:3]) or "3 metrics x 6 rows checked")


def test_8_round_trips():
    rng = random.Random(88)
    entries = [AddressLogEntry(f"inst{rng.randrange(10**9)}", rng.choice(list(LogRegion)), rng.randrange(2**48))
               for _ in range(1000)]
    log_ok = bench_io.read_address_log(bench_io.write_address_log(entries)) == entries
    samples = [MetricSample(f"r{i}", rng.choice(list(Group)), rng.randint(1, 3),
                            rng.uniform(0, 2e4), rng.uniform(0, 2e3), rng.expovariate(0.01))
               for i in range(1000)]
    metrics_ok = bench_io.parse_metrics(bench_io.write_metrics(samples)) == samples
    record(8, "address log and metrics round-trips are lossless", log_ok and metrics_ok,
           f"1000 address entries {'ok' if log_ok else 'differ'}, 1000 metric rows {'ok' if metrics_ok else 'differ'}")
