"""Benchmark metric files, address logs and the summary reports built from them.

Metrics file (UTF-8, comma separated, header required)::

    run_id,group,campaign,run_time_ms,boot_time_ms,mem_mib
    r1,M,2,8993.5,655.7,135.6

``group`` is ``M`` (modified, randomized) or ``UM`` (unmodified baseline).
``mem_mib`` is the combined VMM plus guest resident memory in MiB and is
carried as one opaque number.

Address log: one ``instance_id region address`` record per line, tab
separated, address as ``0x`` plus 16 lowercase hex digits.
"""

import csv
import enum
import io
import json
import math
import re
from dataclasses import dataclass

from . import stats
from .errors import InsufficientData, InvalidArgument, ParseError
from .vas import ADDRESS_LIMIT

METRIC_HEADER = ("run_id", "group", "campaign", "run_time_ms", "boot_time_ms", "mem_mib")
METRICS = {
    "run_time_ms": "Run Time (ms)",
    "boot_time_ms": "Boot Time (ms)",
    "mem_mib": "Mem Usage (MiB)",
}


class Group(enum.Enum):
    MODIFIED = "M"
    UNMODIFIED = "UM"


_GROUP_TOKENS = {
    "M": Group.MODIFIED,
    "MODIFIED": Group.MODIFIED,
    "UM": Group.UNMODIFIED,
    "UNMODIFIED": Group.UNMODIFIED,
}


@dataclass(frozen=True)
class MetricSample:
    run_id: str
    group: Group
    campaign: int
    run_time_ms: float
    boot_time_ms: float
    mem_mib: float

    def __post_init__(self):
        for name in METRICS:
            value = getattr(self, name)
            if not value >= 0:
                raise InvalidArgument(f"{name} must be non-negative, got {value}")

    def metric(self, name):
        if name not in METRICS:
            raise InvalidArgument(f"unknown metric {name!r}; expected one of {sorted(METRICS)}")
        return getattr(self, name)


def parse_metrics(stream):
    """Parse a metrics file (text or file object) into ``MetricSample`` objects."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return []
    if tuple(h.strip() for h in header) != METRIC_HEADER:
        raise ParseError(f"expected header {','.join(METRIC_HEADER)}", line=1)
    samples = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(METRIC_HEADER):
            raise ParseError(f"expected {len(METRIC_HEADER)} fields, got {len(row)}", line=line)
        run_id, group, campaign, *values = (cell.strip() for cell in row)
        try:
            grp = _GROUP_TOKENS[group.upper()]
        except KeyError:
            raise ParseError(f"unknown group {group!r} (expected M or UM)", line=line) from None
        try:
            camp = int(campaign)
            nums = [float(v) for v in values]
        except ValueError as exc:
            raise ParseError(str(exc), line=line) from None
        try:
            samples.append(MetricSample(run_id, grp, camp, *nums))
        except InvalidArgument as exc:
            raise ParseError(str(exc), line=line) from None
    return samples


def write_metrics(samples, stream=None):
    out = io.StringIO() if stream is None else stream
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(METRIC_HEADER)
    for s in samples:
        writer.writerow([s.run_id, s.group.value, s.campaign,
                         repr(s.run_time_ms), repr(s.boot_time_ms), repr(s.mem_mib)])
    if stream is None:
        return out.getvalue()
    return None


class LogRegion(enum.Enum):
    BASE = "Base"
    HEAP = "Heap"
    STACK = "Stack"


@dataclass(frozen=True)
class AddressLogEntry:
    instance_id: str
    region: LogRegion
    address: int


_ADDR_RE = re.compile(r"0x[0-9a-f]{16}")


def format_address(addr):
    return f"{addr:#018x}"


def _check_instance_id(instance_id):
    if not instance_id or any(c.isspace() for c in instance_id):
        raise InvalidArgument(f"instance id {instance_id!r} must be non-empty without whitespace")


def write_address_log(entries, stream=None):
    out = io.StringIO() if stream is None else stream
    for e in entries:
        _check_instance_id(e.instance_id)
        if not 0 <= e.address < ADDRESS_LIMIT:
            raise InvalidArgument(f"address {e.address:#x} outside [0, 2^48)")
        out.write(f"{e.instance_id}\t{e.region.value}\t{format_address(e.address)}\n")
    if stream is None:
        return out.getvalue()
    return None


def read_address_log(stream):
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    entries = []
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", line=lineno)
        instance_id, region, addr = fields
        try:
            reg = LogRegion(region)
        except ValueError:
            raise ParseError(f"unknown region {region!r}", line=lineno) from None
        if not _ADDR_RE.fullmatch(addr):
            raise ParseError(f"address {addr!r} is not 0x + 16 lowercase hex digits", line=lineno)
        value = int(addr, 16)
        if value >= ADDRESS_LIMIT:
            raise ParseError(f"address {addr} outside [0, 2^48)", line=lineno)
        entries.append(AddressLogEntry(instance_id, reg, value))
    return entries


def layout_entries(record):
    """Address-log entries for one simulated instance: base, heap segments, stack."""
    entries = [AddressLogEntry(record.instance_id, LogRegion.BASE, record.program_base)]
    entries += [AddressLogEntry(record.instance_id, LogRegion.HEAP, a) for a in record.heap_segments]
    entries.append(AddressLogEntry(record.instance_id, LogRegion.STACK, record.stack_base))
    return entries


def region_samples(entries, region):
    """Addresses for ``region``; heap uses each instance's first segment only."""
    region = LogRegion(region)
    if region is not LogRegion.HEAP:
        return [e.address for e in entries if e.region is region]
    seen = set()
    out = []
    for e in entries:
        if e.region is LogRegion.HEAP and e.instance_id not in seen:
            seen.add(e.instance_id)
            out.append(e.address)
    return out


# -- reports ----------------------------------------------------------------

@dataclass(frozen=True)
class GroupSummary:
    group: Group
    campaign: int
    n: int
    mean: float
    sd: float
    ci_low: float
    ci_high: float

    @property
    def label(self):
        return f"{self.group.value} {self.campaign}"

    def as_dict(self):
        return {
            "group": self.group.value,
            "campaign": self.campaign,
            "n": self.n,
            "mean": self.mean,
            "sd": self.sd,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


def _select(samples, metric, group, campaign):
    return [s.metric(metric) for s in samples if s.group is group and s.campaign == campaign]


def campaigns(samples):
    return sorted({s.campaign for s in samples})


def summarize_group(samples, metric, level=0.95):
    """One summary row per (campaign, group), ordered M1, UM1, M2, UM2, ..."""
    if metric not in METRICS:
        raise InvalidArgument(f"unknown metric {metric!r}")
    rows = []
    for camp in campaigns(samples):
        for group in (Group.MODIFIED, Group.UNMODIFIED):
            values = _select(samples, metric, group, camp)
            if not values:
                continue
            if len(values) < 2:
                raise InsufficientData(
                    f"{group.value} {camp}: need at least 2 samples, got {len(values)}"
                )
            lo, hi = stats.confidence_interval(values, level)
            rows.append(GroupSummary(group, camp, len(values), float(sum(values) / len(values)),
                                     stats.sample_sd(values), lo, hi))
    if not rows:
        raise InsufficientData("no samples to summarize")
    return rows


def compare_groups(samples, metric, campaign, alpha=0.05, centering=stats.Centering.MEAN):
    """Levene's test, modified vs unmodified, on one metric within one campaign."""
    modified = _select(samples, metric, Group.MODIFIED, campaign)
    unmodified = _select(samples, metric, Group.UNMODIFIED, campaign)
    for group, values in ((Group.MODIFIED, modified), (Group.UNMODIFIED, unmodified)):
        if len(values) < 2:
            raise InsufficientData(
                f"campaign {campaign}: group {group.value} has {len(values)} samples, need 2"
            )
    return stats.levene_test([modified, unmodified], centering, alpha)


def format_p(p):
    return f"{p:.4f}"


def build_report(samples, metric, campaign=None, alpha=0.05):
    """Structured reports, one per campaign: ``{metric, campaign, rows, levene}``."""
    rows = summarize_group(samples, metric)
    selected = campaigns(samples) if campaign is None else [campaign]
    docs = []
    for camp in selected:
        camp_rows = [r for r in rows if r.campaign == camp]
        report = compare_groups(samples, metric, camp, alpha)
        docs.append({
            "metric": metric,
            "campaign": camp,
            "rows": [r.as_dict() for r in camp_rows],
            "levene": {
                "W": report.statistic,
                "p": report.p_value,
                "p_formatted": format_p(report.p_value),
                "reject": report.reject_null,
                "alpha": alpha,
                "df": list(report.df),
            },
        })
    return docs


def render_table(docs):
    metric = docs[0]["metric"]
    title = METRICS[metric]
    head = f"{'Run':<6}|{'n':>5} |{'Mean':>12} |{'SD':>11} |{'95% CI low':>12} |{'95% CI high':>12}"
    lines = [title, head, "-" * len(head)]
    for doc in docs:
        for r in doc["rows"]:
            label = f"{r['group']} {r['campaign']}"
            lines.append(
                f"{label:<6}|{r['n']:>5} |{r['mean']:>12.4f} |{'±' + format(r['sd'], '.4f'):>11} |"
                f"{r['ci_low']:>12.4f} |{r['ci_high']:>12.4f}"
            )
    lines.append("")
    for doc in docs:
        lev = doc["levene"]
        verdict = "reject H0" if lev["reject"] else "fail to reject H0"
        lines.append(
            f"Levene M vs UM, run {doc['campaign']}: W = {lev['W']:.4f}, "
            f"p-value = {lev['p_formatted']} ({verdict} at alpha = {lev['alpha']:g})"
        )
    return "\n".join(lines) + "\n"


def render_json(docs):
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        return v

    def walk(o):
        if isinstance(o, dict):
            return {k: walk(v) for k, v in o.items()}
        if isinstance(o, list):
            return [walk(v) for v in o]
        return clean(o)

    return json.dumps(walk(docs), indent=2, sort_keys=True) + "\n"


def render_ks(report, region, lo, hi):
    verdict = "reject H0 (not uniform)" if report.reject_null else "fail to reject H0 (consistent with uniform)"
    return (
        f"KS uniformity, region {LogRegion(region).value}: n = {report.n[0]}, "
        f"support [{format_address(lo)}, {format_address(hi)})\n"
        f"D = {report.statistic:.6f}, D_crit = {report.threshold:.6f} (alpha = {report.alpha:g})\n"
        f"{verdict}\n"
    )
