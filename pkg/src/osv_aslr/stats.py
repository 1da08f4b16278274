"""Summary statistics and hypothesis tests used to evaluate layouts and benchmarks.

``f_upper_tail`` and the Student-t quantile behind ``confidence_interval``
are computed from the regularized incomplete beta function in
``scipy.special``; everything else is written out directly.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InsufficientData, InvalidArgument, OutOfRegime

KS_ASYMPTOTIC_C = 1.36  # alpha = 0.05
KS_MIN_N = 51


@dataclass(frozen=True)
class SampleSet:
    values: tuple
    label: str = ""

    def __init__(self, values, label=""):
        object.__setattr__(self, "values", tuple(float(v) for v in values))
        object.__setattr__(self, "label", label)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class TestReport:
    """Outcome of a hypothesis test.

    KS reports carry ``threshold`` (D_crit); Levene reports carry ``p_value``
    and the F degrees of freedom in ``df``.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    statistic: float
    alpha: float
    reject_null: bool
    n: tuple
    threshold: float = None
    p_value: float = None
    df: tuple = None


class Centering(enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"


def _values(s):
    if isinstance(s, SampleSet):
        return np.asarray(s.values, dtype=float)
    return np.asarray(list(s), dtype=float)


def sample_sd(s):
    x = _values(s)
    if x.size < 2:
        raise InsufficientData(f"standard deviation needs at least 2 values, got {x.size}")
    # shifting by the first value keeps constant samples at exactly zero
    d = x - x[0]
    return math.sqrt(float(np.sum((d - d.mean()) ** 2)) / (x.size - 1))


def t_quantile(p, df):
    """Inverse CDF of Student's t with ``df`` degrees of freedom."""
    if not 0 < p < 1:
        raise InvalidArgument(f"probability {p} outside (0, 1)")
    if df <= 0:
        raise InvalidArgument(f"degrees of freedom must be positive, got {df}")
    if p == 0.5:
        return 0.0
    # P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
    two_tail = 2 * min(p, 1 - p)
    x = special.betaincinv(df / 2, 0.5, two_tail)
    t = math.sqrt(df * (1 - x) / x)
    return t if p > 0.5 else -t


def confidence_interval(s, level=0.95):
    if not 0 < level < 1:
        raise InvalidArgument(f"confidence level {level} outside (0, 1)")
    x = _values(s)
    n = x.size
    sd = sample_sd(x)
    mean = float(x.mean())
    half = t_quantile((1 + level) / 2, n - 1) * sd / math.sqrt(n)
    return mean - half, mean + half


def f_upper_tail(x, d1, d2):
    """P(F > x) for an F(d1, d2) variate."""
    if d1 < 1 or d2 < 1:
        raise InvalidArgument(f"invalid degrees of freedom ({d1}, {d2})")
    if x < 0 or math.isnan(x):
        raise InvalidArgument(f"F statistic must be non-negative, got {x}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return float(special.betainc(d2 / 2, d1 / 2, d2 / (d2 + d1 * x)))


def levene_test(groups, centering=Centering.MEAN, alpha=0.05):
    """Levene's test for equal variances across ``groups``.

    ``Centering.MEDIAN`` gives the Brown-Forsythe variant.
    """
    centering = Centering(centering)
    data = [_values(g) for g in groups]
    k = len(data)
    if k < 2:
        raise InsufficientData(f"Levene's test needs at least 2 groups, got {k}")
    if any(g.size < 2 for g in data):
        raise InsufficientData("every group needs at least 2 values")
    center = np.mean if centering is Centering.MEAN else np.median
    z = [np.abs(g - center(g)) for g in data]
    sizes = np.array([g.size for g in data])
    total = int(sizes.sum())
    zbar_i = np.array([zi.mean() for zi in z])
    zbar = float(np.concatenate(z).mean())
    between = float(np.sum(sizes * (zbar_i - zbar) ** 2))
    within = float(sum(np.sum((zi - m) ** 2) for zi, m in zip(z, zbar_i)))
    d1, d2 = k - 1, total - k
    if within == 0:
        # every deviation equals its group mean: no spread to compare
        w = 0.0 if between == 0 else math.inf
    else:
        w = (d2 / d1) * between / within
    p = f_upper_tail(w, d1, d2)
    return TestReport(
        name="levene",
        statistic=w,
        alpha=alpha,
        reject_null=p < alpha,
        n=tuple(int(v) for v in sizes),
        p_value=p,
        df=(d1, d2),
    )


def ks_critical_value(n, c=KS_ASYMPTOTIC_C):
    return c / math.sqrt(n)


def ks_statistic(values, lo, hi):
    """Two-sided one-sample KS distance against Uniform(lo, hi)."""
    x = np.sort(_values(values))
    n = x.size
    f = (x - lo) / (hi - lo)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_uniform_test(s, lo, hi, alpha=0.05):
    x = _values(s)
    n = x.size
    if not lo < hi:
        raise InvalidArgument(f"need lo < hi, got [{lo}, {hi}]")
    if n < KS_MIN_N:
        raise OutOfRegime(
            f"asymptotic KS critical value needs n > 50, got n = {n}"
        )
    if np.any(x < lo) or np.any(x > hi):
        raise InvalidArgument(f"samples fall outside [{lo}, {hi}]")
    if not 0 < alpha < 1:
        raise InvalidArgument(f"alpha {alpha} outside (0, 1)")
    # other levels use the Kolmogorov limit c(alpha) = sqrt(-ln(alpha / 2) / 2)
    c = KS_ASYMPTOTIC_C if alpha == 0.05 else math.sqrt(-0.5 * math.log(alpha / 2))
    d = ks_statistic(x, lo, hi)
    d_crit = ks_critical_value(n, c)
    return TestReport(
        name="ks-uniform",
        statistic=d,
        alpha=alpha,
        reject_null=d > d_crit,
        n=(n,),
        threshold=d_crit,
    )
