"""One-way ANOVA and the F-distribution upper tail."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGroups, InvalidDf, ZeroWithinVariance
from .features import FeatureMatrix


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, 100_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0``."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_pvalue(f: float, df1: int, df2: int) -> float:
    """Upper-tail probability ``P(F >= f)`` of an F(df1, df2) variate."""
    if df1 < 1 or df2 < 1 or int(df1) != df1 or int(df2) != df2:
        raise InvalidDf(f"degrees of freedom must be positive integers, got ({df1}, {df2})")
    if math.isnan(f) or f < 0:
        raise ValueError("f must be a non-negative number")
    if math.isinf(f):
        return 0.0
    if f == 0:
        return 1.0
    x = df2 / (df2 + df1 * f)
    return min(1.0, max(0.0, betainc(df2 / 2.0, df1 / 2.0, x)))


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    df_between: int
    df_within: int
    p_value: float
    ss_between: float
    ss_within: float
    zero_within_variance: bool = False

    def to_dict(self) -> dict:
        return {
            "f_statistic": self.f_statistic,
            "df_between": self.df_between,
            "df_within": self.df_within,
            "p_value": self.p_value,
            "ss_between": self.ss_between,
            "ss_within": self.ss_within,
            "zero_within_variance": self.zero_within_variance,
        }


def anova_oneway(values, groups) -> AnovaResult:
    """Classic one-way ANOVA of ``values`` grouped by the aligned ``groups`` labels.

    When the within-group variance vanishes but the group means differ, the
    result is flagged with ``F = inf`` and ``p = 0``; when both vanish
    :class:`ZeroWithinVariance` is raised.
    """
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    g = np.asarray(groups).reshape(-1)
    if x.shape != g.shape:
        raise DegenerateGroups("values and groups are not aligned")
    _, codes = np.unique(g, return_inverse=True)
    k = int(codes.max()) + 1 if codes.size else 0
    n = x.shape[0]
    if k < 2 or n <= k:
        raise DegenerateGroups(f"need >= 2 groups and more values than groups (groups={k}, n={n})")
    counts = np.bincount(codes, minlength=k)
    means = np.bincount(codes, weights=x, minlength=k) / counts
    grand = x.mean()
    ss_between = float(np.dot(counts, (means - grand) ** 2))
    ss_within = float(((x - means[codes]) ** 2).sum())
    df_b, df_w = k - 1, n - k
    scale = float(np.dot(x - grand, x - grand)) + float(n) * grand * grand
    eps = 1e-24 * max(scale, 1e-300)
    if ss_within <= eps:
        if ss_between <= eps:
            raise ZeroWithinVariance("all values are equal: F is 0/0")
        return AnovaResult(math.inf, df_b, df_w, 0.0, ss_between, 0.0, True)
    f = (ss_between / df_b) / (ss_within / df_w)
    return AnovaResult(f, df_b, df_w, f_pvalue(f, df_b, df_w), ss_between, ss_within)


def anova_f(matrix: FeatureMatrix) -> AnovaResult:
    """Pooled test: every (row, feature) value is one observation grouped by user."""
    groups = np.repeat(matrix.users, matrix.n_features)
    return anova_oneway(matrix.X.reshape(-1), groups)


def anova_per_feature(matrix: FeatureMatrix) -> list[AnovaResult | None]:
    """One test per column; ``None`` where a column is constant."""
    out = []
    for j in range(matrix.n_features):
        try:
            out.append(anova_oneway(matrix.X[:, j], matrix.users))
        except ZeroWithinVariance:
            out.append(None)
    return out
