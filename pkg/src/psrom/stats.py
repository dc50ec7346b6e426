"""Equivalence statistics for paired FFR comparisons.

The batch runner grades predicted-vs-truth FFR pairs with the usual
agreement toolkit: bias with a t-based confidence interval, Bland-Altman
limits, Pearson correlation with a Fisher-z interval, a TOST equivalence
test on the mean, and a one-sided chi-squared test that the delta standard
deviation is below a limit. Test statistics are computed here; scipy only
supplies the t and chi-squared distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2 as _chi2
from scipy.stats import t as _t

#: Equivalence margin on the mean delta and the SD limit under test.
TOST_MARGIN = 0.01
SD_LIMIT = 0.02

#: Bucket edges for stratifying comparisons by predicted FFR.
FFR_BUCKET_EDGES = (0.0, 0.70, 0.75, 0.80, 0.85, 0.90, 1.0)


@dataclass(frozen=True)
class StatsSummary:
    """Agreement summary for one stratum of FFR comparisons."""

    n: int
    bias: float
    standard_deviation: float
    bias_ci95: tuple[float, float]
    pearson_r: float
    pearson_ci95: tuple[float, float]
    bland_altman: tuple[float, float]
    tost_p: float
    chisq_p: float
    slope: float
    intercept: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "bias": self.bias,
            "standard_deviation": self.standard_deviation,
            "bias_ci95_lo": self.bias_ci95[0],
            "bias_ci95_hi": self.bias_ci95[1],
            "pearson_r": self.pearson_r,
            "pearson_ci95_lo": self.pearson_ci95[0],
            "pearson_ci95_hi": self.pearson_ci95[1],
            "bland_altman_lo": self.bland_altman[0],
            "bland_altman_hi": self.bland_altman[1],
            "tost_p": self.tost_p,
            "chisq_p": self.chisq_p,
            "slope": self.slope,
            "intercept": self.intercept,
        }


def _sample_sd(d: np.ndarray) -> float:
    """ddof=1 standard deviation, exactly 0 for an all-equal sample."""
    if np.ptp(d) == 0.0:
        return 0.0
    return float(d.std(ddof=1))


def tost_p_value(deltas: np.ndarray, margin: float = TOST_MARGIN) -> float:
    """Two one-sided t-tests against +-margin; returns the larger p.

    Rejecting (small p) means the mean delta is statistically inside the
    equivalence margin.
    """
    d = np.asarray(deltas, dtype=float)
    n = d.size
    if n < 2:
        raise ValueError("TOST needs at least two deltas")
    bias = float(d.mean())
    s = _sample_sd(d)
    if s == 0.0:
        if abs(bias) < margin:
            return 0.0
        return 0.5 if abs(bias) == margin else 1.0
    se = s / math.sqrt(n)
    p_above_lower = float(_t.sf((bias + margin) / se, n - 1))
    p_below_upper = float(_t.cdf((bias - margin) / se, n - 1))
    return max(p_above_lower, p_below_upper)


def sd_chisq_p_value(deltas: np.ndarray, sd_limit: float = SD_LIMIT) -> float:
    """Left-tail chi-squared p for H0: SD > sd_limit.

    Statistic (n-1) s^2 / sd_limit^2; a small p rejects in favour of
    SD <= sd_limit. All-equal deltas give s = 0 and p = 0.
    """
    d = np.asarray(deltas, dtype=float)
    n = d.size
    if n < 2:
        raise ValueError("variance test needs at least two deltas")
    s = _sample_sd(d)
    stat = (n - 1) * s**2 / sd_limit**2
    return float(_chi2.cdf(stat, n - 1))


def pearson_with_ci(x: np.ndarray, y: np.ndarray) -> tuple[float, tuple[float, float]]:
    """Pearson r plus the Fisher-z 95% interval (NaN bounds when n < 4)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("paired samples of equal size >= 2 required")
    if float(x.std()) == 0.0 or float(y.std()) == 0.0:
        return math.nan, (math.nan, math.nan)
    r = float(np.corrcoef(x, y)[0, 1])
    if x.size < 4:
        return r, (math.nan, math.nan)
    with np.errstate(divide="ignore"):
        z = np.arctanh(r)
    half = 1.96 / math.sqrt(x.size - 3)
    return r, (float(np.tanh(z - half)), float(np.tanh(z + half)))


def summarize(
    ffr_oracle: np.ndarray,
    ffr_psrom: np.ndarray,
    tost_margin: float = TOST_MARGIN,
    sd_limit: float = SD_LIMIT,
) -> StatsSummary:
    """Full agreement summary for one stratum (delta = psrom - oracle)."""
    truth = np.asarray(ffr_oracle, dtype=float)
    pred = np.asarray(ffr_psrom, dtype=float)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise ValueError("ffr arrays must be equal-length vectors")
    n = truth.size
    if n < 2:
        raise ValueError("summary needs at least two comparisons")

    d = pred - truth
    bias = float(d.mean())
    s = _sample_sd(d)
    se = s / math.sqrt(n)
    half = float(_t.ppf(0.975, n - 1)) * se
    r, r_ci = pearson_with_ci(truth, pred)
    if float(truth.std()) == 0.0:
        slope, intercept = math.nan, math.nan
    else:
        slope, intercept = (float(v) for v in np.polyfit(truth, pred, 1))
    return StatsSummary(
        n=n,
        bias=bias,
        standard_deviation=s,
        bias_ci95=(bias - half, bias + half),
        pearson_r=r,
        pearson_ci95=r_ci,
        bland_altman=(bias - 1.96 * s, bias + 1.96 * s),
        tost_p=tost_p_value(d, tost_margin),
        chisq_p=sd_chisq_p_value(d, sd_limit),
        slope=slope,
        intercept=intercept,
    )


def ffr_bucket(value: float) -> str:
    """Stratum label for an FFR value; the last bucket closes at 1.00."""
    v = min(max(float(value), 0.0), 1.0)
    edges = FFR_BUCKET_EDGES
    for lo, hi in zip(edges[:-2], edges[1:-1]):
        if lo <= v < hi:
            return f"[{lo:.2f},{hi:.2f})"
    return f"[{edges[-2]:.2f},{edges[-1]:.2f}]"
