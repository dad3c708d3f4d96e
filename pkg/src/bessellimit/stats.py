"""Empirical-distribution machinery: ECDFs, KS tests, Wilson intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import erfinv

__all__ = ["KSReport", "ecdf", "ks_two_sample", "ks_one_sample", "wilson_ci"]


@dataclass(frozen=True)
class KSReport:
    statistic: float
    p_value: float
    n1: int
    n2: int | None = None


def _kolmogorov_sf(lam: float) -> float:
    """Asymptotic Kolmogorov survival function Q(lam) = 2 sum (-1)^(k-1) e^(-2 k^2 lam^2)."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        total += term
        if abs(term) < 1e-16:
            break
    return min(1.0, max(0.0, total))


def ecdf(values: Sequence[float]) -> Callable[[float], float]:
    """Right-continuous empirical CDF of the sample, as a callable."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ValueError("ecdf requires a nonempty sample")
    n = arr.size

    def cdf(x: float):
        return np.searchsorted(arr, x, side="right") / n

    return cdf


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KSReport:
    """Two-sample KS test; exact sup-distance over the pooled sample points."""
    xa = np.sort(np.asarray(a, dtype=float))
    xb = np.sort(np.asarray(b, dtype=float))
    if xa.size == 0 or xb.size == 0:
        raise ValueError("ks_two_sample requires nonempty samples")
    pooled = np.concatenate([xa, xb])
    fa = np.searchsorted(xa, pooled, side="right") / xa.size
    fb = np.searchsorted(xb, pooled, side="right") / xb.size
    stat = float(np.max(np.abs(fa - fb)))
    n_eff = xa.size * xb.size / (xa.size + xb.size)
    p = _kolmogorov_sf(math.sqrt(n_eff) * stat)
    return KSReport(statistic=stat, p_value=p, n1=int(xa.size), n2=int(xb.size))


def ks_one_sample(values: Sequence[float], cdf: Callable[[float], float]) -> KSReport:
    """One-sample KS test of the sample against a reference CDF."""
    xs = np.sort(np.asarray(values, dtype=float))
    if xs.size == 0:
        raise ValueError("ks_one_sample requires a nonempty sample")
    n = xs.size
    ref = np.asarray([cdf(x) for x in xs], dtype=float)
    upper = np.max(np.arange(1, n + 1) / n - ref)
    lower = np.max(ref - np.arange(0, n) / n)
    stat = float(max(upper, lower, 0.0))
    p = _kolmogorov_sf(math.sqrt(n) * stat)
    return KSReport(statistic=stat, p_value=p, n1=int(n))


def wilson_ci(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("wilson_ci requires trials >= 1")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes must lie in [0, trials], got {successes}/{trials}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    z = math.sqrt(2.0) * float(erfinv(confidence))
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi
