"""
Statistical helpers for Monte Carlo experiments.

Rate metrics use Wilson score intervals at 95%; means carry standard errors.
"""

import math
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy import stats

from config.config import CONFIDENCE_Z


def wilson_interval(successes: int, trials: int, z: float = CONFIDENCE_Z) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial rate.

    Args:
        successes: Number of successes
        trials: Number of trials (must be positive)
        z: Normal quantile, 95% by default

    Returns:
        (lower, upper) bounds clipped to [0, 1]
    """
    if trials <= 0:
        raise ValueError("wilson_interval needs at least one trial")
    p_hat = successes / trials
    denom = 1.0 + z * z / trials
    center = (p_hat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def binomial_sigma(p: float, trials: int) -> float:
    """Standard deviation of an empirical rate with true rate p."""
    return math.sqrt(max(p * (1 - p), 0.0) / trials)


def standard_error(values: Sequence[float]) -> float:
    """Standard error of the mean (0 for fewer than two samples)."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return 0.0
    return float(arr.std(ddof=1) / math.sqrt(arr.size))


def rate_summary(successes: int, trials: int) -> Dict[str, float]:
    """Rate, its standard error and Wilson bounds in one dict."""
    lower, upper = wilson_interval(successes, trials)
    rate = successes / trials
    return {
        "rate": rate,
        "sigma": binomial_sigma(rate, trials),
        "lower": lower,
        "upper": upper,
    }


def chi_square_uniform(counts: Sequence[int], confidence: float = 0.999) -> Tuple[float, float, bool]:
    """
    Chi-square goodness-of-fit against the uniform distribution.

    Returns:
        (statistic, critical value at `confidence`, statistic <= critical)
    """
    observed = np.asarray(counts, dtype=float)
    expected = observed.sum() / observed.size
    statistic = float(((observed - expected) ** 2 / expected).sum())
    critical = float(stats.chi2.ppf(confidence, df=observed.size - 1))
    return statistic, critical, statistic <= critical


def binomial_tail(k: int, trials: int, p: float) -> float:
    """Pr[X >= k] for X ~ Binomial(trials, p)."""
    return float(stats.binom.sf(k - 1, trials, p))
