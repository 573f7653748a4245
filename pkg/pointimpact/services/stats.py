from __future__ import annotations

import math

import numpy as np


def order_statistic_index(gamma: float, size: int) -> int:
    """0-based index of the order statistic at ceil(gamma * size) (1-indexed).

    The product is rounded to 9 decimals first so that levels such as
    (1 - 0.95) / 2 do not pick the next order statistic through
    floating-point noise.
    """

    if size < 1:
        raise ValueError("cannot take a quantile of an empty sample")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"quantile level must lie in [0, 1], got {gamma}")
    rank = math.ceil(round(gamma * size, 9))
    return min(max(rank, 1), size) - 1


def lower_quantile(values: np.ndarray, gamma: float) -> float:
    """Lower empirical gamma-quantile: the order statistic at ceil(gamma * B)."""

    ordered = np.sort(np.asarray(values, dtype=float))
    return float(ordered[order_statistic_index(gamma, ordered.size)])


def upper_quantile(values: np.ndarray, alpha: float) -> float:
    """Upper alpha-quantile, i.e. the lower (1 - alpha)-quantile."""

    return lower_quantile(values, 1.0 - alpha)


def binomial_standard_error(proportion: float, trials: int) -> float:
    if trials < 1:
        raise ValueError("trials must be positive")
    return math.sqrt(proportion * (1.0 - proportion) / trials)


def quantile_standard_error(values: np.ndarray, gamma: float) -> float:
    """Order-statistic (binomial) standard error of an empirical quantile.

    Uses the spread between the order statistics one binomial s.d. away,
    which needs no density estimate.
    """

    ordered = np.sort(np.asarray(values, dtype=float))
    size = ordered.size
    spread = math.sqrt(size * gamma * (1.0 - gamma))
    lo = order_statistic_index(max(gamma - spread / size, 0.0), size)
    hi = order_statistic_index(min(gamma + spread / size, 1.0), size)
    return float(ordered[hi] - ordered[lo]) / 2.0


__all__ = [
    "binomial_standard_error",
    "lower_quantile",
    "order_statistic_index",
    "quantile_standard_error",
    "upper_quantile",
]
