"""Rate mapping and distribution summaries."""

import numpy as np

from .errors import AggregationError
from .phy import DATA_SYMBOL_FRACTION, MAX_SPECTRAL_EFF, PRB_BW_HZ


def per_prb_rate_bps(sinr_lin) -> np.ndarray:
    """Truncated Shannon map of one PRB carrying data 6 of 14 symbols."""
    se = np.minimum(np.log2(1.0 + np.asarray(sinr_lin, dtype=float)), MAX_SPECTRAL_EFF)
    return PRB_BW_HZ * DATA_SYMBOL_FRACTION * se


def command_rate_bps(total_rate_bps, n_alloc, n_cc_prb: int = 1) -> np.ndarray:
    """Throughput of a control stream confined to n_cc_prb PRBs, taken at
    the user's mean per-PRB rate."""
    n = np.asarray(n_alloc, dtype=float)
    rate = np.asarray(total_rate_bps, dtype=float)
    return np.where(n > 0, rate / np.maximum(n, 1.0) * n_cc_prb, 0.0)


def empirical_cdf(values):
    """(sorted values, cumulative probabilities i/n)."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise AggregationError("empty sample")
    return x, np.arange(1, x.size + 1) / x.size


def nearest_rank_percentile(values, pct: float) -> float:
    """Nearest-rank percentile: smallest sample with cdf >= pct/100."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise AggregationError("empty sample")
    if not 0.0 < pct <= 100.0:
        raise AggregationError(f"percentile {pct} outside (0, 100]")
    idx = int(np.ceil(pct / 100.0 * x.size)) - 1
    return float(x[idx])


def success_fraction(values, threshold: float) -> float:
    """Fraction strictly above the threshold."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise AggregationError("empty sample")
    return float(np.mean(x > threshold))
