"""Log-domain probability helpers shared by defense simulation and cost builders.

Binomial quantities stay in the log domain (log-gamma plus log-sum-exp) so
counts up to ~1e5 never overflow.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, logsumexp

LOG_TINY = math.log(np.finfo(np.float64).tiny)  # ~ -708.4, cost floor for probabilities


def binom_logpmf(k: np.ndarray, n_trials: int, p: float) -> np.ndarray:
    """log Pr[Binomial(n_trials, p) = k], elementwise over integer array k."""
    k = np.asarray(k, dtype=np.float64)
    out = np.full(k.shape, -np.inf)
    valid = (k >= 0) & (k <= n_trials)
    if p <= 0.0:
        out[valid & (k == 0)] = 0.0
        return out
    if p >= 1.0:
        out[valid & (k == n_trials)] = 0.0
        return out
    kv = k[valid]
    out[valid] = (
        gammaln(n_trials + 1)
        - gammaln(kv + 1)
        - gammaln(n_trials - kv + 1)
        + kv * math.log(p)
        + (n_trials - kv) * math.log1p(-p)
    )
    return out


def binom_support(n_trials: int, p: float, z: float = 10.0, slack: int = 10) -> tuple[int, int]:
    """Integer range [lo, hi] holding all but a negligible tail of the pmf.

    z standard deviations plus a constant slack; z=10 keeps the discarded mass
    below 1e-12 for any p.
    """
    mean = n_trials * p
    sigma = math.sqrt(max(n_trials * p * (1.0 - p), 0.0))
    lo = max(0, int(math.floor(mean - z * sigma)) - slack)
    hi = min(n_trials, int(math.ceil(mean + z * sigma)) + slack)
    return lo, hi


def binom_bucket_logmass(n_trials: int, p: float, upper_edges: np.ndarray) -> np.ndarray:
    """log Pr[Binomial in bucket] for contiguous count buckets.

    Bucket 0 is [0, upper_edges[0]]; bucket k>0 is (upper_edges[k-1], upper_edges[k]].
    The last edge must be >= n_trials so the buckets partition {0..n_trials}.
    """
    edges = np.asarray(upper_edges, dtype=np.int64)
    if edges.size == 0 or edges[-1] < n_trials:
        raise ValueError("bucket edges must cover the full binomial support")
    if np.any(np.diff(edges) <= 0):
        raise ValueError("bucket edges must be strictly increasing")
    counts = np.arange(0, n_trials + 1)
    logpmf = binom_logpmf(counts, n_trials, p)
    out = np.full(edges.size, -np.inf)
    lo = 0
    for b, edge in enumerate(edges):
        hi = min(int(edge), n_trials)
        if hi >= lo:
            out[b] = logsumexp(logpmf[lo : hi + 1])
        lo = hi + 1
        if lo > n_trials:
            break
    return out


def shifted_ceil_laplace_logpmf(d: np.ndarray, scale: float, shift: float) -> np.ndarray:
    """log Pr[ceil(L + shift) = d] for L ~ Laplace(0, scale), elementwise.

    The event is L in (d - 1 - shift, d - shift]; the mass comes from the
    Laplace CDF in closed form, computed stably on either side of the origin.
    """
    if scale <= 0:
        raise ValueError("scale must be > 0")
    d = np.asarray(d, dtype=np.float64)
    t1 = (d - 1.0 - shift) / scale
    t2 = (d - shift) / scale
    out = np.empty(d.shape, dtype=np.float64)
    log_half = math.log(0.5)
    log1m_step = math.log1p(-math.exp(-1.0 / scale))  # log(1 - e^{-1/scale})

    left = t2 <= 0.0  # whole interval below the origin
    out[left] = log_half + t2[left] + log1m_step
    right = t1 >= 0.0  # whole interval above the origin
    out[right] = log_half - t1[right] + log1m_step
    mid = ~(left | right)  # interval straddles the origin
    if mid.any():
        mass = -np.expm1(-t2[mid]) * 0.5 + -np.expm1(t1[mid]) * 0.5
        out[mid] = np.log(mass)
    return out


def sample_shifted_ceil_laplace(
    count: int, scale: float, shift: float, rng: np.random.Generator
) -> np.ndarray:
    """Integer samples ceil(L + shift), L ~ Laplace(0, scale)."""
    return np.ceil(rng.laplace(0.0, scale, size=count) + shift).astype(np.int64)
