"""Query-recovery attacks: likelihood cost matrices plus the assignment step.

The main attack scores every (keyword, tag) pair by the negative log-likelihood
of the tag's observed frequencies and volume under that keyword, then solves an
unbalanced assignment problem. Defense-aware variants swap in the volume model
the defense actually induces. A frequency-only nearest-neighbor baseline is
included for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .assignment import solve_rectangular_assignment
from .corpus import AuxKnowledge
from .distributions import (
    LOG_TINY,
    binom_bucket_logmass,
    binom_logpmf,
    binom_support,
    shifted_ceil_laplace_logpmf,
)
from .leakage import DefenseConfig, TagTable, ceil_log, ppyy_pad_constant
from .trends import TrendMatrix


@dataclass
class CostMatrix:
    """Keyword-by-tag negative log-likelihood scores (rows: keywords, cols: tags)."""

    values: np.ndarray  # (n, m)
    kind: str  # frequency | volume | combined

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("cost matrix must be 2-D")
        if not np.isfinite(self.values).all():
            raise ValueError("cost matrix contains non-finite entries")

    @property
    def n_keywords(self) -> int:
        return self.values.shape[0]

    @property
    def n_tags(self) -> int:
        return self.values.shape[1]

    def save_text(self, path: str | Path) -> None:
        np.savetxt(path, self.values)


@dataclass
class Assignment:
    """Injective tag -> keyword map plus the achieved total cost."""

    keyword_of: np.ndarray  # (m,) int
    objective: float

    def __post_init__(self) -> None:
        self.keyword_of = np.asarray(self.keyword_of, dtype=np.int64)
        if len(set(self.keyword_of.tolist())) != self.keyword_of.size:
            raise ValueError("assignment must be injective")

    def save_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("tag_index,keyword_index\n")
            for tag, kw in enumerate(self.keyword_of):
                fh.write(f"{tag},{kw}\n")


@dataclass(frozen=True)
class AttackConfig:
    """Attack weighting and smoothing knobs.

    alpha weighs frequency vs volume information (0.5 is the plain maximum
    likelihood estimator). p_min floors auxiliary frequencies before logs;
    v_clamp keeps auxiliary volumes v_clamp/n_docs away from 0 and 1.
    """

    alpha: float = 0.5
    defense_aware: bool = True
    p_min: float = 1e-6
    v_clamp: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if not 0.0 < self.p_min <= 1e-3:
            raise ValueError("p_min must be in (0, 1e-3]")
        if not 0.0 < self.v_clamp <= 0.5:
            raise ValueError("v_clamp must be in (0, 0.5]")


def cost_freq(
    freq_obs: np.ndarray, counts: np.ndarray, freq_aux: np.ndarray, p_min: float = 1e-6
) -> CostMatrix:
    """Frequency cost: entry (i,j) = -sum_k eta_k f_obs[j,k] log f_aux[i,k].

    Auxiliary frequencies are floored at p_min before the log; the weight
    eta_k * f_obs[j,k] is the integer tag count, so empty cells contribute 0.
    """
    if p_min <= 0:
        raise ValueError("p_min must be > 0")
    freq_obs = np.asarray(freq_obs, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    freq_aux = np.asarray(freq_aux, dtype=np.float64)
    if freq_obs.shape[1] != counts.size or freq_aux.shape[1] != counts.size:
        raise ValueError("interval dimensions do not match")
    weights = freq_obs * counts[None, :]  # (m, rho)
    logs = np.log(np.maximum(freq_aux, p_min))  # (n, rho)
    return CostMatrix(-(logs @ weights.T), kind="frequency")


def _clamped(aux_volumes: np.ndarray, n_docs: int, v_clamp: float) -> np.ndarray:
    lo = v_clamp / n_docs
    return np.clip(np.asarray(aux_volumes, dtype=np.float64), lo, 1.0 - lo)


def cost_vol_plain(
    volumes: np.ndarray, n_docs: int, aux_volumes: np.ndarray, v_clamp: float = 0.5
) -> CostMatrix:
    """Binomial volume cost from normalized observed volumes.

    Entry (i,j) = -[N v_j log q_i + N (1 - v_j) log(1 - q_i)] with q_i the
    clamped auxiliary volume.
    """
    if n_docs < 1:
        raise ValueError("n_docs must be >= 1")
    volumes = np.asarray(volumes, dtype=np.float64)
    q = _clamped(aux_volumes, n_docs, v_clamp)
    values = -n_docs * (np.outer(np.log(q), volumes) + np.outer(np.log1p(-q), 1.0 - volumes))
    return CostMatrix(values, kind="volume")


def cost_vol_clrz(
    volumes: np.ndarray,
    n_docs: int,
    aux_volumes: np.ndarray,
    tpr: float,
    fpr: float,
    v_clamp: float = 0.5,
) -> CostMatrix:
    """CLRZ-aware volume cost: a document matches keyword i with probability
    v_i * TPR + (1 - v_i) * FPR after index obfuscation."""
    if not (0.0 <= fpr < tpr <= 1.0):
        raise ValueError("requires 0 <= fpr < tpr <= 1")
    aux = np.asarray(aux_volumes, dtype=np.float64)
    effective = aux * tpr + (1.0 - aux) * fpr
    return cost_vol_plain(volumes, n_docs, effective, v_clamp)


def cost_vol_ppyy(
    raw_volumes: np.ndarray,
    n_docs: int,
    aux_volumes: np.ndarray,
    epsilon: float,
    n_keywords: int,
    tail_mass: float = 1e-12,
) -> CostMatrix:
    """PPYY-aware volume cost from padded integer volumes.

    The observed volume is Binomial(n_docs, v_i) plus an independent
    ceil(Laplace(2/eps) + shift) pad; entry (i,j) is the negated log of that
    convolution evaluated at the tag's padded volume. The binomial support is
    truncated so the discarded mass stays below tail_mass, and probabilities
    are floored to keep the costs finite.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if not 0 < tail_mass < 1:
        raise ValueError("tail_mass must be in (0, 1)")
    raw = np.asarray(raw_volumes, dtype=np.int64)
    aux = np.asarray(aux_volumes, dtype=np.float64)
    scale = 2.0 / epsilon
    shift = ppyy_pad_constant(epsilon, n_keywords)
    z = max(10.0, math.sqrt(3.0 * math.log(2.0 / tail_mass)))

    unique_vols, inverse = np.unique(raw, return_inverse=True)
    values = np.empty((aux.size, unique_vols.size))
    for i, q in enumerate(aux):
        lo, hi = binom_support(n_docs, float(q), z=z)
        support = np.arange(lo, hi + 1)
        log_pmf = binom_logpmf(support, n_docs, float(q))
        log_pad = shifted_ceil_laplace_logpmf(
            unique_vols[:, None] - support[None, :], scale, shift
        )
        log_prob = logsumexp(log_pmf[None, :] + log_pad, axis=1)
        values[i] = -np.maximum(log_prob, LOG_TINY)
    return CostMatrix(values[:, inverse], kind="volume")


def ppyy_observed_volume_logpmf(
    observed: np.ndarray, n_docs: int, aux_volume: float, epsilon: float, n_keywords: int
) -> np.ndarray:
    """log pmf of the PPYY padded volume for one keyword, over integer values."""
    cost = cost_vol_ppyy(observed, n_docs, np.asarray([aux_volume]), epsilon, n_keywords)
    return -cost.values[0]


def cost_vol_seal(
    observed_volumes: np.ndarray, n_docs: int, aux_volumes: np.ndarray, pad_base: int
) -> CostMatrix:
    """SEAL-aware volume cost from power-of-x padded volumes.

    Entry (i,j) is the negated log-probability that Binomial(n_docs, v_i) lands
    in the padding bucket of the observed volume: [0, 1] for volume 1, else
    (x^(k-1), x^k]. Bucket probabilities are floored to keep costs finite.
    """
    if pad_base < 2:
        raise ValueError("pad_base must be >= 2")
    observed = np.asarray(observed_volumes, dtype=np.int64)
    if observed.size and observed.min() < 1:
        raise ValueError("observed volumes must be >= 1")
    buckets = np.empty(observed.size, dtype=np.int64)
    for j, vol in enumerate(observed):
        k = ceil_log(int(vol), pad_base)
        if pad_base**k != int(vol):
            raise ValueError(f"observed volume {vol} is not a power of {pad_base}")
        buckets[j] = k

    n_buckets = ceil_log(max(n_docs, 1), pad_base)
    edges = np.array([pad_base**k for k in range(n_buckets + 1)], dtype=np.int64)
    aux = np.asarray(aux_volumes, dtype=np.float64)
    values = np.empty((aux.size, observed.size))
    in_range = buckets <= n_buckets
    for i, q in enumerate(aux):
        log_mass = binom_bucket_logmass(n_docs, float(q), edges)
        floored = np.maximum(log_mass, LOG_TINY)
        row = np.full(observed.size, -LOG_TINY)
        row[in_range] = -floored[buckets[in_range]]
        values[i] = row
    return CostMatrix(values, kind="volume")


def combine(cost_vol: CostMatrix, cost_frequency: CostMatrix, alpha: float) -> CostMatrix:
    """Entrywise (1 - alpha) * C_v + alpha * C_f; alpha=0.5 is argmin-equivalent
    to minimizing C_v + C_f."""
    if cost_vol.values.shape != cost_frequency.values.shape:
        raise ValueError("cost matrices must share dimensions")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    values = (1.0 - alpha) * cost_vol.values + alpha * cost_frequency.values
    return CostMatrix(values, kind="combined")


def solve_assignment(cost: CostMatrix) -> Assignment:
    """Injective tag -> keyword map minimizing the summed selected costs.

    Requires at least as many keywords as tags; ties among optimal assignments
    break toward the lexicographically smallest keyword_of vector.
    """
    n, m = cost.values.shape
    if m > n:
        raise ValueError(f"more tags ({m}) than keywords ({n})")
    keyword_of = solve_rectangular_assignment(cost.values.T)
    objective = float(cost.values[keyword_of, np.arange(m)].sum())
    return Assignment(keyword_of, objective)


def sap_attack(
    tags: TagTable,
    aux: AuxKnowledge,
    freq_aux: TrendMatrix,
    defense: DefenseConfig,
    cfg: AttackConfig,
) -> Assignment:
    """Full maximum-likelihood attack: build C_f and C_v, combine, assign.

    With defense_aware=False (or no defense) the volume cost treats observed
    volumes as undefended; otherwise the builder matching the defense is used.
    """
    n = aux.volumes.size
    if tags.m > n:
        raise ValueError("more tags than keywords; auxiliary knowledge too small")
    if freq_aux.n_keywords != n or freq_aux.n_intervals != tags.n_intervals:
        raise ValueError("auxiliary trend matrix dimensions do not match")
    c_f = cost_freq(tags.freq, tags.counts, freq_aux.matrix, cfg.p_min)
    if not cfg.defense_aware or defense.kind == "none":
        c_v = cost_vol_plain(tags.volumes, tags.n_docs, aux.volumes, cfg.v_clamp)
    elif defense.kind == "clrz":
        c_v = cost_vol_clrz(
            tags.volumes, tags.n_docs, aux.volumes, defense.tpr, defense.fpr, cfg.v_clamp
        )
    elif defense.kind == "ppyy":
        c_v = cost_vol_ppyy(tags.raw_volumes, tags.n_docs, aux.volumes, defense.epsilon, n)
    else:  # seal
        c_v = cost_vol_seal(tags.raw_volumes, tags.n_docs, aux.volumes, defense.pad_base)
    return solve_assignment(combine(c_v, c_f, cfg.alpha))


def liu_attack(freq_obs: np.ndarray, freq_aux: np.ndarray | TrendMatrix) -> np.ndarray:
    """Frequency-only baseline: each tag maps independently to the keyword whose
    trend row is nearest in Euclidean distance (not necessarily injective)."""
    if isinstance(freq_aux, TrendMatrix):
        freq_aux = freq_aux.matrix
    f = np.asarray(freq_obs, dtype=np.float64)
    g = np.asarray(freq_aux, dtype=np.float64)
    if f.shape[1] != g.shape[1]:
        raise ValueError("interval dimensions do not match")
    # ||f_j - g_i||^2 expanded; ties resolve to the smallest keyword index.
    sq = (f**2).sum(axis=1)[:, None] + (g**2).sum(axis=1)[None, :] - 2.0 * (f @ g.T)
    return np.argmin(sq, axis=1).astype(np.int64)
