"""Server-side observations under the baseline scheme and the three defenses.

The simulator never builds tokens or ciphertexts; it produces exactly the
access/search pattern structure an honest-but-curious server would record:
per-query patterns, tags, volumes, frequencies and co-occurrence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import InvertedIndex
from .trends import QueryLog

_CLRZ_CHUNK = 256  # columns obfuscated per RNG draw, keeps peak memory bounded


@dataclass(frozen=True)
class DefenseConfig:
    """Which defense is simulated and its parameters; unused fields are ignored."""

    kind: str  # none | clrz | ppyy | seal
    tpr: float = 1.0
    fpr: float = 0.0
    epsilon: float = 1.0
    oram_exponent: int = 0
    pad_base: int = 2

    def __post_init__(self) -> None:
        if self.kind not in ("none", "clrz", "ppyy", "seal"):
            raise ValueError(f"unknown defense kind {self.kind!r}")
        if self.kind == "clrz":
            if not (0.0 <= self.fpr < self.tpr <= 1.0):
                raise ValueError("clrz requires 0 <= fpr < tpr <= 1")
        if self.kind == "ppyy" and self.epsilon <= 0:
            raise ValueError("ppyy requires epsilon > 0")
        if self.kind == "seal":
            if self.oram_exponent < 0:
                raise ValueError("seal requires oram_exponent >= 0")
            if self.pad_base < 2:
                raise ValueError("seal requires pad_base >= 2")

    @classmethod
    def none(cls) -> "DefenseConfig":
        return cls("none")

    @classmethod
    def clrz(cls, tpr: float, fpr: float) -> "DefenseConfig":
        return cls("clrz", tpr=tpr, fpr=fpr)

    @classmethod
    def ppyy(cls, epsilon: float) -> "DefenseConfig":
        return cls("ppyy", epsilon=epsilon)

    @classmethod
    def seal(cls, oram_exponent: int, pad_base: int) -> "DefenseConfig":
        return cls("seal", oram_exponent=oram_exponent, pad_base=pad_base)


@dataclass(frozen=True)
class AccessPattern:
    """What the server sees for one query; payload depends on the defense kind.

    none/clrz expose matching document ids, ppyy an opaque token plus padded
    volume, seal quantized ORAM blocks plus padded volume. ``volume`` is always
    the number of documents returned.
    """

    kind: str
    volume: int
    doc_ids: tuple[int, ...] | None = None
    token: int | None = None
    blocks: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.volume < 0:
            raise ValueError("volume must be >= 0")


@dataclass
class ObservationSequence:
    """Per-query (interval, pattern) records as observed by the server.

    ``truth_keywords`` is the simulator's ground truth (generating keyword per
    record); it is carried only so runs can be scored and is never read by the
    attacks.
    """

    records: list[tuple[int, AccessPattern]]
    n_docs: int
    n_intervals: int
    truth_keywords: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.truth_keywords is not None:
            self.truth_keywords = np.asarray(self.truth_keywords, dtype=np.int64)
            if self.truth_keywords.shape != (len(self.records),):
                raise ValueError("truth_keywords length must match records")


@dataclass
class TagTable:
    """Observation statistics collapsed per distinct access pattern.

    freq columns are per-interval tag shares (all-zero when the interval had
    no queries); cooccurrence is None for defenses that hide document ids.
    truth maps each tag to the keyword that first produced its pattern and is
    used only for scoring, never by the attacks.
    """

    patterns: list[AccessPattern]
    raw_volumes: np.ndarray  # (m,) int64, observed volume per tag
    volumes: np.ndarray  # (m,) float64, raw / n_docs
    freq: np.ndarray  # (m, rho)
    counts: np.ndarray  # (rho,) int64, queries per interval
    tag_counts: np.ndarray  # (m,) int64, total queries per tag
    cooccurrence: np.ndarray | None  # (m, m) or None
    truth: np.ndarray  # (m,) int64
    n_docs: int

    @property
    def m(self) -> int:
        return len(self.patterns)

    @property
    def n_intervals(self) -> int:
        return self.freq.shape[1]


def obfuscate_index_clrz(
    index: InvertedIndex, tpr: float, fpr: float, rng: np.random.Generator
) -> InvertedIndex:
    """Independent per-entry flips: 1 kept with probability TPR, 0 raised with FPR."""
    if not (0.0 <= fpr < tpr <= 1.0):
        raise ValueError("requires 0 <= fpr < tpr <= 1")
    src = index.matrix
    out = np.empty_like(src)
    for start in range(0, src.shape[1], _CLRZ_CHUNK):
        block = src[:, start : start + _CLRZ_CHUNK]
        u = rng.random(block.shape)
        keep = block == 1
        out[:, start : start + _CLRZ_CHUNK] = np.where(keep, u < tpr, u < fpr).astype(np.uint8)
    return InvertedIndex(out, index.n_docs)


def ppyy_pad_constant(epsilon: float, n_keywords: int) -> float:
    """Deterministic shift 2(log n + 64 log 2)/epsilon added to the Laplace noise."""
    return 2.0 * (math.log(n_keywords) + 64.0 * math.log(2.0)) / epsilon


def sample_ppyy_pads(
    count: int, epsilon: float, n_keywords: int, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    """Per-keyword volume pads ceil(Lap(2/eps) + shift), clamped at 0.

    Returns the pads and the number of loss events (negative pads before
    clamping); the shift makes those ~2^-64 rare.
    """
    noise = rng.laplace(0.0, 2.0 / epsilon, size=count)
    pads = np.ceil(noise + ppyy_pad_constant(epsilon, n_keywords)).astype(np.int64)
    loss_events = int((pads < 0).sum())
    if loss_events:
        pads = np.maximum(pads, 0)
    return pads, loss_events


def setup_ppyy_volumes(
    index: InvertedIndex, epsilon: float, n_keywords: int, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    """Padded per-keyword volumes drawn once at setup, plus the loss-event count."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if n_keywords < 1:
        raise ValueError("n_keywords must be >= 1")
    true_volumes = index.column_counts()
    pads, loss_events = sample_ppyy_pads(true_volumes.size, epsilon, n_keywords, rng)
    return true_volumes + pads, loss_events


def ceil_log(value: int, base: int) -> int:
    """Smallest k >= 0 with base**k >= value, exact integer arithmetic."""
    if value < 1:
        raise ValueError("value must be >= 1")
    k = 0
    power = 1
    while power < value:
        power *= base
        k += 1
    return k


def seal_pattern(
    doc_ids: frozenset[int] | set[int], n_docs: int, oram_exponent: int, pad_base: int
) -> AccessPattern:
    """Quantized block set plus multiplicative volume padding.

    Blocks are contiguous document-id ranges of size ceil(n_docs / 2^alpha);
    volumes pad up to the next power of pad_base, with empty results padded
    to volume 1.
    """
    if pad_base < 2:
        raise ValueError("pad_base must be >= 2")
    if oram_exponent < 0 or (n_docs > 0 and oram_exponent > ceil_log(n_docs, 2)):
        raise ValueError("oram_exponent must be in [0, ceil(log2 n_docs)]")
    block_size = max(1, math.ceil(n_docs / (2**oram_exponent)))
    blocks = tuple(sorted({doc // block_size for doc in doc_ids}))
    true_volume = max(len(doc_ids), 1)
    padded = pad_base ** ceil_log(true_volume, pad_base)
    return AccessPattern(kind="seal", volume=padded, blocks=blocks)


def _doc_ids_of_column(matrix: np.ndarray, col: int) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(matrix[:, col]))


def simulate(
    queries: QueryLog,
    index: InvertedIndex,
    defense: DefenseConfig,
    rng: np.random.Generator,
) -> ObservationSequence:
    """Replay the query log through the (possibly defended) scheme.

    Every keyword maps to one fixed pattern for the whole run: the search
    pattern always leaks. CLRZ obfuscates the index once up front; PPYY draws
    its pads and opaque tokens once at setup; SEAL is deterministic.
    """
    n = index.n_keywords
    queried = np.unique(queries.queries[:, 1]) if queries.n_queries else np.array([], dtype=np.int64)
    if queried.size and queried.max() >= n:
        raise ValueError("query log references a keyword outside the index")

    pattern_of: dict[int, AccessPattern] = {}
    if defense.kind in ("none", "clrz"):
        matrix = index.matrix
        if defense.kind == "clrz":
            matrix = obfuscate_index_clrz(index, defense.tpr, defense.fpr, rng).matrix
        for kw in queried:
            ids = _doc_ids_of_column(matrix, int(kw))
            pattern_of[int(kw)] = AccessPattern(kind="docs", volume=len(ids), doc_ids=ids)
    elif defense.kind == "ppyy":
        padded, _ = setup_ppyy_volumes(index, defense.epsilon, n, rng)
        tokens = rng.permutation(n)
        for kw in queried:
            pattern_of[int(kw)] = AccessPattern(
                kind="ppyy", volume=int(padded[kw]), token=int(tokens[kw])
            )
    else:  # seal
        for kw in queried:
            ids = frozenset(int(i) for i in np.flatnonzero(index.matrix[:, int(kw)]))
            pattern_of[int(kw)] = seal_pattern(
                ids, index.n_docs, defense.oram_exponent, defense.pad_base
            )

    records = [(int(k), pattern_of[int(kw)]) for k, kw in queries.queries]
    truth = queries.queries[:, 1].copy() if queries.n_queries else np.empty(0, dtype=np.int64)
    return ObservationSequence(records, index.n_docs, queries.n_intervals, truth)


def tag_observations(obs: ObservationSequence) -> TagTable:
    """Collapse observations into tags (one per distinct pattern, by first appearance)."""
    if not obs.records:
        raise ValueError("cannot tag an empty observation sequence")
    tag_of: dict[AccessPattern, int] = {}
    tag_interval: list[tuple[int, int]] = []
    for k, pattern in obs.records:
        tag = tag_of.setdefault(pattern, len(tag_of))
        tag_interval.append((tag, k))
    m = len(tag_of)
    patterns = [None] * m
    for pattern, tag in tag_of.items():
        patterns[tag] = pattern

    pairs = np.asarray(tag_interval, dtype=np.int64)
    rho = obs.n_intervals
    count_matrix = np.zeros((m, rho), dtype=np.int64)
    np.add.at(count_matrix, (pairs[:, 0], pairs[:, 1]), 1)
    counts = count_matrix.sum(axis=0)
    freq = np.zeros((m, rho), dtype=np.float64)
    nonzero = counts > 0
    freq[:, nonzero] = count_matrix[:, nonzero] / counts[nonzero]

    raw_volumes = np.array([p.volume for p in patterns], dtype=np.int64)
    volumes = raw_volumes / float(obs.n_docs)

    cooccurrence = None
    if all(p.kind == "docs" for p in patterns):
        incidence = np.zeros((m, obs.n_docs), dtype=np.float64)
        for tag, pattern in enumerate(patterns):
            if pattern.doc_ids:
                incidence[tag, list(pattern.doc_ids)] = 1.0
        cooccurrence = (incidence @ incidence.T) / float(obs.n_docs)

    # On pattern collisions the first generating keyword wins, so at most one
    # of the colliding keywords can ever be scored as recovered.
    truth = np.full(m, -1, dtype=np.int64)
    if obs.truth_keywords is not None:
        for (tag, _), kw in zip(tag_interval, obs.truth_keywords):
            if truth[tag] < 0:
                truth[tag] = kw

    return TagTable(
        patterns=patterns,
        raw_volumes=raw_volumes,
        volumes=volumes,
        freq=freq,
        counts=counts,
        tag_counts=count_matrix.sum(axis=1),
        cooccurrence=cooccurrence,
        truth=truth,
        n_docs=obs.n_docs,
    )


def overhead_percent(n_returned: int, n_baseline: int) -> float:
    """Bandwidth overhead (N_R / N_r - 1) * 100 of a defended run vs no defense."""
    if n_baseline <= 0:
        raise ValueError("baseline document count must be > 0")
    return (n_returned / n_baseline - 1.0) * 100.0


def returned_documents(obs: ObservationSequence) -> int:
    """Total documents the server returned; padded volumes count for PPYY/SEAL."""
    return int(sum(pattern.volume for _, pattern in obs.records))


def baseline_documents(queries: QueryLog, index: InvertedIndex) -> int:
    """Documents an undefended server would have returned for the same queries."""
    true_counts = index.column_counts()
    if queries.n_queries == 0:
        return 0
    return int(true_counts[queries.queries[:, 1]].sum())


def tag_table_to_jsonl(table: TagTable, path: str | Path) -> None:
    """Per-tag debugging dump: volumes, counts, truth and frequency rows."""
    with Path(path).open("w", encoding="utf-8") as fh:
        header = {
            "m": table.m,
            "n_docs": table.n_docs,
            "n_intervals": table.n_intervals,
            "interval_counts": table.counts.tolist(),
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for tag in range(table.m):
            rec = {
                "tag": tag,
                "kind": table.patterns[tag].kind,
                "raw_volume": int(table.raw_volumes[tag]),
                "volume": float(table.volumes[tag]),
                "count": int(table.tag_counts[tag]),
                "truth": int(table.truth[tag]),
                "freq": table.freq[tag].tolist(),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def observations_to_jsonl(obs: ObservationSequence, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        header = {"n_docs": obs.n_docs, "n_intervals": obs.n_intervals}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i, (k, p) in enumerate(obs.records):
            rec = {"interval": k, "kind": p.kind, "volume": p.volume}
            if p.doc_ids is not None:
                rec["doc_ids"] = list(p.doc_ids)
            if p.token is not None:
                rec["token"] = p.token
            if p.blocks is not None:
                rec["blocks"] = list(p.blocks)
            if obs.truth_keywords is not None:
                rec["keyword"] = int(obs.truth_keywords[i])
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def observations_from_jsonl(path: str | Path) -> ObservationSequence:
    with Path(path).open(encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        records = []
        truth = []
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            pattern = AccessPattern(
                kind=rec["kind"],
                volume=rec["volume"],
                doc_ids=tuple(rec["doc_ids"]) if "doc_ids" in rec else None,
                token=rec.get("token"),
                blocks=tuple(rec["blocks"]) if "blocks" in rec else None,
            )
            records.append((rec["interval"], pattern))
            if "keyword" in rec:
                truth.append(rec["keyword"])
    truth_arr = np.asarray(truth, dtype=np.int64) if len(truth) == len(records) else None
    return ObservationSequence(records, header["n_docs"], header["n_intervals"], truth_arr)
