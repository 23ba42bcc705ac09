"""Seeded end-to-end experiment runs, metrics, aggregation and persistence.

Every run draws all randomness from streams derived from (base_seed, seed,
stage label), so results are bit-reproducible across processes and adding a
stage never perturbs the draws of earlier stages.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .attack import Assignment, AttackConfig, liu_attack, sap_attack
from .corpus import (
    Corpus,
    build_index,
    build_universe,
    compute_aux,
    load_corpus_cache,
    split_corpus,
    synth_corpus,
)
from .leakage import (
    DefenseConfig,
    TagTable,
    baseline_documents,
    overhead_percent,
    returned_documents,
    simulate,
    tag_observations,
)
from .trends import (
    QueryRate,
    TrendMatrix,
    TrendTable,
    generate_queries,
    load_trends,
    offset_view,
    synth_trends,
)

RESULT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    """Parameters for a self-contained Zipf-weighted random corpus."""

    n_docs: int
    vocab_size: int
    zipf_exponent: float


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment cell: data sources, scheme, defense, attack and seeds."""

    n: int
    eta_avg: float
    corpus_cache: str | None = None
    synth_corpus: SyntheticCorpusSpec | None = None
    trends_table: str | None = None
    trends_concentration: float | None = 1.0
    pool_size: int = 3000
    n_intervals: int = 50
    tau: int = 5
    defense: DefenseConfig = DefenseConfig("none")
    attack: AttackConfig = AttackConfig()
    attack_kind: str = "sap"
    repetitions: int = 30
    base_seed: int = 0

    def __post_init__(self) -> None:
        if (self.corpus_cache is None) == (self.synth_corpus is None):
            raise ValueError("exactly one of corpus_cache / synth_corpus must be set")
        if (self.trends_table is None) == (self.trends_concentration is None):
            raise ValueError("exactly one of trends_table / trends_concentration must be set")
        if self.n < 1 or self.n > self.pool_size:
            raise ValueError("need 1 <= n <= pool_size")
        if self.eta_avg <= 0:
            raise ValueError("eta_avg must be > 0")
        if self.n_intervals < 1:
            raise ValueError("n_intervals must be >= 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.attack_kind not in ("sap", "liu"):
            raise ValueError(f"unknown attack kind {self.attack_kind!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be >= 0")

    def params(self) -> dict:
        """Flat, JSON-friendly description used for hashing and reporting."""
        out = {
            "n": self.n,
            "eta_avg": self.eta_avg,
            "pool_size": self.pool_size,
            "n_intervals": self.n_intervals,
            "tau": self.tau,
            "defense": self.defense.kind,
            "attack": self.attack_kind,
            "alpha": self.attack.alpha,
            "defense_aware": self.attack.defense_aware,
            "p_min": self.attack.p_min,
            "v_clamp": self.attack.v_clamp,
            "repetitions": self.repetitions,
            "base_seed": self.base_seed,
        }
        if self.defense.kind == "clrz":
            out["tpr"] = self.defense.tpr
            out["fpr"] = self.defense.fpr
        elif self.defense.kind == "ppyy":
            out["epsilon"] = self.defense.epsilon
        elif self.defense.kind == "seal":
            out["oram_exponent"] = self.defense.oram_exponent
            out["pad_base"] = self.defense.pad_base
        if self.corpus_cache is not None:
            out["corpus"] = f"cache:{self.corpus_cache}"
        else:
            spec = self.synth_corpus
            out["corpus"] = (
                f"synthetic:docs={spec.n_docs},vocab={spec.vocab_size},zipf={spec.zipf_exponent}"
            )
        if self.trends_table is not None:
            out["trends"] = f"table:{self.trends_table}"
        else:
            out["trends"] = f"synthetic:concentration={self.trends_concentration}"
        return out

    def config_hash(self) -> str:
        canon = json.dumps(self.params(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class RunResult:
    """Metrics of one seeded run."""

    seed: int
    weighted_accuracy: float
    unweighted_accuracy: float
    overhead_percent: float
    m_tags: int
    total_queries: int
    attack_runtime_seconds: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.weighted_accuracy <= 1.0):
            raise ValueError("weighted accuracy out of [0, 1]")
        if not (0.0 <= self.unweighted_accuracy <= 1.0):
            raise ValueError("unweighted accuracy out of [0, 1]")


def stage_rng(base_seed: int, seed: int, label: str) -> np.random.Generator:
    """Independent generator for one pipeline stage of one run."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([base_seed, seed, *words]))


@lru_cache(maxsize=4)
def _cached_corpus(path: str) -> Corpus:
    return load_corpus_cache(path)


@lru_cache(maxsize=4)
def _cached_trend_table(path: str) -> TrendTable:
    return TrendTable.read_csv(path)


def _load_corpus(cfg: ExperimentConfig, seed: int) -> Corpus:
    if cfg.corpus_cache is not None:
        return _cached_corpus(cfg.corpus_cache)
    spec = cfg.synth_corpus
    rng = stage_rng(cfg.base_seed, seed, "corpus")
    return synth_corpus(spec.n_docs, spec.vocab_size, spec.zipf_exponent, rng)


def _trend_views(cfg: ExperimentConfig, universe, seed: int) -> tuple[TrendMatrix, TrendMatrix]:
    """(true trends, adversary's tau-offset view) for the sampled universe."""
    rho, tau = cfg.n_intervals, cfg.tau
    if cfg.trends_table is not None:
        table = _cached_trend_table(cfg.trends_table)
        window = (table.n_weeks - rho, table.n_weeks)
        f_true = load_trends(table, universe, window)
        f_aux = offset_view(table, universe, window, tau)
        return f_true, f_aux
    rng = stage_rng(cfg.base_seed, seed, "trends")
    full = synth_trends(cfg.n, rho + tau, cfg.trends_concentration, rng).matrix
    return TrendMatrix(full[:, tau : tau + rho]), TrendMatrix(full[:, 0:rho])


def weighted_accuracy(predictions: Assignment | np.ndarray, tags: TagTable) -> float:
    """Fraction of the client's queries whose keyword the attack names correctly."""
    pred = predictions.keyword_of if isinstance(predictions, Assignment) else predictions
    pred = np.asarray(pred, dtype=np.int64)
    if tags.truth.size == 0 or tags.truth.min() < 0:
        raise ValueError("tag table carries no ground truth")
    total = int(tags.tag_counts.sum())
    if total == 0:
        raise ValueError("zero observed queries")
    correct = int(tags.tag_counts[pred == tags.truth].sum())
    return correct / total


def unweighted_accuracy(predictions: Assignment | np.ndarray, tags: TagTable) -> float:
    """Fraction of distinct observed tags mapped to the correct keyword."""
    pred = predictions.keyword_of if isinstance(predictions, Assignment) else predictions
    pred = np.asarray(pred, dtype=np.int64)
    if tags.m == 0:
        raise ValueError("empty tag table")
    if tags.truth.min() < 0:
        raise ValueError("tag table carries no ground truth")
    return float((pred == tags.truth).mean())


def run_once(cfg: ExperimentConfig, seed: int) -> RunResult:
    """Execute one full pipeline run; deterministic in (config, base_seed, seed)."""
    if seed < 0:
        raise ValueError("seed must be >= 0")
    corpus = _load_corpus(cfg, seed)
    universe = build_universe(corpus, cfg.pool_size, cfg.n, stage_rng(cfg.base_seed, seed, "universe"))
    client, adversary = split_corpus(corpus, stage_rng(cfg.base_seed, seed, "split"))
    index = build_index(client, universe)
    aux = compute_aux(adversary, universe, include_cooccurrence=False)
    f_true, f_aux = _trend_views(cfg, universe, seed)

    rate = QueryRate(cfg.eta_avg, cfg.tau)
    queries = generate_queries(f_true, rate, stage_rng(cfg.base_seed, seed, "queries"))
    if queries.n_queries == 0:
        raise ValueError("run generated zero queries; raise eta_avg or n_intervals")

    obs = simulate(queries, index, cfg.defense, stage_rng(cfg.base_seed, seed, "defense"))
    tags = tag_observations(obs)

    start = time.perf_counter()
    if cfg.attack_kind == "sap":
        predictions: Assignment | np.ndarray = sap_attack(tags, aux, f_aux, cfg.defense, cfg.attack)
    else:
        predictions = liu_attack(tags.freq, f_aux)
    runtime = time.perf_counter() - start

    overhead = overhead_percent(returned_documents(obs), baseline_documents(queries, index))
    return RunResult(
        seed=seed,
        weighted_accuracy=weighted_accuracy(predictions, tags),
        unweighted_accuracy=unweighted_accuracy(predictions, tags),
        overhead_percent=overhead,
        m_tags=tags.m,
        total_queries=queries.n_queries,
        attack_runtime_seconds=runtime,
    )


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    ci_low: float
    ci_high: float
    n_runs: int


def summarize(values: Sequence[float]) -> MetricSummary:
    """Sample mean/std and 95% normal-approximation confidence interval."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("nothing to aggregate")
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    half = 1.96 * std / np.sqrt(arr.size)
    return MetricSummary(mean, std, mean - half, mean + half, arr.size)


AGGREGATED_METRICS = (
    "weighted_accuracy",
    "unweighted_accuracy",
    "overhead_percent",
    "m_tags",
    "total_queries",
    "attack_runtime_seconds",
)


def aggregate(results: Sequence[RunResult]) -> dict[str, MetricSummary]:
    """Per-metric summaries across repeated runs."""
    if not results:
        raise ValueError("nothing to aggregate")
    return {
        name: summarize([getattr(r, name) for r in results]) for name in AGGREGATED_METRICS
    }


def result_record(cfg: ExperimentConfig, result: RunResult) -> dict:
    record = {
        "schema_version": RESULT_SCHEMA_VERSION,
        "config_hash": cfg.config_hash(),
        "params": cfg.params(),
    }
    record.update(asdict(result))
    return record


def read_results(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad result record: {exc}") from exc
    return records


def _existing_keys(path: Path) -> set[tuple[str, int]]:
    if not path.exists():
        return set()
    return {(r["config_hash"], r["seed"]) for r in read_results(path)}


def _suite_worker(cfg: ExperimentConfig, seed: int) -> dict:
    return result_record(cfg, run_once(cfg, seed))


@dataclass
class SuiteOutcome:
    written: int
    skipped: int
    failures: list[tuple[str, int, str]]  # (config_hash, seed, error)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_suite(
    configs: Sequence[ExperimentConfig],
    results_path: str | Path,
    jobs: int = 1,
    progress=None,
) -> SuiteOutcome:
    """Run every (config, seed) cell, appending one record per completed run.

    Already-present (config_hash, seed) records are skipped, so an interrupted
    suite resumes where it stopped. Failures are collected per record and do
    not abort the rest of the suite.
    """
    path = Path(results_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    existing = _existing_keys(path)
    tasks: list[tuple[ExperimentConfig, int]] = []
    skipped = 0
    for cfg in configs:
        h = cfg.config_hash()
        for seed in range(cfg.repetitions):
            if (h, seed) in existing:
                skipped += 1
            else:
                tasks.append((cfg, seed))

    failures: list[tuple[str, int, str]] = []
    written = 0
    with path.open("a", encoding="utf-8") as fh:

        def emit(record: dict) -> None:
            nonlocal written
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()
            written += 1
            if progress is not None:
                progress(record)

        if jobs <= 1:
            for cfg, seed in tasks:
                try:
                    emit(_suite_worker(cfg, seed))
                except Exception as exc:  # noqa: BLE001 - per-record isolation
                    failures.append((cfg.config_hash(), seed, str(exc)))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                pending = {
                    pool.submit(_suite_worker, cfg, seed): (cfg, seed) for cfg, seed in tasks
                }
                while pending:
                    done, _ = wait(pending, return_when=FIRST_COMPLETED)
                    for fut in done:
                        cfg, seed = pending.pop(fut)
                        try:
                            emit(fut.result())
                        except Exception as exc:  # noqa: BLE001
                            failures.append((cfg.config_hash(), seed, str(exc)))
    return SuiteOutcome(written, skipped, failures)
