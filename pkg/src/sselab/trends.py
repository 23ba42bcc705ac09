"""Query popularity over time: trend tables, offset views and query generation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import KeywordUniverse

COLUMN_SUM_TOL = 1e-9


@dataclass
class TrendMatrix:
    """Column-stochastic keyword-vs-interval query probability matrix."""

    matrix: np.ndarray  # (n_keywords, n_intervals)

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError("trend matrix must be 2-D")
        if self.matrix.min(initial=0.0) < 0.0:
            raise ValueError("trend matrix entries must be >= 0")
        sums = self.matrix.sum(axis=0)
        if self.matrix.shape[0] and not np.all(np.abs(sums - 1.0) <= COLUMN_SUM_TOL):
            raise ValueError("trend matrix columns must each sum to 1")

    @property
    def n_keywords(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.matrix.shape[1]


@dataclass
class QueryLog:
    """Client queries as (interval, keyword_index) rows in emission order."""

    queries: np.ndarray  # (n_queries, 2) int64
    n_intervals: int

    def __post_init__(self) -> None:
        self.queries = np.asarray(self.queries, dtype=np.int64).reshape(-1, 2)
        if self.queries.size:
            if self.queries[:, 0].min() < 0 or self.queries[:, 0].max() >= self.n_intervals:
                raise ValueError("query interval out of range")
            if self.queries[:, 1].min() < 0:
                raise ValueError("negative keyword index in query log")

    @property
    def n_queries(self) -> int:
        return self.queries.shape[0]


@dataclass(frozen=True)
class QueryRate:
    """Average queries per interval plus the adversary's trend staleness in weeks."""

    avg_per_interval: float
    offset_weeks: int = 0

    def __post_init__(self) -> None:
        if self.avg_per_interval <= 0:
            raise ValueError("avg_per_interval must be > 0")
        if self.offset_weeks < 0:
            raise ValueError("offset_weeks must be >= 0")


@dataclass
class TrendTable:
    """Raw (unnormalized) keyword popularity series backing TrendMatrix windows."""

    keywords: list[str]
    values: np.ndarray  # (n_keywords, n_weeks), raw popularity >= 0
    week_labels: list[str]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.keywords), len(self.week_labels)):
            raise ValueError("trend table shape mismatch")
        if self.values.size and self.values.min() < 0:
            raise ValueError("trend table popularity values must be >= 0")

    @property
    def n_weeks(self) -> int:
        return self.values.shape[1]

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("keyword," + ",".join(self.week_labels) + "\n")
            for kw, row in zip(self.keywords, self.values):
                fh.write(kw + "," + ",".join(format(v, ".10g") for v in row) + "\n")

    @classmethod
    def read_csv(cls, path: str | Path) -> "TrendTable":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines:
            raise ValueError(f"{path}: empty trend table")
        header = lines[0].split(",")
        week_labels = header[1:]
        keywords = []
        rows = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != len(week_labels) + 1:
                raise ValueError(f"{path}:{lineno}: expected {len(week_labels)} values")
            keywords.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
        return cls(keywords, np.array(rows, dtype=np.float64), week_labels)


def _normalize_columns(raw: np.ndarray, zero_columns: str) -> np.ndarray:
    sums = raw.sum(axis=0)
    zero = sums == 0.0
    if zero.any():
        if zero_columns == "error":
            raise ValueError("trend window contains an all-zero column")
        raw = raw.copy()
        raw[:, zero] = 1.0
        sums = raw.sum(axis=0)
    return raw / sums


def load_trends(
    table: TrendTable,
    universe: KeywordUniverse,
    window: tuple[int, int],
    zero_columns: str = "uniform",
) -> TrendMatrix:
    """Restrict the table to the universe keywords and window, then column-normalize.

    All-zero columns become uniform columns unless zero_columns="error".
    """
    start, stop = window
    if not (0 <= start < stop <= table.n_weeks):
        raise ValueError(f"window {window} out of range for table with {table.n_weeks} weeks")
    row_of = {kw: i for i, kw in enumerate(table.keywords)}
    rows = []
    for word in universe.words:
        if word not in row_of:
            raise ValueError(f"trend table has no row for universe keyword {word!r}")
        rows.append(row_of[word])
    raw = table.values[np.asarray(rows, dtype=np.intp), start:stop]
    return TrendMatrix(_normalize_columns(raw, zero_columns))


def offset_view(
    table: TrendTable,
    universe: KeywordUniverse,
    window: tuple[int, int],
    tau: int,
    zero_columns: str = "uniform",
) -> TrendMatrix:
    """The adversary's stale view: load_trends on the window shifted tau weeks back."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    start, stop = window
    if start - tau < 0:
        raise ValueError(f"window {window} shifted by tau={tau} falls off the table")
    return load_trends(table, universe, (start - tau, stop - tau), zero_columns)


def generate_queries(
    f_true: TrendMatrix, rate: QueryRate, rng: np.random.Generator
) -> QueryLog:
    """Poisson query counts per (keyword, interval) with rate eta * f[i, k].

    Within an interval the emitted records are in keyword-index order; the
    model is exchangeable inside an interval so order carries no information.
    """
    lam = rate.avg_per_interval * f_true.matrix
    counts = rng.poisson(lam)  # (n, rho)
    records = []
    for k in range(f_true.n_intervals):
        col = counts[:, k]
        hit = np.flatnonzero(col)
        if hit.size:
            kws = np.repeat(hit, col[hit])
            records.append(np.column_stack([np.full(kws.size, k, dtype=np.int64), kws]))
    if records:
        queries = np.concatenate(records, axis=0)
    else:
        queries = np.empty((0, 2), dtype=np.int64)
    return QueryLog(queries, f_true.n_intervals)


def synth_trends(
    n: int, n_intervals: int, concentration: float, rng: np.random.Generator
) -> TrendMatrix:
    """Columns drawn as normalized Gamma(concentration, 1) vectors (Dirichlet-like)."""
    if n < 1 or n_intervals < 1:
        raise ValueError("n and n_intervals must be >= 1")
    if concentration <= 0:
        raise ValueError("concentration must be > 0")
    draws = rng.gamma(concentration, 1.0, size=(n, n_intervals))
    sums = draws.sum(axis=0)
    # Gamma draws can underflow to an all-zero column for tiny concentrations.
    zero = sums == 0.0
    if zero.any():
        draws[:, zero] = 1.0
        sums = draws.sum(axis=0)
    return TrendMatrix(draws / sums)


def synth_trend_table(
    keywords: list[str], n_weeks: int, concentration: float, rng: np.random.Generator
) -> TrendTable:
    """Raw synthetic popularity table for the given keywords."""
    values = rng.gamma(concentration, 1.0, size=(len(keywords), n_weeks))
    labels = [f"w{k}" for k in range(n_weeks)]
    return TrendTable(list(keywords), values, labels)


def save_query_log(log: QueryLog, path: str | Path) -> None:
    """One 'interval,keyword_index' line per query, for replay."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"# n_intervals={log.n_intervals}\n")
        for k, i in log.queries:
            fh.write(f"{k},{i}\n")


def load_query_log(path: str | Path) -> QueryLog:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# n_intervals="):
        raise ValueError(f"{path}: not a query log file")
    n_intervals = int(lines[0].split("=", 1)[1])
    rows = []
    for line in lines[1:]:
        if line.strip():
            k, i = line.split(",")
            rows.append((int(k), int(i)))
    queries = np.array(rows, dtype=np.int64) if rows else np.empty((0, 2), dtype=np.int64)
    return QueryLog(queries, n_intervals)
