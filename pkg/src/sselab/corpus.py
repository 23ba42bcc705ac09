"""Document collections: keyword extraction, universes, indices and splits.

Documents carry keyword *sets* (indices into a shared vocabulary). The
client/adversary halves produced by ``split_corpus`` share the vocabulary, so
keyword indices remain valid across the split.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

_TOKEN_RE = re.compile(r"[a-z]+")

CACHE_FORMAT = "sselab-corpus"
CACHE_VERSION = 1


@dataclass(frozen=True)
class Document:
    """One document: unique id plus the set of vocabulary indices it contains."""

    doc_id: int
    keywords: frozenset[int]


@dataclass
class Corpus:
    """Ordered documents plus the vocabulary their keyword indices point into."""

    documents: list[Document]
    vocabulary: list[str]

    def __post_init__(self) -> None:
        ids = [d.doc_id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate document ids in corpus")
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ValueError("duplicate vocabulary entries")
        n_vocab = len(self.vocabulary)
        for doc in self.documents:
            if doc.keywords and (min(doc.keywords) < 0 or max(doc.keywords) >= n_vocab):
                raise ValueError(f"document {doc.doc_id} has out-of-range keyword index")

    @property
    def n_docs(self) -> int:
        return len(self.documents)


@dataclass(frozen=True)
class KeywordUniverse:
    """The n keywords the client may query, as vocabulary indices plus strings."""

    keywords: tuple[int, ...]
    words: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.keywords)) != len(self.keywords):
            raise ValueError("duplicate keywords in universe")
        if len(self.words) != len(self.keywords):
            raise ValueError("universe words/indices length mismatch")

    @property
    def n(self) -> int:
        return len(self.keywords)


@dataclass
class InvertedIndex:
    """Binary document-keyword incidence matrix, one row per document."""

    matrix: np.ndarray  # (n_docs, n) uint8
    n_docs: int

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.uint8)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.n_docs:
            raise ValueError("index matrix shape does not match n_docs")
        if self.matrix.size and self.matrix.max() > 1:
            raise ValueError("index entries must be 0/1")

    @property
    def n_keywords(self) -> int:
        return self.matrix.shape[1]

    def column_counts(self) -> np.ndarray:
        """Number of documents matching each keyword."""
        return self.matrix.sum(axis=0, dtype=np.int64)


@dataclass
class AuxKnowledge:
    """Adversary-side keyword volumes and (optional) co-occurrence estimates."""

    volumes: np.ndarray  # (n,) in [0, 1]
    cooccurrence: np.ndarray | None  # (n, n) symmetric, diagonal == volumes

    def __post_init__(self) -> None:
        self.volumes = np.asarray(self.volumes, dtype=np.float64)
        if self.volumes.min(initial=0.0) < 0.0 or self.volumes.max(initial=0.0) > 1.0:
            raise ValueError("auxiliary volumes must lie in [0, 1]")
        if self.cooccurrence is not None:
            co = np.asarray(self.cooccurrence, dtype=np.float64)
            if co.shape != (self.volumes.size, self.volumes.size):
                raise ValueError("co-occurrence shape mismatch")
            if not np.allclose(co, co.T):
                raise ValueError("co-occurrence matrix must be symmetric")
            if not np.allclose(np.diag(co), self.volumes):
                raise ValueError("co-occurrence diagonal must equal volumes")
            self.cooccurrence = co


def extract_keywords(raw_text: str, dictionary: set[str], stopwords: set[str]) -> set[str]:
    """Lowercased alphabetic tokens of raw_text that are dictionary words and not stopwords."""
    tokens = _TOKEN_RE.findall(raw_text.lower())
    return {t for t in tokens if t in dictionary and t not in stopwords}


def build_universe(
    corpus: Corpus, pool_size: int, n: int, rng: np.random.Generator
) -> KeywordUniverse:
    """Sample n keywords uniformly from the pool_size most document-frequent ones.

    Frequency ties are broken by lexicographic keyword order so the pool is a
    deterministic function of the corpus.
    """
    if pool_size > len(corpus.vocabulary):
        raise ValueError(f"pool_size {pool_size} exceeds vocabulary size {len(corpus.vocabulary)}")
    if n > pool_size:
        raise ValueError(f"universe size {n} exceeds pool_size {pool_size}")
    counts = np.zeros(len(corpus.vocabulary), dtype=np.int64)
    for doc in corpus.documents:
        for kw in doc.keywords:
            counts[kw] += 1
    order = sorted(range(len(corpus.vocabulary)), key=lambda i: (-counts[i], corpus.vocabulary[i]))
    pool = order[:pool_size]
    chosen = rng.choice(len(pool), size=n, replace=False)
    indices = tuple(pool[i] for i in chosen)
    return KeywordUniverse(indices, tuple(corpus.vocabulary[i] for i in indices))


def split_corpus(corpus: Corpus, rng: np.random.Generator) -> tuple[Corpus, Corpus]:
    """Uniform random partition into client (ceil(N/2) docs) and adversary halves."""
    n = corpus.n_docs
    if n < 2:
        raise ValueError("cannot split a corpus with fewer than 2 documents")
    perm = rng.permutation(n)
    half = (n + 1) // 2
    client_idx = sorted(perm[:half].tolist())
    adversary_idx = sorted(perm[half:].tolist())
    client = Corpus([corpus.documents[i] for i in client_idx], corpus.vocabulary)
    adversary = Corpus([corpus.documents[i] for i in adversary_idx], corpus.vocabulary)
    return client, adversary


def build_index(corpus: Corpus, universe: KeywordUniverse) -> InvertedIndex:
    """Exact binary incidence matrix; keywords outside the universe are ignored."""
    col_of = {kw: j for j, kw in enumerate(universe.keywords)}
    matrix = np.zeros((corpus.n_docs, universe.n), dtype=np.uint8)
    for row, doc in enumerate(corpus.documents):
        for kw in doc.keywords:
            j = col_of.get(kw)
            if j is not None:
                matrix[row, j] = 1
    return InvertedIndex(matrix, corpus.n_docs)


def compute_aux(
    adversary_corpus: Corpus,
    universe: KeywordUniverse,
    include_cooccurrence: bool = True,
) -> AuxKnowledge:
    """Keyword volume and co-occurrence frequencies estimated on the training half.

    ``include_cooccurrence=False`` skips the O(n^2) matrix for attacks that only
    consume volumes.
    """
    if adversary_corpus.n_docs == 0:
        raise ValueError("cannot compute auxiliary knowledge from an empty corpus")
    index = build_index(adversary_corpus, universe)
    n_docs = float(adversary_corpus.n_docs)
    volumes = index.column_counts() / n_docs
    cooccurrence = None
    if include_cooccurrence:
        b = index.matrix.astype(np.float64)
        cooccurrence = (b.T @ b) / n_docs
    return AuxKnowledge(volumes, cooccurrence)


def synth_corpus(
    n_docs: int, n_keywords: int, zipf_exponent: float, rng: np.random.Generator
) -> Corpus:
    """Synthetic corpus: document d contains keyword i with probability
    clamp(0.5 * (i+1)^-zipf_exponent, 0.001, 0.5), independently."""
    if n_docs < 1 or n_keywords < 1:
        raise ValueError("n_docs and n_keywords must be >= 1")
    if zipf_exponent < 0:
        raise ValueError("zipf_exponent must be >= 0")
    ranks = np.arange(1, n_keywords + 1, dtype=np.float64)
    probs = np.clip(0.5 * ranks ** (-zipf_exponent), 0.001, 0.5)
    width = len(str(n_keywords - 1)) if n_keywords > 1 else 1
    vocabulary = [f"kw{i:0{width}d}" for i in range(n_keywords)]
    documents = []
    for d in range(n_docs):
        hits = np.flatnonzero(rng.random(n_keywords) < probs)
        documents.append(Document(d, frozenset(int(i) for i in hits)))
    return Corpus(documents, vocabulary)


def synth_keyword_probabilities(n_keywords: int, zipf_exponent: float) -> np.ndarray:
    """Per-keyword inclusion probabilities used by synth_corpus."""
    ranks = np.arange(1, n_keywords + 1, dtype=np.float64)
    return np.clip(0.5 * ranks ** (-zipf_exponent), 0.001, 0.5)


def load_word_list(path: str | Path) -> set[str]:
    """Word set from a one-word-per-line text file (blank lines ignored)."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip()
        if word:
            words.add(word.lower())
    return words


def _iter_raw_documents(path: Path) -> Iterable[tuple[int, str]]:
    """Yield (id, text) from a directory of .txt files or a JSONL records file."""
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix == ".txt")
        for i, p in enumerate(files):
            yield i, p.read_text(encoding="utf-8", errors="replace")
    elif path.is_file():
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: not a JSON record: {exc}") from exc
                if "id" not in rec or "text" not in rec:
                    raise ValueError(f"{path}:{lineno}: record needs 'id' and 'text' fields")
                yield int(rec["id"]), str(rec["text"])
    else:
        raise ValueError(f"corpus input not found: {path}")


def ingest_corpus(
    input_path: str | Path, dictionary: set[str], stopwords: set[str]
) -> Corpus:
    """Extract keyword sets from raw documents and build the shared vocabulary."""
    raw: list[tuple[int, set[str]]] = []
    vocab_words: set[str] = set()
    for doc_id, text in _iter_raw_documents(Path(input_path)):
        kws = extract_keywords(text, dictionary, stopwords)
        raw.append((doc_id, kws))
        vocab_words.update(kws)
    if not raw:
        raise ValueError(f"no documents found in {input_path}")
    vocabulary = sorted(vocab_words)
    index_of = {w: i for i, w in enumerate(vocabulary)}
    documents = [
        Document(doc_id, frozenset(index_of[w] for w in kws)) for doc_id, kws in raw
    ]
    return Corpus(documents, vocabulary)


def save_corpus_cache(corpus: Corpus, path: str | Path) -> None:
    """Write the preprocessed corpus as line-delimited records.

    First record holds the vocabulary; following records are
    {"id": ..., "keywords": [sorted indices]}.
    """
    with Path(path).open("w", encoding="utf-8") as fh:
        header = {
            "format": CACHE_FORMAT,
            "version": CACHE_VERSION,
            "vocabulary": corpus.vocabulary,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for doc in corpus.documents:
            rec = {"id": doc.doc_id, "keywords": sorted(doc.keywords)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_corpus_cache(path: str | Path) -> Corpus:
    """Read a cache produced by save_corpus_cache."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise ValueError(f"{path}: empty corpus cache")
        header = json.loads(header_line)
        if header.get("format") != CACHE_FORMAT:
            raise ValueError(f"{path}: not a corpus cache file")
        vocabulary = list(header["vocabulary"])
        documents = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            documents.append(Document(int(rec["id"]), frozenset(rec["keywords"])))
    return Corpus(documents, vocabulary)
