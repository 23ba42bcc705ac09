import json

import numpy as np
import pytest

from sselab.corpus import (
    Corpus,
    Document,
    KeywordUniverse,
    build_index,
    build_universe,
    compute_aux,
    extract_keywords,
    ingest_corpus,
    load_corpus_cache,
    load_word_list,
    save_corpus_cache,
    split_corpus,
    synth_corpus,
    synth_keyword_probabilities,
)


class TestExtractKeywords:
    def test_stopword_and_dictionary_filtering(self):
        got = extract_keywords(
            "The widgetcorp Meeting agenda",
            dictionary={"meeting", "agenda", "the"},
            stopwords={"the"},
        )
        # stopwords drop "the"; "widgetcorp" is not a dictionary word
        assert got == {"meeting", "agenda"}

    def test_empty_text(self):
        assert extract_keywords("", {"word"}, set()) == set()

    def test_case_folding_no_stemming(self):
        got = extract_keywords("run RUN running", {"run", "running"}, set())
        assert got == {"run", "running"}

    def test_splits_on_non_alphabetic(self):
        got = extract_keywords("budget2020,revenue;gas", {"budget", "revenue", "gas"}, set())
        assert got == {"budget", "revenue", "gas"}


class TestBuildUniverse:
    def test_pool_equals_n_gives_top_frequency_set(self, small_corpus, rng):
        # doc frequencies: alpha 4, beta 3, gamma 2, delta 1, epsilon 1
        uni = build_universe(small_corpus, pool_size=3, n=3, rng=rng)
        assert set(uni.keywords) == {0, 1, 2}

    def test_low_frequency_keyword_excluded_from_pool(self, rng):
        docs = [Document(i, frozenset({0})) for i in range(5)]
        docs += [Document(5 + i, frozenset({1})) for i in range(3)]
        docs += [Document(8, frozenset({2}))]
        corpus = Corpus(docs, ["a", "b", "c"])
        for seed in range(10):
            uni = build_universe(corpus, 2, 1, np.random.default_rng(seed))
            assert set(uni.keywords) <= {0, 1}

    def test_deterministic_under_seed(self, small_corpus):
        a = build_universe(small_corpus, 5, 3, np.random.default_rng(9))
        b = build_universe(small_corpus, 5, 3, np.random.default_rng(9))
        assert a.keywords == b.keywords

    def test_full_vocabulary(self, small_corpus, rng):
        uni = build_universe(small_corpus, 5, 5, rng)
        assert set(uni.keywords) == set(range(5))
        assert set(uni.words) == set(small_corpus.vocabulary)

    def test_rejects_bad_sizes(self, small_corpus, rng):
        with pytest.raises(ValueError):
            build_universe(small_corpus, 6, 2, rng)
        with pytest.raises(ValueError):
            build_universe(small_corpus, 3, 4, rng)

    def test_frequency_ties_broken_lexicographically(self, rng):
        # "b" and "a" both appear once; pool of size 1 must prefer "a".
        corpus = Corpus([Document(0, frozenset({0, 1}))], ["b", "a"])
        uni = build_universe(corpus, 1, 1, rng)
        assert uni.words == ("a",)


class TestSplitCorpus:
    def test_even_split_partitions(self, rng):
        corpus = Corpus([Document(i, frozenset({0})) for i in range(4)], ["w"])
        client, adversary = split_corpus(corpus, rng)
        assert client.n_docs == 2 and adversary.n_docs == 2
        ids = {d.doc_id for d in client.documents} | {d.doc_id for d in adversary.documents}
        assert ids == {0, 1, 2, 3}
        assert not ({d.doc_id for d in client.documents} & {d.doc_id for d in adversary.documents})

    def test_odd_split_gives_client_the_extra_document(self, rng):
        corpus = Corpus([Document(i, frozenset()) for i in range(5)], [])
        client, adversary = split_corpus(corpus, rng)
        assert client.n_docs == 3 and adversary.n_docs == 2

    def test_deterministic_under_seed(self, small_corpus):
        a1, b1 = split_corpus(small_corpus, np.random.default_rng(3))
        a2, b2 = split_corpus(small_corpus, np.random.default_rng(3))
        assert [d.doc_id for d in a1.documents] == [d.doc_id for d in a2.documents]
        assert [d.doc_id for d in b1.documents] == [d.doc_id for d in b2.documents]

    def test_rejects_tiny_corpus(self, rng):
        with pytest.raises(ValueError):
            split_corpus(Corpus([Document(0, frozenset())], []), rng)


class TestBuildIndex:
    def test_incidence_rows(self):
        corpus = Corpus([Document(0, frozenset({0, 2}))], ["w1", "w2", "w3"])
        uni = KeywordUniverse((0, 1, 2), ("w1", "w2", "w3"))
        index = build_index(corpus, uni)
        assert index.matrix.tolist() == [[1, 0, 1]]

    def test_empty_keyword_set_gives_zero_row(self):
        corpus = Corpus([Document(0, frozenset())], ["w"])
        index = build_index(corpus, KeywordUniverse((0,), ("w",)))
        assert index.matrix.tolist() == [[0]]

    def test_keyword_outside_universe_ignored(self):
        corpus = Corpus([Document(0, frozenset({0, 1}))], ["w1", "w2"])
        index = build_index(corpus, KeywordUniverse((0,), ("w1",)))
        assert index.matrix.tolist() == [[1]]

    def test_column_sums_match_volumes_exactly(self, small_corpus, rng):
        uni = build_universe(small_corpus, 5, 5, rng)
        index = build_index(small_corpus, uni)
        aux = compute_aux(small_corpus, uni)
        assert np.array_equal(
            index.column_counts(), (aux.volumes * small_corpus.n_docs).round().astype(int)
        )


class TestComputeAux:
    def test_direct_counting(self):
        corpus = Corpus(
            [Document(0, frozenset({0})), Document(1, frozenset({0, 1}))], ["w1", "w2"]
        )
        aux = compute_aux(corpus, KeywordUniverse((0, 1), ("w1", "w2")))
        assert aux.volumes.tolist() == [1.0, 0.5]
        assert aux.cooccurrence[0, 1] == 0.5

    def test_absent_keyword_has_zero_volume(self):
        corpus = Corpus([Document(0, frozenset({0}))], ["w1", "w2"])
        aux = compute_aux(corpus, KeywordUniverse((0, 1), ("w1", "w2")))
        assert aux.volumes[1] == 0.0

    def test_diagonal_equals_volumes(self, small_corpus, rng):
        uni = build_universe(small_corpus, 5, 4, rng)
        aux = compute_aux(small_corpus, uni)
        assert np.allclose(np.diag(aux.cooccurrence), aux.volumes)
        assert np.allclose(aux.cooccurrence, aux.cooccurrence.T)

    def test_skip_cooccurrence(self, small_corpus, rng):
        uni = build_universe(small_corpus, 5, 4, rng)
        aux = compute_aux(small_corpus, uni, include_cooccurrence=False)
        assert aux.cooccurrence is None

    def test_rejects_empty_corpus(self):
        with pytest.raises(ValueError):
            compute_aux(Corpus([], ["w"]), KeywordUniverse((0,), ("w",)))


class TestSynthCorpus:
    def test_zipf_zero_is_equiprobable_within_three_sigma(self):
        n_docs, n_kw = 10_000, 12
        corpus = synth_corpus(n_docs, n_kw, 0.0, np.random.default_rng(1))
        uni = KeywordUniverse(tuple(range(n_kw)), tuple(corpus.vocabulary))
        counts = build_index(corpus, uni).column_counts()
        p = 0.5  # clamp(0.5 * rank^0, 0.001, 0.5)
        sigma = np.sqrt(n_docs * p * (1 - p))
        assert np.all(np.abs(counts - n_docs * p) <= 3 * sigma)

    def test_single_document(self, rng):
        corpus = synth_corpus(1, 5, 1.0, rng)
        assert corpus.n_docs == 1

    def test_seed_reproducibility(self):
        a = synth_corpus(50, 10, 1.0, np.random.default_rng(7))
        b = synth_corpus(50, 10, 1.0, np.random.default_rng(7))
        assert [d.keywords for d in a.documents] == [d.keywords for d in b.documents]

    def test_probability_clamp(self):
        probs = synth_keyword_probabilities(5000, 2.0)
        assert probs.max() <= 0.5 and probs.min() >= 0.001

    def test_rejects_bad_arguments(self, rng):
        with pytest.raises(ValueError):
            synth_corpus(0, 5, 1.0, rng)
        with pytest.raises(ValueError):
            synth_corpus(5, 5, -1.0, rng)


class TestCorpusIO:
    def test_cache_round_trip(self, small_corpus, tmp_path):
        path = tmp_path / "cache.jsonl"
        save_corpus_cache(small_corpus, path)
        loaded = load_corpus_cache(path)
        assert loaded.vocabulary == small_corpus.vocabulary
        assert [d.keywords for d in loaded.documents] == [
            d.keywords for d in small_corpus.documents
        ]

    def test_ingest_from_directory(self, fixtures_dir):
        dictionary = load_word_list(fixtures_dir / "dictionary.txt")
        stopwords = load_word_list(fixtures_dir / "stopwords.txt")
        corpus = ingest_corpus(fixtures_dir / "docs", dictionary, stopwords)
        assert corpus.n_docs == 3
        assert "the" not in corpus.vocabulary
        assert "meeting" in corpus.vocabulary

    def test_ingest_from_jsonl(self, tmp_path):
        records = tmp_path / "docs.jsonl"
        records.write_text(
            json.dumps({"id": 0, "text": "budget meeting"})
            + "\n"
            + json.dumps({"id": 1, "text": "gas markets"})
            + "\n"
        )
        corpus = ingest_corpus(records, {"budget", "meeting", "gas", "markets"}, set())
        assert corpus.n_docs == 2
        assert sorted(corpus.vocabulary) == ["budget", "gas", "markets", "meeting"]

    def test_ingest_rejects_empty_directory(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(ValueError):
            ingest_corpus(empty, {"a"}, set())

    def test_ingest_rejects_bad_record(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        path.write_text(json.dumps({"id": 0}) + "\n")
        with pytest.raises(ValueError, match="text"):
            ingest_corpus(path, {"a"}, set())


class TestValidation:
    def test_duplicate_doc_ids_rejected(self):
        with pytest.raises(ValueError):
            Corpus([Document(0, frozenset()), Document(0, frozenset())], [])

    def test_out_of_range_keyword_rejected(self):
        with pytest.raises(ValueError):
            Corpus([Document(0, frozenset({3}))], ["w"])

    def test_duplicate_universe_entries_rejected(self):
        with pytest.raises(ValueError):
            KeywordUniverse((0, 0), ("a", "a"))
